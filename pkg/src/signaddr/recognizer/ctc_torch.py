"""Batched, differentiable CTC negative log-likelihood for training."""
import torch

# finite stand-in for log(0): keeps logsumexp gradients free of NaN
NEG = -1e30


def ctc_nll(log_probs: torch.Tensor, targets, blank: int = 0) -> torch.Tensor:
    """Per-sample ``-log p(target | frames)``.

    Args:
        log_probs: ``(T, B, C)`` log-softmax outputs.
        targets: list of B integer label lists (no blanks).

    Returns:
        ``(B,)`` tensor of losses.
    """
    T, B, C = log_probs.shape
    L = max((len(t) for t in targets), default=0)
    S = 2 * L + 1
    ext = torch.full((B, S), blank, dtype=torch.long)
    for b, t in enumerate(targets):
        if t:
            ext[b, 1 : 2 * len(t) : 2] = torch.as_tensor(t, dtype=torch.long)
    allow = torch.zeros((B, S), dtype=torch.bool)
    allow[:, 2:] = (ext[:, 2:] != blank) & (ext[:, 2:] != ext[:, :-2])
    lengths = torch.tensor([2 * len(t) + 1 for t in targets], dtype=torch.long)

    emit = log_probs.gather(2, ext.unsqueeze(0).expand(T, B, S))  # (T, B, S)
    neg = log_probs.new_full((B, 1), NEG)
    alpha = log_probs.new_full((B, S), NEG)
    alpha[:, 0] = emit[0, :, 0]
    if S > 1:
        alpha[:, 1] = emit[0, :, 1]
    for t in range(1, T):
        step = torch.cat((neg, alpha[:, :-1]), dim=1)
        skip = torch.cat((neg, neg, alpha[:, :-2]), dim=1)[:, :S]
        skip = torch.where(allow, skip, torch.full_like(skip, NEG))
        alpha = torch.logsumexp(torch.stack((alpha, step, skip)), dim=0) + emit[t]
    last = alpha.gather(1, (lengths - 1).unsqueeze(1)).squeeze(1)
    prev = alpha.gather(1, (lengths - 2).clamp(min=0).unsqueeze(1)).squeeze(1)
    prev = torch.where(lengths > 1, prev, torch.full_like(prev, NEG))
    return -torch.logsumexp(torch.stack((last, prev)), dim=0)
