import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ctc_by_enumeration, random_frames, ref_collapse
from signaddr.errors import DomainError, ValidationError
from signaddr.recognizer import (
    Alphabet,
    RecognizerConfig,
    beam_decode,
    build_recognizer,
    collapse,
    ctc_log_probability,
    ctc_loss,
    ctc_probability,
    greedy_decode,
    load_pretrained_backbone,
    load_recognizer,
    min_frames,
    predict_texts,
    save_recognizer,
    train_recognizer,
    word_recognition_accuracy,
)
from signaddr.recognizer.ctc_torch import ctc_nll
from signaddr.synthgen import TextLineSample, fit_to_canvas, render_natural


def tiny_config(**kw):
    opts = dict(
        input_width=96,
        channels=(4, 8),
        height_pools=(8, 8),
        width_pools=(2, 2),
        hidden=16,
        attention_dim=16,
        embed_dim=8,
        optimizer="adam",
        lr=0.01,
        epochs=2,
        batch_size=2,
    )
    opts.update(kw)
    return RecognizerConfig(**opts)


def tiny_samples(texts=("ক", "খগ", "গক")):
    return [TextLineSample(fit_to_canvas(render_natural(t, seed=i)), t) for i, t in enumerate(texts)]


# ---------------------------------------------------------------------------
# CTC math


def test_collapse_examples():
    assert collapse([]) == []
    assert collapse([1, 1, 0, 1]) == [1, 1]
    assert collapse([0, 0]) == []
    assert collapse([2, 2, 1, 1, 0, 2]) == [2, 1, 2]


@given(st.lists(st.integers(0, 3), max_size=20))
def test_collapse_matches_reference(path):
    assert tuple(collapse(path)) == ref_collapse(path)


def test_probability_examples():
    y1 = np.array([[0.4, 0.6]])
    assert ctc_probability(y1, [1]) == pytest.approx(0.6, abs=1e-12)
    # paths a-a, a-blank, blank-a: 0.36 + 0.24 + 0.24
    y2 = np.array([[0.4, 0.6], [0.4, 0.6]])
    assert ctc_probability(y2, [1]) == pytest.approx(0.84, abs=1e-12)
    assert ctc_probability(np.full((1, 3), 1 / 3), [1, 2]) == 0.0
    assert ctc_log_probability(np.full((1, 3), 1 / 3), [1, 2]) == -math.inf


def test_loss_examples():
    y2 = np.log(np.array([[0.4, 0.6], [0.4, 0.6]]))
    loss, _ = ctc_loss(y2, [1])
    assert loss == pytest.approx(-math.log(0.84), abs=1e-12)
    certain = np.log(np.array([[1e-300, 1.0]]))
    assert ctc_loss(certain, [1])[0] == pytest.approx(0.0, abs=1e-12)


def test_unreachable_target_names_the_sample():
    with pytest.raises(DomainError, match="line-7"):
        ctc_loss(np.zeros((2, 3)), [1, 1], sample_id="line-7")
    assert min_frames([1, 1]) == 3 and min_frames([1, 2]) == 2 and min_frames([]) == 0
    with pytest.raises(ValidationError):
        ctc_loss(np.zeros((3, 3)), [0])


def test_gradient_rows_sum_to_zero():
    rng = np.random.default_rng(0)
    _, g = ctc_loss(rng.normal(size=(6, 4)), [1, 2, 1])
    assert np.allclose(g.sum(axis=1), 0.0, atol=1e-12)


def test_batched_torch_loss_matches_numpy():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(7, 3, 4))
    targets = [[1, 2], [3], []]
    lp = torch.log_softmax(torch.tensor(logits, requires_grad=True), dim=-1)
    ours = ctc_nll(lp, targets)
    for b, t in enumerate(targets):
        assert ours[b].item() == pytest.approx(ctc_loss(logits[:, b], t)[0], abs=1e-9)
    x = torch.tensor(logits, requires_grad=True)
    ctc_nll(torch.log_softmax(x, dim=-1), targets).sum().backward()
    for b, t in enumerate(targets):
        assert np.allclose(x.grad[:, b].numpy(), ctc_loss(logits[:, b], t)[1], atol=1e-9)


def test_greedy_example():
    y = np.array([[0.1, 0.9], [0.2, 0.8], [0.7, 0.3]])
    assert greedy_decode(y) == [1]


def test_beam_width_one_is_greedy():
    rng = np.random.default_rng(2)
    for _ in range(100):
        y = random_frames(rng, int(rng.integers(1, 7)), 4, sparse=rng.random() < 0.3)
        assert beam_decode(y, 1) == greedy_decode(y)


def test_beam_never_loses_probability_as_it_widens():
    rng = np.random.default_rng(3)
    for _ in range(50):
        y = random_frames(rng, 5, 3, sparse=False)
        probs = [ctc_probability(y, beam_decode(y, k)) for k in (1, 2, 4, 16, 64, None)]
        assert all(b >= a - 1e-15 for a, b in zip(probs, probs[1:]))
        best = max(ctc_by_enumeration(y).values())
        assert probs[-1] == pytest.approx(best, abs=1e-12)


def test_beam_rejects_zero_width():
    with pytest.raises(DomainError):
        beam_decode(np.full((2, 2), 0.5), 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(2, 3), st.integers(0, 2**31))
def test_probability_matches_enumeration(T, C, seed):
    y = random_frames(np.random.default_rng(seed), T, C, sparse=False)
    for label, p in ctc_by_enumeration(y).items():
        assert ctc_probability(y, list(label)) == pytest.approx(p, abs=1e-12)


# ---------------------------------------------------------------------------
# models


def test_default_frame_count():
    config = RecognizerConfig()
    assert config.frames == 150
    model = build_recognizer(config, Alphabet(list("ab")))
    y = model.frame_distributions([np.zeros((64, 600), dtype=np.float32)])
    assert y.shape == (1, 150, 3)
    assert np.allclose(y.sum(axis=-1), 1.0, atol=1e-6)


def test_config_validation():
    with pytest.raises(ValidationError):
        RecognizerConfig(input_width=601)
    with pytest.raises(ValidationError):
        RecognizerConfig(channels=(4, 8), height_pools=(2,), width_pools=(1, 1))
    with pytest.raises(ValidationError):
        RecognizerConfig(backbone="alexnet")
    with pytest.raises(ValidationError):
        RecognizerConfig.from_dict({"hiden": 3})
    c = tiny_config()
    assert RecognizerConfig.from_dict(c.to_dict()) == c


def test_alphabet_layout():
    a = Alphabet.from_texts(["ba", "c"])
    assert a.symbols == ["a", "b", "c"]
    assert a.blank == 0 and a.ctc_size == 4 and a.start == 4 and a.end == 5
    assert a.decode(a.encode("cab")) == "cab"
    with pytest.raises(ValidationError):
        a.encode("d")
    with pytest.raises(ValidationError):
        Alphabet(["a", "a"])


@pytest.mark.parametrize("backbone", ["vgg", "rcnn", "grcl", "resnet"])
@pytest.mark.parametrize("framework", ["ctc", "attention"])
def test_every_combination_recognizes_strings(backbone, framework):
    model = build_recognizer(tiny_config(backbone=backbone, framework=framework), Alphabet(list("কখগ")))
    out = model.recognize([s.image for s in tiny_samples()])
    assert len(out) == 3 and all(isinstance(t, str) for t in out)
    assert model.recognize([]) == []


def test_training_is_deterministic():
    samples = tiny_samples()
    runs = []
    for _ in range(2):
        model = build_recognizer(tiny_config(), Alphabet.from_texts(s.text for s in samples))
        runs.append(train_recognizer(model, samples).losses)
    assert runs[0] == runs[1]


def test_unreachable_samples_are_skipped_or_rejected():
    samples = tiny_samples(("ক", "ক" * 30))
    alphabet = Alphabet(["ক"])
    model = build_recognizer(tiny_config(epochs=1), alphabet)
    assert train_recognizer(model, samples).skipped == [1]
    strict = tiny_config(epochs=1, skip_unreachable=False)
    with pytest.raises(DomainError, match="sample 1"):
        train_recognizer(build_recognizer(strict, alphabet), samples)


def test_attention_decode_length_follows_training_texts():
    samples = tiny_samples()
    model = build_recognizer(tiny_config(framework="attention", epochs=1), Alphabet.from_texts(s.text for s in samples))
    train_recognizer(model, samples)
    assert model.max_decode_len == 4


@pytest.mark.parametrize("framework", ["ctc", "attention"])
def test_checkpoint_round_trip(tmp_path, framework):
    samples = tiny_samples()
    model = build_recognizer(tiny_config(framework=framework, epochs=1), Alphabet.from_texts(s.text for s in samples))
    train_recognizer(model, samples)
    save_recognizer(model, tmp_path / "r.pt")
    back = load_recognizer(tmp_path / "r.pt")
    images = [s.image for s in samples]
    assert predict_texts(back, images) == predict_texts(model, images)


def test_pretrained_backbone_hook():
    a = build_recognizer(tiny_config(seed=1), Alphabet(list("ab")))
    b = build_recognizer(tiny_config(seed=2), Alphabet(list("abc")))
    loaded = load_pretrained_backbone(b, a.encoder.backbone.state_dict())
    assert loaded
    for k, v in b.encoder.backbone.state_dict().items():
        assert torch.equal(v, a.encoder.backbone.state_dict()[k])


# ---------------------------------------------------------------------------
# accuracy


def test_word_recognition_accuracy_examples():
    refs = [f"line {i}" for i in range(10)]
    assert word_recognition_accuracy(refs, refs) == 1.0
    assert word_recognition_accuracy(["x"] * 10, refs) == 0.0
    assert word_recognition_accuracy(refs[:9] + ["wrong"], refs) == pytest.approx(0.9)
    assert word_recognition_accuracy(["a b c"], ["a x c"], unit="word") == pytest.approx(2 / 3)
    with pytest.raises(ValidationError):
        word_recognition_accuracy(["a"], ["a", "b"])
    with pytest.raises(ValidationError):
        word_recognition_accuracy(["a"], ["a"], unit="char")
