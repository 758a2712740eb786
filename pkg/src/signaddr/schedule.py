"""Learning-rate schedules."""
from typing import Callable


def linear_warmup_decay(warmup: int, total: int) -> Callable[[int], float]:
    """LR multiplier: linear ramp over ``warmup`` steps, then linear decay to 0 at ``total``."""

    def factor(step: int) -> float:
        if step < warmup:
            return (step + 1) / warmup
        return max(0.0, (total - step) / max(1, total - warmup))

    return factor
