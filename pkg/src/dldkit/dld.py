"""Dynamic loss decay: per-sample CE, top-K largest-loss selection, decay factor.

After the early-learning endpoint, the top-K largest per-sample losses (the
likeliest wrong labels) are re-weighted by an epoch-indexed factor alpha; the
rest of the batch is left untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Probability floor before taking the log: keeps losses bounded so the
# largest-loss ranking stays meaningful.
PROB_FLOOR = 1e-12


class ScheduleSingular(Exception):
    pass


@dataclass(frozen=True)
class DLDConfig:
    k_fraction: float = 0.05
    el: int = 1
    schedule: str = "exp_decay"  # or "paper_literal"
    tau: float = 10.0
    selection_scope: str = "per_batch"  # or "per_epoch"

    def __post_init__(self):
        if not (0.0 <= self.k_fraction <= 1.0):
            raise ValueError(f"k_fraction must be in [0, 1], got {self.k_fraction}")
        if self.el < 1:
            raise ValueError(f"el must be >= 1, got {self.el}")
        if self.schedule not in ("exp_decay", "paper_literal"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.selection_scope not in ("per_batch", "per_epoch"):
            raise ValueError(f"unknown selection_scope {self.selection_scope!r}")


def ce_loss(p: list[float], label: int) -> float:
    """Cross entropy -log p[label] with a floor to keep it finite."""
    return -math.log(max(p[label], PROB_FLOOR))


def ls_loss(p: list[float], label: int, epsilon: float) -> float:
    """CE against the label-smoothed target (1-eps)*onehot + eps/C."""
    if not (0.0 <= epsilon < 1.0):
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    c = len(p)
    total = 0.0
    for i, pi in enumerate(p):
        target = (1.0 - epsilon) * (1.0 if i == label else 0.0) + epsilon / c
        if target > 0.0:
            total -= target * math.log(max(pi, PROB_FLOOR))
    return total


def select_top_k(losses: list[float], k_fraction: float) -> tuple[list[int], list[int]]:
    """Indices of the ceil(k * N) largest losses, ties broken by lowest index.

    Returns (top_k_indices, rest_indices); both ascending, together a partition.
    """
    n = len(losses)
    k = 0 if k_fraction == 0.0 else math.ceil(k_fraction * n)
    order = sorted(range(n), key=lambda i: (-losses[i], i))
    top = sorted(order[:k])
    top_set = set(top)
    rest = [i for i in range(n) if i not in top_set]
    return top, rest


def alpha(ec: int, el: int, schedule: str = "exp_decay", tau: float = 10.0) -> float:
    """Decay factor applied to the top-K losses at current epoch ``ec``.

    exp_decay: exp(-(ec - el) / tau), 1 at ec == el, decaying toward 0.
    paper_literal: exp(10 / (ec - el)), singular at ec == el and > 1 after; kept
    for fidelity experiments despite its amplifying behavior.
    """
    if ec < el:
        raise ValueError(f"alpha is defined only for ec >= el (got ec={ec}, el={el})")
    if schedule == "exp_decay":
        return math.exp(-(ec - el) / tau)
    if schedule == "paper_literal":
        if ec == el:
            raise ScheduleSingular("literal schedule is undefined at ec == el")
        return math.exp(10.0 / (ec - el))
    raise ValueError(f"unknown schedule {schedule!r}")


def dld_loss(
    losses: list[float], ec: int, cfg: DLDConfig
) -> tuple[float, list[float]]:
    """Two-phase batch loss: plain mean before EL, decayed top-K after.

    Returns (scalar loss, per-sample weights); the scalar always equals
    sum(w_i * l_i) / N.
    """
    n = len(losses)
    if n == 0:
        raise ValueError("empty loss batch")
    if ec < cfg.el:
        weights = [1.0] * n
        return sum(losses) / n, weights
    a = alpha(ec, cfg.el, cfg.schedule, cfg.tau)
    top, _rest = select_top_k(losses, cfg.k_fraction)
    weights = [1.0] * n
    for i in top:
        weights[i] = a
    scalar = sum(w * l for w, l in zip(weights, losses)) / n
    return scalar, weights
