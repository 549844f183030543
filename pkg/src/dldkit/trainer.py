"""Desk-scale harness: synthetic noisy-label data, a two-layer ReLU net trained
by SGD with hand-derived gradients, and sweeps over noise/decay settings."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dld import DLDConfig, alpha as decay_alpha, dld_loss
from .dynamics import EpochSeries, InsufficientPoints, detect_el


class InvalidParams(Exception):
    pass


class DivergenceDetected(Exception):
    def __init__(self, message: str, partial_log: "TrainLog"):
        super().__init__(message)
        self.partial_log = partial_log


@dataclass
class SyntheticDataset:
    x: np.ndarray  # (N, d)
    clean_labels: np.ndarray  # (N,) int
    noisy_labels: np.ndarray  # (N,) int
    num_classes: int
    separation: float
    ratio: float
    seed: int

    @property
    def noise_mask(self) -> np.ndarray:
        return self.clean_labels != self.noisy_labels


@dataclass
class MlpModel:
    w1: np.ndarray  # (d, H)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, C)
    b2: np.ndarray  # (C,)


@dataclass
class LogRow:
    epoch: int
    acc: float
    clean_acc: float
    correct_subset_acc: float
    corrupted_fit: float
    loss: float
    alpha: float
    topk_size: int


@dataclass
class TrainLog:
    rows: list[LogRow] = field(default_factory=list)
    el: int | None = None
    el_never_detected: bool = False

    CSV_HEADER = "epoch,acc,clean_acc,correct_subset_acc,corrupted_fit,loss,alpha,topk_size"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.epoch},{r.acc!r},{r.clean_acc!r},{r.correct_subset_acc!r},"
                f"{r.corrupted_fit!r},{r.loss!r},{r.alpha!r},{r.topk_size}"
            )
        return "\n".join(lines) + "\n"

    def acc_series(self) -> EpochSeries:
        return EpochSeries(
            tuple(r.epoch for r in self.rows),
            tuple(r.acc for r in self.rows),
            "acc",
        )


def _class_means(num_classes: int, dim: int, separation: float) -> np.ndarray:
    """Class centers scaled by ``separation``.

    Mutually equidistant placement needs dim >= C-1; below that the centers go
    on the unit circle in the first two dims, the closest available spread.
    """
    if dim >= num_classes:
        means = np.eye(num_classes, dim)
    elif dim == num_classes - 1:
        # Regular simplex: basis vectors projected off their common centroid.
        corners = np.eye(num_classes)
        centered = corners - corners.mean(axis=0)
        # Orthonormal basis of the centered span gives C-1 coordinates.
        q, _ = np.linalg.qr(centered.T)
        means = centered @ q[:, : num_classes - 1]
        means /= np.linalg.norm(means[0])
    else:
        if dim < 2:
            raise InvalidParams("need dim >= 2 for fewer dims than classes")
        angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
        means = np.zeros((num_classes, dim))
        means[:, 0] = np.cos(angles)
        means[:, 1] = np.sin(angles)
    return separation * means


def generate_dataset(
    num_classes: int,
    dim: int,
    n_samples: int,
    separation: float,
    ratio: float,
    seed: int,
) -> SyntheticDataset:
    """Gaussian blobs around spread-out class centers, with symmetric label noise."""
    if num_classes < 2 or n_samples < num_classes:
        raise InvalidParams(f"need C >= 2 and N >= C, got C={num_classes} N={n_samples}")
    if not (0.0 <= ratio <= 1.0):
        raise InvalidParams(f"ratio must be in [0, 1], got {ratio}")
    rng = np.random.default_rng(seed)
    means = _class_means(num_classes, dim, separation)
    clean = rng.integers(0, num_classes, size=n_samples)
    x = means[clean] + rng.standard_normal((n_samples, dim))
    noisy = clean.copy()
    n_corrupt = int(ratio * n_samples)
    if n_corrupt > 0:
        chosen = rng.choice(n_samples, size=n_corrupt, replace=False)
        # Uniform over the C-1 other labels, no fixed points.
        offsets = rng.integers(1, num_classes, size=n_corrupt)
        noisy[chosen] = (clean[chosen] + offsets) % num_classes
    return SyntheticDataset(x, clean, noisy, num_classes, separation, ratio, seed)


# First-layer init scale. Inputs are unnormalized (magnitude ~ separation), so
# a fan-in He gain makes SGD at the default lr oscillate instead of converge;
# a small scale keeps training stable and stretches the early-learning rise
# over several epochs so the accuracy curve's saturation is observable.
INIT_SCALE = 0.005


def init_model(dim: int, hidden: int, num_classes: int, seed: int) -> MlpModel:
    if hidden < 1:
        raise InvalidParams(f"hidden size must be >= 1, got {hidden}")
    rng = np.random.default_rng(seed)
    w1 = rng.standard_normal((dim, hidden)) * (INIT_SCALE / math.sqrt(dim))
    # Zero readout: the net starts exactly at the uniform prediction.
    w2 = np.zeros((hidden, num_classes))
    return MlpModel(w1, np.zeros(hidden), w2, np.zeros(num_classes))


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Softmax class probabilities, rows summing to 1. x is (N, d) or (d,)."""
    single = x.ndim == 1
    xb = x[None, :] if single else x
    # Divergence shows up as overflow here and is reported by the caller via
    # the loss check, so numpy's warnings would be redundant noise.
    with np.errstate(over="ignore", invalid="ignore"):
        hidden = np.maximum(xb @ model.w1 + model.b1, 0.0)
        logits = hidden @ model.w2 + model.b2
        logits = logits - logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        probs = exp / exp.sum(axis=1, keepdims=True)
    return probs[0] if single else probs


def backward(
    model: MlpModel,
    x: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of (1/N) * sum_i w_i * CE(p_i, target_i).

    ``targets`` is (N, C) (one-hot or smoothed); the per-sample logit gradient
    is w_i * (p_i - target_i) / N.
    """
    n = x.shape[0]
    pre1 = x @ model.w1 + model.b1
    hidden = np.maximum(pre1, 0.0)
    logits = hidden @ model.w2 + model.b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)

    dlogits = weights[:, None] * (probs - targets) / n
    grad_w2 = hidden.T @ dlogits
    grad_b2 = dlogits.sum(axis=0)
    dhidden = dlogits @ model.w2.T
    dpre1 = dhidden * (pre1 > 0.0)
    grad_w1 = x.T @ dpre1
    grad_b1 = dpre1.sum(axis=0)
    return {"w1": grad_w1, "b1": grad_b1, "w2": grad_w2, "b2": grad_b2}


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def _smooth_targets(labels: np.ndarray, num_classes: int, epsilon: float) -> np.ndarray:
    return (1.0 - epsilon) * _one_hot(labels, num_classes) + epsilon / num_classes


@dataclass(frozen=True)
class TrainConfig:
    num_classes: int = 4
    dim: int = 2
    n_samples: int = 2000
    separation: float = 4.0
    ratio: float = 0.4
    hidden: int = 256
    lr: float = 0.05
    batch_size: int = 64
    epochs: int = 36
    loss_mode: str = "baseline"  # baseline | ls | dld
    epsilon: float = 0.1  # label smoothing strength
    dld: DLDConfig = DLDConfig()
    el_mode: str = "fixed"  # fixed | auto
    eta: float = 0.001
    degree: int = 4
    min_epochs: int = 6
    el_offset: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.loss_mode not in ("baseline", "ls", "dld"):
            raise InvalidParams(f"unknown loss_mode {self.loss_mode!r}")
        if self.el_mode not in ("fixed", "auto"):
            raise InvalidParams(f"unknown el_mode {self.el_mode!r}")


def train(dataset: SyntheticDataset, cfg: TrainConfig) -> TrainLog:
    """SGD loop with pluggable loss; one log row per epoch, deterministic in seed."""
    rng = np.random.default_rng(cfg.seed)
    model = init_model(dataset.x.shape[1], cfg.hidden, dataset.num_classes, cfg.seed)
    log = TrainLog()
    n = dataset.x.shape[0]
    mask = dataset.noise_mask
    clean_frac = ~mask

    el: int | None = cfg.dld.el + cfg.el_offset if cfg.el_mode == "fixed" else None
    if el is not None and el < 1:
        el = 1

    for epoch in range(1, cfg.epochs + 1):
        if cfg.loss_mode == "dld" and cfg.el_mode == "auto" and el is None:
            try:
                found = detect_el(
                    log.acc_series(), cfg.eta, cfg.degree, cfg.min_epochs
                ).el
            except InsufficientPoints:
                found = None
            if found is not None:
                el = max(1, found + cfg.el_offset)

        order = rng.permutation(n)
        epoch_losses: list[float] = []
        epoch_alpha = 1.0
        epoch_topk = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = dataset.x[idx]
            yb = dataset.noisy_labels[idx]
            probs = forward(model, xb)
            per_sample = -np.log(
                np.maximum(probs[np.arange(len(idx)), yb], 1e-12)
            )

            if cfg.loss_mode == "ls":
                targets = _smooth_targets(yb, dataset.num_classes, cfg.epsilon)
                weights = np.ones(len(idx))
                scalar = float(
                    np.mean(-np.sum(targets * np.log(np.maximum(probs, 1e-12)), axis=1))
                )
            else:
                targets = _one_hot(yb, dataset.num_classes)
                if cfg.loss_mode == "dld" and el is not None and epoch >= el:
                    batch_cfg = replace(cfg.dld, el=el)
                    scalar, w = dld_loss(per_sample.tolist(), epoch, batch_cfg)
                    weights = np.asarray(w)
                    if cfg.dld.k_fraction > 0:
                        epoch_alpha = decay_alpha(
                            epoch, el, cfg.dld.schedule, cfg.dld.tau
                        )
                        epoch_topk = math.ceil(cfg.dld.k_fraction * len(idx))
                else:
                    weights = np.ones(len(idx))
                    # Same summation as the k=0 decayed path, so the two logs
                    # agree bitwise.
                    scalar = sum(per_sample.tolist()) / len(idx)
            epoch_losses.append(scalar)
            if not math.isfinite(scalar):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch}", log)

            grads = backward(model, xb, targets, weights)
            model.w1 -= cfg.lr * grads["w1"]
            model.b1 -= cfg.lr * grads["b1"]
            model.w2 -= cfg.lr * grads["w2"]
            model.b2 -= cfg.lr * grads["b2"]

        preds = forward(model, dataset.x).argmax(axis=1)
        acc = float(np.mean(preds == dataset.noisy_labels))
        clean_acc = float(np.mean(preds == dataset.clean_labels))
        correct_subset = (
            float(np.mean(preds[clean_frac] == dataset.clean_labels[clean_frac]))
            if clean_frac.any()
            else 0.0
        )
        corrupted_fit = (
            float(np.mean(preds[mask] == dataset.noisy_labels[mask]))
            if mask.any()
            else 0.0
        )
        active = cfg.loss_mode == "dld" and el is not None and epoch >= el
        log.rows.append(
            LogRow(
                epoch=epoch,
                acc=acc,
                clean_acc=clean_acc,
                correct_subset_acc=correct_subset,
                corrupted_fit=corrupted_fit,
                loss=float(np.mean(epoch_losses)),
                alpha=epoch_alpha if active else 1.0,
                topk_size=epoch_topk if active else 0,
            )
        )

    log.el = el
    log.el_never_detected = (
        cfg.loss_mode == "dld" and cfg.el_mode == "auto" and el is None
    )
    return log


SWEEP_CSV_HEADER = (
    "rho,k_fraction,el_offset,loss_mode,seed,final_acc,final_clean_acc,"
    "best_clean_acc,final_corrupted_fit,el,status"
)


def sweep(
    base: TrainConfig,
    rho_grid: list[float],
    k_grid: list[float],
    el_offset_grid: list[int],
    loss_modes: list[str],
    seeds: list[int],
) -> str:
    """Cartesian sweep; returns a CSV with per-seed rows then seed-mean rows.

    Rows appear in canonical (rho, k, el_offset, mode, seed) order regardless
    of execution order; a failed cell is recorded, not fatal.
    """
    if not (rho_grid and k_grid and el_offset_grid and loss_modes and seeds):
        raise InvalidParams("all sweep grids must be nonempty")
    lines = [SWEEP_CSV_HEADER]
    for rho, k, off, mode in itertools.product(
        rho_grid, k_grid, el_offset_grid, loss_modes
    ):
        cell_rows = []
        for seed in seeds:
            cfg = replace(
                base,
                ratio=rho,
                loss_mode=mode,
                el_offset=off if mode == "dld" else 0,
                dld=replace(base.dld, k_fraction=k),
                seed=seed,
            )
            try:
                dataset = generate_dataset(
                    cfg.num_classes, cfg.dim, cfg.n_samples, cfg.separation, rho, seed
                )
                log = train(dataset, cfg)
            except (DivergenceDetected, InvalidParams) as exc:
                lines.append(
                    f"{rho!r},{k!r},{off},{mode},{seed},,,,,,error:{type(exc).__name__}"
                )
                continue
            final = log.rows[-1]
            best_clean = max(r.clean_acc for r in log.rows)
            el_str = "" if log.el is None else str(log.el)
            lines.append(
                f"{rho!r},{k!r},{off},{mode},{seed},{final.acc!r},"
                f"{final.clean_acc!r},{best_clean!r},{final.corrupted_fit!r},"
                f"{el_str},ok"
            )
            cell_rows.append((final.acc, final.clean_acc, best_clean, final.corrupted_fit))
        if cell_rows:
            means = [sum(col) / len(cell_rows) for col in zip(*cell_rows)]
            lines.append(
                f"{rho!r},{k!r},{off},{mode},mean,{means[0]!r},{means[1]!r},"
                f"{means[2]!r},{means[3]!r},,ok"
            )
    return "\n".join(lines) + "\n"
