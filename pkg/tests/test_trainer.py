import math

import numpy as np
import pytest

from dldkit.dld import DLDConfig
from dldkit.trainer import (
    DivergenceDetected,
    InvalidParams,
    MlpModel,
    SWEEP_CSV_HEADER,
    TrainConfig,
    backward,
    forward,
    generate_dataset,
    init_model,
    sweep,
    train,
)


def random_model(rng, d=3, h=8, c=4):
    return MlpModel(
        rng.standard_normal((d, h)) * 0.5,
        rng.standard_normal(h) * 0.1,
        rng.standard_normal((h, c)) * 0.5,
        rng.standard_normal(c) * 0.1,
    )


def weighted_ce(model, x, targets, weights):
    probs = forward(model, x)
    per = -np.sum(targets * np.log(np.maximum(probs, 1e-300)), axis=1)
    return float(np.sum(weights * per) / x.shape[0])


class TestForward:
    def test_zero_model_uniform(self):
        model = MlpModel(np.zeros((3, 8)), np.zeros(8), np.zeros((8, 4)), np.zeros(4))
        p = forward(model, np.ones(3))
        assert np.allclose(p, 0.25, atol=1e-12)

    def test_extreme_logits_stable(self):
        # Second-layer bias drives logits to (1000, 0, 0, 0).
        model = MlpModel(
            np.zeros((2, 4)), np.zeros(4), np.zeros((4, 4)),
            np.array([1000.0, 0.0, 0.0, 0.0]),
        )
        p = forward(model, np.zeros(2))
        assert np.all(np.isfinite(p))
        assert p[0] == pytest.approx(1.0, abs=1e-9)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        model = random_model(rng)
        x = rng.standard_normal((50, 3))
        probs = forward(model, x)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestBackward:
    def test_zero_gradient_at_fit(self):
        # Force p == target by symmetric two-class construction.
        model = MlpModel(np.zeros((2, 4)), np.zeros(4), np.zeros((4, 2)), np.zeros(2))
        x = np.ones((3, 2))
        targets = np.full((3, 2), 0.5)
        grads = backward(model, x, targets, np.ones(3))
        for g in grads.values():
            assert np.allclose(g, 0.0, atol=1e-12)

    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(0)
        h = 1e-5
        worst = 0.0
        for _ in range(10):
            model = random_model(rng)
            x = rng.standard_normal((6, 3))
            labels = rng.integers(0, 4, 6)
            targets = np.zeros((6, 4))
            targets[np.arange(6), labels] = 1.0
            weights = rng.uniform(0.2, 1.0, 6)
            grads = backward(model, x, targets, weights)
            for name in ("w1", "b1", "w2", "b2"):
                param = getattr(model, name)
                numeric = np.zeros_like(param)
                it = np.nditer(param, flags=["multi_index"])
                for _v in it:
                    i = it.multi_index
                    orig = param[i]
                    param[i] = orig + h
                    hi = weighted_ce(model, x, targets, weights)
                    param[i] = orig - h
                    lo = weighted_ce(model, x, targets, weights)
                    param[i] = orig
                    numeric[i] = (hi - lo) / (2 * h)
                denom = np.maximum(np.abs(numeric), np.abs(grads[name]))
                mask = denom > 1e-8
                if mask.any():
                    rel = np.abs(grads[name] - numeric)[mask] / denom[mask]
                    worst = max(worst, float(rel.max()))
        assert worst < 1e-5


class TestGenerateDataset:
    def test_counts_and_no_fixed_points(self):
        ds = generate_dataset(4, 2, 1000, 4.0, 0.4, seed=0)
        assert int(ds.noise_mask.sum()) == 400
        changed = ds.noisy_labels[ds.noise_mask]
        original = ds.clean_labels[ds.noise_mask]
        assert np.all(changed != original)

    def test_zero_ratio_identity(self):
        ds = generate_dataset(4, 2, 500, 4.0, 0.0, seed=1)
        assert np.array_equal(ds.clean_labels, ds.noisy_labels)
        assert not ds.noise_mask.any()

    def test_deterministic(self):
        a = generate_dataset(4, 2, 300, 4.0, 0.3, seed=7)
        b = generate_dataset(4, 2, 300, 4.0, 0.3, seed=7)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.noisy_labels, b.noisy_labels)

    def test_invalid_params(self):
        with pytest.raises(InvalidParams):
            generate_dataset(1, 2, 100, 4.0, 0.1, 0)
        with pytest.raises(InvalidParams):
            generate_dataset(4, 2, 100, 4.0, 1.5, 0)

    def test_simplex_means_equidistant(self):
        # d == C-1 supports a true regular simplex.
        ds = generate_dataset(4, 3, 400, 5.0, 0.0, seed=0)
        means = np.stack(
            [ds.x[ds.clean_labels == c].mean(axis=0) for c in range(4)]
        )
        dists = [
            np.linalg.norm(means[i] - means[j])
            for i in range(4)
            for j in range(i + 1, 4)
        ]
        assert max(dists) - min(dists) < max(dists) * 0.15


class TestTrain:
    def test_determinism_bytes(self):
        cfg = TrainConfig(n_samples=400, epochs=8, seed=3)
        ds = generate_dataset(4, 2, 400, 4.0, 0.4, 3)
        a = train(ds, cfg).to_csv()
        b = train(generate_dataset(4, 2, 400, 4.0, 0.4, 3), cfg).to_csv()
        assert a == b

    def test_zero_noise_acc_equals_clean(self):
        ds = generate_dataset(4, 2, 400, 4.0, 0.0, 2)
        log = train(ds, TrainConfig(n_samples=400, ratio=0.0, epochs=8, seed=2))
        for row in log.rows:
            assert row.acc == pytest.approx(row.clean_acc, abs=1e-12)

    def test_dld_k_zero_equals_baseline(self):
        ds = generate_dataset(4, 2, 400, 4.0, 0.4, 5)
        base = train(ds, TrainConfig(n_samples=400, epochs=10, seed=5))
        degenerate = train(
            ds,
            TrainConfig(
                n_samples=400,
                epochs=10,
                seed=5,
                loss_mode="dld",
                dld=DLDConfig(k_fraction=0.0, el=1),
            ),
        )
        assert base.to_csv() == degenerate.to_csv()

    def test_loss_decreases_first_three_epochs(self):
        for seed in (0, 1, 2):
            ds = generate_dataset(4, 2, 2000, 4.0, 0.4, seed)
            log = train(ds, TrainConfig(seed=seed, epochs=4))
            losses = [r.loss for r in log.rows[:3]]
            assert losses[0] > losses[1] > losses[2]

    def test_separation_zero_bayes_bound(self):
        ds = generate_dataset(4, 2, 4000, 0.0, 0.0, 0)
        log = train(
            ds, TrainConfig(n_samples=4000, separation=0.0, ratio=0.0, seed=0, epochs=12)
        )
        assert log.rows[-1].clean_acc <= 0.25 + 0.05

    def test_early_learning_signature(self):
        # Accelerate-then-decelerate: clean_acc gains in epochs 2-5 beat 25-28.
        early, late = [], []
        for seed in range(5):
            ds = generate_dataset(4, 2, 2000, 4.0, 0.4, seed)
            log = train(ds, TrainConfig(seed=seed))
            rows = {r.epoch: r for r in log.rows}
            early.append(rows[5].clean_acc - rows[2].clean_acc)
            late.append(rows[28].clean_acc - rows[25].clean_acc)
        assert np.mean(early) > np.mean(late)

    def test_auto_el_resolves(self):
        ds = generate_dataset(4, 2, 2000, 4.0, 0.4, 0)
        log = train(
            ds,
            TrainConfig(
                loss_mode="dld", el_mode="auto", dld=DLDConfig(k_fraction=0.07)
            ),
        )
        assert log.el is not None
        assert not log.el_never_detected
        active = [r for r in log.rows if r.topk_size > 0]
        assert active and active[0].epoch >= log.el

    def test_alpha_column_decays(self):
        ds = generate_dataset(4, 2, 400, 4.0, 0.4, 1)
        log = train(
            ds,
            TrainConfig(
                n_samples=400,
                epochs=12,
                seed=1,
                loss_mode="dld",
                el_mode="fixed",
                dld=DLDConfig(k_fraction=0.1, el=4),
            ),
        )
        alphas = [r.alpha for r in log.rows if r.epoch >= 4]
        assert alphas[0] == 1.0
        assert all(b < a for a, b in zip(alphas, alphas[1:]))

    def test_divergence_detected(self):
        ds = generate_dataset(4, 2, 200, 4.0, 0.4, 0)
        with pytest.raises(DivergenceDetected) as exc:
            with np.errstate(all="ignore"):
                train(ds, TrainConfig(n_samples=200, lr=1e120, epochs=5, seed=0))
        assert hasattr(exc.value, "partial_log")

    def test_invalid_mode(self):
        with pytest.raises(InvalidParams):
            TrainConfig(loss_mode="nope")
        with pytest.raises(InvalidParams):
            TrainConfig(el_mode="nope")


class TestSweep:
    BASE = TrainConfig(n_samples=300, epochs=6)

    def test_single_cell_matches_direct(self):
        csv = sweep(self.BASE, [0.4], [0.0], [0], ["baseline"], [0])
        lines = csv.strip().splitlines()
        assert lines[0] == SWEEP_CSV_HEADER
        ds = generate_dataset(4, 2, 300, 4.0, 0.4, 0)
        log = train(ds, TrainConfig(n_samples=300, epochs=6, ratio=0.4, seed=0))
        final = log.rows[-1]
        cells = lines[1].split(",")
        assert cells[:5] == ["0.4", "0.0", "0", "baseline", "0"]
        assert float(cells[5]) == final.acc
        assert float(cells[6]) == final.clean_acc

    def test_el_offset_row_layout(self):
        offsets = [-8, -4, 0, 4, 8]
        csv = sweep(self.BASE, [0.4], [0.07], offsets, ["dld"], [0])
        rows = [l.split(",") for l in csv.strip().splitlines()[1:]]
        seen = [int(r[2]) for r in rows if r[4] == "0"]
        assert seen == offsets

    def test_k_grid_column_layout(self):
        ks = [0.03, 0.05, 0.07, 0.1]
        csv = sweep(self.BASE, [0.4], ks, [0], ["dld"], [0])
        rows = [l.split(",") for l in csv.strip().splitlines()[1:]]
        seen = [float(r[1]) for r in rows if r[4] == "0"]
        assert seen == ks

    def test_mean_rows_present(self):
        csv = sweep(self.BASE, [0.4], [0.0], [0], ["baseline"], [0, 1])
        rows = [l.split(",") for l in csv.strip().splitlines()[1:]]
        assert [r[4] for r in rows] == ["0", "1", "mean"]
        finals = [float(r[5]) for r in rows[:2]]
        assert float(rows[2][5]) == pytest.approx(sum(finals) / 2, abs=1e-12)

    def test_deterministic_ordering(self):
        a = sweep(self.BASE, [0.2, 0.4], [0.0, 0.07], [0], ["baseline"], [0])
        b = sweep(self.BASE, [0.2, 0.4], [0.0, 0.07], [0], ["baseline"], [0])
        assert a == b

    def test_empty_grid_rejected(self):
        with pytest.raises(InvalidParams):
            sweep(self.BASE, [], [0.0], [0], ["baseline"], [0])

    def test_cell_error_recorded_not_fatal(self):
        csv = sweep(self.BASE, [0.4], [0.0], [0], ["baseline"], [0], )
        assert "error" not in csv
        bad = sweep(
            TrainConfig(n_samples=300, epochs=6, lr=1e120),
            [0.4], [0.0], [0], ["baseline"], [0, 1],
        )
        rows = [l for l in bad.strip().splitlines()[1:]]
        assert all(r.endswith("error:DivergenceDetected") for r in rows)
