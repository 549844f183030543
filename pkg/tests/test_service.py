import math

import pytest
from fastapi.testclient import TestClient

from dldkit.service import app

client = TestClient(app)

DOTA_TWO = (
    "0 0 10 0 10 10 0 10 ship 0\n"
    "20 0 30 0 30 10 20 10 plane 0\n"
)


def box(cx, cy, w, h, angle=0.0):
    return {"cx": cx, "cy": cy, "w": w, "h": h, "angle": angle}


class TestHealth:
    def test_ok(self):
        r = client.get("/health")
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}


class TestIou:
    def test_identical(self):
        r = client.post("/geometry/iou", json={"a": box(0, 0, 4, 2), "b": box(0, 0, 4, 2)})
        assert r.status_code == 200
        assert r.json()["iou"] == pytest.approx(1.0, abs=1e-12)

    def test_rotated(self):
        r = client.post(
            "/geometry/iou",
            json={"a": box(0, 0, 2, 2), "b": box(0, 0, 2, 2, math.pi / 4)},
        )
        expected = (8 * math.sqrt(2) - 8) / (16 - 8 * math.sqrt(2))
        assert r.json()["iou"] == pytest.approx(expected, abs=1e-9)

    def test_validation_rejects_nonpositive(self):
        r = client.post("/geometry/iou", json={"a": box(0, 0, 0, 2), "b": box(0, 0, 1, 1)})
        assert r.status_code == 422


class TestInjectNoise:
    def test_basic(self):
        r = client.post(
            "/annotations/inject-noise",
            json={
                "files": [{"image_id": "im", "text": DOTA_TWO}],
                "ratio": 0.5,
                "seed": 0,
            },
        )
        assert r.status_code == 200
        data = r.json()
        assert data["total_instances"] == 2
        assert data["changed"] == 1
        assert "ratio=0.5 seed=0" in data["record"]

    def test_vocabulary_too_small(self):
        r = client.post(
            "/annotations/inject-noise",
            json={
                "files": [
                    {
                        "image_id": "im",
                        "text": "0 0 1 0 1 1 0 1 only 0\n5 0 6 0 6 1 5 1 only 0\n",
                    }
                ],
                "ratio": 0.5,
                "seed": 0,
            },
        )
        assert r.status_code == 409
        assert r.json()["detail"]["error"] == "VocabularyTooSmall"

    def test_invalid_ratio(self):
        r = client.post(
            "/annotations/inject-noise",
            json={
                "files": [{"image_id": "im", "text": DOTA_TWO}],
                "ratio": 2.0,
                "seed": 0,
            },
        )
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "InvalidRatio"

    def test_malformed_line(self):
        r = client.post(
            "/annotations/inject-noise",
            json={
                "files": [{"image_id": "im", "text": "1 2 3\n"}],
                "ratio": 0.5,
                "seed": 0,
            },
        )
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "MalformedLine"


class TestEvaluate:
    PERFECT = (
        "0 0 10 0 10 10 0 10 ship 0.9\n"
        "20 0 30 0 30 10 20 10 plane 0.8\n"
    )

    def test_perfect_predictions(self):
        r = client.post(
            "/metrics/evaluate",
            json={
                "gt_files": [{"image_id": "im", "text": DOTA_TWO}],
                "pred_files": [{"image_id": "im", "text": self.PERFECT}],
            },
        )
        assert r.status_code == 200
        data = r.json()
        assert data["mean_ap"] == pytest.approx(1.0)
        assert data["acc"] == pytest.approx(1.0)
        assert data["report_csv"].splitlines()[0] == "class,ap,tp,fp,gt"

    def test_id_mismatch(self):
        r = client.post(
            "/metrics/evaluate",
            json={
                "gt_files": [{"image_id": "im", "text": DOTA_TWO}],
                "pred_files": [{"image_id": "other", "text": self.PERFECT}],
            },
        )
        assert r.status_code == 409
        assert r.json()["detail"]["error"] == "IdMismatch"

    def test_subset_metrics_with_record(self):
        inj = client.post(
            "/annotations/inject-noise",
            json={
                "files": [{"image_id": "im", "text": DOTA_TWO}],
                "ratio": 0.5,
                "seed": 0,
            },
        ).json()
        r = client.post(
            "/metrics/evaluate",
            json={
                "gt_files": inj["files"],
                "pred_files": [{"image_id": "im", "text": self.PERFECT}],
                "record": inj["record"],
            },
        )
        assert r.status_code == 200
        data = r.json()
        assert data["map_correct"] is not None
        assert data["map_incorrect"] is not None

    def test_unknown_category(self):
        r = client.post(
            "/metrics/evaluate",
            json={
                "gt_files": [{"image_id": "im", "text": DOTA_TWO}],
                "pred_files": [
                    {"image_id": "im", "text": "0 0 10 0 10 10 0 10 mystery 0.9\n"}
                ],
            },
        )
        assert r.status_code == 409
        assert r.json()["detail"]["error"] == "UnknownCategory"


class TestDetectEl:
    def test_saturating_series(self):
        epochs = list(range(1, 37))
        values = [0.8 * (1 - math.exp(-t / 4)) for t in epochs]
        r = client.post(
            "/dynamics/detect-el", json={"epochs": epochs, "values": values}
        )
        assert r.status_code == 200
        data = r.json()
        assert 14 <= data["el"] <= 18
        header = data["trace_csv"].splitlines()[0]
        assert header == "epoch,fitted_value,first_deriv,second_deriv,triggered"

    def test_insufficient_points(self):
        r = client.post(
            "/dynamics/detect-el", json={"epochs": [1, 2, 3], "values": [0.1, 0.2, 0.3]}
        )
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "InsufficientPoints"


class TestDldLoss:
    def test_post_el(self):
        r = client.post(
            "/loss/dld",
            json={
                "losses": [5, 1, 0.5, 0.2],
                "current_epoch": 20,
                "config": {"k_fraction": 0.25, "el": 10},
            },
        )
        assert r.status_code == 200
        data = r.json()
        a = math.exp(-1)
        assert data["loss"] == pytest.approx((a * 5 + 1.7) / 4, abs=1e-12)
        assert data["weights"][0] == pytest.approx(a, abs=1e-12)

    def test_singular_schedule(self):
        r = client.post(
            "/loss/dld",
            json={
                "losses": [1.0, 2.0],
                "current_epoch": 10,
                "config": {"k_fraction": 0.5, "el": 10, "schedule": "paper_literal"},
            },
        )
        assert r.status_code == 409
        assert r.json()["detail"]["error"] == "ScheduleSingular"


class TestTrain:
    SMALL = {"n_samples": 200, "epochs": 6, "hidden": 32, "seed": 0}

    def test_baseline(self):
        r = client.post("/train", json=self.SMALL)
        assert r.status_code == 200
        data = r.json()
        lines = data["log_csv"].strip().splitlines()
        assert lines[0].startswith("epoch,acc,clean_acc")
        assert len(lines) == 7

    def test_invalid_params(self):
        r = client.post("/train", json={**self.SMALL, "loss_mode": "nope"})
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "InvalidParams"

    def test_divergence(self):
        r = client.post("/train", json={**self.SMALL, "lr": 1e120})
        assert r.status_code == 409
        assert r.json()["detail"]["error"] == "DivergenceDetected"


class TestSweep:
    def test_small_sweep(self):
        r = client.post(
            "/sweep",
            json={
                "n_samples": 200,
                "epochs": 4,
                "hidden": 32,
                "rho_grid": [0.4],
                "k_grid": [0.05],
                "el_offset_grid": [0],
                "loss_modes": ["baseline", "dld"],
                "seeds": [0],
            },
        )
        assert r.status_code == 200
        lines = r.json()["sweep_csv"].strip().splitlines()
        assert lines[0].startswith("rho,k_fraction,el_offset,loss_mode,seed")
        # 2 modes x (1 seed row + 1 mean row)
        assert len(lines) == 5

    def test_empty_grid(self):
        r = client.post(
            "/sweep",
            json={"n_samples": 200, "epochs": 4, "hidden": 32, "rho_grid": []},
        )
        assert r.status_code == 422
        assert r.json()["detail"]["error"] == "InvalidParams"
