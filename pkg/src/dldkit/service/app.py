"""FastAPI app exposing noise injection, evaluation, curve analysis, and training."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import annotations as ann_mod
from .. import dld as dld_mod
from .. import dynamics, metrics, trainer
from ..geometry import OrientedBox, rotated_iou
from . import schemas

app = FastAPI(title="dldkit", version="0.1.0")

# Domain errors -> HTTP status. Anything unlisted is a 400.
_STATUS = {
    "MalformedLine": 422,
    "EmptyCategory": 422,
    "VocabularyTooSmall": 409,
    "InvalidRatio": 422,
    "RecordMismatch": 409,
    "UnknownCategory": 409,
    "InsufficientPoints": 422,
    "IllConditioned": 422,
    "ScheduleSingular": 409,
    "InvalidParams": 422,
    "DivergenceDetected": 409,
    "IdMismatch": 409,
}


def _fail(exc: Exception) -> HTTPException:
    name = type(exc).__name__
    return HTTPException(
        status_code=_STATUS.get(name, 400),
        detail={"error": name, "message": str(exc)},
    )


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/geometry/iou", response_model=schemas.IouResponse)
def iou(req: schemas.IouRequest):
    a = OrientedBox(**req.a.model_dump())
    b = OrientedBox(**req.b.model_dump())
    return {"iou": rotated_iou(a, b)}


def _parse_files(files: list[schemas.LabelFile]) -> list[ann_mod.ImageAnnotations]:
    parsed = []
    for f in files:
        try:
            parsed.append(ann_mod.parse_dota(f.text, f.image_id))
        except ann_mod.MalformedLine as exc:
            raise _fail(
                ann_mod.MalformedLine(exc.line_no, f"{f.image_id}: {exc}")
            ) from exc
    return parsed


@app.post("/annotations/inject-noise", response_model=schemas.InjectNoiseResponse)
def inject_noise(req: schemas.InjectNoiseRequest):
    dataset = _parse_files(req.files)
    try:
        corrupted, record = ann_mod.inject_noise(
            dataset, req.ratio, req.seed, req.vocabulary
        )
    except (ann_mod.InvalidRatio, ann_mod.VocabularyTooSmall) as exc:
        raise _fail(exc) from exc
    return {
        "files": [
            {"image_id": a.image_id, "text": ann_mod.write_dota(a)} for a in corrupted
        ],
        "record": ann_mod.write_noise_record(record),
        "total_instances": sum(len(a.instances) for a in dataset),
        "changed": len(record.entries),
    }


class IdMismatch(Exception):
    pass


@app.post("/metrics/evaluate", response_model=schemas.EvaluateResponse)
def evaluate(req: schemas.EvaluateRequest):
    gt = _parse_files(req.gt_files)
    gt_ids = {a.image_id for a in gt}
    pred_ids = {f.image_id for f in req.pred_files}
    if gt_ids != pred_ids:
        missing = sorted(gt_ids ^ pred_ids)
        raise _fail(IdMismatch(f"gt/pred image ids differ: {missing}"))
    dets = {}
    for f in req.pred_files:
        try:
            dets[f.image_id] = metrics.parse_detections(f.text)
        except ann_mod.MalformedLine as exc:
            raise _fail(
                ann_mod.MalformedLine(exc.line_no, f"{f.image_id}: {exc}")
            ) from exc
    record = None
    if req.record is not None:
        try:
            record = ann_mod.parse_noise_record(req.record)
        except ann_mod.MalformedLine as exc:
            raise _fail(exc) from exc
    try:
        cfg = metrics.EvalConfig(req.iou_threshold, req.ap_mode, req.ignore_difficult)
        report = metrics.full_report(dets, gt, cfg, record)
    except (ValueError, metrics.UnknownCategory, ann_mod.RecordMismatch) as exc:
        raise _fail(exc) from exc
    return {
        "per_class_ap": report.per_class_ap,
        "mean_ap": report.mean_ap,
        "acc": report.acc,
        "map_correct": report.map_correct,
        "map_incorrect": report.map_incorrect,
        "empty_subset": report.empty_subset,
        "counts": {
            k: {"tp": c.tp, "fp": c.fp, "num_gt": c.num_gt}
            for k, c in report.counts.items()
        },
        "report_csv": metrics.report_csv(report),
        "report_text": metrics.report_text(report),
    }


@app.post("/dynamics/detect-el", response_model=schemas.DetectElResponse)
def detect_el(req: schemas.DetectElRequest):
    try:
        series = dynamics.EpochSeries(tuple(req.epochs), tuple(req.values), req.metric)
        report = dynamics.detect_el(series, req.eta, req.degree, req.min_epochs)
    except (ValueError, dynamics.InsufficientPoints, dynamics.IllConditioned) as exc:
        raise _fail(exc) from exc
    csv_lines = ["epoch,fitted_value,first_deriv,second_deriv,triggered"]
    for t in report.trace:
        csv_lines.append(
            f"{t.epoch},{t.fitted_value!r},{t.first_deriv!r},{t.second_deriv!r},"
            f"{int(t.triggered)}"
        )
    return {
        "el": report.el,
        "eta": report.eta,
        "degree": report.degree,
        "degenerate": report.degenerate,
        "trace": [vars(t) for t in report.trace],
        "trace_csv": "\n".join(csv_lines) + "\n",
    }


@app.post("/loss/dld", response_model=schemas.DldLossResponse)
def dld_loss(req: schemas.DldLossRequest):
    try:
        cfg = dld_mod.DLDConfig(**req.config.model_dump())
        scalar, weights = dld_mod.dld_loss(req.losses, req.current_epoch, cfg)
    except (ValueError, dld_mod.ScheduleSingular) as exc:
        raise _fail(exc) from exc
    return {"loss": scalar, "weights": weights}


def _train_config(req: schemas.TrainRequest) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        num_classes=req.num_classes,
        dim=req.dim,
        n_samples=req.n_samples,
        separation=req.separation,
        ratio=req.ratio,
        hidden=req.hidden,
        lr=req.lr,
        batch_size=req.batch_size,
        epochs=req.epochs,
        loss_mode=req.loss_mode,
        epsilon=req.epsilon,
        dld=dld_mod.DLDConfig(
            k_fraction=req.k_fraction,
            el=req.el,
            schedule=req.schedule,
            tau=req.tau,
        ),
        el_mode=req.el_mode,
        eta=req.eta,
        degree=req.degree,
        min_epochs=req.min_epochs,
        el_offset=req.el_offset,
        seed=req.seed,
    )


@app.post("/train", response_model=schemas.TrainResponse)
def train(req: schemas.TrainRequest):
    try:
        cfg = _train_config(req)
        dataset = trainer.generate_dataset(
            cfg.num_classes, cfg.dim, cfg.n_samples, cfg.separation, cfg.ratio, cfg.seed
        )
        log = trainer.train(dataset, cfg)
    except (ValueError, trainer.InvalidParams, trainer.DivergenceDetected,
            dld_mod.ScheduleSingular) as exc:
        raise _fail(exc) from exc
    return {
        "log_csv": log.to_csv(),
        "el": log.el,
        "el_never_detected": log.el_never_detected,
    }


@app.post("/sweep", response_model=schemas.SweepResponse)
def sweep(req: schemas.SweepRequest):
    try:
        base = _train_config(req)
        csv = trainer.sweep(
            base,
            req.rho_grid,
            req.k_grid,
            req.el_offset_grid,
            req.loss_modes,
            req.seeds,
        )
    except (ValueError, trainer.InvalidParams) as exc:
        raise _fail(exc) from exc
    return {"sweep_csv": csv}
