"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class BoxModel(BaseModel):
    cx: float
    cy: float
    w: float = Field(gt=0)
    h: float = Field(gt=0)
    angle: float = 0.0


class IouRequest(BaseModel):
    a: BoxModel
    b: BoxModel


class IouResponse(BaseModel):
    iou: float


class LabelFile(BaseModel):
    image_id: str
    text: str


class InjectNoiseRequest(BaseModel):
    files: list[LabelFile]
    ratio: float
    seed: int
    vocabulary: list[str] | None = None


class InjectNoiseResponse(BaseModel):
    files: list[LabelFile]
    record: str
    total_instances: int
    changed: int


class EvaluateRequest(BaseModel):
    gt_files: list[LabelFile]
    pred_files: list[LabelFile]
    record: str | None = None
    iou_threshold: float = 0.5
    ap_mode: str = "voc07_11point"
    ignore_difficult: bool = True


class ClassCountModel(BaseModel):
    tp: int
    fp: int
    num_gt: int


class EvaluateResponse(BaseModel):
    per_class_ap: dict[str, float]
    mean_ap: float
    acc: float
    map_correct: float | None = None
    map_incorrect: float | None = None
    empty_subset: bool = False
    counts: dict[str, ClassCountModel]
    report_csv: str
    report_text: str


class DetectElRequest(BaseModel):
    epochs: list[int]
    values: list[float]
    metric: str = "acc"
    eta: float = 0.001
    degree: int = 4
    min_epochs: int = 6


class TracePointModel(BaseModel):
    epoch: int
    fitted_value: float
    first_deriv: float
    second_deriv: float
    triggered: bool


class DetectElResponse(BaseModel):
    el: int | None
    eta: float
    degree: int
    degenerate: bool
    trace: list[TracePointModel]
    trace_csv: str


class DldConfigModel(BaseModel):
    k_fraction: float = 0.05
    el: int = 1
    schedule: str = "exp_decay"
    tau: float = 10.0
    selection_scope: str = "per_batch"


class DldLossRequest(BaseModel):
    losses: list[float]
    current_epoch: int
    config: DldConfigModel


class DldLossResponse(BaseModel):
    loss: float
    weights: list[float]


class TrainRequest(BaseModel):
    num_classes: int = 4
    dim: int = 2
    n_samples: int = 2000
    separation: float = 4.0
    ratio: float = 0.4
    hidden: int = 256
    lr: float = 0.05
    batch_size: int = 64
    epochs: int = 36
    loss_mode: str = "baseline"
    epsilon: float = 0.1
    k_fraction: float = 0.05
    schedule: str = "exp_decay"
    tau: float = 10.0
    el: int = 1
    el_mode: str = "fixed"
    eta: float = 0.001
    degree: int = 4
    min_epochs: int = 6
    el_offset: int = 0
    seed: int = 0


class TrainResponse(BaseModel):
    log_csv: str
    el: int | None
    el_never_detected: bool


class SweepRequest(TrainRequest):
    rho_grid: list[float] = [0.4]
    k_grid: list[float] = [0.05]
    el_offset_grid: list[int] = [0]
    loss_modes: list[str] = ["dld"]
    seeds: list[int] = [0]


class SweepResponse(BaseModel):
    sweep_csv: str


class ErrorDetail(BaseModel):
    error: str
    message: str
