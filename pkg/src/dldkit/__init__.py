"""Toolkit for training and evaluating oriented detectors under noisy category
labels: rotated-box IoU, DOTA annotation handling, noise injection, mAP/ACC
metrics, early-learning endpoint detection, and the dynamic loss decay objective
with a desk-scale training harness."""

from .annotations import (
    ImageAnnotations,
    Instance,
    NoiseRecord,
    inject_noise,
    parse_dota,
    partition_by_record,
    write_dota,
)
from .dld import DLDConfig, alpha, ce_loss, dld_loss, ls_loss, select_top_k
from .dynamics import ELReport, EpochSeries, PolyFit, detect_el, fit_poly, poly_derivative
from .geometry import OrientedBox, convex_intersection_area, quad_iou, rotated_iou
from .metrics import Detection, EvalConfig, EvalReport, acc_against_labels, evaluate
from .trainer import SyntheticDataset, TrainConfig, generate_dataset, train

__all__ = [
    "ImageAnnotations", "Instance", "NoiseRecord", "inject_noise", "parse_dota",
    "partition_by_record", "write_dota",
    "DLDConfig", "alpha", "ce_loss", "dld_loss", "ls_loss", "select_top_k",
    "ELReport", "EpochSeries", "PolyFit", "detect_el", "fit_poly", "poly_derivative",
    "OrientedBox", "convex_intersection_area", "quad_iou", "rotated_iou",
    "Detection", "EvalConfig", "EvalReport", "acc_against_labels", "evaluate",
    "SyntheticDataset", "TrainConfig", "generate_dataset", "train",
]
