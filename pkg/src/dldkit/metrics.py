"""Detection evaluation: greedy matching, AP/mAP, label-agreement ACC, subset mAP."""

from __future__ import annotations

from dataclasses import dataclass, field

from .annotations import (
    ImageAnnotations,
    Instance,
    MalformedLine,
    NoiseRecord,
    RecordMismatch,
    partition_by_record,
)
from .geometry import Point, quad_iou


class UnknownCategory(Exception):
    pass


@dataclass(frozen=True)
class Detection:
    corners: tuple[Point, Point, Point, Point]
    category: str
    score: float


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    ap_mode: str = "voc07_11point"  # or "all_point"
    ignore_difficult: bool = True

    def __post_init__(self):
        if not (0.0 < self.iou_threshold < 1.0):
            raise ValueError(f"iou_threshold must be in (0, 1), got {self.iou_threshold}")
        if self.ap_mode not in ("voc07_11point", "all_point"):
            raise ValueError(f"unknown ap_mode {self.ap_mode!r}")


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    num_gt: int = 0


@dataclass
class EvalReport:
    per_class_ap: dict[str, float]
    mean_ap: float
    acc: float | None = None
    map_correct: float | None = None
    map_incorrect: float | None = None
    counts: dict[str, ClassCounts] = field(default_factory=dict)
    empty_subset: bool = False


# Per-detection match outcomes.
TP, FP, IGNORE = 1, 0, -1


def match_detections(
    dets: list[Detection],
    gts: list[Instance],
    cfg: EvalConfig = EvalConfig(),
) -> list[int]:
    """Greedy one-to-one matching of same-class detections to GT in one image.

    Detections are visited in descending score (stable on input index); each
    claims the unmatched GT with highest IoU >= threshold. Matches to
    difficulty-1 GT are ignored (neither TP nor FP) when ignore_difficult.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched = [False] * len(gts)
    flags = [FP] * len(dets)
    for di in order:
        det = dets[di]
        best_iou, best_gi = 0.0, -1
        for gi, gt in enumerate(gts):
            if matched[gi]:
                continue
            iou = quad_iou(list(det.corners), list(gt.corners))
            if iou > best_iou:
                best_iou, best_gi = iou, gi
        if best_gi >= 0 and best_iou >= cfg.iou_threshold:
            matched[best_gi] = True
            if cfg.ignore_difficult and gts[best_gi].difficulty == 1:
                flags[di] = IGNORE
            else:
                flags[di] = TP
    return flags


def average_precision(flags: list[int], num_gt: int, ap_mode: str = "voc07_11point") -> float:
    """AP from score-ordered TP/FP flags (IGNORE entries are skipped)."""
    if num_gt <= 0:
        return 0.0
    recalls, precisions = [], []
    tp = fp = 0
    for f in flags:
        if f == IGNORE:
            continue
        if f == TP:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / num_gt)
        precisions.append(tp / (tp + fp))
    if not recalls:
        return 0.0
    if ap_mode == "voc07_11point":
        total = 0.0
        for t in (i / 10.0 for i in range(11)):
            p = max(
                (prec for rec, prec in zip(recalls, precisions) if rec >= t),
                default=0.0,
            )
            total += p
        return total / 11.0
    # all_point: area under the monotone precision envelope.
    ap = 0.0
    prev_recall = 0.0
    for i, rec in enumerate(recalls):
        envelope = max(precisions[i:])
        if rec > prev_recall:
            ap += (rec - prev_recall) * envelope
            prev_recall = rec
    return ap


def _gather_class_flags(
    dets_by_image: dict[str, list[Detection]],
    gts_by_image: dict[str, list[Instance]],
    category: str,
    cfg: EvalConfig,
) -> tuple[list[int], int]:
    """Dataset-wide score-ordered flags and GT count for one category."""
    scored: list[tuple[float, int, int]] = []  # (-score, tiebreak, flag)
    tiebreak = 0
    num_gt = 0
    for image_id, gts in gts_by_image.items():
        class_gts = [g for g in gts if g.category == category]
        num_gt += sum(
            1
            for g in class_gts
            if not (cfg.ignore_difficult and g.difficulty == 1)
        )
        class_dets = [
            d for d in dets_by_image.get(image_id, []) if d.category == category
        ]
        flags = match_detections(class_dets, class_gts, cfg)
        for det, flag in zip(class_dets, flags):
            scored.append((-det.score, tiebreak, flag))
            tiebreak += 1
    scored.sort()
    return [flag for _, _, flag in scored], num_gt


def evaluate(
    dets_by_image: dict[str, list[Detection]],
    annotations: list[ImageAnnotations],
    cfg: EvalConfig = EvalConfig(),
    vocabulary: list[str] | None = None,
) -> EvalReport:
    """Per-class AP and mAP over the whole dataset (classes with >=1 GT).

    ``vocabulary`` widens the set of legal detection categories beyond those
    present in the ground truth (needed when evaluating against a GT subset).
    """
    gts_by_image = {ann.image_id: ann.instances for ann in annotations}
    categories = sorted({inst.category for ann in annotations for inst in ann.instances})
    known = set(categories) if vocabulary is None else set(vocabulary) | set(categories)
    for dets in dets_by_image.values():
        for det in dets:
            if det.category not in known:
                raise UnknownCategory(
                    f"detection category {det.category!r} not in ground truth"
                )

    per_class_ap: dict[str, float] = {}
    counts: dict[str, ClassCounts] = {}
    for category in categories:
        flags, num_gt = _gather_class_flags(dets_by_image, gts_by_image, category, cfg)
        counts[category] = ClassCounts(
            tp=sum(1 for f in flags if f == TP),
            fp=sum(1 for f in flags if f == FP),
            num_gt=num_gt,
        )
        if num_gt > 0:
            per_class_ap[category] = average_precision(flags, num_gt, cfg.ap_mode)

    mean = sum(per_class_ap.values()) / len(per_class_ap) if per_class_ap else 0.0
    return EvalReport(per_class_ap=per_class_ap, mean_ap=mean, counts=counts)


def acc_against_labels(
    dets_by_image: dict[str, list[Detection]],
    annotations: list[ImageAnnotations],
    cfg: EvalConfig = EvalConfig(),
) -> float:
    """Top-1 label agreement on class-agnostically matched GT.

    Matching is localization-only: detections in descending score each claim
    the unmatched GT with highest IoU >= threshold, regardless of class. ACC is
    the fraction of *all* GT whose matched detection carries the GT's category;
    unmatched GT count against the denominator.
    """
    total_gt = 0
    agree = 0
    for ann in annotations:
        gts = ann.instances
        total_gt += len(gts)
        dets = dets_by_image.get(ann.image_id, [])
        order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
        matched = [False] * len(gts)
        for di in order:
            det = dets[di]
            best_iou, best_gi = 0.0, -1
            for gi, gt in enumerate(gts):
                if matched[gi]:
                    continue
                iou = quad_iou(list(det.corners), list(gt.corners))
                if iou > best_iou:
                    best_iou, best_gi = iou, gi
            if best_gi >= 0 and best_iou >= cfg.iou_threshold:
                matched[best_gi] = True
                if det.category == gts[best_gi].category:
                    agree += 1
    if total_gt == 0:
        return 0.0
    return agree / total_gt


def subset_map(
    dets_by_image: dict[str, list[Detection]],
    annotations: list[ImageAnnotations],
    record: NoiseRecord,
    which: str,
    cfg: EvalConfig = EvalConfig(),
) -> tuple[float, bool]:
    """mAP with GT restricted to the clean or corrupted partition.

    ``which`` is "correct" or "incorrect". Detections are not filtered. Returns
    (map, empty_subset_flag); an empty subset yields 0.0 with the flag set.
    """
    if which not in ("correct", "incorrect"):
        raise ValueError(f"which must be 'correct' or 'incorrect', got {which!r}")
    clean, corrupt = partition_by_record(annotations, record)
    subset = clean if which == "correct" else corrupt
    if sum(len(a.instances) for a in subset) == 0:
        return 0.0, True
    vocab = sorted(
        {inst.category for ann in annotations for inst in ann.instances}
        | {e.original_category for e in record.entries}
    )
    report = evaluate(dets_by_image, subset, cfg, vocabulary=vocab)
    return report.mean_ap, False


def parse_detections(text: str) -> list[Detection]:
    """Parse one prediction file: lines of 8 corner coords, category, score."""
    from .geometry import ensure_ccw

    dets = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 10:
            raise MalformedLine(line_no, f"expected 10 tokens, got {len(tokens)}")
        try:
            coords = [float(t) for t in tokens[:8]]
            score = float(tokens[9])
        except ValueError as exc:
            raise MalformedLine(line_no, f"non-numeric value: {exc}") from None
        quad = ensure_ccw([(coords[2 * i], coords[2 * i + 1]) for i in range(4)])
        dets.append(Detection(tuple(quad), tokens[8], score))
    return dets


def report_csv(report: EvalReport) -> str:
    lines = ["class,ap,tp,fp,gt"]
    for category in sorted(report.counts):
        c = report.counts[category]
        ap = report.per_class_ap.get(category)
        ap_str = "" if ap is None else repr(ap)
        lines.append(f"{category},{ap_str},{c.tp},{c.fp},{c.num_gt}")
    return "\n".join(lines) + "\n"


def report_text(report: EvalReport) -> str:
    lines = [f"mAP={report.mean_ap!r}"]
    if report.acc is not None:
        lines.append(f"ACC={report.acc!r}")
    if report.map_correct is not None:
        lines.append(f"mAPC={report.map_correct!r}")
    if report.map_incorrect is not None:
        lines.append(f"mAPI={report.map_incorrect!r}")
    if report.empty_subset:
        lines.append("empty_subset=true")
    for category in sorted(report.per_class_ap):
        lines.append(f"ap[{category}]={report.per_class_ap[category]!r}")
    return "\n".join(lines) + "\n"


def full_report(
    dets_by_image: dict[str, list[Detection]],
    annotations: list[ImageAnnotations],
    cfg: EvalConfig = EvalConfig(),
    record: NoiseRecord | None = None,
) -> EvalReport:
    """mAP + ACC, plus mAPC/mAPI when a noise record is supplied."""
    # Corruption can erase a category from the noisy ground truth entirely;
    # the record's original labels are still legal detection categories.
    vocab = None
    if record is not None:
        vocab = sorted(
            {inst.category for ann in annotations for inst in ann.instances}
            | {e.original_category for e in record.entries}
        )
    report = evaluate(dets_by_image, annotations, cfg, vocabulary=vocab)
    report.acc = acc_against_labels(dets_by_image, annotations, cfg)
    if record is not None:
        map_c, empty_c = subset_map(dets_by_image, annotations, record, "correct", cfg)
        map_i, empty_i = subset_map(dets_by_image, annotations, record, "incorrect", cfg)
        report.map_correct = map_c
        report.map_incorrect = map_i
        report.empty_subset = empty_c or empty_i
    return report
