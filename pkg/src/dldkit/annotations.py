"""DOTA-format annotation model, parser/writer, and the category-noise injector."""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .geometry import Point, ensure_ccw


class AnnotationError(Exception):
    pass


class MalformedLine(AnnotationError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyCategory(MalformedLine):
    def __init__(self, line_no: int):
        super().__init__(line_no, "empty category")


class VocabularyTooSmall(AnnotationError):
    pass


class InvalidRatio(AnnotationError):
    pass


class RecordMismatch(AnnotationError):
    pass


@dataclass(frozen=True)
class Instance:
    """One annotated object: 4 CCW corners, category label, difficulty flag."""

    corners: tuple[Point, Point, Point, Point]
    category: str
    difficulty: int = 0


@dataclass
class ImageAnnotations:
    image_id: str
    instances: list[Instance] = field(default_factory=list)
    header: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class NoiseEntry:
    image_id: str
    instance_index: int
    original_category: str
    corrupted_category: str


@dataclass
class NoiseRecord:
    ratio: float
    seed: int
    entries: list[NoiseEntry] = field(default_factory=list)
    vocabulary: list[str] = field(default_factory=list)


_HEADER_PREFIXES = ("imagesource:", "gsd:")


def parse_dota(text: str, image_id: str) -> ImageAnnotations:
    """Parse one DOTA label file: optional header lines, then one instance per line."""
    ann = ImageAnnotations(image_id=image_id)
    in_header = True
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if in_header and line.lower().startswith(_HEADER_PREFIXES):
            ann.header.append(line)
            continue
        in_header = False
        tokens = line.split()
        if len(tokens) != 10:
            raise MalformedLine(line_no, f"expected 10 tokens, got {len(tokens)}")
        try:
            coords = [float(t) for t in tokens[:8]]
        except ValueError as exc:
            raise MalformedLine(line_no, f"non-numeric coordinate: {exc}") from None
        category = tokens[8]
        if not category:
            raise EmptyCategory(line_no)
        try:
            difficulty = int(tokens[9])
        except ValueError:
            raise MalformedLine(line_no, f"bad difficulty {tokens[9]!r}") from None
        if difficulty not in (0, 1):
            raise MalformedLine(line_no, f"difficulty must be 0 or 1, got {difficulty}")
        quad = [(coords[2 * i], coords[2 * i + 1]) for i in range(4)]
        quad = ensure_ccw(quad)
        ann.instances.append(Instance(tuple(quad), category, difficulty))
    return ann


def _fmt(v: float) -> str:
    return str(int(v)) if v == int(v) else repr(v)


def write_dota(ann: ImageAnnotations) -> str:
    lines = list(ann.header)
    for inst in ann.instances:
        coords = " ".join(_fmt(c) for xy in inst.corners for c in xy)
        lines.append(f"{coords} {inst.category} {inst.difficulty}")
    return "\n".join(lines) + ("\n" if lines else "")


def derive_vocabulary(dataset: list[ImageAnnotations]) -> list[str]:
    return sorted({inst.category for ann in dataset for inst in ann.instances})


def inject_noise(
    dataset: list[ImageAnnotations],
    ratio: float,
    seed: int,
    vocabulary: list[str] | None = None,
) -> tuple[list[ImageAnnotations], NoiseRecord]:
    """Corrupt ``floor(ratio * N)`` instance categories, chosen uniformly.

    Each selected instance gets a uniformly random *different* category from the
    vocabulary; boxes and difficulties are untouched. Deterministic in ``seed``.
    """
    if not (0.0 <= ratio <= 1.0):
        raise InvalidRatio(f"ratio must be in [0, 1], got {ratio}")
    vocab = list(vocabulary) if vocabulary is not None else derive_vocabulary(dataset)
    n_total = sum(len(ann.instances) for ann in dataset)
    n_corrupt = int(ratio * n_total)
    if n_corrupt > 0 and len(vocab) < 2:
        raise VocabularyTooSmall(f"need at least 2 categories, got {len(vocab)}")

    positions = [
        (ann.image_id, i) for ann in dataset for i in range(len(ann.instances))
    ]
    rng = random.Random(seed)
    chosen = sorted(rng.sample(range(len(positions)), n_corrupt))
    by_image = {ann.image_id: ann for ann in dataset}

    record = NoiseRecord(ratio=ratio, seed=seed, vocabulary=vocab)
    flips: dict[tuple[str, int], str] = {}
    for pos in chosen:
        image_id, idx = positions[pos]
        original = by_image[image_id].instances[idx].category
        choices = [c for c in vocab if c != original]
        corrupted = rng.choice(choices)
        record.entries.append(NoiseEntry(image_id, idx, original, corrupted))
        flips[(image_id, idx)] = corrupted

    corrupted_dataset = []
    for ann in dataset:
        new_instances = [
            replace(inst, category=flips[(ann.image_id, i)])
            if (ann.image_id, i) in flips
            else inst
            for i, inst in enumerate(ann.instances)
        ]
        corrupted_dataset.append(
            ImageAnnotations(ann.image_id, new_instances, list(ann.header))
        )
    return corrupted_dataset, record


def partition_by_record(
    dataset: list[ImageAnnotations], record: NoiseRecord
) -> tuple[list[ImageAnnotations], list[ImageAnnotations]]:
    """Split into (clean-labeled, corrupted-labeled) per the noise record.

    Both halves keep the dataset's per-image structure; instances not in the
    chosen half are dropped from that half's images.
    """
    by_image = {ann.image_id: ann for ann in dataset}
    flagged: set[tuple[str, int]] = set()
    for entry in record.entries:
        ann = by_image.get(entry.image_id)
        if ann is None or entry.instance_index >= len(ann.instances):
            raise RecordMismatch(
                f"record refers to missing instance "
                f"{entry.image_id}[{entry.instance_index}]"
            )
        flagged.add((entry.image_id, entry.instance_index))

    clean, corrupt = [], []
    for ann in dataset:
        keep_clean = [
            inst
            for i, inst in enumerate(ann.instances)
            if (ann.image_id, i) not in flagged
        ]
        keep_corrupt = [
            inst
            for i, inst in enumerate(ann.instances)
            if (ann.image_id, i) in flagged
        ]
        clean.append(ImageAnnotations(ann.image_id, keep_clean, list(ann.header)))
        corrupt.append(ImageAnnotations(ann.image_id, keep_corrupt, list(ann.header)))
    return clean, corrupt


def write_noise_record(record: NoiseRecord) -> str:
    lines = [f"ratio={record.ratio!r} seed={record.seed}"]
    for e in record.entries:
        lines.append(
            f"{e.image_id} {e.instance_index} {e.original_category} "
            f"{e.corrupted_category}"
        )
    return "\n".join(lines) + "\n"


def parse_noise_record(text: str) -> NoiseRecord:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("ratio="):
        raise MalformedLine(1, "noise record must start with 'ratio=<r> seed=<s>'")
    try:
        ratio_tok, seed_tok = lines[0].split()
        ratio = float(ratio_tok.split("=", 1)[1])
        seed = int(seed_tok.split("=", 1)[1])
    except (ValueError, IndexError):
        raise MalformedLine(1, f"bad record header {lines[0]!r}") from None
    record = NoiseRecord(ratio=ratio, seed=seed)
    for line_no, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if len(tokens) != 4:
            raise MalformedLine(line_no, f"expected 4 tokens, got {len(tokens)}")
        record.entries.append(
            NoiseEntry(tokens[0], int(tokens[1]), tokens[2], tokens[3])
        )
    return record
