"""Dataset ingestion, splitting, k-fold planning, class auditing, synthetic
dataset generation, and the species metadata store.

Label files are header-less UTF-8 CSV with rows ``image_name,species``;
class indices follow first appearance order. The species store is a UTF-8
JSON array of record objects (see docs/species-store.md). A curated store
of 46 Chilean-distribution species ships with the package.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path

import numpy as np

from floraclass.errors import DataError, NotFoundError
from floraclass import imageprep

log = logging.getLogger(__name__)

SPECIES_TYPES = ("native", "endemic", "exotic")


@dataclass
class LabeledDataset:
    """Ordered (image reference, class index) items plus the class name list."""

    items: list[tuple[str, int]]
    class_names: list[str]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for ref, idx in self.items:
            if ref in seen:
                raise DataError(f"duplicate image reference {ref!r}")
            seen.add(ref)
            if not 0 <= idx < len(self.class_names):
                raise DataError(
                    f"class index {idx} for {ref!r} out of range "
                    f"({len(self.class_names)} classes)"
                )

    def __len__(self) -> int:
        return len(self.items)

    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in self.class_names}
        for _, idx in self.items:
            counts[self.class_names[idx]] += 1
        return counts


@dataclass
class FoldPlan:
    """k disjoint index lists covering a dataset, sizes differing by at most 1."""

    folds: list[list[int]]

    def __post_init__(self) -> None:
        flat = [i for fold in self.folds for i in fold]
        if len(set(flat)) != len(flat):
            raise DataError("folds overlap")
        sizes = [len(f) for f in self.folds]
        if sizes and max(sizes) - min(sizes) > 1:
            raise DataError(f"fold sizes {sizes} differ by more than 1")

    @property
    def k(self) -> int:
        return len(self.folds)


def load_labels(
    csv_path: str | Path, image_root: str | Path | None = None
) -> LabeledDataset:
    """Parse an ``image_name,species`` CSV; warns about refs missing on disk."""
    csv_path = Path(csv_path)
    items: list[tuple[str, int]] = []
    class_names: list[str] = []
    index_of: dict[str, int] = {}
    try:
        with open(csv_path, newline="", encoding="utf-8") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                if len(row) != 2:
                    raise DataError(
                        f"{csv_path}:{lineno}: expected 'image_name,species', got {row!r}"
                    )
                ref, species = row[0].strip(), row[1].strip()
                if species not in index_of:
                    index_of[species] = len(class_names)
                    class_names.append(species)
                items.append((ref, index_of[species]))
    except OSError as exc:
        raise DataError(f"cannot read labels {csv_path}: {exc}") from exc
    if not items:
        raise DataError(f"empty label file {csv_path}")
    ds = LabeledDataset(items=items, class_names=class_names)
    if image_root is not None:
        missing = missing_files(ds, image_root)
        if missing:
            log.warning(
                "%d labeled images missing under %s: %s%s",
                len(missing),
                image_root,
                ", ".join(missing[:5]),
                "..." if len(missing) > 5 else "",
            )
    return ds


def save_labels(ds: LabeledDataset, csv_path: str | Path) -> None:
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for ref, idx in ds.items:
            writer.writerow([ref, ds.class_names[idx]])


def missing_files(ds: LabeledDataset, image_root: str | Path) -> list[str]:
    root = Path(image_root)
    return [ref for ref, _ in ds.items if not (root / ref).exists()]


def split_train_test(
    ds: LabeledDataset, test_fraction: float, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified split; test size totals round(n * fraction) via largest
    remainders, and every non-empty class keeps at least one train item."""
    if not 0.0 <= test_fraction <= 1.0:
        raise DataError(f"test_fraction must be in [0, 1], got {test_fraction}")
    n = len(ds.items)
    target = round(n * test_fraction)
    by_class: dict[int, list[int]] = {}
    for pos, (_, idx) in enumerate(ds.items):
        by_class.setdefault(idx, []).append(pos)

    classes = sorted(by_class)
    quota = {c: test_fraction * len(by_class[c]) for c in classes}
    take = {c: min(int(quota[c]), len(by_class[c]) - 1) for c in classes}
    remainder = sorted(
        classes, key=lambda c: (-(quota[c] - int(quota[c])), c)
    )
    short = target - sum(take.values())
    for c in remainder:
        if short <= 0:
            break
        if take[c] < len(by_class[c]) - 1:
            take[c] += 1
            short -= 1

    rng = np.random.default_rng(seed)
    test_pos: set[int] = set()
    for c in classes:
        order = rng.permutation(len(by_class[c]))
        chosen = [by_class[c][i] for i in order[: take[c]]]
        test_pos.update(chosen)

    train_items = [it for i, it in enumerate(ds.items) if i not in test_pos]
    test_items = [it for i, it in enumerate(ds.items) if i in test_pos]
    return (
        LabeledDataset(items=train_items, class_names=list(ds.class_names)),
        LabeledDataset(items=test_items, class_names=list(ds.class_names)),
    )


def kfold_plan(n: int, k: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle n indices into k folds; the first n % k folds get the extra item."""
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if k > n:
        raise DataError(f"cannot split {n} items into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    base = n // k
    extra = n % k
    folds: list[list[int]] = []
    at = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append([int(j) for j in perm[at : at + size]])
        at += size
    return FoldPlan(folds=folds)


@dataclass
class AuditReport:
    threshold: int
    counts: dict[str, int]
    below: dict[str, int]

    @property
    def ok(self) -> bool:
        return not self.below


def audit_min_count(
    ds: LabeledDataset, min_count: int = 100, strict: bool = False
) -> AuditReport:
    """Flag classes with fewer than min_count images."""
    if not ds.items:
        raise DataError("cannot audit an empty dataset")
    counts = ds.class_counts()
    below = {name: c for name, c in counts.items() if c < min_count}
    report = AuditReport(threshold=min_count, counts=counts, below=below)
    if strict and below:
        raise DataError(
            "classes below minimum count "
            f"{min_count}: " + ", ".join(f"{n} ({c})" for n, c in below.items())
        )
    return report


# --- species metadata store ---

@dataclass
class SpeciesRecord:
    scientific_name: str
    common_names: list[str]
    type: str
    conservation_status: str
    distribution: str
    description: str
    image: str = ""

    def __post_init__(self) -> None:
        if self.type not in SPECIES_TYPES:
            raise DataError(
                f"species type {self.type!r} not one of {SPECIES_TYPES}"
            )


class SpeciesStore:
    """Read-only lookup of species records by scientific name."""

    def __init__(self, records: list[SpeciesRecord]):
        self._by_name: dict[str, SpeciesRecord] = {}
        for rec in records:
            if rec.scientific_name in self._by_name:
                raise DataError(f"duplicate species {rec.scientific_name!r}")
            self._by_name[rec.scientific_name] = rec

    def __len__(self) -> int:
        return len(self._by_name)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def records(self) -> list[SpeciesRecord]:
        return list(self._by_name.values())

    def lookup(self, scientific_name: str) -> SpeciesRecord:
        try:
            return self._by_name[scientific_name]
        except KeyError:
            raise NotFoundError(f"species {scientific_name!r} not in store") from None

    def get(self, scientific_name: str) -> SpeciesRecord | None:
        return self._by_name.get(scientific_name)

    def type_counts(self) -> dict[str, int]:
        counts = {t: 0 for t in SPECIES_TYPES}
        for rec in self._by_name.values():
            counts[rec.type] += 1
        return counts


def load_species_store(path: str | Path) -> SpeciesStore:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read species store {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise DataError(f"species store {path} must be a JSON array")
    try:
        return SpeciesStore([SpeciesRecord(**entry) for entry in raw])
    except TypeError as exc:
        raise DataError(f"bad species record in {path}: {exc}") from exc


def save_species_store(store: SpeciesStore, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([asdict(r) for r in store.records], fh, ensure_ascii=False, indent=1)


def bundled_species_store() -> SpeciesStore:
    """The curated store of 46 Chilean-distribution species shipped in-package."""
    ref = resources.files("floraclass").joinpath("data/species_chile.json")
    with resources.as_file(ref) as path:
        return load_species_store(path)


def synthetic_species_store(class_names: list[str]) -> SpeciesStore:
    """Minimal records for synthetic shape classes so the service stack runs."""
    recs = [
        SpeciesRecord(
            scientific_name=name,
            common_names=[name.capitalize()],
            type="exotic",
            conservation_status="Least Concern",
            distribution="Synthetic benchmark dataset",
            description=f"Procedurally generated '{name}' shape class.",
            image="",
        )
        for name in class_names
    ]
    return SpeciesStore(recs)


# --- synthetic dataset generation ---

SYNTH_SHAPES = ("disk", "triangle", "stripes", "ring", "checker", "cross")


def _draw_shape(shape: str, side: int, rng: np.random.Generator) -> np.ndarray:
    bg = rng.integers(10, 90, size=3).astype(np.float64)
    fg = rng.integers(150, 255, size=3).astype(np.float64)
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    jitter = side / 8
    cx = side / 2 + rng.uniform(-jitter, jitter)
    cy = side / 2 + rng.uniform(-jitter, jitter)
    if shape == "disk":
        r = rng.uniform(0.26, 0.38) * side
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= r**2
    elif shape == "triangle":
        half = rng.uniform(0.30, 0.42) * side
        top = cy - half
        # isoceles, apex up; horizontal flips keep the class identity
        mask = (yy >= top) & (yy <= cy + half) & (
            np.abs(xx - cx) <= (yy - top) * 0.6
        )
    elif shape == "stripes":
        width = int(rng.integers(2, 4))  # horizontal bands survive flips
        phase = int(rng.integers(0, 2 * width))
        mask = ((yy.astype(int) + phase) // width) % 2 == 0
    elif shape == "ring":
        r = rng.uniform(0.30, 0.40) * side
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        mask = (d2 <= r**2) & (d2 >= (0.55 * r) ** 2)
    elif shape == "checker":
        block = max(2, int(round(side / rng.uniform(3.0, 4.5))))
        mask = ((xx.astype(int) // block) + (yy.astype(int) // block)) % 2 == 0
    elif shape == "cross":
        t = rng.uniform(0.10, 0.16) * side
        arm = rng.uniform(0.32, 0.44) * side
        mask = (
            (np.abs(xx - cx) <= t) & (np.abs(yy - cy) <= arm)
        ) | ((np.abs(yy - cy) <= t) & (np.abs(xx - cx) <= arm))
    else:
        raise DataError(f"unknown synthetic shape {shape!r}")
    img = np.where(mask[..., None], fg, bg)
    img += rng.normal(0, 10, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def synth_dataset(
    num_classes: int,
    per_class: int,
    side: int,
    seed: int,
    out_dir: str | Path,
) -> LabeledDataset:
    """Generate a deterministic shape-classification dataset on disk.

    Writes ``images/<class>_<i>.png``, ``labels.csv`` and ``species.json``
    under out_dir and returns the dataset. Classes are drawn shapes whose
    identity survives horizontal flips and mild zooms.
    """
    if not 1 <= num_classes <= len(SYNTH_SHAPES):
        raise DataError(
            f"num_classes must be in [1, {len(SYNTH_SHAPES)}], got {num_classes}"
        )
    if per_class < 1:
        raise DataError(f"per_class must be >= 1, got {per_class}")
    if side < 8:
        raise DataError(f"side must be >= 8, got {side}")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    class_names = list(SYNTH_SHAPES[:num_classes])
    items: list[tuple[str, int]] = []
    for ci, name in enumerate(class_names):
        for i in range(per_class):
            rng = np.random.default_rng([seed, ci, i])
            px = _draw_shape(name, side, rng)
            ref = f"images/{name}_{i:04d}.png"
            imageprep.save_png(imageprep.Image(px), out_dir / ref)
            items.append((ref, ci))
    ds = LabeledDataset(items=items, class_names=class_names)
    save_labels(ds, out_dir / "labels.csv")
    save_species_store(synthetic_species_store(class_names), out_dir / "species.json")
    return ds


def load_tensors(
    ds: LabeledDataset, image_root: str | Path, side: int
) -> list[tuple[np.ndarray, int]]:
    """Load every item as a normalized side x side x 3 tensor with its label."""
    root = Path(image_root)
    out = []
    for ref, idx in ds.items:
        img = imageprep.load_image(root / ref)
        img = imageprep.resize(imageprep.center_crop_square(img), side)
        out.append((imageprep.to_tensor(img), idx))
    return out
