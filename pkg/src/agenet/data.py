"""Datasets: manifest loading, deterministic splitting, crops, and the
procedural face-proxy generator.

Synthetic images encode the labels in measurable visual signals:

* age    -> concentric radial pattern, 1..7 cycles from center to edge,
            linear in the age's position within the configured range;
* gender -> horizontal luminance ramp whose direction flips with gender;
* ethnicity -> a fixed permutation of per-channel gains, one per class.

Image files use a flat binary container: magic ``IMG1``, height and width as
32-bit little-endian unsigned ints, then 3*H*W float32 little-endian values
channel-major. Manifests are UTF-8 CSV with header ``path,age,gender,ethnicity``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Sample",
    "ManifestEntry",
    "SyntheticSpec",
    "IMG_MAGIC",
    "write_image",
    "read_image",
    "load_manifest",
    "write_manifest",
    "split_811",
    "random_crop",
    "center_crop",
    "age_frequency",
    "render_sample",
    "draw_labels",
    "synth_generate",
    "synth_split",
]

IMG_MAGIC = b"IMG1"
MANIFEST_HEADER = ["path", "age", "gender", "ethnicity"]

# One channel-gain permutation per ethnicity class.
CHANNEL_PERMS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (2, 1, 0))
CHANNEL_GAINS = (1.0, 0.75, 0.5)


@dataclass
class Sample:
    image: np.ndarray  # 3 x H x W float64 in [0, 1]
    age: int
    gender: int
    ethnicity: int


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    age: int
    gender: int
    ethnicity: int


@dataclass(frozen=True)
class SyntheticSpec:
    resolution: int = 64
    a_min: int = 20
    a_max: int = 59
    noise_sigma: float = 0.02
    seed: int = 0
    counts: tuple[int, int, int] = (64, 16, 16)  # train, val, test
    attr_correlation: float = 0.0  # probability a label aligns with the age

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.a_min >= self.a_max:
            raise ValueError(f"need a_min < a_max, got {self.a_min} >= {self.a_max}")
        if not 0.0 <= self.attr_correlation <= 1.0:
            raise ValueError("attr_correlation must be in [0, 1]")

    @property
    def total(self) -> int:
        return sum(self.counts)


# ---------------------------------------------------------------------------
# Image container
# ---------------------------------------------------------------------------

def write_image(path: str | Path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValueError(f"expected 3 x H x W image, got {image.shape}")
    _, h, w = image.shape
    header = IMG_MAGIC + np.array([h, w], dtype="<u4").tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(image.astype("<f4").tobytes())


def read_image(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != IMG_MAGIC:
        raise ValueError(f"{path}: bad magic {blob[:4]!r}")
    h, w = np.frombuffer(blob[4:12], dtype="<u4")
    expected = 12 + 3 * int(h) * int(w) * 4
    if len(blob) != expected:
        raise ValueError(f"{path}: truncated image file ({len(blob)} bytes, expected {expected})")
    return np.frombuffer(blob[12:], dtype="<f4").reshape(3, int(h), int(w)).astype(np.float64)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

def write_manifest(path: str | Path, entries: list[ManifestEntry]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        wr = csv.writer(f)
        wr.writerow(MANIFEST_HEADER)
        for e in entries:
            wr.writerow([e.path, e.age, e.gender, e.ethnicity])


def load_manifest(path: str | Path, *, a_min: int, a_max: int,
                  gender_classes: int = 2, ethnicity_classes: int = 4) -> list[ManifestEntry]:
    """Parse a manifest, dropping rows whose labels fall outside the declared
    ranges (each drop is reported with its line number). Structurally broken
    rows raise."""
    path = Path(path)
    entries: list[ManifestEntry] = []
    dropped: list[int] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty manifest, expected header {','.join(MANIFEST_HEADER)}")
        if header != MANIFEST_HEADER:
            raise ValueError(f"{path}: bad header {header}, expected {MANIFEST_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if row == MANIFEST_HEADER:
                raise ValueError(f"{path}:{lineno}: duplicate header row")
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            try:
                age, gender, eth = int(row[1]), int(row[2]), int(row[3])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer label: {exc}") from None
            if not (a_min <= age <= a_max and 0 <= gender < gender_classes
                    and 0 <= eth < max(ethnicity_classes, 1)):
                dropped.append(lineno)
                continue
            entries.append(ManifestEntry(path=row[0], age=age, gender=gender, ethnicity=eth))
    if dropped:
        warnings.warn(f"{path}: dropped {len(dropped)} out-of-range rows at lines {dropped}")
    if not entries:
        warnings.warn(f"{path}: manifest contains no usable rows")
    return entries


def split_811(entries: list, seed: int) -> tuple[list, list, list]:
    """Deterministic shuffle then 8:1:1 partition; val and test take floor(n/10)
    each and the remainder stays in train."""
    n = len(entries)
    if n < 10:
        raise ValueError(f"need at least 10 entries to split 8:1:1, got {n}")
    order = np.random.default_rng([seed, 97]).permutation(n)
    n_val = n // 10
    n_test = n // 10
    n_train = n - n_val - n_test
    train = [entries[i] for i in order[:n_train]]
    val = [entries[i] for i in order[n_train:n_train + n_val]]
    test = [entries[i] for i in order[n_train + n_val:]]
    return train, val, test


# ---------------------------------------------------------------------------
# Crops
# ---------------------------------------------------------------------------

def random_crop(image: np.ndarray, out_size: int, rng: np.random.Generator) -> np.ndarray:
    _, h, w = image.shape
    if out_size > h or out_size > w:
        raise ValueError(f"crop {out_size} larger than image {h}x{w}")
    top = int(rng.integers(0, h - out_size + 1))
    left = int(rng.integers(0, w - out_size + 1))
    return image[:, top:top + out_size, left:left + out_size]


def center_crop(image: np.ndarray, out_size: int) -> np.ndarray:
    _, h, w = image.shape
    if out_size > h or out_size > w:
        raise ValueError(f"crop {out_size} larger than image {h}x{w}")
    top = (h - out_size) // 2
    left = (w - out_size) // 2
    return image[:, top:top + out_size, left:left + out_size]


# ---------------------------------------------------------------------------
# Synthetic face proxies
# ---------------------------------------------------------------------------

def age_frequency(age: int, a_min: int, a_max: int) -> float:
    return 1.0 + 6.0 * (age - a_min) / (a_max - a_min)


def render_sample(spec: SyntheticSpec, age: int, gender: int, ethnicity: int,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Render one labelled proxy image; ``rng`` drives only the noise."""
    res = spec.resolution
    c = (res - 1) / 2.0
    ys, xs = np.mgrid[0:res, 0:res].astype(np.float64)
    r_hat = np.hypot(ys - c, xs - c) / ((res - 1) / 2.0)
    radial = np.cos(2.0 * np.pi * age_frequency(age, spec.a_min, spec.a_max) * r_hat)
    ramp = xs / (res - 1) - 0.5
    sign = 1.0 if gender % 2 == 0 else -1.0
    base = 0.5 + 0.18 * radial + 0.22 * sign * ramp
    perm = CHANNEL_PERMS[ethnicity % len(CHANNEL_PERMS)]
    image = np.stack([base * CHANNEL_GAINS[perm[ch]] for ch in range(3)])
    if spec.noise_sigma > 0:
        if rng is None:
            raise ValueError("noise_sigma > 0 requires an rng")
        image = image + rng.normal(0.0, spec.noise_sigma, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def draw_labels(spec: SyntheticSpec, index: int) -> tuple[int, int, int]:
    """Deterministic labels for one sample index.

    With attr_correlation = c, gender aligns with the age-range midpoint and
    ethnicity with the age quartile with probability c each, otherwise both
    are drawn uniformly."""
    rng = np.random.default_rng([spec.seed, index, 11])
    age = int(rng.integers(spec.a_min, spec.a_max + 1))
    span = spec.a_max - spec.a_min
    if rng.random() < spec.attr_correlation:
        gender = int(age - spec.a_min > span / 2)
    else:
        gender = int(rng.integers(0, 2))
    if rng.random() < spec.attr_correlation:
        ethnicity = min(int(4 * (age - spec.a_min) / (span + 1)), 3)
    else:
        ethnicity = int(rng.integers(0, 4))
    return age, gender, ethnicity


def synth_generate(spec: SyntheticSpec, index: int) -> Sample:
    """Deterministic sample for (spec.seed, index)."""
    if not 0 <= index < spec.total:
        raise ValueError(f"index {index} outside [0, {spec.total})")
    age, gender, ethnicity = draw_labels(spec, index)
    noise_rng = np.random.default_rng([spec.seed, index, 13])
    image = render_sample(spec, age, gender, ethnicity, noise_rng)
    return Sample(image=image, age=age, gender=gender, ethnicity=ethnicity)


def synth_split(spec: SyntheticSpec, split: str) -> list[Sample]:
    """Materialize one of the train/val/test splits (disjoint index ranges)."""
    starts = {
        "train": 0,
        "val": spec.counts[0],
        "test": spec.counts[0] + spec.counts[1],
    }
    sizes = dict(zip(("train", "val", "test"), spec.counts))
    if split not in starts:
        raise ValueError(f"unknown split {split!r}")
    base = starts[split]
    return [synth_generate(spec, base + i) for i in range(sizes[split])]
