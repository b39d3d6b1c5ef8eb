"""Synthetic modulation-format dataset.

Generates OOK / PAM / PSK symbol sequences at a configurable SNR, reduces each
waveform to four magnitude statistics (algebraic mean, variance, coefficient of
variation, geometric mean), and assembles a stratified, min-max normalized
train/test split with one-hot class labels.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CLASS_NAMES = ("OOK", "PAM", "PSK")
FEATURE_NAMES = ("algebraic_mean", "variance", "variation", "geometric_mean")

# Floor applied to magnitudes before the log-domain geometric mean; OOK/PAM
# contain exact zero levels and the statistic must stay finite.
LOG_FLOOR = 1e-12

MIN_SYMBOLS = 64

# Constellations, peak-normalized to 1.
_OOK_LEVELS = np.array([0.0, 1.0])
_PAM_LEVELS = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
_PSK_POINTS = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * np.arange(4)))

_CONSTELLATIONS = {
    "OOK": _OOK_LEVELS.astype(complex),
    "PAM": _PAM_LEVELS.astype(complex),
    "PSK": _PSK_POINTS,
}


class DegenerateFeatureError(ValueError):
    """A feature is constant on the training set, so min-max cannot be fit."""


@dataclass(frozen=True)
class SymbolWaveform:
    """Complex symbol-rate samples of one modulated burst."""

    samples: np.ndarray
    format: str
    snr_db: float
    seed: int

    def __post_init__(self) -> None:
        if self.format not in _CONSTELLATIONS:
            raise ValueError(f"unknown modulation format: {self.format!r}")
        if len(self.samples) < MIN_SYMBOLS:
            raise ValueError(
                f"waveform must hold at least {MIN_SYMBOLS} symbols, got {len(self.samples)}"
            )


@dataclass(frozen=True)
class FeatureVector:
    """The four magnitude statistics used as classifier inputs."""

    algebraic_mean: float
    variance: float
    variation: float
    geometric_mean: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.algebraic_mean, self.variance, self.variation, self.geometric_mean]
        )

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "FeatureVector":
        a = np.asarray(values, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected 4 features, got shape {a.shape}")
        return cls(*a.tolist())


@dataclass(frozen=True)
class Sample:
    """One labeled data point: normalized features plus a one-hot class label."""

    features: FeatureVector
    label: np.ndarray
    class_name: str
    snr_db: float
    seed: int

    def __post_init__(self) -> None:
        label = np.asarray(self.label, dtype=float)
        if label.ndim != 1 or np.count_nonzero(label == 1.0) != 1 or label.sum() != 1.0:
            raise ValueError("label must be one-hot")
        object.__setattr__(self, "label", label)

    @property
    def class_index(self) -> int:
        return int(np.argmax(self.label))


@dataclass(frozen=True)
class Normalizer:
    """Per-feature affine map onto [-1, 1], fit on the training split only."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.minimum, dtype=float)
        hi = np.asarray(self.maximum, dtype=float)
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)
        if np.any(hi <= lo):
            bad = FEATURE_NAMES[int(np.argmax(hi <= lo))]
            raise DegenerateFeatureError(f"feature {bad!r} has max <= min")

    def normalize_array(self, raw: np.ndarray) -> np.ndarray:
        """Map raw feature rows to [-1, 1]; values outside the fit range are
        mapped affinely without clipping."""
        raw = np.asarray(raw, dtype=float)
        return 2.0 * (raw - self.minimum) / (self.maximum - self.minimum) - 1.0

    def normalize(self, features: FeatureVector) -> FeatureVector:
        return FeatureVector.from_array(self.normalize_array(features.as_array()))


@dataclass(frozen=True)
class Dataset:
    """Stratified train/test split with the normalizer that produced it."""

    train: tuple
    test: tuple
    normalizer: Normalizer

    def matrices(self, split: str) -> tuple:
        """Return (X, Y) feature/label matrices for 'train' or 'test'."""
        samples = getattr(self, split)
        x = np.array([s.features.as_array() for s in samples])
        y = np.array([s.label for s in samples])
        return x, y


def synthesize_waveform(
    format: str, n_symbols: int, snr_db: float, seed: int
) -> SymbolWaveform:
    """Draw equiprobable symbols and add complex AWGN at the requested SNR.

    SNR is defined against the mean constellation power (OOK 1/2, PAM 7/18,
    PSK 1). ``snr_db = inf`` gives the noiseless constellation.
    """
    if format not in _CONSTELLATIONS:
        raise ValueError(f"unknown modulation format: {format!r}")
    if n_symbols < MIN_SYMBOLS:
        raise ValueError(f"n_symbols must be >= {MIN_SYMBOLS}, got {n_symbols}")
    if np.isnan(snr_db):
        raise ValueError("snr_db must be a number or +inf")

    points = _CONSTELLATIONS[format]
    rng = np.random.default_rng(seed)
    symbols = points[rng.integers(0, len(points), size=n_symbols)]

    mean_power = float(np.mean(np.abs(points) ** 2))
    noise_power = mean_power * 10.0 ** (-snr_db / 10.0)
    if noise_power > 0.0:
        sigma = np.sqrt(noise_power / 2.0)
        noise = sigma * (
            rng.standard_normal(n_symbols) + 1j * rng.standard_normal(n_symbols)
        )
        symbols = symbols + noise

    return SymbolWaveform(samples=symbols, format=format, snr_db=snr_db, seed=seed)


def extract_features(waveform: SymbolWaveform) -> FeatureVector:
    """Compute the four magnitude statistics of a waveform.

    All statistics act on m_k = |sample_k|: mean, population variance,
    coefficient of variation (std/mean), and the geometric mean with the
    magnitudes floored at LOG_FLOOR so zero levels stay finite.
    """
    m = np.abs(np.asarray(waveform.samples))
    if m.size == 0:
        raise ValueError("cannot extract features from an empty waveform")
    mean = float(m.mean())
    variance = float(np.mean((m - mean) ** 2))
    variation = float(np.sqrt(variance) / mean) if mean > 0 else 0.0
    geometric = float(np.exp(np.mean(np.log(np.maximum(m, LOG_FLOOR)))))
    return FeatureVector(mean, variance, variation, geometric)


def fit_normalizer(features: Iterable[FeatureVector]) -> Normalizer:
    """Fit per-feature min/max bounds; raises DegenerateFeatureError when a
    feature is constant."""
    raw = np.array([f.as_array() for f in features])
    if raw.size == 0:
        raise ValueError("cannot fit a normalizer on an empty feature list")
    lo = raw.min(axis=0)
    hi = raw.max(axis=0)
    for name, a, b in zip(FEATURE_NAMES, lo, hi):
        if b <= a:
            raise DegenerateFeatureError(
                f"feature {name!r} is degenerate on the training set (min == max == {a})"
            )
    return Normalizer(minimum=lo, maximum=hi)


def normalize(normalizer: Normalizer, features: FeatureVector) -> FeatureVector:
    return normalizer.normalize(features)


def build_dataset(
    per_class: int = 50,
    snr_range_db: tuple = (15.0, 25.0),
    seed: int = 0,
    n_symbols: int = 4096,
) -> Dataset:
    """Synthesize the full labeled dataset and split it 8:2 per class.

    Per-sample SNR is drawn uniformly from ``snr_range_db``; the last fifth of
    each class goes to the test split, so the default per_class = 50 yields
    120 training and 30 test samples with 10 test samples per class. The
    normalizer is fit on the training split only and applied to both splits.
    """
    if per_class < 5:
        raise ValueError(f"per_class must be >= 5, got {per_class}")
    lo, hi = float(snr_range_db[0]), float(snr_range_db[1])
    if hi < lo:
        raise ValueError("snr_range_db must be (low, high)")

    rng = np.random.default_rng(seed)
    n_test = per_class // 5

    raw_train: list = []
    raw_test: list = []
    for class_index, name in enumerate(CLASS_NAMES):
        label = np.zeros(len(CLASS_NAMES))
        label[class_index] = 1.0
        for k in range(per_class):
            snr_db = float(rng.uniform(lo, hi))
            wseed = int(rng.integers(0, 2**31 - 1))
            features = extract_features(
                synthesize_waveform(name, n_symbols, snr_db, wseed)
            )
            record = (features, label.copy(), name, snr_db, wseed)
            (raw_test if k >= per_class - n_test else raw_train).append(record)

    normalizer = fit_normalizer([r[0] for r in raw_train])

    def finish(records: list) -> tuple:
        return tuple(
            Sample(
                features=normalizer.normalize(f),
                label=lbl,
                class_name=name,
                snr_db=snr,
                seed=s,
            )
            for f, lbl, name, snr, s in records
        )

    return Dataset(train=finish(raw_train), test=finish(raw_test), normalizer=normalizer)


# ---------------------------------------------------------------------------
# Interchange formats


def dataset_to_json(dataset: Dataset) -> str:
    """Serialize a dataset (normalized features) to a single JSON document."""

    def encode(samples: tuple) -> list:
        return [
            {
                "features": [float(v) for v in s.features.as_array()],
                "label": [float(v) for v in s.label],
                "class_name": s.class_name,
                "snr_db": s.snr_db,
                "seed": s.seed,
            }
            for s in samples
        ]

    doc = {
        "format_version": 1,
        "feature_names": list(FEATURE_NAMES),
        "class_names": list(CLASS_NAMES),
        "normalizer": {
            "min": [float(v) for v in dataset.normalizer.minimum],
            "max": [float(v) for v in dataset.normalizer.maximum],
        },
        "train": encode(dataset.train),
        "test": encode(dataset.test),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def dataset_from_json(text: str) -> Dataset:
    doc = json.loads(text)
    if doc.get("format_version") != 1:
        raise ValueError(f"unsupported dataset format version: {doc.get('format_version')}")
    normalizer = Normalizer(
        minimum=np.array(doc["normalizer"]["min"], dtype=float),
        maximum=np.array(doc["normalizer"]["max"], dtype=float),
    )

    def decode(rows: list) -> tuple:
        return tuple(
            Sample(
                features=FeatureVector.from_array(r["features"]),
                label=np.array(r["label"], dtype=float),
                class_name=r["class_name"],
                snr_db=float(r["snr_db"]),
                seed=int(r["seed"]),
            )
            for r in rows
        )

    return Dataset(train=decode(doc["train"]), test=decode(doc["test"]), normalizer=normalizer)


def features_to_csv(dataset: Dataset, path: Path | str) -> None:
    """Write one row per sample (both splits) with a header row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "class_name", "snr_db", "seed", *FEATURE_NAMES])
        for split in ("train", "test"):
            for s in getattr(dataset, split):
                writer.writerow(
                    [split, s.class_name, f"{s.snr_db:.6f}", s.seed]
                    + [f"{v:.12g}" for v in s.features.as_array()]
                )
