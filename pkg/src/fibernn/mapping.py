"""Folding the trained network into non-negative pulse schedules.

An identity-activation network is one affine map, so it collapses to a single
effective matrix acting on the bias-augmented input [x; 1]. Intensity
modulators cannot encode negative values, so the matrix and input are split
into non-negative components and each output row becomes four product pulses
plus an unmodulated reference used to calibrate the readout scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .network import DenseNetwork


class NotCollapsibleError(ValueError):
    """The network has a non-identity activation, so it is not one affine map."""


class CalibrationError(RuntimeError):
    """Reference readout unusable for estimating the calibration coefficient."""


@dataclass(frozen=True)
class CollapsedModel:
    """Single effective matrix; columns act on the augmented input [x; 1]."""

    effective_matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.effective_matrix, dtype=float)
        if m.ndim != 2 or m.shape[1] < 2:
            raise ValueError(f"effective matrix must be 2-D with >= 2 columns, got {m.shape}")
        object.__setattr__(self, "effective_matrix", m)

    @property
    def input_dim(self) -> int:
        return self.effective_matrix.shape[1] - 1

    @property
    def output_dim(self) -> int:
        return self.effective_matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Evaluate the collapsed map on a raw (unaugmented) input."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(f"expected input of shape ({self.input_dim},), got {x.shape}")
        return self.effective_matrix @ np.append(x, 1.0)


@dataclass(frozen=True)
class SignSeparated:
    """Non-negative decomposition value = plus - minus with plus * minus = 0."""

    plus: np.ndarray
    minus: np.ndarray

    def recombine(self) -> np.ndarray:
        return self.plus - self.minus


@dataclass(frozen=True)
class PulseGroup:
    """Pulses realizing one output row: four product pulses and a reference.

    Row order of ``products``: plus*x_plus, minus*x_minus, plus*x_minus,
    minus*x_plus. The recombined readout is (r1 + r2) - (r3 + r4).
    """

    products: np.ndarray
    reference: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.products, dtype=float)
        r = np.asarray(self.reference, dtype=float)
        if p.ndim != 2 or p.shape[0] != 4 or r.shape != (p.shape[1],):
            raise ValueError("a group holds exactly 4 product rows plus one reference")
        if np.any(p < 0.0) or np.any(r < 0.0):
            raise ValueError("segment values must be non-negative")
        object.__setattr__(self, "products", p)
        object.__setattr__(self, "reference", r)


@dataclass(frozen=True)
class PulseSchedule:
    """Ordered pulse groups, one per output component."""

    groups: tuple
    segment_count: int

    def __post_init__(self) -> None:
        for g in self.groups:
            if g.products.shape[1] != self.segment_count:
                raise ValueError("all groups must share the schedule segment count")

    @property
    def group_count(self) -> int:
        return len(self.groups)


def absorb_bias(weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Append the bias as an extra column: [W | b] @ [x; 1] == W x + b."""
    w = np.asarray(weights, dtype=float)
    b = np.asarray(bias, dtype=float)
    if w.ndim != 2 or b.shape != (w.shape[0],):
        raise ValueError(f"bias of shape {b.shape} does not match weights {w.shape}")
    return np.hstack([w, b[:, None]])


def _augment(matrix: np.ndarray) -> np.ndarray:
    """Append the row (0, ..., 0, 1) so the constant coordinate propagates."""
    unit = np.zeros((1, matrix.shape[1]))
    unit[0, -1] = 1.0
    return np.vstack([matrix, unit])


def collapse(net: DenseNetwork) -> CollapsedModel:
    """Fold all layers of an identity-activation network into one matrix.

    Layer k contributes [W_k | b_k]; every layer but the last is augmented so
    the appended 1 survives the chain. The result satisfies
    ``effective_matrix @ [x; 1] == forward(net, x)`` exactly.
    """
    if any(tag != "purelin" for tag in net.activations):
        bad = [t for t in net.activations if t != "purelin"]
        raise NotCollapsibleError(
            f"collapse requires identity activations everywhere, found {bad}"
        )
    effective = absorb_bias(net.weights[0], net.biases[0])
    for w, b in zip(net.weights[1:], net.biases[1:]):
        effective = absorb_bias(w, b) @ _augment(effective)
    return CollapsedModel(effective_matrix=effective)


def sign_separate(values: np.ndarray) -> SignSeparated:
    """Split into non-negative parts: plus = max(v, 0), minus = max(-v, 0)."""
    v = np.asarray(values, dtype=float)
    if np.any(np.isnan(v)):
        raise FloatingPointError("cannot sign-separate NaN entries")
    return SignSeparated(plus=np.maximum(v, 0.0), minus=np.maximum(-v, 0.0))


def build_schedule(model: CollapsedModel, x: np.ndarray) -> PulseSchedule:
    """Expand one input into the per-row product pulses plus references.

    The augmented input [x; 1] is sign-separated alongside each matrix row;
    the four elementwise products cover every sign combination and are all
    non-negative, so each can drive an intensity modulator directly.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ValueError(f"expected input of shape ({model.input_dim},), got {x.shape}")
    xe = sign_separate(np.append(x, 1.0))
    rows = sign_separate(model.effective_matrix)
    n = model.input_dim + 1
    groups = []
    for i in range(model.output_dim):
        rp, rm = rows.plus[i], rows.minus[i]
        products = np.vstack(
            [rp * xe.plus, rm * xe.minus, rp * xe.minus, rm * xe.plus]
        )
        groups.append(PulseGroup(products=products, reference=np.ones(n)))
    return PulseSchedule(groups=tuple(groups), segment_count=n)


def combine_readouts(
    group_readouts: np.ndarray, reference_readout: float, segment_count: int
) -> float:
    """Recover one output component from the four product readouts.

    The reference pulse carries ``segment_count`` unit segments, so the
    per-unit-product scale is gamma = reference / N and the output is
    ((r1 + r2) - (r3 + r4)) / gamma.
    """
    r = np.asarray(group_readouts, dtype=float)
    if r.shape != (4,):
        raise ValueError(f"expected 4 group readouts, got shape {r.shape}")
    if not reference_readout > 0.0:
        raise CalibrationError(
            f"reference readout must be positive, got {reference_readout}"
        )
    gamma = reference_readout / segment_count
    return float(((r[0] + r[1]) - (r[2] + r[3])) / gamma)


def schedule_to_json(schedule: PulseSchedule) -> str:
    doc = {
        "segment_count": schedule.segment_count,
        "groups": [
            {
                "products": g.products.tolist(),
                "product_order": ["plus*x_plus", "minus*x_minus", "plus*x_minus", "minus*x_plus"],
                "reference": g.reference.tolist(),
            }
            for g in schedule.groups
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
