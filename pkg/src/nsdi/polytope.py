"""The (2,2,2,2) non-signaling polytope: its 24 vertices, locality testing and
the non-locality fraction and cost."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .devices import Device, make_local_vertex, make_nonlocal_vertex, mixture, validate
from .lp import LinearProgram, solve
from .numerics import to_float

LOCAL_LABELS = tuple("L" + "".join(map(str, b)) for b in itertools.product(range(2), repeat=4))
NONLOCAL_LABELS = tuple("B" + "".join(map(str, b)) for b in itertools.product(range(2), repeat=3))
VERTEX_LABELS = LOCAL_LABELS + NONLOCAL_LABELS


def vertex_from_label(label: str) -> Device:
    bits = [int(ch) for ch in label[1:]]
    if label[0] == "L" and len(bits) == 4:
        return make_local_vertex(*bits)
    if label[0] == "B" and len(bits) == 3:
        return make_nonlocal_vertex(*bits)
    raise ValueError(f"unknown vertex label {label!r}")


@dataclass(frozen=True)
class VertexSet:
    labels: tuple[str, ...]
    vertices: tuple[Device, ...]

    def __len__(self):
        return len(self.vertices)

    def __getitem__(self, label: str) -> Device:
        return self.vertices[self.labels.index(label)]

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @property
    def local(self) -> tuple[Device, ...]:
        return tuple(v for l, v in zip(self.labels, self.vertices) if l[0] == "L")

    @property
    def nonlocal_(self) -> tuple[Device, ...]:
        return tuple(v for l, v in zip(self.labels, self.vertices) if l[0] == "B")


@lru_cache(maxsize=1)
def vertices() -> VertexSet:
    """The 16 deterministic vertices L_{αβγσ} followed by the 8 boxes B_{rst}."""
    return VertexSet(VERTEX_LABELS, tuple(vertex_from_label(l) for l in VERTEX_LABELS))


@dataclass(frozen=True)
class Decomposition:
    weights: tuple
    labels: tuple[str, ...]
    components: tuple[Device, ...]

    @property
    def local_flags(self) -> tuple[bool, ...]:
        return tuple(l[0] == "L" for l in self.labels)

    def reconstruct(self) -> Device:
        return mixture(self.weights, self.components)


def _require_2222(device: Device) -> None:
    if device.shape != ((2, 2), (2, 2)):
        raise ValueError("a (2,2,2,2) device is required")


def cg_coordinates(device: Device) -> list:
    """Collins-Gisin coordinates: pA(0|0), pA(0|1), pB(0|0), pB(0|1), P(00|xy).

    These determine a non-signaling (2,2,2,2) device uniquely.
    """
    _require_2222(device)
    p = device.probs
    return [p[0, 0, 0, :].sum(), p[1, 0, 0, :].sum(), p[0, 0, :, 0].sum(), p[0, 1, :, 0].sum(),
            p[0, 0, 0, 0], p[0, 1, 0, 0], p[1, 0, 0, 0], p[1, 1, 0, 0]]


def _checked(device: Device) -> Device:
    _require_2222(device)
    rep = validate(device)
    if not rep.valid:
        raise ValueError(f"device is not a valid non-signaling box (violation {rep.worst_violation:g})")
    return device


def _decompose(device: Device, labels, minimize_labels=(), maximize=False):
    """LP over the given vertices: weights reproducing ``device`` with the
    objective sum of weights on ``minimize_labels``."""
    exact = device.exact
    cols = [cg_coordinates(vertex_from_label(l)) for l in labels]
    target = cg_coordinates(device)
    if not exact:
        target = [float(v) for v in target]
    one = 1 if exact else 1.0
    A_eq = [[col[r] for col in cols] for r in range(8)] + [[one] * len(labels)]
    b_eq = target + [one]
    c = [1 if l in minimize_labels else 0 for l in labels]
    return solve(LinearProgram(c, A_eq, b_eq, maximize=maximize, exact=exact))


def _as_decomposition(labels, x, exact) -> Decomposition:
    keep = [i for i, v in enumerate(x) if (v != 0 if exact else v > 1e-12)]
    return Decomposition(tuple(x[i] for i in keep), tuple(labels[i] for i in keep),
                         tuple(vertex_from_label(labels[i]) for i in keep))


@dataclass(frozen=True)
class LocalityResult:
    local: bool
    model: Decomposition | None


def is_local(device: Device) -> LocalityResult:
    """Feasibility of a local hidden-variable model; the model is returned when one exists."""
    _checked(device)
    sol = _decompose(device, LOCAL_LABELS)
    if not sol.optimal:
        return LocalityResult(False, None)
    return LocalityResult(True, _as_decomposition(LOCAL_LABELS, sol.x, device.exact))


@dataclass(frozen=True)
class FractionResult:
    value: object
    witness: Decomposition
    vertex: str | None


def nonlocality_fraction(device: Device) -> FractionResult:
    """Smallest weight α of a single nonlocal vertex in P = α B + (1-α) P_L.

    One LP per nonlocal vertex; the minimum over the eight is returned with
    its decomposition.
    """
    _checked(device)
    exact = device.exact
    loc = is_local(device)
    if loc.local:
        return FractionResult(Fraction(0) if exact else 0.0, loc.model, None)
    best = None
    for b in NONLOCAL_LABELS:
        labels = (b,) + LOCAL_LABELS
        sol = _decompose(device, labels, minimize_labels=(b,))
        if sol.optimal and (best is None or sol.objective < best[0]):
            best = (sol.objective, labels, sol.x, b)
    if best is None:
        raise RuntimeError("no single-vertex decomposition found for a valid device")
    return FractionResult(best[0], _as_decomposition(best[1], best[2], exact), best[3])


def local_fraction(device: Device):
    """Largest total local weight over decompositions into all 24 vertices."""
    _checked(device)
    sol = _decompose(device, VERTEX_LABELS, minimize_labels=LOCAL_LABELS, maximize=True)
    return sol.objective


def nonlocality_cost(device: Device):
    """C(P) · log2 min(d_A, d_B)."""
    _require_2222(device)
    frac = nonlocality_fraction(device).value
    scale = math.log2(min(device.output_sizes))
    return frac if scale == 1 else frac * scale


def vertex_vectors(exact: bool = True) -> np.ndarray:
    """24 x 16 matrix of flattened vertex tensors."""
    vs = vertices()
    arr = np.array([v.vector() for v in vs.vertices], dtype=object)
    return arr if exact else to_float(arr)
