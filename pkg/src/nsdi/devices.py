"""Non-signaling devices (boxes) and the named (2,2,2,2) families.

A device stores ``probs[x_1, ..., x_n, a_1, ..., a_n] = P(a|x)``: all inputs
(party-major) first, then all outputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .numerics import Channel, JointDistribution, is_exact, to_exact, to_float

NORM_TOL = 1e-12
NS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Device:
    input_sizes: tuple[int, ...]
    output_sizes: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "input_sizes", tuple(int(v) for v in self.input_sizes))
        object.__setattr__(self, "output_sizes", tuple(int(v) for v in self.output_sizes))
        p = self.probs
        if not isinstance(p, np.ndarray) or p.dtype.kind in "biu":
            p = np.asarray(p)
            if p.dtype != object:
                p = p.astype(float)
            object.__setattr__(self, "probs", p)
        if len(self.input_sizes) != len(self.output_sizes) or not self.input_sizes:
            raise ValueError("input_sizes and output_sizes must list the same parties")
        if min(self.input_sizes + self.output_sizes) < 1:
            raise ValueError("alphabet sizes must be positive")
        if p.shape != self.input_sizes + self.output_sizes:
            raise ValueError(f"tensor shape {p.shape} does not match {self.input_sizes + self.output_sizes}")

    @property
    def parties(self) -> int:
        return len(self.input_sizes)

    @property
    def exact(self) -> bool:
        return is_exact(self.probs)

    @property
    def shape(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return self.input_sizes, self.output_sizes

    def vector(self) -> np.ndarray:
        return self.probs.reshape(-1)

    def as_float(self) -> "Device":
        return Device(self.input_sizes, self.output_sizes, to_float(self.probs))

    def as_exact(self, max_denominator: int | None = None) -> "Device":
        return Device(self.input_sizes, self.output_sizes, to_exact(self.probs, max_denominator))

    def equals(self, other: "Device", tol: float = 0.0) -> bool:
        if self.shape != other.shape:
            return False
        if self.exact and other.exact and tol == 0:
            return bool(all(a == b for a, b in zip(self.probs.flat, other.probs.flat)))
        return bool(np.abs(to_float(self.probs) - to_float(other.probs)).max() <= tol)

    def __repr__(self) -> str:
        mode = "exact" if self.exact else "float"
        return f"Device(inputs={self.input_sizes}, outputs={self.output_sizes}, {mode})"


@dataclass(frozen=True)
class ValidationReport:
    normalized: bool
    nonsignaling: bool
    worst_violation: float

    @property
    def valid(self) -> bool:
        return self.normalized and self.nonsignaling


def validate(device: Device) -> ValidationReport:
    """Check nonnegativity, normalization and non-signaling for every party subset."""
    p = device.probs
    n = device.parties
    out_axes = tuple(range(n, 2 * n))
    exact = device.exact
    worst = Fraction(0) if exact else 0.0

    neg = min(p.flat) if p.size else 0
    norm_dev = p.sum(axis=out_axes) - 1
    norm_viol = max(max(abs(v) for v in np.ravel(norm_dev)), -neg if neg < 0 else 0)
    worst = max(worst, norm_viol)

    ns_viol = Fraction(0) if exact else 0.0
    for k in range(1, n):
        for subset in itertools.combinations(range(n), k):
            # marginal on the complement must not depend on the subset's inputs
            marg = p.sum(axis=tuple(n + i for i in subset))
            ref = np.take(marg, [0] * 1, axis=subset[0])
            for i in subset[1:]:
                ref = np.take(ref, [0], axis=i)
            diff = marg - ref
            v = max(abs(d) for d in np.ravel(diff))
            ns_viol = max(ns_viol, v)
    worst = max(worst, ns_viol)
    if exact:
        normalized, nonsig = norm_viol == 0, ns_viol == 0
    else:
        normalized, nonsig = norm_viol <= NORM_TOL, ns_viol <= NS_TOL
    return ValidationReport(bool(normalized), bool(nonsig), float(worst))


def direct_measure(device: Device, inputs: Sequence[int]) -> JointDistribution:
    inputs = tuple(int(x) for x in inputs)
    if len(inputs) != device.parties:
        raise ValueError("one input per party required")
    for x, size in zip(inputs, device.input_sizes):
        if not 0 <= x < size:
            raise IndexError("input index out of range")
    return JointDistribution(device.probs[inputs])


def general_measure(device: Device, party: int, dice: Channel) -> Device:
    """Replace ``party``'s input by a dice-mixed one: the new input z' selects
    the input x with probability ``dice.matrix[x, z']``."""
    if not 0 <= party < device.parties:
        raise IndexError("party out of range")
    if dice.output_size != device.input_sizes[party]:
        raise ValueError("dice output size must equal the party's input size")
    if device.exact and dice.exact:
        m, p = dice.matrix, device.probs
    else:
        m, p = to_float(dice.matrix), to_float(device.probs)
    out = np.tensordot(m, p, axes=([0], [party]))  # new input axis first
    out = np.moveaxis(out, 0, party)
    sizes = list(device.input_sizes)
    sizes[party] = dice.input_size
    return Device(tuple(sizes), device.output_sizes, out)


def tensor_product(a: Device, b: Device) -> Device:
    if a.exact and b.exact:
        pa, pb = a.probs, b.probs
    else:
        pa, pb = to_float(a.probs), to_float(b.probs)
    na, nb = a.parties, b.parties
    outer = np.multiply.outer(pa, pb)  # (Xa, Aa, Xb, Ab)
    perm = (list(range(na)) + list(range(2 * na, 2 * na + nb))
            + list(range(na, 2 * na)) + list(range(2 * na + nb, 2 * na + 2 * nb)))
    return Device(a.input_sizes + b.input_sizes, a.output_sizes + b.output_sizes,
                  np.transpose(outer, perm))


def mix(lam, p: Device, q: Device) -> Device:
    """λ·P + (1-λ)·Q."""
    if p.shape != q.shape:
        raise ValueError("devices must have the same shape")
    if p.exact and q.exact and isinstance(lam, Rational):
        lam = Fraction(lam)
        return Device(p.input_sizes, p.output_sizes, p.probs * lam + q.probs * (1 - lam))
    lam = float(lam)
    return Device(p.input_sizes, p.output_sizes,
                  to_float(p.probs) * lam + to_float(q.probs) * (1 - lam))


def mixture(weights: Sequence, devices: Sequence[Device]) -> Device:
    """Σ w_i D_i (exact when everything is exact)."""
    if not devices:
        raise ValueError("empty mixture")
    exact = all(d.exact for d in devices) and all(isinstance(w, Rational) for w in weights)
    if exact:
        acc = np.full(devices[0].probs.shape, Fraction(0), dtype=object)
        for w, d in zip(weights, devices):
            acc = acc + d.probs * Fraction(w)
    else:
        acc = np.zeros(devices[0].probs.shape)
        for w, d in zip(weights, devices):
            acc = acc + float(w) * to_float(d.probs)
    return Device(devices[0].input_sizes, devices[0].output_sizes, acc)


# --------------------------------------------------------------------------
# (2,2,2,2) families

def _num(v, exact: bool):
    return Fraction(v) if exact else float(v)


def _is_exact_param(*vals) -> bool:
    return all(isinstance(v, Rational) for v in vals)


def _box(fn, exact: bool) -> Device:
    p = np.empty((2, 2, 2, 2), dtype=object if exact else float)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        p[x, y, a, b] = _num(fn(x, y, a, b), exact)
    return Device((2, 2), (2, 2), p)


def make_local_vertex(alpha: int, beta: int, gamma: int, sigma: int) -> Device:
    """Deterministic box a = αx ⊕ β, b = γy ⊕ σ (exact)."""
    for v in (alpha, beta, gamma, sigma):
        if v not in (0, 1):
            raise ValueError("vertex parameters are bits")
    return _box(lambda x, y, a, b: int(a == (alpha * x) ^ beta and b == (gamma * y) ^ sigma), True)


def make_nonlocal_vertex(r: int, s: int, t: int) -> Device:
    """Box uniform on a ⊕ b = xy ⊕ rx ⊕ sy ⊕ t (exact)."""
    for v in (r, s, t):
        if v not in (0, 1):
            raise ValueError("vertex parameters are bits")
    half = Fraction(1, 2)
    return _box(lambda x, y, a, b: half if a ^ b == (x * y) ^ (r * x) ^ (s * y) ^ t else 0, True)


def make_pr() -> Device:
    return make_nonlocal_vertex(0, 0, 0)


def make_anti_pr() -> Device:
    return make_nonlocal_vertex(0, 0, 1)


def make_isotropic(eps) -> Device:
    """(1-ε)·PR + ε·anti-PR.  Exact when ε is rational (int/Fraction)."""
    if not 0 <= eps <= 1:
        raise ValueError("isotropic parameter must lie in [0, 1]")
    return mix(1 - eps if _is_exact_param(eps) else 1 - float(eps), make_pr(), make_anti_pr())


def tsirelson_epsilon() -> float:
    """ε at which the isotropic box reaches CHSH value 2 + √2."""
    return (2 - math.sqrt(2)) / 4


def tsirelson_epsilon_rational(max_denominator: int = 10**6) -> Fraction:
    return Fraction(tsirelson_epsilon()).limit_denominator(max_denominator)


@dataclass(frozen=True)
class HrwParams:
    """Parameters (δ, ε_p) of the HRW box."""

    delta: object
    epsilon_p: object

    def __post_init__(self):
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")
        if not Fraction(-1, 4) <= self.epsilon_p <= Fraction(3, 4):
            raise ValueError("epsilon_p must lie in [-1/4, 3/4]")

    @property
    def exact(self) -> bool:
        return _is_exact_param(self.delta, self.epsilon_p)

    @property
    def nonlocal_region(self) -> bool:
        return self.epsilon_p < Fraction(1, 12) - Fraction(self.delta) / 3 if self.exact \
            else float(self.epsilon_p) < 1 / 12 - float(self.delta) / 3

    def chsh_error(self):
        if self.exact:
            return (Fraction(3, 4) + Fraction(self.delta) + 3 * Fraction(self.epsilon_p)) / 4
        return (0.75 + float(self.delta) + 3 * float(self.epsilon_p)) / 4

    def fraction_formula(self):
        """¼ − δ − 3ε_p, the nonlocal weight in the nonlocal region."""
        if self.exact:
            return Fraction(1, 4) - Fraction(self.delta) - 3 * Fraction(self.epsilon_p)
        return 0.25 - float(self.delta) - 3 * float(self.epsilon_p)


def make_hrw(params: HrwParams) -> Device:
    exact = params.exact
    d = Fraction(params.delta) if exact else float(params.delta)
    e = Fraction(params.epsilon_p) if exact else float(params.epsilon_p)
    half = Fraction(1, 2) if exact else 0.5
    hi = (Fraction(3, 8) if exact else 0.375) - e / 2
    lo = (Fraction(1, 8) if exact else 0.125) + e / 2

    def fn(x, y, a, b):
        if x == 0 and y == 0:
            return half - d / 2 if a == b else d / 2
        correlated = (a == b) if x * y == 0 else (a != b)
        return hi if correlated else lo

    return _box(fn, exact)


HRW_ROWS = ("a", "b", "c", "d")


def hrw_row_params(row: str, eps) -> HrwParams:
    """(δ, ε_p) for the four HRW families, parameterised by the CHSH error ε.

    Every row satisfies ε_p = (4ε − ¾ − δ)/3 so that the CHSH error equals ε;
    rows a and b fix δ = 1/100 and 3/100, row c uses δ = 2ε/5, row d (the
    isotropic line) uses δ = ε.
    """
    exact = _is_exact_param(eps)
    eps = Fraction(eps) if exact else float(eps)
    if row == "a":
        delta = Fraction(1, 100) if exact else 0.01
    elif row == "b":
        delta = Fraction(3, 100) if exact else 0.03
    elif row == "c":
        delta = 2 * eps / 5
    elif row == "d":
        delta = eps
    else:
        raise ValueError(f"unknown HRW row {row!r}")
    eps_p = (4 * eps - (Fraction(3, 4) if exact else 0.75) - delta) / 3
    return HrwParams(delta, eps_p)


def chsh_error(device: Device):
    """¼ Σ_{x,y} Pr(a ⊕ b ≠ x·y | x, y)."""
    if device.shape != ((2, 2), (2, 2)):
        raise ValueError("chsh_error needs a (2,2,2,2) device")
    p = device.probs
    total = Fraction(0) if device.exact else 0.0
    for x, y, a, b in itertools.product(range(2), repeat=4):
        if a ^ b != x * y:
            total += p[x, y, a, b]
    return total / 4


def trivial_device(exact: bool = True) -> Device:
    """Single party, unary input, deterministic unary output."""
    return Device((1,), (1,), np.array([[Fraction(1) if exact else 1.0]], dtype=object if exact else float))


def marginal_device(device: Device, party: int) -> Device:
    """Single-party marginal (well defined for non-signaling devices)."""
    n = device.parties
    keep_in, keep_out = party, n + party
    p = device.probs.sum(axis=tuple(n + i for i in range(n) if i != party))
    # fix the other parties' inputs at 0
    idx = tuple(slice(None) if i == party else 0 for i in range(n)) + (slice(None),)
    p = p[idx]
    return Device((device.input_sizes[keep_in],), (device.output_sizes[party],), p)
