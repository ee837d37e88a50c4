"""Probability kernels: joint distributions, channels and entropic functionals.

Two number modes are supported throughout the package.  Arrays holding
:class:`fractions.Fraction` objects (numpy ``object`` dtype) are *exact*;
``float64`` arrays are *float*.  Structural questions (membership,
decomposition) are answered in exact mode, entropies are always floats.
All logarithms are base 2.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

NORM_TOL = 1e-12


def is_exact(arr) -> bool:
    return isinstance(arr, np.ndarray) and arr.dtype == object


def to_exact(arr, max_denominator: int | None = None) -> np.ndarray:
    """Convert an array to Fractions.  Floats are converted exactly unless a
    denominator cap is given."""
    a = np.asarray(arr, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        f = Fraction(v)
        if max_denominator is not None:
            f = f.limit_denominator(max_denominator)
        out[idx] = f
    return out


def to_float(arr) -> np.ndarray:
    return np.asarray(arr, dtype=float)


def _xlogx_sum(p: np.ndarray, axis=None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return (p * np.log2(np.where(p > 0, p, 1.0))).sum(axis=axis)


def entropy_of(p) -> float:
    """Shannon entropy in bits of a probability vector/tensor (0 log 0 = 0)."""
    return float(-_xlogx_sum(p))


def h2(p: float) -> float:
    """Binary entropy."""
    return entropy_of([p, 1.0 - p])


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Distribution over a tuple of finite variables.

    ``probs`` has one axis per variable; ``probs.flat`` is the lexicographic
    flattening.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = self.probs
        if not isinstance(p, np.ndarray) or p.dtype.kind in "biu":
            p = np.asarray(p)
            if p.dtype != object:
                p = p.astype(float)
            object.__setattr__(self, "probs", p)
        if p.ndim == 0:
            raise ValueError("a distribution needs at least one variable")

    @classmethod
    def from_flat(cls, alphabet_sizes: Sequence[int], values) -> "JointDistribution":
        arr = np.asarray(values)
        if arr.dtype != object:
            arr = arr.astype(float)
        if arr.size != int(np.prod(alphabet_sizes)):
            raise ValueError("tensor length does not match alphabet sizes")
        return cls(arr.reshape(tuple(alphabet_sizes)))

    @property
    def alphabet_sizes(self) -> tuple[int, ...]:
        return tuple(self.probs.shape)

    @property
    def num_vars(self) -> int:
        return self.probs.ndim

    @property
    def exact(self) -> bool:
        return is_exact(self.probs)

    def check(self, tol: float = NORM_TOL) -> None:
        p = self.probs
        if self.exact:
            if any(v < 0 for v in p.flat):
                raise ValueError("negative probability")
            if sum(p.flat) != 1:
                raise ValueError("probabilities do not sum to 1")
        else:
            if (p < -tol).any():
                raise ValueError("negative probability")
            if abs(p.sum() - 1.0) > tol:
                raise ValueError("probabilities do not sum to 1")

    def marginal(self, vars: Iterable[int]) -> "JointDistribution":
        vars = _check_vars(self, vars)
        drop = tuple(i for i in range(self.num_vars) if i not in vars)
        m = self.probs.sum(axis=drop) if drop else self.probs
        # sum keeps the remaining axes in increasing order; reorder to request
        order = sorted(vars)
        perm = [order.index(v) for v in vars]
        return JointDistribution(np.transpose(m, perm))

    def as_float(self) -> "JointDistribution":
        return JointDistribution(to_float(self.probs))

    def grouped(self, *groups: Sequence[int]) -> np.ndarray:
        """Float tensor with one axis per variable group (groups flattened)."""
        flat = [v for g in groups for v in g]
        m = self.marginal(flat).probs.astype(float)
        shape = [int(np.prod([self.alphabet_sizes[v] for v in g])) if g else 1 for g in groups]
        return m.reshape(shape)


def _check_vars(dist: JointDistribution, vars) -> list[int]:
    vars = [int(v) for v in vars]
    if not vars:
        raise ValueError("variable set must be nonempty")
    for v in vars:
        if v < 0 or v >= dist.num_vars:
            raise IndexError(f"variable index {v} out of range")
    if len(set(vars)) != len(vars):
        raise ValueError("repeated variable index")
    return vars


def _disjoint(*sets) -> None:
    seen: set[int] = set()
    for s in sets:
        s = set(s)
        if seen & s:
            raise ValueError("variable sets must be disjoint")
        seen |= s


def shannon_entropy(dist: JointDistribution, vars: Iterable[int]) -> float:
    return entropy_of(dist.marginal(vars).probs)


def mutual_information(dist: JointDistribution, vars_a, vars_b) -> float:
    vars_a, vars_b = list(vars_a), list(vars_b)
    _disjoint(vars_a, vars_b)
    p = dist.grouped(vars_a, vars_b)
    return mi_from_table(p)


def mi_from_table(p: np.ndarray) -> float:
    """I(A:B) of a 2-D table."""
    p = np.asarray(p, dtype=float)
    return float(-_xlogx_sum(p.sum(1)) - _xlogx_sum(p.sum(0)) + _xlogx_sum(p))


def cmi_from_tensor(p: np.ndarray) -> float:
    """I(A:B|E) of a 3-D tensor p[a, b, e], as the p(e)-weighted sum of the
    per-symbol mutual informations.  Zero-probability symbols are skipped."""
    p = np.asarray(p, dtype=float)
    pe = p.sum(axis=(0, 1))
    total = 0.0
    for e in np.flatnonzero(pe > 0):
        total += pe[e] * mi_from_table(p[:, :, e] / pe[e])
    return float(total)


def _cmi_batch(q: np.ndarray) -> np.ndarray:
    """I(A:B|E') for a batch q[n, a, b, e'] via entropies."""
    return (
        -_xlogx_sum(q.sum(axis=2), axis=(1, 2))
        - _xlogx_sum(q.sum(axis=1), axis=(1, 2))
        + _xlogx_sum(q, axis=(1, 2, 3))
        + _xlogx_sum(q.sum(axis=(1, 2)), axis=1)
    )


def conditional_mutual_information(dist: JointDistribution, vars_a, vars_b, vars_e) -> float:
    vars_a, vars_b, vars_e = list(vars_a), list(vars_b), list(vars_e)
    _disjoint(vars_a, vars_b, vars_e)
    return cmi_from_tensor(dist.grouped(vars_a, vars_b, vars_e))


def total_variation(p: JointDistribution, q: JointDistribution):
    if p.alphabet_sizes != q.alphabet_sizes:
        raise ValueError("shape mismatch")
    if p.exact and q.exact:
        return sum(abs(a - b) for a, b in zip(p.probs.flat, q.probs.flat)) / 2
    return float(np.abs(to_float(p.probs) - to_float(q.probs)).sum() / 2)


@dataclass(frozen=True, eq=False)
class Channel:
    """Column-stochastic matrix ``matrix[out, in]``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        if not isinstance(m, np.ndarray) or m.dtype.kind in "biu":
            m = np.asarray(m)
            if m.dtype != object:
                m = m.astype(float)
            object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or 0 in m.shape:
            raise ValueError("channel matrix must be a nonempty 2-D array")
        if is_exact(m):
            if any(v < 0 for v in m.flat):
                raise ValueError("negative channel entry")
            if any(sum(m[:, j]) != 1 for j in range(m.shape[1])):
                raise ValueError("channel columns must sum to 1")
        else:
            if (m < -NORM_TOL).any() or np.abs(m.sum(axis=0) - 1).max() > NORM_TOL:
                raise ValueError("channel is not column stochastic")

    @property
    def input_size(self) -> int:
        return self.matrix.shape[1]

    @property
    def output_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def exact(self) -> bool:
        return is_exact(self.matrix)

    @classmethod
    def identity(cls, n: int, exact: bool = True) -> "Channel":
        return cls.deterministic(range(n), n, exact=exact)

    @classmethod
    def constant(cls, n_in: int, n_out: int = 1, target: int = 0, exact: bool = True) -> "Channel":
        return cls.deterministic([target] * n_in, n_out, exact=exact)

    @classmethod
    def deterministic(cls, mapping: Iterable[int], n_out: int, exact: bool = True) -> "Channel":
        mapping = list(mapping)
        if exact:
            m = np.full((n_out, len(mapping)), Fraction(0), dtype=object)
            one = Fraction(1)
        else:
            m = np.zeros((n_out, len(mapping)))
            one = 1.0
        for j, o in enumerate(mapping):
            m[o, j] = one
        return cls(m)

    def is_deterministic(self) -> bool:
        return all(sorted(self.matrix[:, j].tolist())[-1] == 1 for j in range(self.input_size))

    def compose(self, first: "Channel") -> "Channel":
        """The channel ``self ∘ first``."""
        if first.output_size != self.input_size:
            raise ValueError("size mismatch")
        if self.exact and first.exact:
            return Channel(np.dot(self.matrix, first.matrix))
        return Channel(to_float(self.matrix) @ to_float(first.matrix))

    def as_float(self) -> "Channel":
        return Channel(to_float(self.matrix))


def apply_channel(dist: JointDistribution, ch: Channel, var: int) -> JointDistribution:
    """Replace variable ``var`` by the channel output."""
    if not 0 <= var < dist.num_vars:
        raise IndexError("variable index out of range")
    if ch.input_size != dist.alphabet_sizes[var]:
        raise ValueError("channel input size does not match the variable's alphabet")
    if dist.exact and ch.exact:
        m, p = ch.matrix, dist.probs
    else:
        m, p = to_float(ch.matrix), to_float(dist.probs)
    out = np.tensordot(m, p, axes=([1], [var]))  # new axis first
    return JointDistribution(np.moveaxis(out, 0, var))


@dataclass
class IntrinsicResult:
    bits: float
    witness: Channel
    eprime_cap: int
    evaluated: int = 0
    meta: dict = field(default_factory=dict)


def _cmi_for_channel(p: np.ndarray, theta: np.ndarray) -> float:
    q = np.einsum("abe,fe->abf", p, theta)
    pe = q.sum(axis=(0, 1))
    v = np.concatenate([q.ravel(), pe, q.sum(axis=1).ravel(), q.sum(axis=0).ravel()])
    t = v * np.log2(np.where(v > 0, v, 1.0))
    n, m = q.size, pe.size
    return float(t[:n + m].sum() - t[n + m:].sum())


def _softmax_cols(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=0, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=0, keepdims=True)


def intrinsic_information_upper(
    dist: JointDistribution,
    vars_a=(0,),
    vars_b=(1,),
    vars_e=(2,),
    *,
    eprime_cap: int | None = None,
    restarts: int = 32,
    seed: int = 0,
    seed_channels: Sequence[Channel] = (),
    exhaustive_limit: int = 10**6,
    maxiter: int | None = None,
) -> IntrinsicResult:
    """Upper bound on the intrinsic information I(A:B↓E).

    Searches channels E -> E' and returns the smallest I(A:B|E') found with
    the minimizing channel.  The identity and the constant channel are always
    evaluated, so the result never exceeds min{I(A:B|E), I(A:B)}.  The
    search class is: every supplied seed channel, all deterministic channels
    with ``|E'| <= eprime_cap`` when there are at most ``exhaustive_limit`` of
    them, and ``restarts`` Nelder-Mead runs over stochastic matrices.
    """
    vars_a, vars_b, vars_e = list(vars_a), list(vars_b), list(vars_e)
    _disjoint(vars_a, vars_b, vars_e)
    p = dist.grouped(vars_a, vars_b, vars_e)
    n_e = p.shape[2]
    cap = n_e if eprime_cap is None else int(eprime_cap)
    if cap < 1:
        raise ValueError("eprime_cap must be >= 1")
    for ch in seed_channels:
        if ch.input_size != n_e:
            raise ValueError("seed channel input size does not match |E|")

    exact = dist.exact
    best_val = np.inf
    best: Channel | None = None
    evaluated = 0

    def consider(val: float, ch_factory):
        nonlocal best_val, best
        if val < best_val - 1e-15:
            best_val = val
            best = ch_factory()

    consider(cmi_from_tensor(p), lambda: Channel.identity(n_e, exact=exact))
    consider(mi_from_table(p.sum(axis=2)), lambda: Channel.constant(n_e, exact=exact))
    evaluated += 2
    for ch in seed_channels:
        consider(_cmi_for_channel(p, to_float(ch.matrix)), lambda ch=ch: ch)
        evaluated += 1

    n_det = cap**n_e
    if n_det <= exhaustive_limit:
        val, mapping = _best_deterministic(p, cap)
        evaluated += n_det
        consider(val, lambda: Channel.deterministic(mapping, cap, exact=exact))

    if restarts > 0 and best_val > 1e-12:
        rng = np.random.default_rng(seed)
        dim = cap * n_e
        iters = maxiter if maxiter is not None else 200 * dim

        def objective(z):
            return _cmi_for_channel(p, _softmax_cols(z.reshape(cap, n_e)))

        for r in range(restarts):
            z0 = rng.normal(scale=2.0, size=dim)
            if r == 0 and best is not None and best.output_size == cap:
                z0 = np.log(to_float(best.matrix) + 1e-3).ravel()
            res = minimize(objective, z0, method="Nelder-Mead",
                           options={"maxiter": iters, "xatol": 1e-9, "fatol": 1e-12})
            evaluated += int(res.nfev)
            theta = _softmax_cols(res.x.reshape(cap, n_e))
            consider(float(res.fun), lambda theta=theta: Channel(theta / theta.sum(axis=0)))

    assert best is not None
    return IntrinsicResult(max(best_val, 0.0), best, cap, evaluated)


def _best_deterministic(p: np.ndarray, cap: int, chunk: int = 20000):
    """Exhaustive minimum of I(A:B|f(E)) over functions f: E -> [cap]."""
    n_e = p.shape[2]
    best_val, best_map = np.inf, None
    it = itertools.product(range(cap), repeat=n_e)
    while True:
        maps = np.array(list(itertools.islice(it, chunk)), dtype=np.intp)
        if maps.size == 0:
            break
        onehot = np.zeros((len(maps), n_e, cap))
        np.put_along_axis(onehot, maps[:, :, None], 1.0, axis=2)
        q = np.einsum("abe,nef->nabf", p, onehot)
        vals = _cmi_batch(q)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_map = float(vals[k]), maps[k].tolist()
    return best_val, best_map
