"""Minimal ensembles, complete extensions and Eve's attacks on them.

A support S of vertices is a minimal ensemble of P exactly when S is affinely
independent and P lies in the relative interior of conv(S): affinely
dependent supports can always be shrunk along a dependence, and barycentric
coordinates are unique otherwise.  The enumeration below tests that condition
with integer hyperplane normals of every d-subset of vertices (d = affine
dimension of the vertex set):

* a (d+1)-set S qualifies iff for every facet F = S \\ {v} the device and v
  lie strictly on the same side of aff(F);
* smaller supports live on hyperplanes aff(T) through P; for every such
  d-set T the barycentric weights of P in T are read off the same normals
  and the positive ones form a minimal ensemble.

Everything is integer arithmetic, so the result is exact.
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .devices import Device, mixture
from .lp import row_reduce
from .numerics import Channel, JointDistribution, to_float

MAX_SUBSETS = 5_000_000
CHECKPOINT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted family of devices {p_i, P^i}; members share a shape."""

    weights: tuple
    members: tuple[Device, ...]
    labels: tuple = ()

    def __post_init__(self):
        if len(self.weights) != len(self.members):
            raise ValueError("one weight per member required")
        if not self.members:
            raise ValueError("empty ensemble")
        shape = self.members[0].shape
        if any(m.shape != shape for m in self.members):
            raise ValueError("ensemble members must share a shape")

    def __len__(self):
        return len(self.members)

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Fraction) for w in self.weights) and all(m.exact for m in self.members)

    def reconstruct(self) -> Device:
        return mixture(self.weights, self.members)


@dataclass(frozen=True, eq=False)
class MinimalEnsemble(Ensemble):
    support: tuple[int, ...] = ()


@dataclass(eq=False)
class CompleteExtension:
    parent: Device
    ensembles: list[MinimalEnsemble]
    meta: dict = field(default_factory=dict)

    @property
    def z_size(self) -> int:
        return len(self.ensembles)

    @property
    def e_alphabet(self) -> int:
        return max(len(e) for e in self.ensembles)

    def distribution(self, inputs: Sequence[int], z: int) -> JointDistribution:
        """p(e|z)·P^{e,z}(outputs|inputs) as a joint over (outputs..., E)."""
        return JointDistribution(self.tensor(inputs, exact=self.parent.exact)[z])

    def tensor(self, inputs: Sequence[int], exact: bool = False) -> np.ndarray:
        """Array q[z, outputs..., e], padded with zero-weight symbols."""
        inputs = tuple(inputs)
        out_shape = self.parent.output_sizes
        shape = (self.z_size,) + out_shape + (self.e_alphabet,)
        if exact:
            q = np.full(shape, Fraction(0), dtype=object)
        else:
            q = np.zeros(shape)
        for z, ens in enumerate(self.ensembles):
            for e, (w, m) in enumerate(zip(ens.weights, ens.members)):
                block = m.probs[inputs] * w if exact else to_float(m.probs[inputs]) * float(w)
                q[(z,) + (slice(None),) * len(out_shape) + (e,)] = block
        return q


class BudgetExceeded(RuntimeError):
    def __init__(self, found: list[MinimalEnsemble], checkpoint: dict):
        super().__init__(f"enumeration budget exhausted at index {checkpoint['next_index']}")
        self.found = found
        self.checkpoint = checkpoint


# --------------------------------------------------------------------------
# geometry of a vertex set


def _comb_table(n: int, k: int) -> np.ndarray:
    return np.array([[math.comb(i, j) for j in range(k + 2)] for i in range(n + 1)], dtype=np.int64)


def _lex_combinations(n: int, k: int) -> np.ndarray:
    total = math.comb(n, k)
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), k)),
                       dtype=np.int16, count=total * k)
    return flat.reshape(total, k)


def _colex_rank(c: np.ndarray, table: np.ndarray) -> np.ndarray:
    r = np.zeros(len(c), dtype=np.int64)
    for k in range(c.shape[1]):
        r += table[c[:, k], k + 1]
    return r


def _facet_ranks(S: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Colex rank of S minus its i-th element, for each i (S sorted rows)."""
    m = S.shape[1]
    keep = np.stack([table[S[:, k], k + 1] for k in range(m)], axis=1)   # element stays at k
    shift = np.stack([table[S[:, k], k] for k in range(m)], axis=1)      # element moves to k-1
    pre = np.concatenate([np.zeros((len(S), 1), np.int64), np.cumsum(keep, axis=1)], axis=1)
    suf = np.concatenate([np.cumsum(shift[:, ::-1], axis=1)[:, ::-1], np.zeros((len(S), 1), np.int64)], axis=1)
    return pre[:, :m] + suf[:, 1:]


def _integer_normals(M: np.ndarray) -> np.ndarray:
    """For each d x (d+1) integer matrix, the vector of signed maximal minors
    (a normal of the row space; zero iff rows are dependent)."""
    k, d, dp1 = M.shape
    out = np.zeros((k, dp1), dtype=np.int64)
    if k == 0:
        return out
    rng = np.random.default_rng(12345)
    r = rng.integers(1, 97, size=dp1).astype(float)
    K = np.concatenate([M.astype(float), np.broadcast_to(r, (k, 1, dp1))], axis=1)
    det = np.linalg.det(K)
    good = np.abs(det) > 0.5
    if good.any():
        e_last = np.zeros((int(good.sum()), dp1, 1))
        e_last[:, -1, 0] = 1.0
        col = np.linalg.solve(K[good], e_last)[:, :, 0]
        out[good] = np.round(det[good, None] * col).astype(np.int64)
    # rows left over are dependent (Gram determinant 0) or met an unlucky r
    rest = np.flatnonzero(~good)
    Mf = M[rest].astype(float)
    gram = np.linalg.det(np.einsum("kij,klj->kil", Mf, Mf))
    bad = rest[gram > 0.5]
    if len(bad):
        for j in range(dp1):
            sub = np.delete(M[bad], j, axis=2).astype(float)
            out[bad, j] = np.round(((-1) ** (d + j)) * np.linalg.det(sub)).astype(np.int64)
    # exact integer check; fall back to rational elimination where it fails
    resid = np.einsum("kij,kj->ki", M.astype(np.int64), out)
    for idx in np.flatnonzero(np.abs(resid).sum(axis=1) != 0):
        out[idx] = _exact_normal(M[idx])
    return out


def _exact_normal(rows: np.ndarray, dtype=np.int64) -> np.ndarray:
    R, piv = row_reduce(rows.tolist())
    n = rows.shape[1]
    if len(piv) < rows.shape[0]:
        return np.zeros(n, dtype=dtype)
    free = next(j for j in range(n) if j not in piv)
    v = [Fraction(0)] * n
    v[free] = Fraction(1)
    for i, j in enumerate(piv):
        v[j] = -R[i][free]
    lcm = math.lcm(*(f.denominator for f in v))
    return np.array([int(f * lcm) for f in v], dtype=dtype)


def _sign(a: np.ndarray) -> np.ndarray:
    if a.dtype == object:
        return ((a > 0).astype(np.int8) - (a < 0).astype(np.int8))
    return np.sign(a).astype(np.int8)


class VertexGeometry:
    """Integer affine coordinates of a vertex list plus hyperplane normals of
    all d-subsets and side data of all affinely independent (d+1)-subsets."""

    def __init__(self, vectors: np.ndarray):
        V = [[Fraction(v) for v in row] for row in vectors]
        self.n = len(V)
        diffs = [[a - b for a, b in zip(row, V[0])] for row in V[1:]]
        self.pivots = row_reduce(diffs)[1] if diffs and diffs[0] else []
        self.d = len(self.pivots)
        proj = [[row[j] for j in self.pivots] for row in V]
        self.scale = math.lcm(1, *(f.denominator for row in proj for f in row))
        rows = [[int(f * self.scale) for f in row] + [1] for row in proj]
        # Hadamard bound on every (d+1)-minor decides whether machine
        # integers and float determinants are safe
        norms = sorted((math.isqrt(sum(v * v for v in r)) + 1 for r in rows), reverse=True)
        self.big = math.prod(norms[:self.d + 1]) >= 2**50
        X = np.array(rows, dtype=object if self.big else np.int64)
        self.Xh = X
        n, d = self.n, self.d
        if d == 0:
            return
        if math.comb(n, d) > MAX_SUBSETS or math.comb(n, d + 1) > MAX_SUBSETS:
            raise ValueError("vertex set too large for exhaustive support enumeration")
        self.table = _comb_table(n, d + 1)
        T = _lex_combinations(n, d)
        normals = np.zeros((len(T), d + 1), dtype=X.dtype)
        for lo in range(0, len(T), 100_000):
            chunk = T[lo:lo + 100_000].astype(np.intp)
            if self.big:
                normals[lo:lo + 100_000] = [_exact_normal(X[c], object) for c in chunk]
            else:
                normals[lo:lo + 100_000] = _integer_normals(X[chunk])
        ranks = _colex_rank(T.astype(np.int64), self.table)
        self.normals = np.empty_like(normals)
        self.normals[ranks] = normals
        self.d_subsets = np.empty_like(T)
        self.d_subsets[ranks] = T
        self.nonzero = np.abs(self.normals).sum(axis=1) != 0
        self.normal_bound = int(np.abs(self.normals).max()) if len(normals) else 0

        self._lower_completions()

        S = _lex_combinations(n, d + 1)
        self.num_sets = len(S)
        idx_parts, rank_parts, sign_parts = [], [], []
        for lo in range(0, len(S), 200_000):
            chunk = S[lo:lo + 200_000].astype(np.int64)
            fr = _facet_ranks(chunk, self.table)
            side = np.einsum("kij,kij->ki", self.normals[fr], X[chunk])
            indep = side[:, 0] != 0
            idx_parts.append(np.flatnonzero(indep) + lo)
            rank_parts.append(fr[indep].astype(np.int32))
            sign_parts.append(_sign(side[indep]))
        self.indep_index = np.concatenate(idx_parts)
        self.indep_ranks = np.concatenate(rank_parts)
        self.indep_sign = np.concatenate(sign_parts)
        self._S = S

    def _lower_completions(self) -> None:
        """For each d-set T spanning a hyperplane, complete it by a vertex u
        off that hyperplane; store the facet ranks of T ∪ {u} and the side
        signs of its vertices, so barycentric signs of any point on aff(T)
        are a gather away."""
        X, d = self.Xh, self.d
        T_idx = np.flatnonzero(self.nonzero)
        S_parts, r_parts, s_parts, m_parts = [], [], [], []
        for lo in range(0, len(T_idx), 100_000):
            ti = T_idx[lo:lo + 100_000]
            T = self.d_subsets[ti].astype(np.int64)
            off = self.normals[ti] @ X.T
            u = np.argmax(np.abs(off), axis=1)
            S = np.sort(np.concatenate([T, u[:, None]], axis=1), axis=1)
            fr = _facet_ranks(S, self.table)
            side = np.einsum("kij,kij->ki", self.normals[fr], X[S])
            S_parts.append(S.astype(np.int16))
            r_parts.append(fr.astype(np.int32))
            s_parts.append(_sign(side))
            m_parts.append(S != u[:, None])
        self.low_T = T_idx
        self.low_S = np.concatenate(S_parts)
        self.low_ranks = np.concatenate(r_parts)
        self.low_sign = np.concatenate(s_parts)
        self.low_mask = np.concatenate(m_parts)

    @property
    def candidates(self) -> int:
        """Number of affinely independent (d+1)-subsets."""
        return int(len(self.indep_index)) if self.d else self.n

    def homogeneous(self, vec) -> tuple[np.ndarray, int]:
        """Integer homogeneous coordinates of a rational point and the common
        denominator D, so that P̂ = D · (scale·proj(P), 1)."""
        proj = [Fraction(vec[j]) * self.scale for j in self.pivots]
        D = math.lcm(1, *(f.denominator for f in proj))
        vals = [int(f * D) for f in proj] + [D]
        bound = max(abs(v) for v in vals) * max(self.normal_bound, 1) * (self.d + 1)
        dtype = np.int64 if bound < 2**62 and not self.big else object
        return np.array(vals, dtype=dtype), D

    def side_values(self, P: np.ndarray) -> np.ndarray:
        if P.dtype == object:
            return np.dot(self.normals.astype(object), P)
        return self.normals @ P


_GEOMETRY_CACHE: dict[bytes, VertexGeometry] = {}


def vertex_geometry(vectors) -> VertexGeometry:
    key = hashlib.sha256(repr([[str(Fraction(v)) for v in row] for row in vectors]).encode()).digest()
    geo = _GEOMETRY_CACHE.get(key)
    if geo is None:
        geo = VertexGeometry(vectors)
        if len(_GEOMETRY_CACHE) > 4:
            _GEOMETRY_CACHE.clear()
        _GEOMETRY_CACHE[key] = geo
    return geo


# --------------------------------------------------------------------------
# enumeration


def _vertex_list(vertices):
    if vertices is None:
        from .polytope import vertices as default_vertices
        vertices = default_vertices()
    if hasattr(vertices, "labels") and hasattr(vertices, "vertices"):
        return list(vertices.vertices), list(vertices.labels)
    vs = list(vertices)
    return vs, [f"V{i}" for i in range(len(vs))]


def device_fingerprint(device: Device, labels: Sequence[str]) -> str:
    h = hashlib.sha256()
    h.update(repr((device.input_sizes, device.output_sizes)).encode())
    h.update(",".join(str(Fraction(v)) for v in device.probs.flat).encode())
    h.update("|".join(labels).encode())
    return h.hexdigest()


def _lower_supports(geo: VertexGeometry, P: np.ndarray) -> list[tuple[tuple[int, ...], list[tuple[int, int]]]]:
    """Supports of size <= d; each with the integer pairs (s, side) giving
    w_j = s / (D·side)."""
    s = geo.side_values(P)
    sel = np.flatnonzero(s[geo.low_T] == 0)
    if len(sel) == 0:
        return []
    fr = geo.low_ranks[sel]
    sf = s[fr]
    prod = _sign(sf) * geo.low_sign[sel]
    mask = geo.low_mask[sel]
    ok = ((prod >= 0) | ~mask).all(axis=1)
    member = mask & (sf != 0)
    S = geo.low_S[sel]
    rows = np.flatnonzero(ok)
    if geo.n <= 62:
        bits = np.where(member, np.left_shift(np.int64(1), S.astype(np.int64)), 0).sum(axis=1)
        _, first = np.unique(bits[rows], return_index=True)
    else:
        _, first = np.unique(np.where(member, S, -1)[rows], axis=0, return_index=True)
    out = {}
    for k in rows[np.sort(first)]:
        cols = np.flatnonzero(member[k])
        sup = tuple(int(S[k, i]) for i in cols)
        out[sup] = [(int(sf[k, i]), int(geo.normals[fr[k, i]] @ geo.Xh[S[k, i]])) for i in cols]
    return list(out.items())


def _full_supports(geo: VertexGeometry, P: np.ndarray, start: int, stop: int):
    s = geo.side_values(P)
    sgn = _sign(s)
    lo, hi = np.searchsorted(geo.indep_index, [start, stop])
    ranks = geo.indep_ranks[lo:hi]
    ok = (sgn[ranks] == geo.indep_sign[lo:hi]).all(axis=1)
    out = []
    for k in np.flatnonzero(ok) + lo:
        S = geo._S[geo.indep_index[k]].astype(np.int64)
        fr = geo.indep_ranks[k]
        side = [int(geo.normals[fr[i]] @ geo.Xh[S[i]]) for i in range(len(S))]
        out.append((tuple(int(v) for v in S), [(int(s[fr[i]]), side[i]) for i in range(len(S))]))
    return out


def _make_minimal(support, weights, vs, labels) -> MinimalEnsemble:
    order = sorted(range(len(support)), key=lambda i: labels[support[i]])
    sup = tuple(support[i] for i in order)
    return MinimalEnsemble(tuple(weights[i] for i in order), tuple(vs[j] for j in sup),
                           tuple(labels[j] for j in sup), support=sup)


def _verify(ens: MinimalEnsemble, target: list[Fraction], vint: np.ndarray) -> bool:
    """Exact reconstruction check in integers: Σ (L w_i) V_i == L · target,
    where ``vint`` holds the scaled vertex vectors and ``target`` the scaled
    device vector."""
    if any(w <= 0 for w in ens.weights) or sum(ens.weights) != 1:
        return False
    L = math.lcm(*(w.denominator for w in ens.weights))
    nums = np.array([int(w * L) for w in ens.weights], dtype=object)
    acc = nums @ vint[list(ens.support)]
    return all(a == t * L for a, t in zip(acc, target))


def enumerate_minimal_ensembles(device: Device, vertices=None, *, budget: int | None = None,
                                resume: dict | None = None, info: dict | None = None) -> list[MinimalEnsemble]:
    """All minimal ensembles of ``device`` over the given vertices.

    ``budget`` caps the number of (d+1)-subsets scanned in this call (in
    lexicographic order); when it runs out :class:`BudgetExceeded` is raised
    carrying the partial result and a checkpoint accepted by ``resume``.
    Ensembles are sorted by their support labels.  ``info``, when given, is
    filled with the candidate count and scan statistics.
    """
    if not device.exact:
        raise ValueError("minimal-ensemble enumeration requires an exact (rational) device")
    vs, labels = _vertex_list(vertices)
    if not vs:
        raise ValueError("empty vertex list")
    if any(v.shape != device.shape for v in vs):
        raise ValueError("vertices and device differ in shape")
    if any(not v.exact for v in vs):
        raise ValueError("vertices must be exact")
    if vertices is None and resume is None:
        # a polytope vertex is extreme, so the singleton is its only ensemble
        for i, v in enumerate(vs):
            if v.equals(device):
                if info is not None:
                    info.update(extremal=True)
                return [_make_minimal((i,), [Fraction(1)], vs, labels)]
    vectors = [v.vector() for v in vs]
    geo = vertex_geometry(vectors)
    fp = device_fingerprint(device, labels)
    found: dict[tuple[int, ...], list] = {}

    if geo.d == 0:
        for i, v in enumerate(vs):
            if v.equals(device):
                found[(i,)] = [Fraction(1)]
                break
        next_index, total = 0, 0
    else:
        P, D = geo.homogeneous(device.vector())
        total = geo.num_sets
        next_index, lower_done = 0, False
        if resume is not None:
            if resume.get("version") != CHECKPOINT_VERSION or resume.get("device_hash") != fp:
                raise ValueError("checkpoint does not belong to this device and vertex list")
            next_index = int(resume["next_index"])
            lower_done = bool(resume["lower_done"])
            for item in resume["found"]:
                pairs = sorted(zip(item["support"], item["weights"]))
                found[tuple(j for j, _ in pairs)] = [Fraction(w) for _, w in pairs]
        if not lower_done:
            for sup, pairs in _lower_supports(geo, P):
                found[sup] = [Fraction(sv, D * sd) for sv, sd in pairs]
        stop = total if budget is None else min(total, next_index + int(budget))
        for sup, pairs in _full_supports(geo, P, next_index, stop):
            found[sup] = [Fraction(sv, D * sd) for sv, sd in pairs]
        next_index = stop

    ensembles = [_make_minimal(sup, w, vs, labels) for sup, w in found.items()]
    vscale = math.lcm(1, *(Fraction(x).denominator for v in vectors for x in v))
    vint = np.array([[int(Fraction(x) * vscale) for x in v] for v in vectors], dtype=object)
    target = [Fraction(x) * vscale for x in device.vector()]
    for ens in ensembles:
        if not _verify(ens, target, vint):
            raise ValueError("device is not in the convex hull of the vertices")
    ensembles.sort(key=lambda e: e.labels)
    if info is not None:
        info.update(candidates=geo.candidates, scanned=next_index, total=total,
                    affine_dimension=geo.d)
    if geo.d and next_index < total:
        checkpoint = {
            "version": CHECKPOINT_VERSION,
            "next_index": next_index,
            "found": [{"support": list(e.support), "weights": [str(w) for w in e.weights]}
                      for e in ensembles],
            "lower_done": True,
            "device_hash": fp,
        }
        raise BudgetExceeded(ensembles, checkpoint)
    if not ensembles:
        raise ValueError("device is not in the convex hull of the vertices")
    return ensembles


def build_complete_extension(device: Device, vertices=None, **kwargs) -> CompleteExtension:
    info: dict = {}
    ens = enumerate_minimal_ensembles(device, vertices, info=info, **kwargs)
    return CompleteExtension(device, ens, info)


def is_minimal(ens: Ensemble, device: Device) -> bool:
    """No proper subset of the members reconstructs the device (checked by LP)."""
    from .lp import convex_combination_on_support

    vecs = [m.vector() for m in ens.members]
    if len(vecs) == 1:
        return ens.members[0].equals(device)
    target = device.vector()
    for k in range(len(vecs)):
        sub = vecs[:k] + vecs[k + 1:]
        if convex_combination_on_support(target, sub) is not None:
            return False
    return True


def eve_attack(ce: CompleteExtension, dice: Channel, post: Channel, z_prime: int = 0) -> Ensemble:
    """Ensemble seen by Eve after choosing input z' of the dice (z drawn from
    column z' of ``dice``) and processing E through ``post``."""
    if dice.output_size != ce.z_size:
        raise ValueError("dice output size must equal |Z|")
    if post.input_size != ce.e_alphabet:
        raise ValueError("post-processing input size must equal |E|")
    if not 0 <= z_prime < dice.input_size:
        raise IndexError("dice input out of range")
    exact = ce.parent.exact and dice.exact and post.exact
    pz = dice.matrix[:, z_prime]
    th = post.matrix
    zero = Fraction(0) if exact else 0.0
    wts, comps = [], []
    for ep in range(post.output_size):
        weights, members = [], []
        for z, ens in enumerate(ce.ensembles):
            if pz[z] == 0:
                continue
            for e, (w, m) in enumerate(zip(ens.weights, ens.members)):
                c = pz[z] * w * th[ep, e] if exact else float(pz[z]) * float(w) * float(th[ep, e])
                if c != 0:
                    weights.append(c)
                    members.append(m)
        total = sum(weights, zero)
        if total == 0:
            continue
        comps.append(mixture([w / total for w in weights], members))
        wts.append(total)
        # remember the output symbol
    labels = tuple(ep for ep in range(post.output_size)
                   if any(pz[z] != 0 and th[ep, e] != 0
                          for z, ens in enumerate(ce.ensembles) for e in range(len(ens))))
    return Ensemble(tuple(wts), tuple(comps), labels)


def reorder_channel(ch: Channel, from_labels: Sequence[str], to_labels: Sequence[str],
                    pad_to: int | None = None) -> Channel:
    """Permute the input columns of a channel given for ``from_labels`` so it
    acts on an ensemble listed as ``to_labels``; extra padded inputs map to
    output 0."""
    if sorted(from_labels) != sorted(to_labels):
        raise ValueError("label sets differ")
    n = pad_to or len(to_labels)
    exact = ch.exact
    m = np.full((ch.output_size, n), Fraction(0) if exact else 0.0, dtype=object if exact else float)
    for j, lab in enumerate(to_labels):
        m[:, j] = ch.matrix[:, list(from_labels).index(lab)]
    for j in range(len(to_labels), n):
        m[0, j] = Fraction(1) if exact else 1.0
    return Channel(m)


def ensembles_to_json(ce: CompleteExtension) -> list[dict]:
    return [{"z": z, "weights": [str(w) for w in e.weights], "support": list(e.labels)}
            for z, e in enumerate(ce.ensembles)]


def checkpoint_dumps(cp: dict) -> str:
    return json.dumps(cp, indent=1)
