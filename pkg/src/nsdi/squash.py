"""Squashed secrecy quantifiers and the bound pipeline.

For a bipartite device the honest parties fix inputs (x, y) first; Eve then
picks a measurement z on the complete extension and a channel on its output.
All quantities below are upper bounds on the device-independent key:

* ``I_AB``            max_{x,y} I(A:B)
* ``I_ABgE_direct``   max_{x,y} min_z I(A:B|E)
* ``I_ABgE_channel``  same with a fixed family of channels per z
* ``N_C``             non-locality cost
* ``nsq_upper``       the channel value further minimized by search
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import lp
from .devices import Device, make_hrw, make_isotropic, hrw_row_params
from .ensembles import CompleteExtension, build_complete_extension, eve_attack
from .numerics import (Channel, _cmi_batch, cmi_from_tensor, intrinsic_information_upper,
                       JointDistribution, mi_from_table, to_float)

# support of the nine-vertex minimal ensemble shared by the HRW family
NINE_SUPPORT = ("B000", "L0000", "L0010", "L0101", "L0111", "L1000", "L1101", "L1011", "L1110")
_MERGE_MAPS = {
    (0, 0): (0, 1, 2, 3, 4, 5, 6, 0, 0),
    (0, 1): (0, 1, 2, 3, 4, 0, 0, 5, 6),
    (1, 0): (0, 1, 0, 2, 0, 3, 4, 5, 6),
    (1, 1): (0, 0, 1, 0, 2, 3, 4, 5, 6),
}
QUANTIFIERS = ("I_AB", "I_ABgE_direct", "I_ABgE_channel", "N_C", "nsq_upper")
ZERO_TOL = 1e-12


def hrw_merge_channel(x: int, y: int) -> Channel:
    """7 x 9 deterministic post-processing for inputs (x, y), acting on the
    members listed in ``NINE_SUPPORT`` order."""
    if (x, y) not in _MERGE_MAPS:
        raise ValueError("inputs must be bits")
    return Channel.deterministic(_MERGE_MAPS[(x, y)], 7, exact=True)


def _bipartite(device: Device) -> None:
    if device.parties != 2:
        raise ValueError("a bipartite device is required")


def _split_table(device: Device, inputs, split):
    """Measured table p(a, b) with Alice holding ``split[0]`` parties."""
    alice, bob = split
    t = to_float(device.probs[tuple(inputs)])
    t = np.transpose(t, list(alice) + list(bob))
    na = int(np.prod([device.output_sizes[i] for i in alice]))
    return t.reshape(na, -1)


@dataclass(frozen=True)
class MIResult:
    bits: float
    inputs: tuple


def squashed_mutual_information(device: Device, split=None) -> MIResult:
    """max over direct measurements of I(A:B).  ``split`` assigns parties to
    Alice and Bob (default: party 0 vs party 1)."""
    if split is None:
        _bipartite(device)
        split = ((0,), (1,))
    best = MIResult(-1.0, ())
    for inputs in itertools.product(*(range(n) for n in device.input_sizes)):
        v = mi_from_table(_split_table(device, inputs, split))
        if v > best.bits + 1e-15:
            best = MIResult(v, inputs)
    return MIResult(max(best.bits, 0.0), best.inputs)


@dataclass(frozen=True)
class CmiResult:
    bits: float
    per_inputs: dict  # inputs -> (value, z)


def squashed_cmi_over_ce(device: Device, ce: CompleteExtension | None = None) -> CmiResult:
    """max_{x,y} min_z I(A:B|E) over the direct measurements of the CE."""
    _bipartite(device)
    if ce is None:
        ce = build_complete_extension(device)
    elif ce.parent is not device and not ce.parent.equals(device, tol=1e-12):
        raise ValueError("complete extension does not belong to this device")
    per = {}
    for xy in itertools.product(*(range(n) for n in device.input_sizes)):
        vals = _cmi_batch(ce.tensor(xy))
        z = int(np.argmin(vals))
        per[xy] = (max(float(vals[z]), 0.0), z)
    bits = max(v for v, _ in per.values())
    return CmiResult(bits, per)


# --------------------------------------------------------------------------
# channels on a single ensemble


def _member_tables(ens, xy) -> list[np.ndarray]:
    return [m.probs[xy] for m in ens.members]


def _is_product(t, exact: bool) -> bool:
    ra, cb = t.sum(axis=1), t.sum(axis=0)
    if exact:
        return all(t[a, b] == ra[a] * cb[b] for a in range(t.shape[0]) for b in range(t.shape[1]))
    return bool(np.abs(to_float(t) - np.outer(to_float(ra), to_float(cb))).max() <= 1e-10)


def _ensemble_tensor(ens, xy) -> np.ndarray:
    """Float tensor p[a, b, e] for one minimal ensemble."""
    return np.stack([to_float(m.probs[xy]) * float(w) for w, m in zip(ens.weights, ens.members)], axis=2)


def bucket_channel(ens, xy, exact: bool = False) -> tuple[Channel, float] | None:
    """Channel sending a fraction t_e of each member to a shared symbol whose
    accumulated table is uniform (hence product), the rest kept apart.

    Float mode maximizes the mass of correlation moved to the bucket.  Exact
    mode moves every non-product member entirely and only asks for
    feasibility; ``None`` is returned when that is impossible.
    """
    tables = _member_tables(ens, xy)
    k = len(tables)
    na, nb = tables[0].shape
    cells = [(a, b) for a in range(na) for b in range(nb)]
    if exact:
        w = [Fraction(v) for v in ens.weights]
        prod = [_is_product(t, True) for t in tables]
        A_eq = [[w[e] * (tables[e][a, b] - tables[e][0, 0]) for e in range(k)] for a, b in cells[1:]]
        bounds = [(0, 1) if prod[e] else (1, 1) for e in range(k)]
        sol = lp.solve(lp.LinearProgram([0] * k, A_eq, [0] * len(A_eq), bounds=bounds, exact=True))
        if not sol.optimal:
            return None
        t = list(sol.x)
        value = 0.0
    else:
        w = [float(v) for v in ens.weights]
        ft = [to_float(t) for t in tables]
        info = [mi_from_table(t) for t in ft]
        A_eq = [[w[e] * (ft[e][a, b] - ft[e][0, 0]) for e in range(k)] for a, b in cells[1:]]
        c = [w[e] * info[e] for e in range(k)]
        sol = lp.solve(lp.LinearProgram(c, A_eq, [0.0] * len(A_eq), bounds=[(0.0, 1.0)] * k,
                                        maximize=True, exact=False))
        if not sol.optimal:
            return None
        t = [min(max(float(v), 0.0), 1.0) for v in sol.x]
        value = max(sum(w[e] * info[e] * (1 - t[e]) for e in range(k)), 0.0)
    one = Fraction(1) if exact else 1.0
    m = np.full((k + 1, k), Fraction(0) if exact else 0.0, dtype=object if exact else float)
    for e in range(k):
        m[e, e] = one - t[e]
        m[k, e] = t[e]
    return Channel(m), value


def _padded(ch: Channel, n_in: int) -> Channel:
    """Extend a channel to ``n_in`` inputs; extra (zero-weight) inputs go to output 0."""
    if ch.input_size == n_in:
        return ch
    exact = ch.exact
    m = np.full((ch.output_size, n_in), Fraction(0) if exact else 0.0, dtype=object if exact else float)
    m[:, :ch.input_size] = ch.matrix
    m[0, ch.input_size:] = Fraction(1) if exact else 1.0
    return Channel(m)


def _merge_channel_for(ens, xy) -> Channel | None:
    if tuple(sorted(ens.labels)) != tuple(sorted(NINE_SUPPORT)) or xy not in _MERGE_MAPS:
        return None
    ch = hrw_merge_channel(*xy)
    cols = [NINE_SUPPORT.index(l) for l in ens.labels]
    return Channel(ch.matrix[:, cols])


def _merge_identical(p: np.ndarray, exact_tables=None):
    """Merge E symbols whose conditional tables coincide.  Returns the
    reduced tensor and the exact merging channel."""
    n_e = p.shape[2]
    keys, mapping = {}, []
    for e in range(n_e):
        pe = p[:, :, e].sum()
        key = tuple(np.round(p[:, :, e].ravel() / pe, 12)) if pe > 0 else ("null",)
        if exact_tables is not None:
            key = tuple(exact_tables[e].ravel())
        mapping.append(keys.setdefault(key, len(keys)))
    M = Channel.deterministic(mapping, len(keys), exact=True)
    return np.einsum("abe,fe->abf", p, to_float(M.matrix)), M


def _lift_seed(theta: Channel, M: Channel, p: np.ndarray) -> Channel:
    """Channel on merged symbols equivalent to ``theta`` on the original ones."""
    pe = p.sum(axis=(0, 1))
    Mf = to_float(M.matrix)
    pm = Mf @ pe
    T = to_float(theta.matrix) * pe[None, :]
    out = T @ Mf.T
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(pm[None, :] > 0, out / np.where(pm > 0, pm, 1)[None, :], 0.0)
    out[0, pm == 0] = 1.0
    return Channel(out / out.sum(axis=0, keepdims=True))


# --------------------------------------------------------------------------
# the bound


@dataclass
class Strategy:
    inputs: tuple
    z: int | None
    channel: Channel
    value: float
    source: str
    dice: Channel | None = None
    certified: bool = False


@dataclass
class SquashedBound:
    values: dict
    strategies: dict = field(default_factory=dict)   # inputs -> Strategy
    certified_zero: bool = False
    meta: dict = field(default_factory=dict)

    def __getattr__(self, name):
        if name in QUANTIFIERS:
            return self.values[name]
        raise AttributeError(name)


@dataclass
class BoundOptions:
    restarts: int = 1
    seed: int = 0
    top_k: int = 3
    bucket_k: int = 16
    eprime_cap: int | None = None
    dice_mix: bool = False
    exhaustive_limit: int = 10**5
    maxiter: int | None = 1500


def _certify(ce: CompleteExtension, z: int, ch: Channel, xy) -> bool:
    """Exact check that Eve's processed ensemble at (x, y) has only product members."""
    if not (ce.parent.exact and ch.exact):
        return False
    dice = Channel.deterministic([z], ce.z_size, exact=True)
    ens = eve_attack(ce, dice, _padded(ch, ce.e_alphabet))
    return all(_is_product(m.probs[xy], True) for m in ens.members)


def _channel_stage(ce: CompleteExtension, xy, opts: BoundOptions) -> dict:
    """Identity, constant, merge and bucket channels for every relevant z."""
    q = ce.tensor(xy)                                   # [z, a, b, e]
    direct = _cmi_batch(q)
    i_ab = max(mi_from_table(q[0].sum(axis=2)), 0.0)
    cands = []  # (value, z, channel, source)
    z_dir = int(np.argmin(direct))
    cands.append((max(float(direct[z_dir]), 0.0), z_dir,
                  Channel.identity(len(ce.ensembles[z_dir]), exact=True), "identity"))
    cands.append((i_ab, 0, Channel.constant(len(ce.ensembles[0]), exact=True), "constant"))

    order = [int(z) for z in np.argsort(direct, kind="stable")]
    merge_z = [z for z, e in enumerate(ce.ensembles) if _merge_channel_for(e, xy) is not None]
    for z in merge_z:
        ens = ce.ensembles[z]
        ch = _merge_channel_for(ens, xy)
        v = cmi_from_tensor(np.einsum("abe,fe->abf", _ensemble_tensor(ens, xy), to_float(ch.matrix)))
        cands.append((max(v, 0.0), z, ch, "merge"))
    for z in dict.fromkeys(order[:opts.bucket_k] + merge_z):
        res = bucket_channel(ce.ensembles[z], xy)
        if res is not None:
            cands.append((res[1], z, res[0], "bucket"))
    best = min(cands, key=lambda c: c[0])
    return {"xy": xy, "I_AB": i_ab, "direct": (max(float(direct[z_dir]), 0.0), z_dir),
            "cands": cands, "best": best, "order": order, "merge_z": merge_z}


def _refine_stage(ce: CompleteExtension, st: dict, opts: BoundOptions, user=()) -> tuple:
    """Intrinsic-information search on the most promising z, user strategies
    and (optionally) two-z dice mixtures.  Returns the best (value, z,
    channel, source) and whether a dice mixture improved on direct z."""
    xy, exact = st["xy"], ce.parent.exact
    best = st["best"]
    per_z: dict[int, tuple] = {}
    for c in st["cands"]:
        if c[3] != "constant" and (c[1] not in per_z or c[0] < per_z[c[1]][0]):
            per_z[c[1]] = c
    ranked = sorted(per_z.values(), key=lambda c: c[0])
    for k, (_, z, ch0, _) in enumerate(ranked[:opts.top_k]):
        ens = ce.ensembles[z]
        p = _ensemble_tensor(ens, xy)
        pm, M = _merge_identical(p, [m.probs[xy] for m in ens.members] if exact else None)
        res = intrinsic_information_upper(
            JointDistribution(pm), eprime_cap=opts.eprime_cap, restarts=opts.restarts,
            seed=opts.seed + 7919 * k, seed_channels=[_lift_seed(ch0, M, p)],
            exhaustive_limit=opts.exhaustive_limit, maxiter=opts.maxiter)
        if res.bits < best[0] - 1e-15:
            best = (res.bits, z, res.witness.compose(M), "search")

    for dice, ch in user:
        ens = eve_attack(ce, dice, _padded(ch, ce.e_alphabet))
        t = np.stack([to_float(m.probs[xy]) * float(w) for w, m in zip(ens.weights, ens.members)], axis=2)
        res = intrinsic_information_upper(JointDistribution(t), restarts=opts.restarts, seed=opts.seed,
                                          exhaustive_limit=opts.exhaustive_limit, maxiter=opts.maxiter)
        if res.bits < best[0] - 1e-15:
            best = (res.bits, None, res.witness, "user")

    dice_improved = False
    if opts.dice_mix and len(ranked) >= 2:
        z1, z2 = ranked[0][1], ranked[1][1]
        t = np.concatenate([0.5 * _ensemble_tensor(ce.ensembles[z1], xy),
                            0.5 * _ensemble_tensor(ce.ensembles[z2], xy)], axis=2)
        pm, _ = _merge_identical(t)
        res = intrinsic_information_upper(JointDistribution(pm), restarts=opts.restarts, seed=opts.seed,
                                          exhaustive_limit=opts.exhaustive_limit, maxiter=opts.maxiter)
        if res.bits < best[0] - 1e-12:
            dice_improved = True
            best = (res.bits, None, res.witness, "dice")
    return best, dice_improved


def _witness(ce: CompleteExtension, st: dict, extra: tuple, opts: BoundOptions) -> Strategy | None:
    """An exact Eve strategy at these inputs leaving only product members."""
    xy = st["xy"]
    for v, z, ch, src in st["cands"] + [extra]:
        if v <= 1e-9 and z is not None and _certify(ce, z, ch, xy):
            return Strategy(xy, z, ch, 0.0, src, certified=True)
    for z in dict.fromkeys(st["merge_z"] + st["order"][:opts.bucket_k]):
        res = bucket_channel(ce.ensembles[z], xy, exact=True)
        if res is not None and _certify(ce, z, res[0], xy):
            return Strategy(xy, z, res[0], 0.0, "bucket", certified=True)
    return None


def nsq_upper(device: Device, ce: CompleteExtension | None = None, strategies: dict | None = None,
              opts: BoundOptions | None = None, nonlocality: object = None) -> SquashedBound:
    """All quantifiers for one bipartite device plus the searched upper
    bound on the squashed non-locality.

    ``strategies`` maps inputs (x, y) to a list of (dice, channel) pairs
    tried in addition to the built-in seeds.  The bound is certified zero when
    every (x, y) has an exact Eve strategy leaving only product members.
    """
    from .polytope import nonlocality_cost

    _bipartite(device)
    opts = opts or BoundOptions()
    if ce is None:
        ce = build_complete_extension(device)
    strategies = strategies or {}
    for key, items in strategies.items():
        for dice, ch in items:
            if dice.output_size != ce.z_size or ch.input_size not in (ce.e_alphabet,):
                raise ValueError(f"strategy for inputs {key} does not fit the complete extension")

    stages = [_channel_stage(ce, xy, opts)
              for xy in itertools.product(*(range(n) for n in device.input_sizes))]
    # refine inputs in decreasing order of their channel value; an input whose
    # value is already below the running maximum cannot change the bound
    refined: dict = {}
    running = -1.0
    dice_improved = False
    for st in sorted(stages, key=lambda s: -s["best"][0]):
        user = strategies.get(st["xy"], ())
        if (st["best"][0] > running + 1e-9 and st["best"][0] > ZERO_TOL) or user:
            res, imp = _refine_stage(ce, st, opts, user)
            dice_improved |= imp
        else:
            res = st["best"]
        refined[st["xy"]] = res
        running = max(running, res[0])

    i_ab = max(st["I_AB"] for st in stages)
    direct = max(st["direct"][0] for st in stages)
    channel = max(st["best"][0] for st in stages)
    upper = min(max(r[0] for r in refined.values()), i_ab, channel)
    witnesses = {}
    if device.exact and upper <= 1e-9:
        for st in stages:
            w = _witness(ce, st, refined[st["xy"]], opts)
            if w is None:
                break
            witnesses[st["xy"]] = w
    certified = len(witnesses) == len(stages)
    if certified:
        upper = 0.0

    if nonlocality is None:
        if device.shape == ((2, 2), (2, 2)):
            nonlocality = float(nonlocality_cost(device))
        else:
            nonlocality = float("nan")
    values = {"I_AB": i_ab, "I_ABgE_direct": direct, "I_ABgE_channel": channel,
              "N_C": float(nonlocality), "nsq_upper": upper}
    chosen = witnesses if certified else {
        xy: Strategy(xy, r[1], r[2], r[0], r[3]) for xy, r in refined.items()}
    meta = {
        "z_size": ce.z_size,
        "e_alphabet": ce.e_alphabet,
        "direct_z": {f"{st['xy']}": st["direct"][1] for st in stages},
        "eprime_cap": opts.eprime_cap if opts.eprime_cap is not None else "|E| after merging",
        "restarts": opts.restarts,
        "seed": opts.seed,
        "dice_improvement": dice_improved,
    }
    return SquashedBound(values, chosen, certified, meta)


# --------------------------------------------------------------------------
# curves


@dataclass
class BoundCurve:
    param: str
    grid: list
    series: dict
    lch: np.ndarray | None = None
    certified: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _lower_hull(xs: np.ndarray, ys: np.ndarray) -> list[int]:
    """Andrew's monotone chain, lower part, on points sorted by x."""
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (xs[a] - xs[o]) * (ys[i] - ys[o]) - (ys[a] - ys[o]) * (xs[i] - xs[o])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def lower_convex_hull(curve: BoundCurve, names: Sequence[str] | None = None) -> BoundCurve:
    """Fill ``curve.lch`` with the convexified pointwise minimum of the series."""
    names = list(names) if names is not None else list(curve.series)
    if len(curve.grid) < 1:
        raise ValueError("empty grid")
    x = np.array([float(g) for g in curve.grid])
    Y = np.array([np.asarray(curve.series[n], dtype=float) for n in names])
    if np.isnan(Y).any() or np.isnan(x).any():
        raise ValueError("NaN in bound series")
    env = Y.min(axis=0)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], env[order]
    if len(xs) == 1:
        curve.lch = env.copy()
        return curve
    hull = _lower_hull(xs, ys)
    lch = np.interp(x, xs[hull], ys[hull])
    curve.lch = np.minimum(lch, env)
    return curve


def family_device(family: str, value) -> Device:
    if family == "iso":
        return make_isotropic(value)
    if family.startswith("hrw-") and family[4:] in ("a", "b", "c", "d"):
        return make_hrw(hrw_row_params(family[4:], value))
    raise ValueError(f"unknown family {family!r}")


def _point(args):
    family, value, opts = args
    dev = family_device(family, value)
    b = nsq_upper(dev, opts=opts)
    return b.values, b.certified_zero, b.meta


def threads_from_env() -> int:
    try:
        return max(1, int(os.environ.get("NSDI_THREADS", "1")))
    except ValueError:
        return 1


def compute_curve(family: str, grid: Sequence, opts: BoundOptions | None = None,
                  threads: int | None = None) -> BoundCurve:
    """Evaluate every quantifier on the family grid and fill the hull."""
    opts = opts or BoundOptions()
    threads = threads or threads_from_env()
    jobs = [(family, g, opts) for g in grid]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_point, jobs))
    else:
        results = [_point(j) for j in jobs]
    series = {q: np.array([r[0][q] for r in results]) for q in QUANTIFIERS}
    curve = BoundCurve("epsilon", list(grid), series, certified=[r[1] for r in results],
                       meta={"points": [r[2] for r in results]})
    finite = [q for q in QUANTIFIERS if not np.isnan(series[q]).any()]
    lower_convex_hull(curve, finite)
    cert = np.array(curve.certified)
    # a certified zero stays exactly zero after convexification
    curve.lch[cert] = 0.0
    return curve
