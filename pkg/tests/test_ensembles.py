import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsdi.devices import Device, make_isotropic, make_pr, mixture
from nsdi.ensembles import (BudgetExceeded, build_complete_extension, enumerate_minimal_ensembles, eve_attack,
                            is_minimal)
from nsdi.lp import row_reduce
from nsdi.numerics import Channel, mi_from_table
from nsdi.polytope import VertexSet, vertices
from nsdi.squash import NINE_SUPPORT, hrw_merge_channel


def point(ps):
    return Device((1,), (len(ps),), np.array([list(ps)], dtype=object))


def subset_oracle(target, vecs):
    """All supports whose vectors are affinely independent and carry strictly
    positive weights reproducing ``target`` (plain row reduction)."""
    out = {}
    n = len(vecs)
    for k in range(1, n + 1):
        for S in itertools.combinations(range(n), k):
            rows = [[vecs[j][r] for j in S] + [target[r]] for r in range(len(target))]
            rows.append([Fraction(1)] * k + [Fraction(1)])
            R, piv = row_reduce(rows)
            if k in piv or len(piv) != k:
                continue  # inconsistent or dependent
            w = [R[i][-1] for i in range(k)]
            if all(v > 0 for v in w):
                out[S] = w
    return out


def test_extremal_singleton():
    ens = enumerate_minimal_ensembles(make_pr())
    assert len(ens) == 1 and ens[0].labels == ("B000",) and ens[0].weights == (1,)


def test_vertex_shortcut_matches_full_scan():
    vs = vertices()
    for label in ("B000", "B110", "L0000", "L1011"):
        quick = enumerate_minimal_ensembles(vs[label])
        full = enumerate_minimal_ensembles(vs[label], vs)
        assert [(e.labels, e.weights) for e in quick] == [(e.labels, e.weights) for e in full] == [((label,), (1,))]


def test_one_simplex_midpoint():
    a, b = point([Fraction(1), Fraction(0)]), point([Fraction(0), Fraction(1)])
    half = point([Fraction(1, 2), Fraction(1, 2)])
    ens = enumerate_minimal_ensembles(half, [a, b])
    assert len(ens) == 1
    assert ens[0].weights == (Fraction(1, 2), Fraction(1, 2))
    ce = build_complete_extension(half, [a, b])
    assert ce.z_size == 1 and ce.e_alphabet == 2


def test_pr_complete_extension():
    ce = build_complete_extension(make_pr())
    assert ce.z_size == 1 and ce.e_alphabet == 1


def test_square_with_centre():
    # four corners of a square (a degenerate configuration); the centre has two diagonals
    corners = [point([Fraction(c) for c in v]) for v in
               ([1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1])]
    sq = [mixture([Fraction(1, 2)] * 2, [corners[i], corners[j]]) for i, j in ((0, 1), (1, 2), (2, 3), (3, 0))]
    centre = mixture([Fraction(1, 4)] * 4, corners)
    ens = enumerate_minimal_ensembles(centre, sq)
    assert sorted(e.support for e in ens) == [(0, 2), (1, 3)]


@given(st.integers(0, 10**6))
def test_matches_subset_oracle(seed):
    rng = np.random.default_rng(seed)
    n_out, n_v = int(rng.integers(3, 6)), int(rng.integers(4, 9))
    vecs = []
    for _ in range(n_v):
        w = rng.integers(0, 6, size=n_out) + (rng.random(n_out) < 0.5)
        w[int(rng.integers(n_out))] += 1
        vecs.append([Fraction(int(x), int(w.sum())) for x in w])
    lam = rng.integers(1, 5, size=n_v)
    target = [sum(Fraction(int(l), int(lam.sum())) * v[r] for l, v in zip(lam, vecs)) for r in range(n_out)]
    devs = [point(v) for v in vecs]
    if len({tuple(v) for v in vecs}) < n_v:
        return
    got = {tuple(sorted(e.support)): dict(zip(e.support, e.weights))
           for e in enumerate_minimal_ensembles(point(target), devs)}
    want = subset_oracle(target, vecs)
    assert set(got) == set(want)
    for S, w in want.items():
        assert got[S] == dict(zip(S, w))


def test_oracle_weights_exact():
    a, b, c = (point([Fraction(v) for v in x]) for x in ([1, 0, 0], [0, 1, 0], [0, 0, 1]))
    d = point([Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)])
    (e,) = enumerate_minimal_ensembles(d, [a, b, c])
    assert e.weights == (Fraction(1, 2), Fraction(1, 3), Fraction(1, 6))


def test_ensembles_reconstruct_and_minimal():
    dev = make_isotropic(Fraction(1, 10))
    ens = enumerate_minimal_ensembles(dev)
    assert len(ens) > 1
    for e in ens:
        assert e.reconstruct().equals(dev)
        assert all(w > 0 for w in e.weights)
    for e in ens[:: max(1, len(ens) // 12)]:
        assert is_minimal(e, dev)


def test_nine_vertex_ensemble_present():
    dev = make_isotropic(Fraction(1, 5))
    sets = [set(e.labels) for e in enumerate_minimal_ensembles(dev)]
    assert set(NINE_SUPPORT) in sets


def test_vertex_permutation_invariance():
    dev = make_isotropic(Fraction(3, 20))
    base = {frozenset(zip(e.labels, e.weights)) for e in enumerate_minimal_ensembles(dev)}
    vs = vertices()
    perm = np.random.default_rng(4).permutation(24)
    shuffled = VertexSet(tuple(vs.labels[i] for i in perm), tuple(vs.vertices[i] for i in perm))
    other = {frozenset(zip(e.labels, e.weights)) for e in enumerate_minimal_ensembles(dev, shuffled)}
    assert base == other


def test_budget_and_resume():
    dev = make_isotropic(Fraction(1, 8))
    full = enumerate_minimal_ensembles(dev)
    with pytest.raises(BudgetExceeded) as info:
        enumerate_minimal_ensembles(dev, budget=200_000)
    cp = info.value.checkpoint
    assert cp["version"] == 1 and cp["next_index"] == 200_000
    rest = enumerate_minimal_ensembles(dev, resume=cp)
    assert [e.labels for e in rest] == [e.labels for e in full]
    assert [e.weights for e in rest] == [e.weights for e in full]


def test_resume_wrong_device():
    with pytest.raises(BudgetExceeded) as info:
        enumerate_minimal_ensembles(make_isotropic(Fraction(1, 8)), budget=10)
    with pytest.raises(ValueError):
        enumerate_minimal_ensembles(make_isotropic(Fraction(1, 9)), resume=info.value.checkpoint)


def test_outside_hull():
    a, b = point([Fraction(1), Fraction(0), Fraction(0)]), point([Fraction(0), Fraction(1), Fraction(0)])
    with pytest.raises(ValueError):
        enumerate_minimal_ensembles(point([Fraction(1, 3)] * 3), [a, b])


def test_float_device_rejected():
    with pytest.raises(ValueError):
        enumerate_minimal_ensembles(make_isotropic(0.1))


# Eve's attack ---------------------------------------------------------------

def test_attack_deterministic_identity():
    dev = make_isotropic(Fraction(1, 10))
    ce = build_complete_extension(dev)
    z = 5
    out = eve_attack(ce, Channel.deterministic([z], ce.z_size), Channel.identity(ce.e_alphabet))
    ens = ce.ensembles[z]
    assert out.weights == ens.weights
    assert all(m.equals(n) for m, n in zip(out.members, ens.members))


def test_attack_constant_channel():
    dev = make_isotropic(Fraction(1, 10))
    ce = build_complete_extension(dev)
    dice = Channel(np.full((ce.z_size, 1), Fraction(1, ce.z_size), dtype=object))
    out = eve_attack(ce, dice, Channel.constant(ce.e_alphabet))
    assert out.weights == (1,) and out.members[0].equals(dev)


def test_attack_merge_channel_uniform_member():
    dev = make_isotropic(Fraction(1, 5))
    ce = build_complete_extension(dev)
    z = next(i for i, e in enumerate(ce.ensembles) if set(e.labels) == set(NINE_SUPPORT))
    ens = ce.ensembles[z]
    theta = hrw_merge_channel(0, 0)
    cols = [NINE_SUPPORT.index(l) for l in ens.labels]
    ch = Channel(theta.matrix[:, cols])
    out = eve_attack(ce, Channel.deterministic([z], ce.z_size), ch)
    assert len(out) == 7
    m0 = out.members[out.labels.index(0)]
    assert out.weights[out.labels.index(0)] == Fraction(2, 5)
    assert all(v == Fraction(1, 4) for v in m0.probs[0, 0].flat)


def test_attack_mixture_reconstructs():
    dev = make_isotropic(Fraction(1, 7))
    ce = build_complete_extension(dev)
    rng = np.random.default_rng(3)
    for _ in range(5):
        w = rng.integers(0, 3, size=ce.z_size)
        w[0] += 1
        dice = Channel(np.array([[Fraction(int(v), int(w.sum()))] for v in w], dtype=object))
        post = Channel.deterministic(rng.integers(0, 3, size=ce.e_alphabet), 3)
        assert eve_attack(ce, dice, post).reconstruct().equals(dev)


def test_extremal_parent_no_information():
    ce = build_complete_extension(make_pr())
    for xy in itertools.product(range(2), repeat=2):
        q = ce.tensor(xy)[0]
        assert mi_from_table(q[:, :, 0]) == pytest.approx(mi_from_table(make_pr().as_float().probs[xy]))
