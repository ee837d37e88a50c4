import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_float_device, random_rational_device
from nsdi.devices import Device, make_isotropic, make_pr, tensor_product
from nsdi.ensembles import build_complete_extension
from nsdi.numerics import h2
from nsdi.polytope import vertices
from nsdi.squash import (NINE_SUPPORT, QUANTIFIERS, BoundCurve, compute_curve, family_device,
                         hrw_merge_channel, lower_convex_hull, nsq_upper, squashed_cmi_over_ce,
                         squashed_mutual_information)


def relabel_outputs(device: Device, fa, fb) -> Device:
    p = device.as_float().probs
    out = np.zeros_like(p)
    for a, b in itertools.product(range(2), repeat=2):
        out[:, :, fa[a], fb[b]] += p[:, :, a, b]
    return Device(device.input_sizes, device.output_sizes, out)


# squashed mutual information -------------------------------------------------

def test_smi_points():
    assert squashed_mutual_information(make_pr()).bits == pytest.approx(1.0)
    for v in vertices().local:
        assert squashed_mutual_information(v).bits == pytest.approx(0.0, abs=1e-15)


@given(st.fractions(0, Fraction(1, 2), max_denominator=500))
def test_smi_isotropic(eps):
    assert squashed_mutual_information(make_isotropic(eps)).bits == pytest.approx(1 - h2(float(eps)), abs=1e-12)


def test_smi_additive():
    rng = np.random.default_rng(21)
    for _ in range(10):
        p, q = random_float_device(rng), random_float_device(rng)
        t = tensor_product(p, q)
        lhs = squashed_mutual_information(t, split=((0, 2), (1, 3))).bits
        rhs = squashed_mutual_information(p).bits + squashed_mutual_information(q).bits
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_smi_data_processing():
    rng = np.random.default_rng(22)
    maps = list(itertools.product(range(2), repeat=2))
    for _ in range(30):
        d = random_float_device(rng)
        base = squashed_mutual_information(d).bits
        for fa, fb in itertools.product(maps, repeat=2):
            assert squashed_mutual_information(relabel_outputs(d, fa, fb)).bits <= base + 1e-12


# conditional mutual information over the complete extension -----------------

def test_cmi_extremal_equals_smi():
    for v in (make_pr(), vertices()["B011"], vertices()["L0110"]):
        assert squashed_cmi_over_ce(v).bits == pytest.approx(squashed_mutual_information(v).bits, abs=1e-12)


@pytest.mark.parametrize("eps", [Fraction(1, 50), Fraction(1, 10), Fraction(3, 20), Fraction(1, 5), Fraction(1, 4)])
def test_cmi_isotropic(eps):
    assert squashed_cmi_over_ce(make_isotropic(eps)).bits == pytest.approx(float(1 - 4 * eps), abs=1e-9)


@pytest.mark.parametrize("family,eps", [("hrw-a", Fraction(1, 10)), ("hrw-b", Fraction(3, 20)),
                                        ("hrw-c", Fraction(1, 20)), ("hrw-c", Fraction(1, 5))])
def test_cmi_hrw_equals_cost(family, eps):
    from nsdi.polytope import nonlocality_cost
    d = family_device(family, eps)
    assert squashed_cmi_over_ce(d).bits == pytest.approx(float(nonlocality_cost(d)), abs=1e-9)


# merge channels --------------------------------------------------------------

def test_merge_channels():
    t00, t11 = hrw_merge_channel(0, 0), hrw_merge_channel(1, 1)
    zero = lambda ch: {NINE_SUPPORT[j] for j in range(9) if ch.matrix[0, j] == 1}
    assert zero(t00) == {"B000", "L1011", "L1110"}
    assert zero(t11) == {"B000", "L0000", "L0101"}
    for x, y in itertools.product(range(2), repeat=2):
        ch = hrw_merge_channel(x, y)
        assert ch.matrix.shape == (7, 9) and ch.exact and ch.is_deterministic()
        assert all(sorted(ch.matrix[:, j].tolist()) == [0] * 6 + [1] for j in range(9))
    with pytest.raises(ValueError):
        hrw_merge_channel(2, 0)


# the bound -------------------------------------------------------------------

def test_local_certified_zero():
    for label in ("L0000", "L1011"):
        b = nsq_upper(vertices()[label])
        assert b.certified_zero and b.nsq_upper == 0.0


def test_iso_point_two_certified():
    b = nsq_upper(make_isotropic(Fraction(1, 5)))
    assert b.certified_zero and b.nsq_upper == 0.0
    for s in b.strategies.values():
        assert s.certified


def test_iso_point_one():
    b = nsq_upper(make_isotropic(Fraction(1, 10)))
    assert 0 < b.nsq_upper <= min(1 - h2(0.1), 0.6) + 1e-12
    assert not b.certified_zero


def test_pr_bound():
    b = nsq_upper(make_pr())
    assert b.nsq_upper == pytest.approx(1.0) and b.N_C == 1


def test_hierarchy_random():
    rng = np.random.default_rng(23)
    for _ in range(8):
        d = random_rational_device(rng, max_support=6)
        ce = build_complete_extension(d)
        b = nsq_upper(d, ce=ce)
        cmi = squashed_cmi_over_ce(d, ce).bits
        assert b.nsq_upper <= min(b.I_AB, cmi, b.I_ABgE_channel) + 1e-10
        assert all(b.values[q] <= 1 + 1e-12 for q in QUANTIFIERS)
        if b.certified_zero:
            assert b.nsq_upper == 0.0


def test_float_device_needs_explicit_extension():
    with pytest.raises(ValueError):
        nsq_upper(make_isotropic(0.2))


def test_user_strategy_accepted():
    from nsdi.numerics import Channel
    d = make_isotropic(Fraction(3, 20))
    ce = build_complete_extension(d)
    pick = Channel.deterministic([0], ce.z_size)
    strategies = {(0, 0): [(pick, Channel.identity(ce.e_alphabet))]}
    b = nsq_upper(d, ce=ce, strategies=strategies)
    assert b.nsq_upper <= nsq_upper(d, ce=ce).nsq_upper + 1e-12
    with pytest.raises(ValueError):
        nsq_upper(d, ce=ce, strategies={(0, 0): [(Channel.identity(2), Channel.identity(2))]})


# lower convex hull -----------------------------------------------------------

def test_lch_convex_series_unchanged():
    grid = [Fraction(k, 10) for k in range(11)]
    ys = np.array([(float(g) - 0.4) ** 2 for g in grid])
    c = lower_convex_hull(BoundCurve("x", grid, {"a": ys}))
    assert np.allclose(c.lch, ys)


def test_lch_two_lines():
    grid = [Fraction(k, 10) for k in range(11)]
    x = np.array([float(g) for g in grid])
    a, b = 1 - x, 0.8 - 0.2 * x      # cross at x = 0.25
    c = lower_convex_hull(BoundCurve("x", grid, {"a": a, "b": b}))
    # hull of the min envelope: the envelope is concave, so the hull is the chord
    # from (0, 0.8) to (1, 0)
    assert np.allclose(c.lch, 0.8 * (1 - x))


def test_lch_single_point():
    c = lower_convex_hull(BoundCurve("x", [Fraction(1, 2)], {"a": np.array([0.3]), "b": np.array([0.2])}))
    assert c.lch.tolist() == [0.2]


def test_lch_rejects_nan():
    with pytest.raises(ValueError):
        lower_convex_hull(BoundCurve("x", [0, 1], {"a": np.array([0.1, np.nan])}))


def test_iso_curve_coarse():
    grid = [Fraction(k, 40) for k in range(11)]
    curve = compute_curve("iso", grid)
    lch = curve.lch
    x = np.array([float(g) for g in grid])
    for i, g in enumerate(grid):
        if g >= Fraction(1, 5):
            assert lch[i] == 0.0 and curve.certified[i]
        else:
            assert lch[i] > 1e-3
    second = lch[2:] - 2 * lch[1:-1] + lch[:-2]
    assert (second >= -1e-10).all()
    assert np.allclose(curve.series["N_C"], 1 - 4 * x)
    for q in QUANTIFIERS:
        assert (lch <= curve.series[q] + 1e-12).all()


def test_families_agree():
    for g in (Fraction(1, 20), Fraction(1, 5)):
        assert family_device("hrw-d", g).equals(family_device("iso", g))
    with pytest.raises(ValueError):
        family_device("hrw-a", Fraction(0))
    with pytest.raises(ValueError):
        family_device("nope", Fraction(0))
