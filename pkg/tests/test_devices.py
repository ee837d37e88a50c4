import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_float_device, random_rational_device
from nsdi.devices import (Device, HrwParams, chsh_error, direct_measure, general_measure, make_anti_pr,
                          make_hrw, make_isotropic, make_local_vertex, make_nonlocal_vertex, make_pr, mix,
                          tensor_product, trivial_device, tsirelson_epsilon, validate)
from nsdi.numerics import Channel
from nsdi.polytope import vertices

fractions = st.fractions(min_value=0, max_value=1, max_denominator=60)


def signaling_box():
    # Bob outputs Alice's input
    p = np.zeros((2, 2, 2, 2))
    for x, y in itertools.product(range(2), repeat=2):
        p[x, y, 0, x] = 1.0
    return Device((2, 2), (2, 2), p)


def test_pr_valid():
    rep = validate(make_pr())
    assert rep.valid and rep.worst_violation == 0


def test_signaling_detected():
    rep = validate(signaling_box())
    assert rep.normalized and not rep.nonsignaling
    assert rep.worst_violation == pytest.approx(1.0)


def test_unnormalized_detected():
    d = Device((1,), (2,), np.array([[0.5, 0.6]]))
    assert not validate(d).normalized


def test_hrw_spec_example_valid():
    d = make_hrw(HrwParams(Fraction(1, 100), Fraction(19, 100)))
    assert validate(d).valid


def test_three_party_subsets_checked():
    # A and B jointly signal to C only through the pair: C outputs x_A xor x_B
    p = np.zeros((2, 2, 2, 2, 2, 2))
    for xa, xb, xc in itertools.product(range(2), repeat=3):
        for a, b in itertools.product(range(2), repeat=2):
            p[xa, xb, xc, a, b, xa ^ xb] = 0.25
    rep = validate(Device((2, 2, 2), (2, 2, 2), p))
    assert not rep.nonsignaling


def test_direct_measure_pr():
    m = direct_measure(make_pr(), (0, 0)).probs
    assert m.tolist() == [[Fraction(1, 2), 0], [0, Fraction(1, 2)]]


def test_direct_measure_local_vertex():
    m = direct_measure(make_local_vertex(0, 0, 0, 0), (1, 0)).probs
    assert m[0, 0] == 1 and sum(m.flat) == 1


def test_direct_measure_isotropic():
    eps = Fraction(3, 20)
    m = direct_measure(make_isotropic(eps), (0, 0)).probs
    assert m[0, 0] == m[1, 1] == (1 - eps) / 2
    assert m[0, 1] == m[1, 0] == eps / 2


def test_general_measure_select_input():
    d = make_isotropic(Fraction(1, 10))
    out = general_measure(d, 0, Channel.deterministic([0], 2))
    assert out.input_sizes == (1, 2)
    assert out.equals(Device((1, 2), (2, 2), d.probs[0:1]))


def test_general_measure_identity():
    d = make_isotropic(Fraction(1, 10))
    assert general_measure(d, 1, Channel.identity(2)).equals(d)


def test_general_measure_uniform_dice():
    pr = make_pr()
    half = Channel(np.array([[Fraction(1, 2)], [Fraction(1, 2)]], dtype=object))
    out = general_measure(pr, 0, half)
    expected = (pr.probs[0] + pr.probs[1]) / 2
    assert out.equals(Device((1, 2), (2, 2), expected[None]))


def test_measure_consistency_random():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = random_float_device(rng)
        w = rng.dirichlet([1, 1])
        dice = Channel(w.reshape(2, 1))
        gm = general_measure(d, 0, dice)
        for y in range(2):
            lhs = direct_measure(gm, (0, y)).probs
            rhs = w[0] * direct_measure(d, (0, y)).probs + w[1] * direct_measure(d, (1, y)).probs
            assert np.abs(lhs - rhs).max() <= 1e-12


def test_tensor_with_trivial():
    d = make_isotropic(Fraction(1, 5))
    t = tensor_product(d, trivial_device())
    assert t.probs.reshape(d.probs.shape).tolist() == d.probs.tolist()


def test_pr_tensor_pr():
    t = tensor_product(make_pr(), make_pr())
    assert t.input_sizes == (2, 2, 2, 2) and t.output_sizes == (2, 2, 2, 2)
    p = make_pr().probs
    assert t.probs[0, 1, 1, 1, 0, 1, 1, 0] == p[0, 1, 0, 1] * p[1, 1, 1, 0]
    assert validate(t).valid


def test_tensor_random_valid():
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, b = random_rational_device(rng), random_rational_device(rng)
        assert validate(tensor_product(a, b)).valid


def test_isotropic_zero_is_pr():
    assert make_isotropic(0).equals(make_pr())


@given(fractions)
def test_hrw_diagonal_is_isotropic(eps):
    eps = min(eps, Fraction(1, 2))
    iso = make_isotropic(eps)
    hrw = make_hrw(HrwParams(eps, eps - Fraction(1, 4)))
    assert hrw.equals(iso)


def test_vertex_counts_and_validity():
    vs = vertices()
    assert len(vs.local) == 16 and len(vs.nonlocal_) == 8
    vecs = {tuple(v.vector()) for v in vs.vertices}
    assert len(vecs) == 24
    for v in vs.vertices:
        rep = validate(v)
        assert rep.valid and rep.worst_violation == 0


def test_pr_is_b000():
    assert make_pr().equals(make_nonlocal_vertex(0, 0, 0))
    assert make_anti_pr().equals(make_nonlocal_vertex(0, 0, 1))


def test_chsh_errors():
    assert chsh_error(make_pr()) == 0
    assert chsh_error(make_anti_pr()) == 1


@given(st.fractions(0, Fraction(1, 4), max_denominator=200), st.fractions(Fraction(-1, 4), Fraction(1, 12), max_denominator=200))
def test_chsh_error_hrw(delta, eps_p):
    p = HrwParams(delta, eps_p)
    assert chsh_error(make_hrw(p)) == (Fraction(3, 4) + delta + 3 * eps_p) / 4
    assert p.chsh_error() == chsh_error(make_hrw(p))


@given(fractions, st.integers(0, 10**6))
def test_chsh_affine(lam, seed):
    rng = np.random.default_rng(seed)
    p, q = random_rational_device(rng), random_rational_device(rng)
    assert chsh_error(mix(lam, p, q)) == lam * chsh_error(p) + (1 - lam) * chsh_error(q)


def test_isotropic_chsh_equals_eps():
    for eps in (Fraction(0), Fraction(1, 10), Fraction(1, 4)):
        assert chsh_error(make_isotropic(eps)) == eps


def test_out_of_range():
    with pytest.raises(ValueError):
        make_isotropic(Fraction(3, 2))
    with pytest.raises(ValueError):
        HrwParams(Fraction(-1, 10), 0)
    with pytest.raises(ValueError):
        make_local_vertex(2, 0, 0, 0)


def test_tsirelson():
    assert tsirelson_epsilon() == pytest.approx(0.1464466094067262)


def test_float_ints_are_cast():
    d = Device((1,), (2,), np.array([[1, 0]]))
    assert d.probs.dtype == float
