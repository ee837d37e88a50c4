import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsdi.numerics import (Channel, JointDistribution, apply_channel, conditional_mutual_information, h2,
                           intrinsic_information_upper, mutual_information, shannon_entropy,
                           total_variation)


def naive_entropy(ps):
    return -sum(p * math.log(p, 2) for p in ps if p > 0)


def dist(arr):
    return JointDistribution(np.asarray(arr, dtype=float))


def random_joint(seed, shape=(2, 2, 3)):
    r = np.random.default_rng(seed)
    return JointDistribution(r.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))


# entropy --------------------------------------------------------------------

def test_entropy_uniform_bit():
    assert shannon_entropy(dist([0.5, 0.5]), [0]) == pytest.approx(1.0, abs=1e-15)


def test_entropy_point_mass():
    assert shannon_entropy(dist([1.0, 0.0]), [0]) == 0.0


def test_entropy_quarter():
    assert shannon_entropy(dist([0.25, 0.75]), [0]) == pytest.approx(naive_entropy([0.25, 0.75]), abs=1e-12)
    assert shannon_entropy(dist([0.25, 0.75]), [0]) == pytest.approx(0.8112781244591328, abs=1e-12)


def test_exact_input_accepted():
    d = JointDistribution(np.array([[Fraction(1, 2), 0], [0, Fraction(1, 2)]], dtype=object))
    assert d.exact
    assert mutual_information(d, [0], [1]) == pytest.approx(1.0)


# mutual information ---------------------------------------------------------

def test_mi_product():
    assert mutual_information(dist(np.full((2, 2), 0.25)), [0], [1]) == pytest.approx(0.0, abs=1e-15)


def test_mi_copy():
    assert mutual_information(dist([[0.5, 0], [0, 0.5]]), [0], [1]) == pytest.approx(1.0)


def test_mi_noisy_copy():
    p = dist([[0.4, 0.1], [0.1, 0.4]])
    assert mutual_information(p, [0], [1]) == pytest.approx(1 - naive_entropy([0.2, 0.8]), abs=1e-12)
    assert mutual_information(p, [0], [1]) == pytest.approx(0.2780719051126377, abs=1e-12)


# conditional mutual information ---------------------------------------------

def test_cmi_independent_eve():
    ab = np.array([[0.4, 0.1], [0.1, 0.4]])
    p = dist(np.einsum("ab,e->abe", ab, [0.3, 0.7]))
    assert conditional_mutual_information(p, [0], [1], [2]) == pytest.approx(mutual_information(p, [0], [1]))


def xor_tensor():
    p = np.zeros((2, 2, 2))
    for a in range(2):
        for b in range(2):
            p[a, b, a ^ b] = 0.25
    return p


def test_cmi_xor():
    assert conditional_mutual_information(dist(xor_tensor()), [0], [1], [2]) == pytest.approx(1.0)


def test_cmi_all_equal():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = p[1, 1, 1] = 0.5
    assert conditional_mutual_information(dist(p), [0], [1], [2]) == pytest.approx(0.0, abs=1e-15)


@given(st.integers(0, 10**6))
def test_mi_bounds(seed):
    d = random_joint(seed, (3, 2))
    i = mutual_information(d, [0], [1])
    assert -1e-12 <= i <= min(shannon_entropy(d, [0]), shannon_entropy(d, [1])) + 1e-12


def test_chain_rule_many():
    r = np.random.default_rng(7)
    for _ in range(1000):
        shape = tuple(int(v) for v in r.integers(2, 4, size=3))
        d = JointDistribution(r.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape))
        h = lambda *v: shannon_entropy(d, v)
        rhs = (h(0, 2) - h(2)) + (h(1, 2) - h(2)) - (h(0, 1, 2) - h(2))
        assert conditional_mutual_information(d, [0], [1], [2]) == pytest.approx(rhs, abs=1e-10)


def test_grouped_variables():
    d = random_joint(3, (2, 2, 2, 2))
    flat = JointDistribution(d.probs.reshape(4, 2, 2))
    assert mutual_information(d, [0, 1], [2]) == pytest.approx(mutual_information(flat, [0], [1]))


def test_overlapping_vars_rejected():
    with pytest.raises(ValueError):
        mutual_information(random_joint(1), [0], [0])


# channels -------------------------------------------------------------------

def test_identity_channel():
    d = random_joint(11)
    out = apply_channel(d, Channel.identity(3, exact=False), 2)
    assert np.allclose(out.probs, d.probs)


def test_constant_channel():
    d = random_joint(12)
    out = apply_channel(d, Channel.constant(3, 2, target=1, exact=False), 2)
    assert np.allclose(out.probs[:, :, 0], 0)
    assert np.allclose(out.probs[:, :, 1], d.probs.sum(axis=2))


def test_bit_flip_channel():
    d = random_joint(13, (2, 3))
    flip = Channel(np.array([[0.0, 1.0], [1.0, 0.0]]))
    out = apply_channel(d, flip, 0)
    assert np.allclose(out.probs, d.probs[::-1, :])


@given(st.lists(st.integers(1, 9), min_size=6, max_size=6), st.lists(st.integers(0, 1), min_size=3, max_size=3))
def test_channel_preserves_normalization_exactly(ws, mapping):
    tot = sum(ws)
    p = np.array([Fraction(w, tot) for w in ws], dtype=object).reshape(2, 3)
    ch = Channel.deterministic(mapping, 2)
    out = apply_channel(JointDistribution(p), ch, 1)
    assert sum(out.probs.flat) == 1


def test_channel_rejects_non_stochastic():
    with pytest.raises(ValueError):
        Channel(np.array([[0.5, 1.0], [0.4, 0.0]]))


def test_compose():
    a = Channel.deterministic([1, 0], 2)
    assert a.compose(a).matrix.tolist() == Channel.identity(2).matrix.tolist()


# total variation ------------------------------------------------------------

def test_tv_cases():
    assert total_variation(dist([0.3, 0.7]), dist([0.3, 0.7])) == 0
    assert total_variation(dist([1.0, 0.0]), dist([0.0, 1.0])) == pytest.approx(1.0)
    assert total_variation(dist([1.0, 0.0]), dist([0.5, 0.5])) == pytest.approx(0.5)


# intrinsic information ------------------------------------------------------

def test_intrinsic_independent_eve():
    ab = np.array([[0.4, 0.1], [0.1, 0.4]])
    p = dist(np.einsum("ab,e->abe", ab, [0.5, 0.5]))
    res = intrinsic_information_upper(p, restarts=2)
    assert res.bits == pytest.approx(1 - h2(0.2), abs=1e-9)


def test_intrinsic_xor_is_zero():
    res = intrinsic_information_upper(dist(xor_tensor()), restarts=2)
    assert res.bits == pytest.approx(0.0, abs=1e-12)
    # the witness forgets E
    assert res.witness.matrix[:, 0].tolist() == res.witness.matrix[:, 1].tolist()


def test_intrinsic_trivial_eve():
    p = np.zeros((2, 2, 1))
    p[0, 0, 0] = p[1, 1, 0] = 0.5
    assert intrinsic_information_upper(dist(p), restarts=1).bits == pytest.approx(1.0)


@given(st.integers(0, 10**6))
def test_intrinsic_is_below_cmi_and_mi(seed):
    d = random_joint(seed)
    res = intrinsic_information_upper(d, restarts=1, seed=seed)
    assert res.bits <= conditional_mutual_information(d, [0], [1], [2]) + 1e-12
    assert res.bits <= mutual_information(d, [0], [1]) + 1e-12
    assert res.bits >= -1e-12


def test_intrinsic_more_restarts_never_worse():
    for seed in range(8):
        d = random_joint(seed, (2, 2, 4))
        vals = [intrinsic_information_upper(d, restarts=r, seed=5).bits for r in (1, 2, 4)]
        assert vals[1] <= vals[0] + 1e-15 and vals[2] <= vals[1] + 1e-15


def test_intrinsic_deterministic_given_seed():
    d = random_joint(4, (2, 2, 3))
    a = intrinsic_information_upper(d, restarts=3, seed=9)
    b = intrinsic_information_upper(d, restarts=3, seed=9)
    assert a.bits == b.bits
