"""Distance between classical-classical-device states and the security
functionals built on it.

A cc-d state stores ``probs[z, s_A, s_B, q, e] = P(s_A, s_B, q, e | z)``:
Eve's input first, then the classical registers, then Eve's output.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .numerics import is_exact, to_float

NS_TOL = 1e-12
STRATEGY_LIMIT = 10**7


@dataclass(frozen=True, eq=False)
class CcdState:
    probs: np.ndarray

    def __post_init__(self):
        p = self.probs
        if not isinstance(p, np.ndarray) or p.dtype.kind in "biu":
            p = np.asarray(p)
            if p.dtype != object:
                p = p.astype(float)
            object.__setattr__(self, "probs", p)
        if p.ndim != 5:
            raise ValueError("cc-d tensor must have axes (z, s_A, s_B, q, e)")

    @property
    def exact(self) -> bool:
        return is_exact(self.probs)

    @property
    def z_size(self) -> int:
        return self.probs.shape[0]

    @property
    def e_size(self) -> int:
        return self.probs.shape[4]

    @property
    def classical_sizes(self) -> tuple[int, int, int]:
        return tuple(self.probs.shape[1:4])

    def check(self) -> None:
        p = self.probs
        if self.exact:
            if any(v < 0 for v in p.flat):
                raise ValueError("negative probability")
            tot = p.sum(axis=(1, 2, 3, 4))
            if any(t != 1 for t in tot):
                raise ValueError("each z must carry total mass 1")
            m = p.sum(axis=4)
            if any(v != 0 for v in (m - m[:1]).flat):
                raise ValueError("Eve's input signals to the classical registers")
        else:
            if (p < -NS_TOL).any():
                raise ValueError("negative probability")
            if np.abs(p.sum(axis=(1, 2, 3, 4)) - 1).max() > NS_TOL:
                raise ValueError("each z must carry total mass 1")
            m = p.sum(axis=4)
            if np.abs(m - m[:1]).max() > NS_TOL:
                raise ValueError("Eve's input signals to the classical registers")

    def classical_flat(self) -> np.ndarray:
        """probs reshaped to [z, c, e] with c the joint classical index."""
        z, sa, sb, q, e = self.probs.shape
        return self.probs.reshape(z, sa * sb * q, e)


def _pair(p: CcdState, q: CcdState):
    if p.probs.shape != q.probs.shape:
        raise ValueError("cc-d states have different alphabets")
    if p.exact and q.exact:
        return p.probs, q.probs, True
    return to_float(p.probs), to_float(q.probs), False


def ns_norm_ccd(p: CcdState, q: CcdState):
    """½ Σ_{s_A,s_B,q} max_z Σ_e |p − q|."""
    a, b, exact = _pair(p, q)
    diff = np.abs(a - b).sum(axis=4)          # [z, sA, sB, q]
    best = diff.max(axis=0)
    total = sum(best.flat, Fraction(0)) if exact else float(best.sum())
    return total / 2


def _dice_tables(n_in: int, n_out: int):
    """Column-stochastic tables with entries in {0, ½, 1}."""
    cols = [c for c in itertools.product((0, 1, 2), repeat=n_out) if sum(c) == 2]
    for choice in itertools.product(cols, repeat=n_in):
        yield np.array(choice, dtype=float).T / 2.0


def count_strategies(p: CcdState, dice_out: int = 1, dice_in: int = 1) -> int:
    n_c = int(np.prod(p.classical_sizes))
    n_z, n_e = p.z_size, p.e_size
    tables = sum(1 for _ in _dice_tables(dice_in, dice_out))
    forward = tables * dice_in**n_c * n_z ** (n_c * dice_out) * n_e**n_e
    backward = tables * n_z**n_c * dice_in ** (n_c * n_e) * n_e**n_e
    return forward + backward


def brute_force_distinguisher(p: CcdState, q: CcdState, dice_out: int = 1, dice_in: int = 1) -> float:
    """Best total-variation distance reachable by an explicit family of
    wirings, a lower bound on :func:`ns_norm_ccd`.

    The distinguisher reads the classical registers c and owns a local dice
    (a table p(d|i) with entries in {0, ½, 1}).  Forward wirings choose the
    dice input from c and Eve's input from (c, d); backward wirings choose
    Eve's input from c and the dice input from (c, e).  Eve's output is
    relabelled by a function h: E -> E.  Every combination is enumerated and
    the distance between the two induced distributions over (c, d, h(e)) is
    maximized.
    """
    a, b, _ = _pair(p, q)
    n_z, n_e = p.z_size, p.e_size
    A = a.reshape(n_z, -1, n_e)
    B = b.reshape(n_z, -1, n_e)
    n_c = A.shape[1]
    total = count_strategies(p, dice_out, dice_in)
    if total > STRATEGY_LIMIT:
        raise ValueError(f"{total} strategies exceed the enumeration limit {STRATEGY_LIMIT}")

    H = np.zeros((n_e**n_e, n_e, n_e))  # [h, e, o]
    for k, h in enumerate(itertools.product(range(n_e), repeat=n_e)):
        H[k, np.arange(n_e), list(h)] = 1.0
    Ah = np.einsum("zce,heo->hzco", A, H)
    Bh = np.einsum("zce,heo->hzco", B, H)
    best = 0.0
    for table in _dice_tables(dice_in, dice_out):
        # forward: i = g(c), d ~ table[:, i], z = f(c, d)
        for g in itertools.product(range(dice_in), repeat=n_c):
            pd = table[:, list(g)].T                                   # [c, d]
            for f in itertools.product(range(n_z), repeat=n_c * dice_out):
                zsel = np.array(f).reshape(n_c, dice_out)
                ca = Ah[:, zsel, np.arange(n_c)[:, None], :]             # [h, c, d, o]
                cb = Bh[:, zsel, np.arange(n_c)[:, None], :]
                val = 0.5 * (np.abs(ca - cb) * pd[None, :, :, None]).sum(axis=(1, 2, 3)).max()
                best = max(best, float(val))
        # backward: z = f(c), i = g(c, e), d ~ table[:, i]
        for f in itertools.product(range(n_z), repeat=n_c):
            ca = A[list(f), np.arange(n_c), :]                          # [c, e]
            cb = B[list(f), np.arange(n_c), :]
            for g in itertools.product(range(dice_in), repeat=n_c * n_e):
                pd = table[:, list(g)].T.reshape(n_c, n_e, dice_out)     # [c, e, d]
                xa = np.einsum("ce,ced,heo->hcdo", ca, pd, H)
                xb = np.einsum("ce,ced,heo->hcdo", cb, pd, H)
                val = 0.5 * np.abs(xa - xb).sum(axis=(1, 2, 3)).max()
                best = max(best, float(val))
    return best


def ideal_state(real: CcdState) -> CcdState:
    """Uniform perfectly correlated key times the real (q, e | z) marginal."""
    p = real.probs
    _, sa, sb, _, _ = p.shape
    if sa != sb:
        raise ValueError("key alphabets of both parties must agree")
    marg = p.sum(axis=(1, 2))                                    # [z, q, e]
    eye = np.eye(sa, dtype=int)
    out = np.einsum("ab,zqe->zabqe", eye.astype(object) if real.exact else eye.astype(float),
                    marg)
    out = out / (Fraction(sa) if real.exact else float(sa))
    return CcdState(out)


def intermediate_state(real: CcdState) -> CcdState:
    """Bob's key replaced by a copy of Alice's."""
    p = real.probs
    _, sa, sb, _, _ = p.shape
    if sa != sb:
        raise ValueError("key alphabets of both parties must agree")
    ma = p.sum(axis=2)                                           # [z, sA, q, e]
    eye = np.eye(sa, dtype=int)
    eye = eye.astype(object) if real.exact else eye.astype(float)
    return CcdState(np.einsum("ab,zaqe->zabqe", eye, ma))


def _drop_bob(state: CcdState) -> CcdState:
    return CcdState(state.probs.sum(axis=2, keepdims=True))


def disagreement(real: CcdState):
    p = real.probs[0]
    sa, sb = p.shape[0], p.shape[1]
    tot = Fraction(0) if real.exact else 0.0
    for a, b in itertools.product(range(sa), range(sb)):
        if a != b:
            tot = tot + p[a, b].sum()
    return tot


@dataclass(frozen=True)
class SecurityReport:
    eps_secrecy: float
    eps_correctness: float
    eps_security: float
    p_abort: float = 0.0

    def as_dict(self) -> dict:
        return {"eps_secrecy": self.eps_secrecy, "eps_correctness": self.eps_correctness,
                "eps_security": self.eps_security, "p_abort": self.p_abort}


def security_report(real: CcdState, p_abort=0) -> SecurityReport:
    if not 0 <= p_abort <= 1:
        raise ValueError("p_abort must lie in [0, 1]")
    ideal = ideal_state(real)
    passed = 1 - p_abort
    cor = passed * disagreement(real)
    sec = passed * ns_norm_ccd(_drop_bob(real), _drop_bob(ideal))
    full = passed * ns_norm_ccd(real, ideal)
    return SecurityReport(float(sec), float(cor), float(full), float(p_abort))


def with_abort(state: CcdState, p_abort, abort_symbol_q: bool = True) -> CcdState:
    """Mix ``state`` with a fixed abort branch of weight ``p_abort``.

    The public register gains one extra symbol flagging the abort; on that
    branch both keys and Eve's output are 0.
    """
    p = state.probs
    z, sa, sb, nq, ne = p.shape
    exact = state.exact and not isinstance(p_abort, float)
    zero = Fraction(0) if exact else 0.0
    out = np.full((z, sa, sb, nq + 1, ne), zero, dtype=object if exact else float)
    pa = Fraction(p_abort) if exact else float(p_abort)
    out[:, :, :, :nq, :] = p * (1 - pa)
    out[:, 0, 0, nq, 0] = pa
    return CcdState(out)


def random_ccd(rng: np.random.Generator, sa: int = 2, sb: int = 2, nq: int = 2,
               ne: int = 2, nz: int = 2) -> CcdState:
    """Random valid cc-d state: a classical distribution times per-z
    conditional distributions of e."""
    c = rng.dirichlet(np.ones(sa * sb * nq)).reshape(sa, sb, nq)
    cond = rng.dirichlet(np.ones(ne), size=(nz, sa, sb, nq))        # [z, sA, sB, q, e]
    return CcdState(c[None, :, :, :, None] * cond)
