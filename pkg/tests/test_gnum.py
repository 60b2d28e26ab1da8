import math

import numpy as np
import pytest

from colombeau_lab.gnum import (
    EpsSubset, GeneralizedNumber as GN, NotModerateError, PreconditionError, SamplerExhausted,
    gn_eq, gn_ring, gn_scale, idempotent_audit, s_inverse, strictly_nonzero_on, witness_S,
)


def peaks():
    """eps_j = 1/(pi/2 + 2 pi 2^j): the points where sin(1/eps) = 1."""
    def member(e):
        n = (1 / e - math.pi / 2) / (2 * math.pi)
        return abs(n - round(n)) < 1e-6 * max(1.0, n)
    return EpsSubset(lambda j: 1 / (math.pi / 2 + 2 * math.pi * 2 ** j), member, label="peaks")


def test_construction_rejects_non_moderate():
    with pytest.raises(NotModerateError):
        GN("(exp (/ 1 eps))")
    with pytest.raises(ValueError):
        GN("(* x1 eps)")


def test_ring_examples():
    e = GN("eps")
    assert gn_ring(e, -e, "add").negligible.proven
    assert gn_eq(GN("(/ 1 eps)") * e, GN(1)).proven
    trig = GN("(sin (/ 1 eps))") * GN("(sin (/ 1 eps))") + GN("(cos (/ 1 eps))") * GN("(cos (/ 1 eps))")
    assert gn_eq(trig, GN(1)).proven
    assert gn_eq(gn_scale(e, "3/2"), GN("(* 1.5 eps)")).proven
    with pytest.raises(ValueError):
        gn_ring(e, e, "div")


def test_equality_examples():
    assert gn_eq(GN("eps"), GN("(+ eps (exp (neg (/ 1 eps))))")).proven
    v = gn_eq(GN("eps"), GN("(* eps eps)"))
    assert v.refuted and v.to_dict()["witnesses"]
    assert gn_eq(GN(0), GN(0)).proven


def test_strictly_nonzero_examples():
    v, m = strictly_nonzero_on(GN("eps"), EpsSubset.whole())
    assert v.proven and m == 2
    r = GN("(sin (/ 1 eps))")
    v, m = strictly_nonzero_on(r, peaks())
    assert m == 1 and not v.refuted
    s = peaks().samples(1e-12)
    assert np.allclose(r.values(s), 1.0, atol=1e-6)
    v, m = strictly_nonzero_on(GN("(exp (neg (/ 1 eps)))"), EpsSubset.whole())
    assert v.refuted and m is None


def test_sampler_exhaustion():
    with pytest.raises(SamplerExhausted):
        strictly_nonzero_on(GN("eps"), EpsSubset.from_points([0.5, 0.25]))


def test_s_inverse_of_eps():
    r = GN("eps")
    inv = s_inverse(r, EpsSubset.whole())
    eps = EpsSubset.whole().samples(1e-12)[2:]
    assert np.allclose(inv.s.values(eps) * eps, 1.0, rtol=1e-12)
    assert np.allclose(inv.rprime.values(eps), 1.0, atol=1e-12)
    assert inv.verdict.proven


def test_s_inverse_of_one():
    inv = s_inverse(GN(1), EpsSubset.whole())
    eps = np.geomspace(1e-12, 0.5, 30)
    assert np.allclose(inv.s.values(eps), 1.0) and np.allclose(inv.rprime.values(eps), 1.0)


def test_s_inverse_of_oscillation_along_peaks():
    r = GN("(sin (/ 1 eps))")
    S = peaks()
    inv = s_inverse(r, S)
    eps = S.samples(1e-12)
    assert np.max(np.abs(r.values(eps) * inv.s.values(eps) - 1)) <= 1e-12
    assert inv.verdict.consistent


def test_s_inverse_precondition():
    with pytest.raises(PreconditionError):
        s_inverse(GN("(exp (neg (/ 1 eps)))"), EpsSubset.whole())


def test_s_inverse_is_moderate_and_bounded():
    inv = s_inverse(GN("(* eps (+ 2 (sin (/ 1 eps))))"), EpsSubset.whole())
    assert inv.s.moderate.consistent
    assert inv.verdict.evidence["s_bound_ok"]


def test_witness_subsets():
    S, v = witness_S(GN("(pow eps 5)"))
    assert v.refuted
    assert strictly_nonzero_on(GN("(pow eps 5)"), S)[1] == 6
    S, v = witness_S(GN("(exp (neg (/ 1 eps)))"))
    assert S is None and v.proven
    r = GN("(sin (/ 1 eps))")
    S, v = witness_S(r)
    pts = S.samples(r.grid.eps_min)
    assert np.all(np.abs(r.values(pts)) > pts)
    assert not strictly_nonzero_on(r, S)[0].refuted


def test_idempotent_audit():
    assert idempotent_audit(GN(1)).proven
    assert idempotent_audit(GN(0)).proven
    # vanishes identically for eps <= 1/2, so it is the zero class
    assert idempotent_audit(GN("(smoothstep (- 2 (/ 1 eps)))")).proven
    not_idem = idempotent_audit(GN("(+ 2 eps)"))
    assert not not_idem.evidence["applicable"]
