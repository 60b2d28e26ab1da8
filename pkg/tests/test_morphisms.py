import math
from fractions import Fraction

import numpy as np
import pytest

from colombeau_lab import eps_dsl as E
from colombeau_lab.eps_dsl import parse
from colombeau_lab.gfun import DomainSpec, GeneralizedFunction as GF, embed_smooth, gf_eq, partial
from colombeau_lab.gpoints import random_point
from colombeau_lab.morphisms import (
    AlgebraMorphism, CBoundedMap, MorphismAuditFailure, audit_morphism, check_c_bounded,
    compose_maps, evaluation_compatibility, identity_map, pullback, recover_map,
    verify_factorization, verify_isomorphism,
)

WIDE = DomainSpec(1, ((-2, 2),))
UNIT = DomainSpec(1, ((-1, 1),))
HALF = DomainSpec(1, ((-0.5, 0.5),))
BOX = DomainSpec(2, ((-1, 1), (-1, 1)))


def m(src, tgt, *comps):
    return CBoundedMap(src, tgt, tuple(parse(c) for c in comps))


def test_c_bounded_examples():
    assert check_c_bounded(m(WIDE, WIDE, "(+ x1 eps)")).proven
    v = check_c_bounded(m(WIDE, WIDE, "(/ x1 eps)"))
    assert v.refuted and v.to_dict()["witnesses"]
    assert check_c_bounded(m(WIDE, WIDE, "(sin (/ x1 eps))")).proven


def test_map_validation_and_json():
    with pytest.raises(ValueError):
        m(WIDE, BOX, "x1")
    phi = m(BOX, BOX, "(* x2 0.5)", "(sin x1)")
    assert CBoundedMap.from_json(phi.to_dict()) == phi


def test_pullback_examples():
    Phi = pullback(m(WIDE, WIDE, "(+ x1 eps)"))
    out = Phi(embed_smooth("(* x1 x1)", WIDE))
    assert gf_eq(out, GF(WIDE, "(* (+ x1 eps) (+ x1 eps))")).proven
    assert gf_eq(Phi(embed_smooth(1, WIDE)), embed_smooth(1, WIDE)).proven
    with pytest.raises(ValueError):
        pullback(m(WIDE, WIDE, "(/ x1 eps)"))


def test_pullback_is_structurally_multiplicative():
    rng = np.random.default_rng(11)
    Phi = pullback(m(BOX, BOX, "(* 0.5 (sin (+ x1 eps)))", "(* x1 x2 0.9)"))
    atoms = ["x1", "(cos x2)", "(exp (* x1 x2))", "(+ x1 (* 3 x2))", "(atan x1)", "2"]
    for _ in range(100):
        a, b = rng.choice(atoms, 2)
        u, v = embed_smooth(a, BOX), embed_smooth(b, BOX)
        assert gf_eq(Phi(u * v), Phi(u) * Phi(v)).proven


def test_recover_map_examples():
    phi = m(WIDE, WIDE, "(+ x1 eps)")
    got = recover_map(pullback(phi))
    assert gf_eq(got.component(0), phi.component(0)).proven
    phi2 = m(BOX, BOX, "(sin (/ x1 (+ 1 eps)))", "(/ (* x2 x2) 4)")
    got, ev = recover_map(pullback(phi2), report=True)
    assert all(gf_eq(got.component(i), phi2.component(i)).proven for i in range(2))
    assert ev["uniqueness"] == "Proven"


def test_non_multiplicative_morphism_rejected():
    bad = AlgebraMorphism(lambda u: GF(WIDE, u.rep + partial(u.rep, (1,))), WIDE, WIDE, label="u + du")
    v, failures = audit_morphism(bad)
    assert v.refuted and failures
    with pytest.raises(MorphismAuditFailure) as info:
        recover_map(bad)
    assert info.value.probe


def test_factorization_examples():
    phi = m(WIDE, WIDE, "(* 0.5 (+ x1 eps))")
    Phi = pullback(phi)
    assert verify_factorization(Phi, phi)["status"] == "Proven"
    close = m(WIDE, WIDE, "(+ (* 0.5 (+ x1 eps)) (exp (neg (/ 1 eps))))")
    assert verify_factorization(pullback(close), phi)["status"] == "Proven"
    far = m(WIDE, WIDE, "(+ (* 0.5 (+ x1 eps)) (* 2 eps))")
    rep = verify_factorization(pullback(far), phi)
    assert rep["status"] == "Refuted" and rep["counts"]["Refuted"] > 0


def test_compose_examples():
    phi = m(WIDE, WIDE, "(* 0.5 (+ x1 eps))")
    assert compose_maps(phi, identity_map(WIDE)) == phi
    back = compose_maps(m(WIDE, WIDE, "(+ x1 eps)"), m(WIDE, WIDE, "(- x1 eps)"))
    assert gf_eq(back.component(0), embed_smooth("x1", WIDE)).proven
    two = compose_maps(m(WIDE, WIDE, "(+ x1 0.25)"), m(WIDE, WIDE, "(+ x1 0.5)"))
    assert E.evaluate_many(two.components[0], 0.1, [np.array([0.0])])[0] == 0.75
    with pytest.raises(ValueError):
        compose_maps(phi, m(BOX, BOX, "x1", "x2"))


def test_evaluation_compatibility():
    phi = m(BOX, BOX, "(* 0.5 (sin (+ x1 eps)))", "(* x1 x2 0.9)")
    rng = np.random.default_rng(5)
    pts = [random_point(BOX, 1 + k % 3, rng) for k in range(6)]
    rep = evaluation_compatibility(pullback(phi), phi, pts)
    assert rep["refuted"] == 0 and rep["total"] == 36


def test_isomorphism_shift():
    v = verify_isomorphism(pullback(m(WIDE, WIDE, "(+ x1 eps)")), pullback(m(WIDE, WIDE, "(- x1 eps)")))
    assert v.proven and v.evidence["dims"] == {"X": 1, "Y": 1}


def test_isomorphism_arctan():
    # (2/pi) atan maps (-1, 1) onto (-1/2, 1/2); tan(pi x / 2) is its inverse
    c = Fraction(2 / math.pi)
    fwd = CBoundedMap(UNIT, HALF, (E.const(c) * E.atan(E.x(1)),))
    t = E.const(Fraction(math.pi / 2)) * E.x(1)
    inv = CBoundedMap(HALF, UNIT, (E.sin(t) / E.cos(t),))
    v = verify_isomorphism(pullback(inv), pullback(fwd))
    assert v.consistent and not v.refuted


def test_non_injective_map_has_no_inverse():
    sq = m(UNIT, UNIT, "(* x1 x1)")
    v = verify_isomorphism(pullback(sq), pullback(identity_map(UNIT)))
    assert v.refuted
