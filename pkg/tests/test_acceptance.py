"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line (tolerance, runtime, budget) that the
conftest prints under "acceptance criteria" at the end of the run.
"""
import json
import math
import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from colombeau_lab import eps_dsl as E
from colombeau_lab.eps_dsl import parse
from colombeau_lab.gfun import (
    DomainSpec, GeneralizedFunction as GF, association_pairing, bump, embed_delta, embed_heaviside,
    eval_at, gf_eq, pointwise_invertibility_audit,
)
from colombeau_lab.gnum import (
    EpsSubset, GeneralizedNumber as GN, NotModerateError, gn_eq, s_inverse, witness_S,
)
from colombeau_lab.gpoints import (
    AuditFailure, Functional, evaluation_functional, point_equal, random_point, recover_point,
)
from colombeau_lab.morphisms import (
    CBoundedMap, pullback, recover_map, verify_factorization, verify_isomorphism,
)
from colombeau_lab.smooth_iso import (
    TorusDiffeo, TorusModel, diffeo_corpus, diffeo_distance, extract_diffeo, lift_report,
    pullback_iso, spectral_radius, verify_norm_preservation, verify_seminorm_transfer,
)

LINE = DomainSpec(1, ((-1, 1),))
WIDE = DomainSpec(1, ((-2, 2),))
BOX = DomainSpec(2, ((-1, 1), (-1, 1)))
T1 = TorusModel(1)

GN_ATOMS = ["eps", "(pow eps -2)", "(sin (/ 1 eps))", "(+ 1 eps)", "(log eps)", "3",
            "(exp (neg (/ 1 eps)))", "(cos (/ 2 eps))", "(* (pow eps 3) (sin (/ 1 eps)))", "-1/2"]
GF_ATOMS = ["x1", "(sin (/ x1 eps))", "(* (pow eps -1) (cos x1))", "(exp x1)", "(+ x1 eps)",
            "(atan (/ x1 eps))", "2", "(* x1 x1 (log eps))"]


def _never_refuted(pairs):
    verdicts = [eq(a, b) for eq, a, b in pairs]
    return sum(v.refuted for v in verdicts), sum(v.proven for v in verdicts), len(verdicts)


def test_ring_axioms(criterion):
    with criterion(1, "ring axioms never refuted on 200 number + 100 function triples",
                   limit=30) as c:
        rng = np.random.default_rng(0)
        nums = [GN(a) for a in GN_ATOMS]
        funs = [GF(LINE, a) for a in GF_ATOMS]
        checks = []
        for pool, eq, count in ((nums, gn_eq, 200), (funs, gf_eq, 100)):
            for _ in range(count):
                a, b, d = (pool[i] for i in rng.integers(0, len(pool), 3))
                checks += [(eq, (a + b) + d, a + (b + d)), (eq, (a * b) * d, a * (b * d)),
                           (eq, a + b, b + a), (eq, a * b, b * a), (eq, a * (b + d), a * b + a * d)]
        refuted, proven, total = _never_refuted(checks)
        c.ok = refuted == 0
        c.detail = f"refuted {refuted}/{total}, proven {proven}/{total}"
    assert c.passed, c.detail


def _net_corpus():
    decaying = ["(exp (neg (/ 1 eps)))", "(neg (exp (neg (/ 1 eps))))",
                "(* (pow eps -3) (exp (neg (/ 1 eps))))", "(exp (neg (/ 2 eps)))",
                "(* (exp (neg (/ 1 eps))) (sin (/ 1 eps)))", "(exp (neg (pow eps -1/2)))",
                "(* (pow eps -5) (exp (neg (/ 1 eps))))", "0",
                "(* (exp (neg (/ 1 eps))) (cos (/ 3 eps)))",
                "(- (+ eps (exp (neg (/ 1 eps)))) eps)"]
    moderate = ["eps", "(pow eps 2)", "(pow eps 5)", "(pow eps -2)", "1", "(+ 1 eps)", "(log eps)",
                "(sin (/ 1 eps))", "(cos (/ 1 eps))", "(* eps (sin (/ 1 eps)))", "(- 2 eps)",
                "(pow eps 11)", "(atan (/ 1 eps))", "(* (pow eps 3) (+ 2 (cos (/ 1 eps))))",
                "(/ 1 (+ 1 eps))", "(* eps (log eps))", "(exp eps)", "(+ (pow eps 4) (pow eps 7))",
                "(sin eps)", "(- (pow eps 2) (pow eps 3))", "(pow eps 1/2)", "(* -5 (pow eps 6))",
                "(+ (sin (/ 1 eps)) 2)", "(smoothstep (/ 1 eps))", "(* (pow eps -1) (sin (/ 1 eps)))",
                "(cos (/ 5 eps))", "(- 0 (pow eps 8))", "(* 7 (pow eps 12))", "(+ 1/3 (pow eps 2))",
                "(/ eps (+ 2 (sin (/ 1 eps))))"]
    return decaying + moderate


def test_negligible_iff_no_witness(criterion):
    with criterion(2, "negligible <=> no witness S; S-inverse defect <= eps^12 on first 30 samples",
                   limit=20) as c:
        corpus = _net_corpus()
        assert len(corpus) == 40
        bad = []
        for text in corpus:
            r = GN(text)
            S, verdict = witness_S(r)
            if verdict.proven != (S is None) or not (verdict.proven or verdict.refuted):
                bad.append((text, verdict.status, S is not None))
                continue
            if S is not None:
                inv = s_inverse(r, S)
                first = S.samples(r.grid.eps_min)[:30]
                defect = np.abs(inv.rprime.values(first) - 1.0)
                if not np.all(defect <= first ** 12) or inv.verdict.refuted:
                    bad.append((text, "defect", float(defect.max())))
        with pytest.raises(NotModerateError):
            GN("(exp (/ 1 eps))")
        c.ok = not bad
        c.detail = f"{len(corpus)} nets, violations {bad}"
    assert c.passed, c.detail


INVERTIBLE = ["(+ 2 (sin x1))", "(exp x1)", "1", "eps", "(+ 1 (* x1 x1))", "(* eps (+ 2 (cos x1)))",
              "(- 3 x1)", "(cos x1)", "(* (pow eps 2) (+ 1 (* x1 x1)))", "(pow eps -1)"]
NON_INVERTIBLE = ["x1", "(- x1 1/5)", "(+ x1 3/10)", "(sin (* 2 x1))", "(* x1 x1)",
                  "(* x1 (+ 2 (cos x1)))", "(* eps x1)", "(+ x1 eps)", "(- (* x1 x1 x1) (/ x1 10))",
                  "(atan (- x1 1/4))"]


def test_pointwise_invertibility(criterion):
    with criterion(3, "pointwise invertibility audit, both directions, 10 + 10 functions",
                   limit=60) as c:
        S = EpsSubset.whole()
        bad = []
        for text in INVERTIBLE:
            v, pt = pointwise_invertibility_audit(GF(LINE, text), S)
            if v.refuted or v.evidence["panel_failures"] or pt is not None:
                bad.append(("forward", text, v.status))
        for text in NON_INVERTIBLE:
            v, pt = pointwise_invertibility_audit(GF(LINE, text), S)
            neg = v.evidence.get("witness_value_negligible_on_S", {})
            if not v.proven or pt is None or neg.get("status") == "Refuted":
                bad.append(("reverse", text, v.status))
        c.ok = not bad
        c.detail = f"failures {bad}"
    assert c.passed, c.detail


def test_point_recovery(criterion):
    with criterion(4, "50 points recovered from evaluation; 3 adversarial functionals rejected",
                   limit=30) as c:
        rng = np.random.default_rng(0)
        dom = DomainSpec(2, ((-2, 2), (-1, 3)))
        missed = []
        for k in range(50):
            p = random_point(dom, 1 + k % 3, rng)
            got = recover_point(evaluation_functional(p, dom))
            if not point_equal(got, p).proven:
                missed.append(k)
        a, b = random_point(dom, 1, rng), random_point(dom, 2, rng)
        adversaries = [
            Functional(lambda u: eval_at(u, a) + eval_at(u, b), dom, "sum of evaluations"),
            Functional(lambda u: eval_at(u, a) * 2, dom, "twice an evaluation"),
            Functional(lambda u: eval_at(u * u, a), dom, "evaluation of the square"),
        ]
        accepted = []
        for nu in adversaries:
            try:
                recover_point(nu)
                accepted.append(nu.label)
            except AuditFailure:
                pass
        c.ok = not missed and not accepted
        c.detail = f"unrecovered {missed}, accepted adversaries {accepted}"
    assert c.passed, c.detail


def _rand_coeff(rng, scale):
    return Fraction(int(rng.integers(-9, 10)), 10) * scale


def _map_corpus():
    rng = np.random.default_rng(0)
    maps = []
    for _ in range(15):
        c, a, b = (_rand_coeff(rng, Fraction(1, 2)) for _ in range(3))
        maps.append(CBoundedMap(WIDE, WIDE, (parse(f"(+ {c} (* {a} x1) (* {b} (sin (+ x1 eps))))"),)))
    for _ in range(15):
        comps = []
        for i in (1, 2):
            c, a, b, d = (_rand_coeff(rng, Fraction(1, 5)) for _ in range(4))
            comps.append(parse(f"(+ {c} (* {a} x{i}) (* {b} (sin x{3 - i})) (* {d} eps (cos (/ x1 eps))))"))
        maps.append(CBoundedMap(BOX, BOX, tuple(comps)))
    return maps


def _iso_fixtures():
    strip = DomainSpec(2, ((-2, 2), (0, 1)))
    wide2 = DomainSpec(2, ((-2, 2), (-2, 2)))
    pairs = [
        (WIDE, WIDE, ["(+ x1 eps)"], ["(- x1 eps)"]),
        (WIDE, LINE, ["(/ x1 2)"], ["(* 2 x1)"]),
        (BOX, BOX, ["x2", "x1"], ["x2", "x1"]),
        (BOX, strip, ["(* 2 x1)", "(/ (+ x2 1) 2)"], ["(/ x1 2)", "(- (* 2 x2) 1)"]),
        (wide2, wide2, ["(+ x1 eps)", "(- x2 (pow eps 2))"], ["(- x1 eps)", "(+ x2 (pow eps 2))"]),
    ]
    out = []
    for src, tgt, fwd, inv in pairs:
        phi = CBoundedMap(src, tgt, tuple(parse(t) for t in fwd))
        psi = CBoundedMap(tgt, src, tuple(parse(t) for t in inv))
        out.append((phi, psi))
    return out


def test_map_recovery_and_isomorphisms(criterion):
    with criterion(5, "30 maps recovered from pullbacks, factorization Proven, 5 isomorphisms Proven",
                   limit=60) as c:
        bad = []
        maps = _map_corpus()
        for n, phi in enumerate(maps):
            Phi = pullback(phi)
            got = recover_map(Phi)
            if not all(gf_eq(got.component(i), phi.component(i)).proven for i in range(phi.target.dim)):
                bad.append(("recover", n))
            if verify_factorization(Phi, phi)["status"] != "Proven":
                bad.append(("factor", n))
        for n, (phi, psi) in enumerate(_iso_fixtures()):
            # Phi = phi^* runs from functions on the target of phi to functions on its source
            v = verify_isomorphism(pullback(phi), pullback(psi))
            dims = v.evidence.get("dims", {})
            if not v.proven or dims.get("X") != dims.get("Y"):
                bad.append(("iso", n, v.status))
        c.ok = not bad
        c.detail = f"{len(maps)} maps, failures {bad}"
    assert c.passed, c.detail


# sup norms known in closed form
SUP_ORACLE = [
    ("(cos x1)", 1.0), ("(sin x1)", 1.0), ("(* 3 (cos (* 2 x1)))", 3.0), ("(+ 2 (cos x1))", 3.0),
    ("(- (cos x1) 2)", 3.0), ("(exp (sin x1))", math.e), ("(exp (cos x1))", math.e),
    ("(/ 1 (+ 3 (cos x1)))", 0.5), ("(atan (cos x1))", math.pi / 4), ("(* (sin x1) (cos x1))", 0.5),
    ("(* (cos x1) (cos x1))", 1.0), ("(+ (sin x1) (cos x1))", math.sqrt(2)),
    ("(- (* 3 (sin x1)) (* 4 (cos x1)))", 5.0), ("(sin (+ x1 1/3))", 1.0),
    ("(/ 1 (+ 2 (sin x1)))", 1.0), ("(* 1/2 (cos (* 5 x1)))", 0.5), ("(+ 1/4 (* 1/4 (sin (* 3 x1))))", 0.5),
    ("(exp (neg (sin x1)))", math.e), ("(- 0 (* (sin x1) (sin x1)))", 1.0), ("(cos (sin x1))", 1.0),
]


def test_torus_pipeline(criterion):
    with criterion(6, "circle: r(f) = sup within 1e-12, transfer, lift, extraction within 1e-8",
                   limit=90) as c:
        radius_err = max(abs(spectral_radius(f, T1) - sup) for f, sup in SUP_ORACLE)
        norm_err = transfer_err = extract_err = newton = 0.0
        lift_ok, orient_ok = True, True
        for label, text in diffeo_corpus():
            psi = TorusDiffeo.from_exprs([text], T1)
            Psi = pullback_iso(psi, label)
            nr = verify_norm_preservation(Psi)
            norm_err = max(norm_err, max(r["error"] / (1 + r["r_f"]) for r in nr["rows"]))
            transfer_err = max(transfer_err, verify_seminorm_transfer(Psi)["max_error"])
            got, ev = extract_diffeo(Psi, report=True)
            extract_err = max(extract_err, diffeo_distance(got, psi))
            newton = max(newton, ev["newton_residual"])
            orient_ok = orient_ok and got.orientation == psi.orientation
            rep = lift_report(Psi)
            lift_ok = lift_ok and rep["ok"] and len(rep["rows"]) == 40 and all(
                r["before"] == r["after"] for r in rep["rows"])
        c.ok = (radius_err <= 1e-12 and norm_err <= 1e-9 and transfer_err <= 1e-6 and lift_ok
                and extract_err <= 1e-8 and newton <= 1e-12 and orient_ok)
        c.detail = (f"radius {radius_err:.1e} (tol 1e-12), norm {norm_err:.1e} (tol 1e-9), "
                    f"seminorm {transfer_err:.1e} (tol 1e-6), extraction {extract_err:.1e} (tol 1e-8), "
                    f"newton {newton:.1e}, lift categories {'kept' if lift_ok else 'CHANGED'}")
    assert c.passed, c.detail


def test_heaviside_and_delta(criterion):
    from colombeau_lab.gpoints import GeneralizedPoint
    with criterion(7, "(H^2 - H)(0) = -1/4 within 1e-12; delta pairing -> psi(0) within 1e-5",
                   limit=20) as c:
        H = embed_heaviside(LINE)
        val = eval_at(H * H - H, GeneralizedPoint(("0",)))
        h_err = float(np.max(np.abs(val.values(val.grid.eps) + 0.25)))
        delta = embed_delta(LINE)
        t = E.x(1) * E.const(2)
        tests = [(bump(t) * E.cos(E.x(1)), 1.0), (bump(t) * (E.const(2) + E.sin(E.x(1))), 2.0),
                 (bump(t) * E.exp(E.x(1) - E.const(Fraction(1, 2))), math.exp(-0.5))]
        pair_err = 0.0
        for psi, at0 in tests:
            pr = association_pairing(delta, psi, delta.grid, support=(-0.5, 0.5))
            tail = pr.values[-5:]
            pair_err = max(pair_err, float(np.max(np.abs(tail - at0))))
        c.ok = h_err <= 1e-12 and pair_err <= 1e-5
        c.detail = f"H error {h_err:.1e} (tol 1e-12), pairing tail error {pair_err:.1e} (tol 1e-5)"
    assert c.passed, c.detail


def test_suite_is_reproducible(criterion):
    with criterion(8, "acceptance manifest twice with --seed 0 gives byte-identical JSON", limit=None) as c:
        env = {**os.environ, "PYTHONPATH": os.pathsep.join(sys.path)}
        cmd = [sys.executable, "-m", "colombeau_lab.cli", "suite", "--json", "--seed", "0"]
        runs = [subprocess.run(cmd, capture_output=True, env=env, check=False) for _ in range(2)]
        summary = json.loads(runs[0].stdout)["summary"]
        c.ok = runs[0].stdout == runs[1].stdout and summary["fail"] == summary["error"] == 0
        c.detail = f"{len(runs[0].stdout)} bytes each, identical={runs[0].stdout == runs[1].stdout}, summary {summary}"
    assert c.passed, c.detail
