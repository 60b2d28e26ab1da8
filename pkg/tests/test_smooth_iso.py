import math

import numpy as np
import pytest

from colombeau_lab.eps_dsl import parse
from colombeau_lab.smooth_iso import (
    ExtractionError, IsoAuditFailure, PeriodicityError, TorusDiffeo, TorusModel, TrigFunction,
    audit_iso, coordinate_derivation, derivation_pullback, diffeo_corpus, diffeo_distance,
    extract_diffeo, holomorphic_closure_check, lift_report, norm_report, pullback_iso,
    resolvent_check, scaled_iso, seminorm, spectral_radius, spectrum_range, sup_norm,
    verify_norm_preservation, verify_seminorm_transfer,
)

T1 = TorusModel(1)


def iso(text, M=T1):
    comps = [text] if isinstance(text, str) else text
    return pullback_iso(TorusDiffeo.from_exprs(comps, M))


def test_periodicity_is_checked():
    T1.check_periodic("(cos x1)")
    with pytest.raises(PeriodicityError):
        T1.check_periodic("x1")
    with pytest.raises(PeriodicityError):
        T1.check_periodic("(* eps (cos x1))")


def test_norm_examples():
    assert sup_norm("(cos x1)", T1) == pytest.approx(1.0, abs=1e-12)
    lo, hi = spectrum_range("(cos x1)", T1)
    assert lo == pytest.approx(-1, abs=1e-12) and hi == pytest.approx(1, abs=1e-12)
    assert spectral_radius("(+ 2 (cos x1))", T1) == pytest.approx(3.0, abs=1e-12)
    f = "(+ (cos x1) (* 0.5 (cos (* 2 x1))))"
    dense = np.linspace(0, 2 * np.pi, 2_000_001)
    oracle = np.max(np.abs(np.cos(dense) + 0.5 * np.cos(2 * dense)))
    assert spectral_radius(f, T1) == pytest.approx(oracle, abs=1e-6)
    assert norm_report(f, T1)["refinement_discrepancy"] < 1e-6


def test_resolvent_examples():
    v = resolvent_check("(cos x1)", 2, T1)
    assert v.proven and v.evidence["inverse_bound"] == pytest.approx(1.0)
    v = resolvent_check("(cos x1)", 0.5, T1)
    assert v.refuted
    assert any(abs(t - math.pi / 3) < 1e-12 for t in v.evidence["witness_theta"])
    assert resolvent_check("(cos x1)", 1j, T1).proven


def test_holomorphic_closure_examples():
    assert holomorphic_closure_check("(+ 2 (cos x1))", T1).proven
    assert holomorphic_closure_check("(cos x1)", T1).refuted
    assert holomorphic_closure_check("(+ 0.01 (cos x1))", T1).refuted
    assert holomorphic_closure_check("(+ 1.01 (cos x1))", T1).proven


def test_trig_interpolation_derivative():
    tf = TrigFunction.from_expr(parse("(exp (sin x1))"), T1)
    th = T1.thetas()
    assert np.max(np.abs(tf.derivative(0).flat() - np.cos(th[:, 0]) * np.exp(np.sin(th[:, 0])))) < 1e-10
    off = np.array([[0.123], [4.56]])
    assert np.allclose(tf(off), np.exp(np.sin(off[:, 0])), atol=1e-12)


def test_seminorm_examples():
    D = coordinate_derivation(T1)
    assert seminorm("(cos x1)", [D], T1) == pytest.approx(1.0, abs=1e-12)
    assert seminorm("(+ 2 (cos x1))", [], T1) == pytest.approx(3.0, abs=1e-12)
    assert seminorm("(cos x1)", [D, D], T1) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        seminorm("(cos x1)", [D] * 4, T1)


def test_derivation_pullback_examples():
    D = coordinate_derivation(T1)
    for text in ("x1", "(+ x1 1)"):
        pb = derivation_pullback(iso(text), D)
        assert np.max(np.abs(pb.derivation.coeffs[0].flat() - 1.0)) < 1e-12
        assert pb.verdict.consistent
    psi = TorusDiffeo.from_exprs(["(+ x1 (* 0.3 (sin x1)))"], T1)
    pb = derivation_pullback(pullback_iso(psi), D)
    # chain rule: (psi^* d)(f) = f' * psi'(psi^-1) so the coefficient is 1 + 0.3 cos(psi^-1)
    inv = psi.inverse(T1.thetas())[:, 0]
    assert np.max(np.abs(pb.derivation.coeffs[0].flat() - (1 + 0.3 * np.cos(inv)))) < 1e-8
    assert pb.leibniz_defect < 1e-8


def test_norm_and_seminorm_transfer():
    rot = verify_norm_preservation(iso("(+ x1 1)"))
    assert rot["ok"] and rot["max_error"] < 1e-12
    wob = iso("(+ x1 (* 0.3 (sin x1)))")
    assert verify_norm_preservation(wob)["max_error"] < 1e-10
    sn = verify_seminorm_transfer(wob)
    assert sn["ok"] and sn["max_error"] < 1e-6


def test_scaled_map_is_rejected():
    assert audit_iso(scaled_iso(T1, 2.0)).refuted
    with pytest.raises(IsoAuditFailure):
        verify_norm_preservation(scaled_iso(T1, 2.0))
    with pytest.raises(IsoAuditFailure):
        extract_diffeo(scaled_iso(T1, 2.0))


@pytest.mark.parametrize("label,text", diffeo_corpus())
def test_extraction_roundtrip(label, text):
    psi = TorusDiffeo.from_exprs([text], T1)
    got, ev = extract_diffeo(pullback_iso(psi), report=True)
    assert diffeo_distance(got, psi) <= 1e-8
    assert ev["newton_residual"] <= 1e-12
    assert got.orientation == psi.orientation


def test_reflection_orientation():
    got = extract_diffeo(iso("(- 0 x1)"))
    assert got.orientation == -1 and got.certificate()["ok"]


def test_non_diffeo_rejected():
    fold = pullback_iso(TorusDiffeo(T1, [[1]], [parse("(* 1.5 (sin x1))")]))
    with pytest.raises(ExtractionError):
        extract_diffeo(fold)


def test_two_torus_extraction():
    T2 = TorusModel(2, 48)
    psi = TorusDiffeo.from_exprs(["(+ x1 x2)", "(+ x2 (* 0.2 (sin x1)))"], T2)
    got = extract_diffeo(pullback_iso(psi))
    assert diffeo_distance(got, psi) <= 1e-8
    assert got.A.tolist() == [[1, 1], [0, 1]]


def test_lift_preserves_categories_and_orders():
    rep = lift_report(iso("(+ x1 (* 0.3 (sin x1)))"))
    assert rep["ok"]
    grow = [r for r in rep["rows"] if r["net"].startswith("(* (pow eps -2)") and "slope_before" in r]
    assert grow and all(abs(r["slope_before"] - r["slope_after"]) < 1e-9 for r in grow)
    assert all(abs(r["slope_after"] + 2) < 1e-6 for r in grow)
