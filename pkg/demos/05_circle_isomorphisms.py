"""Algebra isomorphisms of smooth functions on the circle and the diffeomorphisms behind them.

Run: python3 demos/05_circle_isomorphisms.py
"""
from colombeau_lab.smooth_iso import (TorusDiffeo, TorusModel, diffeo_distance, extract_diffeo, lift_report,
                                      pullback_iso, scaled_iso, audit_iso, spectral_radius,
                                      verify_norm_preservation, verify_seminorm_transfer)

T = TorusModel(1)
print("spectral radius of cos x + cos(2x)/2:", spectral_radius("(+ (cos x1) (* 0.5 (cos (* 2 x1))))", T))

psi = TorusDiffeo.from_exprs(["(+ x1 (* 0.3 (sin x1)))"], T)
Psi = pullback_iso(psi, "wobble")
print("norms preserved:", verify_norm_preservation(Psi)["max_error"])
print("seminorms transferred:", verify_seminorm_transfer(Psi)["max_error"])

got, ev = extract_diffeo(Psi, report=True)
print("extracted diffeo distance:", diffeo_distance(got, psi), "newton residual:", ev["newton_residual"])

rep = lift_report(Psi)
print("lift keeps moderate/negligible categories:", rep["ok"], f"({len(rep['rows'])} nets)")

print("doubling f -> 2f passes the algebra audit?", audit_iso(scaled_iso(T, 2.0)).status)
