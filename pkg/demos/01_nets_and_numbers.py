"""Moderate and negligible nets, and the ring of generalized numbers.

Run: python3 demos/01_nets_and_numbers.py
"""
from colombeau_lab.asymptotics import fit_order, symbolic_valuation
from colombeau_lab.gnum import EpsSubset, GeneralizedNumber as GN, gn_eq, s_inverse, strictly_nonzero_on, witness_S

# a negligible net has no meaningful slope: the fit just reports a very large one
for text in ["(pow eps -3)", "(sin (/ 1 eps))", "(exp (neg (/ 1 eps)))", "(* eps (log eps))"]:
    r = GN(text)
    slope, _ = fit_order(r.rep)
    print(f"{text:28s} moderate={r.moderate.status:12s} negligible={r.negligible.status:12s} "
          f"valuation={symbolic_valuation(r.rep)} fitted slope={slope:+.3f}")

# adding a negligible net does not change the class
a, b = GN("eps"), GN("(+ eps (exp (neg (/ 1 eps))))")
print("eps == eps + exp(-1/eps):", gn_eq(a, b).status)

# sin(1/eps) is not invertible on all of (0, 1], but it is on a subset where it stays away from 0
r = GN("(sin (/ 1 eps))")
S, verdict = witness_S(r)
inv = s_inverse(r, S)
print(f"negligibility {verdict.status}; S-inverse with m = {inv.m}: {inv.verdict.status}")
print("strictly non-zero on all of (0, 1]:", strictly_nonzero_on(r, EpsSubset.whole())[0].status)
