"""Generalized functions on an open box: delta, Heaviside, association.

Run: python3 demos/02_generalized_functions.py
"""
from colombeau_lab import eps_dsl as E
from colombeau_lab.asymptotics import DEFAULT_GRID, fit_order
from colombeau_lab.gfun import (DomainSpec, association_pairing, bump, embed_delta, embed_heaviside,
                                eval_at, seminorm_net)
from colombeau_lab.gpoints import GeneralizedPoint

line = DomainSpec(1, ((-1, 1),))
H, delta = embed_heaviside(line), embed_delta(line)

for k in range(3):
    slope, _ = fit_order(seminorm_net(delta, 1, (k,)))
    print(f"sup |delta^({k})| on K_1 grows like eps^{slope:+.2f}")

# the product H*H differs from H, visibly at the origin
val = eval_at(H * H - H, GeneralizedPoint(("0",)))
print("(H^2 - H)(0) on the first grid points:", val.values(DEFAULT_GRID.eps[:3]))

# but delta still acts as the point evaluation against test functions
psi = bump(E.x(1) * E.const(2)) * (E.const(2) + E.sin(E.x(1)))
pr = association_pairing(delta, psi, DEFAULT_GRID, support=(-0.5, 0.5))
print("int delta_eps psi ->", pr.values[-1], "(psi(0) = 2)")
