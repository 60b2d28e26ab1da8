"""c-bounded maps, pullback morphisms and their recovery.

Run: python3 demos/04_maps_and_pullbacks.py
"""
from colombeau_lab.eps_dsl import parse
from colombeau_lab.gfun import DomainSpec, gf_eq
from colombeau_lab.morphisms import (CBoundedMap, check_c_bounded, pullback, recover_map,
                                     verify_factorization, verify_isomorphism)

box = DomainSpec(2, ((-1, 1), (-1, 1)))
phi = CBoundedMap(box, box, (parse("(* 1/2 (sin (+ x1 eps)))"), parse("(* 9/10 x1 x2)")))
print("c-bounded:", check_c_bounded(phi).status)

Phi = pullback(phi)
got = recover_map(Phi)
print("recovered components agree:", [gf_eq(got.component(i), phi.component(i)).status for i in range(2)])
print("Phi(u) = u o phi over the corpus:", verify_factorization(Phi, phi)["status"])

wide = DomainSpec(1, ((-2, 2),))
shift = CBoundedMap(wide, wide, (parse("(+ x1 eps)"),))
back = CBoundedMap(wide, wide, (parse("(- x1 eps)"),))
v = verify_isomorphism(pullback(shift), pullback(back))
print("x -> x + eps is an isomorphism:", v.status, v.evidence["dims"])

blowup = CBoundedMap(wide, wide, (parse("(/ x1 eps)"),))
print("x -> x / eps is c-bounded:", check_c_bounded(blowup).status)
