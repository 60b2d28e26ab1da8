"""Generalized points recovered from their evaluation functionals.

Run: python3 demos/03_points_and_functionals.py
"""
import numpy as np

from colombeau_lab.gfun import DomainSpec, eval_at
from colombeau_lab.gpoints import (AuditFailure, Functional, evaluation_functional, point_equal,
                                   random_point, recover_point)

plane = DomainSpec(2, ((-2, 2), (-2, 2)))
rng = np.random.default_rng(0)
p = random_point(plane, 2, rng)
print("hidden point:", p)

got, ev = recover_point(evaluation_functional(p, plane), report=True)
print("recovered:   ", got, "| equal:", point_equal(got, p).status, "| unique:", ev["uniqueness"])

# a functional that is linear but not multiplicative is caught by the probe audit
q = random_point(plane, 1, rng)
nu = Functional(lambda u: eval_at(u, p) + eval_at(u, q), plane, "sum of two evaluations")
try:
    recover_point(nu)
except AuditFailure as exc:
    print("rejected:", exc)
