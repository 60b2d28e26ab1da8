"""Executable special Colombeau algebras: nets, generalized numbers and functions, points, maps, torus isomorphisms."""
from .asymptotics import (DEFAULT_GRID, PROVEN, REFUTED, UNDETERMINED, EpsGrid, TabulatedNet, Verdict,
                          check_moderate, check_negligible, fit_order)
from .eps_dsl import EPS, Expr, parse, to_text
from .gfun import DomainSpec, GeneralizedFunction
from .gnum import EpsSubset, GeneralizedNumber
from .gpoints import Functional, GeneralizedPoint
from .morphisms import AlgebraMorphism, CBoundedMap
from .smooth_iso import TorusDiffeo, TorusIso, TorusModel

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_GRID", "PROVEN", "REFUTED", "UNDETERMINED", "EpsGrid", "TabulatedNet", "Verdict",
    "check_moderate", "check_negligible", "fit_order", "EPS", "Expr", "parse", "to_text",
    "DomainSpec", "GeneralizedFunction", "EpsSubset", "GeneralizedNumber", "Functional",
    "GeneralizedPoint", "AlgebraMorphism", "CBoundedMap", "TorusDiffeo", "TorusIso", "TorusModel",
]
