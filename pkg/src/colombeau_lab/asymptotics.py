"""Asymptotic order of eps-nets: exact on a symbolic fragment, empirical otherwise.

The valuation of a net r is v(r) = sup{a : |r_eps| = O(eps^a)}.  A net is
moderate iff v(r) > -inf and negligible iff v(r) = +inf.  The symbolic engine
returns an interval guaranteed to contain v(r); grid sampling supplies
evidence when the interval does not decide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .eps_dsl import (Expr, evaluate_many, free_vars, is_identically_zero,
                      normal_form, smoothstep_derivatives)

INF = math.inf

PROVEN, REFUTED, UNDETERMINED = "Proven", "Refuted", "Undetermined"


@dataclass(frozen=True)
class EpsGrid:
    ratio: float = 0.5
    k_min: int = 4
    k_max: int = 40

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise ValueError("grid ratio must lie in (0, 1)")
        if not self.k_max > self.k_min >= 0:
            raise ValueError("need k_max > k_min >= 0")
        if self.ratio ** self.k_max < 1e-300:
            raise ValueError("grid underflows below 1e-300")

    @property
    def eps(self) -> np.ndarray:
        return self.ratio ** np.arange(self.k_min, self.k_max + 1, dtype=float)

    @property
    def eps_max(self) -> float:
        return self.ratio ** self.k_min

    @property
    def eps_min(self) -> float:
        return self.ratio ** self.k_max

    def tail_mask(self, eps=None):
        """Samples in the last decade of the grid."""
        eps = self.eps if eps is None else eps
        return eps <= 10.0 * eps.min()

    def to_dict(self):
        return {"ratio": self.ratio, "k_min": self.k_min, "k_max": self.k_max}


DEFAULT_GRID = EpsGrid()
N_MAX = 12
M_MAX = 12
TOL_ZERO = 1e-12


@dataclass(frozen=True)
class Valuation:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty valuation [{self.lo}, {self.hi}]")

    @property
    def exact(self):
        return self.lo == self.hi


@dataclass
class Verdict:
    status: str
    evidence: dict = field(default_factory=dict)

    @property
    def proven(self):
        return self.status == PROVEN

    @property
    def refuted(self):
        return self.status == REFUTED

    @property
    def consistent(self):
        """Proven, or empirically consistent with the claim."""
        return self.status == PROVEN or (self.status == UNDETERMINED and self.evidence.get("consistent", False))

    def to_dict(self):
        base = {"status": self.status, "slope": None, "residual": None, "witnesses": [], "rule_trace": []}
        return {**base, **_jsonable(self.evidence)}

    def __bool__(self):
        raise TypeError("use .proven / .refuted / .consistent on a Verdict")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (EpsGrid, Valuation, Verdict)):
        return _jsonable(obj.to_dict() if hasattr(obj, "to_dict") else vars(obj))
    return obj


@dataclass(frozen=True)
class TabulatedNet:
    """A net known only through its samples, e.g. a seminorm sup over a lattice."""

    eps: np.ndarray
    values: np.ndarray
    eps_independent: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __hash__(self):
        return id(self)


def _values(net, grid: EpsGrid):
    if isinstance(net, TabulatedNet):
        return net.eps, np.abs(np.asarray(net.values, dtype=float))
    eps = grid.eps
    return eps, np.abs(evaluate_many(net, eps))


# ------------------------------------------------------------- range analysis

def _sin_range(lo, hi):
    if hi - lo >= 2 * math.pi:
        return (-1.0, 1.0)
    vals = [math.sin(lo), math.sin(hi)]
    k = math.ceil((lo - math.pi / 2) / math.pi)
    while math.pi / 2 + k * math.pi <= hi:
        vals.append(1.0 if k % 2 == 0 else -1.0)
        k += 1
    return (min(vals), max(vals))


@lru_cache(maxsize=None)
def _dss_bound(k):
    t = np.linspace(0, 1, 20001)
    return 1.05 * float(np.max(np.abs(smoothstep_derivatives(t, k)[k])))


def _imul(a, b):
    ps = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    ps = [0.0 if math.isnan(p) else p for p in ps]
    return (min(ps), max(ps))


def _finite(r):
    return r is not None and math.isfinite(r[0]) and math.isfinite(r[1])


@lru_cache(maxsize=65536)
def range_bounds(e: Expr, box=None, eps_max: float = 1.0):
    """Interval containing e(eps, x) for eps in (0, eps_max] and x in ``box``.

    ``box`` is a tuple of (lo, hi) per coordinate; None means coordinates are
    unconstrained.  Returns None when no finite enclosure is found.
    """
    op = e.op
    if op == "const":
        c = float(e.value)
        return (c, c)
    if op == "eps":
        return (0.0, eps_max)
    if op == "x":
        if box is None or e.value > len(box):
            return None
        return tuple(map(float, box[e.value - 1]))
    if op == "smoothstep":
        r = range_bounds(e.args[0], box, eps_max)
        if r is None:
            return (0.0, 1.0)
        s = smoothstep_derivatives(np.array(r), 0)[0]
        return (float(s[0]), float(s[1]))
    if op == "dsmoothstep":
        b = _dss_bound(e.value)
        return (-b, b)
    r = range_bounds(e.args[0], box, eps_max) if e.args else None
    if op in ("sin", "cos"):
        if not _finite(r):
            return (-1.0, 1.0)
        shift = 0.0 if op == "sin" else math.pi / 2
        return _sin_range(r[0] + shift, r[1] + shift)
    if op == "atan":
        if r is None:
            return (-math.pi / 2, math.pi / 2)
        return (math.atan(r[0]), math.atan(r[1]))
    if not _finite(r):
        return None
    if op == "neg":
        return (-r[1], -r[0])
    if op == "abs":
        if r[0] >= 0:
            return r
        if r[1] <= 0:
            return (-r[1], -r[0])
        return (0.0, max(-r[0], r[1]))
    if op == "exp":
        if r[1] > 700:
            return None
        return (math.exp(r[0]), math.exp(r[1]))
    if op == "log":
        if r[0] <= 0:
            return None
        return (math.log(r[0]), math.log(r[1]))
    if op == "pow":
        q = e.value
        if q.denominator == 1:
            n = int(q)
            if n < 0:
                if r[0] <= 0 <= r[1]:
                    return None
                inv = (1.0 / r[1], 1.0 / r[0])
                r, n = inv, -n
            if n % 2 == 0:
                a = 0.0 if r[0] <= 0 <= r[1] else min(abs(r[0]), abs(r[1])) ** n
                out = (a, max(abs(r[0]), abs(r[1])) ** n)
            else:
                out = (r[0] ** n, r[1] ** n)
        else:
            lo, hi = max(r[0], 0.0), max(r[1], 0.0)
            if q < 0:
                if lo <= 0:
                    return None
                out = (hi ** float(q), lo ** float(q))
            else:
                out = (lo ** float(q), hi ** float(q))
        return out if _finite(out) else None
    r2 = range_bounds(e.args[1], box, eps_max)
    if not _finite(r2):
        return None
    if op == "add":
        out = (r[0] + r2[0], r[1] + r2[1])
    elif op == "sub":
        out = (r[0] - r2[1], r[1] - r2[0])
    elif op == "mul":
        out = _imul(r, r2)
    elif op == "div":
        if r2[0] <= 0 <= r2[1]:
            return None
        out = _imul(r, (1.0 / r2[1], 1.0 / r2[0]))
    else:
        return None
    return out if _finite(out) else None


# ------------------------------------------------------------ symbolic orders

class _Info(NamedTuple):
    lo: float       # |e| = O(eps^(lo - d)) for all d > 0
    hi: float       # v(e) <= hi
    up: float       # |e| >= c eps^(up + d) eventually (lower bound); +inf if unknown
    sign: int | None
    bounded: bool


def _plus(a, b, unknown):
    s = a + b
    return unknown if math.isnan(s) else s


def _times(q, a):
    return 0.0 if q == 0 else q * a


_ZERO_INFO = _Info(INF, INF, INF, None, True)


@lru_cache(maxsize=65536)
def _info(e: Expr, box, eps_max) -> _Info:
    info = _rule(e, box, eps_max)
    r = range_bounds(e, box, eps_max)
    if _finite(r) and r == (0.0, 0.0):
        # float intervals can cancel a tiny exact constant down to zero
        if is_identically_zero(e):
            return _ZERO_INFO
        r = None
    if _finite(r):
        lo, hi, up, sign, _ = info
        lo = max(lo, 0.0)
        if r[0] > 0 or r[1] < 0:
            up = min(up, 0.0)
            sign = 1 if r[0] > 0 else -1
        info = _Info(lo, min(hi, up), up, sign, True)
    return info


def _rule(e: Expr, box, eps_max) -> _Info:
    op = e.op
    if op == "const":
        if e.value == 0:
            return _ZERO_INFO
        return _Info(0.0, 0.0, 0.0, 1 if e.value > 0 else -1, True)
    if op == "eps":
        return _Info(1.0, 1.0, 1.0, 1, True)
    if op == "x":
        return _Info(0.0, INF, INF, None, True)
    a = _info(e.args[0], box, eps_max)
    if op == "neg":
        return a._replace(sign=None if a.sign is None else -a.sign)
    if op in ("add", "sub", "mul", "div"):
        b = _info(e.args[1], box, eps_max)
        if op == "div":
            b = _pow_info(b, -1, positive_base=False)
        if op in ("mul", "div"):
            lo = _plus(a.lo, b.lo, -INF)
            up = _plus(a.up, b.up, INF)
            hi = min(_plus(a.hi, b.up, INF), _plus(b.hi, a.up, INF), up)
            sign = a.sign * b.sign if a.sign is not None and b.sign is not None else None
            return _Info(lo, hi, up, sign, (a.bounded and b.bounded) or lo > 0)
        bsign = b.sign if (b.sign is None or op == "add") else -b.sign
        lo = min(a.lo, b.lo)
        if a.hi < b.lo:
            hi = a.hi
        elif b.hi < a.lo:
            hi = b.hi
        else:
            hi = INF
        if a.lo > b.up:
            up, sign = b.up, bsign
        elif b.lo > a.up:
            up, sign = a.up, a.sign
        elif a.sign is not None and a.sign == bsign:
            up, sign = min(a.up, b.up), a.sign
        else:
            up, sign = INF, None
        return _Info(lo, min(hi, up), up, sign, a.bounded and b.bounded)
    if op == "pow":
        return _pow_info(a, e.value, positive_base=e.value.denominator != 1)
    if op == "exp":
        if a.sign == -1 and a.up < 0:
            return _Info(INF, INF, INF, 1, True)
        if a.sign == 1 and a.up < 0:
            return _Info(-INF, -INF, -INF, 1, False)
        if a.bounded:
            return _Info(0.0, 0.0, 0.0, 1, True)
        return _Info(-INF, INF, INF, 1, False)
    if op == "log":
        if math.isfinite(a.lo) and math.isfinite(a.up):
            return _Info(0.0, INF, INF, None, False)
        return _Info(-INF, INF, INF, None, False)
    if op == "abs":
        known = a.sign is not None or math.isfinite(a.up)
        return a._replace(sign=1 if known else None)
    if op == "atan":
        up = max(a.up, 0.0)
        return _Info(max(a.lo, 0.0), up, up, a.sign, True)
    if op == "smoothstep" and a.up < 0 and a.sign is not None:
        # argument tends to -inf / +inf: s saturates exactly at 0 / 1
        return _ZERO_INFO if a.sign < 0 else _Info(0.0, 0.0, 0.0, 1, True)
    if op in ("sin", "cos", "smoothstep", "dsmoothstep"):
        return _Info(0.0, INF, INF, None, True)
    raise ValueError(f"no valuation rule for {op!r}")


def _pow_info(a: _Info, q, positive_base) -> _Info:
    q = float(q)
    if q == 0:
        return _Info(0.0, 0.0, 0.0, 1, True)
    if q < 0 and a.lo == INF and a.up == INF:
        return _Info(-INF, INF, INF, None, False)
    if q > 0:
        lo, hi, up = _times(q, a.lo), _times(q, a.hi), _times(q, a.up)
    else:
        lo, up = _times(q, a.up), _times(q, a.lo)
        hi = up
    if positive_base:
        sign = 1
    elif a.sign is not None and float(q).is_integer():
        sign = a.sign ** int(abs(q)) if a.sign == -1 else 1
    else:
        sign = None
    bounded = (a.bounded and q > 0) or lo > 0
    return _Info(lo, min(hi, up), up, sign, bounded)


def _valuation(e: Expr, box, eps_max) -> Valuation:
    if is_identically_zero(e):
        return Valuation(INF, INF)
    v1 = _info(e, box, eps_max)
    v2 = _info(normal_form(e), box, eps_max)
    lo, hi = max(v1.lo, v2.lo), min(v1.hi, v2.hi)
    if lo > hi:
        # both enclosures are sound, so they cannot be disjoint
        raise AssertionError(f"inconsistent valuations for {e}")
    return Valuation(lo, hi)


def symbolic_valuation(e: Expr, eps_max: float = DEFAULT_GRID.eps_max) -> Valuation:
    """Interval [lo, hi] containing the valuation of an eps-only net."""
    if free_vars(e) - {"eps"}:
        raise ValueError("symbolic_valuation needs an eps-only expression")
    return _valuation(e, None, eps_max)


def uniform_valuation(e: Expr, box, eps_max: float = DEFAULT_GRID.eps_max) -> Valuation:
    """Valuation of sup_{x in box} |e(eps, x)| for a compact coordinate box."""
    return _valuation(e, tuple(tuple(map(float, b)) for b in box), eps_max)


def lower_order(e: Expr, box=None, eps_max: float = DEFAULT_GRID.eps_max) -> float:
    """Exponent a with |e| >= c eps^(a + d) eventually, uniformly on ``box``; +inf if unknown."""
    box = None if box is None else tuple(tuple(map(float, b)) for b in box)
    return min(_info(e, box, eps_max).up, _info(normal_form(e), box, eps_max).up)


# ------------------------------------------------------------------ empirics

def fit_order(net, g: EpsGrid = DEFAULT_GRID):
    """Least-squares slope of log|r| against log eps, and the RMS residual."""
    eps, vals = _values(net, g)
    ok = np.isfinite(vals) & (vals >= 1e-280)
    if ok.sum() < 4:
        raise ValueError(f"only {int(ok.sum())} usable samples for an order fit")
    X, Y = np.log(eps[ok]), np.log(vals[ok])
    slope, icpt = np.polyfit(X, Y, 1)
    resid = float(np.sqrt(np.mean((Y - (slope * X + icpt)) ** 2)))
    return float(slope), resid


def _fit_or_none(net, g):
    try:
        return fit_order(net, g)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return None, None


def _witnesses(eps, vals, mask, limit=5):
    idx = np.flatnonzero(mask)[-limit:]
    return [{"eps": float(eps[i]), "value": float(vals[i])} for i in idx]


def check_moderate(net, g: EpsGrid = DEFAULT_GRID, n_max: int = N_MAX, box=None) -> Verdict:
    """|r_eps| = O(eps^-N) for some N?

    ``net`` is an Expr (eps-only, or uniform over ``box``) or a TabulatedNet.
    """
    trace = []
    eps, vals = _values(net, g) if not isinstance(net, Expr) or not free_vars(net) - {"eps"} \
        else (g.eps, None)
    if isinstance(net, Expr):
        val = _valuation(net, None if box is None else tuple(map(tuple, box)), g.eps_max)
        trace.append(f"symbolic valuation [{val.lo}, {val.hi}]")
        if val.lo > -INF:
            n = 0 if val.lo == INF else max(0, math.ceil(-val.lo) + 1)
            return Verdict(PROVEN, {"rule_trace": trace, "N": n, "valuation": [val.lo, val.hi]})
        if val.hi == -INF and vals is not None:
            bad = ~(vals * eps ** n_max <= 10.0)
            trace.append("valuation -inf: faster growth than any power")
            return Verdict(REFUTED, {"rule_trace": trace, "witnesses": _witnesses(eps, vals, bad)})
        if vals is None:
            return Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": False,
                                          "reason": "spatial net needs tabulation"})
    tail = g.tail_mask(eps)
    slope, resid = _fit_or_none(TabulatedNet(eps, vals), g)
    base = {"rule_trace": trace, "grid": g.to_dict(), "n_max": n_max, "safety_factor": 10.0,
            "slope": slope, "residual": resid}
    for n in range(n_max + 1):
        if np.all(vals[tail] <= 10.0 * eps[tail] ** (-n)):
            trace.append(f"empirical bound eps^-{n} on last decade")
            return Verdict(UNDETERMINED, {**base, "consistent": True, "N": n})
    bad = ~(vals <= 10.0 * eps ** (-n_max)) & tail
    trace.append(f"no bound eps^-N, N <= {n_max}, on last decade")
    return Verdict(REFUTED, {**base, "witnesses": _witnesses(eps, vals, bad)})


def check_negligible(net, g: EpsGrid = DEFAULT_GRID, m_max: int = M_MAX, box=None,
                     tol_zero: float = TOL_ZERO) -> Verdict:
    """|r_eps| = O(eps^m) for every m?"""
    trace = []
    spatial = isinstance(net, Expr) and bool(free_vars(net) - {"eps"})
    if isinstance(net, Expr):
        if is_identically_zero(net):
            return Verdict(PROVEN, {"rule_trace": ["normal form is identically zero"],
                                    "valuation": [INF, INF]})
        val = _valuation(net, None if box is None else tuple(map(tuple, box)), g.eps_max)
        trace.append(f"symbolic valuation [{val.lo}, {val.hi}]")
        if val.lo == INF:
            return Verdict(PROVEN, {"rule_trace": trace, "valuation": [val.lo, val.hi]})
        if spatial:
            return Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": False,
                                          "reason": "spatial net needs tabulation"})
        eps, vals = _values(net, g)
        if val.hi < INF:
            m = m_max if val.hi == -INF else min(m_max, max(0, math.floor(val.hi) + 1))
            bad = ~(vals <= eps ** m)
            trace.append(f"valuation at most {val.hi}: exceeds eps^{m}")
            if bad.any():
                return Verdict(REFUTED, {"rule_trace": trace, "witnesses": _witnesses(eps, vals, bad)})
        eps_free = "eps" not in free_vars(net)
    else:
        eps, vals = _values(net, g)
        eps_free = net.eps_independent
    slope, resid = _fit_or_none(TabulatedNet(eps, vals), g)
    base = {"rule_trace": trace, "grid": g.to_dict(), "m_max": m_max, "slope": slope, "residual": resid}
    if eps_free:
        # a constant net is negligible iff it vanishes; floats only see roundoff
        scale = tol_zero
        if np.all(vals <= scale):
            trace.append(f"eps-independent and |r| <= {tol_zero} (roundoff)")
            return Verdict(UNDETERMINED, {**base, "consistent": True, "tol_zero": tol_zero})
        trace.append("eps-independent and non-vanishing")
        return Verdict(REFUTED, {**base, "witnesses": _witnesses(eps, vals, vals > scale)})
    tail = g.tail_mask(eps)
    if np.all(vals[tail] <= eps[tail] ** m_max):
        trace.append(f"|r| <= eps^{m_max} on last decade")
        return Verdict(UNDETERMINED, {**base, "consistent": True})
    bad = ~(vals <= eps ** m_max) & tail
    trace.append(f"|r| > eps^{m_max} on last decade")
    return Verdict(REFUTED, {**base, "witnesses": _witnesses(eps, vals, bad)})
