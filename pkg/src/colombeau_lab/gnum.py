"""Generalized numbers: moderate eps-nets of scalars modulo negligible ones."""
from __future__ import annotations

import math
from functools import cached_property
from typing import Callable, Iterable, NamedTuple

import numpy as np

from . import eps_dsl as dsl
from .asymptotics import (DEFAULT_GRID, INF, M_MAX, PROVEN, REFUTED, UNDETERMINED,
                          EpsGrid, Verdict, check_moderate, check_negligible, lower_order)
from .eps_dsl import EPS, Expr, const


class NotModerateError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class SamplerExhausted(RuntimeError):
    pass


class GeneralizedNumber:
    """Class of an eps-only representative in the ring of generalized numbers.

    Construction runs the moderateness check and rejects representatives
    whose moderateness is refuted.
    """

    def __init__(self, rep, grid: EpsGrid = DEFAULT_GRID, check: bool = True):
        rep = rep if isinstance(rep, Expr) else dsl.parse(rep) if isinstance(rep, str) else const(rep)
        if dsl.free_vars(rep) - {"eps"}:
            raise ValueError("generalized numbers depend on eps only")
        self.rep = rep
        self.grid = grid
        if check and self.moderate.refuted:
            raise NotModerateError(f"representative {dsl.to_text(rep)} is not moderate")

    @cached_property
    def moderate(self) -> Verdict:
        return check_moderate(self.rep, self.grid)

    @cached_property
    def negligible(self) -> Verdict:
        return check_negligible(self.rep, self.grid)

    def values(self, eps) -> np.ndarray:
        return dsl.evaluate_many(self.rep, eps)

    def _wrap(self, rep):
        # ring operations preserve moderateness, no need to re-check
        return GeneralizedNumber(rep, self.grid, check=False)

    def __add__(self, other):
        return gn_ring(self, _as_gn(other, self.grid), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return gn_ring(self, _as_gn(other, self.grid), "sub")

    def __rsub__(self, other):
        return gn_ring(_as_gn(other, self.grid), self, "sub")

    def __mul__(self, other):
        return gn_ring(self, _as_gn(other, self.grid), "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(dsl.neg(self.rep))

    def __repr__(self):
        return f"GeneralizedNumber({dsl.to_text(self.rep)!r})"


def _as_gn(v, grid):
    return v if isinstance(v, GeneralizedNumber) else GeneralizedNumber(v, grid)


def gn_ring(a: GeneralizedNumber, b: GeneralizedNumber, op: str) -> GeneralizedNumber:
    if op not in ("add", "sub", "mul"):
        raise ValueError(f"unknown ring operation {op!r}")
    return a._wrap(Expr(op, (a.rep, b.rep)))


def gn_scale(a: GeneralizedNumber, c) -> GeneralizedNumber:
    return a._wrap(const(c) * a.rep)


def gn_eq(a: GeneralizedNumber, b: GeneralizedNumber) -> Verdict:
    """Equality in the quotient: the difference of representatives is negligible."""
    return (a - b).negligible


# ----------------------------------------------------------------- subsets S

class EpsSubset:
    """A subset S of (0, 1] accumulating at 0.

    ``sampler(k)`` yields a strictly decreasing sequence in S (or None when a
    finite sampler runs out); ``member`` decides membership.
    """

    def __init__(self, sampler: Callable[[int], float | None], member: Callable[[float], bool],
                 label: str = ""):
        self.sampler = sampler
        self.member = member
        self.label = label

    @classmethod
    def whole(cls, grid: EpsGrid = DEFAULT_GRID):
        """S = I, sampled on the geometric grid (continued below its floor)."""
        q, k0 = grid.ratio, grid.k_min
        return cls(lambda k: q ** (k0 + k), lambda e: 0 < e <= 1, label="I")

    @classmethod
    def from_points(cls, points: Iterable[float], label: str = "finite"):
        pts = sorted({float(p) for p in points}, reverse=True)
        ptset = np.array(pts)
        return cls(lambda k: pts[k] if k < len(pts) else None,
                   lambda e: bool(np.any(np.isclose(ptset, e, rtol=1e-14, atol=0))), label=label)

    def samples(self, floor: float, limit: int = 10_000, ceiling: float = 1.0) -> np.ndarray:
        """S-samples in [floor, ceiling], checked for monotone decrease."""
        out, prev = [], math.inf
        for k in range(limit):
            e = self.sampler(k)
            if e is None or e < floor:
                break
            if not e < prev:
                raise ValueError(f"sampler not strictly decreasing at index {k}")
            if not self.member(e):
                raise ValueError(f"sample {e} is not a member of S")
            prev = e
            if e <= ceiling:
                out.append(e)
        if not out or out[-1] > 10.0 * floor:
            raise SamplerExhausted(f"S {self.label!r} has no samples near the grid floor {floor:g}")
        return np.array(out)

    def __repr__(self):
        return f"EpsSubset({self.label!r})"


def _tail(S: EpsSubset, grid: EpsGrid):
    return S.samples(grid.eps_min, ceiling=grid.eps_max)


def strictly_nonzero_on(r: GeneralizedNumber, S: EpsSubset, m_max: int = M_MAX):
    """Search m with |r_eps| > eps^m on the sampled tail of S.

    Returns ``(verdict, m)``; ``m`` is None when no exponent up to ``m_max``
    works.
    """
    grid = r.grid
    eps = _tail(S, grid)
    vals = np.abs(r.values(eps))
    trace = []
    if r.negligible.proven:
        return Verdict(REFUTED, {"rule_trace": ["representative is negligible"]}), None
    up = lower_order(r.rep, eps_max=grid.eps_max)
    for m in range(m_max + 1):
        if np.all(vals > eps ** m):
            trace.append(f"|r| > eps^{m} at all {len(eps)} sampled S points")
            if up < INF and m > up:
                trace.append(f"symbolic lower bound |r| >= c eps^({up}+d)")
                return Verdict(PROVEN, {"rule_trace": trace, "m": m}), m
            return Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": True, "m": m}), m
    bad = vals <= eps ** m_max / 2
    if bad.any():
        wit = [{"eps": float(e), "value": float(v)} for e, v in zip(eps[bad][:5], vals[bad][:5])]
        trace.append(f"|r| <= eps^{m_max}/2 at sampled S points")
        return Verdict(REFUTED, {"rule_trace": trace, "witnesses": wit}), None
    trace.append("no exponent found and no violation with margin 2")
    return Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": False}), None


def cutoff(square: Expr, m: int) -> Expr:
    """Smooth chi with chi = 1 where square >= eps^(2m), chi = 0 where square <= eps^(2m+2).

    Applied to square = r*r this has the level sets {|r| >= eps^m} and
    {|r| <= eps^(m+1)}.  Working with r*r instead of |r| keeps the cutoff smooth
    everywhere, also where r changes sign.
    """
    lo = dsl.power(EPS, 2 * m + 2)
    hi = dsl.power(EPS, 2 * m) if m else const(1)
    return dsl.smoothstep((square - lo) / (hi - lo))


def inverse_construction(r: Expr, m: int):
    """Return (s, rprime) expressions with r*s = rprime and rprime = 1 where |r| >= eps^m.

    s = chi r / (r^2 + 1 - chi_hat), chi_hat the cutoff one order further out.
    The denominator never vanishes: chi_hat < 1 forces 1 - chi_hat > 0, and
    chi_hat = 1 forces |r| >= eps^(m+2).  Where chi > 0 we have chi_hat = 1 and
    s = chi / r.
    """
    sq = r * r
    chi, chi_hat = cutoff(sq, m), cutoff(sq, m + 1)
    den = sq + (const(1) - chi_hat)
    return chi * r / den, chi * (sq / den)


class SInverse(NamedTuple):
    s: GeneralizedNumber
    rprime: GeneralizedNumber
    m: int
    verdict: Verdict


def s_inverse(r: GeneralizedNumber, S: EpsSubset, m_max: int = M_MAX, margin: float = 1e-9) -> SInverse:
    """S-inverse s of r and the factor rprime = r s, which is 1 along S."""
    verdict, m = strictly_nonzero_on(r, S, m_max)
    if verdict.refuted or m is None:
        raise PreconditionError(f"{r!r} is not strictly non-zero on {S!r}")
    s_rep, rp_rep = inverse_construction(r.rep, m)
    s, rprime = GeneralizedNumber(s_rep, r.grid), GeneralizedNumber(rp_rep, r.grid, check=False)

    eps = _tail(S, r.grid)
    rv = np.abs(r.values(eps))
    band = (rv > eps ** (m + 1)) & (rv < eps ** m)
    assert not np.any(band & (rv == 0)), "zero inside the transition band"
    first = S.samples(r.grid.eps_min)[:30]
    defect = np.abs(rprime.values(first) - 1.0)
    sv = np.abs(s.values(first))
    checks = {
        "m": m,
        "rprime_defect_max": float(defect.max()),
        "rprime_within_eps_m_max": bool(np.all(defect <= first ** m_max)),
        "s_bound_ok": bool(np.all(sv <= first ** (-(m + 1)) * (1 + margin))),
    }
    ok = checks["rprime_within_eps_m_max"] and checks["s_bound_ok"]
    status = verdict.status if ok else REFUTED
    ev = {**verdict.evidence, **checks}
    if status == UNDETERMINED:
        ev["consistent"] = True
    return SInverse(s, rprime, m, Verdict(status, ev))


def witness_S(r: GeneralizedNumber, m_max: int = M_MAX):
    """Subset S on which a non-negligible r is strictly non-zero.

    Returns ``(S, verdict)`` where ``verdict`` is the negligibility verdict;
    S is None unless negligibility is refuted.
    """
    verdict = r.negligible
    if not verdict.refuted:
        return None, verdict
    eps = r.grid.eps
    vals = np.abs(r.values(eps))
    tail = r.grid.tail_mask(eps)
    chosen = None
    for m in range(m_max + 1):
        w = vals > eps ** m
        if w.sum() * 2 >= len(eps) and np.any(w & tail):
            chosen = (m, w)
            break
    if chosen is None:
        w = vals > eps ** m_max
        chosen = (m_max, w)
    m, w = chosen
    return EpsSubset.from_points(eps[w], label=f"witness |r| > eps^{m}"), verdict


def idempotent_audit(r: GeneralizedNumber) -> Verdict:
    """Check that an idempotent r (r^2 = r) equals 0 or 1."""
    pre = gn_eq(r * r, r)
    if pre.refuted:
        return Verdict(UNDETERMINED, {"applicable": False, "consistent": False,
                                      "reason": "r^2 - r is not negligible", "precondition": pre.to_dict()})
    zero, one = gn_eq(r, GeneralizedNumber(0, r.grid)), gn_eq(r, GeneralizedNumber(1, r.grid))
    ev = {"applicable": True, "eq_zero": zero.to_dict(), "eq_one": one.to_dict()}
    if zero.proven or one.proven:
        return Verdict(PROVEN, ev)
    if zero.refuted and one.refuted:
        ev["alarm"] = "non-trivial idempotent detected"
        return Verdict(REFUTED, ev)
    return Verdict(UNDETERMINED, {**ev, "consistent": zero.consistent or one.consistent})
