"""The algebra G(Omega) on open coordinate domains Omega in R^n."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from . import eps_dsl as dsl
from .asymptotics import (DEFAULT_GRID, INF, M_MAX, N_MAX, PROVEN, REFUTED, UNDETERMINED,
                          EpsGrid, TabulatedNet, Verdict, check_moderate, check_negligible,
                          lower_order, uniform_valuation)
from .eps_dsl import EPS, Expr, const, x
from .gnum import EpsSubset, GeneralizedNumber, PreconditionError, _tail, cutoff, strictly_nonzero_on

MAX_ORDER = 4


class SupportError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Open box or ball with the compact exhaustion K_1 c K_2 c ... c K_jmax.

    Box bounds are ``((a1, b1), ...)``; ball bounds are ``(center, radius)``.
    K_j shrinks the box by h/(j+1), h the smallest half-width (the ball
    radius by the factor j/(j+1)).  ``compact=True`` marks a closed model
    (the torus chart) whose only compact set is the closed box itself.
    """

    dim: int
    bounds: tuple
    shape: str = "box"
    j_max: int = 3
    compact: bool = False

    def __post_init__(self):
        if self.shape == "box":
            b = tuple((float(a), float(c)) for a, c in self.bounds)
            if len(b) != self.dim or any(not a < c for a, c in b):
                raise ValueError("box bounds must be dim pairs with a < b")
        elif self.shape == "ball":
            center, radius = self.bounds
            b = (tuple(map(float, center)), float(radius))
            if len(b[0]) != self.dim or not b[1] > 0:
                raise ValueError("ball needs a center of length dim and a positive radius")
        else:
            raise ValueError(f"unknown shape {self.shape!r}")
        object.__setattr__(self, "bounds", b)
        if self.compact:
            object.__setattr__(self, "j_max", 1)

    @classmethod
    def box(cls, *bounds, j_max=3):
        return cls(len(bounds), tuple(bounds), "box", j_max)

    @classmethod
    def from_json(cls, data):
        data = json.loads(data) if isinstance(data, str) else data
        bounds = data["bounds"]
        if data.get("shape", "box") == "ball":
            bounds = (tuple(bounds[0]), bounds[1])
        else:
            bounds = tuple(tuple(b) for b in bounds)
        return cls(int(data["dim"]), bounds, data.get("shape", "box"), int(data.get("j_max", 3)),
                   bool(data.get("compact", False)))

    def to_dict(self):
        return {"dim": self.dim, "shape": self.shape, "bounds": self.bounds, "j_max": self.j_max,
                "compact": self.compact}

    def compact_box(self, j: int) -> tuple:
        """Bounding box of K_j."""
        if self.shape == "box":
            if self.compact:
                return self.bounds
            h = min(b - a for a, b in self.bounds) / 2 / (j + 1)
            return tuple((a + h, b - h) for a, b in self.bounds)
        c, r = self.bounds
        rj = r if self.compact else r * j / (j + 1)
        return tuple((ci - rj, ci + rj) for ci in c)

    def in_compact(self, j, pts):
        pts = np.atleast_2d(pts)
        if self.shape == "box":
            return np.all([(pts[:, i] >= a) & (pts[:, i] <= b)
                           for i, (a, b) in enumerate(self.compact_box(j))], axis=0)
        c, r = self.bounds
        rj = r if self.compact else r * j / (j + 1)
        return np.sum((pts - np.array(c)) ** 2, axis=1) <= rj ** 2

    def contains_box(self, box) -> bool:
        """Is the closed box inside the open domain (inside the closed model if compact)?"""
        if self.shape == "box":
            if self.compact:
                return all(a <= lo and hi <= b for (a, b), (lo, hi) in zip(self.bounds, box))
            return all(a < lo and hi < b for (a, b), (lo, hi) in zip(self.bounds, box))
        c, r = self.bounds
        far = sum(max(abs(lo - ci), abs(hi - ci)) ** 2 for ci, (lo, hi) in zip(c, box))
        return far < r ** 2 or (self.compact and far <= r ** 2)

    def contains_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.shape == "box":
            lo = np.array([a for a, _ in self.bounds])
            hi = np.array([b for _, b in self.bounds])
            if self.compact:
                return np.all((pts >= lo) & (pts <= hi), axis=1)
            return np.all((pts > lo) & (pts < hi), axis=1)
        c, r = self.bounds
        d2 = np.sum((pts - np.array(c)) ** 2, axis=1)
        return d2 <= r ** 2 if self.compact else d2 < r ** 2

    def default_lattice(self) -> int:
        return 64 if self.dim <= 2 else 16

    def lattice_axes(self, j: int, density: int | None = None):
        n = density or self.default_lattice()
        return [np.linspace(a, b, n + 1) for a, b in self.compact_box(j)]

    def lattice(self, j: int, density: int | None = None, eps: float | None = None) -> np.ndarray:
        """Points of the deterministic lattice on K_j, shape (P, dim).

        With ``eps`` each axis also gets points at eps-scaled offsets from its
        concentration point (0 when inside K_j, else the midpoint), so that
        features of width eps there are not stepped over.
        """
        axes = self.lattice_axes(j, density)
        if eps is not None:
            axes = [np.union1d(g, _graded_axis(g[0], g[-1], eps)) for g in axes]
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        return pts if self.shape == "box" else pts[self.in_compact(j, pts)]


_OFFSETS = np.array([1 / 8, 1 / 4, 3 / 8, 1 / 2, 5 / 8, 3 / 4, 7 / 8, 1, 1.5, 2, 3, 4])


def _graded_axis(a, b, eps):
    c = 0.0 if a < 0 < b else (a + b) / 2
    pts = c + eps * np.concatenate([-_OFFSETS, _OFFSETS])
    return pts[(pts > a) & (pts < b)]


def _check_smooth_fragment(rep: Expr):
    def walk(n):
        if n.op == "abs" and dsl.free_vars(n) - {"eps"}:
            raise dsl.NonSmoothError(n, "a spatial variable")
        for a in n.args:
            walk(a)
    walk(rep)


class GeneralizedFunction:
    """Class of a representative u(eps, x1..xn) in G(Omega)."""

    def __init__(self, domain: DomainSpec, rep, grid: EpsGrid = DEFAULT_GRID, check: bool = False):
        rep = dsl.parse(rep) if isinstance(rep, str) else rep if isinstance(rep, Expr) else const(rep)
        if dsl.max_coord_index(rep) > domain.dim:
            raise ValueError(f"representative uses x{dsl.max_coord_index(rep)} on a {domain.dim}-dim domain")
        _check_smooth_fragment(rep)
        self.domain, self.rep, self.grid = domain, rep, grid
        if check and self.moderate.refuted:
            raise ValueError(f"{dsl.to_text(rep)} is not moderate on the domain")

    @cached_property
    def moderate(self) -> Verdict:
        return check_moderate_gf(self)

    @cached_property
    def negligible(self) -> Verdict:
        return check_negligible_gf(self)

    def _wrap(self, rep):
        return GeneralizedFunction(self.domain, rep, self.grid)

    def _other(self, v):
        if isinstance(v, GeneralizedFunction):
            if v.domain != self.domain:
                raise ValueError("generalized functions live on different domains")
            return v
        return GeneralizedFunction(self.domain, v, self.grid)

    def __add__(self, v):
        return gf_ring(self, self._other(v), "add")

    __radd__ = __add__

    def __sub__(self, v):
        return gf_ring(self, self._other(v), "sub")

    def __rsub__(self, v):
        return gf_ring(self._other(v), self, "sub")

    def __mul__(self, v):
        return gf_ring(self, self._other(v), "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(dsl.neg(self.rep))

    def __call__(self, eps, *coords):
        return dsl.evaluate_many(self.rep, eps, coords)

    def __repr__(self):
        return f"GeneralizedFunction({dsl.to_text(self.rep)!r})"


def gf_ring(u: GeneralizedFunction, v: GeneralizedFunction, op: str) -> GeneralizedFunction:
    if op not in ("add", "sub", "mul"):
        raise ValueError(f"unknown ring operation {op!r}")
    return u._wrap(Expr(op, (u.rep, v.rep)))


def gf_smooth_mul(f: Expr, u: GeneralizedFunction) -> GeneralizedFunction:
    f = dsl.parse(f) if isinstance(f, str) else f
    if dsl.depends_on(f, "eps"):
        raise ValueError("smooth multiplier must not depend on eps")
    return u._wrap(f * u.rep)


def gf_eq(u: GeneralizedFunction, v: GeneralizedFunction) -> Verdict:
    return check_negligible_gf(u - v)


# ----------------------------------------------------------------- seminorms

def multi_indices(dim: int, max_order: int = MAX_ORDER):
    out = []
    for order in range(max_order + 1):
        for combo in itertools.combinations_with_replacement(range(dim), order):
            alpha = [0] * dim
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


@lru_cache(maxsize=4096)
def partial(rep: Expr, alpha: tuple) -> Expr:
    """Constant-coefficient partial derivative d^alpha rep."""
    if not any(alpha):
        return rep
    i = next(k for k, a in enumerate(alpha) if a)
    lower = list(alpha)
    lower[i] -= 1
    return dsl.differentiate(partial(rep, tuple(lower)), f"x{i + 1}")


def _lattice_values(rep, domain, j, eps, density=None):
    pts = domain.lattice(j, density)
    coords = [pts[None, :, i] for i in range(domain.dim)]
    return dsl.evaluate_many(rep, np.asarray(eps)[:, None], coords), pts


def _lattice_sup(rep, domain, j, eps, density=None):
    """sup |rep| over the eps-graded lattice on K_j, one value per eps."""
    if not dsl.depends_on(rep, "eps"):
        vals, _ = _lattice_values(rep, domain, j, np.asarray(eps)[:1], density)
        return np.full(len(eps), np.max(np.abs(vals)))
    out = np.empty(len(eps))
    for k, e in enumerate(eps):
        pts = domain.lattice(j, density, eps=e)
        vals = dsl.evaluate_many(rep, e, [pts[:, i] for i in range(domain.dim)])
        out[k] = np.max(np.abs(vals))
    return out


def seminorm_net(u: GeneralizedFunction, j: int, alpha=None, refine: bool = True,
                 density: int | None = None) -> TabulatedNet:
    """eps -> sup_{x in K_j} |d^alpha u_eps(x)| on a lattice, tabulated on the grid.

    With ``refine`` the lattice is doubled once and the relative discrepancy is
    recorded; the larger of the two sups is reported.
    """
    alpha = tuple(alpha) if alpha is not None else (0,) * u.domain.dim
    if sum(alpha) > MAX_ORDER:
        raise ValueError(f"order {sum(alpha)} exceeds the cap {MAX_ORDER}")
    d = partial(u.rep, alpha)
    eps = u.grid.eps
    density = density or u.domain.default_lattice()
    sup = _lattice_sup(d, u.domain, j, eps, density)
    meta = {"j": j, "alpha": list(alpha), "lattice": density, "graded": True}
    if refine:
        sup2 = _lattice_sup(d, u.domain, j, eps, 2 * density)
        with np.errstate(invalid="ignore", divide="ignore"):
            disc = np.abs(sup2 - sup) / np.maximum(np.abs(sup2), 1e-300)
        meta["refinement_discrepancy"] = float(np.nanmax(disc)) if np.isfinite(disc).any() else 0.0
        sup = np.maximum(sup, sup2)
    return TabulatedNet(eps, sup, eps_independent=not dsl.depends_on(d, "eps"),
                        label=f"sup_K{j} |d^{alpha} u|", meta=meta)


def check_moderate_gf(u: GeneralizedFunction, max_order: int = MAX_ORDER, n_max: int = N_MAX) -> Verdict:
    """All seminorms sup_K |d^alpha u_eps|, |alpha| <= cap, are O(eps^-N)."""
    if not dsl.depends_on(u.rep, "eps"):
        return Verdict(PROVEN, {"rule_trace": ["eps-independent smooth representative"]})
    trace, pending = [], []
    for alpha in multi_indices(u.domain.dim, max_order):
        d = partial(u.rep, alpha)
        for j in range(1, u.domain.j_max + 1):
            val = uniform_valuation(d, u.domain.compact_box(j), u.grid.eps_max)
            if val.lo == -INF:
                pending.append((j, alpha))
    if not pending:
        trace.append(f"symbolic: every derivative up to order {max_order} has finite valuation")
        return Verdict(PROVEN, {"rule_trace": trace})
    trace.append(f"{len(pending)} (K_j, alpha) pairs need tabulation")
    worst = None
    for j, alpha in pending:
        v = check_moderate(seminorm_net(u, j, alpha), u.grid, n_max)
        if v.refuted:
            return Verdict(REFUTED, {"rule_trace": trace, "j": j, "alpha": list(alpha),
                                     "witnesses": v.evidence.get("witnesses", [])})
        if worst is None or v.evidence.get("N", 0) > worst.evidence.get("N", 0):
            worst = v
    return Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": True,
                                  "N": worst.evidence.get("N"), "grid": u.grid.to_dict()})


def check_negligible_gf(u: GeneralizedFunction, m_max: int = M_MAX) -> Verdict:
    """sup_K |u_eps| = O(eps^m) for all m and every K_j (zeroth order only)."""
    if dsl.is_identically_zero(u.rep):
        return Verdict(PROVEN, {"rule_trace": ["normal form is identically zero"]})
    trace, pending = [], []
    for j in range(1, u.domain.j_max + 1):
        val = uniform_valuation(u.rep, u.domain.compact_box(j), u.grid.eps_max)
        if val.lo < INF:
            pending.append(j)
    if not pending:
        return Verdict(PROVEN, {"rule_trace": ["symbolic: valuation +inf on every K_j"]})
    verdicts = []
    for j in pending:
        v = check_negligible(seminorm_net(u, j, refine=False), u.grid, m_max)
        if v.refuted:
            return Verdict(REFUTED, {"rule_trace": trace + [f"K_{j}: " + v.evidence["rule_trace"][-1]],
                                     "j": j, "witnesses": v.evidence.get("witnesses", [])})
        verdicts.append(v)
    return Verdict(UNDETERMINED, {"rule_trace": trace + [v.evidence["rule_trace"][-1] for v in verdicts[:1]],
                                  "consistent": all(v.consistent for v in verdicts),
                                  "grid": u.grid.to_dict()})


# --------------------------------------------------------------- point values

def eval_at(u: GeneralizedFunction, pt) -> GeneralizedNumber:
    """Point value u(x~): the net eps -> u_eps(x_eps)."""
    if pt.dim != u.domain.dim:
        raise ValueError("point and function dimensions differ")
    if not u.domain.contains_box(pt.support):
        raise SupportError(f"support {pt.support} of the point leaves the domain")
    rep = dsl.substitute(u.rep, {f"x{i + 1}": c for i, c in enumerate(pt.components)})
    return GeneralizedNumber(rep, u.grid)


# ------------------------------------------------------------- invertibility

def _refine_roots(rep, e, axes, vals, best, limit=3):
    """Brent root refinement along lattice edges with a sign change."""
    found = []
    shape = vals.shape
    for ax in range(len(shape)):
        a = np.take(vals, range(shape[ax] - 1), axis=ax)
        b = np.take(vals, range(1, shape[ax]), axis=ax)
        change = (np.sign(a) * np.sign(b) < 0)
        if not change.any():
            continue
        idx = np.argwhere(change)
        score = np.minimum(np.abs(a[change]), np.abs(b[change]))
        for k in np.argsort(score)[:limit]:
            i = idx[k]
            base = [axes[d][i[d]] for d in range(len(shape))]
            lo, hi = axes[ax][i[ax]], axes[ax][i[ax] + 1]

            def f(t, base=base):
                p = list(base)
                p[ax] = t
                return float(dsl.evaluate_many(rep, e, p))
            try:
                t = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
            except (ValueError, RuntimeError):
                continue
            cands = [t, np.nextafter(t, lo), np.nextafter(t, hi)]
            t = min(cands, key=lambda c: abs(f(c)))
            p = list(base)
            p[ax] = t
            found.append((abs(f(t)), p))
    return found


def lattice_inf(u: GeneralizedFunction, j: int, eps: np.ndarray, density=None):
    """inf_{K_j} |u_eps| per eps with the minimizing point, root-refined on sign changes."""
    dom = u.domain
    axes = dom.lattice_axes(j, density)
    grid_pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    inside = dom.in_compact(j, grid_pts)
    infs, where = [], []
    for e in eps:
        vals = np.full(len(grid_pts), np.nan)
        vals[inside] = dsl.evaluate_many(u.rep, e, [grid_pts[inside, i] for i in range(dom.dim)])
        k = int(np.nanargmin(np.abs(vals)))
        best = (abs(vals[k]), list(grid_pts[k]))
        if best[0] > 0:
            for cand in _refine_roots(u.rep, e, axes, vals.reshape([len(a) for a in axes]), best):
                if cand[0] < best[0] and dom.in_compact(j, np.array(cand[1]))[0]:
                    best = cand
        infs.append(best[0])
        where.append(best[1])
    return np.array(infs), np.array(where, dtype=float)


class GFNonzero(NamedTuple):
    verdict: Verdict
    m: int | None
    j: int | None
    samples: list


def gf_strictly_nonzero_on(u: GeneralizedFunction, S: EpsSubset, m_max: int = M_MAX) -> GFNonzero:
    """inf_{K_j} |u_eps| > eps^m on the sampled tail of S, for every K_j.

    On refutation ``samples`` holds (eps, x) pairs attaining the small values
    on the failing K_j.
    """
    eps = _tail(S, u.grid)
    trace, ms, proven = [], [], True
    for j in range(1, u.domain.j_max + 1):
        infs, where = lattice_inf(u, j, eps)
        m_j = next((m for m in range(m_max + 1) if np.all(infs > eps ** m)), None)
        if m_j is None:
            bad = infs <= eps ** m_max / 2
            if bad.any():
                trace.append(f"K_{j}: inf |u| <= eps^{m_max}/2 at {int(bad.sum())} S points")
                samples = [(float(e), tuple(map(float, p))) for e, p in zip(eps, where)]
                wit = [{"eps": float(e), "x": [float(c) for c in p], "value": float(v)}
                       for e, p, v in zip(eps[bad][:5], where[bad][:5], infs[bad][:5])]
                return GFNonzero(Verdict(REFUTED, {"rule_trace": trace, "j": j, "witnesses": wit}),
                                 None, j, samples)
            trace.append(f"K_{j}: no exponent up to {m_max}")
            return GFNonzero(Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": False}), None, j, [])
        up = lower_order(u.rep, u.domain.compact_box(j), u.grid.eps_max)
        if up < INF and m_j <= up:
            # |u| >= c eps^up symbolically, so any larger exponent eventually works
            bump_m = math.floor(up) + 1
            if bump_m <= m_max and np.all(infs > eps ** bump_m):
                m_j = bump_m
        proven = proven and up < INF and m_j > up
        trace.append(f"K_{j}: inf |u| > eps^{m_j}")
        ms.append(m_j)
    m = max(ms)
    if proven:
        trace.append("symbolic uniform lower bound on every K_j")
        return GFNonzero(Verdict(PROVEN, {"rule_trace": trace, "m": m}), m, None, [])
    return GFNonzero(Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": True, "m": m}), m, None, [])


class GFInverse(NamedTuple):
    v: GeneralizedFunction
    rprime: GeneralizedFunction
    m: int
    verdict: Verdict


def gf_s_inverse(u: GeneralizedFunction, S: EpsSubset, m_max: int = M_MAX) -> GFInverse:
    """S-inverse of u built pointwise from the cutoff construction.

    ``rprime = u v`` is returned as a generalized function; it equals 1 on
    every K_j for the sampled tail of S.
    """
    res = gf_strictly_nonzero_on(u, S, m_max)
    if res.verdict.refuted or res.m is None:
        raise PreconditionError(f"{u!r} is not strictly non-zero on {S!r}")
    m, r = res.m, u.rep
    sq = r * r
    chi, chi_hat = cutoff(sq, m), cutoff(sq, m + 1)
    den = sq + (const(1) - chi_hat)
    v, rprime = u._wrap(chi * r / den), u._wrap(chi * (sq / den))
    eps = _tail(S, u.grid)[:30]
    defect = 0.0
    for j in range(1, u.domain.j_max + 1):
        defect = max(defect, float(np.max(_lattice_sup(rprime.rep - const(1), u.domain, j, eps))))
    ok = defect <= float(np.min(eps)) ** 0 * 1e-12 or bool(np.all(defect <= eps ** m_max))
    ev = {**res.verdict.evidence, "rprime_defect_max": defect}
    status = res.verdict.status if ok else REFUTED
    return GFInverse(v, rprime, m, Verdict(status, ev))


def pointwise_invertibility_audit(u: GeneralizedFunction, S: EpsSubset, m_max: int = M_MAX,
                                  panel: int = 8, seed: int = 0):
    """Both directions of: u is S-invertible iff every point value u(x~) is.

    Returns ``(verdict, witness_point)``.  Forward: an S-invertible u has
    S-invertible values at a seeded panel of compactly supported points.
    Reverse: when invertibility is refuted, a point is interpolated through
    the lattice points where |u| is small and its value must fail to be
    strictly non-zero on S.
    """
    from .gpoints import interpolate_witness, random_point, thin_samples

    res = gf_strictly_nonzero_on(u, S, m_max)
    if not res.verdict.refuted:
        rng = np.random.default_rng(seed)
        failures = []
        for k in range(panel):
            j = 1 + k % u.domain.j_max
            pt = random_point(u.domain, j, rng, grid=u.grid)
            val = eval_at(u, pt)
            v, _ = strictly_nonzero_on(val, S, m_max)
            if v.refuted:
                failures.append({"point": [dsl.to_text(c) for c in pt.components], "verdict": v.to_dict()})
        ev = {"direction": "forward", "panel": panel, "seed": seed, "invertibility": res.verdict.to_dict(),
              "panel_failures": failures}
        if failures:
            ev["alarm"] = "S-invertible function with a non-invertible point value"
            return Verdict(REFUTED, ev), None
        return Verdict(res.verdict.status if res.verdict.status != UNDETERMINED else UNDETERMINED,
                       {**ev, "consistent": res.verdict.consistent}), None

    pt = interpolate_witness(thin_samples(res.samples), u.domain.dim, u.grid)
    val = eval_at(u, pt)
    v, _ = strictly_nonzero_on(val, S, m_max)
    eps = _tail(S, u.grid)
    neg = check_negligible(TabulatedNet(eps, val.values(eps)), u.grid, m_max)
    ev = {"direction": "reverse", "invertibility": res.verdict.to_dict(),
          "witness_value_nonzero_on_S": v.to_dict(), "witness_value_negligible_on_S": neg.to_dict()}
    if v.refuted and neg.consistent:
        return Verdict(PROVEN, ev), pt
    ev["alarm"] = "no witness point with a vanishing value was produced"
    return Verdict(REFUTED, ev), pt


# ---------------------------------------------------------------- embeddings

def embed_smooth(f, domain: DomainSpec, grid: EpsGrid = DEFAULT_GRID) -> GeneralizedFunction:
    f = dsl.parse(f) if isinstance(f, str) else f if isinstance(f, Expr) else const(f)
    if dsl.depends_on(f, "eps"):
        raise ValueError("embed_smooth takes an eps-independent function")
    return GeneralizedFunction(domain, f, grid)


# The bump b(t) = s(1 + t) s(1 - t) lives on (-1, 1) with b(0) = 1.  Since
# s(t) + s(1 - t) = 1, its integral is 2 * int_0^1 s = 1 exactly; the value is
# re-checked by quadrature in delta_normalization().
DELTA_NORMALIZATION = Fraction(1)


def bump(t: Expr) -> Expr:
    return dsl.smoothstep(const(1) + t) * dsl.smoothstep(const(1) - t)


def delta_normalization() -> dict:
    """Quadrature check of the frozen normalization constant."""
    from scipy.integrate import quad
    f = lambda t: float(dsl.evaluate_many(bump(x(1)), 1.0, [t]))
    val, err = quad(f, -1, 1, epsabs=1e-13, epsrel=1e-13, limit=200)
    return {"constant": str(DELTA_NORMALIZATION), "quadrature": val, "quad_error": err,
            "deviation": abs(val - float(DELTA_NORMALIZATION))}


def _require_1d(domain):
    if domain.dim != 1:
        raise ValueError("model distributions are embedded on one-dimensional domains only")
    if not domain.contains_points(np.zeros((1, 1)))[0]:
        raise ValueError("domain must contain 0")


def embed_heaviside(domain: DomainSpec, grid: EpsGrid = DEFAULT_GRID) -> GeneralizedFunction:
    _require_1d(domain)
    return GeneralizedFunction(domain, dsl.smoothstep(x(1) / EPS + const(Fraction(1, 2))), grid)


def embed_delta(domain: DomainSpec, grid: EpsGrid = DEFAULT_GRID) -> GeneralizedFunction:
    _require_1d(domain)
    return GeneralizedFunction(domain, const(DELTA_NORMALIZATION) * bump(x(1) / EPS) / EPS, grid)


# --------------------------------------------------------------- association

def _simpson(f, a, b, n):
    n += n % 2
    t = np.linspace(a, b, n + 1)
    y = f(t)
    h = (b - a) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def _graded_breaks(a, b, eps, centers):
    pts = {a, b}
    for c in centers:
        if a < c < b:
            pts.add(c)
        k = -3
        while eps * 2.0 ** k < (b - a):
            for p in (c - eps * 2.0 ** k, c + eps * 2.0 ** k):
                if a < p < b:
                    pts.add(p)
            k += 1
    return sorted(pts)


class Pairing(NamedTuple):
    eps: np.ndarray
    values: np.ndarray
    flagged: np.ndarray


def association_pairing(u: GeneralizedFunction, psi, g: EpsGrid, support=None, centers=(0.0,),
                        panels: int = 2048, tol: float = 1e-6) -> Pairing:
    """int u_eps psi dx at each grid eps by composite Simpson.

    The panels are spread over a mesh graded towards ``centers`` (points
    where u_eps concentrates).  Entries whose Richardson comparison with half
    the panels disagrees by more than ``tol`` are flagged.
    """
    if u.domain.dim != 1:
        raise ValueError("association pairing is implemented on one-dimensional domains")
    psi = dsl.parse(psi) if isinstance(psi, str) else psi
    a, b = support if support is not None else u.domain.bounds[0]
    if not u.domain.contains_box(((a, b),)) and u.domain.shape == "box":
        lo, hi = u.domain.bounds[0]
        if not (lo <= a and b <= hi):
            raise SupportError("test function support leaves the domain")
    prod = u.rep * psi
    vals, flags = [], []
    for e in g.eps:
        breaks = _graded_breaks(a, b, e, centers)
        per = max(256, panels // (len(breaks) - 1))
        f = lambda t, e=e: dsl.evaluate_many(prod, e, [t])
        full = sum(_simpson(f, l, r, per) for l, r in zip(breaks[:-1], breaks[1:]))
        half = sum(_simpson(f, l, r, per // 2) for l, r in zip(breaks[:-1], breaks[1:]))
        vals.append(full)
        flags.append(abs(full - half) > tol * max(1.0, abs(full)))
    return Pairing(g.eps, np.array(vals), np.array(flags))
