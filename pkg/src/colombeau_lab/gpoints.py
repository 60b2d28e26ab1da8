"""Compactly supported generalized points and functionals on G(Omega)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import eps_dsl as dsl
from .asymptotics import (DEFAULT_GRID, PROVEN, REFUTED, UNDETERMINED, EpsGrid, Verdict,
                          check_negligible, range_bounds)
from .eps_dsl import EPS, Expr, const, x
from .gfun import DomainSpec, GeneralizedFunction, embed_smooth, eval_at
from .gnum import GeneralizedNumber, gn_eq


class AuditFailure(ValueError):
    """A functional failed the linearity/multiplicativity audit."""

    def __init__(self, msg, probe=None, verdict=None):
        super().__init__(msg)
        self.probe = probe
        self.verdict = verdict


def _as_expr(c):
    return c if isinstance(c, Expr) else dsl.parse(c) if isinstance(c, str) else const(c)


@dataclass(frozen=True)
class GeneralizedPoint:
    """Net eps -> x_eps in R^n with a declared compact support box.

    When ``support`` is omitted it is derived from a symbolic range enclosure
    of the components, or else from the sampled tail padded by 10%.
    """

    components: tuple
    support: tuple | None = None
    grid: EpsGrid = field(default=DEFAULT_GRID, compare=False)

    def __post_init__(self):
        comps = tuple(_as_expr(c) for c in self.components)
        for c in comps:
            if dsl.free_vars(c) - {"eps"}:
                raise ValueError("point components depend on eps only")
        object.__setattr__(self, "components", comps)
        if self.support is None:
            object.__setattr__(self, "support", tuple(_enclose(c, self.grid) for c in comps))
        else:
            sup = tuple((float(a), float(b)) for a, b in self.support)
            if len(sup) != len(comps) or any(not a <= b for a, b in sup):
                raise ValueError("support must be one interval per component")
            object.__setattr__(self, "support", sup)

    @property
    def dim(self):
        return len(self.components)

    def values(self, eps) -> np.ndarray:
        """Array of shape (len(eps), dim)."""
        eps = np.asarray(eps, float)
        return np.stack([dsl.evaluate_many(c, eps) for c in self.components], axis=-1)

    def to_dict(self):
        return {"components": [dsl.to_text(c) for c in self.components], "support": [list(s) for s in self.support]}

    @classmethod
    def from_json(cls, data, grid: EpsGrid = DEFAULT_GRID):
        data = json.loads(data) if isinstance(data, str) else data
        sup = data.get("support")
        return cls(tuple(data["components"]), tuple(map(tuple, sup)) if sup else None, grid)

    def __repr__(self):
        return f"GeneralizedPoint({[dsl.to_text(c) for c in self.components]})"


def _enclose(c, grid):
    r = range_bounds(c, None, grid.eps_max)
    if r is not None:
        return float(r[0]), float(r[1])
    v = dsl.evaluate_many(c, grid.eps)
    v = v[np.isfinite(v)]
    if not v.size:
        raise ValueError(f"component {dsl.to_text(c)} has no finite samples")
    lo, hi = float(v.min()), float(v.max())
    pad = 0.1 * max(hi - lo, 1.0)
    return lo - pad, hi + pad


def point_equal(p: GeneralizedPoint, q: GeneralizedPoint) -> Verdict:
    """Negligibility of the squared Euclidean distance (same verdict as the distance)."""
    if p.dim != q.dim:
        raise ValueError("points of different dimension")
    d2 = None
    for a, b in zip(p.components, q.components):
        t = (a - b) * (a - b)
        d2 = t if d2 is None else d2 + t
    return check_negligible(d2, p.grid)


def is_compactly_supported(p: GeneralizedPoint) -> Verdict:
    trace, proven = [], True
    for i, (c, (a, b)) in enumerate(zip(p.components, p.support)):
        r = range_bounds(c, None, p.grid.eps_max)
        if r is not None and a <= r[0] and r[1] <= b:
            trace.append(f"component {i + 1}: symbolic range [{r[0]:.6g}, {r[1]:.6g}] inside support")
        else:
            proven = False
    if proven:
        return Verdict(PROVEN, {"rule_trace": trace})
    eps = p.grid.eps
    vals = p.values(eps)
    lo = np.array([a for a, _ in p.support])
    hi = np.array([b for _, b in p.support])
    out = ~np.all((vals >= lo) & (vals <= hi), axis=1)
    tail = p.grid.tail_mask(eps)
    if np.any(out & tail):
        wit = [{"eps": float(e), "x": [float(v) for v in row]} for e, row in zip(eps[out & tail][:5], vals[out & tail][:5])]
        return Verdict(REFUTED, {"rule_trace": trace + ["sampled tail leaves the support"], "witnesses": wit})
    eps0 = float(eps[out].min()) if out.any() else float(eps.max())
    return Verdict(UNDETERMINED, {"rule_trace": trace + [f"sampled values inside the support below eps0={eps0:g}"],
                                  "consistent": True, "eps0": eps0})


def random_point(domain: DomainSpec, j: int, rng: np.random.Generator,
                 grid: EpsGrid = DEFAULT_GRID) -> GeneralizedPoint:
    """Seeded point supported in K_j: a centre plus a small oscillating or decaying net."""
    if domain.shape == "ball":
        c0, r = domain.bounds
        h = r * j / (j + 1) / np.sqrt(domain.dim)
        box = tuple((ci - h, ci + h) for ci in c0)
    else:
        box = domain.compact_box(j)
    comps, sup = [], []
    for lo, hi in box:
        w = hi - lo
        c = Fraction(float(rng.uniform(lo + 0.25 * w, hi - 0.25 * w))).limit_denominator(1 << 20)
        d = Fraction(int(rng.integers(1, 9)), 64) * Fraction(w).limit_denominator(1 << 20) / 2
        kind = int(rng.integers(0, 4))
        if kind == 0:
            pert = const(d) * EPS
        elif kind == 1:
            pert = const(d) * dsl.sin(const(int(rng.integers(1, 5))) / EPS)
        elif kind == 2:
            pert = const(d) * dsl.cos(EPS * const(int(rng.integers(1, 7))))
        else:
            pert = const(-d) * dsl.power(EPS, 2)
        comps.append(const(c) + pert)
        # |pert| <= d; the slack keeps rounding at |pert| = d inside
        sup.append((float(c - 1.5 * d), float(c + 1.5 * d)))
    return GeneralizedPoint(tuple(comps), tuple(sup), grid)


# ---------------------------------------------------------------- functionals

@dataclass(frozen=True)
class Functional:
    """Opaque map G(Omega) -> generalized numbers.

    ``action`` must be pure: the same generalized function always yields the
    same representative.  Linearity and multiplicativity are audited, never
    assumed.
    """

    action: Callable[[GeneralizedFunction], GeneralizedNumber]
    domain: DomainSpec
    label: str = ""

    def __call__(self, u: GeneralizedFunction) -> GeneralizedNumber:
        return self.action(u)


def evaluation_functional(p: GeneralizedPoint, domain: DomainSpec) -> Functional:
    if not domain.contains_box(p.support):
        raise ValueError("point support must lie inside the domain")
    return Functional(lambda u: eval_at(u, p), domain, label=f"ev at {p!r}")


# Fixed probe corpus, version 1.  Templates take coordinate expressions a, b.
PROBE_VERSION = 1
_TEMPLATES = [
    lambda a, b: a,
    lambda a, b: b,
    lambda a, b: a * b + const(1),
    lambda a, b: dsl.sin(a),
    lambda a, b: dsl.cos(b),
    lambda a, b: dsl.exp(a * const(Fraction(1, 2))),
    lambda a, b: a * a - b,
    lambda a, b: dsl.atan(a + b),
    lambda a, b: const(2) + dsl.sin(a * b),
    lambda a, b: a - const(Fraction(1, 3)),
]
_PAIRS = [(0, 1), (0, 3), (1, 4), (2, 5), (3, 6), (4, 7), (5, 8), (6, 9), (7, 0), (8, 2),
          (9, 1), (0, 0), (3, 3), (1, 6), (2, 8), (5, 9), (4, 0), (7, 8), (6, 2), (9, 5)]
_SCALARS = [Fraction(3, 2), Fraction(-2), Fraction(1, 3), Fraction(5)]


def probe_functions(domain: DomainSpec) -> list:
    n = domain.dim
    out = []
    for k, t in enumerate(_TEMPLATES):
        a, b = x(1 + k % n), x(1 + (k + 1) % n)
        out.append(embed_smooth(t(a, b), domain))
    return out


def probe_pairs(domain: DomainSpec):
    """The 20 fixed (u, v) pairs of the audit corpus."""
    fs = probe_functions(domain)
    return [(fs[i], fs[k]) for i, k in _PAIRS]


def audit_functional(nu: Functional, grid: EpsGrid = DEFAULT_GRID) -> tuple[Verdict, list]:
    """Audit nu(1) = 1, linearity and multiplicativity on the probe corpus.

    Returns ``(verdict, failures)``; each failure names the probe.
    """
    dom = nu.domain
    one = embed_smooth(1, dom)
    checks = [("nu(1) = 1", lambda: gn_eq(nu(one), GeneralizedNumber(1, grid)))]
    for idx, (u, v) in enumerate(probe_pairs(dom)):
        c = _SCALARS[idx % len(_SCALARS)]
        tu, tv = dsl.to_text(u.rep), dsl.to_text(v.rep)
        checks.append((f"linear #{idx}: nu({c}*u + v), u={tu}, v={tv}",
                       lambda u=u, v=v, c=c: gn_eq(nu(u * const(c) + v), nu(u) * const(c) + nu(v))))
        checks.append((f"multiplicative #{idx}: nu(u*v), u={tu}, v={tv}",
                       lambda u=u, v=v: gn_eq(nu(u * v), nu(u) * nu(v))))
    failures, undecided = [], 0
    for name, run in checks:
        v = run()
        if v.refuted:
            failures.append({"probe": name, "verdict": v.to_dict()})
        elif not v.proven:
            undecided += 1
    ev = {"probe_version": PROBE_VERSION, "checks": len(checks), "failures": failures, "undecided": undecided}
    if failures:
        return Verdict(REFUTED, ev), failures
    if undecided:
        return Verdict(UNDETERMINED, {**ev, "consistent": True}), failures
    return Verdict(PROVEN, ev), failures


def _verification_corpus(domain):
    n = domain.dim
    xs = [x(i + 1) for i in range(n)]
    s = xs[0]
    for c in xs[1:]:
        s = s + c
    return [embed_smooth(f, domain) for f in
            [dsl.sin(s), dsl.exp(xs[-1]), s * s * s, dsl.cos(xs[0] * const(3)), dsl.atan(s) + xs[0] * xs[-1]]]


def recover_point(nu: Functional, grid: EpsGrid = DEFAULT_GRID, report: bool = False):
    """Point x with nu(u) = u(x), rebuilt from the coordinate functions.

    Raises AuditFailure when the probe audit refutes nu(1) = 1, linearity or
    multiplicativity.  With ``report`` returns ``(point, evidence)``.
    """
    audit, failures = audit_functional(nu, grid)
    if failures:
        raise AuditFailure(f"functional rejected by probe {failures[0]['probe']!r}", failures[0]["probe"], audit)
    dom = nu.domain
    comps = [nu(embed_smooth(x(i + 1), dom)).rep for i in range(dom.dim)]
    pt = GeneralizedPoint(tuple(comps), grid=grid)
    if not dom.contains_box(pt.support):
        raise AuditFailure("recovered point is not compactly supported in the domain", None, audit)
    checks = []
    for u in _verification_corpus(dom):
        v = gn_eq(nu(u), eval_at(u, pt))
        if v.refuted:
            raise AuditFailure(f"nu(u) differs from u(x) for u = {dsl.to_text(u.rep)}", None, v)
        checks.append(v.status)
    # alternative recovery through shifted coordinates
    alt = [nu(embed_smooth(x(i + 1) + const(1), dom)).rep - const(1) for i in range(dom.dim)]
    unique = point_equal(pt, GeneralizedPoint(tuple(alt), grid=grid))
    if unique.refuted:
        raise AuditFailure("alternative recovery disagrees", None, unique)
    ev = {"audit": audit.to_dict(), "verification": checks, "uniqueness": unique.status}
    return (pt, ev) if report else pt


# ------------------------------------------------------------ witness points

MAX_RATIO = 0.9


def thin_samples(samples, ratio: float = MAX_RATIO):
    """Drop samples until consecutive eps values satisfy eps_{m+1} <= ratio * eps_m."""
    out = []
    for e, p in sorted(samples, key=lambda s: -s[0]):
        if not out or e <= ratio * out[-1][0]:
            out.append((e, p))
    return out


def interpolate_witness(samples, n: int | None = None, grid: EpsGrid = DEFAULT_GRID) -> GeneralizedPoint:
    """Smooth net through the samples (eps_m, x_m), exact at every knot.

    Between consecutive knots eps_{m+1} < eps_m the switch sigma_m rises from
    0 to 1 over the middle half of the gap; the weights
    phi_m = sigma_m - sigma_{m-1} form a partition of unity equal to an
    indicator near each knot.
    """
    samples = [(float(e), tuple(float(c) for c in np.atleast_1d(p))) for e, p in samples]
    if not samples:
        raise ValueError("no samples")
    n = n or len(samples[0][1])
    if any(len(p) != n for _, p in samples):
        raise ValueError("samples of mixed dimension")
    eps = [e for e, _ in samples]
    if any(not b < a for a, b in zip(eps, eps[1:])):
        raise ValueError("sample eps values must be strictly decreasing")
    for a, b in zip(eps, eps[1:]):
        if b > MAX_RATIO * a:
            raise ValueError(f"samples too close ({b:g} > {MAX_RATIO}*{a:g}); re-thin with thin_samples")
    M = len(samples)
    sig = []
    for (a_hi, _), (a_lo, _) in zip(samples, samples[1:]):
        lo = Fraction(a_lo) + (Fraction(a_hi) - Fraction(a_lo)) / 4
        hi = Fraction(a_lo) + 3 * (Fraction(a_hi) - Fraction(a_lo)) / 4
        sig.append(dsl.smoothstep((EPS - const(lo)) / const(hi - lo)))
    # With phi_m = sigma_m - sigma_{m-1} (sigma_0 = 0, sigma_M = 1) the weights sum
    # to 1 identically, and sum phi_m x_m telescopes to
    # x_M + sum_m sigma_m (x_m - x_{m+1}).  The switches have disjoint transition
    # bands, so at eps_k exactly the sigma_m with m >= k equal 1.
    comps = []
    for i in range(n):
        vals = [Fraction(p[i]) for _, p in samples]
        c = const(vals[-1])
        for m in range(M - 1):
            if vals[m] != vals[m + 1]:
                c = c + sig[m] * const(vals[m] - vals[m + 1])
        comps.append(c)
    pts = np.array([p for _, p in samples])
    support = tuple((float(pts[:, i].min()), float(pts[:, i].max())) for i in range(n))
    return GeneralizedPoint(tuple(comps), support, grid)
