"""Smooth-algebra isomorphisms of flat tori and their Colombeau lifts.

Functions on T^d are eps-free expressions in the angles x1..xd that are
2*pi-periodic in each angle.  An isomorphism Psi of C^inf(T^d) is handled
through its action on such expressions; when it is the pullback by a
diffeomorphism psi, extraction recovers psi from Psi(cos x_i), Psi(sin x_i).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from . import eps_dsl as dsl
from .asymptotics import (DEFAULT_GRID, PROVEN, REFUTED, UNDETERMINED, EpsGrid, Verdict,
                          fit_order)
from .eps_dsl import Expr, const, x
from .gfun import DomainSpec, GeneralizedFunction, seminorm_net
from .morphisms import AlgebraMorphism

TWO_PI = 2.0 * np.pi
TOL_PERIODIC = 1e-9
TOL_PROJECTION = 1e-8
TOL_NEWTON = 1e-12
MIN_JACOBIAN = 0.05


class PeriodicityError(ValueError):
    pass


class IsoAuditFailure(ValueError):
    pass


class ExtractionError(ValueError):
    pass


def _expr(f):
    return dsl.parse(f) if isinstance(f, str) else f if isinstance(f, Expr) else const(f)


def _eval(f: Expr, pts: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(pts)
    out = dsl.evaluate_many(f, 1.0, [pts[:, i] for i in range(pts.shape[1])])
    return np.broadcast_to(out, (len(pts),)).astype(float)


@dataclass(frozen=True)
class TorusModel:
    """Flat torus T^d = (R / 2 pi Z)^d with the embedding theta -> (cos, sin)^d."""

    d: int = 1
    lattice: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if self.lattice is None:
            object.__setattr__(self, "lattice", {1: 512, 2: 128}.get(self.d, 32))

    @property
    def shape(self):
        return (self.lattice,) * self.d

    @property
    def h(self):
        return TWO_PI / self.lattice

    def thetas(self, n: int | None = None) -> np.ndarray:
        n = n or self.lattice
        ax = np.arange(n) * (TWO_PI / n)
        grids = np.meshgrid(*([ax] * self.d), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def domain(self) -> DomainSpec:
        return DomainSpec(self.d, tuple((0.0, TWO_PI) for _ in range(self.d)), compact=True)

    def embedding(self) -> list:
        out = []
        for i in range(self.d):
            out += [dsl.cos(x(i + 1)), dsl.sin(x(i + 1))]
        return out

    def check_periodic(self, f) -> float:
        f = _expr(f)
        if dsl.depends_on(f, "eps"):
            raise PeriodicityError("torus functions must not depend on eps")
        if dsl.max_coord_index(f) > self.d:
            raise PeriodicityError(f"function uses more than {self.d} angles")
        pts = self.thetas(min(self.lattice, 64))
        base = _eval(f, pts)
        defect = 0.0
        for i in range(self.d):
            shifted = pts.copy()
            shifted[:, i] += TWO_PI
            defect = max(defect, float(np.max(np.abs(_eval(f, shifted) - base))))
        if defect > TOL_PERIODIC:
            raise PeriodicityError(f"{dsl.to_text(f)} is not 2*pi-periodic (defect {defect:.3g})")
        return defect

    def to_dict(self):
        return {"d": self.d, "lattice": self.lattice}


# --------------------------------------------------------- trig interpolation

class TrigFunction:
    """Trigonometric interpolant of values on the periodic lattice."""

    def __init__(self, values: np.ndarray):
        self.values = np.asarray(values, float)
        self.n, self.d = self.values.shape[0], self.values.ndim
        self.coef = np.fft.fftn(self.values) / self.values.size
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        if self.n % 2 == 0:
            k[self.n // 2] = 0.0  # drop the Nyquist mode from derivatives
        self._k = k

    @classmethod
    def from_expr(cls, f, M: TorusModel):
        return cls(_eval(_expr(f), M.thetas()).reshape(M.shape))

    def derivative(self, axis: int) -> "TrigFunction":
        shape = [1] * self.d
        shape[axis] = self.n
        dc = self.coef * (1j * self._k).reshape(shape)
        return TrigFunction(np.real(np.fft.ifftn(dc * self.values.size)))

    def _on_lattice(self, pts):
        if pts.shape != (self.values.size, self.d):
            return False
        ax = np.arange(self.n) * (TWO_PI / self.n)
        grids = np.meshgrid(*([ax] * self.d), indexing="ij")
        return all(np.array_equal(pts[:, i], g.ravel()) for i, g in enumerate(grids))

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self._on_lattice(pts):
            return self.values.ravel().copy()
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        E = [np.exp(1j * np.outer(pts[:, i], k)) for i in range(self.d)]
        if self.d == 1:
            return np.real(E[0] @ self.coef)
        if self.d == 2:
            return np.real(np.sum((E[0] @ self.coef) * E[1], axis=1))
        out = self.coef
        res = np.empty(len(pts))
        for p in range(len(pts)):
            c = out
            for i in range(self.d):
                c = np.tensordot(E[i][p], c, axes=(0, 0))
            res[p] = np.real(c)
        return res

    def flat(self):
        return self.values.ravel()


def _as_function(f, M: TorusModel):
    """(callable on points, lattice values) for an Expr, TrigFunction or callable."""
    if isinstance(f, TrigFunction):
        return f, f.flat()
    if callable(f) and not isinstance(f, (Expr, str)):
        return f, np.asarray(f(M.thetas()), float)
    e = _expr(f)
    F = lambda pts, e=e: _eval(e, pts)
    return F, F(M.thetas())


# --------------------------------------------------------------- sup and range

def _polish(F, M: TorusModel, vals: np.ndarray, sign: float, top: int = 3):
    """Local maximisation of sign*F from the best lattice points."""
    pts = M.thetas()
    best = float(np.max(sign * vals))
    for idx in np.argsort(-sign * vals)[:top]:
        p0 = pts[idx]
        if M.d == 1:
            g = lambda t: -sign * float(F(np.array([[t]]))[0])
            r = minimize_scalar(g, bounds=(p0[0] - M.h, p0[0] + M.h), method="bounded",
                                options={"xatol": 1e-13})
            best = max(best, -float(r.fun))
        else:
            g = lambda t: -sign * float(F(t[None, :])[0])
            r = minimize(g, p0, method="Nelder-Mead",
                         options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 2000})
            best = max(best, -float(r.fun))
    return sign * best


def spectrum_range(f, M: TorusModel) -> tuple[float, float]:
    """f(T^d) = [min f, max f] for real f on the connected torus."""
    F, vals = _as_function(f, M)
    return _polish(F, M, vals, -1.0), _polish(F, M, vals, 1.0)


def spectral_radius(f, M: TorusModel) -> float:
    lo, hi = spectrum_range(f, M)
    return max(abs(lo), abs(hi))


def sup_norm(f, M: TorusModel) -> float:
    F, vals = _as_function(f, M)
    return _polish(lambda p: np.abs(F(p)), M, np.abs(vals), 1.0)


def norm_report(f, M: TorusModel) -> dict:
    F, vals = _as_function(f, M)
    lattice = float(np.max(np.abs(vals)))
    polished = sup_norm(f, M)
    dense = TorusModel(M.d, M.lattice * 2)
    _, dv = _as_function(f, dense) if not isinstance(f, TrigFunction) else (None, vals)
    return {"lattice": M.lattice, "lattice_sup": lattice, "sup_norm": polished,
            "spectral_radius": spectral_radius(f, M), "range": list(spectrum_range(f, M)),
            "refinement_discrepancy": abs(float(np.max(np.abs(dv))) - polished)}


def _roots(F, M: TorusModel, target: float, limit: int = 4):
    """Roots of F = target along lattice cells (d = 1)."""
    th = np.append(M.thetas()[:, 0], TWO_PI)
    g = F(th[:, None]) - target
    out = [float(th[i]) for i in np.flatnonzero(g[:-1] == 0)]
    for i in np.flatnonzero(g[:-1] * g[1:] < 0)[:limit]:
        out.append(brentq(lambda t: float(F(np.array([[t]]))[0]) - target, th[i], th[i + 1], xtol=1e-15))
    return sorted(out)


def resolvent_check(f, lam: complex, M: TorusModel, tol: float = 1e-10) -> Verdict:
    """Is f - lam invertible in C(T^d)?"""
    F, vals = _as_function(f, M)
    lo, hi = spectrum_range(f, M)
    lam = complex(lam)
    dist = abs(lam.imag) if lo <= lam.real <= hi else abs(lam - (lo if lam.real < lo else hi))
    ev = {"lambda": [lam.real, lam.imag], "range": [lo, hi], "distance": dist, "lattice": M.lattice}
    if dist > 1e-9:
        inv = 1.0 / (vals - lam)
        defect = float(np.max(np.abs((vals - lam) * inv - 1.0)))
        ev.update(inverse_sup=float(np.max(np.abs(inv))), inverse_bound=1.0 / dist, defect=defect)
        return Verdict(PROVEN if defect <= tol else UNDETERMINED, ev)
    wit = []
    if M.d == 1:
        wit = _roots(F, M, lam.real)
    else:
        idx = int(np.argmin(np.abs(vals - lam.real)))
        wit = [M.thetas()[idx].tolist()]
    ev["witness_theta"] = wit
    return Verdict(REFUTED, ev)


def holomorphic_closure_check(f, M: TorusModel, max_order: int = 4) -> Verdict:
    """1/f is smooth exactly when f has no zero."""
    f = _expr(f)
    M.check_periodic(f)
    fine = TorusModel(M.d, M.lattice * 2)
    F, vals = _as_function(f, fine)
    lo, hi = spectrum_range(f, fine)
    ev = {"range": [lo, hi], "lattice": fine.lattice}
    if lo <= 0.0 <= hi:
        ev["witness_theta"] = _roots(F, fine, 0.0) if M.d == 1 else []
        return Verdict(REFUTED, ev)
    g = const(1) / f
    sups = []
    for order in range(max_order + 1):
        v = _eval(g, fine.thetas())
        if not np.all(np.isfinite(v)):
            return Verdict(UNDETERMINED, {**ev, "consistent": False, "order": order})
        sups.append(float(np.max(np.abs(v))))
        g = dsl.differentiate(g, "x1")
    ev["derivative_sups"] = sups
    return Verdict(PROVEN, ev)


# ---------------------------------------------------------------- diffeomorphisms

class TorusDiffeo:
    """psi(theta) = A theta + p(theta), A an integer matrix with det = +-1, p periodic.

    ``exprs`` holds symbolic components when known; otherwise the periodic
    parts are trigonometric interpolants of lattice values.
    """

    def __init__(self, M: TorusModel, A, periodic, exprs=None):
        self.M = M
        self.A = np.asarray(A, dtype=int).reshape(M.d, M.d)
        self.periodic = list(periodic)
        self.exprs = tuple(exprs) if exprs is not None else None
        self._jac = None
        if self.exprs is not None:
            self._jac = [[dsl.differentiate(e, f"x{k + 1}") for k in range(M.d)] for e in self.exprs]

    @classmethod
    def from_exprs(cls, exprs, M: TorusModel):
        exprs = [_expr(e) for e in exprs]
        if len(exprs) != M.d:
            raise ValueError("one component per angle")
        zero = np.zeros((1, M.d))
        A = np.zeros((M.d, M.d))
        for k in range(M.d):
            e_k = zero.copy()
            e_k[0, k] = TWO_PI
            for i, e in enumerate(exprs):
                A[i, k] = (_eval(e, e_k)[0] - _eval(e, zero)[0]) / TWO_PI
        if np.max(np.abs(A - np.round(A))) > 1e-9:
            raise ValueError("components do not descend to the torus")
        A = np.round(A).astype(int)
        periodic = []
        for i, e in enumerate(exprs):
            lin = None
            for k in range(M.d):
                if A[i, k]:
                    t = const(int(A[i, k])) * x(k + 1)
                    lin = t if lin is None else lin + t
            p = e - lin if lin is not None else e
            M.check_periodic(p)
            periodic.append(p)
        return cls(M, A, periodic, exprs)

    @property
    def d(self):
        return self.M.d

    def __call__(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        lin = pts @ self.A.T
        per = np.stack([_eval(p, pts) if isinstance(p, Expr) else p(pts) for p in self.periodic], axis=1)
        return lin + per

    def jacobian(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self._jac is not None:
            return np.stack([np.stack([_eval(e, pts) for e in row], axis=1) for row in self._jac], axis=1)
        if not hasattr(self, "_dper"):
            self._dper = [[p.derivative(k) for k in range(self.d)] for p in self.periodic]
        J = np.stack([np.stack([dp(pts) for dp in row], axis=1) for row in self._dper], axis=1)
        return J + self.A[None, :, :]

    @property
    def orientation(self) -> int:
        return int(np.sign(round(np.linalg.det(self.A))))

    def certificate(self) -> dict:
        det = np.linalg.det(self.jacobian(self.M.thetas()))
        degree = int(round(np.linalg.det(self.A)))
        ok = abs(degree) == 1 and bool(np.all(np.sign(det) == np.sign(degree))) and float(np.min(np.abs(det))) > MIN_JACOBIAN
        return {"min_abs_jacobian": float(np.min(np.abs(det))), "degree": degree,
                "orientation": self.orientation, "ok": ok, "lattice": self.M.lattice}

    def inverse(self, pts, tol: float = TOL_NEWTON, max_iter: int = 50) -> np.ndarray:
        """Newton solve of psi(phi) = theta for the lift; raises if any point stalls."""
        pts = np.atleast_2d(pts).astype(float)
        Ainv = np.linalg.inv(self.A)
        phi = pts @ Ainv.T
        for _ in range(max_iter):
            r = self(phi) - pts
            if np.max(np.abs(r)) <= tol:
                return phi
            phi = phi - np.linalg.solve(self.jacobian(phi), r[..., None])[..., 0]
        r = np.max(np.abs(self(phi) - pts))
        if r > tol:
            raise ExtractionError(f"Newton inverse did not converge (residual {r:.3g})")
        return phi

    def to_dict(self):
        out = {"A": self.A.tolist(), "certificate": self.certificate()}
        if self.exprs is not None:
            out["components"] = [dsl.to_text(e) for e in self.exprs]
        return out


def diffeo_distance(a: TorusDiffeo, b: TorusDiffeo) -> float:
    """Sup distance of the lifts over the lattice."""
    pts = a.M.thetas()
    return float(np.max(np.abs(a(pts) - b(pts))))


# ---------------------------------------------------------------- isomorphisms

@dataclass(frozen=True)
class TorusIso:
    """Psi: C^inf(T^d) -> C^inf(T^d), known through its values on points.

    ``values(f, pts)`` is Psi(f) at the points; ``expr`` gives Psi(f)
    symbolically when available; ``inverse_values(g, pts)`` evaluates
    Psi^-1(g) for a callable g.
    """

    M: TorusModel
    values: Callable
    expr: Callable | None = None
    inverse_values: Callable | None = None
    label: str = ""
    hidden: TorusDiffeo | None = field(default=None, compare=False, repr=False)


def pullback_iso(psi: TorusDiffeo, label: str = "") -> TorusIso:
    """Psi(f) = f o psi; psi stays hidden behind the action."""
    sym = None
    if psi.exprs is not None:
        sub = {f"x{i + 1}": e for i, e in enumerate(psi.exprs)}
        sym = lambda f: dsl.substitute(_expr(f), sub)
    return TorusIso(psi.M, lambda f, pts: _eval(_expr(f), psi(pts)), sym,
                    lambda g, pts: np.asarray(g(psi.inverse(pts)), float), label or "pullback", hidden=psi)


def scaled_iso(M: TorusModel, c: float = 2.0) -> TorusIso:
    """f -> c f, linear but neither unital nor multiplicative for c != 1."""
    return TorusIso(M, lambda f, pts: c * _eval(_expr(f), pts), lambda f: const(c) * _expr(f), None, f"scale {c}")


def probe_functions(M: TorusModel) -> list:
    d = M.d
    X = [x(1 + k % d) for k in range(4)]
    return [dsl.cos(X[0]), dsl.sin(X[1]), dsl.cos(X[0] * const(2)) + dsl.sin(X[1]),
            const(2) + dsl.cos(X[0] + X[1]), dsl.exp(dsl.sin(X[0])), dsl.cos(X[1]) * dsl.sin(X[0] * const(3)),
            dsl.atan(dsl.cos(X[0])), dsl.sin(X[0] + dsl.cos(X[1])), const(1) / (const(3) + dsl.cos(X[0])),
            dsl.cos(X[1] * const(2)) * const(Fraction(1, 2))]


_PAIRS = [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 6), (5, 7), (6, 8), (7, 9), (8, 0),
          (9, 1), (0, 0), (1, 1), (2, 7), (3, 8), (4, 9), (5, 0), (6, 2), (7, 3), (8, 4)]


def audit_iso(Psi: TorusIso, tol: float = 1e-10) -> Verdict:
    """Unital, linear and multiplicative on the probe corpus, on the lattice."""
    pts = Psi.M.thetas()
    fs = probe_functions(Psi.M)
    worst = {"unital": float(np.max(np.abs(Psi.values(const(1), pts) - 1.0)))}
    lin = mul = 0.0
    for i, k in _PAIRS:
        f, g = fs[i], fs[k]
        a, b = Psi.values(f, pts), Psi.values(g, pts)
        lin = max(lin, float(np.max(np.abs(Psi.values(const(2) * f - g, pts) - (2 * a - b)))))
        mul = max(mul, float(np.max(np.abs(Psi.values(f * g, pts) - a * b))))
    worst.update(linear=lin, multiplicative=mul)
    failed = [k for k, v in worst.items() if v > tol]
    ev = {"defects": worst, "tolerance": tol, "pairs": len(_PAIRS), "lattice": Psi.M.lattice}
    if failed:
        return Verdict(REFUTED, {**ev, "failed": failed})
    return Verdict(UNDETERMINED, {**ev, "consistent": True})


def _require_audit(Psi):
    v = audit_iso(Psi)
    if v.refuted:
        raise IsoAuditFailure(f"isomorphism audit failed: {v.evidence['failed']}")
    return v


# ------------------------------------------------------------------ derivations

@dataclass(frozen=True)
class Derivation:
    """D f = sum_i a_i df/dx_i with coefficients given as Exprs or TrigFunctions."""

    coeffs: tuple

    @property
    def symbolic(self):
        return all(isinstance(a, Expr) for a in self.coeffs)

    def apply_expr(self, f: Expr) -> Expr:
        if not self.symbolic:
            raise TypeError("numeric derivation has no symbolic action")
        out = None
        for i, a in enumerate(self.coeffs):
            t = a * dsl.differentiate(f, f"x{i + 1}")
            out = t if out is None else out + t
        return dsl.simplify(out)

    def apply(self, f, M: TorusModel) -> TrigFunction:
        tf = f if isinstance(f, TrigFunction) else TrigFunction.from_expr(f, M)
        pts = M.thetas()
        out = np.zeros(M.lattice ** M.d)
        for i, a in enumerate(self.coeffs):
            av = a.flat() if isinstance(a, TrigFunction) else _eval(a, pts)
            out += av * tf.derivative(i).flat()
        return TrigFunction(out.reshape(M.shape))


def coordinate_derivation(M: TorusModel, i: int = 0) -> Derivation:
    return Derivation(tuple(const(1 if k == i else 0) for k in range(M.d)))


@dataclass(frozen=True)
class PulledBack:
    derivation: Derivation
    action: Callable
    leibniz_defect: float
    verdict: Verdict


def derivation_pullback(Psi: TorusIso, D: Derivation, tol: float = 1e-8) -> PulledBack:
    """Psi^*(D) f = Psi^-1(D(Psi f)), realised by its action and by its coefficient.

    One-dimensional tori only.  The coefficient is b = -sin * Psi^*(D)(cos) +
    cos * Psi^*(D)(sin).
    """
    M = Psi.M
    if M.d != 1:
        raise NotImplementedError("derivation pullback is implemented on the circle")
    if Psi.inverse_values is None:
        raise ValueError("the isomorphism must come with its inverse")
    pts = M.thetas()

    def action(f, at=pts):
        f = _expr(f)
        if Psi.expr is not None and D.symbolic:
            g = D.apply_expr(Psi.expr(f))
            return Psi.inverse_values(lambda p: _eval(g, p), at)
        g = D.apply(TrigFunction(Psi.values(f, pts).reshape(M.shape)), M)
        return Psi.inverse_values(g, at)

    b = -np.sin(pts[:, 0]) * action(dsl.cos(x(1))) + np.cos(pts[:, 0]) * action(dsl.sin(x(1)))
    fs = probe_functions(M)
    defect = 0.0
    for i, k in _PAIRS:
        f, g = fs[i], fs[k]
        lhs = action(f * g)
        rhs = _eval(f, pts) * action(g) + _eval(g, pts) * action(f)
        defect = max(defect, float(np.max(np.abs(lhs - rhs))))
    ev = {"leibniz_defect": defect, "tolerance": tol, "pairs": len(_PAIRS), "lattice": M.lattice}
    v = Verdict(REFUTED, ev) if defect > tol else Verdict(UNDETERMINED, {**ev, "consistent": True})
    return PulledBack(Derivation((TrigFunction(b.reshape(M.shape)),)), action, defect, v)


def seminorm(f, Ds, M: TorusModel) -> float:
    """sup |D_1 ... D_k f|, k <= 3."""
    Ds = list(Ds)
    if len(Ds) > 3:
        raise ValueError("at most three derivations")
    if not isinstance(f, TrigFunction) and all(D.symbolic for D in Ds):
        g = _expr(f)
        for D in reversed(Ds):
            g = D.apply_expr(g)
        return sup_norm(g, M)
    g = f if isinstance(f, TrigFunction) else TrigFunction.from_expr(f, M)
    for D in reversed(Ds):
        g = D.apply(g, M)
    return sup_norm(g, M)


def default_corpus(M: TorusModel) -> list:
    return probe_functions(M)


def verify_norm_preservation(Psi: TorusIso, corpus=None, rel_tol: float = 1e-9) -> dict:
    """r(f) = r(Psi f) for every corpus f."""
    _require_audit(Psi)
    M = Psi.M
    corpus = corpus if corpus is not None else default_corpus(M)
    rows = []
    for f in corpus:
        f = _expr(f)
        a = spectral_radius(f, M)
        psi_f = Psi.expr(f) if Psi.expr is not None else (lambda p, f=f: Psi.values(f, p))
        b = spectral_radius(psi_f, M)
        rows.append({"f": dsl.to_text(f), "r_f": a, "r_psi_f": b, "error": abs(a - b),
                     "ok": abs(a - b) <= rel_tol * (1 + a)})
    return {"ok": all(r["ok"] for r in rows), "max_error": max(r["error"] for r in rows),
            "tolerance": rel_tol, "lattice": M.lattice, "rows": rows}


def verify_seminorm_transfer(Psi: TorusIso, corpus=None, tuples=None, tol: float = 1e-6) -> dict:
    """p_{D...}(Psi f) = p_{Psi^*D...}(f) on the circle."""
    _require_audit(Psi)
    M = Psi.M
    corpus = corpus if corpus is not None else default_corpus(M)[:6]
    d1 = coordinate_derivation(M)
    d2 = Derivation((dsl.cos(x(1)) + const(2),))
    tuples = tuples if tuples is not None else [(d1,), (d2,), (d1, d1), (d1, d2), (d2, d1, d1)]
    pulled = {}
    rows = []
    for Ds in tuples:
        pb = [pulled.setdefault(id(D), derivation_pullback(Psi, D)).derivation for D in Ds]
        for f in corpus:
            f = _expr(f)
            psi_f = Psi.expr(f) if Psi.expr is not None else TrigFunction(Psi.values(f, M.thetas()).reshape(M.shape))
            a = seminorm(psi_f, Ds, M)
            b = seminorm(f, pb, M)
            rows.append({"f": dsl.to_text(f), "k": len(Ds), "p_psi_f": a, "p_pullback": b,
                         "error": abs(a - b), "ok": abs(a - b) <= tol * (1 + a)})
    return {"ok": all(r["ok"] for r in rows), "max_error": max(r["error"] for r in rows),
            "tolerance": tol, "lattice": M.lattice, "rows": rows}


# ------------------------------------------------------------------- extraction

def _wrap(a):
    return (a + np.pi) % TWO_PI - np.pi


def extract_diffeo(Psi: TorusIso, report: bool = False):
    """psi with Psi(f) = f o psi, read off from Psi applied to the embedding.

    Angles come from atan2 of the projected (cos, sin) pairs, unwrapped to a
    continuous lift normalised by psi(0) in [0, 2 pi).
    """
    _require_audit(Psi)
    M = Psi.M
    pts = M.thetas()
    ang, defect = [], 0.0
    for i in range(M.d):
        c = Psi.values(dsl.cos(x(i + 1)), pts)
        s = Psi.values(dsl.sin(x(i + 1)), pts)
        norm = np.hypot(c, s)
        defect = max(defect, float(np.max(np.abs(norm - 1.0))))
        ang.append(np.arctan2(s, c).reshape(M.shape))
    if defect > TOL_PROJECTION:
        raise ExtractionError(f"images leave the embedded torus (projection defect {defect:.3g})")
    A = np.zeros((M.d, M.d), dtype=int)
    lifts = []
    for i, a in enumerate(ang):
        lift = a
        for k in range(M.d):
            lift = np.unwrap(lift, axis=k)
        for k in range(M.d):
            first = np.take(lift, 0, axis=k)
            last = np.take(lift, -1, axis=k)
            closing = _wrap(first - last)
            total = (np.take(last, 0) if last.ndim else last) + (np.take(closing, 0) if closing.ndim else closing) \
                - (np.take(first, 0) if first.ndim else first)
            A[i, k] = int(round(float(total) / TWO_PI))
        base = float(lift.flat[0])
        lift = lift - TWO_PI * np.floor(base / TWO_PI)
        lifts.append(lift)
    periodic = []
    for i, lift in enumerate(lifts):
        lin = (pts @ A[i]).reshape(M.shape)
        per = lift - lin
        periodic.append(TrigFunction(per))
    psi = TorusDiffeo(M, A, periodic)
    cert = psi.certificate()
    if not cert["ok"]:
        raise ExtractionError(f"Jacobian certificate failed: {cert}")

    # factorisation Psi(f) = f o psi on the lattice
    fact = 0.0
    img = psi(pts)
    for f in default_corpus(M):
        fact = max(fact, float(np.max(np.abs(Psi.values(f, pts) - _eval(f, img)))))
    # uniqueness: a second extraction through shifted coordinates
    alt = []
    for i in range(M.d):
        c = Psi.values(dsl.cos(x(i + 1) + const(1)), pts)
        s = Psi.values(dsl.sin(x(i + 1) + const(1)), pts)
        alt.append(np.arctan2(s, c) - 1.0)
    uniq = max(float(np.max(np.abs(_wrap(alt[i] - img[:, i])))) for i in range(M.d))
    # inverse round trip on the lattice
    inv = psi.inverse(pts)
    inv_err = float(np.max(np.abs(psi(inv) - pts)))
    ev = {"lattice": M.lattice, "projection_defect": defect, "factorization_error": fact,
          "uniqueness_error": uniq, "newton_residual": inv_err, "certificate": cert,
          "tolerances": {"projection": TOL_PROJECTION, "factorization": 1e-8, "newton": TOL_NEWTON}}
    if fact > 1e-8 or uniq > 1e-8:
        raise ExtractionError(f"extracted map does not factor Psi (error {max(fact, uniq):.3g})")
    return (psi, ev) if report else psi


def diffeo_corpus(M: TorusModel | None = None) -> list:
    """Ten circle diffeomorphisms as (label, component text)."""
    return [
        ("rotation 1", "(+ x1 1)"),
        ("rotation 5/2", "(+ x1 5/2)"),
        ("b = 0.1", "(+ x1 (* 0.1 (sin x1)))"),
        ("b = 0.3", "(+ x1 (* 0.3 (sin x1)))"),
        ("b = 0.6", "(+ x1 (* 0.6 (sin x1)))"),
        ("reflection", "(- 0 x1)"),
        ("reflection + 0.2 sin", "(+ (- 0 x1) (* 0.2 (sin x1)))"),
        ("0.3 sin + shift", "(+ (+ x1 (* 0.3 (sin x1))) 0.5)"),
        ("0.2 sin 2x", "(+ x1 (* 0.2 (sin (* 2 x1))))"),
        ("0.25 cos", "(+ x1 (* 0.25 (cos x1)))"),
    ]


# ------------------------------------------------------------------- lifting

def lift_isomorphism(Psi: TorusIso, grid: EpsGrid = DEFAULT_GRID) -> AlgebraMorphism:
    """Colombeau lift: Psi applied at every eps-slice of a representative."""
    _require_audit(Psi)
    if Psi.expr is None:
        raise ValueError("lifting needs a symbolic action")
    dom = Psi.M.domain()
    return AlgebraMorphism(lambda u: GeneralizedFunction(dom, Psi.expr(u.rep), u.grid), dom, dom,
                           unital=True, label=f"lift of {Psi.label}")


def net_corpus(M: TorusModel) -> tuple[list, list]:
    """Twenty negligible and twenty moderate nets on the torus."""
    fs = [dsl.cos(x(1)), dsl.sin(x(1)), dsl.cos(x(1) * const(2)), const(2) + dsl.sin(x(1))]
    if M.d > 1:
        fs = [f + dsl.cos(x(2)) for f in fs]
    decay = [dsl.exp(const(-1) / dsl.EPS), dsl.exp(const(-2) / dsl.EPS),
             dsl.exp(const(-1) / dsl.power(dsl.EPS, Fraction(1, 2))), dsl.power(dsl.EPS, -3) * dsl.exp(const(-1) / dsl.EPS),
             dsl.exp(const(-1) / dsl.EPS) * dsl.sin(const(1) / dsl.EPS)]
    grow = [dsl.power(dsl.EPS, -2), dsl.power(dsl.EPS, 3), dsl.sin(const(1) / dsl.EPS),
            dsl.log(dsl.EPS), const(1) + dsl.EPS]
    negl = [a * f for a in decay for f in fs]
    mod = [a * f for a in grow for f in fs]
    return negl, mod


def lift_report(Psi: TorusIso, grid: EpsGrid = DEFAULT_GRID, nets=None) -> dict:
    """Category preservation and fitted orders before and after the lift."""
    Phi = lift_isomorphism(Psi, grid)
    dom = Psi.M.domain()
    negl, mod = nets if nets is not None else net_corpus(Psi.M)
    rows, alarms = [], []
    for kind, items in (("negligible", negl), ("moderate", mod)):
        for rep in items:
            u = GeneralizedFunction(dom, rep, grid)
            v = Phi(u)
            if kind == "negligible":
                a, b = u.negligible, v.negligible
                ok = not b.refuted
                if a.consistent and b.refuted:
                    alarms.append(dsl.to_text(rep))
            else:
                a, b = u.moderate, v.moderate
                ok = not b.refuted
            row = {"net": dsl.to_text(rep), "kind": kind, "before": a.status, "after": b.status, "ok": ok}
            if kind == "moderate":
                try:
                    s0 = fit_order(seminorm_net(u, 1, refine=False), grid)[0]
                    s1 = fit_order(seminorm_net(v, 1, refine=False), grid)[0]
                    row.update(slope_before=s0, slope_after=s1)
                except ValueError:
                    pass
            rows.append(row)
    if alarms:
        raise RuntimeError(f"lift maps negligible nets to non-negligible ones: {alarms}")
    return {"ok": all(r["ok"] for r in rows), "rows": rows, "grid": grid.to_dict()}
