"""c-bounded generalized maps and the algebra morphisms they induce by pullback."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import eps_dsl as dsl
from .asymptotics import DEFAULT_GRID, PROVEN, REFUTED, UNDETERMINED, EpsGrid, Verdict, range_bounds
from .eps_dsl import Expr, const, x
from .gfun import DomainSpec, GeneralizedFunction, embed_smooth, eval_at, gf_eq
from .gpoints import GeneralizedPoint, probe_pairs, PROBE_VERSION


class MorphismAuditFailure(ValueError):
    def __init__(self, msg, probe=None, verdict=None):
        super().__init__(msg)
        self.probe = probe
        self.verdict = verdict


class DimensionAlarm(RuntimeError):
    """A verified two-sided inverse between domains of different dimension."""


@dataclass(frozen=True)
class CBoundedMap:
    """phi: Omega_Y -> Omega_X given by one representative per target coordinate.

    ``source`` is Omega_Y (the variables x1.. of the components), ``target``
    is Omega_X.
    """

    source: DomainSpec
    target: DomainSpec
    components: tuple
    grid: EpsGrid = field(default=DEFAULT_GRID, compare=False)

    def __post_init__(self):
        comps = []
        for c in self.components:
            rep = c.rep if isinstance(c, GeneralizedFunction) else c
            comps.append(GeneralizedFunction(self.source, rep, self.grid).rep)
        if len(comps) != self.target.dim:
            raise ValueError(f"{len(comps)} components for a {self.target.dim}-dim target")
        object.__setattr__(self, "components", tuple(comps))

    def component(self, i) -> GeneralizedFunction:
        return GeneralizedFunction(self.source, self.components[i], self.grid)

    def to_dict(self):
        return {"source": self.source.to_dict(), "target": self.target.to_dict(),
                "components": [dsl.to_text(c) for c in self.components]}

    @classmethod
    def from_json(cls, data, grid: EpsGrid = DEFAULT_GRID):
        data = json.loads(data) if isinstance(data, str) else data
        return cls(DomainSpec.from_json(data["source"]), DomainSpec.from_json(data["target"]),
                   tuple(dsl.parse(c) for c in data["components"]), grid)

    def __repr__(self):
        return f"CBoundedMap({[dsl.to_text(c) for c in self.components]})"


def identity_map(domain: DomainSpec, grid: EpsGrid = DEFAULT_GRID) -> CBoundedMap:
    return CBoundedMap(domain, domain, tuple(x(i + 1) for i in range(domain.dim)), grid)


def check_c_bounded(phi: CBoundedMap, density: int | None = None) -> Verdict:
    """Each K_j is mapped into a fixed compact subset of the target for small eps."""
    trace, undecided, images = [], [], {}
    for j in range(1, phi.source.j_max + 1):
        box = phi.source.compact_box(j)
        rb = [range_bounds(c, box, phi.grid.eps_max) for c in phi.components]
        if all(r is not None for r in rb):
            img = tuple((float(r[0]), float(r[1])) for r in rb)
            if phi.target.contains_box(img):
                trace.append(f"K_{j}: symbolic image box {img} inside the target")
                images[j] = img
                continue
        undecided.append(j)
    if not undecided:
        return Verdict(PROVEN, {"rule_trace": trace, "images": images})
    eps = phi.grid.eps[phi.grid.tail_mask()]
    for j in undecided:
        pts = phi.source.lattice(j, density)
        coords = [pts[None, :, i] for i in range(phi.source.dim)]
        img = np.stack([np.broadcast_to(dsl.evaluate_many(c, eps[:, None], coords), (len(eps), len(pts)))
                        for c in phi.components], axis=-1)
        flat = img.reshape(-1, phi.target.dim)
        inside = phi.target.contains_points(np.nan_to_num(flat, nan=np.inf)).reshape(len(eps), len(pts))
        if not inside.all():
            ke, kp = np.argwhere(~inside)[0]
            wit = {"eps": float(eps[ke]), "y": [float(v) for v in pts[kp]], "image": [float(v) for v in img[ke, kp]]}
            trace.append(f"K_{j}: sampled image leaves the target")
            return Verdict(REFUTED, {"rule_trace": trace, "j": j, "witnesses": [wit]})
        images[j] = tuple((float(img[..., i].min()), float(img[..., i].max())) for i in range(phi.target.dim))
        trace.append(f"K_{j}: sampled tail image inside {images[j]}")
    return Verdict(UNDETERMINED, {"rule_trace": trace, "consistent": True, "images": images})


@dataclass(frozen=True)
class AlgebraMorphism:
    """Phi: G(source) -> G(target), an opaque action on generalized functions.

    The action must be pure.  ``unital`` records a structural guarantee of
    Phi(1) = 1; the audit checks it regardless.
    """

    action: Callable[[GeneralizedFunction], GeneralizedFunction]
    source: DomainSpec
    target: DomainSpec
    unital: bool = False
    label: str = ""
    map: CBoundedMap | None = field(default=None, compare=False)

    def __call__(self, u: GeneralizedFunction) -> GeneralizedFunction:
        if u.domain != self.source:
            raise ValueError("function lives on a different domain than the morphism source")
        out = self.action(u)
        if out.domain != self.target:
            raise ValueError("morphism produced a function on the wrong domain")
        return out


def _substitute_map(rep: Expr, comps) -> Expr:
    return dsl.substitute(rep, {f"x{i + 1}": c for i, c in enumerate(comps)})


def pullback(phi: CBoundedMap, check: bool = True) -> AlgebraMorphism:
    """u -> u o phi, by symbolic substitution."""
    if check:
        v = check_c_bounded(phi)
        if v.refuted:
            raise ValueError(f"{phi!r} is not c-bounded: {v.evidence['rule_trace'][-1]}")
    return AlgebraMorphism(lambda u: GeneralizedFunction(phi.source, _substitute_map(u.rep, phi.components), u.grid),
                           phi.target, phi.source, unital=True, label=f"pullback by {phi!r}", map=phi)


def audit_morphism(Phi: AlgebraMorphism) -> tuple[Verdict, list]:
    """Phi(1) = 1, linearity and multiplicativity on the fixed probe corpus."""
    one = embed_smooth(1, Phi.source)
    checks = [("Phi(1) = 1", lambda: gf_eq(Phi(one), embed_smooth(1, Phi.target)))]
    for idx, (u, v) in enumerate(probe_pairs(Phi.source)):
        tu, tv = dsl.to_text(u.rep), dsl.to_text(v.rep)
        checks.append((f"linear #{idx}: Phi(2u - v), u={tu}, v={tv}",
                       lambda u=u, v=v: gf_eq(Phi(u * 2 - v), Phi(u) * 2 - Phi(v))))
        checks.append((f"multiplicative #{idx}: Phi(u*v), u={tu}, v={tv}",
                       lambda u=u, v=v: gf_eq(Phi(u * v), Phi(u) * Phi(v))))
    failures, undecided = [], 0
    for name, run in checks:
        v = run()
        if v.refuted:
            failures.append({"probe": name, "verdict": v.to_dict()})
            break
        if not v.proven:
            undecided += 1
    ev = {"probe_version": PROBE_VERSION, "checks": len(checks), "failures": failures, "undecided": undecided}
    if failures:
        return Verdict(REFUTED, ev), failures
    if undecided:
        return Verdict(UNDETERMINED, {**ev, "consistent": True}), failures
    return Verdict(PROVEN, ev), failures


def _map_eq(a: CBoundedMap, b: CBoundedMap) -> Verdict:
    """Componentwise equality in G(source)."""
    verdicts = [gf_eq(a.component(i), b.component(i)) for i in range(a.target.dim)]
    for v in verdicts:
        if v.refuted:
            return v
    if all(v.proven for v in verdicts):
        return Verdict(PROVEN, {"components": [v.status for v in verdicts]})
    return Verdict(UNDETERMINED, {"components": [v.status for v in verdicts],
                                  "consistent": all(v.consistent for v in verdicts)})


def recover_map(Phi: AlgebraMorphism, report: bool = False):
    """The unique c-bounded phi with Phi(u) = u o phi, from Phi(pr_i)."""
    audit, failures = audit_morphism(Phi)
    if failures:
        raise MorphismAuditFailure(f"morphism rejected by probe {failures[0]['probe']!r}", failures[0]["probe"], audit)
    X, Y = Phi.source, Phi.target
    grid = embed_smooth(1, X).grid
    comps = tuple(Phi(embed_smooth(x(i + 1), X)).rep for i in range(X.dim))
    phi = CBoundedMap(Y, X, comps, grid)
    cb = check_c_bounded(phi)
    if cb.refuted:
        raise MorphismAuditFailure("recovered map is not c-bounded (alarm)", None, cb)
    alt = CBoundedMap(Y, X, tuple(Phi(embed_smooth(x(i + 1) + const(1), X)).rep - const(1)
                                  for i in range(X.dim)), grid)
    unique = _map_eq(phi, alt)
    if unique.refuted:
        raise MorphismAuditFailure("two recoveries disagree", None, unique)
    ev = {"audit": audit.to_dict(), "c_bounded": cb.to_dict(), "uniqueness": unique.status}
    return (phi, ev) if report else phi


def default_corpus(domain: DomainSpec) -> list:
    xs = [x(i + 1) for i in range(domain.dim)]
    s = xs[0]
    for c in xs[1:]:
        s = s + c
    return [embed_smooth(f, domain) for f in
            [s, s * s, dsl.sin(s), dsl.exp(xs[0] * const(-1)), dsl.cos(xs[-1]) * xs[0], dsl.atan(s * const(2))]]


def verify_factorization(Phi: AlgebraMorphism, phi: CBoundedMap, corpus=None) -> dict:
    """gf_eq(Phi(u), u o phi) over a corpus of functions on the morphism source."""
    corpus = corpus if corpus is not None else default_corpus(Phi.source)
    pb = pullback(phi, check=False)
    mean_value = _mean_value_applicable(Phi, phi)
    entries = []
    for u in corpus:
        v = gf_eq(Phi(u), pb(u))
        if not v.proven and mean_value and u.moderate.proven:
            v = Verdict(PROVEN, {"rule_trace": ["mean value: maps agree up to a negligible net, "
                                                "u has moderate derivatives on a convex target"]})
        entries.append({"u": dsl.to_text(u.rep), "status": v.status, "verdict": v.to_dict()})
    statuses = [e["status"] for e in entries]
    status = REFUTED if REFUTED in statuses else PROVEN if all(s == PROVEN for s in statuses) else UNDETERMINED
    return {"status": status, "counts": {s: statuses.count(s) for s in (PROVEN, REFUTED, UNDETERMINED)},
            "entries": entries}


def _mean_value_applicable(Phi, phi) -> bool:
    """Phi is a pullback by a map provably equal to phi, both c-bounded into a box target."""
    psi = Phi.map
    if psi is None or psi.target != phi.target or phi.target.shape != "box":
        return False
    if check_c_bounded(psi).refuted or check_c_bounded(phi).refuted:
        return False
    return _map_eq(psi, phi).proven


def compose_maps(phi: CBoundedMap, psi: CBoundedMap) -> CBoundedMap:
    """phi o psi for psi: Z -> Y and phi: Y -> X."""
    if psi.target.dim != phi.source.dim or psi.target != phi.source:
        raise ValueError("domain mismatch: psi's target is not phi's source")
    return CBoundedMap(psi.source, phi.target,
                       tuple(_substitute_map(c, psi.components) for c in phi.components), phi.grid)


def push_point(phi: CBoundedMap, pt: GeneralizedPoint) -> GeneralizedPoint:
    """phi(y~), components eval_at(phi_i, y~)."""
    return GeneralizedPoint(tuple(eval_at(phi.component(i), pt).rep for i in range(phi.target.dim)), grid=pt.grid)


def evaluation_compatibility(Phi: AlgebraMorphism, phi: CBoundedMap, points, corpus=None) -> dict:
    """gn_eq(Phi(u)(y~), u(phi(y~))) over points y~ and a corpus u."""
    from .gnum import gn_eq
    corpus = corpus if corpus is not None else default_corpus(Phi.source)
    statuses = []
    for pt in points:
        img = push_point(phi, pt)
        for u in corpus:
            statuses.append(gn_eq(eval_at(Phi(u), pt), eval_at(u, img)).status)
    return {"refuted": statuses.count(REFUTED), "proven": statuses.count(PROVEN), "total": len(statuses)}


def verify_isomorphism(Phi: AlgebraMorphism, Phi_inv: AlgebraMorphism) -> Verdict:
    """Recover phi and phi' and check both compositions against the identity."""
    X, Y = Phi.source, Phi.target
    if Phi_inv.source != Y or Phi_inv.target != X:
        return Verdict(REFUTED, {"reason": "the candidate inverse has mismatched domains",
                                 "dims": {"X": X.dim, "Y": Y.dim}})
    ev = {"dims": {"X": X.dim, "Y": Y.dim}}
    try:
        phi = recover_map(Phi)
        phi_p = recover_map(Phi_inv)
    except MorphismAuditFailure as exc:
        return Verdict(REFUTED, {**ev, "reason": str(exc), "probe": exc.probe})
    ev["phi"] = phi.to_dict()["components"]
    ev["phi_inv"] = phi_p.to_dict()["components"]
    try:
        on_x = _map_eq(compose_maps(phi, phi_p), identity_map(X, phi.grid))
        on_y = _map_eq(compose_maps(phi_p, phi), identity_map(Y, phi.grid))
    except ValueError as exc:
        return Verdict(REFUTED, {**ev, "reason": str(exc)})
    ev["phi o phi_inv = id_X"] = on_x.to_dict()
    ev["phi_inv o phi = id_Y"] = on_y.to_dict()
    if on_x.refuted or on_y.refuted:
        return Verdict(REFUTED, ev)
    if X.dim != Y.dim:
        raise DimensionAlarm(f"two-sided inverse between dimensions {X.dim} and {Y.dim}")
    if on_x.proven and on_y.proven:
        return Verdict(PROVEN, ev)
    return Verdict(UNDETERMINED, {**ev, "consistent": on_x.consistent and on_y.consistent})
