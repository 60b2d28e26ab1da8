"""Command-line front end and scenario runner."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import eps_dsl as dsl
from . import gfun, gnum, gpoints, morphisms, smooth_iso
from .asymptotics import (M_MAX, N_MAX, PROVEN, REFUTED, TOL_ZERO, EpsGrid, Verdict, _jsonable,
                          check_moderate, check_negligible, fit_order, symbolic_valuation)

KINDS = ("classify", "gn-eq", "s-inverse", "witness-S", "gf-classify", "gf-eval", "gf-invert", "gf-audit",
         "point-recover", "map-recover", "verify-factorization", "verify-iso", "iso-extract", "iso-lift",
         "iso-audit", "association")
ALIASES = {"eq": "gn-eq", "recover": "map-recover"}


class ScenarioError(ValueError):
    pass


# ------------------------------------------------------------------ parameters

@dataclass(frozen=True)
class Param:
    default: object
    kind: type
    lo: object = None
    hi: object = None


PARAMS = {
    "grid_ratio": Param(0.5, float, 0.05, 0.95),
    "k_min": Param(4, int, 0, 200),
    "k_max": Param(40, int, 1, 1000),
    "m_max": Param(M_MAX, int, 1, 40),
    "n_max": Param(N_MAX, int, 1, 40),
    "lattice": Param(None, int, 8, 4096),
    "seed": Param(0, int, 0, 2 ** 32 - 1),
    "tol_zero": Param(TOL_ZERO, float, 0.0, 1e-3),
    "tol_resolvent": Param(1e-10, float, 0.0, 1e-3),
    "tol_pairing": Param(1e-5, float, 0.0, 1.0),
}


@dataclass
class Settings:
    values: dict
    source: dict = field(default_factory=dict)

    @classmethod
    def build(cls, overrides: dict | None = None, base: "Settings | None" = None):
        vals = dict(base.values) if base else {k: p.default for k, p in PARAMS.items()}
        src = dict(base.source) if base else {k: "default" for k in PARAMS}
        for k, v in (overrides or {}).items():
            k = k.replace("-", "_")
            if k not in PARAMS:
                raise ScenarioError(f"unknown parameter {k!r}")
            if v is None:
                continue
            p = PARAMS[k]
            try:
                v = p.kind(v)
            except (TypeError, ValueError):
                raise ScenarioError(f"parameter {k} expects {p.kind.__name__}") from None
            if (p.lo is not None and v < p.lo) or (p.hi is not None and v > p.hi):
                raise ScenarioError(f"parameter {k}={v} outside [{p.lo}, {p.hi}]")
            vals[k], src[k] = v, "override"
        if vals["k_max"] < vals["k_min"] + 4:
            raise ScenarioError("k_max must exceed k_min by at least 4")
        return cls(vals, src)

    @property
    def grid(self) -> EpsGrid:
        return EpsGrid(self.values["grid_ratio"], self.values["k_min"], self.values["k_max"])

    def __getitem__(self, k):
        return self.values[k]

    def provenance(self):
        return {k: {"value": self.values[k], "source": self.source[k]} for k in sorted(self.values)}


# ---------------------------------------------------------------------- inputs

def _load(value, base: Path | None = None):
    """Inline value, or the contents of a file when the string names one."""
    if isinstance(value, str):
        p = Path(value)
        if base is not None and not p.is_absolute():
            p = base / p
        if len(value) < 4096 and not value.lstrip().startswith(("(", "{", "[")) and p.is_file():
            text = p.read_text(encoding="utf-8")
            return json.loads(text) if p.suffix == ".json" else text.strip()
        s = value.strip()
        if s.startswith(("{", "[")):
            return json.loads(s)
    return value


def _resolve_inputs(inputs: dict, base: Path | None) -> dict:
    out = {}
    for k, v in inputs.items():
        if k.endswith("_file"):
            p = Path(v)
            p = p if p.is_absolute() or base is None else base / p
            if not p.is_file():
                raise ScenarioError(f"input file not found: {p}")
            text = p.read_text(encoding="utf-8")
            out[k[:-5]] = json.loads(text) if p.suffix == ".json" else text.strip()
        else:
            out[k] = _load(v, base)
    return out


def _need(inputs, key):
    if key not in inputs:
        raise ScenarioError(f"missing input {key!r}")
    return inputs[key]


def _expr(v):
    return v if isinstance(v, dsl.Expr) else dsl.parse(str(v))


def _domain(v):
    return gfun.DomainSpec.from_json(v)


def _subset(v, grid):
    if v is None or v == "I":
        return gnum.EpsSubset.whole(grid)
    if isinstance(v, dict):
        v = v["points"]
    return gnum.EpsSubset.from_points([float(p) for p in v])


def _status(v: Verdict):
    return v.status


# ----------------------------------------------------------------------- runners
# Each runner returns (result, assertions); an assertion is (name, verdict, need)
# with need "proven" or "consistent".  A refuted asserted verdict fails the run.

def run_classify(inp, st, csv_path=None):
    e = _expr(_need(inp, "expr"))
    g = st.grid
    res = {"expr": dsl.to_text(e),
           "moderate": check_moderate(e, g, st["n_max"]).to_dict(),
           "negligible": check_negligible(e, g, st["m_max"], tol_zero=st["tol_zero"]).to_dict()}
    try:
        val = symbolic_valuation(e, g.eps_max)
        res["valuation"] = [val.lo, val.hi]
    except ValueError:
        pass
    if csv_path:
        vals = dsl.evaluate_many(e, g.eps)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "value"])
            w.writerows(zip(map(repr, g.eps.tolist()), map(repr, vals.tolist())))
    return res, []


def run_gn_eq(inp, st):
    a = gnum.GeneralizedNumber(_expr(_need(inp, "a")), st.grid)
    b = gnum.GeneralizedNumber(_expr(_need(inp, "b")), st.grid)
    v = gnum.gn_eq(a, b)
    return {"a": dsl.to_text(a.rep), "b": dsl.to_text(b.rep), "equal": v.to_dict()}, []


def run_s_inverse(inp, st):
    r = gnum.GeneralizedNumber(_expr(_need(inp, "r")), st.grid)
    S = _subset(inp.get("S"), st.grid)
    nz, m = gnum.strictly_nonzero_on(r, S, st["m_max"])
    res = {"r": dsl.to_text(r.rep), "S": S.label, "strictly_nonzero": nz.to_dict()}
    if nz.refuted or m is None:
        res["s_inverse"] = None
        return res, []
    inv = gnum.s_inverse(r, S, st["m_max"])
    res.update(m=inv.m, s=dsl.to_text(inv.s.rep), s_inverse=inv.verdict.to_dict())
    return res, [("s_inverse", inv.verdict, "consistent")]


def run_witness_S(inp, st):
    r = gnum.GeneralizedNumber(_expr(_need(inp, "r")), st.grid)
    S, neg = gnum.witness_S(r, st["m_max"])
    res = {"r": dsl.to_text(r.rep), "negligible": neg.to_dict(), "S": None}
    asserts = []
    if S is not None:
        pts = S.samples(st.grid.eps_min, ceiling=st.grid.eps_max)
        res["S"] = {"label": S.label, "points": pts.tolist()}
        inv = gnum.s_inverse(r, S, st["m_max"])
        res["s_inverse"] = inv.verdict.to_dict()
        asserts.append(("s_inverse on witness S", inv.verdict, "consistent"))
    return res, asserts


def _gf(inp, st):
    D = _domain(_need(inp, "domain"))
    return D, gfun.GeneralizedFunction(D, _expr(_need(inp, "u")), st.grid)


def run_gf_classify(inp, st):
    D, u = _gf(inp, st)
    return {"domain": D.to_dict(), "u": dsl.to_text(u.rep),
            "moderate": gfun.check_moderate_gf(u, n_max=st["n_max"]).to_dict(),
            "negligible": gfun.check_negligible_gf(u, st["m_max"]).to_dict()}, []


def run_gf_eval(inp, st):
    D, u = _gf(inp, st)
    pt = gpoints.GeneralizedPoint.from_json(_need(inp, "point"), st.grid)
    val = gfun.eval_at(u, pt)
    res = {"u": dsl.to_text(u.rep), "point": pt.to_dict(), "value": dsl.to_text(val.rep),
           "value_moderate": val.moderate.to_dict(), "value_negligible": val.negligible.to_dict()}
    try:
        res["value_fit"] = list(fit_order(val.rep, st.grid))
    except ValueError:
        res["value_fit"] = None
    return res, [("value moderate", val.moderate, "consistent")]


def run_gf_invert(inp, st):
    D, u = _gf(inp, st)
    S = _subset(inp.get("S"), st.grid)
    nz = gfun.gf_strictly_nonzero_on(u, S, st["m_max"])
    res = {"u": dsl.to_text(u.rep), "strictly_nonzero": nz.verdict.to_dict(), "m": nz.m}
    if nz.verdict.refuted or nz.m is None:
        res["inverse"] = None
        return res, []
    inv = gfun.gf_s_inverse(u, S, st["m_max"])
    res.update(inverse=dsl.to_text(inv.v.rep), inverse_verdict=inv.verdict.to_dict())
    return res, [("gf_s_inverse", inv.verdict, "consistent")]


def run_gf_audit(inp, st):
    D, u = _gf(inp, st)
    S = _subset(inp.get("S"), st.grid)
    v, pt = gfun.pointwise_invertibility_audit(u, S, st["m_max"], seed=st["seed"])
    return {"u": dsl.to_text(u.rep), "audit": v.to_dict(), "witness_point": pt.to_dict() if pt else None,
            "seed": st["seed"]}, [("pointwise invertibility", v, "consistent")]


def run_point_recover(inp, st):
    D = _domain(_need(inp, "domain"))
    pt = gpoints.GeneralizedPoint.from_json(_need(inp, "point"), st.grid)
    nu = gpoints.evaluation_functional(pt, D)
    q, ev = gpoints.recover_point(nu, st.grid, report=True)
    eq = gpoints.point_equal(q, pt)
    return {"point": pt.to_dict(), "recovered": q.to_dict(), "evidence": ev, "point_equal": eq.to_dict()}, \
        [("round trip", eq, "proven")]


def _map(v, st):
    return morphisms.CBoundedMap.from_json(v, st.grid)


def run_map_recover(inp, st):
    phi = _map(_need(inp, "map"), st)
    Phi = morphisms.pullback(phi)
    rec, ev = morphisms.recover_map(Phi, report=True)
    eq = morphisms._map_eq(rec, phi)
    return {"map": phi.to_dict(), "recovered": rec.to_dict(), "evidence": ev, "round_trip": eq.to_dict()}, \
        [("round trip", eq, "proven")]


def run_verify_factorization(inp, st):
    phi = _map(_need(inp, "map"), st)
    cand = _map(inp.get("candidate", inp["map"]), st)
    rep = morphisms.verify_factorization(morphisms.pullback(phi), cand)
    v = Verdict(rep["status"], {"consistent": rep["status"] != REFUTED})
    return {"map": phi.to_dict(), "candidate": cand.to_dict(), "report": rep}, [("factorization", v, "consistent")]


def run_verify_iso(inp, st):
    phi = _map(_need(inp, "map"), st)
    inv = _map(_need(inp, "inverse"), st)
    v = morphisms.verify_isomorphism(morphisms.pullback(phi), morphisms.pullback(inv))
    return {"map": phi.to_dict(), "inverse": inv.to_dict(), "isomorphism": v.to_dict()}, \
        [("isomorphism", v, "proven")]


def _torus_iso(inp, st):
    comps = _need(inp, "diffeo")
    comps = [comps] if isinstance(comps, str) else list(comps)
    M = smooth_iso.TorusModel(len(comps), st["lattice"])
    psi = smooth_iso.TorusDiffeo.from_exprs(comps, M)
    return M, psi, smooth_iso.pullback_iso(psi)


def run_iso_extract(inp, st):
    M, psi, Psi = _torus_iso(inp, st)
    q, ev = smooth_iso.extract_diffeo(Psi, report=True)
    err = smooth_iso.diffeo_distance(psi, q)
    v = Verdict(PROVEN if err <= 1e-8 else REFUTED, {"max_angle_error": err, "tolerance": 1e-8})
    return {"model": M.to_dict(), "hidden": [dsl.to_text(e) for e in psi.exprs], "evidence": ev,
            "max_angle_error": err, "A": q.A.tolist()}, [("extraction", v, "proven")]


def run_iso_lift(inp, st):
    M, psi, Psi = _torus_iso(inp, st)
    rep = smooth_iso.lift_report(Psi, st.grid)
    v = Verdict(PROVEN if rep["ok"] else REFUTED, {})
    return {"model": M.to_dict(), "report": rep}, [("category preservation", v, "proven")]


def run_iso_audit(inp, st):
    if "scale" in inp:
        M = smooth_iso.TorusModel(1, st["lattice"])
        Psi = smooth_iso.scaled_iso(M, float(inp["scale"]))
    else:
        M, _, Psi = _torus_iso(inp, st)
    audit = smooth_iso.audit_iso(Psi)
    res = {"model": M.to_dict(), "audit": audit.to_dict()}
    if audit.refuted:
        return res, []
    norm = smooth_iso.verify_norm_preservation(Psi)
    res["norm_preservation"] = norm
    asserts = [("norm preservation", Verdict(PROVEN if norm["ok"] else REFUTED), "proven")]
    if M.d == 1:
        sn = smooth_iso.verify_seminorm_transfer(Psi)
        res["seminorm_transfer"] = sn
        asserts.append(("seminorm transfer", Verdict(PROVEN if sn["ok"] else REFUTED), "proven"))
    return res, asserts


def run_association(inp, st):
    D = _domain(inp.get("domain", {"dim": 1, "bounds": [[-1, 1]]}))
    kind = inp.get("distribution", "delta")
    u = gfun.embed_delta(D, st.grid) if kind == "delta" else gfun.embed_heaviside(D, st.grid)
    tests = inp.get("tests", ["(cos x1)"])
    tests = [tests] if isinstance(tests, str) else tests
    support = inp.get("support")
    rows, ok = [], True
    from scipy.integrate import quad
    for t in tests:
        psi = _expr(t)
        p = gfun.association_pairing(u, psi, st.grid, support=support)
        if kind == "delta":
            target = float(dsl.evaluate_many(psi, 1.0, [np.array([0.0])])[0])
        else:
            b = support[1] if support else D.bounds[0][1]
            target = quad(lambda s: float(dsl.evaluate_many(psi, 1.0, [np.array([s])])[0]), 0.0, b,
                          epsabs=1e-13, epsrel=1e-13)[0]
        err = abs(float(p.values[-1]) - target)
        ok = ok and err <= st["tol_pairing"]
        rows.append({"test": dsl.to_text(psi), "limit": target, "last": float(p.values[-1]), "error": err,
                     "flagged": int(p.flagged.sum()), "pairings": p.values.tolist()})
    v = Verdict(PROVEN if ok else REFUTED, {"tolerance": st["tol_pairing"]})
    return {"distribution": kind, "rows": rows}, [("association", v, "consistent")]


RUNNERS = {
    "classify": run_classify, "gn-eq": run_gn_eq, "s-inverse": run_s_inverse, "witness-S": run_witness_S,
    "gf-classify": run_gf_classify, "gf-eval": run_gf_eval, "gf-invert": run_gf_invert, "gf-audit": run_gf_audit,
    "point-recover": run_point_recover, "map-recover": run_map_recover,
    "verify-factorization": run_verify_factorization, "verify-iso": run_verify_iso,
    "iso-extract": run_iso_extract, "iso-lift": run_iso_lift, "iso-audit": run_iso_audit,
    "association": run_association,
}


def _check(status, need):
    if need == "refuted":
        return status == REFUTED
    if status == REFUTED:
        return False
    return status == PROVEN if need == "proven" else True


def run(kind: str, inputs: dict, overrides: dict | None = None, base: Path | None = None,
        settings: Settings | None = None, expect: dict | None = None, timing: bool = False,
        csv_path: str | None = None) -> dict:
    """Run one scenario and return its report.  Errors are captured in the report."""
    t0 = time.perf_counter()
    kind = ALIASES.get(kind, kind)
    report = {"kind": kind, "inputs": _jsonable(inputs)}
    try:
        if kind not in RUNNERS:
            raise ScenarioError(f"unknown scenario kind {kind!r}")
        st = Settings.build(overrides, settings)
        report["parameters"] = st.provenance()
        inp = _resolve_inputs(inputs, base)
        runner = RUNNERS[kind]
        result, asserts = runner(inp, st, csv_path) if kind == "classify" else runner(inp, st)
        checks = []
        for name, v, need in asserts:
            need = (expect or {}).get(name, need)
            checks.append({"assertion": name, "need": need, "status": v.status, "ok": _check(v.status, need)})
        for name, need in (expect or {}).items():
            if name not in {c["assertion"] for c in checks}:
                checks.append({"assertion": name, "need": need, "status": None, "ok": False,
                               "error": "no such assertion"})
        report.update(result=_jsonable(result), assertions=checks,
                      status="pass" if all(c["ok"] for c in checks) else "fail")
    except (ScenarioError, dsl.ParseError, ValueError, KeyError, OSError, ArithmeticError, RuntimeError) as exc:
        report.update(status="error", error=f"{type(exc).__name__}: {exc}")
    if timing:
        report["wall_time"] = time.perf_counter() - t0
    return report


def _threads():
    try:
        return max(1, int(os.environ.get("COLOMBEAU_LAB_THREADS", "1")))
    except ValueError:
        return 1


def run_suite(manifest, settings: Settings | None = None, timing: bool = False) -> dict:
    """Run every scenario of a manifest (a list, or a dict with a "scenarios" list)."""
    base = None
    if isinstance(manifest, (str, Path)):
        path = Path(manifest)
        base = path.parent
        manifest = json.loads(path.read_text(encoding="utf-8"))
    entries = manifest.get("scenarios", []) if isinstance(manifest, dict) else manifest

    def one(entry):
        if not isinstance(entry, dict) or "kind" not in entry:
            return {"kind": None, "status": "error", "error": "manifest entry needs a kind"}
        return run(entry["kind"], entry.get("inputs", {}), entry.get("overrides"), base, settings,
                   entry.get("expect"), timing)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(one, entries))
    for i, (e, r) in enumerate(zip(entries, reports)):
        r["index"] = i
        if isinstance(e, dict) and "name" in e:
            r["name"] = e["name"]
    counts = {s: sum(r["status"] == s for r in reports) for s in ("pass", "fail", "error")}
    return {"summary": {"total": len(reports), **counts}, "reports": reports}


def acceptance_manifest_path() -> Path:
    return Path(str(resources.files("colombeau_lab") / "data" / "acceptance_manifest.json"))


# ------------------------------------------------------------------------ parser

def _add_common(p):
    g = p.add_argument_group("parameters")
    g.add_argument("--grid-ratio", type=float)
    g.add_argument("--k-min", type=int)
    g.add_argument("--k-max", type=int)
    g.add_argument("--m-max", type=int)
    g.add_argument("--n-max", type=int)
    g.add_argument("--lattice", type=int, help="points per angle on the torus")
    g.add_argument("--tol-zero", type=float, help="roundoff floor for eps-independent nets")
    g.add_argument("--tol-resolvent", type=float)
    g.add_argument("--tol-pairing", type=float)
    g.add_argument("--seed", type=int, help="seed for every random panel (default 0)")
    p.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    p.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical output)")


SUBCOMMANDS = {
    "classify": [("expr", "net in the eps_dsl format, or a file")],
    "gn-eq": [("a", "first net"), ("b", "second net")],
    "s-inverse": [("r", "net")],
    "witness-S": [("r", "net")],
    "gf-classify": [("domain", "domain JSON or file"), ("u", "representative")],
    "gf-eval": [("domain", "domain JSON or file"), ("u", "representative"), ("point", "point JSON or file")],
    "gf-invert": [("domain", "domain JSON or file"), ("u", "representative")],
    "gf-audit": [("domain", "domain JSON or file"), ("u", "representative")],
    "point-recover": [("domain", "domain JSON or file"), ("point", "point JSON or file")],
    "map-recover": [("map", "map JSON or file")],
    "verify-factorization": [("map", "map JSON or file")],
    "verify-iso": [("map", "map JSON or file"), ("inverse", "inverse map JSON or file")],
    "iso-extract": [("diffeo", "one component per angle")],
    "iso-lift": [("diffeo", "one component per angle")],
    "iso-audit": [("diffeo", "one component per angle")],
    "association": [],
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="colombeau-lab", description="Experiments with special Colombeau algebras.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, args in SUBCOMMANDS.items():
        aliases = [a for a, k in ALIASES.items() if k == name]
        p = sub.add_parser(name, aliases=aliases)
        for a, h in args:
            nargs = ("*" if name == "iso-audit" else "+") if a == "diffeo" else None
            p.add_argument(a, nargs=nargs, help=h)
        if name in ("s-inverse", "gf-invert", "gf-audit"):
            p.add_argument("--S", dest="S", help='"I" (default) or a JSON list of eps points')
        if name == "verify-factorization":
            p.add_argument("--candidate", help="map to compare against (default: the map itself)")
        if name == "iso-audit":
            p.add_argument("--scale", type=float, help="audit f -> c f instead of a pullback")
        if name == "classify":
            p.add_argument("--csv", help="write the tabulated net to this CSV file")
        if name == "association":
            p.add_argument("--distribution", choices=["delta", "heaviside"], default="delta")
            p.add_argument("--test", action="append", dest="tests", help="test function (repeatable)")
            p.add_argument("--domain", default='{"dim": 1, "bounds": [[-1, 1]]}')
        _add_common(p)
    p = sub.add_parser("suite", help="run a JSON manifest of scenarios")
    p.add_argument("manifest", nargs="?", help="manifest file (default: the bundled acceptance manifest)")
    _add_common(p)
    return ap


def _overrides(ns):
    return {k: getattr(ns, k, None) for k in PARAMS}


def _emit(obj, as_json):
    if as_json:
        sys.stdout.write(json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def _table(summary):
    lines = [f"{'#':>3}  {'kind':<22} {'status':<6} note"]
    for r in summary["reports"]:
        note = r.get("name") or r.get("error", "")
        lines.append(f"{r['index']:>3}  {str(r['kind']):<22} {r['status']:<6} {note}")
    s = summary["summary"]
    lines.append(f"total {s['total']}: {s['pass']} pass, {s['fail']} fail, {s['error']} error")
    return "\n".join(lines)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cmd = ALIASES.get(ns.command, ns.command)
    try:
        settings = Settings.build(_overrides(ns))
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if cmd == "suite":
        path = ns.manifest or acceptance_manifest_path()
        try:
            summary = run_suite(path, settings, ns.timing)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read manifest: {exc}", file=sys.stderr)
            return 2
        if ns.json:
            _emit(summary, True)
        else:
            print(_table(summary))
        s = summary["summary"]
        return 0 if s["fail"] == 0 and s["error"] == 0 else 1
    inputs = {a: getattr(ns, a) for a, _ in SUBCOMMANDS[cmd] if getattr(ns, a) not in (None, [])}
    for extra in ("S", "candidate", "scale", "distribution", "tests", "domain"):
        if getattr(ns, extra, None) is not None:
            inputs[extra] = getattr(ns, extra)
    report = run(cmd, inputs, None, Path.cwd(), settings, timing=ns.timing, csv_path=getattr(ns, "csv", None))
    if report["status"] == "error":
        print(f"error: {report['error']}", file=sys.stderr)
        return 2
    if ns.json:
        _emit(report, True)
    else:
        print(json.dumps(_jsonable(report.get("result")), sort_keys=True, indent=2))
        for c in report["assertions"]:
            print(f"{'ok  ' if c['ok'] else 'FAIL'} {c['assertion']}: {c['status']} (need {c['need']})")
    return 0 if report["status"] == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
