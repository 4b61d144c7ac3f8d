"""Problem files: parsing, validation, orchestration and report writing.

A problem file is a JSON object with exactly these top-level keys::

    domain      {"nx", "ny", "lx", "ly"}
    boundary    {"left"|"right"|"bottom"|"top": "fixed" | {"traction": T}}
    material    {"kind": "affine"|"quadratic"|"polynomial"|"mooney_rivlin", ...}
    prestretch  lambda > 0
    measure     {"alpha", "beta"}                       (optional)
    run         {"branches", "oracle", "analysis"}      (optional)
    output      {"dir", "formats"}                      (optional)

A traction ``T`` is a number (uniform), a list of samples along the edge
(linearly resampled onto the grid), ``{"poly": [[p, q, c], ...]}`` evaluated
at the edge nodes, or ``{"harmonic": F}`` meaning ``t = n . grad psi`` for a
built-in harmonic family ``F`` (``{"constant": [c1, c2]}``,
``{"poly": [[p, q, c], ...]}`` or ``{"log_radial": [k, x0, y0]}``). When
every traction edge names the same harmonic family the stress field is
sampled from it directly; otherwise the mixed Laplace problem is solved.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__, kernels
from .convexity import (
    check_g_quasiconvex,
    check_knowles_constitutive,
    check_knowles_ellipticity,
    composed_energy,
    mooney_rivlin_energy,
    neo_hookean_energy,
    total_energy_density,
)
from .dual import Label, solve_dual_equation
from .errors import InvalidParameter, ValidationError
from .field import ALL_BRANCHES, GLOBAL, solve_field
from .grid import EDGES, NORMALS, EdgeBC, GridDomain
from .materials import (
    Affine,
    PolynomialConvex,
    Quadratic,
    QuadraticMeasure,
    mooney_rivlin_reduce,
    principal_stretch_invariants,
)
from .oracle import multistart_minimize
from .stress import Constant, HarmonicPoly, LogRadial, build_stress_analytic, build_stress_numeric

__all__ = ["ProblemSpec", "load_spec", "parse_spec", "build_problem", "solve", "analyze", "write_outputs", "REPORT_SCHEMA"]

REPORT_SCHEMA = "cdshear-report/1"

_TOP = {"domain", "boundary", "material", "prestretch", "measure", "run", "output"}
_REQUIRED = {"domain", "boundary", "material", "prestretch"}
_DOMAIN = {"nx", "ny", "lx", "ly"}
_RUN = {"branches", "oracle", "analysis"}
_ORACLE = {"enabled", "n_starts", "seed"}
_ANALYSIS = {"g_quasiconvex", "knowles"}
_GQC_OPTS = {"n_samples", "box"}
_KNOWLES_OPTS = {"R_max", "n"}
_OUTPUT = {"dir", "formats"}
_MATERIAL = {
    "affine": {"A", "B"},
    "quadratic": {"h0", "xi0", "c0"},
    "polynomial": {"coeffs", "center"},
    "mooney_rivlin": {"c1", "c2"},
}
_FORMATS = {"json", "csv"}


def _keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise ValidationError(f"{where} must be an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")
    missing = set(required) - set(obj)
    if missing:
        raise ValidationError(f"missing key(s) in {where}: {', '.join(sorted(missing))}")


def _num(v, where, positive=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{where} must be a number")
    if not math.isfinite(v):
        raise ValidationError(f"{where} must be finite")
    if integer and int(v) != v:
        raise ValidationError(f"{where} must be an integer")
    if positive and v <= 0:
        raise ValidationError(f"{where} must be positive, got {v}")
    return int(v) if integer else float(v)


@dataclass
class ProblemSpec:
    data: dict

    @property
    def prestretch(self) -> float:
        return self.data["prestretch"]

    def with_overrides(self, seed=None, out=None, grid_scale=None) -> "ProblemSpec":
        d = copy.deepcopy(self.data)
        if seed is not None:
            d.setdefault("run", {}).setdefault("oracle", {})["seed"] = int(seed)
        if out is not None:
            d.setdefault("output", {})["dir"] = str(out)
        if grid_scale is not None:
            k = _num(grid_scale, "--grid-scale", positive=True, integer=True)
            d["domain"]["nx"] = (d["domain"]["nx"] - 1) * k + 1
            d["domain"]["ny"] = (d["domain"]["ny"] - 1) * k + 1
        return parse_spec(d)


def load_spec(path) -> ProblemSpec:
    """Read and validate a problem file; ``OSError`` propagates for I/O failures."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"problem file is not valid JSON: {exc}") from None
    return parse_spec(data)


def _check_traction(t, where):
    if isinstance(t, (int, float)) and not isinstance(t, bool):
        _num(t, where)
        return
    if isinstance(t, list):
        if len(t) < 2:
            raise ValidationError(f"{where}: sample list needs at least 2 values")
        for k, v in enumerate(t):
            _num(v, f"{where}[{k}]")
        return
    if isinstance(t, dict) and len(t) == 1:
        kind, val = next(iter(t.items()))
        if kind == "poly":
            _check_poly(val, where)
            return
        if kind == "harmonic":
            _family(val, where)
            return
    raise ValidationError(f"{where}: traction must be a number, a sample list, {{'poly': ...}} or {{'harmonic': ...}}")


def _check_poly(val, where):
    if not isinstance(val, list) or not val:
        raise ValidationError(f"{where}: poly must be a non-empty list of [p, q, c]")
    for term in val:
        if not (isinstance(term, list) and len(term) == 3):
            raise ValidationError(f"{where}: poly terms must be [p, q, c]")
        p, q, c = term
        if _num(p, where, integer=True) < 0 or _num(q, where, integer=True) < 0:
            raise ValidationError(f"{where}: exponents must be non-negative")
        _num(c, where)


def _family(val, where):
    if not isinstance(val, dict) or len(val) != 1:
        raise ValidationError(f"{where}: harmonic family must be one of constant, poly, log_radial")
    kind, args = next(iter(val.items()))
    try:
        if kind == "constant":
            if not (isinstance(args, list) and len(args) == 2):
                raise ValidationError(f"{where}: constant needs [c1, c2]")
            return Constant(_num(args[0], where), _num(args[1], where))
        if kind == "poly":
            _check_poly(args, where)
            return HarmonicPoly([tuple(t) for t in args])
        if kind == "log_radial":
            if not (isinstance(args, list) and len(args) == 3):
                raise ValidationError(f"{where}: log_radial needs [k, x0, y0]")
            return LogRadial(*(_num(a, where) for a in args))
    except InvalidParameter as exc:
        raise ValidationError(f"{where}: {exc}") from None
    raise ValidationError(f"{where}: unknown harmonic family {kind!r}")


def parse_spec(data) -> ProblemSpec:
    """Validate a problem dictionary and fill defaults."""
    _keys(data, _TOP, "problem", _REQUIRED)
    d = copy.deepcopy(data)
    dom = d["domain"]
    _keys(dom, _DOMAIN, "domain", ("nx", "ny"))
    for k in ("nx", "ny"):
        if _num(dom[k], f"domain.{k}", integer=True) < 3:
            raise ValidationError(f"domain.{k} must be >= 3")
        dom[k] = int(dom[k])
    for k in ("lx", "ly"):
        dom[k] = _num(dom.get(k, 1.0), f"domain.{k}", positive=True)

    bnd = d["boundary"]
    _keys(bnd, EDGES, "boundary")
    for name in EDGES:
        v = bnd.setdefault(name, {"traction": 0.0})
        if v == "fixed":
            continue
        _keys(v, {"traction"}, f"boundary.{name}", ("traction",))
        _check_traction(v["traction"], f"boundary.{name}.traction")

    lam = d["prestretch"]
    if isinstance(lam, bool) or not isinstance(lam, (int, float)) or not math.isfinite(lam) or lam <= 0:
        raise ValidationError(f"prestretch must be a finite number > 0 (got {lam!r})")
    d["prestretch"] = float(lam)

    mat = d["material"]
    if not isinstance(mat, dict) or mat.get("kind") not in _MATERIAL:
        raise ValidationError(f"material.kind must be one of {', '.join(sorted(_MATERIAL))}")
    _keys(mat, _MATERIAL[mat["kind"]] | {"kind"}, "material")
    for k, v in mat.items():
        if k == "kind":
            continue
        if k == "coeffs":
            if not isinstance(v, list) or len(v) < 3:
                raise ValidationError("material.coeffs must list at least 3 coefficients")
            for c in v:
                _num(c, "material.coeffs")
        else:
            _num(v, f"material.{k}")

    if "measure" in d:
        _keys(d["measure"], {"alpha", "beta"}, "measure", ("alpha", "beta"))
        d["measure"] = {"alpha": _num(d["measure"]["alpha"], "measure.alpha", positive=True), "beta": _num(d["measure"]["beta"], "measure.beta")}

    run = d.setdefault("run", {})
    _keys(run, _RUN, "run")
    run.setdefault("branches", GLOBAL)
    if run["branches"] not in (GLOBAL, ALL_BRANCHES):
        raise ValidationError("run.branches must be 'global' or 'all'")
    orc = run.setdefault("oracle", {})
    _keys(orc, _ORACLE, "run.oracle")
    orc.setdefault("enabled", False)
    orc.setdefault("n_starts", 8)
    orc.setdefault("seed", 0)
    if not isinstance(orc["enabled"], bool):
        raise ValidationError("run.oracle.enabled must be true or false")
    if _num(orc["n_starts"], "run.oracle.n_starts", positive=True, integer=True) < 1:
        raise ValidationError("run.oracle.n_starts must be >= 1")
    orc["n_starts"] = int(orc["n_starts"])
    if _num(orc["seed"], "run.oracle.seed", integer=True) < 0:
        raise ValidationError("run.oracle.seed must be non-negative")
    orc["seed"] = int(orc["seed"])
    an = run.setdefault("analysis", {})
    _keys(an, _ANALYSIS, "run.analysis")
    for key, opts in (("g_quasiconvex", _GQC_OPTS), ("knowles", _KNOWLES_OPTS)):
        v = an.setdefault(key, False)
        if isinstance(v, dict):
            _keys(v, opts, f"run.analysis.{key}")
        elif not isinstance(v, bool):
            raise ValidationError(f"run.analysis.{key} must be a boolean or an options object")

    out = d.setdefault("output", {})
    _keys(out, _OUTPUT, "output")
    out.setdefault("dir", "out")
    out.setdefault("formats", ["json", "csv"])
    if not isinstance(out["dir"], str):
        raise ValidationError("output.dir must be a string")
    if not isinstance(out["formats"], list) or set(out["formats"]) - _FORMATS:
        raise ValidationError("output.formats must be a list drawn from json, csv")
    # material construction validates the remaining parameter ranges
    try:
        _material(d)
    except InvalidParameter as exc:
        raise ValidationError(f"material: {exc}") from None
    return ProblemSpec(d)


# ---------------------------------------------------------------------------
# building
# ---------------------------------------------------------------------------


def _material(d):
    mat = d["material"]
    kind = mat["kind"]
    lam = d["prestretch"]
    if kind == "affine":
        return Affine(mat.get("A", 1.0), mat.get("B", 0.0))
    if kind == "quadratic":
        return Quadratic(mat.get("h0", 1.0), mat.get("xi0", 0.0), mat.get("c0", 0.0))
    if kind == "polynomial":
        return PolynomialConvex(tuple(mat["coeffs"]), mat.get("center", 0.0))
    return mooney_rivlin_reduce(mat.get("c1", 1.0), mat.get("c2", 0.0), lam)


def _measure(d):
    if "measure" in d:
        return QuadraticMeasure(d["measure"]["alpha"], d["measure"]["beta"])
    return QuadraticMeasure.antiplane(d["prestretch"])


def _edge_traction(dom, name, t):
    coords = dom.edge_coords(name)
    n = coords.shape[0]
    if isinstance(t, (int, float)):
        return np.full(n, float(t))
    if isinstance(t, list):
        s_old = np.linspace(0.0, 1.0, len(t))
        return np.interp(np.linspace(0.0, 1.0, n), s_old, np.asarray(t, float))
    kind, val = next(iter(t.items()))
    if kind == "poly":
        x1, x2 = coords[:, 0], coords[:, 1]
        return sum(c * x1**p * x2**q for p, q, c in val) * np.ones(n)
    fam = _family(val, name)
    g1, g2 = fam.grad(coords[:, 0], coords[:, 1])
    n1, n2 = NORMALS[name]
    return n1 * np.broadcast_to(g1, (n,)) + n2 * np.broadcast_to(g2, (n,))


def build_problem(spec: ProblemSpec):
    """``(GridDomain, material, measure, StressField, method)`` for a validated problem."""
    d = spec.data
    dm = d["domain"]
    edges = {}
    families = []
    for name in EDGES:
        v = d["boundary"][name]
        if v == "fixed":
            edges[name] = EdgeBC("fixed")
            continue
        edges[name] = EdgeBC("traction")
        t = v["traction"]
        fam = t.get("harmonic") if isinstance(t, dict) else None
        families.append(json.dumps(fam, sort_keys=True) if fam is not None else None)
    dom = GridDomain(dm["nx"], dm["ny"], dm["lx"], dm["ly"], edges)
    m = _material(d)
    meas = _measure(d)
    if families and all(f is not None for f in families) and len(set(families)) == 1:
        fam = _family(json.loads(families[0]), "boundary")
        stress = build_stress_analytic(dom, fam)
        method = "analytic"
    else:
        for name in EDGES:
            v = d["boundary"][name]
            if v != "fixed":
                dom.set_traction(name, _edge_traction(dom, name, v["traction"]))
        stress = build_stress_numeric(dom)
        method = "numeric"
    return dom, m, meas, stress, method


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _representative_points(stress):
    tsq = stress.tau_sq.ravel()
    idx = sorted({int(np.argmin(tsq)), int(np.argmax(tsq))})
    return [(k, stress.tau.reshape(-1, 2)[k]) for k in idx]


def _knowles_energy(d, m, meas):
    mat = d["material"]
    if mat["kind"] == "mooney_rivlin":
        return mooney_rivlin_energy(mat.get("c1", 1.0), mat.get("c2", 0.0))
    if mat["kind"] == "affine" and "measure" not in d:
        return neo_hookean_energy(m.A, m.B)
    return composed_energy(m, meas, d["prestretch"])


def analyze(spec: ProblemSpec, dom, m, meas, stress) -> dict:
    d = spec.data
    an = d["run"]["analysis"]
    seed = d["run"]["oracle"]["seed"]
    out = {}
    if an["g_quasiconvex"]:
        opts = an["g_quasiconvex"] if isinstance(an["g_quasiconvex"], dict) else {}
        n_samples = int(opts.get("n_samples", 10_000))
        box = opts.get("box")
        checks = []
        for k, tau in _representative_points(stress):
            res = check_g_quasiconvex(total_energy_density(m, meas, tau), box=box, n_samples=n_samples, seed=seed)
            checks.append({"node": k, "tau": tau, **res.to_dict()})
        out["g_quasiconvex"] = checks
    if an["knowles"]:
        opts = an["knowles"] if isinstance(an["knowles"], dict) else {}
        W = _knowles_energy(d, m, meas)
        lam = d["prestretch"]
        out["knowles"] = {
            "energy": W.name,
            "ellipticity": check_knowles_ellipticity(W, lam, R_max=float(opts.get("R_max", 5.0)), n=int(opts.get("n", 200))),
            "constitutive": check_knowles_constitutive(W, lam),
        }
    return out


def solve(spec: ProblemSpec) -> tuple:
    """Run the full pipeline; returns ``(report, fields, dom, stress)``."""
    d = spec.data
    timings = {}
    t0 = time.perf_counter()
    dom, m, meas, stress, method = build_problem(spec)
    timings["stress"] = time.perf_counter() - t0
    l1, l2 = principal_stretch_invariants(d["prestretch"])

    t0 = time.perf_counter()
    fields = solve_field(dom, m, meas, stress, d["run"]["branches"])
    timings["field"] = time.perf_counter() - t0

    pointwise = []
    for k, tau in _representative_points(stress):
        tsq = float(tau @ tau)
        pointwise.append({"node": k, "tau": tau, "tau_sq": tsq, "branches": [b.to_dict() for b in solve_dual_equation(m, meas, tsq, tau=tau)]})

    oracle = None
    orc = d["run"]["oracle"]
    if orc["enabled"]:
        t0 = time.perf_counter()
        res = multistart_minimize(dom, m, meas, stress, n_starts=orc["n_starts"], seed=orc["seed"])
        timings["oracle"] = time.perf_counter() - t0
        oracle = res.to_dict()
        glob = fields[0]
        for c in oracle["clusters"]:
            c["gap_to_global_dual"] = c["Pi"] - glob.Pi_dual if np.isfinite(glob.Pi_dual) else None
            c["nearest_branch"] = _nearest_branch(c["Pi"], fields)

    t0 = time.perf_counter()
    analysis = analyze(spec, dom, m, meas, stress)
    timings["analysis"] = time.perf_counter() - t0

    report = {
        "schema": REPORT_SCHEMA,
        "spec": d,
        "problem": {
            "alpha": meas.alpha,
            "beta": meas.beta,
            "prestretch": d["prestretch"],
            "lambda_1": l1,
            "lambda_2": l2,
            "material": m.to_dict(),
            "grid": dom.to_dict(),
            "h1": dom.h1,
            "h2": dom.h2,
            "area": dom.area,
        },
        "stress": {
            "method": method,
            "div_residual": stress.div_residual,
            "bc_residual": stress.bc_residual,
            "tau_sq_min": float(stress.tau_sq.min()),
            "tau_sq_max": float(stress.tau_sq.max()),
            "info": stress.info,
        },
        "pointwise": pointwise,
        "branches": [dict(f.summary(), csv=f"fields_{f.branch_id}.csv") for f in fields],
        "oracle": oracle,
        "analysis": analysis,
        "meta": {
            "version": __version__,
            "backend": kernels.get_backend(),
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "timings_s": timings,
        },
    }
    return _clean(report), fields, dom, stress


def _nearest_branch(Pi, fields):
    best = None
    for f in fields:
        if np.isfinite(f.Pi_primal):
            gap = abs(Pi - f.Pi_primal)
            if best is None or gap < best[1]:
                best = (f.branch_id, gap)
    return None if best is None else {"branch_id": best[0], "abs_gap": best[1]}


def write_fields_csv(path, dom, stress, f) -> None:
    X1, X2 = dom.mesh()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "tau1", "tau2", "tau_sq", "zeta", "u", "label"])
        tsq = stress.tau_sq
        for j in range(dom.ny):
            for i in range(dom.nx):
                lab = "flagged" if f.flagged[j, i] else Label.from_code(f.labels[j, i]).value
                w.writerow(
                    [
                        repr(float(X1[j, i])),
                        repr(float(X2[j, i])),
                        repr(float(stress.tau[j, i, 0])),
                        repr(float(stress.tau[j, i, 1])),
                        repr(float(tsq[j, i])),
                        repr(float(f.zeta[j, i])),
                        repr(float(f.u[j, i])),
                        lab,
                    ]
                )


def write_outputs(report, fields, dom, stress, out_dir=None) -> list:
    """Write ``report.json`` and per-branch ``fields_<id>.csv``; returns the paths."""
    d = report["spec"]
    out_dir = out_dir or d["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "json" in d["output"]["formats"]:
        p = os.path.join(out_dir, "report.json")
        with open(p, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        written.append(p)
    if "csv" in d["output"]["formats"]:
        for f in fields:
            p = os.path.join(out_dir, f"fields_{f.branch_id}.csv")
            write_fields_csv(p, dom, stress, f)
            written.append(p)
    return written
