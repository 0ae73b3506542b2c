"""Scenario configs: validation, experiment runners and deterministic reports."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import library
from .branching import BranchingError, branch_probe
from .curvature import check_genericity, check_null_ec, check_timelike_ec
from .distance import lorentz_distance_1p1
from .focusing import (HypothesisError, TidalProfile, detect_conjugate, focusing_experiment, integrate_jacobi,
                       raychaudhuri_residual, select_focusing_constants)
from .geodesics import (ROUGH_TOL, SMOOTH_TOL, TRANSPORT_TOL, build_perp_frame, geodesic_family_convergence,
                        integrate_geodesic)
from .geometry import ChartBox, ParameterError, VectorField
from .mollify import DEFAULT_EPSILONS, Mollifier, build_family, convergence_diagnostics
from .submanifolds import TrappedData, coordinate_plane, coordinate_sphere, focal_experiment, trapped_certificate

SCHEMA = "c1spacetime.scenario/1"


class ScenarioError(ValueError):
    """Config does not parse or fails validation."""


@dataclass
class Scenario:
    name: str
    metric: dict
    experiment: dict
    epsilon_grid: list[float]
    mollifier: dict = field(default_factory=dict)
    seed: int = 0
    outputs: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.experiment["kind"]

    def to_config(self) -> dict:
        return {"schema": SCHEMA, "name": self.name, "metric": self.metric, "mollifier": self.mollifier,
                "epsilon_grid": self.epsilon_grid, "experiment": self.experiment, "seed": self.seed,
                "outputs": self.outputs}

    def config_hash(self) -> str:
        # where the files land does not change what was computed
        cfg = self.to_config()
        cfg["outputs"] = {k: v for k, v in cfg["outputs"].items() if k != "dir"}
        blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class Outcome:
    passed: bool
    result: dict
    tables: dict[str, list[dict]] = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)


MOLLIFIER_KEYS = {"sharpness", "panels", "nodes", "levels", "ratio", "inner_nodes"}


def parse_scenario(config: dict, seed: int | None = None, epsilon_grid=None, out_dir: str | None = None) -> Scenario:
    """Validate a config dict, applying command-line overrides."""
    if not isinstance(config, dict):
        raise ScenarioError("config must be a JSON object")
    if config.get("schema", SCHEMA) != SCHEMA:
        raise ScenarioError(f"unsupported schema {config.get('schema')!r}; expected {SCHEMA!r}")
    for key in ("metric", "experiment"):
        if key not in config:
            raise ScenarioError(f"missing {key!r}")
    metric = config["metric"]
    if isinstance(metric, str):
        metric = {"name": metric, "params": {}}
    metric = {"name": metric.get("name"), "params": dict(metric.get("params", {}))}
    if metric["name"] not in library.REGISTRY:
        raise ScenarioError(f"unknown metric {metric['name']!r}")
    exp = dict(config["experiment"])
    if exp.get("kind") not in EXPERIMENTS:
        raise ScenarioError(f"unknown experiment {exp.get('kind')!r}; known: {sorted(EXPERIMENTS)}")
    moll = dict(config.get("mollifier", {}))
    bad = set(moll) - MOLLIFIER_KEYS
    if bad:
        raise ScenarioError(f"unknown mollifier keys {sorted(bad)}")
    grid = epsilon_grid if epsilon_grid is not None else config.get("epsilon_grid", list(DEFAULT_EPSILONS))
    grid = sorted((float(e) for e in grid), reverse=True)
    if not grid or grid[-1] <= 0:
        raise ScenarioError("epsilon grid must hold positive values")
    s = int(config.get("seed", 0) if seed is None else seed)
    outputs = dict(config.get("outputs", {}))
    if out_dir is not None:
        outputs["dir"] = out_dir
    sc = Scenario(str(config.get("name", exp["kind"])), metric, exp, grid, moll, s, outputs)
    try:
        library.build(metric["name"], **metric["params"])
    except ParameterError as e:
        raise ScenarioError(f"invalid metric parameters: {e}") from e
    return sc


def load_scenario(path, **overrides) -> Scenario:
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: {e}") from e
    return parse_scenario(config, **overrides)


def _family(sc: Scenario, g):
    moll = Mollifier(g.dim, **sc.mollifier)
    return build_family(g, moll, sc.epsilon_grid, A=sc.experiment.get("A"), seed=sc.seed)


def _box(g, spec):
    if spec is None:
        return None
    return ChartBox(spec[0], spec[1])


def _family_tolerances(fam) -> dict:
    return {"cone_shift_A": fam.A, "quadrature": 1e-8, "calibration": fam.calibration}


def _run_diagnostics(sc, g, p):
    fam = _family(sc, g)
    tab = convergence_diagnostics(fam, _box(g, p.get("K")), p.get("budget", 4000))
    return Outcome(True, {"rows": tab.rows, "slopes": tab.slopes}, {"diagnostics": tab.rows},
                   _family_tolerances(fam))


def _run_timelike(sc, g, p):
    fam = _family(sc, g)
    kw = {k: p[k] for k in ("kappa", "Cbound", "delta", "directions", "per_axis") if k in p}
    rep = check_timelike_ec(fam, _box(g, p.get("K")), **kw)
    return Outcome(rep.passed, rep.to_json(), {}, _family_tolerances(fam))


def _run_null(sc, g, p):
    fam = _family(sc, g)
    kw = {k: p[k] for k in ("c1", "c2", "delta", "directions", "per_axis") if k in p}
    rep = check_null_ec(fam, _box(g, p.get("K")), **kw)
    return Outcome(rep.passed, rep.to_json(), {}, _family_tolerances(fam))


def _run_genericity(sc, g, p):
    fam = _family(sc, g)
    curve = integrate_geodesic(g, p["p"], p["v"], p["span"])
    if curve.truncated:
        raise ParameterError("curve leaves the chart")
    X = VectorField.constant(p.get("X", p["v"]))
    V = VectorField.constant(p["V"])
    kw = {k: p[k] for k in ("c", "delta_perturb", "nperturb", "samples", "tube") if k in p}
    rep = check_genericity(fam, curve, X, V, seed=sc.seed, **kw)
    return Outcome(rep.passed, rep.to_json(), {}, _family_tolerances(fam))


def _run_converge(sc, g, p):
    fam = _family(sc, g)
    tab = geodesic_family_convergence(fam, p["p"], p["v"], p["span"], p.get("dp"), p.get("dv"),
                                      p.get("member", "mid"))
    c1 = [r["c1"] for r in tab.rows]
    tol = p.get("tol", 1e-3)
    slack = p.get("slack", 0.1)
    monotone = all(b <= (1 + slack) * a for a, b in zip(c1, c1[1:]))
    passed = bool(monotone and np.isfinite(c1[-1]) and c1[-1] < tol)
    tols = _family_tolerances(fam)
    tols.update(final_c1=tol, monotone_slack=slack)
    return Outcome(passed, {"rows": tab.rows, "monotone": monotone}, {"geodesic_convergence": tab.rows}, tols)


def _run_branch(sc, g, p):
    kw = {k: p[k] for k in ("span", "cluster_tol", "cauchy_tol") if k in p}
    try:
        rep = branch_probe(g, p["p"], p["v"], p["eta_grid"], **kw)
    except BranchingError as e:
        return Outcome(False, {"error": str(e)}, {}, {})
    rows = [{"direction": i, "sign": lim["sign"], "last_step": lim["last_step"],
             **{f"x{j}": v for j, v in enumerate(lim["terminal"])}} for i, lim in enumerate(rep.limits)]
    return Outcome(True, rep.to_json(), {"branch_limits": rows},
                   {"cluster_tol": rep.cluster_tol, "cauchy_tol": rep.cauchy_tol})


def _profile(sc, g, spec) -> TidalProfile:
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return TidalProfile.constant(spec["matrix"])
    if kind == "bump":
        return TidalProfile.bump(spec["matrix"], spec["r"], spec.get("taper", 0.2))
    if kind == "geodesic":
        metric = g
        if "epsilon" in spec:
            metric = _family(sc, g).mid(float(spec["epsilon"]))
        curve = integrate_geodesic(metric, spec["p"], spec["v"], spec["span"])
        if curve.truncated:
            raise ParameterError("geodesic leaves the chart before the end of the span")
        frame = build_perp_frame(metric, curve, spec["seed_vector"])
        return TidalProfile.from_geodesic(metric, curve, frame)
    raise ParameterError(f"unknown profile kind {kind!r}")


def _run_conjugate(sc, g, p):
    prof = _profile(sc, g, p.get("profile", {}))
    d = prof.d
    if "constants" in p:
        K = select_focusing_constants(p["constants"]["c"], p["constants"]["r"], d)
        try:
            rep = focusing_experiment(prof, K, p["constants"].get("C"))
        except HypothesisError as e:
            return Outcome(False, {"error": str(e), "worst": e.worst, "constants": K.to_json()}, {}, {})
        return Outcome(rep.passed, rep.to_json(), {}, {"jacobi_rtol": 1e-12, "conjugate_xtol": 1e-10})
    span = p.get("span", list(prof.interval))
    t0 = p.get("t0", span[0])
    A0 = p.get("A0", np.zeros((d, d)))
    Ad0 = p.get("Adot0", np.eye(d))
    traj = integrate_jacobi(prof, t0, A0, Ad0, span)
    t_star = detect_conjugate(traj)
    end = t_star if t_star is not None else traj.t1
    window = sorted((t0, end))
    res = {"raychaudhuri": raychaudhuri_residual(traj, window=window), "lagrange": traj.lagrange_residual()}
    ts = np.linspace(*traj.window, p.get("csv_samples", 201))
    rows = [{"t": float(t), "det_A": float(np.linalg.det(traj.A(t)))} for t in ts]
    return Outcome(True, {"conjugate_or_focal": {"found": t_star is not None, "t_star": t_star},
                          "residuals": res, "span": list(map(float, span))},
                   {"jacobi": rows}, {"jacobi_rtol": 1e-12, "jacobi_atol": 1e-14, "conjugate_xtol": 1e-10})


def _patch(g, spec):
    kind = spec.get("kind", "sphere")
    if kind == "sphere":
        return coordinate_sphere(g, spec["center"], spec["radius"], spec.get("t0", 0.0))
    if kind == "plane":
        return coordinate_plane(g, spec["origin"], spec["axes"])
    raise ParameterError(f"unknown patch kind {kind!r}")


def _run_focal(sc, g, p):
    patch = _patch(g, p["patch"])
    u = np.asarray(p["u"], dtype=float)
    nu = p.get("nu", "ingoing")
    if isinstance(nu, str):
        normals = patch.null_normals(u)
        ks = [patch.convergence(u, v) for v in normals]
        nu = normals[int(np.argmax(ks) if nu == "ingoing" else np.argmin(ks))]
    nu = p.get("scale", 1.0) * np.asarray(nu, dtype=float)
    try:
        rep = focal_experiment(g, patch, u, nu, p["b"], p.get("delta", 1e-2))
    except HypothesisError as e:
        return Outcome(False, {"error": str(e), "worst": e.worst}, {}, {})
    return Outcome(rep.not_maximising, rep.to_json(), {}, {"jacobi_rtol": 1e-11, "transport": TRANSPORT_TOL})


def _run_trapped(sc, g, p):
    patches = [_patch(g, s) for s in p["patches"]]
    samples = [np.asarray(s, dtype=float) for s in p["samples"]]
    out = trapped_certificate(TrappedData(patches, samples), p.get("directions", 16))
    return Outcome(out["trapped"], out, {}, {})


def _run_distance(sc, g, p):
    est = lorentz_distance_1p1(g, p["p"], p["q"], p.get("resolution", 400))
    gap_tol = p.get("gap_tol", 1e-3)
    ok = (not est.reachable) or (np.isfinite(est.gap) and abs(est.gap) <= gap_tol)
    return Outcome(bool(ok), est.to_json(), {}, {"gap_tol": gap_tol})


EXPERIMENTS: dict[str, tuple[Callable, str]] = {
    "mollify-diagnostics": (_run_diagnostics, "sup errors of the mollified members and log-log slopes"),
    "energy-timelike": (_run_timelike, "sampled timelike energy condition on the narrow members"),
    "energy-null": (_run_null, "sampled null energy condition on the narrow members"),
    "genericity": (_run_genericity, "perturbation-stable lower bound on g(R(X,V)V,X) along a curve"),
    "geodesic-converge": (_run_converge, "C1 deviation of member geodesics from the limit geodesic"),
    "branch-probe": (_run_branch, "perturb-and-limit clustering of geodesic continuations"),
    "conjugate": (_run_conjugate, "Jacobi tensor integration and first conjugate point"),
    "focal": (_run_focal, "focal point of a null normal geodesic from a spacelike patch"),
    "trapped-cert": (_run_trapped, "convergence of sampled future null normals of patches"),
    "distance-1p1": (_run_distance, "grid and shooting bounds on the 1+1 time separation"),
}


def _lookup(result: dict, key: str):
    cur: Any = result
    for part in key.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise ScenarioError(f"expectation refers to missing result field {key!r}")
        cur = cur[part]
    return cur


def check_expectations(result: dict, expect: dict) -> dict:
    """``{"a.b": v}`` asserts equality; ``_min``/``_max`` suffixes give bounds."""
    out = {}
    for key, want in sorted(expect.items()):
        if key.endswith("_min"):
            got = _lookup(result, key[:-4])
            ok = got is not None and got >= want
        elif key.endswith("_max"):
            got = _lookup(result, key[:-4])
            ok = got is not None and got <= want
        else:
            got = _lookup(result, key)
            ok = got == want
        out[key] = {"expected": want, "got": got, "ok": bool(ok)}
    return out


def clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def run_scenario(sc: Scenario) -> tuple[int, dict, dict[str, list[dict]]]:
    """Execute; returns ``(exit_code, report, tables)`` with 0 pass, 2 condition failure."""
    g = library.build(sc.metric["name"], **sc.metric["params"])
    params = {k: v for k, v in sc.experiment.items() if k not in ("kind", "expect", "A")}
    runner = EXPERIMENTS[sc.kind][0]
    outcome = runner(sc, g, params)
    passed = outcome.passed
    expectations = None
    if "expect" in sc.experiment:
        expectations = check_expectations(clean(outcome.result), sc.experiment["expect"])
        passed = passed and all(e["ok"] for e in expectations.values())
    tolerances = {"geodesic_smooth": list(SMOOTH_TOL), "geodesic_rough": list(ROUGH_TOL),
                  "transport": list(TRANSPORT_TOL), **outcome.tolerances}
    report = {"schema": SCHEMA, "scenario": sc.name, "experiment": sc.kind, "config_hash": sc.config_hash(),
              "seed": sc.seed, "metric": sc.metric, "epsilon_grid": sc.epsilon_grid, "tolerances": tolerances,
              "passed": bool(passed), "result": outcome.result}
    if expectations is not None:
        report["expectations"] = expectations
    return (0 if passed else 2), clean(report), outcome.tables


def write_outputs(out_dir, report: dict, tables: dict[str, list[dict]]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json"]
    paths[0].write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    for name, rows in sorted(tables.items()):
        if not rows:
            continue
        path = out / f"{name}.csv"
        cols = list(rows[0].keys())
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})
        paths.append(path)
    return paths


def default_out_dir(sc: Scenario) -> Path:
    return Path(sc.outputs.get("dir", Path("out") / sc.name))


__all__ = ["SCHEMA", "EXPERIMENTS", "Scenario", "ScenarioError", "Outcome", "parse_scenario", "load_scenario",
           "run_scenario", "write_outputs", "default_out_dir", "check_expectations", "clean"]
