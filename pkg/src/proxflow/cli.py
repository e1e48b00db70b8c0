"""
Command-line front end.

    proxflow run      --preset example1 --lambda 0.5 --c1 1 --c2 1 --out runs/a
    proxflow sweep    --preset example1 --c1 1 --c2 1 --lambdas 0:0.05:1 --out runs/sweep
    proxflow check    --lambda 1 --mu 1 --gamma1 20 --gamma2 20 --L 1
    proxflow proxtest --kind huber --delta 2 --trials 1000
    proxflow rates    runs/a/trajectory.csv

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 condition check failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import fit_rate, monitor_decrease, subgradient_residual, verify_critical
from .dynamics import DynParams, check_condition
from .errors import ArgumentError, InsufficientDataError, ProxflowError
from .integrate import SolverConfig, Trajectory, detect_oscillation, integrate
from .presets import DEFAULT_START, PRESETS, get_preset
from .problem import BlockProblem, PartialLipschitz, Quadratic, ResidualSquare
from .proxlib import make_prox, prox_oracle

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3

SOLVER_KEYS = ("method", "step", "rtol", "atol", "h_max", "t_max", "stationary_tol",
               "record_every")
ANALYSIS_DEFAULTS = {"monitor": True, "rates": False, "oscillation": True,
                     "window": 20.0, "osc_tol": 1e-3, "monitor_tol": 1e-6,
                     "probe_step": 1e-3, "crit_tol": 1e-6, "tail_fraction": 0.8}


# -- config -------------------------------------------------------------------

def _prox_from_spec(spec):
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind is None:
        raise ArgumentError("prox spec needs a 'kind'")
    return make_prox(kind, **spec)


def problem_from_spec(spec):
    """Build a problem from a preset name or an inline JSON definition.

    Inline form::

        {"f": {"kind": "abs"}, "g": {"kind": "huber", "delta": 2},
         "coupling": {"type": "residual_square", "weight": 1, "offset": 1,
                      "coeffs": [1, 1]},
         "dims": [1, 1], "lipschitz": 4}

    `coupling.type` may also be ``"quadratic"`` with ``Q``, ``q``, ``const``.
    `lipschitz` is a number, ``{"l_x": .., "l_y": ..}``, ``"estimate"``
    (with ``estimate_box``), or omitted to use the coupling's exact constant.
    """
    if isinstance(spec, str):
        return get_preset(spec)
    if not isinstance(spec, dict):
        raise ArgumentError("problem must be a preset name or an object")
    try:
        f, g = _prox_from_spec(spec["f"]), _prox_from_spec(spec["g"])
        c = dict(spec["coupling"])
        dims = tuple(spec["dims"])
    except KeyError as exc:
        raise ArgumentError(f"inline problem is missing {exc}") from None
    ctype = c.pop("type", "residual_square")
    if ctype == "residual_square":
        coupling = ResidualSquare(float(c["weight"]), float(c["offset"]),
                                  tuple(float(a) for a in c["coeffs"]))
        if len(coupling.coeffs) != sum(dims):
            raise ArgumentError("coeffs must have n + m entries")
    elif ctype == "quadratic":
        coupling = Quadratic(np.array(c["Q"], dtype=float), np.array(c["q"], dtype=float),
                             float(c.get("const", 0.0)))
        if coupling.Q.shape[0] != sum(dims) or coupling.q.shape[0] != sum(dims):
            raise ArgumentError("Q and q must match n + m")
    else:
        raise ArgumentError(f"unknown coupling type {ctype!r}")
    lip = spec.get("lipschitz")
    kw = {}
    if isinstance(lip, dict):
        lip = PartialLipschitz(float(lip["l_x"]), float(lip["l_y"]))
    elif lip == "estimate":
        kw["estimate_box"] = spec.get("estimate_box")
    return BlockProblem.from_parts(f, g, coupling, dims, lipschitz=lip,
                                   name=spec.get("name", "custom"), **kw)


@dataclass
class RunConfig:
    problem_spec: object
    problem: BlockProblem
    params: DynParams
    x0: np.ndarray
    y0: np.ndarray
    solver: SolverConfig
    analysis: dict
    out: Path | None
    param_spec: dict = field(default_factory=dict)

    def echo(self):
        return {
            "problem": self.problem_spec,
            "params": self.param_spec,
            "resolved": {"lambda": self.params.lam, "mu": self.params.mu,
                         "gamma1": self.params.gamma1, "gamma2": self.params.gamma2,
                         "L": self.params.L, "c1": self.params.c1, "c2": self.params.c2},
            "x0": self.x0.tolist(),
            "y0": self.y0.tolist(),
            "solver": asdict(self.solver),
            "analysis": dict(self.analysis),
            "out": None if self.out is None else str(self.out),
        }


def params_from_spec(spec, problem):
    """DynParams from ``{"lambda", "mu", and c1/c2 or gamma1/gamma2, optional L}``."""
    lam = float(spec.get("lambda", 0.0))
    mu = float(spec.get("mu", 1.0))
    has_c = spec.get("c1") is not None or spec.get("c2") is not None
    has_g = spec.get("gamma1") is not None or spec.get("gamma2") is not None
    if has_c == has_g:
        raise ArgumentError("give exactly one of (c1, c2) or (gamma1, gamma2)")
    L = spec.get("L")
    if L is None:
        L = problem.L if problem is not None and problem.L is not None else 1.0
    L = float(L)
    extra = {}
    if spec.get("beta") is not None:
        extra["beta"] = float(spec["beta"])
    if problem is not None and problem.partial is not None:
        extra["partial"] = problem.partial
    if has_c:
        if spec.get("c1") is None or spec.get("c2") is None:
            raise ArgumentError("both c1 and c2 are required")
        return DynParams.from_c(lam, mu, float(spec["c1"]), float(spec["c2"]), L, **extra)
    if spec.get("gamma1") is None or spec.get("gamma2") is None:
        raise ArgumentError("both gamma1 and gamma2 are required")
    return DynParams(lam, mu, float(spec["gamma1"]), float(spec["gamma2"]), L, **extra)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ArgumentError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ArgumentError(f"invalid JSON in {path}: {exc}") from None


def build_run_config(args):
    cfg = _load_json(args.config) if getattr(args, "config", None) else {}
    if not isinstance(cfg, dict):
        raise ArgumentError("config root must be an object")
    problem_spec = args.preset if args.preset else cfg.get("problem", "example1")
    problem = problem_from_spec(problem_spec)

    pspec = dict(cfg.get("params", {}))
    cli_c = getattr(args, "c1", None) is not None or getattr(args, "c2", None) is not None
    cli_g = getattr(args, "gamma1", None) is not None or getattr(args, "gamma2", None) is not None
    if cli_c and cli_g:
        raise ArgumentError("give exactly one of (c1, c2) or (gamma1, gamma2)")
    for key, attr in (("lambda", "lam"), ("mu", "mu"), ("c1", "c1"), ("c2", "c2"),
                      ("gamma1", "gamma1"), ("gamma2", "gamma2"), ("L", "L"),
                      ("beta", "beta")):
        v = getattr(args, attr, None)
        if v is not None:
            pspec[key] = v
            # a flag of one parametrisation replaces the other from the file
            if key in ("c1", "c2"):
                pspec.pop("gamma1", None), pspec.pop("gamma2", None)
            if key in ("gamma1", "gamma2"):
                pspec.pop("c1", None), pspec.pop("c2", None)
    if not any(k in pspec for k in ("c1", "c2", "gamma1", "gamma2")):
        pspec["c1"] = pspec["c2"] = 1.0
    params = params_from_spec(pspec, problem)

    if isinstance(problem_spec, str) and problem_spec in DEFAULT_START:
        dx0, dy0 = DEFAULT_START[problem_spec]
    else:
        dx0, dy0 = np.zeros(problem.dims[0]), np.zeros(problem.dims[1])
    x0 = args.x0 if args.x0 is not None else cfg.get("x0", dx0)
    y0 = args.y0 if args.y0 is not None else cfg.get("y0", dy0)
    x0, y0 = problem.check_point(x0, y0)

    sspec = {"method": "adaptive", "t_max": 100.0}
    sspec.update(cfg.get("solver", {}))
    for key in SOLVER_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            sspec[key] = v
    unknown = set(sspec) - set(SolverConfig.__dataclass_fields__)
    if unknown:
        raise ArgumentError(f"unknown solver keys: {sorted(unknown)}")
    solver = SolverConfig(**sspec)

    analysis = dict(ANALYSIS_DEFAULTS)
    analysis.update(cfg.get("analysis", {}))
    if getattr(args, "rates", False):
        analysis["rates"] = True
    unknown = set(analysis) - set(ANALYSIS_DEFAULTS)
    if unknown:
        raise ArgumentError(f"unknown analysis keys: {sorted(unknown)}")
    out = args.out if args.out is not None else cfg.get("out")
    return RunConfig(problem_spec, problem, params, x0, y0, solver, analysis,
                     None if out is None else Path(out), pspec)


# -- output -------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def trajectory_columns(dims):
    n, m = dims
    return (["t"] + [f"x_{i + 1}" for i in range(n)] + [f"y_{j + 1}" for j in range(m)]
            + [f"xdot_{i + 1}" for i in range(n)] + [f"ydot_{j + 1}" for j in range(m)]
            + ["psi", "lyap"])


def write_trajectory_csv(traj, path):
    data = np.column_stack([traj.times, traj.states, traj.derivs, traj.psi, traj.lyap])
    np.savetxt(path, data, fmt="%.17g", delimiter=",",
               header=",".join(trajectory_columns(traj.dims)), comments="")


def read_trajectory_csv(path):
    """Return (columns, data) of a trajectory CSV."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def _clean(obj):
    """Make an object JSON-safe (numpy scalars, arrays, non-finite floats)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")


PLOT_SCRIPT = '''\
"""Plot a trajectory.csv written by proxflow (needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "trajectory.csv"
with open(path) as fh:
    rows = list(csv.DictReader(fh))
t = [float(r["t"]) for r in rows]
blocks = [k for k in rows[0] if k.startswith(("x_", "y_"))]
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for k in blocks:
    ax1.plot(t, [float(r[k]) for r in rows], label=k)
ax1.set_xlabel("t")
ax1.legend()
ax2.plot(t, [float(r["lyap"]) for r in rows])
ax2.set_xlabel("t")
ax2.set_ylabel("Lyapunov value")
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + ".png", dpi=120)
'''


# -- run ----------------------------------------------------------------------

def execute_run(rc, backend=None, emit_plot_script=False):
    """Integrate and analyse one configuration; returns (manifest, trajectory, exit code).

    A manifest is produced (and written when `rc.out` is set) even when the
    integration fails.
    """
    t_start = time.perf_counter()
    report = check_condition(rc.params)
    manifest = {"version": __version__, "config": rc.echo(), "condition": report.as_dict()}
    traj = None
    code = EXIT_OK
    files = {}
    try:
        traj = integrate(rc.problem, rc.params, rc.x0, rc.y0, rc.solver, backend=backend)
        a = rc.analysis
        if a["oscillation"] and traj.terminated == "time-limit":
            flag, period = detect_oscillation(traj, a["window"], a["osc_tol"])
            if flag:
                traj = traj.with_oscillation(period)
        x_end, y_end = traj.final_state
        manifest.update({
            "backend": traj.backend,
            "terminated": traj.terminated,
            "message": traj.message,
            "oscillation": traj.terminated == "oscillation",
            "period": traj.period,
            "terminal_state": {"t": float(traj.times[-1]), "x": x_end, "y": y_end,
                               "speed": float(traj.speed[-1]), "samples": len(traj)},
        })
        if traj.terminated == "error":
            code = EXIT_NUMERIC
        else:
            crit = verify_critical(rc.problem, (x_end, y_end), a["probe_step"], a["crit_tol"],
                                   traj=traj)
            manifest["crit"] = crit.as_dict()
            if a["monitor"] or a["rates"]:
                series = monitor_decrease(traj, rc.params, report, a["monitor_tol"], rc.problem)
                sub = subgradient_residual(traj, rc.problem, rc.params)
                manifest["lyapunov"] = series.as_dict()
                manifest["subgradient"] = {"bound_constant": sub.bound_constant,
                                           "holds": sub.holds, "worst_ratio": sub.worst_ratio}
                if a["rates"]:
                    try:
                        manifest["rates"] = fit_rate(series, None,
                                                     a["tail_fraction"]).as_dict()
                    except (InsufficientDataError, ArgumentError) as exc:
                        manifest["rates"] = {"error": str(exc)}
        if rc.out is not None:
            rc.out.mkdir(parents=True, exist_ok=True)
            csv_path = rc.out / "trajectory.csv"
            write_trajectory_csv(traj, csv_path)
            files["trajectory.csv"] = _sha256(csv_path)
            if emit_plot_script:
                (rc.out / "plot_trajectory.py").write_text(PLOT_SCRIPT)
    except ProxflowError as exc:
        manifest.update({"terminated": "error", "message": f"{type(exc).__name__}: {exc}"})
        code = EXIT_NUMERIC
    manifest["checksums"] = files
    manifest["duration_s"] = time.perf_counter() - t_start
    if rc.out is not None:
        rc.out.mkdir(parents=True, exist_ok=True)
        write_json(manifest, rc.out / "manifest.json")
    return manifest, traj, code


def _summary(manifest):
    lines = [f"terminated: {manifest.get('terminated')}"]
    ts = manifest.get("terminal_state")
    if ts:
        lines.append(f"t_end = {ts['t']:.6g}  x = {np.round(ts['x'], 6).tolist()}  "
                     f"y = {np.round(ts['y'], 6).tolist()}  |z'| = {ts['speed']:.3e}")
    if manifest.get("period"):
        lines.append(f"oscillation period ~ {manifest['period']:.4g}")
    if "crit" in manifest:
        c = manifest["crit"]
        lines.append(f"criticality residual = {c['residual']:.3e} "
                     f"({'critical' if c['is_critical'] else 'not critical'})")
    cond = manifest["condition"]
    lines.append(f"stepsize condition: margin {cond['margin']:.6g} "
                 f"({'satisfied' if cond['satisfied'] else 'not satisfied'})")
    if "lyapunov" in manifest:
        ly = manifest["lyapunov"]
        lines.append(f"Lyapunov: {ly['decrease_violations']} increase(s) > {ly['tol']:g}, "
                     f"integrated bound {ly['integrated_bound']}")
    if "rates" in manifest:
        r = manifest["rates"]
        if "error" in r:
            lines.append(f"rate fit: {r['error']}")
        else:
            lines.append(f"rate fit: theta = {r['theta']:.4f} ({r['rate_class']})")
    if manifest.get("message"):
        lines.append(manifest["message"])
    return "\n".join(lines)


def cmd_run(args):
    rc = build_run_config(args)
    manifest, _, code = execute_run(rc, backend=args.backend,
                                    emit_plot_script=args.emit_plot_script)
    print(_summary(manifest))
    if rc.out is not None:
        print(f"wrote {rc.out}")
    return code


# -- sweep --------------------------------------------------------------------

def parse_grid(text):
    """``"a:h:b"`` (inclusive of b) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0 or parts[2] < parts[0]:
            raise ArgumentError(f"bad range {text!r}; use start:step:stop")
        a, h, b = parts
        count = int(math.floor((b - a) / h + 1e-9)) + 1
        # round to the step's decimals so 0.05 * 3 prints as 0.15
        digits = max(0, -int(math.floor(math.log10(h))) + 6)
        return [round(a + k * h, digits) for k in range(count)]
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ArgumentError("empty grid")
    return vals


def _threads(n_jobs):
    env = os.environ.get("PROXFLOW_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ArgumentError("PROXFLOW_THREADS must be an integer") from None
    return max(1, min(cap, n_jobs))


def run_sweep(base, lambdas, cs, backend=None):
    """Run the grid ``cs x lambdas`` (c1 = c2 = c); rows come back in grid order."""
    grid = [(c, lam) for c in cs for lam in lambdas]
    jobs = []
    for idx, (c, lam) in enumerate(grid):
        pspec = dict(base.param_spec)
        if lam is not None:
            pspec["lambda"] = lam
        if c is not None:
            pspec.pop("gamma1", None), pspec.pop("gamma2", None)
            pspec["c1"] = pspec["c2"] = c
        params = params_from_spec(pspec, base.problem)
        out = None if base.out is None else base.out / f"run_{idx:03d}"
        jobs.append(RunConfig(base.problem_spec, base.problem, params, base.x0, base.y0,
                              base.solver, base.analysis, out, pspec))

    def work(rc):
        manifest, _, code = execute_run(rc, backend=backend)
        return manifest, code

    with ThreadPoolExecutor(max_workers=_threads(len(jobs))) as pool:
        results = list(pool.map(work, jobs))
    return jobs, results


def sweep_rows(problem, jobs, results):
    n, m = problem.dims
    header = (["index", "lambda", "c1", "c2"] + [f"x_{i + 1}" for i in range(n)]
              + [f"y_{j + 1}" for j in range(m)]
              + ["terminated", "oscillation", "period", "crit_residual", "error"])
    rows = []
    for idx, (rc, (man, _)) in enumerate(zip(jobs, results)):
        ts = man.get("terminal_state")
        xs = list(ts["x"]) if ts else [math.nan] * n
        ys = list(ts["y"]) if ts else [math.nan] * m
        crit = man.get("crit", {}).get("residual", math.nan)
        err = man.get("message", "") if man.get("terminated") == "error" else ""
        rows.append([idx, rc.params.lam, rc.params.c1, rc.params.c2] + xs + ys
                    + [man.get("terminated"), int(bool(man.get("oscillation"))),
                       man.get("period") or "", crit, err])
    return header, rows


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_sweep_csv(header, rows, path):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(_fmt(v).replace(",", ";") for v in r) + "\n")


def cmd_sweep(args):
    base = build_run_config(args)
    lambdas = parse_grid(args.lambdas) if args.lambdas else [None]
    cs = parse_grid(args.cs) if args.cs else [None]
    jobs, results = run_sweep(base, lambdas, cs, backend=args.backend)
    header, rows = sweep_rows(base.problem, jobs, results)
    n, m = base.problem.dims
    for r in rows:
        pt = ", ".join(f"{v:.6g}" for v in r[4:4 + n + m])
        print(f"[{r[0]:3d}] lambda={r[1]:<6g} c={r[2]:<6g} -> ({pt})  {r[4 + n + m]}"
              + ("  OSCILLATION" if r[5 + n + m] else ""))
    if base.out is not None:
        base.out.mkdir(parents=True, exist_ok=True)
        write_sweep_csv(header, rows, base.out / "sweep.csv")
        print(f"wrote {base.out / 'sweep.csv'}")
    return EXIT_NUMERIC if any(code != EXIT_OK for _, code in results) else EXIT_OK


# -- check --------------------------------------------------------------------

def cmd_check(args):
    problem = get_preset(args.preset) if args.preset else None
    pspec = {"lambda": args.lam if args.lam is not None else 0.0,
             "mu": args.mu if args.mu is not None else 1.0,
             "c1": args.c1, "c2": args.c2, "gamma1": args.gamma1, "gamma2": args.gamma2,
             "L": args.L, "beta": args.beta}
    params = params_from_spec(pspec, problem)
    report = check_condition(params)
    print(f"lambda = {params.lam:g}, mu = {params.mu:g}, gamma1 = {params.gamma1:.12g}, "
          f"gamma2 = {params.gamma2:.12g}, L = {params.L:g}")
    print(report.format())
    return EXIT_OK if report.satisfied else EXIT_CHECK


# -- proxtest -----------------------------------------------------------------

def proxtest(kind, trials=1000, seed=0, step=1e-4, span=10.0, **params):
    """Largest deviation between a closed-form prox and the grid oracle.

    Returns ``(max_deviation, step)``. For ``l1`` each trial is a random
    3-vector checked componentwise.
    """
    handle = make_prox(kind, **params)
    rng = np.random.default_rng(seed)
    dim = 3 if kind == "l1" else 1
    worst = 0.0
    for _ in range(int(trials)):
        alpha = float(rng.uniform(0.05, 2.0))
        x = rng.uniform(-5.0, 5.0, size=dim)
        p = handle(alpha, x)
        for i in range(dim):
            q = prox_oracle(handle.scalar_value, alpha, x[i], -span, span, step)
            worst = max(worst, abs(p[i] - q))
    return worst, step


def cmd_proxtest(args):
    if args.kind not in ("abs", "l1", "huber", "quadratic", "box", "zero"):
        raise ArgumentError(f"unknown prox kind {args.kind!r}")
    params = {}
    if args.kind == "huber":
        params["delta"] = args.delta
    elif args.kind == "box":
        params["lo"], params["hi"] = args.lo, args.hi
    elif args.kind == "quadratic":
        params["weight"] = args.weight
    dev, step = proxtest(args.kind, args.trials, args.seed, **params)
    ok = dev <= step * (1 + 1e-9)
    print(f"{args.kind}: {args.trials} trials, max deviation {dev:.3e} "
          f"(grid step {step:g}) -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


# -- rates --------------------------------------------------------------------

def trajectory_from_csv(path, problem, params):
    header, data = read_trajectory_csv(path)
    n, m = problem.dims
    if header != trajectory_columns((n, m)):
        raise ArgumentError(f"{path}: columns do not match problem dims {(n, m)}")
    N = n + m
    times = data[:, 0]
    states = data[:, 1:1 + N]
    derivs = data[:, 1 + N:1 + 2 * N]
    return Trajectory(times, states, derivs, data[:, -2], data[:, -1], "stationary",
                      (n, m), params, SolverConfig())


def cmd_rates(args):
    csv_path = Path(args.csv)
    man_path = Path(args.manifest) if args.manifest else csv_path.parent / "manifest.json"
    if man_path.exists() and not args.preset:
        cfg = _load_json(man_path)["config"]
        problem = problem_from_spec(cfg["problem"])
        params = params_from_spec(cfg["params"], problem)
    else:
        if not args.preset:
            raise ArgumentError("no manifest next to the CSV; pass --preset and parameters")
        problem = get_preset(args.preset)
        pspec = {"lambda": args.lam or 0.0, "mu": 1.0 if args.mu is None else args.mu,
                 "c1": args.c1, "c2": args.c2, "gamma1": args.gamma1,
                 "gamma2": args.gamma2, "L": args.L}
        if all(pspec[k] is None for k in ("c1", "c2", "gamma1", "gamma2")):
            pspec["c1"] = pspec["c2"] = 1.0
        params = params_from_spec(pspec, problem)
    traj = trajectory_from_csv(csv_path, problem, params)
    series = monitor_decrease(traj, params, check_condition(params), 1e-6, problem)
    try:
        fit = fit_rate(series, None, args.tail)
    except InsufficientDataError as exc:
        print(f"rate fit failed: {exc}")
        return EXIT_NUMERIC
    print(json.dumps(_clean(fit.as_dict()), indent=2))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _vector(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_params(p):
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--L", type=float, help="Lipschitz constant (default: the problem's)")
    p.add_argument("--beta", type=float, help="override of the Gamma Lipschitz constant")


def _add_run_args(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--preset", choices=sorted(PRESETS))
    _add_params(p)
    p.add_argument("--x0", type=_vector, help="comma-separated initial x")
    p.add_argument("--y0", type=_vector, help="comma-separated initial y")
    p.add_argument("--method", choices=("euler", "rk4", "adaptive"))
    p.add_argument("--step", type=float)
    p.add_argument("--rtol", type=float)
    p.add_argument("--atol", type=float)
    p.add_argument("--h-max", dest="h_max", type=float)
    p.add_argument("--tmax", dest="t_max", type=float)
    p.add_argument("--stationary-tol", dest="stationary_tol", type=float)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--rates", action="store_true", help="fit the convergence rate")
    p.add_argument("--backend", choices=("auto", "compiled", "python"), default="auto")
    p.add_argument("--out", help="output directory")


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1, not argparse's default 2 (reserved for numerics)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="proxflow", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"proxflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="integrate one configuration")
    _add_run_args(p)
    p.add_argument("--emit-plot-script", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid over lambda and/or c1 = c2")
    _add_run_args(p)
    p.add_argument("--lambdas", help="grid, e.g. 0:0.05:1 or 0.1,0.5")
    p.add_argument("--cs", help="grid of c1 = c2 values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="evaluate the stepsize condition")
    p.add_argument("--preset", choices=sorted(PRESETS), help="take L from a preset")
    _add_params(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("proxtest", help="compare a closed-form prox with the grid oracle")
    p.add_argument("--kind", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--lo", type=float, default=-1.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--weight", type=float, default=1.0)
    p.set_defaults(func=cmd_proxtest)

    p = sub.add_parser("rates", help="rate fit on an existing trajectory CSV")
    p.add_argument("csv")
    p.add_argument("--manifest", help="manifest.json (default: next to the CSV)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    _add_params(p)
    p.add_argument("--tail", type=float, default=0.8, help="tail fraction of the time span")
    p.set_defaults(func=cmd_rates)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        return args.func(args)
    except ArgumentError as exc:
        print(f"proxflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProxflowError as exc:
        print(f"proxflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
