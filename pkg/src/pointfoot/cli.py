"""Command-line entry point: ``pointfoot {run, plan, validate, oracle}``.

Exit codes: 0 success, 2 a run ended in a fall, 1 any error (bad config,
planner failure, diverged simulation, unusable output directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pointfoot.config import apply_overrides, bundled_configs, load_config, parse_value, problems
from pointfoot.errors import ConfigError, PointfootError

EXIT_OK, EXIT_ERROR, EXIT_FALL = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("pointfoot.cli")


@dataclass
class RunManifest:
    name: str
    config: str
    out: Path
    seed: int | None = None
    overrides: list = field(default_factory=list)


def setup_logging():
    text = os.environ.get("POINTFOOT_LOG_LEVEL", "warn").strip().lower()
    level = LOG_LEVELS.get(text)
    logging.basicConfig(level=level or logging.WARNING, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)
    if level is None:
        log.warning("POINTFOOT_LOG_LEVEL=%r not one of %s; using warn", text, "/".join(LOG_LEVELS))


# --- output directories ----------------------------------------------------------------------

def check_out_dir(out: Path, force: bool):
    if out.exists() and (not out.is_dir() or any(out.iterdir())) and not force:
        raise ConfigError(f"output directory {out} exists and is not empty (use --force)",
                          problems=[("--out", str(out))])


def publish(tmp: Path, out: Path):
    """Move a finished temporary directory into place in one rename."""
    if out.exists():
        if out.is_dir():
            shutil.rmtree(out)
        else:
            out.unlink()
    os.replace(tmp, out)


def staging_dir(out: Path) -> Path:
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    umask = os.umask(0)
    os.umask(umask)
    tmp.chmod(0o777 & ~umask)
    return tmp


# --- run -------------------------------------------------------------------------------------

def config_name(ref: str) -> str:
    return ref if ref in bundled_configs() else Path(ref).stem


def execute(manifest: RunManifest) -> dict:
    """Resolve, run and write one manifest; never raises. Returns the summary written."""
    from pointfoot.sim.scenarios import run_scenario, write_outputs, write_summary

    tmp = staging_dir(manifest.out)
    resolved = None
    started = time.perf_counter()
    try:
        try:
            cfg = apply_overrides(load_config(manifest.config), manifest.overrides)
            if manifest.seed is not None:
                cfg["seed"] = manifest.seed
            resolved = cfg
            probs = problems(cfg)
            if probs:
                raise ConfigError(f"{manifest.config}: invalid config", problems=probs)
            result = run_scenario(cfg["scenario"], cfg)
            result.summary["name"] = manifest.name
            result.summary["wall_time"] = time.perf_counter() - started
            write_outputs(result, tmp, resolved, manifest.overrides)
            summary = result.summary
        except (PointfootError, OSError, ValueError, KeyError) as exc:
            summary = {"name": manifest.name, "status": "error", "fall": False,
                       "error": {"type": type(exc).__name__, "message": str(exc),
                                 "problems": getattr(exc, "problems", None)},
                       "wall_time": time.perf_counter() - started}
            write_summary(tmp / "summary.json", summary, resolved, manifest.overrides)
        publish(tmp, manifest.out)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp, ignore_errors=True)
    summary["out"] = str(manifest.out)
    return summary


def _report(summary: dict):
    status = summary["status"]
    line = f"{summary['name']}: {status}"
    if status == "fall":
        line += f" ({summary.get('fall_reason')})"
    elif status == "error":
        err = summary["error"]
        line += f" ({err['type']}: {err['message']})"
        for path, msg in err.get("problems") or ():
            line += f"\n  {path}: {msg}"
    else:
        env = summary.get("envelopes", {})
        line += f", t_end {summary.get('t_end', 0.0):.3f} s"
        if summary.get("steps_completed"):
            line += f", {summary['steps_completed']} steps"
        if "com_error_max" in env:
            line += f", max COM error {env['com_error_max']:.2e} m"
    print(line + f" -> {summary['out']}")


def exit_code(summaries) -> int:
    states = {s["status"] for s in summaries}
    if "error" in states:
        return EXIT_ERROR
    if "fall" in states:
        return EXIT_FALL
    return EXIT_OK


def cmd_run(args) -> int:
    refs = list(args.scenarios) + list(args.config or [])
    if not refs:
        raise ConfigError("nothing to run: give a scenario name or --config PATH")
    for ref in refs:
        load_config(ref)  # fail fast on a missing file, with its path
    seeds = args.seed or [None]
    jobs = [(ref, s) for ref in refs for s in seeds]
    stamp = time.strftime("%Y%m%d-%H%M%S")
    out = Path(args.out) if args.out else Path("runs") / (f"{config_name(refs[0])}-{stamp}" if len(jobs) == 1
                                                          else f"sweep-{stamp}")
    check_out_dir(out, args.force)
    if len(jobs) == 1:
        ref, seed = jobs[0]
        summaries = [execute(RunManifest(config_name(ref), ref, out, seed, list(args.set)))]
    else:
        manifests = []
        for ref, seed in jobs:
            name = config_name(ref) + (f"-seed{seed}" if seed is not None else "")
            manifests.append(RunManifest(name, ref, out / name, seed, list(args.set)))
        if out.exists() and args.force:
            shutil.rmtree(out)
        out.mkdir(parents=True, exist_ok=True)
        workers = max(1, min(args.workers, len(manifests)))
        if workers == 1:
            summaries = [execute(m) for m in manifests]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                summaries = list(pool.map(execute, manifests))
        index = [{k: s.get(k) for k in ("name", "status", "fall_reason", "steps_completed", "out")}
                 for s in summaries]
        (out / "sweep.json").write_text(json.dumps(index, indent=2) + "\n")
    for s in summaries:
        _report(s)
    return exit_code(summaries)


# --- plan ------------------------------------------------------------------------------------

PLAN_KEYS = ("t_prime", "impact_bias", "reach", "dt", "gravity")


def cmd_plan(args) -> int:
    from pointfoot.planner import HeightSurface, PipmState, PlanParams, integrate_pipm, plan_1d

    kw = {}
    if args.config:
        cfg = load_config(args.config[-1])
        kw.update({k: v for k, v in cfg.get("planner", {}).items() if k in PLAN_KEYS})
    for item in args.set:
        key, _, text = item.partition("=")
        if key not in PLAN_KEYS:
            raise ConfigError(f"unknown planner key {key!r}", problems=[(key, f"expected one of {PLAN_KEYS}")])
        kw[key] = parse_value(text)
    for key in ("t_prime", "impact_bias", "reach"):
        if getattr(args, key) is not None:
            kw[key] = getattr(args, key)
    kw.setdefault("impact_bias", 0.0)
    params = PlanParams(**kw).validate()
    surface = HeightSurface.polynomial(args.poly) if args.poly else HeightSurface.flat(args.height)
    now = PipmState(0.0, args.x0, args.xdot0, args.foot if args.foot is not None else args.x0)
    plan = plan_1d(now, args.remaining, surface, params)
    ax = plan.x
    print(f"switching state:  t {ax.switching.t:.4f}  x {ax.switching.x:.6f}  xdot {ax.switching.xdot:.6f}")
    print(f"post-impact:      x {ax.post_impact.x:.6f}  xdot {ax.post_impact.xdot:.6f}")
    print(f"footstep:         p = {plan.p_x:.6f}")
    print(f"reversal state:   t {ax.reversal.t:.4f}  x {ax.reversal.x:.6f}  xdot {ax.reversal.xdot:.3e}")
    if plan.saturated:
        print(f"warning: footstep saturated at the reach limit {params.reach} "
              f"(residual velocity {ax.footstep.residual_velocity:.4f} m/s)", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        check_out_dir(out, args.force)
        tmp = staging_dir(out)
        try:
            start = ax.post_impact.copy(foot=plan.p_x)
            tr = integrate_pipm(start, surface, params.t_prime, dt=params.dt, g=params.gravity)
            rows = ["t,x,xdot"] + [",".join(repr(float(c)) for c in r) for r in zip(tr.t, tr.x, tr.xdot)]
            (tmp / "phase_trajectory.csv").write_text("\n".join(rows) + "\n")
            doc = {"p": plan.p_x, "saturated": plan.saturated, "params": params.__dict__,
                   "surface": surface.to_dict(), "x0": args.x0, "xdot0": args.xdot0}
            (tmp / "plan.json").write_text(json.dumps(doc, indent=2, default=float) + "\n")
            publish(tmp, out)
        finally:
            shutil.rmtree(tmp, ignore_errors=True)
        print(f"wrote {out}")
    return EXIT_OK


# --- validate --------------------------------------------------------------------------------

def cmd_validate(args) -> int:
    refs = list(args.configs) + list(args.config or []) or sorted(bundled_configs())
    bad = 0
    for ref in refs:
        try:
            cfg = apply_overrides(load_config(ref), args.set)
        except ConfigError as exc:
            print(f"{ref}: {exc}")
            bad += 1
            continue
        probs = problems(cfg)
        if probs:
            bad += 1
            print(f"{ref}: {len(probs)} problem(s)")
            for path, msg in probs:
                print(f"  {path}: {msg}")
        else:
            print(f"{ref}: ok")
    return EXIT_ERROR if bad else EXIT_OK


# --- oracle ----------------------------------------------------------------------------------

def oracle_values(seed=0, n_states=3, n_lip=50, mc_samples=200_000) -> dict:
    """Brute-force reference values next to the production results they check."""
    from pointfoot import oracles
    from pointfoot.estimator import closest_quaternion
    from pointfoot.model import Kinematics, load_model, random_state
    from pointfoot.planner import HeightSurface, PipmState, find_footstep

    rng = np.random.default_rng(seed)
    out = {"seed": seed, "dynamics": {}, "lip_footsteps": [], "closest_quaternion": []}
    for name in ("hume_planar", "hume_spatial"):
        model = load_model(name)
        cases = []
        for _ in range(n_states):
            s = random_state(model, rng)
            kin = Kinematics(model, s)
            M_ref = oracles.mass_matrix_by_inverse_dynamics(model, s)
            g_ref = oracles.potential_gradient_fd(model, s)
            _, g = kin.bias_forces()
            cases.append({"q": s.q, "qdot": s.qdot, "mass_matrix": M_ref, "gravity": g_ref,
                          "mass_matrix_error": float(np.abs(M_ref - kin.mass_matrix()).max()),
                          "gravity_error": float(np.abs(g_ref - g).max())})
        out["dynamics"][name] = cases
    for _ in range(n_lip):
        x0, xd0, tp = rng.uniform(-0.5, 0.5), rng.uniform(-1.0, 1.0), rng.uniform(0.1, 0.5)
        p_ref = oracles.lip_reversal_footstep(x0, xd0, tp, 1.0)
        fs = find_footstep(PipmState(0.0, x0, xd0, x0), HeightSurface.flat(1.0), tp, reach=2.0)
        out["lip_footsteps"].append({"x0": x0, "xdot0": xd0, "t_prime": tp, "p": p_ref,
                                     "error": abs(fs.p - p_ref)})
    for _ in range(3):
        A = rng.standard_normal((3, 3))
        q_ref = oracles.closest_quaternion_monte_carlo(A, n=mc_samples, rng=rng)
        q = closest_quaternion(A)
        score = lambda p: float(np.trace(A.T @ oracles.quaternion_matrices(p[None])[0]))
        # sampling resolves the optimum to a few hundredths of a radian; the score gap must be >= 0
        out["closest_quaternion"].append({"A": A, "q": q_ref,
                                          "angle_error": float(2 * np.arccos(min(1.0, abs(float(q @ q_ref))))),
                                          "score_gap": score(q) - score(q_ref)})
    return out


def cmd_oracle(args) -> int:
    out = Path(args.out) if args.out else Path("oracle")
    check_out_dir(out, args.force)
    seed = args.seed[0] if args.seed else 0
    values = oracle_values(seed=seed)
    tmp = staging_dir(out)
    try:
        from pointfoot.sim.scenarios import _json_default
        (tmp / "oracle_values.json").write_text(json.dumps(values, indent=2, default=_json_default) + "\n")
        publish(tmp, out)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    for name, cases in values["dynamics"].items():
        print(f"{name}: mass matrix error {max(c['mass_matrix_error'] for c in cases):.2e}, "
              f"gravity error {max(c['gravity_error'] for c in cases):.2e}")
    print(f"LIP footstep error {max(c['error'] for c in values['lip_footsteps']):.2e} m")
    cq = values["closest_quaternion"]
    print(f"closest quaternion: angle to sampled optimum {max(c['angle_error'] for c in cq):.2e} rad, "
          f"score gap {min(c['score_gap'] for c in cq):.2e} (>= 0)")
    print(f"wrote {out / 'oracle_values.json'}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------------------

def _common(p, sets=True):
    p.add_argument("--config", action="append", metavar="PATH", help="config file (repeatable)")
    p.add_argument("--out", metavar="DIR", help="output directory, created atomically")
    p.add_argument("--seed", type=int, action="append", metavar="N", help="random seed (repeat to sweep)")
    if sets:
        p.add_argument("--set", action="append", default=[], metavar="key=value",
                       help="dotted-path override, value parsed as JSON when possible (repeatable)")
    p.add_argument("--force", action="store_true", help="replace a non-empty output directory")
    p.add_argument("--workers", type=int, default=1, metavar="N", help="parallel runs in a sweep")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1; exit code 2 is reserved for falls."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pointfoot", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run scenarios and write logs and a summary")
    p.add_argument("scenarios", nargs="*", help="shipped config names or config paths")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plan", help="one-shot footstep plan on a height surface")
    p.add_argument("--x0", type=float, default=0.0, help="COM position (m)")
    p.add_argument("--xdot0", type=float, default=0.5, help="COM velocity (m/s)")
    p.add_argument("--foot", type=float, help="current stance foot (m), default x0")
    p.add_argument("--remaining", type=float, default=0.0, help="time to the foot switch (s)")
    p.add_argument("--t-prime", dest="t_prime", type=float, help="time to velocity reversal (s)")
    p.add_argument("--impact-bias", dest="impact_bias", type=float, help="velocity change at impact (m/s)")
    p.add_argument("--reach", type=float, help="reach limit around the post-impact position (m)")
    p.add_argument("--height", type=float, default=1.0, help="flat surface height (m)")
    p.add_argument("--poly", type=float, nargs="+", metavar="C", help="surface coefficients c0 c1 ...")
    _common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="check configs against the schema and invariants")
    p.add_argument("configs", nargs="*", help="config names or paths (default: all shipped)")
    _common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="compute brute-force reference values")
    _common(p, sets=False)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PointfootError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for path, msg in getattr(exc, "problems", None) or ():
            print(f"  {path}: {msg}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
