"""Command-line entry point: ``delaylift --config run.json [--seed N] [--out DIR] [--quiet]``.

Config schema (JSON, unknown keys rejected)::

    {
      "command": "simulate" | "verify" | "probe",
      "system": {"family": "heat" | "schrodinger" | "toy", "N": 64,
                 "control_boundary": "right", "observation": "trace",
                 "c": 1.0, "lam_ref": 1.0, "a": 1.0, "b": 1.0, "sigma": 0.3,
                 "noise": {"kind": "kernel" | "multiplication" | "zero", "scale": 1.0}},
      "delay": {"r": 1.0, "m": 32, "kind": "dirac" | "none" | "uniform" | "atoms" | "density",
                "theta": -1.0, "weight": 1.0, "value": 1.0, "atoms": [[-0.5, 1.0]],
                "density": "const" | "exp" | "table", "rate": 1.0,
                "table": [[-1.0, 0.0], [0.0, 1.0]]},
      "run": {"horizon": 2.0, "n_paths": 1, "seed": 0, "output_dir": "out",
              "input": "sine" | "step" | "zero", "initial": "smooth" | "zero",
              "tolerances": {"oracle_equivalence": 5e-3, "block_law": 1e-6,
                             "resolvent_block": 1e-6, "phi_w": 1e-7}}
    }

Exit codes: 0 success, 1 a verification failed, 2 error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .boundary import probe_control_admissibility, probe_observation_admissibility
from .delay import grid_steps
from .errors import DelayLiftError, OffGridTime, ParseError, ValidationError
from .io import write_metadata, write_results, write_trajectory
from .lift import block_law_defect, resolvent_block_defect
from .sde import brownian_path, phi_W, simulate_mild, worker_count
from .systems import SystemSpec, delay_from_spec, heat_triple, make_system, schrodinger_triple
from .verify import VerificationResult, oracle_equivalence, regularity_suite

__all__ = ["RunConfig", "parse_config", "load_config", "run", "main", "default_inputs"]

TOP_KEYS = {"command", "system", "delay", "run"}
SYSTEM_KEYS = {"family", "N", "control_boundary", "observation", "c", "noise", "lam_ref", "a", "b", "sigma"}
NOISE_KEYS = {"kind", "scale"}
DELAY_KEYS = {"r", "m", "kind", "theta", "weight", "value", "atoms", "density", "rate", "table"}
RUN_KEYS = {"horizon", "n_paths", "seed", "output_dir", "tolerances", "input", "initial"}
DEFAULT_TOLERANCES = {"oracle_equivalence": 5e-3, "block_law": 1e-6, "resolvent_block": 1e-6, "phi_w": 1e-7}
COMMANDS = ("simulate", "verify", "probe")
DELAY_KIND_KEYS = {
    "none": set(),
    "dirac": {"theta", "weight"},
    "uniform": {"value"},
    "atoms": {"atoms"},
    "density": {"density", "value", "rate", "table", "atoms"},
}


@dataclass
class RunConfig:
    command: str
    system: SystemSpec
    delay: dict
    horizon: float
    n_paths: int = 1
    seed: int = 0
    output_dir: str = "out"
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    input: str = "sine"
    initial: str = "smooth"
    digest: str = ""


def _check_keys(obj, allowed, prefix):
    if not isinstance(obj, dict):
        raise ValidationError(prefix or "<root>", "must be an object")
    for key in obj:
        if key not in allowed:
            raise ValidationError(f"{prefix}.{key}" if prefix else key, "unknown key")


def _join(path, key):
    return f"{path}.{key}" if path else key


def _number(obj, key, path, default, kind=float, positive=False):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not isinstance(v, int)):
        raise ValidationError(_join(path, key), f"must be {'an integer' if kind is int else 'a number'}")
    if positive and not v > 0:
        raise ValidationError(_join(path, key), "must be positive")
    return kind(v)


def _choice(obj, key, path, default, options):
    v = obj.get(key, default)
    if v not in options:
        raise ValidationError(_join(path, key), f"must be one of {list(options)}")
    return v


def parse_config(text):
    """Validate a JSON config given as text or bytes."""
    if isinstance(text, bytes):
        raw = text
        text = text.decode("utf-8")
    else:
        raw = text.encode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    _check_keys(data, TOP_KEYS, "")
    for key in ("command", "system"):
        if key not in data:
            raise ValidationError(key, "required")
    command = _choice(data, "command", "", None, COMMANDS)

    sys_ = data["system"]
    _check_keys(sys_, SYSTEM_KEYS, "system")
    if "family" not in sys_:
        raise ValidationError("system.family", "required")
    family = _choice(sys_, "family", "system", None, ("heat", "schrodinger", "toy"))
    noise = sys_.get("noise")
    if noise is not None:
        _check_keys(noise, NOISE_KEYS, "system.noise")
        if "kind" not in noise:
            raise ValidationError("system.noise.kind", "required")
        _choice(noise, "kind", "system.noise", None, ("kernel", "multiplication", "zero"))
        _number(noise, "scale", "system.noise", 1.0)

    delay = data.get("delay", {})
    _check_keys(delay, DELAY_KEYS, "delay")
    r = _number(delay, "r", "delay", 1.0, positive=True)
    m = _number(delay, "m", "delay", 32, int, positive=True)
    dkind = _choice(delay, "kind", "delay", "none" if family == "toy" else "dirac", ("dirac", "none", "uniform", "atoms", "density"))
    for key in delay:
        if key not in ("r", "m", "kind") and key not in DELAY_KIND_KEYS[dkind]:
            raise ValidationError(f"delay.{key}", f"not used by delay kind {dkind!r}")
    dspec = {k: v for k, v in delay.items() if k not in ("r", "m")}
    dspec["kind"] = dkind
    if dkind == "dirac" and "theta" in delay:
        theta = _number(delay, "theta", "delay", -r)
        if not -r <= theta < 0:
            raise ValidationError("delay.theta", "must lie in [-r, 0)")

    kwargs = dict(family=family, r=r, m=m, noise=noise, delay=dspec)
    kwargs["N"] = _number(sys_, "N", "system", 64, int)
    for key in ("c", "lam_ref", "a", "b", "sigma"):
        if key in sys_:
            kwargs[key] = _number(sys_, key, "system", None)
    for key in ("control_boundary", "observation"):
        if key in sys_:
            if not isinstance(sys_[key], str):
                raise ValidationError(f"system.{key}", "must be a string")
            kwargs[key] = sys_[key]
    try:
        spec = SystemSpec(**kwargs)
    except DelayLiftError as exc:
        raise ValidationError("system", str(exc)) from exc
    try:
        delay_from_spec(dspec, r).snap(m)
    except (DelayLiftError, TypeError, ValueError, KeyError) as exc:
        raise ValidationError("delay", str(exc)) from exc

    run_ = data.get("run", {})
    _check_keys(run_, RUN_KEYS, "run")
    horizon = _number(run_, "horizon", "run", 2.0, positive=True)
    try:
        grid_steps(horizon, r, m)
    except OffGridTime as exc:
        raise ValidationError("run.horizon", f"must be a multiple of r/m = {r / m}") from exc
    n_paths = _number(run_, "n_paths", "run", 1, int, positive=True)
    seed = _number(run_, "seed", "run", 0, int)
    if seed < 0:
        raise ValidationError("run.seed", "must be nonnegative")
    out = run_.get("output_dir", "out")
    if not isinstance(out, str):
        raise ValidationError("run.output_dir", "must be a string")
    tol = dict(DEFAULT_TOLERANCES)
    tol_in = run_.get("tolerances", {})
    _check_keys(tol_in, set(DEFAULT_TOLERANCES), "run.tolerances")
    for key in tol_in:
        tol[key] = _number(tol_in, key, "run.tolerances", None)
    return RunConfig(
        command,
        spec,
        dspec,
        horizon,
        n_paths,
        seed,
        out,
        tol,
        _choice(run_, "input", "run", "sine", ("sine", "step", "zero")),
        _choice(run_, "initial", "run", "smooth", ("smooth", "zero")),
        hashlib.sha256(raw).hexdigest(),
    )


def load_config(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return parse_config(raw)


def default_inputs(ls, horizon, input_kind="sine", initial="smooth"):
    """Initial state, initial history and input samples used by the CLI."""
    k = grid_steps(horizon, ls.r, ls.m)
    nodes = ls.bt.geometry.get("nodes")
    if initial == "zero":
        xi = np.zeros(ls.n)
    elif nodes is None:
        xi = np.ones(ls.n)
    elif ls.name == "schrodinger":
        xi = np.sin(np.pi * nodes)
    else:
        xi = np.cos(np.pi * nodes)
    theta = -ls.r + np.arange(ls.m + 1) * ls.dt
    t = np.arange(k + 1) * ls.dt
    if input_kind == "sine":
        phi, u = np.sin(2 * np.pi * theta / ls.r), np.sin(2 * np.pi * t / ls.r)
    elif input_kind == "step":
        phi, u = np.ones_like(theta), np.ones_like(t)
    else:
        phi, u = np.zeros_like(theta), np.zeros_like(t)
    return xi, phi, u


def _metadata(cfg, ls, extra=None):
    rec = {
        "config_sha256": cfg.digest,
        "seed": cfg.seed,
        "command": cfg.command,
        "system": cfg.system.family,
        "system_digest": cfg.system.digest(),
        "grid": {"N": cfg.system.N, "r": ls.r, "m": ls.m, "dt": ls.dt, "horizon": cfg.horizon},
        "versions": {"delaylift": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }
    rec.update(extra or {})
    return rec


def _simulate(cfg, ls, out):
    xi, phi, u = default_inputs(ls, cfg.horizon, cfg.input, cfg.initial)
    k = len(u) - 1

    def one(p):
        return simulate_mild(ls, xi, phi, u, brownian_path(k, ls.dt, cfg.seed, p))

    workers = min(worker_count(), cfg.n_paths)
    if workers == 1:
        trajs = [one(p) for p in range(cfg.n_paths)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(one, range(cfg.n_paths)))
    files = []
    for p, traj in enumerate(trajs):
        name = f"trajectory_{p:04d}.csv"
        write_trajectory(traj, out / name)
        files.append(name)
    gaps = int(sum(t.gaps.sum() for t in trajs))
    write_metadata(_metadata(cfg, ls, {"files": files, "n_paths": cfg.n_paths, "output_gaps": gaps}), out / "metadata.json")
    return 0, [f"simulated {cfg.n_paths} path(s), {k + 1} rows each, {gaps} output gaps"]


def _verify(cfg, ls, out):
    tol = cfg.tolerances
    xi, phi, u = default_inputs(ls, cfg.horizon, cfg.input, cfg.initial)
    k = len(u) - 1
    path = brownian_path(k, ls.dt, cfg.seed, 0)
    results = []
    res = oracle_equivalence(ls, xi, phi, u, path, tol=tol["oracle_equivalence"])
    results.append(res)

    t_half = ls.dt * (ls.m // 2 or 1)
    d = block_law_defect(ls, t_half, ls.r, seed=cfg.seed)
    results.append(VerificationResult("block_law", d <= tol["block_law"], {"defect": d}, {"defect": tol["block_law"]}))
    d = resolvent_block_defect(ls, seed=cfg.seed)
    results.append(
        VerificationResult("resolvent_block", d <= tol["resolvent_block"], {"defect": d}, {"defect": tol["resolvent_block"]})
    )
    u0 = u - u[0]
    pw = phi_W(ls, cfg.horizon, u0, path)
    direct = simulate_mild(ls, np.zeros(ls.n), np.zeros(ls.m + 1), u0, path, observe=False)
    d = float(np.abs(pw.x - direct.x).max())
    results.append(
        VerificationResult("phi_w", d <= tol["phi_w"], {"sup_diff": d, "iterations": pw.iterations}, {"sup_diff": tol["phi_w"]})
    )
    results.append(regularity_suite(ls))
    results.sort(key=lambda r: r.name)
    write_results(results, out / "verify_results.csv")
    lines = [r.line() for r in results]
    (out / "verify_summary.txt").write_text("\n".join(lines) + "\n")
    write_metadata(_metadata(cfg, ls, {"passed": all(r.passed for r in results)}), out / "metadata.json")
    return (0 if all(r.passed for r in results) else 1), lines


def _probe(cfg, ls, out):
    spec = cfg.system
    meshes = [spec.N, 2 * spec.N, 4 * spec.N]
    reports = []
    if spec.family == "heat":
        family = [heat_triple(n, spec.c, spec.observation) for n in meshes]
    elif spec.family == "schrodinger":
        family = [schrodinger_triple(n) for n in meshes]
    else:
        family = [ls.bt]
    reports.append(probe_observation_admissibility(family, cfg.horizon))
    reports.append(probe_control_admissibility(family, ls.r))
    reports.extend(regularity_suite(ls).reports)
    lines = []
    for rep in reports:
        (out / f"probe_{rep.quantity_name}.csv").write_text(rep.to_csv())
        lines.append(f"{rep.quantity_name}: {rep.verdict} {[round(v, 6) for v in rep.values]}")
    write_metadata(_metadata(cfg, ls, {"verdicts": {r.quantity_name: r.verdict for r in reports}}), out / "metadata.json")
    return 0, lines


def run(cfg, quiet=False):
    """Execute a validated config; returns the process exit code."""
    try:
        ls = make_system(cfg.system)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        handler = {"simulate": _simulate, "verify": _verify, "probe": _probe}[cfg.command]
        code, lines = handler(cfg, ls, out)
    except (DelayLiftError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not quiet:
        for line in lines:
            print(line)
    return code


def main(argv=None):
    parser = argparse.ArgumentParser(prog="delaylift", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--out", help="override run.output_dir")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        if args.seed < 0:
            print("error: --seed must be nonnegative", file=sys.stderr)
            return 2
        cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    return run(cfg, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
