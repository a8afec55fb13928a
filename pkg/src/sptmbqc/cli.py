"""Command-line front end: ``sptmbqc <command> [--config FILE] [--seed N] [--rounds M] [--out PATH] [--jobs J]``."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .algebra import load_bundle, spin1_bundle, verify_bundle
from .config import (
    ConfigError,
    config_hash,
    dumps,
    get_bool,
    get_float,
    get_int,
    make_rng,
    parse_float_list,
    parse_key_values,
)
from .mbqc import MeasurementPlan, enumerate_paths, load_plan, plan_from_config, sample_rounds, teleport_step
from .observables import (
    proposition1_rhs,
    string_order_bulk_end,
    string_order_rows,
    write_csv,
)
from .qcore import AXES, StateVector
from .states import (
    EigensolverError,
    HamiltonianParams,
    build_aklt_prime,
    build_hamiltonian,
    ground_state,
    load_state,
    save_state,
    symmetry_residuals,
)

RESIDUAL_TOL = 1e-10
EXACT_TOL = 1e-10
TELEPORT_TOL = 1e-12


class CommandError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration helpers


def _load_config(args: argparse.Namespace) -> dict[str, str]:
    cfg = parse_key_values(args.config) if args.config else {}
    for flag in ("seed", "rounds", "jobs"):
        value = getattr(args, flag)
        if value is not None:
            cfg[flag] = str(value)
    if args.out is not None:
        cfg["out"] = args.out
    cfg["_base"] = str(Path(args.config).parent) if args.config else "."
    return cfg


def _resolve(cfg: dict[str, str], key: str) -> Path:
    p = Path(cfg[key])
    return p if p.is_absolute() else Path(cfg["_base"]) / p


def _public(cfg: dict[str, str]) -> dict[str, str]:
    """Settings that affect results; the output path and worker count are excluded."""
    return {k: v for k, v in sorted(cfg.items()) if not k.startswith("_") and k not in ("out", "jobs")}


def _seed(cfg: dict[str, str], command: str) -> int:
    if "seed" not in cfg:
        raise ConfigError(f"{command} is stochastic: a seed is required (--seed or 'seed = ...')")
    return get_int(cfg, "seed")


def _params(cfg: dict[str, str], n_default: int = 6) -> HamiltonianParams:
    n = get_int(cfg, "n_bulk", n_default)
    try:
        if get_bool(cfg, "aklt_hamiltonian", False):
            return HamiltonianParams.aklt_point(n, get_float(cfg, "j_0", 1.0), get_float(cfg, "j_end", 1.0))
        return HamiltonianParams(
            n,
            theta=get_float(cfg, "theta", 0.0),
            d_x=get_float(cfg, "d_x", 0.0),
            d_z=get_float(cfg, "d_z", 0.0),
            j_0=get_float(cfg, "j_0", 1.0),
            j_end=get_float(cfg, "j_end", 1.0),
            anisotropy_sites=cfg.get("anisotropy_sites", "interior"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _state(cfg: dict[str, str], n_default: int = 6) -> tuple[StateVector, dict[str, Any]]:
    """Resource state from ``state = aklt | ed | file``."""
    source = cfg.get("state", "aklt")
    if source == "aklt":
        return build_aklt_prime(get_int(cfg, "n_bulk", n_default)), {"source": "valence-bond"}
    if source == "file":
        return load_state(_resolve(cfg, "state_file")), {"source": str(cfg["state_file"])}
    if source == "ed":
        params = _params(cfg, n_default)
        gs = ground_state(build_hamiltonian(params), seed=get_int(cfg, "seed", 0))
        return gs.state, {
            "source": "exact-diagonalization",
            "energy": gs.energy,
            "gap": gs.gap,
            "residual": gs.residual,
            "degenerate": gs.degenerate,
            "warnings": params.warnings(),
        }
    raise ConfigError(f"state must be aklt, ed or file; got {source!r}")


def _group_order(m: int = 2) -> list[str]:
    from .algebra.group import elements

    return [g.label for g in elements(m)]


def _header(cfg: dict[str, str], seed: int | None, command: str) -> dict[str, Any]:
    return {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config_hash": config_hash(_public(cfg)),
        "group_order": _group_order(),
        "config": _public(cfg),
    }


def _emit(cfg: dict[str, str], text: str) -> None:
    out = cfg.get("out")
    if out and out != "-":
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_build_state(cfg: dict[str, str]) -> tuple[dict, bool]:
    params = _params(cfg)
    source = cfg.get("state", "ed")
    if source == "aklt":
        state = build_aklt_prime(params.n_bulk)
        meta: dict[str, Any] = {"source": "valence-bond"}
    else:
        try:
            gs = ground_state(build_hamiltonian(params), seed=get_int(cfg, "seed", 0))
        except EigensolverError as exc:
            raise CommandError(str(exc)) from exc
        state = gs.state
        meta = {
            "source": "exact-diagonalization",
            "energy": gs.energy,
            "gap": gs.gap,
            "residual": gs.residual,
            "degenerate": gs.degenerate,
        }
    meta["warnings"] = params.warnings() + (["ground state degenerate: unusable as a resource"] if meta.get("degenerate") else [])
    meta["params"] = {
        "n_bulk": params.n_bulk,
        "theta": params.theta,
        "d_x": params.d_x,
        "d_z": params.d_z,
        "j_0": params.j_0,
        "j_end": params.j_end,
        "aklt_hamiltonian": params.aklt,
        "anisotropy_sites": params.anisotropy_sites,
    }
    sym = symmetry_residuals(state)
    meta["symmetry"] = sym
    i = min(2, params.n_bulk)
    meta["string_order_bulk_end"] = {a: string_order_bulk_end(state, i, a) for a in AXES}
    meta["string_order_site"] = i
    state_path = cfg.get("state_out") or (str(Path(cfg["out"]).with_suffix(".bin")) if cfg.get("out") else None)
    if state_path:
        save_state(state_path, state)
        meta["state_file"] = state_path
    ok = all(v["residual"] < RESIDUAL_TOL for v in sym.values()) and not meta.get("degenerate", False)
    return meta, ok


def _plan(cfg: dict[str, str], n_bulk: int) -> MeasurementPlan:
    if "plan" in cfg:
        plan = load_plan(_resolve(cfg, "plan"))
    elif any(k.startswith("site.") for k in cfg):
        plan = plan_from_config(dict(cfg, n_bulk=cfg.get("n_bulk", str(n_bulk))))
    else:
        plan = MeasurementPlan.identity(n_bulk)
    if plan.n_bulk != n_bulk:
        raise ConfigError(f"plan is for N={plan.n_bulk} but the state has N={n_bulk}")
    return plan


def cmd_run(cfg: dict[str, str]) -> tuple[dict, bool]:
    seed = _seed(cfg, "run")
    rounds = get_int(cfg, "rounds", 100_000)
    jobs = get_int(cfg, "jobs", 1)
    state, meta = _state(cfg)
    plan = _plan(cfg, state.n_bulk)
    out: dict[str, Any] = {"state": meta, "plan": plan.describe(), "rounds": rounds}

    def mc(i_axis: tuple[int, str]) -> tuple[str, float, float]:
        i, a = i_axis
        samples = sample_rounds(state, plan.with_readout(a), rounds, make_rng(seed, i))
        return a, float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(rounds)) if rounds > 1 else float("nan")

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(mc, enumerate(AXES)))
    out["estimates"] = {a: m for a, m, _ in results}
    out["stderr"] = {a: s for a, _, s in results}

    ok = True
    try:
        ps = enumerate_paths(state, plan, jobs=jobs)
        out["exact"] = dict(ps.values)
        out["exact_total_probability"] = ps.total_probability
        out["exact_paths"] = ps.paths
        ok &= abs(ps.total_probability - 1) < EXACT_TOL
    except (MemoryError, ValueError) as exc:
        out["exact"] = None
        out["exact_omitted"] = str(exc)
    tilted = [(j, r) for j, r in plan.rules.items() if r.phi != 0]
    if len(tilted) == 1 and tilted[0][1].axis == "z" and tilted[0][1].adaptive:
        k, rule = tilted[0]
        closed = proposition1_rhs(state, k, rule.phi)
        out["closed_form"] = dict(zip(AXES, closed))
        if out.get("exact"):
            delta = {a: abs(out["exact"][a] - out["closed_form"][a]) for a in AXES}
            out["exact_minus_closed_form"] = delta
            ok &= max(delta.values()) < EXACT_TOL
    elif not tilted:
        out["closed_form"] = {"x": 1.0, "y": 0.0, "z": 0.0}
    ref = out.get("exact") or out.get("closed_form")
    if ref:
        out["monte_carlo_z_scores"] = {
            a: (out["estimates"][a] - ref[a]) / out["stderr"][a] if out["stderr"][a] > 0 else None for a in AXES
        }
    return out, bool(ok)


def _bundle(cfg: dict[str, str], n_bulk: int):
    if "bundle_file" in cfg:
        return load_bundle(_resolve(cfg, "bundle_file"), n_bulk)
    name = cfg.get("bundle", "spin1")
    if name != "spin1":
        raise ConfigError(f"unknown builtin bundle {name!r}")
    return spin1_bundle(n_bulk)


def cmd_verify(cfg: dict[str, str]) -> tuple[dict, bool]:
    cfg = dict(cfg)
    cfg.setdefault("n_bulk", "4")
    state, meta = _state(cfg, 4)
    bundle = _bundle(cfg, state.n_bulk)
    report = verify_bundle(bundle, state, seed=get_int(cfg, "seed", 0))
    out = {"state": meta, "bundle": bundle.describe(), **report.as_dict()}
    return out, report.passed


def _grid(cfg: dict[str, str], key: str, default: float) -> list[float]:
    if f"{key}_grid" in cfg:
        return parse_float_list(cfg[f"{key}_grid"])
    if f"{key}_min" in cfg:
        lo, hi = get_float(cfg, f"{key}_min"), get_float(cfg, f"{key}_max")
        n = get_int(cfg, f"{key}_points", 2)
        return [float(x) for x in np.linspace(lo, hi, n)]
    return [get_float(cfg, key, default)]


def _sweep_point(cfg: dict[str, str], theta: float, d_x: float, d_z: float, cache: Path | None) -> tuple[list[dict], str | None]:
    point_cfg = dict(_public(cfg), theta=repr(theta), d_x=repr(d_x), d_z=repr(d_z))
    for k in ("out", "jobs", "cache", "theta_grid", "d_x_grid", "d_z_grid"):
        point_cfg.pop(k, None)
    key = config_hash(point_cfg)
    if cache is not None:
        hit = cache / f"{key}.json"
        if hit.exists():
            data = json.loads(hit.read_text())
            return data["rows"], data["error"]
    n = get_int(cfg, "n_bulk", 6)
    i = get_int(cfg, "i", 2)
    j = get_int(cfg, "j", n - 1)
    phi = get_float(cfg, "phi", 0.1)
    meta = {"theta": theta, "D_x": d_x, "D_z": d_z, "N": n}
    error = None
    rows: list[dict] = []
    try:
        params = HamiltonianParams(
            n, theta=theta, d_x=d_x, d_z=d_z, j_0=get_float(cfg, "j_0", 1.0), j_end=get_float(cfg, "j_end", 1.0),
            anisotropy_sites=cfg.get("anisotropy_sites", "interior"),
        )
        gs = ground_state(build_hamiltonian(params), seed=get_int(cfg, "seed", 0))
        rows = string_order_rows(gs.state, meta, i=i, j=j)
        nu_z = next(r["value"] for r in rows if r["kind"] == "nu" and r["axis"] == "z")
        rows.append(dict(meta, i=i, j=n + 1, axis="z", kind="renormalized-angle", value=nu_z * phi))
        rows.append(dict(meta, i=0, j=0, axis="-", kind="gap", value=gs.gap))
    except (EigensolverError, ArithmeticError, ValueError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        rows = [dict(meta, i=i, j=j, axis="-", kind="error", value=float("nan"))]
    if cache is not None:
        cache.mkdir(parents=True, exist_ok=True)
        (cache / f"{key}.json").write_text(dumps({"rows": rows, "error": error}))
    return rows, error


def cmd_sweep(cfg: dict[str, str]) -> tuple[str, bool, list[str]]:
    thetas = _grid(cfg, "theta", 0.0)
    dxs = _grid(cfg, "d_x", 0.0)
    dzs = _grid(cfg, "d_z", 0.0)
    cache = _resolve(cfg, "cache") if "cache" in cfg else None
    points = [(t, x, z) for t in thetas for x in dxs for z in dzs]
    jobs = get_int(cfg, "jobs", 1)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        results = list(pool.map(lambda p: _sweep_point(cfg, *p, cache), points))
    rows = [r for rs, _ in results for r in rs]
    errors = [f"theta={p[0]!r} D_x={p[1]!r} D_z={p[2]!r}: {e}" for p, (_, e) in zip(points, results) if e]
    head = _header(cfg, get_int(cfg, "seed", 0), "sweep")
    lines = [
        f"# version={head['version']} seed={head['seed']} config_hash={head['config_hash']} "
        f"group_order={','.join(head['group_order'])}"
    ]
    lines += [f"# error {e}" for e in errors]
    return "\n".join(lines) + "\n" + write_csv(rows), not errors, errors


def cmd_teleport_demo(cfg: dict[str, str]) -> tuple[dict, bool]:
    seed = _seed(cfg, "teleport-demo")
    rng = make_rng(seed)
    n_states = get_int(cfg, "n_states", 50)
    axis = cfg.get("axis", "z")
    thetas = parse_float_list(cfg["thetas"]) if "thetas" in cfg else [float(x) for x in np.linspace(0, 2 * np.pi, 8, endpoint=False)]
    worst = 0.0
    prob_err = 0.0
    table: dict[str, dict[str, float]] = {}
    for _ in range(n_states):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        psi = v / np.linalg.norm(v)
        for th in thetas:
            outcomes = teleport_step(psi, axis, th)
            prob_err = max(prob_err, abs(sum(o.probability for o in outcomes) - 1))
            for o in outcomes:
                if o.probability > 1e-14:
                    worst = max(worst, 1 - o.fidelity)
                entry = table.setdefault(o.label, {"min_probability": 1.0, "max_probability": 0.0})
                entry["min_probability"] = min(entry["min_probability"], o.probability)
                entry["max_probability"] = max(entry["max_probability"], o.probability)
    ok = worst < TELEPORT_TOL and prob_err < TELEPORT_TOL
    return {
        "axis": axis,
        "thetas": thetas,
        "n_states": n_states,
        "max_infidelity": worst,
        "max_probability_error": prob_err,
        "outcomes": table,
    }, ok


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sptmbqc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("build-state", "build or solve for a resource state and cache it"),
        ("run", "Monte Carlo, exact path sum and closed form for a measurement plan"),
        ("verify", "bundle conditions, operator identities and block-local checks"),
        ("sweep", "string orders over a (theta, D_x, D_z) grid as CSV"),
        ("teleport-demo", "three-qubit teleportation against its closed form"),
    ):
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--rounds", type=int)
        p.add_argument("--out", help="output path; '-' or absent writes to stdout")
        p.add_argument("--jobs", type=int)
    return parser


COMMANDS: dict[str, Callable[[dict[str, str]], tuple]] = {
    "build-state": cmd_build_state,
    "run": cmd_run,
    "verify": cmd_verify,
    "teleport-demo": cmd_teleport_demo,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "sweep":
            text, ok, errors = cmd_sweep(cfg)
            _emit(cfg, text)
            for e in errors:
                print(f"sptmbqc: sweep point failed: {e}", file=sys.stderr)
            return 0 if ok else 1
        started = time.perf_counter()
        body, ok = COMMANDS[args.command](cfg)
        seed = get_int(cfg, "seed", 0) if "seed" in cfg else None
        record = dict(_header(cfg, seed, args.command), **body, ok=ok)
        _emit(cfg, dumps(record) + "\n")
        print(f"sptmbqc {args.command}: {'ok' if ok else 'FAILED'} ({time.perf_counter() - started:.2f} s)", file=sys.stderr)
        return 0 if ok else 1
    except (ConfigError, CommandError, FileNotFoundError) as exc:
        print(f"sptmbqc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
