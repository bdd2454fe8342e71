"""Scenario-driven command line front end.

Scenario documents are YAML with the sections described in the README
(lattice / state / flows / verify / output).  Outputs are deterministic for
a fixed scenario and seed: trajectory tables as CSV (one row per step and
site, hierarchy time and lattice coordinates in the leading columns), and
verification reports plus a run manifest as JSON.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical abort.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import yaml

from . import __version__, claims, darboux, flows, verify
from .dressing import (LaxState, random_bump_state, random_periodic_state,
                       vacuum_state)
from .errors import EmtodaError, NumericalAbortError, ScenarioError
from .flows import FlowSpec
from .lattice import DECAYING, PERIODIC, Lattice

_ENV_OUT = "EMTH_OUTPUT_DIR"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_trajectory_csv(path, trajectory, lattice, n):
    """One row per (step, site); complex entries split into re/im columns.

    Units: ``time`` is hierarchy time, ``site`` the fine lattice index and
    ``x`` the lattice coordinate.
    """
    header = ["step", "time", "site", "x"]
    for name in ("u", "v"):
        for i in range(n):
            for j in range(n):
                header += [f"{name}_{i}{j}_re", f"{name}_{i}{j}_im"]
    xs = lattice.coordinates()
    lines = [",".join(header)]
    for step, (t, state) in enumerate(zip(trajectory.times,
                                          trajectory.states)):
        for s in range(lattice.n_fine):
            row = [str(step), _fmt(t), str(s), _fmt(xs[s])]
            for data in (state.u.data, state.v.data):
                for i in range(n):
                    for j in range(n):
                        row += [_fmt(data[s, i, j].real),
                                _fmt(data[s, i, j].imag)]
            lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_state_csv(path, state):
    lattice, n = state.lattice, state.N
    header = ["site", "x"]
    for name in ("u", "v"):
        for i in range(n):
            for j in range(n):
                header += [f"{name}_{i}{j}_re", f"{name}_{i}{j}_im"]
    xs = lattice.coordinates()
    lines = [",".join(header)]
    for s in range(lattice.n_fine):
        row = [str(s), _fmt(xs[s])]
        for data in (state.u.data, state.v.data):
            for i in range(n):
                for j in range(n):
                    row += [_fmt(data[s, i, j].real),
                            _fmt(data[s, i, j].imag)]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _json_dump(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(explicit=None):
    d = explicit or os.environ.get(_ENV_OUT) or "."
    os.makedirs(d, exist_ok=True)
    return d


def _build_lattice(cfg) -> Lattice:
    try:
        return Lattice(int(cfg.get("sites", 16)), float(cfg.get("eps", 0.3)),
                       int(cfg.get("refine", 1)),
                       str(cfg.get("boundary", DECAYING)))
    except (ValueError, TypeError) as exc:
        raise ScenarioError(f"lattice: {exc}") from exc


def _build_state(cfg, lattice) -> LaxState:
    kind = cfg.get("kind", "vacuum")
    n = int(cfg.get("N", 2))
    seed = int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    amp = float(cfg.get("amplitude", 0.1))
    if kind == "vacuum":
        return vacuum_state(lattice, n, complex(cfg.get("c", 1.0)))
    if kind == "bump":
        return random_bump_state(lattice, n, rng, amplitude=amp)
    if kind == "periodic-random":
        return random_periodic_state(lattice, n, rng, amplitude=amp)
    if kind == "darboux":
        zs = [complex(z) for z in cfg.get("z", [1.4])]
        waves = verify._soliton_waves(lattice, n, zs, seed)
        return darboux.darboux_nfold(vacuum_state(lattice, n), waves).state
    raise ScenarioError(f"unknown state kind {kind!r}")


def _parse_flow(spec) -> FlowSpec:
    if isinstance(spec, str):
        parts = spec.split(",")
        family = parts[0]
        j = int(parts[1])
        k = int(parts[2]) if len(parts) > 2 and family != "s" else None
        return FlowSpec(family, j, k)
    return FlowSpec(spec["family"], int(spec["j"]),
                    int(spec["k"]) if spec.get("k") is not None else None)


def _print_records(records):
    failures = 0
    for rec in records:
        status = "pass" if rec["passed"] else "FAIL"
        print(f"[{status}] {rec['claim']:38s} residual={rec['residual']:.3e} "
              f"tol={rec['tolerance']:.1e}")
        failures += 0 if rec["passed"] else 1
    return failures


def cmd_verify(args) -> int:
    names = args.suite if args.suite else sorted(verify.SUITES)
    records = []
    for name in names:
        records.extend(verify.run_suite(name, seed=args.seed, n=args.N,
                                        tol_scale=args.tol_scale))
    failures = _print_records(records)
    if args.out:
        path = os.path.join(_out_dir(args.out_dir), args.out)
        _json_dump(path, {"suites": names, "seed": args.seed,
                          "records": records})
        print(f"report written to {path}")
    return 1 if failures else 0


def cmd_evolve(args) -> int:
    lattice = Lattice(args.M, args.eps, args.refine, args.boundary)
    state = _build_state({"kind": args.state, "N": args.N,
                          "seed": args.seed, "z": args.z and
                          [complex(z) for z in args.z.split(",")]},
                         lattice)
    flow = _parse_flow(args.flow)
    traj = flows.integrate(state, flow, args.dt, args.steps,
                           order=args.order)
    path = os.path.join(_out_dir(args.out_dir), args.out)
    write_trajectory_csv(path, traj, lattice, state.N)
    print(f"flow {flow.label()}: {args.steps} steps, trace drift "
          f"{traj.trace_drift():.3e}; trajectory written to {path}")
    return 0


def cmd_darboux(args) -> int:
    lattice = Lattice(args.M, args.eps, args.refine, DECAYING)
    zs = [complex(z) for z in args.z.split(",")]
    if len(zs) != args.order:
        raise ScenarioError(
            f"--order {args.order} needs {args.order} spectral values, "
            f"got {len(zs)}")
    waves = verify._soliton_waves(lattice, args.N, zs, args.seed)
    result = darboux.darboux_nfold(vacuum_state(lattice, args.N), waves)
    path = os.path.join(_out_dir(args.out_dir), args.out)
    write_state_csv(path, result.state)
    meta = {
        "order": args.order, "N": args.N, "M": args.M, "eps": args.eps,
        "seed": args.seed, "kernel_residual": result.kernel_residual,
        "spectral_data": [w.record for w in waves],
        "version": __version__,
    }
    _json_dump(path + ".json", meta)
    print(f"{args.order}-fold solution written to {path} "
          f"(kernel residual {result.kernel_residual:.3e})")
    return 0


def cmd_list_claims(_args) -> int:
    print(claims.format_catalog())
    return 0


def cmd_run(args) -> int:
    with open(args.scenario) as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ScenarioError("scenario document must be a mapping")
    lattice = _build_lattice(doc.get("lattice", {}))
    state_cfg = doc.get("state", {})
    state = _build_state(state_cfg, lattice)
    out_cfg = doc.get("output", {})
    out_dir = _out_dir(out_cfg.get("dir") or args.out_dir)

    manifest = {
        "version": __version__,
        "lattice": {"sites": lattice.sites, "eps": lattice.eps,
                    "refine": lattice.refine, "boundary": lattice.boundary},
        "state": state_cfg,
        "outputs": [],
    }
    failures = 0
    for idx, flow_cfg in enumerate(doc.get("flows", [])):
        flow = _parse_flow(flow_cfg)
        dt = float(flow_cfg.get("dt", 1e-3)) \
            if isinstance(flow_cfg, dict) else 1e-3
        steps = int(flow_cfg.get("steps", 10)) \
            if isinstance(flow_cfg, dict) else 10
        order = flow_cfg.get("order") if isinstance(flow_cfg, dict) else None
        traj = flows.integrate(state, flow, dt, steps, order=order)
        name = out_cfg.get("trajectory", "trajectory.csv")
        if len(doc.get("flows", [])) > 1:
            name = f"{idx}_{name}"
        path = os.path.join(out_dir, name)
        write_trajectory_csv(path, traj, lattice, state.N)
        manifest["outputs"].append({"flow": flow.label(), "dt": dt,
                                    "steps": steps, "trajectory": name,
                                    "trace_drift": traj.trace_drift()})
    ver_cfg = doc.get("verify", {})
    if ver_cfg:
        names = ver_cfg.get("suites", sorted(verify.SUITES))
        records = []
        for nm in names:
            records.extend(verify.run_suite(
                nm, seed=ver_cfg.get("seed"),
                n=ver_cfg.get("N"),
                tol_scale=float(ver_cfg.get("tol_scale", 1.0))))
        failures = _print_records(records)
        rep = os.path.join(out_dir, out_cfg.get("report", "report.json"))
        _json_dump(rep, {"suites": names, "records": records})
        manifest["outputs"].append({"report": out_cfg.get("report",
                                                          "report.json")})
    _json_dump(os.path.join(out_dir, out_cfg.get("manifest",
                                                 "manifest.json")), manifest)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="emth",
        description="numerical laboratory for the extended multicomponent "
                    "Toda hierarchy")
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default ${_ENV_OUT} or .)")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="execute a YAML scenario")
    pr.add_argument("scenario")
    pr.set_defaults(fn=cmd_run)

    pv = sub.add_parser("verify", help="run verification suites")
    pv.add_argument("--suite", action="append",
                    choices=sorted(verify.SUITES),
                    help="suite name (repeatable; default: all)")
    pv.add_argument("--N", type=int, default=None)
    pv.add_argument("--seed", type=int, default=None)
    pv.add_argument("--tol-scale", type=float, default=1.0)
    pv.add_argument("--out", default=None, help="JSON report filename")
    pv.set_defaults(fn=cmd_verify)

    pe = sub.add_parser("evolve", help="integrate a flow")
    pe.add_argument("--flow", required=True, help="family,j[,k] e.g. t,1,1")
    pe.add_argument("--dt", type=float, default=1e-3)
    pe.add_argument("--steps", type=int, default=100)
    pe.add_argument("--N", type=int, default=1)
    pe.add_argument("--M", type=int, default=16)
    pe.add_argument("--eps", type=float, default=0.3)
    pe.add_argument("--refine", type=int, default=1)
    pe.add_argument("--order", type=int, default=None,
                    help="dressing truncation order")
    pe.add_argument("--boundary", choices=(PERIODIC, DECAYING),
                    default=PERIODIC)
    pe.add_argument("--state", default="vacuum",
                    choices=("vacuum", "bump", "periodic-random", "darboux"))
    pe.add_argument("--z", default=None,
                    help="spectral values for --state darboux")
    pe.add_argument("--seed", type=int, default=0)
    pe.add_argument("--out", default="trajectory.csv")
    pe.set_defaults(fn=cmd_evolve)

    pd = sub.add_parser("darboux", help="generate a Darboux solution table")
    pd.add_argument("--order", type=int, default=1)
    pd.add_argument("--z", required=True, help="comma-separated roots")
    pd.add_argument("--N", type=int, default=2)
    pd.add_argument("--M", type=int, default=24)
    pd.add_argument("--eps", type=float, default=0.3)
    pd.add_argument("--refine", type=int, default=1)
    pd.add_argument("--seed", type=int, default=0)
    pd.add_argument("--out", default="solution.csv")
    pd.set_defaults(fn=cmd_darboux)

    pl = sub.add_parser("list-claims",
                        help="print the catalog of verifiable claims")
    pl.set_defaults(fn=cmd_list_claims)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbortError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except EmtodaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
