"""The ``algoprice`` command line.

Every subcommand is a thin adapter over the library: it parses arguments,
calls one library entry point, prints a human summary to stdout and writes
machine-readable artifacts to files.  Each written artifact gets a
``<name>.manifest.json`` sidecar recording the command, resolved
parameters, input digests, seed, tool version and wall-clock duration.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__, demand, market_sim, multi_price, spe, two_price
from .dynamics import Algorithm, CyclePolicy, FixedPair, iterate
from .errors import AlgopriceError

SCHEMA_VERSION = 1

_POLICIES = {p.value: p for p in CyclePolicy}


def _fmt(x: float) -> str:
    return f"{float(x):.10g}"


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path: str, command: str, params: dict,
                    inputs: list[str], seed, started: float) -> None:
    manifest = {
        "command": command,
        "parameters": {k: params[k] for k in sorted(params)},
        "input_digests": {p: _sha256(p) for p in inputs},
        "seed": seed,
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "duration_s": time.time() - started,
    }
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _read_kv(path: str) -> dict[str, str]:
    """Flat key-value file with optional [section] headers (ignored)."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line or line.startswith("["):
                continue
            if "=" not in line:
                raise AlgopriceError(f"bad config line: {raw!r}")
            key, value = line.split("=", 1)
            out[key.strip().lower()] = value.strip().strip('"').strip("'")
    return out


def _load_table(path: str) -> tuple[np.ndarray, list[float] | None]:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return np.asarray(obj["payoffs"], dtype=float), obj.get("prices")


def _parse_indices(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _print_matrix(t: np.ndarray) -> None:
    for row in t:
        print("  " + "  ".join(_fmt(x) for x in row))


# ---------------------------------------------------------------- commands

def _cmd_calibrate(args) -> int:
    started = time.time()
    a, b = demand.calibrate_discrete_choice(args.pc, args.pm)
    print(f"a = {_fmt(a)}")
    print(f"b = {_fmt(b)}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("model = discrete_choice\n")
            fh.write(f"a = {_fmt(a)}\nb = {_fmt(b)}\n")
            fh.write(f"grid_min = {_fmt(args.pc)}\ngrid_max = {_fmt(args.pm)}\n")
            fh.write(f"k = {args.k}\n")
        _write_manifest(args.out, "calibrate",
                        {"pc": args.pc, "pm": args.pm, "k": args.k},
                        [], None, started)
        print(f"wrote {args.out}")
    return 0


def _cmd_table(args) -> int:
    started = time.time()
    model, grid = demand.load_model_file(args.model)
    t = demand.payoff_matrix(model, grid)
    print(f"payoff table on {grid.k} prices "
          f"[{_fmt(grid.prices[0])} .. {_fmt(grid.prices[-1])}]:")
    _print_matrix(t)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"prices": list(grid.prices), "payoffs": t.tolist()}, fh)
        _write_manifest(args.out, "table", {"model": args.model},
                        [args.model], None, started)
        print(f"wrote {args.out}")
    return 0


def _cmd_dynamics(args) -> int:
    sa = Algorithm(_parse_indices(args.sa))
    sb = Algorithm(_parse_indices(args.sb))
    i, j = _parse_indices(args.start)
    outcome, transient = iterate(sa, sb, i, j)
    if isinstance(outcome, FixedPair):
        print(f"fixed pair: ({outcome.a}, {outcome.b}); "
              f"transient length {len(transient)}")
        payload = {"kind": "fixed", "pair": [outcome.a, outcome.b]}
    else:
        pairs = " -> ".join(str(p) for p in outcome.pairs)
        print(f"cycle of length {outcome.length}: {pairs}")
        payload = {"kind": "cycle", "pairs": [list(p) for p in outcome.pairs]}
    payload["transient"] = [list(p) for p in transient]
    if args.out:
        started = time.time()
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        _write_manifest(args.out, "dynamics",
                        {"sa": args.sa, "sb": args.sb, "start": args.start},
                        [], None, started)
    return 0


def _cmd_classify(args) -> int:
    policy = _POLICIES[args.policy]
    found = two_price.classify_mpe(args.x, args.y, args.beta, policy)
    labels = sorted(e.label for e in found)
    outcomes = []
    for label in labels:
        eq = next(e for e in two_price.EquilibriumType if e.label == label)
        desc = two_price.outcome_of(eq).describe()
        if desc not in outcomes:
            outcomes.append(desc)
    if len(labels) == 1:
        print(f"{labels[0]}; outcome: {outcomes[0]}")
    else:
        print(f"{'+'.join(labels)}; outcomes: {' | '.join(outcomes)}")
    return 0


def _cmd_scan(args) -> int:
    started = time.time()
    policy = _POLICIES[args.policy]
    raster = two_price.scan_region(args.beta, args.xmax, args.ymax,
                                   args.res, policy)
    two_price.write_scan_csv(raster, args.out, args.beta, args.xmax, args.ymax)
    _write_manifest(args.out, "scan",
                    {"beta": args.beta, "xmax": args.xmax, "ymax": args.ymax,
                     "res": args.res, "policy": args.policy},
                    [], None, started)
    counts = {int(c): int((raster == c).sum()) for c in np.unique(raster)}
    print(f"wrote {args.out}; cell counts by code: {counts}")
    return 0


def _cmd_enumerate(args) -> int:
    started = time.time()
    policy = _POLICIES[args.policy]
    if args.payoffs:
        table, _ = _load_table(args.payoffs)
        inputs = [args.payoffs]
    else:
        table = demand.normalized_table(args.x, args.y)
        inputs = []
    survivors = two_price.enumerate_mpe(table, args.beta, policy)
    print(f"{len(survivors)} surviving profile(s) "
          f"[{two_price.kernel_backend()} kernel]")
    for p in survivors[:args.limit]:
        print(f"  A: {p.named()['A']}  B: {p.named()['B']}")
    if len(survivors) > args.limit:
        print(f"  ... {len(survivors) - args.limit} more")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"count": len(survivors),
                       "profiles": [{"fa": list(p.fa), "fb": list(p.fb)}
                                    for p in survivors]}, fh)
        _write_manifest(args.out, "enumerate",
                        {"beta": args.beta, "policy": args.policy,
                         "x": args.x, "y": args.y, "payoffs": args.payoffs},
                        inputs, None, started)
    return 0


def _cmd_verify(args) -> int:
    started = time.time()
    table, _ = _load_table(args.payoffs)
    phi = multi_price.TransitionMatrix.load(args.phi)
    report = multi_price.verify_equilibrium(phi, table, args.beta)
    print(f"equilibrium: {'CONFIRMED' if report.confirmed else 'REJECTED'}")
    if not report.confirmed:
        for line in report.violated_constraints[:10]:
            print(f"  {line}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh)
        _write_manifest(args.out, "verify",
                        {"payoffs": args.payoffs, "phi": args.phi,
                         "beta": args.beta},
                        [args.payoffs, args.phi], None, started)
    return 0


def _cmd_spe(args) -> int:
    started = time.time()
    table, _ = _load_table(args.payoffs)
    result = spe.solve(table, args.beta, args.res, args.eps_cells,
                       args.max_iter)
    print(f"converged = {result.converged} after {result.iterations} "
          f"iteration(s); cell width {_fmt(result.cell)}")
    for s in range(4):
        n = int(result.masks[s].sum())
        print(f"  {two_price.ALGO_NAMES[s]}: {n} cells")
    result.save_json(args.out)
    _write_manifest(args.out, "spe",
                    {"payoffs": args.payoffs, "beta": args.beta,
                     "res": args.res, "eps_cells": args.eps_cells},
                    [args.payoffs], None, started)
    print(f"wrote {args.out}")
    if args.pgm_dir:
        os.makedirs(args.pgm_dir, exist_ok=True)
        for s in range(4):
            path = os.path.join(args.pgm_dir,
                                f"{two_price.ALGO_NAMES[s]}.pgm")
            result.save_pgm(s, path)
        print(f"wrote PGM rasters to {args.pgm_dir}")
    return 0


def _cmd_simulate(args) -> int:
    started = time.time()
    file_cfg = _read_kv(args.config) if args.config else {}

    def resolve(name, cast, default):
        flag = getattr(args, name if name != "lambda_" else "lambda_")
        if flag is not None:
            return cast(flag)
        key = name.rstrip("_")
        if key in file_cfg:
            return cast(file_cfg[key])
        if default is None:
            raise AlgopriceError(f"missing simulation parameter {key!r}")
        return cast(default)

    config = market_sim.SimConfig(
        lambda_=resolve("lambda_", float, None),
        mu=resolve("mu", float, None),
        r=resolve("r", float, None),
        dt=resolve("dt", float, 1e-3),
        horizon=resolve("horizon", float, None),
        seed=resolve("seed", int, 0),
    )
    with open(args.profile, encoding="utf-8") as fh:
        prof = json.load(fh)
    table = np.asarray(prof["payoffs"], dtype=float)
    kind = prof.get("kind", "markov")
    if kind == "markov":
        profile = two_price.MarkovProfile(tuple(prof["fa"]), tuple(prof["fb"]))
        result = market_sim.monte_carlo(
            profile, table, config, args.runs,
            first_adjuster=args.first_adjuster)
    elif kind == "transition":
        phi = multi_price.TransitionMatrix.from_json(prof)
        result = market_sim.monte_carlo(
            phi, table, config, args.runs,
            first_adjuster=args.first_adjuster,
            initial_pair=tuple(prof.get("initial_pair", (0, 0))))
    else:
        raise AlgopriceError(f"unknown profile kind {kind!r}")

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("run,u_hat,v_hat,customers_served,revisions\n")
        for i in range(result.n_runs):
            fh.write(f"{i},{_fmt(result.u_hat[i])},{_fmt(result.v_hat[i])},"
                     f"{result.customers[i]},{result.revisions[i]}\n")
    inputs = [args.profile] + ([args.config] if args.config else [])
    _write_manifest(args.out, "simulate",
                    {"runs": args.runs, "lambda": config.lambda_,
                     "mu": config.mu, "r": config.r, "dt": config.dt,
                     "horizon": config.horizon,
                     "first_adjuster": args.first_adjuster},
                    inputs, config.seed, started)
    s = result.summary()
    print(f"u = {_fmt(s['u_mean'])} +- {_fmt(s['u_ci95'])} (95% CI), "
          f"v = {_fmt(s['v_mean'])} +- {_fmt(s['v_ci95'])}")
    print(f"truncation bias <= {_fmt(s['truncation_bias'])}; "
          f"seed = {s['seed']}; wrote {args.out}")
    return 0


def _cmd_bound(args) -> int:
    value = market_sim.experimentation_bound(args.k, args.dt, args.r,
                                             args.lambda_, args.dpimax)
    print(f"experimentation payoff bound = {_fmt(value)}")
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="algoprice",
        description="equilibrium engine for duopoly pricing algorithms")
    parser.add_argument("--version", action="version",
                        version=f"algoprice {__version__} "
                                f"(schema v{SCHEMA_VERSION})")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads for array backends (0 = auto)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit discrete-choice demand to "
                                         "target competitive/monopoly prices")
    p.add_argument("--pc", type=float, required=True)
    p.add_argument("--pm", type=float, required=True)
    p.add_argument("--k", type=int, default=5, help="grid size for --out")
    p.add_argument("--out", help="write a model descriptor file")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("table", help="tabulate a profit model on its grid")
    p.add_argument("--model", required=True)
    p.add_argument("--out", help="write the table as JSON")
    p.set_defaults(func=_cmd_table)

    p = sub.add_parser("dynamics", help="run the coupled price iteration")
    p.add_argument("--sa", required=True, help="comma list of response indices")
    p.add_argument("--sb", required=True)
    p.add_argument("--start", required=True, help="initial pair i,j")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_dynamics)

    p = sub.add_parser("classify", help="equilibrium families at (x, y, beta)")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--policy", choices=sorted(_POLICIES), default="forbidden")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("scan", help="classification raster over (x, y)")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--xmax", type=float, default=3.0)
    p.add_argument("--ymax", type=float, default=3.0)
    p.add_argument("--res", type=int, default=400)
    p.add_argument("--policy", choices=sorted(_POLICIES), default="forbidden")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("enumerate", help="brute-force Markov profile search")
    p.add_argument("--x", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--payoffs", help="2x2 payoff table JSON instead of x/y")
    p.add_argument("--policy", choices=sorted(_POLICIES), default="forbidden")
    p.add_argument("--limit", type=int, default=8, help="profiles to print")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_enumerate)

    p = sub.add_parser("verify", help="verify transition tables as equilibrium")
    p.add_argument("--payoffs", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("spe", help="subgame-perfect payoff sets (two prices)")
    p.add_argument("--payoffs", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--res", type=int, default=200)
    p.add_argument("--eps-cells", type=float, default=1.0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--out", required=True)
    p.add_argument("--pgm-dir", help="also dump one PGM raster per state")
    p.set_defaults(func=_cmd_spe)

    p = sub.add_parser("simulate", help="Monte-Carlo market simulation")
    p.add_argument("--config", help="key-value file with market parameters")
    p.add_argument("--profile", required=True)
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--first-adjuster", type=int, choices=(0, 1), default=0)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bound", help="experimentation payoff bound")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, required=True)
    p.add_argument("--dpimax", type=float, required=True)
    p.set_defaults(func=_cmd_bound)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads > 0:
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return args.func(args)
    except (AlgopriceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
