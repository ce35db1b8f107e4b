"""Command-line entry point: ``tokenbalance <command> ...``.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .balancer import DiscreteProcess, WorstCaseSpec, run_continuous, worst_case_input
from .distributions import parse_distribution, sample_vector
from .evolset import AbsorptionParams, absorption_tail_bound, absorption_times, estimate_tstep_row
from .harness import (
    ConfigError,
    ExperimentConfig,
    default_threads,
    emit_csv,
    emit_json,
    preset,
    run_experiment,
    verify_bounds,
)
from .markov import as_markov_chain, lazy_cycle_chain, second_eigenvalue, tstep_column
from .topology import TopologyKind, TopologySpec, build_schedule, load_schedule, save_schedule

EXIT_VALIDATION = 2
EXIT_IO = 3


class _IOFailure(Exception):
    pass


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc}") from exc


def _load_schedule(path: str):
    _read_text(path)
    return load_schedule(path)


def _parse_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def cmd_schedule(args) -> None:
    spec = TopologySpec(TopologyKind(args.topology), args.n, r=args.r, d_exp=args.d, seed=args.seed)
    save_schedule(build_schedule(spec), args.out)


def _simulate_input(text: str, sched, seed: int) -> np.ndarray:
    kind, _, rest = text.partition(":")
    if kind == "dist":
        return sample_vector(parse_distribution(rest), sched.n, seed)
    if kind == "worstcase":
        if sched.topology is None:
            raise ValueError("worstcase input needs a schedule that records its topology")
        return worst_case_input(WorstCaseSpec(sched.topology, int(rest)))
    if kind == "file":
        vals = [v for v in _read_text(rest).replace(",", "\n").split()]
        return np.array([int(v) for v in vals], dtype=np.int64)
    raise ValueError(f"bad --input {text!r}; use dist:<spec>, worstcase:K or file:path")


def cmd_simulate(args) -> None:
    sched = _load_schedule(args.schedule)
    x0 = _simulate_input(args.input, sched, args.seed)
    if args.checkpoints:
        cps = sorted({int(t) for t in args.checkpoints.split(",")})
    else:
        cps = [0, args.rounds]
    if cps[0] < 0 or cps[-1] > args.rounds:
        raise ValueError("checkpoints must lie in [0, rounds]")
    rows = []
    if args.mode == "discrete":
        proc = DiscreteProcess(sched, x0[None, :], [args.seed])
        for t in cps:
            proc.advance_rounds(t - proc.rounds)
            x = proc.loads[0]
            rows.append((t, x.max() - x.min(), x.max(), x.min(), x.sum()))
    else:
        xi, done = x0.astype(float), 0
        for t in cps:
            xi = run_continuous(sched, xi, t - done)
            done = t
            rows.append((t, xi.max() - xi.min(), xi.max(), xi.min(), xi.sum()))
    lines = ["t,discrepancy,max,min,total"]
    lines += [",".join(str(v.item() if hasattr(v, "item") else v) for v in r) for r in rows]
    _write_out(args.out, "\n".join(lines) + "\n")


def _write_out(path: str, text: str) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc}") from exc


def cmd_markov(args) -> None:
    sched = _load_schedule(args.schedule)
    if args.action == "column":
        col = tstep_column(sched, args.u, args.t)
        text = "\n".join(repr(float(v)) for v in col) + "\n"
        if args.out:
            _write_out(args.out, text)
        else:
            sys.stdout.write(text)
    else:
        print(f"{second_eigenvalue(sched):.12g}")


def cmd_bounds(args) -> None:
    params = {}
    if args.params:
        for item in args.params.split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValueError(f"bad parameter {item!r}; expected key=value")
            params[key.strip()] = _parse_value(val.strip())
    print(json.dumps(bnd.evaluate(args.name, **params).to_dict()))


def _chain(text: str):
    kind, _, rest = text.partition(":")
    if kind == "lazy-cycle":
        return lazy_cycle_chain(int(rest))
    if kind == "from-schedule":
        return as_markov_chain(_load_schedule(rest))
    raise ValueError(f"bad --chain {text!r}; use lazy-cycle:n or from-schedule:path")


def cmd_evolset(args) -> None:
    chain = _chain(args.chain)
    est, se = estimate_tstep_row(chain, args.x, args.t, args.trials, args.seed)
    exact = None
    if chain.n <= 4096:
        row = np.zeros(chain.n)
        row[args.x] = 1.0
        for _ in range(args.t):
            row = chain.P.T @ row
        exact = row
    bound = None
    if chain.alpha > 0 and chain.beta > 0 and args.t >= 1:
        bound = bnd.markov_tstep_bound(chain.alpha, chain.beta, chain.pi_max, chain.pi_min, args.t)
    for y in range(chain.n):
        line = {"x": args.x, "y": y, "t": args.t, "estimate": float(est[y]), "se": float(se[y])}
        if exact is not None:
            line["exact"] = float(exact[y])
            line["within_3se"] = bool(abs(est[y] - exact[y]) <= 3 * se[y] + 1e-15)
            if bound is not None:
                line["markov_bound"] = bound
                line["bound_holds"] = bool(abs(exact[y] - chain.pi[y]) <= bound)
        print(json.dumps(line))
    tau, full = absorption_times(chain, args.x, args.trials, args.max_t, args.seed + 1)
    params = AbsorptionParams.from_chain(chain, args.x)
    freq = float(full.mean())
    summary = {
        "absorbed_fraction": float((tau >= 0).mean()),
        "full_fraction": freq,
        "full_se": math.sqrt(max(freq * (1 - freq), 1e-300) / args.trials),
        "pi_x": float(chain.pi[args.x]),
        "tail": [
            {"t": t, "empirical": float(((tau > t) | (tau < 0)).mean()),
             "bound": absorption_tail_bound(params, t)}
            for t in (10, 100, 1000, 10000) if t <= args.max_t
        ],
    }
    print(json.dumps(summary))


def cmd_experiment(args) -> None:
    if args.config:
        try:
            cfg = ExperimentConfig.from_dict(json.loads(_read_text(args.config)))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
    elif args.preset:
        cfg = preset(args.preset, args.scale)
    else:
        raise ConfigError("experiment needs --config or --preset")
    if args.seed is not None:
        cfg.base_seed = args.seed
    out = Path(args.out or os.environ.get("TOKENBALANCE_OUT_DIR", "results"))
    threads = args.threads if args.threads is not None else default_threads()
    table = run_experiment(cfg, threads=threads)
    try:
        emit_csv(table, out / "raw.csv")
        emit_json(table, out / "result.json")
        report = verify_bounds(table, cfg.bounds_overlay)
        (out / "bounds.json").write_text(json.dumps(report, indent=1))
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    for t, mean, std, lo, hi in table.summary_rows():
        print(f"t={t:>10d}  mean={mean:.6g}  std={std:.4g}  min={lo:.6g}  max={hi:.6g}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tokenbalance", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="build a matching schedule and write it as JSON")
    p.add_argument("--topology", required=True, choices=[k.value for k in TopologyKind])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--d", type=int, default=0, help="matchings per round (expander)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="run one balancing process")
    p.add_argument("--schedule", required=True)
    p.add_argument("--input", required=True, help="dist:<spec> | worstcase:K | file:vec.csv")
    p.add_argument("--rounds", type=int, required=True)
    p.add_argument("--mode", choices=["discrete", "continuous"], default="discrete")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoints", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("markov", help="round-matrix columns and second eigenvalue")
    p.add_argument("action", choices=["column", "lambda"])
    p.add_argument("--schedule", required=True)
    p.add_argument("--u", type=int, default=0)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_markov)

    p = sub.add_parser("bounds", help="evaluate a closed-form bound")
    p.add_argument("--name", required=True)
    p.add_argument("--params", default="")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("evolset", help="evolving-set estimates and bound checks")
    p.add_argument("--chain", required=True, help="from-schedule:file.json | lazy-cycle:n")
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--max-t", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evolset)

    p = sub.add_parser("experiment", help="run a repeated, checkpointed experiment")
    p.add_argument("--config")
    p.add_argument("--preset")
    p.add_argument("--scale", choices=["desk", "paper"], default="desk")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
