"""Seeded, repeatable balancing experiments.

Repetition ``r`` uses ``seed_r = derive_seed(base_seed, r)``.  Its initial
load is drawn with ``derive_seed(seed_r, 0)`` and its rounding coins are keyed
by ``derive_seed(seed_r, 1)``, so a repetition's rows depend only on its own
seed.  Repetitions may be spread over threads; the output is identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import bounds as bnd
from .balancer import DiscreteProcess, WorstCaseSpec, worst_case_input
from .distributions import DistributionSpec, parse_distribution, sample_vector
from .markov import _average_pairs, step_columns
from .seeding import derive_seed
from .topology import MatchingSchedule, TopologyKind, TopologySpec, build_schedule

__all__ = [
    "ConstantInput",
    "ExperimentConfig",
    "ResultTable",
    "ConfigError",
    "run_experiment",
    "fit_decay_exponent",
    "emit_csv",
    "emit_json",
    "load_json",
    "verify_bounds",
    "exact_deviation_table",
    "PRESETS",
    "preset",
]


class ConfigError(ValueError):
    """An experiment configuration is malformed."""


@dataclass(frozen=True)
class ConstantInput:
    value: int


InputSpec = DistributionSpec | WorstCaseSpec | ConstantInput


def _input_to_dict(inp: InputSpec) -> dict:
    if isinstance(inp, DistributionSpec):
        return {"kind": "distribution", "spec": str(inp)}
    if isinstance(inp, WorstCaseSpec):
        return {"kind": "worstcase", "K": inp.K}
    return {"kind": "constant", "value": inp.value}


def _input_from_dict(data: dict, topology: TopologySpec) -> InputSpec:
    kind = data.get("kind")
    if kind == "distribution":
        return parse_distribution(data["spec"])
    if kind == "worstcase":
        return WorstCaseSpec(topology, int(data["K"]))
    if kind == "constant":
        return ConstantInput(int(data["value"]))
    raise ConfigError(f"unknown input kind {kind!r}")


@dataclass
class ExperimentConfig:
    topology: TopologySpec
    input: InputSpec
    checkpoints: list[int]
    repetitions: int = 10
    base_seed: int = 0
    mode: str = "discrete"
    step_unit: str = "rounds"
    bounds_overlay: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.checkpoints = [int(t) for t in self.checkpoints]
        if any(t < 0 for t in self.checkpoints):
            raise ConfigError("checkpoints must be non-negative")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigError("checkpoints must be strictly increasing")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.mode not in ("discrete", "continuous"):
            raise ConfigError(f"mode must be 'discrete' or 'continuous', got {self.mode!r}")
        if self.step_unit not in ("rounds", "matchings"):
            raise ConfigError(f"step_unit must be 'rounds' or 'matchings', got {self.step_unit!r}")
        if isinstance(self.input, WorstCaseSpec) and self.input.topology != self.topology:
            raise ConfigError("worst-case input topology differs from experiment topology")

    def to_dict(self) -> dict:
        return {
            "topology": self.topology.to_dict(),
            "input": _input_to_dict(self.input),
            "checkpoints": list(self.checkpoints),
            "repetitions": self.repetitions,
            "base_seed": self.base_seed,
            "mode": self.mode,
            "step_unit": self.step_unit,
            "bounds_overlay": self.bounds_overlay,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            topo = TopologySpec.from_dict(data["topology"])
            return cls(
                topology=topo,
                input=_input_from_dict(data["input"], topo),
                checkpoints=data["checkpoints"],
                repetitions=int(data.get("repetitions", 10)),
                base_seed=int(data.get("base_seed", 0)),
                mode=data.get("mode", "discrete"),
                step_unit=data.get("step_unit", "rounds"),
                bounds_overlay=list(data.get("bounds_overlay", [])),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from None


@dataclass
class ResultTable:
    """Per-checkpoint, per-repetition measurements.

    ``disc``, ``max``, ``min`` and ``total`` have shape
    ``(len(checkpoints), repetitions)``.
    """

    checkpoints: list[int]
    disc: np.ndarray
    max: np.ndarray
    min: np.ndarray
    total: np.ndarray
    seeds: list[int] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @classmethod
    def from_discrepancies(cls, checkpoints, disc) -> "ResultTable":
        disc = np.asarray(disc, dtype=float).reshape(len(checkpoints), -1)
        zeros = np.zeros_like(disc)
        return cls(list(checkpoints), disc, disc.copy(), zeros, zeros.copy())

    @property
    def repetitions(self) -> int:
        return self.disc.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.disc.mean(axis=1)

    @property
    def std(self) -> np.ndarray:
        if self.repetitions < 2:
            return np.zeros(len(self.checkpoints))
        return self.disc.std(axis=1, ddof=1)

    def summary_rows(self) -> list[tuple]:
        return [
            (t, m, s, lo, hi)
            for t, m, s, lo, hi in zip(
                self.checkpoints, self.mean, self.std,
                self.disc.min(axis=1) if self.checkpoints else [],
                self.disc.max(axis=1) if self.checkpoints else [],
            )
        ]

    def mean_at(self, t: int) -> float:
        return float(self.mean[self.checkpoints.index(t)])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultTable):
            return NotImplemented
        return (
            self.checkpoints == other.checkpoints
            and self.seeds == other.seeds
            and self.config == other.config
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("disc", "max", "min", "total"))
        )


def _initial_load(cfg: ExperimentConfig, seed: int) -> np.ndarray:
    n = cfg.topology.n
    if isinstance(cfg.input, DistributionSpec):
        return sample_vector(cfg.input, n, derive_seed(seed, 0))
    if isinstance(cfg.input, WorstCaseSpec):
        return worst_case_input(cfg.input)
    return np.full(n, cfg.input.value, dtype=np.int64)


def _run_block(cfg: ExperimentConfig, sched: MatchingSchedule, seeds: list[int]) -> np.ndarray:
    """Measurements for a block of repetitions: shape (4, checkpoints, len(seeds))."""
    loads = np.stack([_initial_load(cfg, s) for s in seeds])
    per_unit = 1 if cfg.step_unit == "matchings" else sched.d
    out = np.zeros((4, len(cfg.checkpoints), len(seeds)))
    if cfg.mode == "discrete":
        proc = DiscreteProcess(sched, loads, [derive_seed(s, 1) for s in seeds])
        x = proc.loads

        def advance(steps: int) -> None:
            proc.advance_matchings(steps)
    else:
        x = loads.astype(float)
        state = {"step": 0}

        def advance(steps: int) -> None:
            for k in range(state["step"], state["step"] + steps):
                a, b = sched.edge_arrays[k % sched.d]
                _average_pairs(x, a, b, x)
            state["step"] += steps

    done = 0
    for i, t in enumerate(cfg.checkpoints):
        advance((t - done) * per_unit)
        done = t
        hi, lo = x.max(axis=1), x.min(axis=1)
        out[:, i, :] = hi - lo, hi, lo, x.sum(axis=1)
    return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Run every repetition of ``cfg`` and collect measurements at each checkpoint.

    Each repetition is one continuous run visiting the checkpoints in order.
    ``threads`` spreads repetitions over a thread pool without changing the result.
    """
    start = time.perf_counter()
    sched = build_schedule(cfg.topology)
    seeds = [derive_seed(cfg.base_seed, r) for r in range(cfg.repetitions)]
    threads = max(1, min(int(threads), cfg.repetitions))
    blocks = [list(range(r, cfg.repetitions, threads)) for r in range(threads)]
    results = np.zeros((4, len(cfg.checkpoints), cfg.repetitions))

    def work(block: list[int]) -> None:
        results[:, :, block] = _run_block(cfg, sched, [seeds[r] for r in block])

    if threads == 1:
        work(blocks[0])
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, blocks))
    disc, hi, lo, total = results
    return ResultTable(
        checkpoints=list(cfg.checkpoints), disc=disc, max=hi, min=lo, total=total,
        seeds=seeds, config=cfg.to_dict(), wall_time=time.perf_counter() - start,
    )


def fit_decay_exponent(table: ResultTable, t_range: tuple[float, float]) -> tuple[float, float]:
    """Least-squares slope of ``log(mean disc)`` against ``log t``, with its standard error."""
    lo, hi = t_range
    pts = [(t, m) for t, m in zip(table.checkpoints, table.mean) if lo <= t <= hi and t > 0]
    if len(pts) < 4:
        raise ValueError(f"need at least 4 checkpoints in {t_range}, got {len(pts)}")
    if any(m <= 0 for _, m in pts):
        raise ValueError("mean discrepancy must be positive over the fit range")
    x = np.log([t for t, _ in pts])
    y = np.log([m for _, m in pts])
    fit = stats.linregress(x, y)
    return float(fit.slope), float(fit.stderr)


def _fmt(v) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() and abs(f) < 2**63 else repr(f)


def _meta_lines(table: ResultTable) -> list[str]:
    return [
        "# config: " + json.dumps(table.config, sort_keys=True),
        "# seeds: " + ",".join(str(s) for s in table.seeds),
    ]


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def summary_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_summary" + (path.suffix or ".csv"))


def emit_csv(table: ResultTable, path: str | Path) -> tuple[Path, Path]:
    """Write raw rows to ``path`` and per-checkpoint aggregates beside it.

    Both files start with ``#`` comment lines carrying the config and seeds,
    followed by a header and data rows.  Returns the two paths written.
    """
    path = Path(path)
    raw = io.StringIO()
    raw.write("\n".join(_meta_lines(table)) + "\n")
    w = csv.writer(raw, lineterminator="\n")
    w.writerow(["t", "rep", "discrepancy", "max", "min", "total"])
    for i, t in enumerate(table.checkpoints):
        for r in range(table.repetitions):
            w.writerow([t, r] + [_fmt(a[i, r]) for a in (table.disc, table.max, table.min, table.total)])
    summ = io.StringIO()
    summ.write("\n".join(_meta_lines(table)) + "\n")
    w = csv.writer(summ, lineterminator="\n")
    w.writerow(["t", "mean", "std", "min", "max"])
    for row in table.summary_rows():
        w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
    spath = summary_path(path)
    _write(path, raw.getvalue())
    _write(spath, summ.getvalue())
    return path, spath


def emit_json(table: ResultTable, path: str | Path) -> Path:
    path = Path(path)
    doc = {
        "config": table.config,
        "seeds": [str(s) for s in table.seeds],
        "checkpoints": table.checkpoints,
        "disc": table.disc.tolist(),
        "max": table.max.tolist(),
        "min": table.min.tolist(),
        "total": table.total.tolist(),
        "summary": [dict(zip(("t", "mean", "std", "min", "max"), r)) for r in table.summary_rows()],
        "wall_time": table.wall_time,
    }
    _write(path, json.dumps(doc, default=float))
    return path


def load_json(path: str | Path) -> ResultTable:
    doc = json.loads(Path(path).read_text())
    shape = (len(doc["checkpoints"]), len(doc["seeds"]))

    def arr(key: str) -> np.ndarray:
        return np.asarray(doc[key], dtype=float).reshape(shape)

    return ResultTable(
        checkpoints=list(doc["checkpoints"]), disc=arr("disc"), max=arr("max"),
        min=arr("min"), total=arr("total"), seeds=[int(s) for s in doc["seeds"]],
        config=doc["config"], wall_time=doc.get("wall_time", 0.0),
    )


def exact_deviation_table(s: MatchingSchedule, checkpoints) -> ResultTable:
    """Table whose value at ``t`` is ``max_{u,v} |M^t[u, v] - 1/n|`` (exact columns)."""
    cols = np.eye(s.n)
    done, vals = 0, []
    for t in checkpoints:
        step_columns(s, cols, t - done)
        done = t
        vals.append(float(np.max(np.abs(cols - 1.0 / s.n))))
    return ResultTable.from_discrepancies(list(checkpoints), vals)


def verify_bounds(table: ResultTable, overlays: list[dict]) -> list[dict]:
    """Compare bound overlays against the table's mean at each checkpoint.

    Each overlay is ``{"name": ..., "params": {...}}``; the checkpoint is passed
    as ``t`` when the bound takes one.  Upper bounds must be >= the empirical
    mean and lower bounds <= it.  For asymptotic bounds the report instead
    carries ``c_fit``, the smallest constant making the bound dominate.
    """
    report = []
    for ov in overlays:
        name = ov["name"]
        if name not in bnd.REGISTRY:
            raise KeyError(f"unknown bound {name!r}")
        entry = bnd.REGISTRY[name]
        params = dict(ov.get("params", {}))
        rows, c_needed = [], []
        for t, emp in zip(table.checkpoints, table.mean):
            p = dict(params)
            if "t" in entry.params:
                if t < 1:
                    continue
                p["t"] = t
            value = bnd.evaluate(name, **p).value
            row = {"t": t, "bound": value, "empirical": float(emp)}
            if entry.caveat == bnd.ASYMPTOTIC:
                floor = math.sqrt(math.log(p["n"]))
                scale = bnd.evaluate(name, **{**p, "c": 1.0}).value - floor
                c_needed.append((emp - floor) / scale if scale > 0 else math.inf)
                row["holds"] = None
            elif entry.side == "upper":
                row["holds"] = bool(value >= emp)
            else:
                row["holds"] = bool(value <= emp)
            rows.append(row)
        item = {"name": name, "side": entry.side, "params": params, "rows": rows}
        if entry.caveat == bnd.ASYMPTOTIC:
            item["c_fit"] = max([0.0] + c_needed)
        else:
            item["all_hold"] = all(r["holds"] for r in rows)
        report.append(item)
    return report


def _pow2_grid(hi_exp: int, step: int = 2) -> list[int]:
    return [0] + [2**e for e in range(0, hi_exp + 1, step)]


def _cycle_light(scale: str) -> ExperimentConfig:
    return ExperimentConfig(TopologySpec(TopologyKind.CYCLE, 2**12), DistributionSpec.uniform(64),
                            _pow2_grid(24 if scale == "paper" else 16))


def _cycle_worst(scale: str) -> ExperimentConfig:
    topo = TopologySpec(TopologyKind.CYCLE, 2**12)
    return ExperimentConfig(
        topo, WorstCaseSpec(topo, 64), _pow2_grid(24 if scale == "paper" else 14),
        bounds_overlay=[{"name": "worstcase_disc_lower", "params": {"kind": "cycle", "K": 64, "n": 2**12}}],
    )


def _cycle_heavy(scale: str) -> ExperimentConfig:
    return ExperimentConfig(TopologySpec(TopologyKind.CYCLE, 2**12), DistributionSpec.uniform(2**24),
                            _pow2_grid(24 if scale == "paper" else 14))


def _cycle_heavy_worst(scale: str) -> ExperimentConfig:
    topo = TopologySpec(TopologyKind.CYCLE, 2**12)
    return ExperimentConfig(topo, WorstCaseSpec(topo, 2**24), _pow2_grid(24 if scale == "paper" else 14))


def _torus_light(scale: str) -> ExperimentConfig:
    return ExperimentConfig(TopologySpec(TopologyKind.TORUS, 2**16, r=2), DistributionSpec.uniform(256),
                            _pow2_grid(16 if scale == "paper" else 8))


def _torus_heavy(scale: str) -> ExperimentConfig:
    return ExperimentConfig(TopologySpec(TopologyKind.TORUS, 2**16, r=2), DistributionSpec.uniform(2**32),
                            _pow2_grid(16 if scale == "paper" else 8))


def _hypercube_light(scale: str) -> ExperimentConfig:
    dim = 28 if scale == "paper" else 16
    K = 128 if scale == "paper" else 16
    return ExperimentConfig(TopologySpec(TopologyKind.HYPERCUBE, 2**dim), DistributionSpec.uniform(K),
                            list(range(dim + 1)), step_unit="matchings")


def _hypercube_worst(scale: str) -> ExperimentConfig:
    dim = 28 if scale == "paper" else 16
    topo = TopologySpec(TopologyKind.HYPERCUBE, 2**dim)
    K = 128 if scale == "paper" else 16
    return ExperimentConfig(topo, WorstCaseSpec(topo, K), list(range(dim + 1)), step_unit="matchings")


PRESETS = {
    "cycle-light": _cycle_light,
    "cycle-worst": _cycle_worst,
    "cycle-heavy": _cycle_heavy,
    "cycle-heavy-worst": _cycle_heavy_worst,
    "torus-light": _torus_light,
    "torus-heavy": _torus_heavy,
    "hypercube-light": _hypercube_light,
    "hypercube-worst": _hypercube_worst,
}


def preset(name: str, scale: str = "desk") -> ExperimentConfig:
    """Named experiment; ``scale="paper"`` uses the full published sizes."""
    if scale not in ("desk", "paper"):
        raise ConfigError(f"scale must be 'desk' or 'paper', got {scale!r}")
    try:
        return PRESETS[name](scale)
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None


def default_threads() -> int:
    return int(os.environ.get("TOKENBALANCE_THREADS", "1"))
