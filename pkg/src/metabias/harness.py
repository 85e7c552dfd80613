"""Config-driven runs: dataset analysis, calibration tables, scenario grids.

This is the orchestration layer behind the CLI.  Scenario cells are
independent and may be dispatched to a process pool; output rows are keyed
by cell order so results are byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .copas import copas_adjust
from .effects import (COHEN_D, EFFECT_KINDS, HEDGES_G, EffectEstimate,
                      StudySummary, cohens_d, hedges_g)
from .errors import ConfigError, MetabiasError, ParseError, TargetUnreachable
from .limitmeta import limit_meta
from .metrics import aggregate
from .petpeese import pet_peese
from .pooling import METHODS, dl_random_effects, fixed_effects
from .puniform import p_uniform
from .simulate import (STREAM_SIM, SimConfig, VARIANCE_SCENARIOS,
                       calibrate_pi_pub, generate_meta, published_count,
                       replicate_stream)
from .trimfill import trim_and_fill

__all__ = ["RunConfig", "load_run_config", "run_simulate", "run_calibrate",
           "analyze_dataset", "SIMULATE_HEADER", "CALIBRATE_HEADER",
           "ANALYZE_HEADER", "DEFAULT_METHODS"]

DEFAULT_METHODS = ("dl_random", "copas", "p_uniform", "pet_peese",
                   "trim_fill", "limit_meta")

SIMULATE_HEADER = ("m,n,tau2,variance_scenario,effect_kind,method,"
                   "amse,bias,coverage,power,mean_published,failures")
CALIBRATE_HEADER = ("m,n,tau2,variance_scenario,effect_kind,"
                    "pi_pub,mean_published,note")
ANALYZE_HEADER = "method,effect_kind,estimate,ci_low,ci_high,note"

RAW_COLUMNS = ("study_id", "n1", "mean1", "sd1", "n0", "mean0", "sd0")
PRECOMPUTED_COLUMNS = ("study_id", "effect", "variance", "n1", "n0", "kind")

_STREAM_CELL = 2


def _fmt(x: float) -> str:
    """Stable 6-significant-digit formatting ('.' decimal, no locale)."""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return format(x, ".6g")


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    grid_m: tuple[int, ...]
    grid_delta: tuple[float, ...]
    grid_tau2: tuple[float, ...]
    grid_variance: tuple[str, ...]
    grid_kind: tuple[str, ...]
    eta: float
    alpha: float
    replicates: int
    seed: int
    methods: tuple[str, ...]
    selection_policy: str  # calibrated | fixed | none
    target_rate: float
    calib_reps: int
    pi_pub: float
    threads: int
    out: str | None


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")


def _as_list(obj, path: str) -> list:
    _require(isinstance(obj, list) and len(obj) > 0, path,
             "expected a non-empty list")
    return obj


def load_run_config(data: dict, mode: str) -> RunConfig:
    """Validate a JSON config dict; unknown keys are rejected fail-fast."""
    _require(isinstance(data, dict), "$", "config must be a JSON object")
    allowed = {"grid", "eta", "alpha", "replicates", "seed", "selection",
               "threads", "out"}
    if mode == "simulate":
        allowed.add("methods")
    _reject_unknown(data, allowed, "$")

    grid = data.get("grid")
    _require(isinstance(grid, dict), "$.grid", "expected an object")
    _reject_unknown(grid, {"m", "delta", "tau2", "variance_scenario",
                           "effect_kind"}, "$.grid")
    grid_m = tuple(int(v) for v in _as_list(grid.get("m"), "$.grid.m"))
    grid_delta = tuple(float(v) for v in
                       _as_list(grid.get("delta"), "$.grid.delta"))
    grid_tau2 = tuple(float(v) for v in
                      _as_list(grid.get("tau2"), "$.grid.tau2"))
    grid_var = tuple(_as_list(grid.get("variance_scenario"),
                              "$.grid.variance_scenario"))
    for v in grid_var:
        _require(v in VARIANCE_SCENARIOS, "$.grid.variance_scenario",
                 f"unknown scenario {v!r}")
    grid_kind = tuple(_as_list(grid.get("effect_kind"), "$.grid.effect_kind"))
    for v in grid_kind:
        _require(v in EFFECT_KINDS, "$.grid.effect_kind",
                 f"unknown effect kind {v!r}")

    eta = float(data.get("eta", 5.0))
    alpha = float(data.get("alpha", 0.05))
    _require(0.0 < alpha < 1.0, "$.alpha", "must lie in (0, 1)")
    replicates = int(data.get("replicates", 1000))
    _require(replicates >= 1, "$.replicates", "must be >= 1")
    seed = int(data.get("seed", 0))
    _require(0 <= seed < 2 ** 64, "$.seed", "must be a u64")

    methods = tuple(data.get("methods", list(DEFAULT_METHODS)))
    for m in methods:
        _require(m in METHODS, "$.methods", f"unknown method {m!r}")
    _require(len(methods) > 0, "$.methods", "must not be empty")

    sel = data.get("selection", {})
    _require(isinstance(sel, dict), "$.selection", "expected an object")
    _reject_unknown(sel, {"policy", "target_rate", "calib_reps", "pi_pub"},
                    "$.selection")
    policy = sel.get("policy", "calibrated")
    _require(policy in ("calibrated", "fixed", "none"), "$.selection.policy",
             f"unknown policy {policy!r}")
    target_rate = float(sel.get("target_rate", 0.8))
    _require(0.0 < target_rate <= 1.0, "$.selection.target_rate",
             "must lie in (0, 1]")
    calib_reps = int(sel.get("calib_reps", 2000))
    _require(calib_reps >= 1, "$.selection.calib_reps", "must be >= 1")
    pi_pub = float(sel.get("pi_pub", 0.0))
    _require(0.0 <= pi_pub <= 1.0, "$.selection.pi_pub", "must lie in [0, 1]")
    if policy == "fixed":
        _require("pi_pub" in sel, "$.selection.pi_pub",
                 "required when policy is 'fixed'")

    threads = int(data.get("threads", 0))
    _require(threads >= 0, "$.threads", "must be >= 0")
    out = data.get("out")
    if out is not None:
        _require(isinstance(out, str), "$.out", "expected a string path")

    return RunConfig(grid_m=grid_m, grid_delta=grid_delta,
                     grid_tau2=grid_tau2, grid_variance=grid_var,
                     grid_kind=grid_kind, eta=eta, alpha=alpha,
                     replicates=replicates, seed=seed, methods=methods,
                     selection_policy=policy, target_rate=target_rate,
                     calib_reps=calib_reps, pi_pub=pi_pub, threads=threads,
                     out=out)


def load_run_config_file(path: str, mode: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"$: cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"$: invalid JSON in {path!r}: {exc}") from exc
    return load_run_config(data, mode)


# ---------------------------------------------------------------------------
# scenario cells
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellSpec:
    index: int
    m: int
    delta: float
    tau2: float
    variance_scenario: str
    effect_kind: str
    eta: float
    alpha: float
    replicates: int
    seed: int  # cell-level seed derived from the master seed
    methods: tuple[str, ...]
    selection_policy: str
    target_rate: float
    calib_reps: int
    pi_pub: float


def _cells(cfg: RunConfig) -> list[CellSpec]:
    cells = []
    index = 0
    for m in cfg.grid_m:
        for delta in cfg.grid_delta:
            for tau2 in cfg.grid_tau2:
                for scen in cfg.grid_variance:
                    for kind in cfg.grid_kind:
                        cell_seed = int(np.random.SeedSequence(
                            entropy=cfg.seed,
                            spawn_key=(_STREAM_CELL, index),
                        ).generate_state(1, np.uint64)[0])
                        cells.append(CellSpec(
                            index=index, m=m, delta=delta, tau2=tau2,
                            variance_scenario=scen, effect_kind=kind,
                            eta=cfg.eta, alpha=cfg.alpha,
                            replicates=cfg.replicates, seed=cell_seed,
                            methods=cfg.methods,
                            selection_policy=cfg.selection_policy,
                            target_rate=cfg.target_rate,
                            calib_reps=cfg.calib_reps, pi_pub=cfg.pi_pub))
                        index += 1
    return cells


def _cell_sim_config(cell: CellSpec, pi_pub: float) -> SimConfig:
    return SimConfig(m=cell.m, delta=cell.delta, eta=cell.eta,
                     tau2=cell.tau2,
                     variance_scenario=cell.variance_scenario,
                     effect_kind=cell.effect_kind, alpha=cell.alpha,
                     pi_pub=pi_pub, replicates=cell.replicates,
                     seed=cell.seed)


def _resolve_pi(cell: CellSpec) -> float:
    if cell.selection_policy == "none":
        return 0.0
    if cell.selection_policy == "fixed":
        return cell.pi_pub
    probe = _cell_sim_config(cell, 0.0)
    return calibrate_pi_pub(probe, target_rate=cell.target_rate,
                            calib_reps=cell.calib_reps)


def run_method(method: str, effects: list[EffectEstimate], alpha: float):
    """Run one estimator; returns a result object exposing estimate/ci."""
    if method == "fixed":
        return fixed_effects(effects)
    if method == "dl_random":
        return dl_random_effects(effects)
    if method == "copas":
        return copas_adjust(effects)
    if method == "p_uniform":
        return p_uniform(effects, alpha)
    if method == "pet_peese":
        return pet_peese(effects)
    if method == "trim_fill":
        return trim_and_fill(effects).pooled
    if method == "limit_meta":
        return limit_meta(effects).pooled
    raise ConfigError(f"$.methods: unknown method {method!r}")


def _simulate_cell(cell: CellSpec) -> list[str]:
    pi_pub = _resolve_pi(cell)
    cfg = _cell_sim_config(cell, pi_pub)
    per_method: dict[str, list] = {meth: [] for meth in cell.methods}
    counts = []
    truth = 0.0
    for rep in range(cell.replicates):
        rng = replicate_stream(cfg.seed, STREAM_SIM, rep)
        sample = generate_meta(cfg, rng)
        truth = sample.truth
        counts.append(len(sample.published))
        for meth in cell.methods:
            try:
                per_method[meth].append(
                    run_method(meth, sample.published, cfg.alpha))
            except MetabiasError as exc:
                per_method[meth].append(exc)
    rows = []
    for meth in cell.methods:
        sm = aggregate(per_method[meth], truth, method=meth,
                       published_counts=counts)
        rows.append(",".join([
            str(cell.m), _fmt(cell.delta), _fmt(cell.tau2),
            cell.variance_scenario, cell.effect_kind, meth,
            _fmt(sm.amse), _fmt(sm.bias), _fmt(sm.coverage), _fmt(sm.power),
            _fmt(sm.mean_published), str(sm.n_failures)]))
    return rows


def _calibrate_cell(cell: CellSpec) -> list[str]:
    probe = _cell_sim_config(cell, 0.0)
    note = ""
    try:
        pi_pub = calibrate_pi_pub(probe, target_rate=cell.target_rate,
                                  calib_reps=cell.calib_reps)
    except TargetUnreachable:
        pi_pub = float("nan")
        note = "target-unreachable"
    if note:
        mean_pub = float("nan")
    else:
        cfg = _cell_sim_config(cell, pi_pub)
        total = 0
        for rep in range(cell.replicates):
            rng = replicate_stream(cfg.seed, STREAM_SIM, rep)
            total += published_count(cfg, rng)
        mean_pub = total / cell.replicates
    row = ",".join([
        str(cell.m), _fmt(cell.delta), _fmt(cell.tau2),
        cell.variance_scenario, cell.effect_kind,
        _fmt(pi_pub), _fmt(mean_pub), note])
    return [row]


def _resolve_threads(threads: int, n_cells: int) -> int:
    if threads == 0:
        env = os.environ.get("METABIAS_THREADS")
        if env is not None and env.isdigit() and int(env) > 0:
            threads = int(env)
        else:
            threads = min(os.cpu_count() or 1, n_cells)
    return max(1, min(threads, n_cells))


def _run_cells(cells: list[CellSpec], worker, threads: int) -> list[str]:
    n = _resolve_threads(threads, len(cells))
    if n == 1 or len(cells) == 1:
        chunks = [worker(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            chunks = list(pool.map(worker, cells))
    rows: list[str] = []
    for chunk in chunks:  # pool.map preserves cell order
        rows.extend(chunk)
    return rows


def run_simulate(cfg: RunConfig, threads: int | None = None) -> list[str]:
    """Metric rows (CSV lines, header first) for the full scenario grid."""
    cells = _cells(cfg)
    rows = _run_cells(cells, _simulate_cell,
                      cfg.threads if threads is None else threads)
    return [SIMULATE_HEADER, *rows]


def run_calibrate(cfg: RunConfig, threads: int | None = None) -> list[str]:
    """Calibration rows (CSV lines, header first) for the scenario grid."""
    cells = _cells(cfg)
    rows = _run_cells(cells, _calibrate_cell,
                      cfg.threads if threads is None else threads)
    return [CALIBRATE_HEADER, *rows]


# ---------------------------------------------------------------------------
# dataset analysis
# ---------------------------------------------------------------------------

def _parse_float(text: str, line_no: int, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"line {line_no}: column {column!r} is not a number: {text!r}"
        ) from None


def _parse_int(text: str, line_no: int, column: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(
            f"line {line_no}: column {column!r} is not an integer: {text!r}"
        ) from None


def load_dataset(path: str) -> dict[str, list[EffectEstimate]]:
    """Read a study CSV; returns effect lists keyed by effect kind.

    Two schemas are accepted: raw per-arm summaries (both d and g are
    computed) and precomputed effects (one kind per file).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read dataset {path!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("line 1: empty file") from None
        header = [h.strip() for h in header]
        if header == list(RAW_COLUMNS):
            raw = True
        elif header == list(PRECOMPUTED_COLUMNS):
            raw = False
        else:
            raise ParseError(
                f"line 1: header must be {','.join(RAW_COLUMNS)} or "
                f"{','.join(PRECOMPUTED_COLUMNS)}")
        d_effects: list[EffectEstimate] = []
        g_effects: list[EffectEstimate] = []
        kinds_seen: set[str] = set()
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(
                    f"line {line_no}: expected {len(header)} fields, "
                    f"got {len(rec)}")
            if raw:
                summary = StudySummary(
                    n1=_parse_int(rec[1], line_no, "n1"),
                    mean1=_parse_float(rec[2], line_no, "mean1"),
                    sd1=_parse_float(rec[3], line_no, "sd1"),
                    n0=_parse_int(rec[4], line_no, "n0"),
                    mean0=_parse_float(rec[5], line_no, "mean0"),
                    sd0=_parse_float(rec[6], line_no, "sd0"))
                d_effects.append(cohens_d(summary))
                g_effects.append(hedges_g(summary))
            else:
                kind = rec[5].strip()
                if kind not in EFFECT_KINDS:
                    raise ParseError(
                        f"line {line_no}: unknown effect kind {kind!r}")
                kinds_seen.add(kind)
                if len(kinds_seen) > 1:
                    raise ParseError(
                        f"line {line_no}: mixed effect kinds in one file")
                n1 = _parse_int(rec[3], line_no, "n1")
                n0 = _parse_int(rec[4], line_no, "n0")
                eff = EffectEstimate(
                    value=_parse_float(rec[1], line_no, "effect"),
                    variance=_parse_float(rec[2], line_no, "variance"),
                    kind=kind, df=n1 + n0 - 2, n1=n1, n0=n0)
                (d_effects if kind == COHEN_D else g_effects).append(eff)
    out = {}
    if d_effects:
        out[COHEN_D] = d_effects
    if g_effects:
        out[HEDGES_G] = g_effects
    if not out:
        raise ParseError("line 2: no study rows found")
    return out


def analyze_dataset(path: str,
                    methods: tuple[str, ...] = ("fixed", "dl_random",
                                                "copas", "p_uniform",
                                                "pet_peese", "trim_fill",
                                                "limit_meta"),
                    alpha: float = 0.05) -> list[str]:
    """Per-method estimate rows (CSV lines, header first) for a dataset.

    Soft per-method failures (too few studies, no significant study, ...)
    become a note on the row instead of aborting the run.
    """
    datasets = load_dataset(path)
    rows = [ANALYZE_HEADER]
    for kind in (COHEN_D, HEDGES_G):
        effects = datasets.get(kind)
        if effects is None:
            continue
        for meth in methods:
            try:
                r = run_method(meth, effects, alpha)
                rows.append(",".join([
                    meth, kind, _fmt(r.estimate), _fmt(r.ci_low),
                    _fmt(r.ci_high), ""]))
            except MetabiasError as exc:
                rows.append(",".join([
                    meth, kind, "", "", "", type(exc).__name__]))
    return rows
