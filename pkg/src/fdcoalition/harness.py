"""Seeded Monte-Carlo sweeps over schemes and parameter grids.

A config document is flat ``key = value`` text (``#`` starts a comment).
Physical quantities use the customary units of the field: dBm, MHz,
Mbit/s, GHz and degrees; everything is converted to SI on load.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from .baselines import (SchemeId, SearchTooLarge, exhaustive_optimal,
                        hd_coalition_formation, random_allocation)
from .game import (FD, GameConfig, audit_partition, is_nash_stable,
                   partition_rates, run_coalition_formation)
from .metrics import TrialResult, aggregate, jain_fairness, system_throughput
from .scenario import RadioParams, Scenario, dbm_to_watts, generate_scenario

log = logging.getLogger(__name__)

SWEEP_VARIABLES = ("n_d2d", "n_access", "num_channels", "si_magnitude", "r_min")
# sweeps that leave the deployment untouched reuse one scenario per trial index
PAIRED_SWEEPS = ("si_magnitude", "r_min")

CSV_COLUMNS = ["scheme", "sweep_variable", "sweep_value", "trial", "seed",
               "throughput_bps", "jain_fairness", "switch_count", "stable", "runtime_s"]


class ConfigError(ValueError):
    pass


def _pos_int(v: int) -> bool:
    return v >= 1


def _nonneg_int(v: int) -> bool:
    return v >= 0


# key -> (parser, validity check, description of the valid range)
_INT, _FLOAT, _BOOL, _STR = int, float, "bool", str
_KEYS: dict[str, tuple[Any, Optional[Callable[[Any], bool]], str]] = {
    "tx_power_dbm": (_FLOAT, None, "any"),
    "eta": (_FLOAT, lambda v: 0 < v < 1, "(0, 1)"),
    "path_loss_exp": (_FLOAT, lambda v: v > 0, "> 0"),
    "bandwidth_mhz": (_FLOAT, lambda v: v > 0, "> 0"),
    "noise_dbm_per_mhz": (_FLOAT, None, "any"),
    "mui_factor": (_FLOAT, lambda v: v >= 0, ">= 0"),
    "carrier_freq_ghz": (_FLOAT, lambda v: v > 0, "> 0"),
    "beamwidth_deg": (_FLOAT, lambda v: 0 < v < 180, "(0, 180)"),
    "r_min_mbps": (_FLOAT, lambda v: v >= 0, ">= 0"),
    "si_low": (_FLOAT, lambda v: v >= 0, ">= 0"),
    "si_high": (_FLOAT, lambda v: v >= 0, ">= 0"),
    "si_magnitude": (_FLOAT, None, "any"),
    "area_side": (_FLOAT, lambda v: v > 0, "> 0"),
    "d2d_max_dist": (_FLOAT, lambda v: v > 0, "> 0"),
    "alpha": (_FLOAT, lambda v: v > 0, "> 0"),
    "d2d_reuse": (_FLOAT, lambda v: 0 <= v <= 1, "[0, 1]"),
    "k0": (_STR, None, "positive number or 'friis'"),
    "max_iterations": (_INT, _pos_int, ">= 1"),
    "stability_scan_interval": (_INT, _pos_int, ">= 1"),
    "schemes": (_STR, None, "comma list"),
    "trials": (_INT, _pos_int, ">= 1"),
    "seed": (_INT, None, "any"),
    "sweep": (_STR, None, "var=v1,v2,..."),
    "n_bs": (_INT, _nonneg_int, ">= 0"),
    "n_access": (_INT, _nonneg_int, ">= 0"),
    "n_d2d": (_INT, _nonneg_int, ">= 0"),
    "num_channels": (_INT, _pos_int, ">= 1"),
    "output": (_STR, None, "path"),
    "format": (_STR, lambda v: v in ("csv", "json"), "csv or json"),
    "workers": (_INT, _pos_int, ">= 1"),
    "verify_stability": (_BOOL, None, "true/false"),
    "record_runtime": (_BOOL, None, "true/false"),
    "optimal_enforce_rmin": (_BOOL, None, "true/false"),
    "optimal_work_bound": (_FLOAT, lambda v: v > 0, "> 0"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    params: RadioParams = field(default_factory=RadioParams)
    game: GameConfig = field(default_factory=GameConfig)
    schemes: tuple[str, ...] = tuple(s.value for s in SchemeId if s != SchemeId.OPTIMAL)
    trials: int = 200
    seed: int = 0
    sweep_variable: Optional[str] = None
    sweep_values: tuple = ()
    n_bs: int = 3
    n_access: int = 5
    n_d2d: int = 30
    num_channels: int = 5
    output: Optional[str] = None
    format: str = "csv"
    workers: int = 1
    verify_stability: bool = False
    record_runtime: bool = False
    optimal_enforce_rmin: bool = True
    optimal_work_bound: float = 1e8

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        for name in self.schemes:
            if name not in {s.value for s in SchemeId}:
                raise ConfigError(f"schemes: unknown scheme {name!r}")
        if not self.schemes:
            raise ConfigError("schemes: at least one scheme required")
        if self.sweep_variable is not None:
            if self.sweep_variable not in SWEEP_VARIABLES:
                raise ConfigError(f"sweep: unknown variable {self.sweep_variable!r}")
            if not self.sweep_values:
                raise ConfigError("sweep: value list is empty")
            for v in self.sweep_values:
                _check_sweep_value(self.sweep_variable, v)
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: must be csv or json, got {self.format!r}")

    def points(self) -> list:
        return list(self.sweep_values) if self.sweep_variable else [None]

    def resolved(self) -> dict:
        d = asdict(self)
        d["params"]["si_range"] = list(self.params.si_range)
        d["sweep_values"] = list(self.sweep_values)
        d["schemes"] = list(self.schemes)
        return d


def _check_sweep_value(var: str, v) -> None:
    ok = {
        "n_d2d": lambda x: isinstance(x, int) and x >= 0,
        "n_access": lambda x: isinstance(x, int) and x >= 0,
        "num_channels": lambda x: isinstance(x, int) and x >= 1,
        "si_magnitude": lambda x: math.isfinite(x),
        "r_min": lambda x: x >= 0,
    }[var](v)
    if not ok:
        raise ConfigError(f"sweep: invalid value {v!r} for {var}")


def parse_sweep(text: str) -> tuple[str, tuple]:
    var, sep, values = text.partition("=")
    var = var.strip()
    if not sep or not values.strip():
        raise ConfigError(f"sweep: expected var=v1,v2,... got {text!r}")
    if var not in SWEEP_VARIABLES:
        raise ConfigError(f"sweep: unknown variable {var!r}; choose from {', '.join(SWEEP_VARIABLES)}")
    cast = int if var in ("n_d2d", "n_access", "num_channels") else float
    try:
        vals = tuple(cast(v.strip()) for v in values.split(","))
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from None
    for v in vals:
        _check_sweep_value(var, v)
    return var, vals


def _parse_value(key: str, raw: str, lineno: int):
    kind, check, desc = _KEYS[key]
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
        raw = raw[1:-1]
    try:
        if kind == _BOOL:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(f"not a boolean: {raw!r}")
            value = low in ("true", "1", "yes")
        else:
            value = kind(raw)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    if check is not None and not check(value):
        raise ConfigError(f"line {lineno}: {key}: {value!r} out of range, expected {desc}")
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Build an ExperimentConfig; absent keys keep the reference defaults."""
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: syntax error, expected 'key = value'")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = (_parse_value(key, raw, lineno), lineno)
    return config_from_values({k: v for k, (v, _) in values.items()},
                              {k: n for k, (_, n) in values.items()})


def config_from_values(v: dict[str, Any], lines: Optional[dict[str, int]] = None) -> ExperimentConfig:
    lines = lines or {}

    def where(*keys) -> str:
        found = [f"line {lines[k]}: {k}" for k in keys if k in lines]
        return found[0] if found else "/".join(keys)

    kw: dict[str, Any] = {}
    conv = {
        "tx_power_dbm": ("tx_power", dbm_to_watts),
        "eta": ("eta", float),
        "path_loss_exp": ("path_loss_exp", float),
        "bandwidth_mhz": ("bandwidth", lambda x: x * 1e6),
        "noise_dbm_per_mhz": ("noise_psd", lambda x: dbm_to_watts(x) / 1e6),
        "mui_factor": ("mui_factor", float),
        "carrier_freq_ghz": ("carrier_freq", lambda x: x * 1e9),
        "beamwidth_deg": ("beamwidth", float),
        "r_min_mbps": ("r_min", lambda x: x * 1e6),
        "si_magnitude": ("si_magnitude", float),
        "area_side": ("area_side", float),
        "d2d_max_dist": ("d2d_max_dist", float),
        "alpha": ("alpha", float),
        "d2d_reuse": ("d2d_reuse", float),
    }
    for key, (name, f) in conv.items():
        if key in v:
            kw[name] = f(v[key])
    defaults = RadioParams()
    lo = v.get("si_low", defaults.si_range[0])
    hi = v.get("si_high", defaults.si_range[1])
    if lo > hi:
        raise ConfigError(f"{where('si_low', 'si_high')}: si_low must not exceed si_high")
    kw["si_range"] = (float(lo), float(hi))
    if "k0" in v:
        raw = v["k0"].strip().lower()
        if raw == "friis":
            kw["k0"] = None
        else:
            try:
                kw["k0"] = float(raw)
            except ValueError:
                raise ConfigError(f"{where('k0')}: expected a number or 'friis'") from None
            if not kw["k0"] > 0:
                raise ConfigError(f"{where('k0')}: must be > 0")
    try:
        params = RadioParams(**kw)
    except ValueError as exc:
        raise ConfigError(f"radio parameters: {exc}") from None

    game_kw: dict[str, Any] = {"r_min": params.r_min}
    for key in ("max_iterations", "stability_scan_interval"):
        if key in v:
            game_kw[key] = v[key]
    game = GameConfig(**game_kw)

    exp: dict[str, Any] = {"params": params, "game": game}
    for key in ("trials", "seed", "n_bs", "n_access", "n_d2d", "num_channels", "output",
                "format", "workers", "verify_stability", "record_runtime",
                "optimal_enforce_rmin", "optimal_work_bound"):
        if key in v:
            exp[key] = v[key]
    if "schemes" in v:
        exp["schemes"] = _parse_schemes(v["schemes"], where("schemes"))
    if "sweep" in v:
        try:
            exp["sweep_variable"], exp["sweep_values"] = parse_sweep(v["sweep"])
        except ConfigError as exc:
            raise ConfigError(f"{where('sweep')}: {exc}") from None
    try:
        return ExperimentConfig(**exp)
    except ConfigError as exc:
        raise ConfigError(f"{where(str(exc).split(':')[0])}: {exc}") from None


def _parse_schemes(text: str, where: str = "schemes") -> tuple[str, ...]:
    out = tuple(x.strip() for x in text.split(",") if x.strip())
    valid = {s.value for s in SchemeId}
    for name in out:
        if name not in valid:
            raise ConfigError(f"{where}: unknown scheme {name!r}; choose from {', '.join(sorted(valid))}")
    if not out:
        raise ConfigError(f"{where}: empty scheme list")
    return out


def child_seed(master: int, sweep_variable: Optional[str], sweep_value, trial: int, *salt) -> int:
    """Stable 63-bit seed from the master seed and a trial's coordinates."""
    key = json.dumps([master, sweep_variable, sweep_value, trial, *salt])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class TrialFailure:
    scheme: str
    sweep_value: Any
    trial: int
    seed: int
    status: str  # "failed" or "skipped"
    error: str


@dataclass
class ResultSet:
    config: ExperimentConfig
    results: list[TrialResult]
    failures: list[TrialFailure]

    def aggregates(self) -> list[tuple[Any, str, Any]]:
        """(sweep value, scheme, AggregateStats) in sweep then scheme order."""
        out = []
        for value in self.config.points():
            rows = [r for r in self.results if r.sweep_value == _label(value)]
            if not rows:
                continue
            stats = aggregate(rows)
            for scheme in self.config.schemes:
                if scheme in stats:
                    out.append((_label(value), scheme, stats[scheme]))
        return out

    def select(self, scheme: str, sweep_value=None) -> list[TrialResult]:
        return [r for r in self.results if r.scheme == scheme
                and (sweep_value is None or r.sweep_value == _label(sweep_value))]


def _label(value):
    return "" if value is None else value


def _point_setup(cfg: ExperimentConfig, value):
    counts = {"n_bs": cfg.n_bs, "n_access": cfg.n_access, "n_d2d": cfg.n_d2d,
              "num_channels": cfg.num_channels}
    params, game = cfg.params, cfg.game
    var = cfg.sweep_variable
    if var in counts:
        counts[var] = int(value)
    elif var == "si_magnitude":
        params = replace(params, si_magnitude=float(value))
    elif var == "r_min":
        params = replace(params, r_min=float(value) * 1e6)
        game = replace(game, r_min=float(value) * 1e6)
    return counts, params, game


def _scheme_partition(scheme: str, s: Scenario, cfg: ExperimentConfig, game: GameConfig, seed: int):
    """(partition, switch count, stable flag, duplex used for auditing)."""
    if scheme == SchemeId.FD_COALITION:
        res = run_coalition_formation(s, replace(game, duplex=FD, seed=seed))
        return res.partition, len(res.switches), res.stable, FD
    if scheme == SchemeId.HD_COALITION:
        res = hd_coalition_formation(s, replace(game, seed=seed))
        return res.partition, len(res.switches), res.stable, "hd"
    fd_game = replace(game, duplex=FD)
    if scheme == SchemeId.RANDOM:
        p = random_allocation(s, seed)
    else:
        p = exhaustive_optimal(s, fd_game, cfg.optimal_enforce_rmin, cfg.optimal_work_bound)
    return p, 0, is_nash_stable(p, s, fd_game), FD


def run_trial(cfg: ExperimentConfig, value, trial: int) -> tuple[list[TrialResult], list[TrialFailure]]:
    """All schemes of one (sweep value, trial) cell on a single shared scenario."""
    var = cfg.sweep_variable
    seed_value = None if var in PAIRED_SWEEPS else value
    seed = child_seed(cfg.seed, var if seed_value is not None else None, seed_value, trial)
    counts, params, game = _point_setup(cfg, value)
    results: list[TrialResult] = []
    failures: list[TrialFailure] = []
    try:
        s = generate_scenario(params, counts["n_bs"], counts["n_access"], counts["n_d2d"],
                              counts["num_channels"], seed)
    except Exception as exc:  # noqa: BLE001 - recorded, the sweep goes on
        return [], [TrialFailure(name, _label(value), trial, seed, "failed", f"scenario: {exc}")
                    for name in cfg.schemes]
    digest = s.digest()
    for name in cfg.schemes:
        scheme_seed = child_seed(seed, None, None, trial, name)
        t0 = time.perf_counter()
        try:
            p, switches, stable, duplex = _scheme_partition(name, s, cfg, game, scheme_seed)
            if cfg.verify_stability and name in (SchemeId.FD_COALITION, SchemeId.HD_COALITION):
                audited = is_nash_stable(p, s, replace(game, duplex=duplex))
                if stable and not audited:
                    raise RuntimeError("reported stable but the stability audit found a move")
                stable = audited
            bad = audit_partition(p, s, duplex)
            if bad:
                raise RuntimeError(f"infeasible partition: {bad[0]}")
            rates = partition_rates(p, s)
            runtime = time.perf_counter() - t0
            results.append(TrialResult(
                scheme=name, seed=seed, throughput=system_throughput(rates),
                fairness=jain_fairness(rates), switch_count=switches, stable=bool(stable),
                per_link_rates=rates, runtime=runtime, sweep_variable=var or "",
                sweep_value=_label(value), trial=trial, scenario_hash=digest))
        except SearchTooLarge as exc:
            failures.append(TrialFailure(name, _label(value), trial, seed, "skipped", str(exc)))
        except Exception as exc:  # noqa: BLE001
            failures.append(TrialFailure(name, _label(value), trial, seed, "failed",
                                         f"{type(exc).__name__}: {exc}"))
    return results, failures


def _run_cell(args):
    return run_trial(*args)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ResultSet:
    cells = [(cfg, value, t) for value in cfg.points() for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outcomes = list(pool.map(_run_cell, cells, chunksize=4))
    else:
        outcomes = [_run_cell(c) for c in cells]
    results = [r for res, _ in outcomes for r in res]
    failures = [f for _, fail in outcomes for f in fail]
    for f in failures:
        log.warning("%s trial %s (sweep %r) %s: %s", f.scheme, f.trial, f.sweep_value,
                    f.status, f.error)
    rs = ResultSet(cfg, results, failures)
    if write and cfg.output:
        write_results(rs, cfg.format, cfg.output)
    return rs


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _record(r: TrialResult, record_runtime: bool) -> dict:
    return {
        "scheme": r.scheme, "sweep_variable": r.sweep_variable, "sweep_value": r.sweep_value,
        "trial": r.trial, "seed": r.seed, "throughput_bps": r.throughput,
        "jain_fairness": r.fairness, "switch_count": r.switch_count, "stable": r.stable,
        "runtime_s": r.runtime if record_runtime else "",
    }


def records(rs: ResultSet) -> list[dict]:
    """Trial rows followed by mean/sd rows per (sweep value, scheme)."""
    timing = rs.config.record_runtime
    out = [_record(r, timing) for r in rs.results]
    var = rs.config.sweep_variable or ""
    for value, scheme, st in rs.aggregates():
        runtimes = [r.runtime for r in rs.select(scheme) if r.sweep_value == value]
        mean_rt = math.fsum(runtimes) / len(runtimes) if timing and runtimes else ""
        base = {"scheme": scheme, "sweep_variable": var, "sweep_value": value, "seed": ""}
        out.append({**base, "trial": "mean", "throughput_bps": st.throughput.mean,
                    "jain_fairness": st.fairness.mean, "switch_count": st.switch_count.mean,
                    "stable": st.stable_fraction, "runtime_s": mean_rt})
        out.append({**base, "trial": "sd", "throughput_bps": st.throughput.sd,
                    "jain_fairness": st.fairness.sd, "switch_count": st.switch_count.sd,
                    "stable": "", "runtime_s": ""})
    return out


def to_csv(rs: ResultSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records(rs):
        w.writerow([_fmt(rec[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def to_json(rs: ResultSet) -> str:
    doc = {
        "config": rs.config.resolved(),
        "records": records(rs),
        "failures": [asdict(f) for f in rs.failures],
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def write_results(rs: ResultSet, format: str, path) -> Path:
    path = Path(path)
    text = to_csv(rs) if format == "csv" else to_json(rs)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def read_json_records(path) -> list[dict]:
    return json.loads(Path(path).read_text())["records"]


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Copy of ``cfg`` with CLI-style overrides applied."""
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})


def schemes_arg(text: str) -> Sequence[str]:
    return _parse_schemes(text, "--schemes")
