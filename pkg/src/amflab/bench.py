"""Monte Carlo estimators, brute-force oracles, experiment orchestration,
JSON configuration, and CSV output.

Determinism contract: every random draw comes from a stream keyed by
(master_seed, domain, point, trial), trial results are reduced in index
order, and CSV values are formatted with a fixed %.12e pattern, so a given
configuration produces byte-identical output regardless of thread count.
"""

from __future__ import annotations

import itertools
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    ConfigError,
    TooLargeError,
    UnknownExperimentError,
)
from .numerics import stream_rng
from .signals import (
    Channel,
    Constellation,
    ModulationBasis,
    Scenario,
    allone_pilot,
    build_channel,
    dbm_to_mw,
    make_basis,
    make_constellation,
    path_gain_variance,
    sample_symbols,
)
from .amf import instantaneous_scnr, range_profile
from .rmt import deterministic_avg_scnr, shift_leakage, solve_fixed_point
from .dpd import dpd_optimize, dpd_upper_bound
from .dpi import dpi_optimize

# Stream domains (first spawn-key entry after the master seed).
_DOM_CLUTTER = 1
_DOM_PAYLOAD = 2
_DOM_SCENARIO = 3

CSV_HEADER = "experiment,N,Q,basis,constellation,pilot_scheme,seed,metric,value,stderr"

ENUMERATION_LIMIT = 1_000_000


# ---------------------------------------------------------------------------
# Result rows and CSV
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    experiment: str
    n: int
    q: int
    basis: str
    constellation: str
    pilot_scheme: str
    seed: int
    metric: str
    value: float
    stderr: float = 0.0

    def to_csv(self) -> str:
        return (
            f"{self.experiment},{self.n},{self.q},{self.basis},{self.constellation},"
            f"{self.pilot_scheme},{self.seed},{self.metric},"
            f"{self.value:.12e},{self.stderr:.12e}"
        )


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int
    seed: int


def write_csv(rows: list[ResultRow], path: str) -> None:
    """Write rows atomically (temp file + rename), UTF-8, LF endings."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(row.to_csv() + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description (see README for the JSON schema)."""

    experiment: str
    n: int = 128
    noise_dbm: float = -90.0
    pilot_power_dbm: float = 20.0
    data_power_dbm: float = 30.0
    power_convention: str = "per_symbol"
    target_bin: int = 10
    target_distance_m: float = 50.0
    target_gain: complex | None = None
    clutter_bins: tuple[int, ...] = (12, 17, 23, 29)
    clutter_gains: tuple[complex, ...] | None = None
    clutter_distances: tuple[float, ...] | None = None
    clutter_distance_range: tuple[float, float] = (30.0, 40.0)
    shadow_sigma_db: float = 5.8
    basis_kind: str = "ofdm"
    basis_c1: float | None = None
    basis_c2: float | None = None
    constellation_kind: str = "psk"
    constellation_order: int = 4
    pilot_scheme: str = "allone"
    pilot_vector: tuple[complex, ...] | None = None
    trials: int = 1000
    master_seed: int = 1
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    redraw_clutter_per_trial: bool = False
    out: str | None = None


def _require_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _as_complex(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{where} must be a number or [re, im] pair")


def parse_config(doc: dict) -> ExperimentConfig:
    """Parse and validate a configuration document (fail-closed)."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be an object")
    _require_keys(
        doc,
        {
            "schema", "experiment", "scenario", "basis", "constellation", "pilot",
            "trials", "master_seed", "sweep", "out", "redraw_clutter_per_trial",
        },
        "configuration root",
    )
    if doc.get("schema") != _SCHEMA_VERSION:
        raise ConfigError(f"schema must be {_SCHEMA_VERSION}, got {doc.get('schema')!r}")
    if "experiment" not in doc:
        raise ConfigError("missing required key 'experiment'")
    experiment = str(doc["experiment"])
    if experiment not in EXPERIMENTS:
        raise UnknownExperimentError(
            f"unknown experiment {experiment!r}; see list-experiments"
        )
    kwargs: dict = {"experiment": experiment}

    scen = doc.get("scenario", {})
    _require_keys(
        scen,
        {
            "n", "noise_dbm", "pilot_power_dbm", "data_power_dbm",
            "power_convention", "target", "clutter",
        },
        "scenario",
    )
    for key in ("n",):
        if key in scen:
            kwargs["n"] = int(scen[key])
    for key in ("noise_dbm", "pilot_power_dbm", "data_power_dbm"):
        if key in scen:
            kwargs[key] = float(scen[key])
    if "power_convention" in scen:
        pc = scen["power_convention"]
        if pc not in ("per_symbol", "total"):
            raise ConfigError("power_convention must be 'per_symbol' or 'total'")
        kwargs["power_convention"] = pc
    target = scen.get("target", {})
    _require_keys(target, {"bin", "distance_m", "gain"}, "scenario.target")
    if "bin" in target:
        kwargs["target_bin"] = int(target["bin"])
    if "distance_m" in target:
        kwargs["target_distance_m"] = float(target["distance_m"])
    if "gain" in target:
        kwargs["target_gain"] = _as_complex(target["gain"], "scenario.target.gain")
    clutter = scen.get("clutter", {})
    _require_keys(
        clutter,
        {"bins", "gains", "distances", "distance_range", "shadow_sigma_db"},
        "scenario.clutter",
    )
    if "bins" in clutter:
        kwargs["clutter_bins"] = tuple(int(b) for b in clutter["bins"])
    if "gains" in clutter:
        kwargs["clutter_gains"] = tuple(
            _as_complex(g, "scenario.clutter.gains") for g in clutter["gains"]
        )
    if "distances" in clutter:
        kwargs["clutter_distances"] = tuple(float(d) for d in clutter["distances"])
    if "distance_range" in clutter:
        rng = clutter["distance_range"]
        if not (isinstance(rng, list) and len(rng) == 2):
            raise ConfigError("distance_range must be [lo, hi]")
        kwargs["clutter_distance_range"] = (float(rng[0]), float(rng[1]))
    if "shadow_sigma_db" in clutter:
        kwargs["shadow_sigma_db"] = float(clutter["shadow_sigma_db"])

    basis = doc.get("basis", {})
    _require_keys(basis, {"kind", "c1", "c2"}, "basis")
    if "kind" in basis:
        kwargs["basis_kind"] = str(basis["kind"])
    if "c1" in basis:
        kwargs["basis_c1"] = float(basis["c1"])
    if "c2" in basis:
        kwargs["basis_c2"] = float(basis["c2"])

    constellation = doc.get("constellation", {})
    _require_keys(constellation, {"kind", "order"}, "constellation")
    if "kind" in constellation:
        kwargs["constellation_kind"] = str(constellation["kind"])
    if "order" in constellation:
        kwargs["constellation_order"] = int(constellation["order"])

    pilot = doc.get("pilot", {})
    _require_keys(pilot, {"scheme", "vector"}, "pilot")
    if "scheme" in pilot:
        scheme = str(pilot["scheme"])
        if scheme not in ("allone", "dpd", "dpi", "custom"):
            raise ConfigError(f"unknown pilot scheme {scheme!r}")
        kwargs["pilot_scheme"] = scheme
    if "vector" in pilot:
        kwargs["pilot_vector"] = tuple(
            _as_complex(v, "pilot.vector") for v in pilot["vector"]
        )
    if kwargs.get("pilot_scheme") == "custom" and kwargs.get("pilot_vector") is None:
        raise ConfigError("custom pilot scheme requires pilot.vector")

    if "trials" in doc:
        kwargs["trials"] = int(doc["trials"])
        if kwargs["trials"] < 1:
            raise ConfigError("trials must be >= 1")
    if "master_seed" in doc:
        kwargs["master_seed"] = int(doc["master_seed"])
    sweep = doc.get("sweep", None)
    if sweep is not None:
        _require_keys(sweep, {"axis", "values"}, "sweep")
        axis = sweep.get("axis")
        if axis is not None and axis not in (
            "n", "clutter_count", "pilot_power_dbm", "constellation", "basis",
        ):
            raise ConfigError(f"unknown sweep axis {axis!r}")
        kwargs["sweep_axis"] = axis
        kwargs["sweep_values"] = tuple(sweep.get("values", ()))
    if "out" in doc and doc["out"] is not None:
        kwargs["out"] = str(doc["out"])
    if "redraw_clutter_per_trial" in doc:
        kwargs["redraw_clutter_per_trial"] = bool(doc["redraw_clutter_per_trial"])
    return ExperimentConfig(**kwargs)


def load_config(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)


def config_to_document(cfg: ExperimentConfig) -> dict:
    """Serialize a config back to its JSON document (round-trip identity)."""
    def c2l(z: complex):
        return [z.real, z.imag]

    doc: dict = {
        "schema": _SCHEMA_VERSION,
        "experiment": cfg.experiment,
        "scenario": {
            "n": cfg.n,
            "noise_dbm": cfg.noise_dbm,
            "pilot_power_dbm": cfg.pilot_power_dbm,
            "data_power_dbm": cfg.data_power_dbm,
            "power_convention": cfg.power_convention,
            "target": {"bin": cfg.target_bin, "distance_m": cfg.target_distance_m},
            "clutter": {
                "bins": list(cfg.clutter_bins),
                "distance_range": list(cfg.clutter_distance_range),
                "shadow_sigma_db": cfg.shadow_sigma_db,
            },
        },
        "basis": {"kind": cfg.basis_kind},
        "constellation": {"kind": cfg.constellation_kind, "order": cfg.constellation_order},
        "pilot": {"scheme": cfg.pilot_scheme},
        "trials": cfg.trials,
        "master_seed": cfg.master_seed,
        "redraw_clutter_per_trial": cfg.redraw_clutter_per_trial,
    }
    if cfg.target_gain is not None:
        doc["scenario"]["target"]["gain"] = c2l(cfg.target_gain)
    if cfg.clutter_gains is not None:
        doc["scenario"]["clutter"]["gains"] = [c2l(g) for g in cfg.clutter_gains]
    if cfg.clutter_distances is not None:
        doc["scenario"]["clutter"]["distances"] = list(cfg.clutter_distances)
    if cfg.basis_c1 is not None:
        doc["basis"]["c1"] = cfg.basis_c1
    if cfg.basis_c2 is not None:
        doc["basis"]["c2"] = cfg.basis_c2
    if cfg.pilot_vector is not None:
        doc["pilot"]["vector"] = [c2l(v) for v in cfg.pilot_vector]
    if cfg.sweep_axis is not None or cfg.sweep_values:
        doc["sweep"] = {"axis": cfg.sweep_axis, "values": list(cfg.sweep_values)}
    if cfg.out is not None:
        doc["out"] = cfg.out
    return doc


# ---------------------------------------------------------------------------
# Scenario realization
# ---------------------------------------------------------------------------

def _per_symbol_power(dbm: float, n: int, convention: str) -> float:
    mw = dbm_to_mw(dbm)
    return mw / n if convention == "total" else mw


def realize_scenario(
    cfg: ExperimentConfig,
    n: int | None = None,
    clutter_count: int | None = None,
    pilot_power_dbm: float | None = None,
    point: int = 0,
) -> Scenario:
    """Build the concrete scenario for one experiment point.

    Clutter gains are drawn once per (seed, point) unless given explicitly;
    delay bins are reduced mod N so sweeps over small N remain valid.
    """
    n = cfg.n if n is None else int(n)
    bins = list(cfg.clutter_bins)
    if clutter_count is not None:
        if clutter_count > len(bins):
            raise ConfigError(
                f"clutter_count {clutter_count} exceeds configured bins ({len(bins)})"
            )
        bins = bins[:clutter_count]
    bins = [b % n for b in bins]
    target_bin = cfg.target_bin % n
    if any(b == target_bin for b in bins):
        raise ConfigError("a clutter bin coincides with the target bin (mod N)")

    if cfg.clutter_gains is not None:
        if len(cfg.clutter_gains) < len(bins):
            raise ConfigError("fewer clutter gains than bins")
        gains = list(cfg.clutter_gains[: len(bins)])
    else:
        rng = stream_rng(cfg.master_seed, _DOM_CLUTTER, point)
        if cfg.clutter_distances is not None:
            if len(cfg.clutter_distances) < len(bins):
                raise ConfigError("fewer clutter distances than bins")
            distances = list(cfg.clutter_distances[: len(bins)])
        else:
            lo, hi = cfg.clutter_distance_range
            distances = [lo + (hi - lo) * rng.random() for _ in bins]
        gains = []
        for d in distances:
            shadow = rng.normal(0.0, cfg.shadow_sigma_db)
            var = path_gain_variance(d, shadow_db=shadow)
            z = rng.standard_normal() + 1j * rng.standard_normal()
            gains.append(np.sqrt(var / 2.0) * z)

    if cfg.target_gain is not None:
        beta0 = cfg.target_gain
    else:
        beta0 = complex(np.sqrt(path_gain_variance(cfg.target_distance_m)))

    p_dbm = cfg.pilot_power_dbm if pilot_power_dbm is None else pilot_power_dbm
    return Scenario(
        n=n,
        sigma_n2=dbm_to_mw(cfg.noise_dbm),
        beta0=beta0,
        target_bin=target_bin,
        clutter=tuple(zip(gains, bins)),
        pilot_power=_per_symbol_power(p_dbm, n, cfg.power_convention),
        data_power=_per_symbol_power(cfg.data_power_dbm, n, cfg.power_convention),
        slots=cfg.trials,
    )


def _make_basis(cfg: ExperimentConfig, n: int, spec: dict | None = None) -> ModulationBasis:
    if spec is None:
        return make_basis(cfg.basis_kind, n, cfg.basis_c1, cfg.basis_c2)
    _require_keys(spec, {"kind", "c1", "c2"}, "sweep basis value")
    return make_basis(str(spec["kind"]), n, spec.get("c1"), spec.get("c2"))


def _make_constellation(cfg: ExperimentConfig, spec: dict | None = None) -> Constellation:
    if spec is None:
        return make_constellation(cfg.constellation_kind, cfg.constellation_order)
    _require_keys(spec, {"kind", "order"}, "sweep constellation value")
    return make_constellation(str(spec["kind"]), int(spec.get("order", 0)))


def _pilot_for(cfg: ExperimentConfig, scenario: Scenario) -> np.ndarray:
    if cfg.pilot_scheme == "custom":
        vec = np.array(cfg.pilot_vector, dtype=complex)
        if vec.shape != (scenario.n,):
            raise ConfigError(
                f"custom pilot has length {vec.shape[0]}, scenario needs {scenario.n}"
            )
        return vec
    return allone_pilot(scenario.n, scenario.pilot_power)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def empirical_avg_scnr(
    scenario: Scenario,
    basis: ModulationBasis,
    constellation: Constellation,
    pilot: np.ndarray,
    trials: int,
    master_seed: int,
    point: int = 0,
    threads: int = 1,
    channel: Channel | None = None,
) -> McEstimate:
    """Mean instantaneous SCNR over i.i.d. payload draws.

    Trial i draws from stream (master_seed, payload domain, point, i) and
    the reduction runs in index order, so the estimate is bit-identical for
    any thread count.
    """
    if channel is None:
        channel = build_channel(scenario)
    scale = np.sqrt(scenario.data_power)
    u = basis.matrix

    def one(i: int) -> float:
        rng = stream_rng(master_seed, _DOM_PAYLOAD, point, i)
        s = sample_symbols(constellation, scenario.n, rng)
        x = pilot + scale * (u @ s)
        return instantaneous_scnr(scenario, x, channel).gamma

    values = np.empty(trials)
    if threads <= 1:
        for i in range(trials):
            values[i] = one(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, v in zip(range(trials), pool.map(one, range(trials), chunksize=64)):
                values[i] = v
    stderr = float(values.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return McEstimate(mean=float(values.mean()), stderr=stderr, trials=trials, seed=master_seed)


def exhaustive_avg_scnr(
    scenario: Scenario,
    basis: ModulationBasis,
    constellation: Constellation,
    pilot: np.ndarray,
    limit: int = ENUMERATION_LIMIT,
    channel: Channel | None = None,
) -> float:
    """Exact payload average of the instantaneous SCNR by full enumeration."""
    if constellation.points is None:
        raise TooLargeError("cannot enumerate a continuous constellation")
    order = constellation.points.size
    count = order**scenario.n
    if count > limit:
        raise TooLargeError(f"{order}^{scenario.n} = {count} payloads exceed limit {limit}")
    if channel is None:
        channel = build_channel(scenario)
    scale = np.sqrt(scenario.data_power)
    total = 0.0
    for combo in itertools.product(constellation.points, repeat=scenario.n):
        x = pilot + scale * (basis.matrix @ np.array(combo))
        total += instantaneous_scnr(scenario, x, channel).gamma
    return total / count


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def _row(cfg, scenario, basis_label, const_label, metric, value, stderr=0.0,
         n=None, q=None, pilot_scheme=None) -> ResultRow:
    return ResultRow(
        experiment=cfg.experiment,
        n=scenario.n if n is None else n,
        q=scenario.clutter_count if q is None else q,
        basis=basis_label,
        constellation=const_label,
        pilot_scheme=cfg.pilot_scheme if pilot_scheme is None else pilot_scheme,
        seed=cfg.master_seed,
        metric=metric,
        value=float(value),
        stderr=float(stderr),
    )


def _exp_range_profile(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    scenario = realize_scenario(cfg)
    basis = _make_basis(cfg, scenario.n)
    constellation = _make_constellation(cfg)
    pilot = _pilot_for(cfg, scenario)
    rng = stream_rng(cfg.master_seed, _DOM_PAYLOAD, 0, 0)
    s_d = sample_symbols(constellation, scenario.n, rng)
    x = pilot + np.sqrt(scenario.data_power) * (basis.matrix @ s_d)
    rows = []
    for kind in ("mf", "amf"):
        prof = range_profile(scenario, x, kind)
        for b, db in zip(prof.bins, prof.power_db):
            rows.append(
                _row(cfg, scenario, basis.label, constellation.label,
                     f"{kind}_db_bin{int(b)}", db)
            )
    return rows


def _sweep_points(cfg: ExperimentConfig, default_axis: str, default_values) -> list:
    if cfg.sweep_values:
        if cfg.sweep_axis != default_axis:
            raise ConfigError(
                f"experiment {cfg.experiment!r} sweeps over {default_axis!r}, "
                f"got axis {cfg.sweep_axis!r}"
            )
        return list(cfg.sweep_values)
    return list(default_values)


def _exp_validate_rmt(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    values = _sweep_points(cfg, "n", (12, 16, 32, 64, 128))
    constellation = _make_constellation(cfg)
    rows = []
    for idx, n in enumerate(values):
        scenario = realize_scenario(cfg, n=int(n), point=0)
        basis = _make_basis(cfg, scenario.n)
        pilot = _pilot_for(cfg, scenario)
        channel = build_channel(scenario)
        est = empirical_avg_scnr(
            scenario, basis, constellation, pilot, cfg.trials, cfg.master_seed,
            point=idx, threads=threads, channel=channel,
        )
        report = deterministic_avg_scnr(
            scenario, basis, constellation.kurtosis, pilot, channel=channel
        )
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "empirical_avg_scnr", est.mean, est.stderr))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "deterministic_avg_scnr", report.value))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "upper_bound", report.upper_bound))
    return rows


def _exp_compare_constellations(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    default = [{"kind": "psk", "order": 4}, {"kind": "qam", "order": 16},
               {"kind": "gaussian", "order": 0}]
    values = _sweep_points(cfg, "constellation", default)
    scenario = realize_scenario(cfg)
    basis = _make_basis(cfg, scenario.n)
    pilot = _pilot_for(cfg, scenario)
    channel = build_channel(scenario)
    rows = []
    for idx, spec in enumerate(values):
        constellation = _make_constellation(cfg, spec)
        report = deterministic_avg_scnr(
            scenario, basis, constellation.kurtosis, pilot, channel=channel
        )
        est = empirical_avg_scnr(
            scenario, basis, constellation, pilot, cfg.trials, cfg.master_seed,
            point=idx, threads=threads, channel=channel,
        )
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "deterministic_avg_scnr", report.value))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "empirical_avg_scnr", est.mean, est.stderr))
    return rows


def _exp_compare_bases(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    default = [{"kind": "ofdm"}, {"kind": "sc"}, {"kind": "afdm"}]
    values = _sweep_points(cfg, "basis", default)
    constellation = _make_constellation(cfg)
    scenario = realize_scenario(cfg)
    pilot = _pilot_for(cfg, scenario)
    channel = build_channel(scenario)
    rows = []
    for spec in values:
        basis = _make_basis(cfg, scenario.n, spec)
        report = deterministic_avg_scnr(
            scenario, basis, constellation.kurtosis, pilot, channel=channel
        )
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "deterministic_avg_scnr", report.value))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "shift_leakage_total", float(np.sum(report.shift_leakages))))
    return rows


def _dpd_point(cfg, scenario, basis, constellation, channel, point, threads):
    """DPD statistics over payload draws: returns metric -> (mean, stderr)."""
    scale = np.sqrt(scenario.data_power)

    def one(i: int):
        rng = stream_rng(cfg.master_seed, _DOM_PAYLOAD, point, i)
        s_d = sample_symbols(constellation, scenario.n, rng)
        state = dpd_optimize(scenario, s_d, basis, channel=channel)
        x_d = scale * (basis.matrix @ s_d)
        allone = instantaneous_scnr(
            scenario, allone_pilot(scenario.n, scenario.pilot_power) + x_d, channel
        ).gamma
        ub, _ = dpd_upper_bound(x_d, scenario.pilot_power, scenario.beta0, scenario.sigma_n2)
        return state.scnr, allone, ub, state.objective_trace

    results = [None] * cfg.trials
    if threads <= 1:
        for i in range(cfg.trials):
            results[i] = one(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for i, r in zip(range(cfg.trials), pool.map(one, range(cfg.trials))):
                results[i] = r
    dpd_vals = np.array([r[0] for r in results])
    allone_vals = np.array([r[1] for r in results])
    ub_vals = np.array([r[2] for r in results])
    traces = [r[3] for r in results]

    def ms(v):
        return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0

    return ms(dpd_vals), ms(allone_vals), ms(ub_vals), traces


def _exp_dpd_convergence(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    scenario = realize_scenario(cfg)
    basis = _make_basis(cfg, scenario.n)
    constellation = _make_constellation(cfg)
    channel = build_channel(scenario)
    (dpd_m, dpd_se), (al_m, al_se), (ub_m, ub_se), traces = _dpd_point(
        cfg, scenario, basis, constellation, channel, 0, threads
    )
    longest = max(len(t) for t in traces)
    padded = np.array([t + [t[-1]] * (longest - len(t)) for t in traces])
    rows = []
    for it in range(longest):
        col = padded[:, it]
        se = float(col.std(ddof=1) / np.sqrt(col.size)) if col.size > 1 else 0.0
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         f"objective_iter{it}", float(col.mean()), se,
                         pilot_scheme="dpd"))
    rows.append(_row(cfg, scenario, basis.label, constellation.label,
                     "dpd_scnr", dpd_m, dpd_se, pilot_scheme="dpd"))
    rows.append(_row(cfg, scenario, basis.label, constellation.label,
                     "allone_scnr", al_m, al_se, pilot_scheme="allone"))
    rows.append(_row(cfg, scenario, basis.label, constellation.label,
                     "dpd_upper_bound", ub_m, ub_se, pilot_scheme="dpd"))
    return rows


def _exp_dpd_vs_q(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    values = _sweep_points(cfg, "clutter_count", (1, 2, 3, 4))
    basis_cache: dict[int, ModulationBasis] = {}
    constellation = _make_constellation(cfg)
    rows = []
    for idx, q in enumerate(values):
        scenario = realize_scenario(cfg, clutter_count=int(q), point=idx)
        basis = basis_cache.setdefault(scenario.n, _make_basis(cfg, scenario.n))
        channel = build_channel(scenario)
        (dpd_m, dpd_se), (al_m, al_se), (ub_m, ub_se), _ = _dpd_point(
            cfg, scenario, basis, constellation, channel, idx, threads
        )
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "dpd_scnr", dpd_m, dpd_se, pilot_scheme="dpd"))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "allone_scnr", al_m, al_se, pilot_scheme="allone"))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "dpd_upper_bound", ub_m, ub_se, pilot_scheme="dpd"))
    return rows


def _exp_dpi_convergence(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    scenario = realize_scenario(cfg)
    basis = _make_basis(cfg, scenario.n)
    constellation = _make_constellation(cfg)
    channel = build_channel(scenario)
    state = dpi_optimize(scenario, basis, constellation.kurtosis, channel=channel)
    rows = []
    for it, val in enumerate(state.objective_trace):
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         f"objective_iter{it}", val, pilot_scheme="dpi"))
    rows.append(_row(cfg, scenario, basis.label, constellation.label,
                     "dpi_avg_scnr", state.objective_trace[-1], pilot_scheme="dpi"))
    return rows


def _exp_dpi_vs_power(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    values = _sweep_points(cfg, "pilot_power_dbm", (14.0, 17.0, 20.0, 23.0, 26.0))
    constellation = _make_constellation(cfg)
    rows = []
    for idx, p_dbm in enumerate(values):
        scenario = realize_scenario(cfg, pilot_power_dbm=float(p_dbm), point=0)
        basis = _make_basis(cfg, scenario.n)
        channel = build_channel(scenario)
        state = dpi_optimize(scenario, basis, constellation.kurtosis, channel=channel)
        pilot = allone_pilot(scenario.n, scenario.pilot_power)
        allone_report = deterministic_avg_scnr(
            scenario, basis, constellation.kurtosis, pilot, channel=channel
        )
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "dpi_avg_scnr", state.objective_trace[-1], pilot_scheme="dpi",
                         q=scenario.clutter_count))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "allone_avg_scnr", allone_report.value, pilot_scheme="allone"))
        rows.append(_row(cfg, scenario, basis.label, constellation.label,
                         "upper_bound", allone_report.upper_bound, pilot_scheme="dpi"))
        if cfg.trials > 1:
            est = empirical_avg_scnr(
                scenario, basis, constellation, state.pilot_factor, cfg.trials,
                cfg.master_seed, point=idx, threads=threads, channel=channel,
            )
            rows.append(_row(cfg, scenario, basis.label, constellation.label,
                             "dpi_empirical_avg_scnr", est.mean, est.stderr,
                             pilot_scheme="dpi"))
    return rows


def oracle_checks(master_seed: int = 1) -> list[tuple[str, float, float, bool]]:
    """Desk-scale cross-checks: (name, value, threshold, ok) per check.

    Each value is a relative deviation between one implementation path and
    an independent oracle for it (enumeration, a second formula, or a
    Monte Carlo confidence band).
    """
    checks: list[tuple[str, float, float, bool]] = []
    sigma = dbm_to_mw(-90.0)
    const = make_constellation("psk", 4)

    # Exhaustive enumeration vs Monte Carlo vs deterministic equivalent, N = 2.
    sc = Scenario(n=2, sigma_n2=sigma, beta0=1e-5, target_bin=0,
                  clutter=((3e-5 + 1e-5j, 1),), pilot_power=dbm_to_mw(20.0) / 2,
                  data_power=dbm_to_mw(30.0) / 2)
    basis = make_basis("ofdm", 2)
    pilot = allone_pilot(2, sc.pilot_power)
    exact = exhaustive_avg_scnr(sc, basis, const, pilot)
    est = empirical_avg_scnr(sc, basis, const, pilot, 40_000, master_seed)
    dev = abs(est.mean - exact) / (3.0 * est.stderr)
    checks.append(("enumeration_vs_monte_carlo_3sigma", dev, 1.0, dev <= 1.0))

    # Dual-path SCNR identity.
    worst = 0.0
    for i in range(100):
        rng = stream_rng(master_seed, 77, i)
        n = 16
        bins = rng.choice(np.arange(1, n), size=3, replace=False)
        clutter = tuple(
            (np.sqrt(path_gain_variance(30 + 10 * rng.random()) / 2)
             * (rng.standard_normal() + 1j * rng.standard_normal()), int(b))
            for b in bins
        )
        sc_i = Scenario(n=n, sigma_n2=sigma, beta0=1e-5, target_bin=0, clutter=clutter,
                        pilot_power=dbm_to_mw(20.0), data_power=dbm_to_mw(30.0))
        ch = build_channel(sc_i)
        s = sample_symbols(const, n, rng)
        x = allone_pilot(n, sc_i.pilot_power) + np.sqrt(sc_i.data_power) * (
            make_basis("ofdm", n).matrix @ s
        )
        fast = instantaneous_scnr(sc_i, x, ch).gamma
        direct = instantaneous_scnr(sc_i, x, ch, method="direct").gamma
        worst = max(worst, abs(fast - direct) / direct)
    checks.append(("scnr_dual_path_max_rel", worst, 1e-8, worst <= 1e-8))

    # Shift leakage endpoints.
    n = 8
    sc_leak = shift_leakage(make_basis("sc", n), 3)
    checks.append(("shift_leakage_sc_k3", sc_leak, 1e-20, sc_leak <= 1e-20))
    ofdm_leak = abs(shift_leakage(make_basis("ofdm", n), 3) - n) / n
    checks.append(("shift_leakage_ofdm_k3_rel", ofdm_leak, 1e-12, ofdm_leak <= 1e-12))

    # Fixed-point residual contract on a multi-path case.
    n = 16
    sc_fp = Scenario(n=n, sigma_n2=sigma, beta0=1e-5, target_bin=2,
                     clutter=((2e-5, 5), (1e-5j, 9)),
                     pilot_power=dbm_to_mw(20.0), data_power=dbm_to_mw(30.0))
    ch = build_channel(sc_fp)
    pilot_fp = allone_pilot(n, sc_fp.pilot_power)
    fp = solve_fixed_point(ch, np.outer(pilot_fp, pilot_fp.conj()),
                           sc_fp.sigma_n2, sc_fp.data_power)
    checks.append(("fixed_point_residual", fp.residual, 1e-10, fp.residual <= 1e-10))
    return checks


def _exp_oracle_suite(cfg: ExperimentConfig, threads: int) -> list[ResultRow]:
    rows = []
    const_label = f"{cfg.constellation_kind}{cfg.constellation_order}"
    for name, value, threshold, ok in oracle_checks(cfg.master_seed):
        for metric, val in ((name, value), (name + "_ok", 1.0 if ok else 0.0)):
            rows.append(ResultRow(
                experiment=cfg.experiment, n=cfg.n, q=len(cfg.clutter_bins),
                basis=cfg.basis_kind, constellation=const_label,
                pilot_scheme=cfg.pilot_scheme, seed=cfg.master_seed,
                metric=metric, value=val, stderr=0.0,
            ))
    return rows


EXPERIMENTS = {
    "range-profile": _exp_range_profile,
    "validate-rmt": _exp_validate_rmt,
    "compare-constellations": _exp_compare_constellations,
    "compare-bases": _exp_compare_bases,
    "dpd-convergence": _exp_dpd_convergence,
    "dpd-vs-Q": _exp_dpd_vs_q,
    "dpi-convergence": _exp_dpi_convergence,
    "dpi-vs-power": _exp_dpi_vs_power,
    "oracle-suite": _exp_oracle_suite,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> list[ResultRow]:
    """Run one registered experiment and return its result rows."""
    if cfg.experiment not in EXPERIMENTS:
        raise UnknownExperimentError(f"unknown experiment {cfg.experiment!r}")
    if cfg.sweep_axis is not None and not cfg.sweep_values:
        return []
    return EXPERIMENTS[cfg.experiment](cfg, threads)
