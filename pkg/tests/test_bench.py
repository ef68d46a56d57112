import numpy as np
import pytest

from amflab.bench import (
    CSV_HEADER,
    EXPERIMENTS,
    ExperimentConfig,
    config_to_document,
    empirical_avg_scnr,
    exhaustive_avg_scnr,
    oracle_checks,
    parse_config,
    realize_scenario,
    run_experiment,
    write_csv,
)
from amflab.exceptions import ConfigError, TooLargeError, UnknownExperimentError
from amflab.signals import (
    Scenario,
    allone_pilot,
    build_channel,
    dbm_to_mw,
    make_basis,
    make_constellation,
)


def _doc(**overrides):
    doc = {
        "schema": 1,
        "experiment": "validate-rmt",
        "scenario": {"n": 16, "target": {"bin": 10}, "clutter": {"bins": [12]}},
        "trials": 100,
        "master_seed": 7,
        "sweep": {"axis": "n", "values": [12, 16]},
    }
    doc.update(overrides)
    return doc


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def test_config_roundtrip_identity():
    cfg = parse_config(_doc())
    assert parse_config(config_to_document(cfg)) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        parse_config(_doc(bogus=1))
    doc = _doc()
    doc["scenario"]["mystery"] = 2
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_config_rejects_bad_schema():
    with pytest.raises(ConfigError):
        parse_config(_doc(schema=2))


def test_config_rejects_unknown_experiment():
    with pytest.raises(UnknownExperimentError):
        parse_config(_doc(experiment="nope"))


def test_config_requires_custom_vector():
    doc = _doc()
    doc["pilot"] = {"scheme": "custom"}
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_config_dbm_conversion():
    cfg = parse_config(_doc())
    sc = realize_scenario(cfg)
    assert sc.sigma_n2 == pytest.approx(dbm_to_mw(-90.0))
    assert sc.pilot_power == pytest.approx(dbm_to_mw(20.0))
    assert sc.data_power == pytest.approx(dbm_to_mw(30.0))


def test_config_total_power_convention():
    doc = _doc()
    doc["scenario"]["power_convention"] = "total"
    cfg = parse_config(doc)
    sc = realize_scenario(cfg)
    assert sc.pilot_power == pytest.approx(dbm_to_mw(20.0) / 16.0)


def test_realize_scenario_reduces_bins_mod_n():
    cfg = parse_config(_doc())
    sc = realize_scenario(cfg, n=12)
    assert sc.target_bin == 10
    assert sc.clutter[0][1] == 0  # bin 12 mod 12


def test_realize_scenario_deterministic_gains():
    cfg = parse_config(_doc())
    a = realize_scenario(cfg, point=0)
    b = realize_scenario(cfg, point=0)
    c = realize_scenario(cfg, point=1)
    assert a.clutter == b.clutter
    assert a.clutter != c.clutter


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def _tiny_scenario(n=2, clutter=((0.3 + 0.1j, 1),)):
    return Scenario(
        n=n, sigma_n2=0.5, beta0=1.0, target_bin=0, clutter=clutter,
        pilot_power=1.0, data_power=2.0,
    )


def test_empirical_matches_closed_form_without_clutter():
    sc = Scenario(n=8, sigma_n2=0.5, beta0=1.0, target_bin=0, clutter=(),
                  pilot_power=1.0, data_power=2.0)
    basis = make_basis("ofdm", 8)
    const = make_constellation("psk", 4)
    pilot = allone_pilot(8, sc.pilot_power)
    est = empirical_avg_scnr(sc, basis, const, pilot, 4000, master_seed=1)
    expected = (sc.n * sc.data_power + sc.pilot_budget) / sc.sigma_n2
    assert abs(est.mean - expected) <= max(3 * est.stderr, 1e-9)


def test_empirical_thread_count_invariance():
    sc = _tiny_scenario(n=4, clutter=((0.3, 1), (0.2j, 2)))
    basis = make_basis("ofdm", 4)
    const = make_constellation("qam", 16)
    pilot = allone_pilot(4, sc.pilot_power)
    ests = [
        empirical_avg_scnr(sc, basis, const, pilot, 500, master_seed=3, threads=k)
        for k in (1, 4, 8)
    ]
    assert ests[0] == ests[1] == ests[2]


def test_exhaustive_closed_form_n1():
    sc = Scenario(n=1, sigma_n2=0.5, beta0=1.0, target_bin=0, clutter=(),
                  pilot_power=1.0, data_power=2.0)
    basis = make_basis("sc", 1)
    const = make_constellation("psk", 4)
    pilot = np.array([1.0 + 0.0j])
    val = exhaustive_avg_scnr(sc, basis, const, pilot)
    # |x|^2 / s2 with |x|^2 = |pilot + sqrt(2) s|^2 averaged over 4 phases
    pts = const.points
    expected = np.mean(
        [abs(pilot[0] + np.sqrt(2.0) * s) ** 2 for s in pts]
    ) / sc.sigma_n2
    assert val == pytest.approx(expected, rel=1e-12)


def test_exhaustive_agrees_with_monte_carlo():
    sc = _tiny_scenario()
    basis = make_basis("ofdm", 2)
    const = make_constellation("psk", 4)
    pilot = allone_pilot(2, sc.pilot_power)
    exact = exhaustive_avg_scnr(sc, basis, const, pilot)
    est = empirical_avg_scnr(sc, basis, const, pilot, 20000, master_seed=5)
    assert abs(est.mean - exact) <= 3 * est.stderr


def test_exhaustive_symmetry_rotation_invariance():
    # rotating the alphabet by its own symmetry angle permutes the payload
    # set, so the exhaustive average is exactly unchanged
    sc = _tiny_scenario()
    basis = make_basis("ofdm", 2)
    const = make_constellation("psk", 4)
    pilot = allone_pilot(2, sc.pilot_power)
    rotated = type(const)(
        kind="psk", order=4, kurtosis=1.0, points=const.points * np.exp(1j * np.pi / 2)
    )
    a = exhaustive_avg_scnr(sc, basis, const, pilot)
    b = exhaustive_avg_scnr(sc, basis, rotated, pilot)
    assert a == pytest.approx(b, rel=1e-12)


def test_exhaustive_enforces_budget():
    sc = Scenario(n=12, sigma_n2=0.5, beta0=1.0, target_bin=0,
                  clutter=((0.1, 1),), pilot_power=1.0, data_power=1.0)
    basis = make_basis("ofdm", 12)
    with pytest.raises(TooLargeError):
        exhaustive_avg_scnr(sc, basis, make_constellation("psk", 4), allone_pilot(12, 1.0))
    with pytest.raises(TooLargeError):
        exhaustive_avg_scnr(
            _tiny_scenario(), make_basis("ofdm", 2), make_constellation("gaussian"),
            allone_pilot(2, 1.0),
        )


def test_stderr_scaling_with_trials():
    sc = _tiny_scenario(n=8, clutter=((0.3, 1), (0.2j, 5)))
    basis = make_basis("ofdm", 8)
    const = make_constellation("qam", 16)
    pilot = allone_pilot(8, sc.pilot_power)
    small = empirical_avg_scnr(sc, basis, const, pilot, 100, master_seed=9)
    large = empirical_avg_scnr(sc, basis, const, pilot, 10000, master_seed=9)
    ratio = small.stderr / large.stderr
    assert abs(ratio - 10.0) <= 3.0  # within 30% of the ideal sqrt scaling


# ---------------------------------------------------------------------------
# Experiments and CSV
# ---------------------------------------------------------------------------

def test_registry_complete():
    assert set(EXPERIMENTS) == {
        "range-profile", "validate-rmt", "compare-constellations", "compare-bases",
        "dpd-convergence", "dpd-vs-Q", "dpi-convergence", "dpi-vs-power",
        "oracle-suite",
    }


def test_empty_sweep_yields_no_rows():
    cfg = parse_config(_doc(sweep={"axis": "n", "values": []}))
    assert run_experiment(cfg) == []


def test_rows_and_csv_format(tmp_path):
    cfg = parse_config(_doc(trials=50))
    rows = run_experiment(cfg)
    assert len(rows) == 6  # 3 metrics x 2 sweep points
    path = tmp_path / "out.csv"
    write_csv(rows, str(path))
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    assert lines[0] == CSV_HEADER
    assert len(lines) == len(rows) + 2 and lines[-1] == ""
    field = lines[1].split(",")[8]
    assert "e" in field and len(field.split("e")[0].split(".")[1]) == 12


def test_csv_deterministic_across_threads_and_reruns(tmp_path):
    cfg = parse_config(_doc(trials=60))
    blobs = []
    for threads in (1, 4):
        rows = run_experiment(cfg, threads=threads)
        path = tmp_path / f"out{threads}.csv"
        write_csv(rows, str(path))
        blobs.append(path.read_bytes())
    rows = run_experiment(cfg, threads=1)
    path = tmp_path / "again.csv"
    write_csv(rows, str(path))
    blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1] == blobs[2]


def test_compare_constellations_rows():
    doc = _doc(experiment="compare-constellations", trials=200)
    doc.pop("sweep")
    cfg = parse_config(doc)
    rows = run_experiment(cfg)
    labels = {r.constellation for r in rows}
    assert labels == {"psk4", "qam16", "gaussian"}
    det = {r.constellation: r.value for r in rows if r.metric == "deterministic_avg_scnr"}
    assert det["psk4"] > det["qam16"] > det["gaussian"]


def test_oracle_checks_all_pass():
    for name, value, threshold, ok in oracle_checks(master_seed=2):
        assert ok, f"oracle check {name} failed: {value} vs {threshold}"


def test_oracle_suite_experiment_rows():
    doc = _doc(experiment="oracle-suite", trials=10)
    doc.pop("sweep")
    cfg = parse_config(doc)
    rows = run_experiment(cfg)
    oks = [r.value for r in rows if r.metric.endswith("_ok")]
    assert oks and all(v == 1.0 for v in oks)
