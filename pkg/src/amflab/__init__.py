"""Adaptive matched filtering laboratory for superimposed pilot-plus-data
waveforms in clutter: output-SCNR analysis, deterministic equivalents of the
payload average, and per-payload / payload-averaged pilot design."""

__version__ = "0.1.0"

from .exceptions import AmfLabError, ConfigError, NumericalError
from .numerics import TOL, SeededRng, stream_rng
from .signals import (
    Channel,
    ClutterGeometry,
    Constellation,
    ModulationBasis,
    Scenario,
    TxFrame,
    allone_pilot,
    assemble_tx,
    build_channel,
    dbm_to_mw,
    make_basis,
    make_constellation,
    mw_to_dbm,
    receive,
    sample_clutter_gains,
    sample_symbols,
    shift_apply,
)
from .amf import (
    FilterWeights,
    RangeProfile,
    amf_weights,
    clutter_covariance,
    instantaneous_scnr,
    mf_weights,
    range_profile,
)
from .rmt import (
    AvgScnrReport,
    FixedPointSolution,
    deterministic_avg_scnr,
    expected_quadratic_moment,
    scnr_upper_bound,
    shift_leakage,
    shift_profile,
    solve_fixed_point,
)
from .dpd import DpdOptions, DpdState, dpd_optimize, dpd_upper_bound
from .dpi import DpiOptions, DpiState, dpi_optimize

__all__ = [
    "AmfLabError",
    "AvgScnrReport",
    "Channel",
    "ClutterGeometry",
    "ConfigError",
    "Constellation",
    "DpdOptions",
    "DpdState",
    "DpiOptions",
    "DpiState",
    "FilterWeights",
    "FixedPointSolution",
    "ModulationBasis",
    "NumericalError",
    "RangeProfile",
    "Scenario",
    "SeededRng",
    "TOL",
    "TxFrame",
    "allone_pilot",
    "amf_weights",
    "assemble_tx",
    "build_channel",
    "clutter_covariance",
    "dbm_to_mw",
    "deterministic_avg_scnr",
    "dpd_optimize",
    "dpd_upper_bound",
    "dpi_optimize",
    "expected_quadratic_moment",
    "instantaneous_scnr",
    "make_basis",
    "make_constellation",
    "mf_weights",
    "mw_to_dbm",
    "range_profile",
    "receive",
    "sample_clutter_gains",
    "sample_symbols",
    "scnr_upper_bound",
    "shift_apply",
    "shift_leakage",
    "shift_profile",
    "solve_fixed_point",
    "stream_rng",
]
