"""Regularity diagnostics for space-time fields."""
from .degiorgi import DeGiorgiTrace, c2_constant, calibrate_sobolev_constant, degiorgi_trace, exponents
from .ladder import BootstrapLadder, bootstrap_ladder, mu_exponent, q_bar
from .maximal import MaximalConfig, bmo_seminorm, default_radii, level_set_sum, parabolic_maximal
from .norms import estimate_ratio, lp_norm, w1infty_ratio
from .report import DiagnosticsReport, write_json
from .scaling import regrid, scale_transform

__all__ = [
    "BootstrapLadder", "DeGiorgiTrace", "DiagnosticsReport", "MaximalConfig",
    "bmo_seminorm", "bootstrap_ladder", "c2_constant", "calibrate_sobolev_constant",
    "default_radii", "degiorgi_trace", "estimate_ratio", "exponents", "level_set_sum",
    "lp_norm", "mu_exponent", "parabolic_maximal", "q_bar", "regrid", "scale_transform",
    "w1infty_ratio", "write_json",
]
