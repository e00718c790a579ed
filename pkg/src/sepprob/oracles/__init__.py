"""Closed forms, exact constants and integral identities used as test oracles."""

from .constants import (REGISTRY, ClosedFormConstant, UnknownConstant, constant, constant_ids,
                        registry_table)
from .cubature import CubatureResult, gm_rule, integrate_simplex
from .identities import IDENTITIES, IdentityReport, cmax_rank4, nu_ratio, verify_identity
from .models import (FIT_CURVES, BetaFitMismatch, DysonModel, OutOfDomain, UnsupportedBranch,
                     beta_fit_params, dyson_model, dyson_sigma, fit_curve, marg_rank3,
                     marg_rank3_numeric, moment_matched_beta, rank3_moments, sbz_check, sbz_check_se)

__all__ = [
    "REGISTRY", "ClosedFormConstant", "UnknownConstant", "constant", "constant_ids", "registry_table",
    "CubatureResult", "gm_rule", "integrate_simplex",
    "IDENTITIES", "IdentityReport", "cmax_rank4", "nu_ratio", "verify_identity",
    "FIT_CURVES", "BetaFitMismatch", "DysonModel", "OutOfDomain", "UnsupportedBranch",
    "beta_fit_params", "dyson_model", "dyson_sigma", "fit_curve", "marg_rank3", "marg_rank3_numeric",
    "moment_matched_beta", "rank3_moments", "sbz_check", "sbz_check_se",
]
