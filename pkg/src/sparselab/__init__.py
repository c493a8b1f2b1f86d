"""Dyadic sparse forms, multilinear fractional maximal operators and weight constants on the unit torus."""

from .exponents import ExponentConfig, ExponentError
from .forms import FormInputs, form_A, form_B, plain_form, reduce_check
from .lattice import DyadicCube, GridSpec, Measure, SparseFamily, avg, indicator, mean, sample
from .normest import SearchConfig, maximal_equiv_report, strong_norm_search, weak_norm_search
from .operators import FracIntegral, KernelSpec, dyadic_maximal, frac_integral, sparse_operator
from .sparsify import DominationConfig, dominate, sparse_from_maximal, verify_sparse
from .weights import WeightTuple, ap_constant, bmo_norm, multiweight_constant, theta_exponent

__version__ = "0.1.0"

__all__ = [
    "ExponentConfig", "ExponentError", "FormInputs", "form_A", "form_B", "plain_form",
    "reduce_check", "DyadicCube", "GridSpec", "Measure", "SparseFamily", "avg", "indicator",
    "mean", "sample", "SearchConfig", "maximal_equiv_report", "strong_norm_search",
    "weak_norm_search", "FracIntegral", "KernelSpec", "dyadic_maximal", "frac_integral",
    "sparse_operator", "DominationConfig", "dominate", "sparse_from_maximal", "verify_sparse",
    "WeightTuple", "ap_constant", "bmo_norm", "multiweight_constant", "theta_exponent",
]
