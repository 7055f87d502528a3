"""Concentration of random polytopes around the expected convex hull."""

__version__ = "0.1.0"

from .bodies import (  # noqa: E402
    ExpectedHullOracle,
    FloatingBodyOracle,
    certify_sandwich,
    inclusion_probability,
    sandwich_bruteforce,
)
from .distributions import (  # noqa: E402
    DistributionModel,
    directional_law,
    gaussian,
    laplace_product,
    parse_law_spec,
    parse_model_spec,
    sample,
    uniform_box,
)
from .errors import *  # noqa: E402,F403
from .geometry import Polytope, build_net, decompose, gauge_lp  # noqa: E402
from .order_stats import expected_max, lemma4_verify, max_law_cdf, quantile_sandwich_check  # noqa: E402

__all__ = [
    "__version__",
    "DistributionModel",
    "ExpectedHullOracle",
    "FloatingBodyOracle",
    "Polytope",
    "build_net",
    "certify_sandwich",
    "decompose",
    "directional_law",
    "expected_max",
    "gauge_lp",
    "gaussian",
    "inclusion_probability",
    "laplace_product",
    "lemma4_verify",
    "max_law_cdf",
    "parse_law_spec",
    "parse_model_spec",
    "quantile_sandwich_check",
    "sample",
    "sandwich_bruteforce",
    "uniform_box",
]
