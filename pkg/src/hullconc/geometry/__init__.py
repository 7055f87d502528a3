"""Polytopes, gauges, polar bodies and epsilon-nets."""

import numpy as np

from .nets import (
    Decomposition,
    GaugeOracle,
    Net,
    build_net,
    coverage_stats,
    decompose,
    net_bound,
    random_boundary_points,
)
from .polytope import (
    Polytope,
    contains_point_lp,
    contains_polytope,
    diameter,
    gauge_lp,
    hausdorff_transfer,
    origin_interior_lp,
    polar_gauge_identity_check,
    support,
)
from .simplex import LPResult, solve_standard_lp


def polytope_gauge(polytope: Polytope, name: str = "polytope") -> GaugeOracle:
    A = polytope.facets

    def pairwise(z, w):
        az, aw = z @ A.T, w @ A.T
        out = np.zeros((z.shape[0], w.shape[0]))
        for f in range(A.shape[0]):
            np.maximum(out, az[:, f, None] - aw[None, :, f], out=out)
        return out

    return GaugeOracle(polytope.gauge, polytope.dim, name, pairwise=pairwise)


__all__ = [
    "Decomposition",
    "GaugeOracle",
    "LPResult",
    "Net",
    "Polytope",
    "build_net",
    "contains_point_lp",
    "contains_polytope",
    "coverage_stats",
    "decompose",
    "diameter",
    "gauge_lp",
    "hausdorff_transfer",
    "net_bound",
    "origin_interior_lp",
    "polar_gauge_identity_check",
    "polytope_gauge",
    "random_boundary_points",
    "solve_standard_lp",
    "support",
]
