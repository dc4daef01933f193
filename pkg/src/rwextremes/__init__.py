"""Order statistics of random walks near their minimum: Feller chains, exact simple-walk results and the Brownian valley."""

from .feller import (
    FellerPair,
    LimitOrderStats,
    decompose,
    ladder_variables,
    limit_order_stats,
    recover_reverse_induction,
    riffle_reconstruct,
)
from .walk import (
    Gaussian,
    Laplace,
    Mixture,
    SimpleSymmetric,
    WalkPath,
    make_rng,
    order_statistics,
    parse_spec,
    sample_path,
)

__version__ = "0.1.0"

__all__ = [
    "FellerPair",
    "Gaussian",
    "Laplace",
    "LimitOrderStats",
    "Mixture",
    "SimpleSymmetric",
    "WalkPath",
    "decompose",
    "ladder_variables",
    "limit_order_stats",
    "make_rng",
    "order_statistics",
    "parse_spec",
    "recover_reverse_induction",
    "riffle_reconstruct",
    "sample_path",
]
