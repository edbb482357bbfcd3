"""Complex Monge-Ampere flow on the flat torus.

Fields are numpy arrays of shape (N,) * 2n with axes (x1, y1, ..., xn, yn).
"""

from ._cmaflow import (
    CmafError,
    coordinates,
    log_det_ratio,
    random_rough_field,
    read_snapshot,
    run_experiment,
    run_flow,
    solve_fixed_rhs,
    solve_self_consistent,
)

__all__ = [
    "CmafError",
    "coordinates",
    "log_det_ratio",
    "random_rough_field",
    "read_snapshot",
    "run_experiment",
    "run_flow",
    "solve_fixed_rhs",
    "solve_self_consistent",
]
