from ._core import (
    IsotowerError,
    Trajectory,
    abel_inner,
    beta_delocalization_test,
    build_id,
    cesaro_inner,
    criterion_count,
    criterion_name,
    gap_probability,
    holo_inner,
    kernel_finite,
    kernel_sine,
    moving_average_M,
    pair_density_sine,
    recover_coeffs,
    rho_r,
    run_criterion,
    sample_spectrum,
    secular_function,
    solve_secular,
    trace_moments,
)

__all__ = [
    "IsotowerError",
    "Trajectory",
    "abel_inner",
    "beta_delocalization_test",
    "build_id",
    "cesaro_inner",
    "criterion_count",
    "criterion_name",
    "gap_probability",
    "holo_inner",
    "kernel_finite",
    "kernel_sine",
    "moving_average_M",
    "pair_density_sine",
    "recover_coeffs",
    "rho_r",
    "run_criterion",
    "sample_spectrum",
    "secular_function",
    "solve_secular",
    "trace_moments",
]
