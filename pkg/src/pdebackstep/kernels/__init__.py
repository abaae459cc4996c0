from .parabolic import (
    solve_parabolic_controller_kernel, solve_parabolic_observer_kernel,
    parabolic_kernel_residual,
)
