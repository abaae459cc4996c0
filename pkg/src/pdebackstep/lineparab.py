"""One-step implicit solver for scalar diffusion lines.

Crank-Nicolson step of  d m / d tau = theta(zeta) m'' - mu m + source  on a
uniform grid, with Dirichlet/Neumann/Robin ends imposed implicitly.  Used as
the line-method ("pdepe stand-in") oracle for the decoupling equations and
as the diffusion half of the closed-loop simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .grids import Grid

__all__ = ["BoundaryCondition", "parabolic_line_step"]


@dataclass(frozen=True)
class BoundaryCondition:
    """m' = coef * m + value (robin; neumann when coef=0) or m = value."""

    kind: str              # "dirichlet" | "neumann" | "robin"
    value: float = 0.0
    coef: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")


def _second_derivative_rows(theta_vals, h):
    """Tridiagonal bands of theta * D2 on the interior nodes."""
    n = theta_vals.size
    lo = theta_vals[1:-1] / h**2
    di = -2.0 * theta_vals[1:-1] / h**2
    up = theta_vals[1:-1] / h**2
    return lo, di, up


def parabolic_line_step(state, theta_vals, mu, source, bc0: BoundaryCondition,
                        bc1: BoundaryCondition, dt, h, weight: float = 0.5):
    """Advance one implicit step; ``weight`` 0.5 is Crank-Nicolson, 1.0 is
    backward Euler (used to damp inconsistent initial layers).

    ``state`` is (n,) or (n, k); ``source`` is time-centered and the same
    shape; ``theta_vals`` the sampled diffusion; boundary values are taken at
    the new time level.
    """
    m = np.asarray(state, dtype=float)
    squeeze = m.ndim == 1
    if squeeze:
        m = m[:, None]
    n = m.shape[0]
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    src = np.zeros_like(m) if source is None else np.asarray(source, dtype=float)
    if src.ndim == 1:
        src = src[:, None]

    lo, di, up = _second_derivative_rows(theta_vals, h)
    # banded storage (l=2, u=2) so second-order one-sided Robin rows fit
    ab = np.zeros((5, n))
    rhs = np.zeros_like(m)

    # interior rows: (1 - w dt L) m+ = (1 + (1-w) dt L) m + dt src
    interior = slice(1, n - 1)
    ab[2, interior] = 1.0 - weight * dt * (di - mu)
    ab[1, 2:] = -weight * dt * up          # superdiagonal entries for rows 1..n-2
    ab[3, 0:n - 2] = -weight * dt * lo     # subdiagonal entries
    explicit = (1.0 - weight) * dt
    Lm = np.zeros_like(m)
    Lm[interior] = (theta_vals[1:-1, None] *
                    (m[:-2] - 2.0 * m[1:-1] + m[2:]) / h**2 - mu * m[interior])
    rhs[interior] = m[interior] + explicit * Lm[interior] + dt * src[interior]

    def bc_row(row, at_left, bc):
        val = np.atleast_1d(np.asarray(bc.value, dtype=float))
        if bc.kind == "dirichlet":
            ab[2, row] = 1.0
            if at_left:
                ab[1, row + 1] = 0.0
                ab[0, row + 2] = 0.0
            else:
                ab[3, row - 1] = 0.0
                ab[4, row - 2] = 0.0
            rhs[row] = val
            return
        coef = bc.coef if bc.kind == "robin" else 0.0
        if at_left:
            # (-3 m0 + 4 m1 - m2) / (2h) - coef m0 = value
            ab[2, 0] = -3.0 / (2.0 * h) - coef
            ab[1, 1] = 4.0 / (2.0 * h)
            ab[0, 2] = -1.0 / (2.0 * h)
            rhs[0] = val
        else:
            # (3 mN - 4 mN-1 + mN-2) / (2h) - coef mN = value
            ab[2, n - 1] = 3.0 / (2.0 * h) - coef
            ab[3, n - 2] = -4.0 / (2.0 * h)
            ab[4, n - 3] = 1.0 / (2.0 * h)
            rhs[n - 1] = val

    bc_row(0, True, bc0)
    bc_row(n - 1, False, bc1)

    out = solve_banded((2, 2), ab, rhs)
    return out[:, 0] if squeeze else out
