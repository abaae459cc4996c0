"""Characteristic travel-time maps for the transport velocities.

For a velocity lambda(z) bounded away from zero, phi(z) = int_0^z d s / lambda(s)
is the (signed) travel time along the characteristic through the origin.
Both phi and its inverse are tabulated once on a fine grid and evaluated
through cubic splines, so curved characteristics become cheap closed-form
lookups for the kernel solvers.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

__all__ = ["CharacteristicMap", "trace_characteristic"]

_N_TAB = 4097


class CharacteristicMap:
    """phi(z) = int_0^z d s / lambda(s) together with its inverse."""

    def __init__(self, lam, n_tab: int = _N_TAB):
        z = np.linspace(0.0, 1.0, n_tab)
        vals = np.asarray(lam(z), dtype=float)
        if vals.shape != z.shape:
            vals = np.broadcast_to(vals, z.shape)
        if np.min(np.abs(vals)) < 1e-12 or np.min(vals) * np.max(vals) < 0.0:
            raise ValueError("velocity crosses zero on [0, 1]")
        self.sign = 1.0 if vals[0] > 0 else -1.0
        phi = np.concatenate(([0.0], cumulative_simpson(1.0 / vals, x=z)))
        self._z = z
        self._phi_tab = phi
        self._lam_spline = CubicSpline(z, vals)
        self._phi_spline = CubicSpline(z, phi)
        if self.sign > 0:
            self._inv_spline = CubicSpline(phi, z)
        else:
            self._inv_spline = CubicSpline(phi[::-1], z[::-1])
        self.total = float(phi[-1])

    def lam(self, z):
        return self._lam_spline(z)

    def phi(self, z):
        return self._phi_spline(z)

    def inverse(self, tau):
        """z with phi(z) = tau; clipped to the tabulated range."""
        lo, hi = sorted((0.0, self.total))
        return self._inv_spline(np.clip(tau, lo, hi))

    def contains_time(self, tau) -> np.ndarray:
        """Whether tau lies in the travel-time range [0, phi(1)] (signed)."""
        lo, hi = sorted((0.0, self.total))
        t = np.asarray(tau, dtype=float)
        eps = 1e-12 * max(1.0, abs(self.total))
        return (t >= lo - eps) & (t <= hi + eps)


def trace_characteristic(lam, direction: int | None = None) -> CharacteristicMap:
    """Build the travel-time map for one velocity.

    ``direction`` is only checked against the actual sign of the velocity
    when given; the map itself works for either sign.
    """
    cmap = CharacteristicMap(lam)
    if direction is not None and np.sign(direction) != cmap.sign:
        raise ValueError("requested direction does not match velocity sign")
    return cmap
