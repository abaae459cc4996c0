"""Uniform grids on [0, 1], matrix-valued grid functions and 2-D kernels.

Everything downstream (kernel solvers, decoupling, simulator) shares these
containers and the composite quadrature rules defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "Kernel2D",
    "integrate",
    "trapezoid_weights",
    "volterra_lower_weights",
    "volterra_upper_weights",
]


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, 1] with n_points nodes."""

    n_points: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("a grid needs at least 2 points")
        object.__setattr__(self, "nodes", np.linspace(0.0, 1.0, self.n_points))

    @property
    def h(self) -> float:
        return 1.0 / (self.n_points - 1)

    def refined(self) -> "Grid":
        """Grid with halved spacing (shares every node of self)."""
        return Grid(2 * self.n_points - 1)


class GridFunction:
    """Matrix-valued function sampled on a grid; values shape (n, rows, cols)."""

    def __init__(self, grid: Grid, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None, None]
        if values.ndim != 3 or values.shape[0] != grid.n_points:
            raise ValueError(
                f"values shape {values.shape} incompatible with grid of "
                f"{grid.n_points} points")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid, rows, cols):
        return cls(grid, np.zeros((grid.n_points, rows, cols)))

    @classmethod
    def from_callable(cls, grid, fn, rows=None, cols=None):
        vals = np.asarray(fn(grid.nodes), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        return cls(grid, vals)

    @property
    def rows(self):
        return self.values.shape[1]

    @property
    def cols(self):
        return self.values.shape[2]

    def __add__(self, other):
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)

    def scaled(self, c):
        return GridFunction(self.grid, c * self.values)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_csv(self, path):
        header = ["z"] + [f"m{i}{j}" for i in range(self.rows) for j in range(self.cols)]
        flat = self.values.reshape(self.grid.n_points, -1)
        data = np.column_stack([self.grid.nodes, flat])
        np.savetxt(path, data, delimiter=",", header=",".join(header), comments="",
                   fmt="%.17g")


class Kernel2D:
    """Matrix-valued kernel on a triangular or square subdomain of [0,1]^2.

    values has shape (n, n, rows, cols) indexed [iz, izeta]; entries outside
    the declared domain are stored as zero and must not be read (``at`` checks).
    """

    DOMAINS = ("lower", "upper", "square")

    def __init__(self, domain: str, grid: Grid, values):
        if domain not in self.DOMAINS:
            raise ValueError(f"unknown kernel domain {domain!r}")
        values = np.asarray(values, dtype=float)
        n = grid.n_points
        if values.ndim != 4 or values.shape[:2] != (n, n):
            raise ValueError(f"kernel values shape {values.shape} invalid for n={n}")
        self.domain = domain
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, domain, grid, rows, cols):
        n = grid.n_points
        return cls(domain, grid, np.zeros((n, n, rows, cols)))

    @property
    def rows(self):
        return self.values.shape[2]

    @property
    def cols(self):
        return self.values.shape[3]

    def contains(self, iz: int, izeta: int) -> bool:
        if self.domain == "lower":
            return izeta <= iz
        if self.domain == "upper":
            return izeta >= iz
        return True

    def mask(self) -> np.ndarray:
        """Boolean (n, n) in-domain mask over [iz, izeta]."""
        n = self.grid.n_points
        iz, izeta = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        if self.domain == "lower":
            return izeta <= iz
        if self.domain == "upper":
            return izeta >= iz
        return np.ones((n, n), dtype=bool)

    def at(self, iz: int, izeta: int) -> np.ndarray:
        if not self.contains(iz, izeta):
            raise ValueError(
                f"kernel node ({iz}, {izeta}) outside {self.domain} domain")
        return self.values[iz, izeta]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_csv(self, path):
        n = self.grid.n_points
        nodes = self.grid.nodes
        header = ["z", "zeta"] + [
            f"m{i}{j}" for i in range(self.rows) for j in range(self.cols)]
        rows = []
        for a in range(n):
            for b in range(n):
                if self.contains(a, b):
                    rows.append(np.concatenate((
                        [nodes[a], nodes[b]], self.values[a, b].ravel())))
        np.savetxt(path, np.asarray(rows), delimiter=",",
                   header=",".join(header), comments="", fmt="%.17g")


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    return w


def _simpson_weights(n: int, h: float) -> np.ndarray:
    # composite Simpson needs an even number of panels; with an odd panel
    # count the final panel is done by trapezoid
    w = np.zeros(n)
    m = n if n % 2 == 1 else n - 1
    w[0:m:2] += 2.0 * h / 3.0
    w[1:m:2] += 4.0 * h / 3.0
    w[0] -= h / 3.0
    w[m - 1] -= h / 3.0
    if m != n:
        w[-2] += h / 2.0
        w[-1] += h / 2.0
    return w


def integrate(f, rule: str = "trapezoid", grid: Grid | None = None):
    """Composite quadrature of a GridFunction or sampled array over [0, 1].

    Arrays are integrated along their first axis; the grid is inferred from
    the sample count unless given.
    """
    if isinstance(f, GridFunction):
        values, n, h = f.values, f.grid.n_points, f.grid.h
    else:
        values = np.asarray(f, dtype=float)
        n = values.shape[0]
        h = (grid.h if grid is not None else 1.0 / (n - 1))
    if n < 2:
        raise ValueError("need at least 2 samples to integrate")
    if rule == "trapezoid":
        w = trapezoid_weights(n, h)
    elif rule == "simpson":
        if n < 3:
            raise ValueError("simpson needs at least 3 samples")
        w = _simpson_weights(n, h)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    out = np.tensordot(w, values, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def volterra_lower_weights(n: int, h: float) -> np.ndarray:
    """W[a, b]: trapezoid weight of node b in the integral over [0, z_a].

    Row a of W integrates a sampled function from 0 to z_a; W is lower
    triangular with zero first row.
    """
    W = np.zeros((n, n))
    for a in range(1, n):
        W[a, : a + 1] = trapezoid_weights(a + 1, h)
    return W


def volterra_upper_weights(n: int, h: float) -> np.ndarray:
    """U[a, b]: trapezoid weight of node b in the integral over [z_a, 1]."""
    U = np.zeros((n, n))
    for a in range(n - 1):
        U[a, a:] = trapezoid_weights(n - a, h)
    return U
