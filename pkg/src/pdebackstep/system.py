"""Plant description: coupled hyperbolic-parabolic system with boundary and
in-domain couplings.

The plant consists of n_- parabolic lines

    dw/dt = Theta(z) w'' + F(z) w + H1[x](z)
    w'(0) = Q0 w(0) + H2[x],     w(1) = H3[x]

bidirectionally coupled with n = n_- + n_+ heterodirectional transport lines

    dx/dt = Lambda(z) x' + A(z) x + G1[w](z)
    x_+(0) = Q+ x_-(0) + G2[w],  x_-(1) = Q- x_+(1) + u + G3[w],   y = x_-(0)

where the coupling operators H_i, G_i combine boundary traces, local terms
and Volterra/Fredholm integrals.  This module parses, validates and
classifies such systems and evaluates the coupling operators on grids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .coefficients import Coefficient, CoefficientMatrix, parse_coefficient
from .grids import Grid, trapezoid_weights, volterra_lower_weights

__all__ = [
    "ParabolicSpec", "HyperbolicSpec", "CouplingOperatorSpec", "SystemSpec",
    "FormReport", "CouplingState", "CouplingEvaluator",
    "load_system", "system_from_dict", "validate_system", "classify_form",
    "compute_transport_times", "apply_coupling",
]

ZERO_TOL = 1e-12        # numeric zero test for structural conditions
DET_TOL = 1e-10         # nonsingularity threshold for H3_1, G3_2

H_PIECES = ("H1_1", "H1_2", "H1_3", "H1_4", "H1_5",
            "H2_1", "H2_2", "H2_3", "H3_1", "H3_2", "H3_3")
G_PIECES = ("G1_1", "G1_2", "G1_3", "G1_4", "G1_5",
            "G2_1", "G2_2", "G2_3", "G3_1", "G3_2", "G3_3")
TWO_VARIABLE_PIECES = ("H1_4", "H1_5", "G1_4", "G1_5")
CONSTANT_PIECES = ("H2_1", "H2_2", "H3_1", "H3_2",
                   "G2_1", "G2_2", "G3_1", "G3_2")


def _as_matrix(data, rows, cols, name):
    mat = np.asarray(data, dtype=float)
    if mat.shape != (rows, cols):
        raise ValueError(f"{name} has shape {mat.shape}, expected ({rows}, {cols})")
    return mat


@dataclass
class ParabolicSpec:
    n_minus: int
    theta: list                       # n_- Coefficients, diagonal of Theta
    F: CoefficientMatrix              # n_- x n_-
    Q0: np.ndarray                    # n_- x n_- real diagonal

    def __post_init__(self):
        if self.n_minus < 1:
            raise ValueError("n_minus must be positive")
        if len(self.theta) != self.n_minus:
            raise ValueError("theta needs one diffusion per parabolic line")
        self.theta = [parse_coefficient(t) for t in self.theta]
        self.Q0 = _as_matrix(self.Q0, self.n_minus, self.n_minus, "Q0")

    def theta_values(self, z) -> np.ndarray:
        """Diagonal entries sampled at z; shape (len(z), n_minus)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.column_stack([t(z) for t in self.theta])


@dataclass
class HyperbolicSpec:
    n_minus: int
    n_plus: int
    lam: list                         # n Coefficients, diagonal of Lambda
    A: CoefficientMatrix              # n x n
    Q_plus: np.ndarray                # n_+ x n_-
    Q_minus: np.ndarray               # n_- x n_+

    def __post_init__(self):
        if self.n_minus < 1 or self.n_plus < 1:
            raise ValueError("n_minus and n_plus must be positive")
        n = self.n_minus + self.n_plus
        if len(self.lam) != n:
            raise ValueError(f"lambda needs {n} transport velocities")
        self.lam = [parse_coefficient(l) for l in self.lam]
        self.Q_plus = _as_matrix(self.Q_plus, self.n_plus, self.n_minus, "Q_plus")
        self.Q_minus = _as_matrix(self.Q_minus, self.n_minus, self.n_plus, "Q_minus")

    @property
    def n(self) -> int:
        return self.n_minus + self.n_plus

    def lam_values(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return np.column_stack([l(z) for l in self.lam])


class CouplingOperatorSpec:
    """The constituent pieces of H_1..H_3 and G_1..G_3.

    Missing pieces are identically zero.  Pieces indexed (2,1), (2,2), (3,1),
    (3,2) are constant real matrices (they appear in boundary relations);
    all others are matrices of coefficient functions, two-variable for the
    Volterra/Fredholm pieces of H_1 and G_1.
    """

    def __init__(self, n_minus: int, n_plus: int, pieces: dict | None = None):
        self.n_minus = n_minus
        self.n_plus = n_plus
        n = n_minus + n_plus
        self.shapes = {
            "H1_1": (n_minus, n_minus), "H1_2": (n_minus, n_plus),
            "H1_3": (n_minus, n), "H1_4": (n_minus, n), "H1_5": (n_minus, n),
            "H2_1": (n_minus, n_minus), "H2_2": (n_minus, n_plus), "H2_3": (n_minus, n),
            "H3_1": (n_minus, n_minus), "H3_2": (n_minus, n_plus), "H3_3": (n_minus, n),
            "G1_1": (n, n_minus), "G1_2": (n, n_minus), "G1_3": (n, n_minus),
            "G1_4": (n, n_minus), "G1_5": (n, n_minus),
            "G2_1": (n_plus, n_minus), "G2_2": (n_plus, n_minus), "G2_3": (n_plus, n_minus),
            "G3_1": (n_minus, n_minus), "G3_2": (n_minus, n_minus), "G3_3": (n_minus, n_minus),
        }
        pieces = dict(pieces or {})
        for name in list(pieces):
            if name not in self.shapes:
                raise ValueError(f"unknown coupling piece {name!r}")
        self.pieces = {}
        for name, shape in self.shapes.items():
            data = pieces.get(name)
            if name in CONSTANT_PIECES:
                self.pieces[name] = (np.zeros(shape) if data is None
                                     else _as_matrix(data, *shape, name=name))
            else:
                self.pieces[name] = CoefficientMatrix.from_config(
                    data, *shape, name=name)

    def __getitem__(self, name):
        return self.pieces[name]

    def constant(self, name) -> np.ndarray:
        piece = self.pieces[name]
        if not isinstance(piece, np.ndarray):
            raise TypeError(f"{name} is not a constant piece")
        return piece

    def piece_is_zero(self, name, zgrid, ztgrid=None) -> bool:
        piece = self.pieces[name]
        if isinstance(piece, np.ndarray):
            return bool(np.max(np.abs(piece)) == 0.0 if piece.size else True)
        if piece.is_literal_zero:
            return True
        if name in TWO_VARIABLE_PIECES:
            return piece.sup_on_grid(zgrid, ztgrid if ztgrid is not None else zgrid) < ZERO_TOL
        return piece.sup_on_grid(zgrid) < ZERO_TOL


@dataclass
class SystemSpec:
    parabolic: ParabolicSpec
    hyperbolic: HyperbolicSpec
    couplings: CouplingOperatorSpec
    validation_grid_size: int = 201

    def __post_init__(self):
        if self.parabolic.n_minus != self.hyperbolic.n_minus:
            raise ValueError("parabolic and hyperbolic n_minus disagree")

    @property
    def n_minus(self):
        return self.parabolic.n_minus

    @property
    def n_plus(self):
        return self.hyperbolic.n_plus

    @property
    def n(self):
        return self.hyperbolic.n

    def validation_grid(self) -> Grid:
        return Grid(self.validation_grid_size)


@dataclass
class FormReport:
    strict_feedback: bool
    strict_feedforward: bool
    violations: list = field(default_factory=list)

    @property
    def compensator_ready(self) -> bool:
        return self.strict_feedback and self.strict_feedforward


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------


def system_from_dict(data: dict) -> SystemSpec:
    try:
        par = data["parabolic"]
        hyp = data["hyperbolic"]
    except KeyError as exc:
        raise ValueError(f"config missing top-level key {exc}") from None
    theta = par["theta"]
    n_minus = len(theta)
    Q0 = np.asarray(par.get("Q0", np.zeros((n_minus, n_minus))), dtype=float)
    if Q0.ndim == 1:
        Q0 = np.diag(Q0)
    parabolic = ParabolicSpec(
        n_minus=n_minus,
        theta=theta,
        F=CoefficientMatrix.from_config(par.get("F"), n_minus, n_minus, "F"),
        Q0=Q0,
    )
    lam = hyp["lambda"]
    n = len(lam)
    n_plus = n - n_minus
    hyperbolic = HyperbolicSpec(
        n_minus=n_minus,
        n_plus=n_plus,
        lam=lam,
        A=CoefficientMatrix.from_config(hyp.get("A"), n, n, "A"),
        Q_plus=np.asarray(hyp.get("Q_plus", np.zeros((n_plus, n_minus))), dtype=float),
        Q_minus=np.asarray(hyp.get("Q_minus", np.zeros((n_minus, n_plus))), dtype=float),
    )
    couplings = CouplingOperatorSpec(n_minus, n_plus, data.get("couplings"))
    return SystemSpec(parabolic=parabolic, hyperbolic=hyperbolic,
                      couplings=couplings,
                      validation_grid_size=int(data.get("validation_grid_size", 201)))


def load_system(path) -> SystemSpec:
    with open(path) as fh:
        data = json.load(fh)
    return system_from_dict(data)


# ---------------------------------------------------------------------------
# Validation and classification
# ---------------------------------------------------------------------------


def validate_system(spec: SystemSpec) -> list:
    """Check the plant-class conditions on the validation grid.

    Returns a list of human-readable violations; empty means the system is
    admissible.
    """
    violations = []
    z = spec.validation_grid().nodes

    theta = spec.parabolic.theta_values(z)
    if np.any(theta[:, -1] <= 0.0):
        violations.append("theta positivity fails: theta_%d <= 0 somewhere" % spec.n_minus)
    for i in range(spec.n_minus - 1):
        if np.any(theta[:, i] <= theta[:, i + 1]):
            violations.append(f"theta ordering fails between entries {i + 1} and {i + 2}")

    lam = spec.hyperbolic.lam_values(z)
    nm = spec.n_minus
    if np.any(lam[:, nm - 1] <= 0.0):
        violations.append("negative-direction velocities must stay positive")
    if np.any(lam[:, nm] >= 0.0):
        violations.append("positive-direction velocities must stay negative")
    for i in range(spec.n - 1):
        if i == nm - 1:
            continue
        if np.any(lam[:, i] <= lam[:, i + 1]):
            violations.append(f"lambda ordering fails between entries {i + 1} and {i + 2}")

    A = spec.hyperbolic.A
    for i in range(spec.n):
        entry = A.entries[i][i]
        if not entry.is_literal_zero:
            if float(np.max(np.abs(entry(z)))) >= ZERO_TOL:
                violations.append(f"diag(A) nonzero at entry {i + 1}")

    Q0 = spec.parabolic.Q0
    if np.any(np.abs(Q0 - np.diag(np.diag(Q0))) > 0.0):
        violations.append("Q0 must be diagonal")

    # every coupling piece must evaluate on the grid (domain errors surface here)
    for name in spec.couplings.shapes:
        piece = spec.couplings[name]
        if isinstance(piece, CoefficientMatrix):
            try:
                if name in TWO_VARIABLE_PIECES:
                    piece(z[:: max(1, len(z) // 40)], z[:: max(1, len(z) // 40)])
                else:
                    piece(z)
            except ArithmeticError as exc:
                violations.append(f"coupling piece {name} not evaluable: {exc}")
    return violations


def classify_form(spec: SystemSpec) -> FormReport:
    """Strict feedback / strict feedforward classification."""
    z = spec.validation_grid().nodes
    violations = []

    def zero(name):
        ok = spec.couplings.piece_is_zero(name, z)
        if not ok:
            violations.append((name, "must vanish"))
        return ok

    sfb = abs(np.linalg.det(spec.couplings.constant("H3_1"))) > DET_TOL
    if not sfb:
        violations.append(("H3_1", "singular"))
    for name in ("H3_2", "H3_3", "H1_1", "H1_2", "H1_3", "H1_4", "H1_5",
                 "H2_1", "H2_2", "H2_3"):
        sfb = zero(name) and sfb

    sff = abs(np.linalg.det(spec.couplings.constant("G3_2"))) > DET_TOL
    if not sff:
        violations.append(("G3_2", "singular"))
    for name in ("G3_1", "G3_3", "G1_1", "G1_2", "G1_3", "G1_4", "G1_5",
                 "G2_1", "G2_2", "G2_3"):
        sff = zero(name) and sff

    return FormReport(strict_feedback=sfb, strict_feedforward=sff,
                      violations=violations)


def compute_transport_times(spec: SystemSpec):
    """(D_minus, D_plus, D): cumulative travel times of the transport lines."""
    nm = spec.n_minus
    d_minus = 0.0
    for i in range(nm):
        lam_i = spec.hyperbolic.lam[i]
        val, _ = quad(lambda s: 1.0 / lam_i(s), 0.0, 1.0, epsabs=1e-10, limit=200)
        d_minus += val
    lam_p1 = spec.hyperbolic.lam[nm]
    d_plus, _ = quad(lambda s: 1.0 / abs(lam_p1(s)), 0.0, 1.0, epsabs=1e-10, limit=200)
    return d_minus, d_plus, d_minus + d_plus


# ---------------------------------------------------------------------------
# Coupling operator evaluation
# ---------------------------------------------------------------------------


@dataclass
class CouplingState:
    """A state sampled on a grid, with the derivative trace at zeta = 1 when
    the delta'-pieces need it."""

    grid: Grid
    values: np.ndarray                        # (n_points, dim)
    dvalue_at_1: np.ndarray | None = None     # one-sided derivative at zeta = 1


class CouplingEvaluator:
    """One coupling operator (H_i or G_i) sampled on a grid for fast reuse.

    apply() evaluates boundary traces, local term and the Volterra/Fredholm
    integrals by trapezoid quadrature on the grid.
    """

    def __init__(self, spec: SystemSpec, which: str, grid: Grid):
        if which not in ("H_1", "H_2", "H_3", "G_1", "G_2", "G_3"):
            raise ValueError(f"unknown coupling operator {which!r}")
        self.which = which
        self.grid = grid
        self.spec = spec
        cpl = spec.couplings
        z = grid.nodes
        n = grid.n_points
        fam, idx = which.split("_")
        self.family = fam
        self.wtrap = trapezoid_weights(n, grid.h)
        self.Wlow = volterra_lower_weights(n, grid.h)
        names = [f"{fam}{idx}_{k}" for k in (1, 2, 3)]
        if idx == "1":
            self.p1 = cpl[names[0]](z)                    # (n, r, c1)
            self.p2 = cpl[names[1]](z)
            self.p3 = cpl[names[2]](z)
            self.p4 = cpl[f"{fam}1_4"](z, z)              # (n, n, r, c)
            self.p5 = cpl[f"{fam}1_5"](z, z)
            self.has4 = not cpl[f"{fam}1_4"].is_literal_zero
            self.has5 = not cpl[f"{fam}1_5"].is_literal_zero
        else:
            self.p1 = cpl.constant(names[0])
            self.p2 = cpl.constant(names[1])
            self.p3 = cpl[names[2]](z)

    def _traces(self, state: CouplingState):
        nm = self.spec.n_minus
        if self.family == "H":
            left = state.values[0, :nm]           # x_-(0)
            right = state.values[-1, nm:]         # x_+(1)
            return left, right
        left = state.values[0]                    # w(0)
        if self.dprime_needed() and state.dvalue_at_1 is None:
            raise ValueError(f"{self.which} needs the derivative trace at zeta=1")
        right = state.dvalue_at_1 if state.dvalue_at_1 is not None \
            else np.zeros(self.spec.n_minus)      # w'(1)
        return left, right

    def dprime_needed(self) -> bool:
        if self.family != "G":
            return False
        if self.which == "G_1":
            return bool(np.max(np.abs(self.p2)) > 0.0)
        return bool(np.max(np.abs(self.p2)) > 0.0)

    def apply(self, state: CouplingState):
        """Returns (n_points, r) for i = 1 and (r,) for i = 2, 3."""
        if state.grid.n_points != self.grid.n_points:
            raise ValueError("state grid does not match evaluator grid")
        left, right = self._traces(state)
        vals = state.values
        if self.which.endswith("_1"):
            out = self.p1 @ left + self.p2 @ right
            out += np.einsum("arc,ac->ar", self.p3, vals)
            if self.has4:
                out += np.einsum("ab,abrc,bc->ar", self.Wlow, self.p4, vals)
            if self.has5:
                out += np.einsum("b,abrc,bc->ar", self.wtrap, self.p5, vals)
            return out
        out = self.p1 @ left + self.p2 @ right
        out += np.einsum("b,brc,bc->r", self.wtrap, self.p3, vals)
        return out


def apply_coupling(spec: SystemSpec, which: str, state: CouplingState):
    """Evaluate one coupling operator on a sampled state (convenience path;
    repeated application should reuse a CouplingEvaluator)."""
    return CouplingEvaluator(spec, which, state.grid).apply(state)
