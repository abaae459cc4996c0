"""Backstepping kernels of the parabolic subsystem.

The controller kernel P lives on the lower triangle 0 <= zeta <= z <= 1 and
satisfies

    Theta(z) P_zz - (P Theta)_{zeta zeta} = P (F(zeta) + mu_c I)

with a Robin relation at zeta = 0 (whose non-imposable, strictly lower part
defines the target coupling Ft0), a commutation condition and a trace ODE on
the diagonal.  The observer kernel Pbar mirrors this on the upper triangle
with right-hand side -(F(z) + mu_o I) Pbar and the z = 0 relation defining
the strictly upper Fb0.

Each scalar component (i, j) is a wave-type Goursat/boundary problem.  In
the per-component coordinates u = int_0^z theta_i^{-1/2},
v = int_0^zeta theta_j^{-1/2} with the kernel rescaled by
theta_i(z)^{1/4} theta_j(zeta)^{-3/4}, every first-order term cancels
exactly, the principal part becomes G_uu - G_vv and characteristics are the
straight lines u +- v = const, while the diagonal image still passes through
the lattice points of the physical grid.  The equation is integrated along
those characteristics: with the Riemann invariants pi = G_xi, mu = G_eta
(xi, eta the characteristic variables) the component becomes a first-order
system marched away from the diagonal with a Keller box scheme, whose
inflow data on the diagonal and on the fixed edge are known exactly, so no
one-sided extrapolation enters anywhere.  Components are marched toward the
side of the diagonal selected by the sign of theta_i - theta_j; the matrix
coupling on the right-hand side is resolved by successive approximations.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from ..grids import Grid, GridFunction, Kernel2D

__all__ = [
    "solve_parabolic_controller_kernel",
    "solve_parabolic_observer_kernel",
    "parabolic_kernel_residual",
    "KernelSolveReport",
]

_FINE = 4097


class KernelSolveReport(dict):
    """Iteration count, final update norm and boundary-identity checks."""


def _fine_table(fn, nodes):
    """Cumulative integral of fn from 0, evaluated at the given nodes."""
    zf = np.linspace(0.0, 1.0, _FINE)
    vals = np.asarray(fn(zf), dtype=float)
    if vals.shape != zf.shape:
        vals = np.broadcast_to(vals, zf.shape)
    cum = np.concatenate(([0.0], cumulative_simpson(vals, x=zf)))
    return CubicSpline(zf, cum)(nodes)


def _one_sided_first(values, steps):
    """f'(s0) from three nodes at s0, s0+h1, s0+h1+h2 (values axis 0)."""
    h1, h2 = steps
    c0 = -(2.0 * h1 + h2) / (h1 * (h1 + h2))
    c1 = (h1 + h2) / (h1 * h2)
    c2 = -h1 / (h2 * (h1 + h2))
    return c0 * values[0] + c1 * values[1] + c2 * values[2]


def _interp_level(Sn_part, vals, feet, cut=None):
    """Interpolate old-level values at characteristic feet.

    Cubic Lagrange on the four nearest nodes.  The kernels have a gradient
    kink along the characteristic through the march corner (they are only
    piecewise C^2); feet whose cubic stencil would straddle ``cut`` fall
    back to linear interpolation, which smears the kink diffusively but
    never rings or amplifies.
    """
    n = Sn_part.size
    feet = np.asarray(feet, dtype=float)
    if n < 4:
        return np.interp(feet, Sn_part, vals)
    j = np.searchsorted(Sn_part, feet) - 1
    j0 = np.clip(j - 1, 0, n - 4)
    out = np.zeros_like(feet)
    for k in range(4):
        lk = np.ones_like(feet)
        sk = Sn_part[j0 + k]
        for m in range(4):
            if m == k:
                continue
            sm = Sn_part[j0 + m]
            lk *= (feet - sm) / (sk - sm)
        out += lk * vals[j0 + k]
    if cut is not None and Sn_part[0] < cut < Sn_part[-1]:
        step = float(np.max(Sn_part[1:] - Sn_part[:-1]))
        near = np.abs(feet - cut) < 2.5 * step
        if np.any(near):
            out[near] = np.interp(feet[near], Sn_part, vals)
    return out


def _box_march(Tn, Sn, gamma, pi_data, mu_data, fixed_bc, q, f):
    """March one wave component away from its data curve along its
    characteristics.

    Canonical orientation: time nodes Tn[0..K] increasing; at level l the
    solution occupies space indices 0..l of Sn (increasing); node l lies on
    the data curve and carries gamma[l].  In G_tt = G_ss + q G + f the
    Riemann invariants pi = (G_t + G_s)/2 and mu = (G_t - G_s)/2 satisfy

        (d_t - d_s) pi = (q G + f)/2,    (d_t + d_s) mu = (q G + f)/2.

    Both are advanced semi-Lagrangianly: trace the characteristic of each
    unknown back one level (or to its crossing of the data curve / fixed
    edge, whichever comes first) and integrate the source along it by the
    trapezoidal rule, with the head value of G = Ghat + (dT/2)(pi + mu)
    eliminated exactly through a per-node 2x2 solve.  pi flows in from the
    data curve (pi_data per level); mu flows in from the fixed edge, where
    a Robin condition G_s = kappa G gives pi - mu = kappa G and an
    artificial zero-Dirichlet edge gives mu = -pi.  On the data curve mu is
    Cauchy data for distinct diffusivities (mu_data) and is integrated
    along the curve itself when the curve is the mu-characteristic
    (mu_data None, equal diffusivities).

    q, f are (K+1, K+1) arrays indexed [level, space].  Returns G[level,
    space] with zeros outside the filled triangle.
    """
    K = len(Tn) - 1
    kind, kappa = fixed_bc
    G = np.zeros((K + 1, K + 1))
    pi = np.zeros((K + 1, K + 1))
    mu = np.zeros((K + 1, K + 1))
    G[0, 0] = gamma[0]
    pi[0, 0] = pi_data[0]
    if mu_data is not None:
        mu[0, 0] = mu_data[0]
    elif kind == "robin":
        mu[0, 0] = pi[0, 0] - kappa * gamma[0]
    else:
        mu[0, 0] = -pi[0, 0]
    curve = Tn + Sn           # data-curve marker along pi-characteristics
    kink = Tn[0] - Sn[0]      # mu-characteristic through the march corner

    for lvl in range(K):
        new = lvl + 1
        dT = Tn[new] - Tn[lvl]
        cG = 0.5 * dT
        Sold = Sn[: lvl + 1]
        Gl = G[lvl, : lvl + 1]
        pl = pi[lvl, : lvl + 1]
        ml = mu[lvl, : lvl + 1]
        Rl = q[lvl, : lvl + 1] * Gl + f[lvl, : lvl + 1]
        Ghat_old = Gl + cG * (pl + ml)
        qn = q[new, : new + 1]
        fn = f[new, : new + 1]
        s_kink = Tn[lvl] - kink           # kink position on the old level
        cut = s_kink if lvl >= 4 else None

        # --- pi: feet at S_b + dT, or crossing of the data curve ---
        b_idx = np.arange(new)            # interior + fixed-edge nodes
        feet_pi = Sn[b_idx] + dT
        crosses = feet_pi > Sold[-1] + 1e-15
        pi_foot = np.empty(new)
        r_foot_pi = np.empty(new)
        delta_pi = np.full(new, dT)
        inside = ~crosses
        if np.any(inside):
            pi_foot[inside] = _interp_level(Sold, pl, feet_pi[inside], cut)
            r_foot_pi[inside] = _interp_level(Sold, Rl, feet_pi[inside], cut)
        if np.any(crosses):
            for b in np.nonzero(crosses)[0]:
                c_val = Tn[new] + Sn[b]
                m = int(np.searchsorted(curve, c_val)) - 1
                m = min(max(m, 0), K - 1)
                seg = curve[m + 1] - curve[m]
                w = 0.0 if seg == 0.0 else (c_val - curve[m]) / seg
                t_star = Tn[m] + w * (Tn[m + 1] - Tn[m])
                pi_foot[b] = pi_data[m] + w * (pi_data[m + 1] - pi_data[m])
                g_star = gamma[m] + w * (gamma[m + 1] - gamma[m])
                q_star = q[m, m] + w * (q[m + 1, m + 1] - q[m, m])
                f_star = f[m, m] + w * (f[m + 1, m + 1] - f[m, m])
                r_foot_pi[b] = q_star * g_star + f_star
                delta_pi[b] = Tn[new] - t_star

        # --- mu: feet at S_b - dT, or crossing of the fixed edge ---
        mu_foot = np.empty(new)
        r_foot_mu = np.empty(new)
        delta_mu = np.full(new, dT)
        edge_nodes = np.empty(0, dtype=int)
        if new > 1:
            tgt = b_idx[1:]
            feet_mu = Sn[tgt] - dT
            below = feet_mu < Sold[0] - 1e-15
            ins = ~below
            if np.any(ins):
                mu_foot[tgt[ins]] = _interp_level(Sold, ml, feet_mu[ins], cut)
                r_foot_mu[tgt[ins]] = _interp_level(Sold, Rl, feet_mu[ins], cut)
            edge_nodes = tgt[below]
            for b in edge_nodes:
                # entered through the fixed edge during this step; edge value
                # at the crossing time, refreshed on the corrector pass
                delta_mu[b] = Sn[b] - Sold[0]
                mu_foot[b] = mu[lvl, 0]
                r_foot_mu[b] = Rl[0]

        # G accumulates the pure time integral of (pi + mu); a trapezoid step
        # across the kink characteristic would leave a permanent O(h^2) node
        # imprint, so steps containing the crossing time T_x = S_b + kink are
        # split there, with the crossing value extrapolated from the smooth
        # side (the invariants are continuous across the kink).
        cgv = np.full(lvl + 1, cG)
        Ghat = np.empty(new + 1)
        Ghat[: lvl + 1] = Ghat_old
        Ghat[new] = gamma[new]            # head value on the data curve
        t_cross = Sold + kink
        crossing = (t_cross > Tn[lvl] + 1e-14) & (t_cross < Tn[new] - 1e-14)
        if lvl >= 1:
            crossing[lvl] = False         # no history at the newest old node
        for b in np.nonzero(crossing)[0]:
            w_old = pl[b] + ml[b]
            if lvl >= 1 and b <= lvl - 1:
                w_prev = pi[lvl - 1, b] + mu[lvl - 1, b]
                dprev = Tn[lvl] - Tn[lvl - 1]
                w_x = w_old + (t_cross[b] - Tn[lvl]) * (w_old - w_prev) / dprev
            else:
                w_x = w_old
            d1 = t_cross[b] - Tn[lvl]
            d2 = Tn[new] - t_cross[b]
            cgv[b] = 0.5 * d2
            Ghat[b] = Gl[b] + 0.5 * d1 * w_old + 0.5 * (d1 + d2) * w_x
        e_pi = 0.25 * delta_pi * qn[:new] * cgv
        e_mu = 0.25 * delta_mu * qn[:new] * cgv
        a_pi = pi_foot + 0.25 * delta_pi * (r_foot_pi
                                            + qn[:new] * Ghat[:new] + fn[:new])

        for corrector in range(2):
            a_mu = np.empty(new)
            a_mu[1:] = mu_foot[1:] + 0.25 * delta_mu[1:] * (
                r_foot_mu[1:] + qn[1:new] * Ghat[1:new] + fn[1:new])
            # solve the 2x2 node systems for b = 1..new-1
            det = 1.0 - e_pi - e_mu
            pi_new = np.empty(new + 1)
            mu_new = np.empty(new + 1)
            pi_new[1:new] = ((1.0 - e_mu[1:]) * a_pi[1:]
                             + e_pi[1:] * a_mu[1:]) / det[1:]
            mu_new[1:new] = (e_mu[1:] * a_pi[1:]
                             + (1.0 - e_pi[1:]) * a_mu[1:]) / det[1:]
            # fixed-edge node: pi from its characteristic, mu from the
            # boundary relation
            if kind == "robin":
                # pi0 = a0 + e0 (pi0 + mu0); pi0 - mu0 = k (Ghat0 + cG(pi0+mu0))
                e0 = e_pi[0]
                kcg = kappa * cgv[0]
                A = np.array([[1.0 - e0, -e0],
                              [1.0 - kcg, -1.0 - kcg]])
                bvec = np.array([a_pi[0], kappa * Ghat[0]])
                pi_new[0], mu_new[0] = np.linalg.solve(A, bvec)
            else:
                # G = 0 on the edge, so the head G source term vanishes
                pi_new[0] = pi_foot[0] + 0.25 * delta_pi[0] * (r_foot_pi[0]
                                                               + fn[0])
                mu_new[0] = -pi_new[0]
            # moving node
            pi_new[new] = pi_data[new]
            if mu_data is not None:
                mu_new[new] = mu_data[new]
            else:
                r_prev = q[lvl, lvl] * gamma[lvl] + f[lvl, lvl]
                r_here = qn[new] * gamma[new] + fn[new]
                mu_new[new] = mu[lvl, lvl] + 0.25 * dT * (r_prev + r_here)
            if edge_nodes.size == 0:
                break
            # corrector: refresh edge-crossing feet with the new edge value
            g0_new = Ghat[0] + cgv[0] * (pi_new[0] + mu_new[0])
            r0_new = qn[0] * g0_new + fn[0]
            for b in edge_nodes:
                w_t = 1.0 - delta_mu[b] / dT      # crossing-time weight
                mu_foot[b] = mu[lvl, 0] + w_t * (mu_new[0] - mu[lvl, 0])
                r_foot_mu[b] = Rl[0] + w_t * (r0_new - Rl[0])

        pi[new, : new + 1] = pi_new
        mu[new, : new + 1] = mu_new
        G[new, : lvl + 1] = (Ghat[: lvl + 1]
                             + cgv * (pi_new[: lvl + 1] + mu_new[: lvl + 1]))
        G[new, new] = gamma[new]
    return G


class _ParabolicFamily:
    """Shared data for one kernel family (controller or observer side)."""

    def __init__(self, spec, mu, grid, side):
        self.spec = spec
        self.mu = mu
        self.grid = grid
        self.side = side                      # "controller" | "observer"
        self.nm = spec.n_minus
        z = grid.nodes
        self.z = z
        K = grid.n_points - 1
        self.K = K
        par = spec.parabolic

        self.theta = np.column_stack([t(z) for t in par.theta])        # (n, nm)
        self.dtheta = np.column_stack([t.derivative("z", 1)(z) for t in par.theta])
        self.ddtheta = np.column_stack([t.derivative("z", 2)(z) for t in par.theta])
        self.q0 = np.diag(par.Q0).copy()
        self.Fz = par.F(z)                                             # (n, nm, nm)

        # characteristic coordinate u_i(z) = int_0^z theta_i^{-1/2}
        self.u = np.column_stack([
            _fine_table(lambda s, t=par.theta[i]: np.asarray(t(s)) ** -0.5, z)
            for i in range(self.nm)])
        self.rho = self.theta ** 0.25                                  # rho_i(z)
        self.sigma = self.theta ** -0.75                               # sigma_j(zeta)
        # zero-order coefficient splits as c(u, v) = cpart_i(z) - cpart_j(zeta)
        self.cpart = 0.25 * (self.ddtheta - 0.75 * self.dtheta**2 / self.theta)

        # diagonal trace of the i = i components:
        # 2 th T' + th' T = -(F_ii + mu)  =>  T = (sqrt(th(0)) q - I(z)) / sqrt(th)
        self.trace = np.empty((K + 1, self.nm))
        for i in range(self.nm):
            th = par.theta[i]
            integ = _fine_table(
                lambda s, i=i, th=th: (par.F.entries[i][i](s) + mu)
                / (2.0 * np.sqrt(th(s))), z)
            self.trace[:, i] = (np.sqrt(self.theta[0, i]) * self.q0[i] - integ) \
                / np.sqrt(self.theta[:, i])

        self.kappa = (np.sqrt(self.theta[0]) * self.q0
                      - self.dtheta[0] / (4.0 * np.sqrt(self.theta[0])))

    def gamma_G(self, i, j):
        """Dirichlet data along the diagonal image, in the G variable."""
        if i != j:
            return np.zeros(self.K + 1)
        return self.trace[:, i] * np.sqrt(self.theta[:, i])

    def slope_G(self, i, j):
        """(dG/du, dG/dv) along the diagonal for i != j (Cauchy data)."""
        th_i, th_j = self.theta[:, i], self.theta[:, j]
        fij = self.Fz[:, i, j]
        den = th_i - th_j
        gu = -fij * th_i**0.25 * th_j**0.75 / den
        gv = fij * th_i**-0.25 * th_j**1.25 / den
        return gu, gv

    def goursat_pi(self, i):
        """dG/dxi along the characteristic diagonal of the i = i component.

        The trace ODE collapses to the exact tangential derivative
        dG/du = -(F_ii + mu)/2, so pi = dG/dxi is half of that.
        """
        return -(self.Fz[:, i, i] + self.mu) / 4.0

    def scale(self, i, j):
        """(rho_i(z_a) sigma_j(zeta_b)) on the full lattice."""
        return self.rho[:, i][:, None] * self.sigma[:, j][None, :]

    def source_matrix(self, P):
        """[P(F(zeta)+mu I)]_ij or -[(F(z)+mu I) Pbar]_ij on the lattice."""
        n = self.nm
        Fmu = self.Fz + self.mu * np.eye(n)[None, :, :]
        if self.side == "controller":
            return np.einsum("ikab,bkj->ijab", P, Fmu)
        return -np.einsum("aik,kjab->ijab", Fmu, P)

    def march_all(self, P_prev):
        """One successive-approximation sweep; returns the new kernel array."""
        K, nm = self.K, self.nm
        S = self.source_matrix(P_prev)
        P_new = np.zeros_like(P_prev)
        lower = self.side == "controller"
        for i in range(nm):
            for j in range(nm):
                stilde = S[i, j] / self.scale(i, j)
                cgrid = self.cpart[:, i][:, None] - self.cpart[:, j][None, :]
                G = self._march_one(i, j, stilde, cgrid)
                P_new[i, j] = G * self.scale(i, j)
                if lower:
                    P_new[i, j][np.triu_indices(K + 1, 1)] = 0.0
                else:
                    P_new[i, j][np.tril_indices(K + 1, -1)] = 0.0
        return P_new

    def _march_one(self, i, j, stilde, cgrid):
        """Dispatch one component to the canonical box march and map back.

        Modes (march direction chosen so the diagonal is supersonic in the
        canonical frame): controller i<=j along +u, i>j along -v; observer
        i>=j along +v, i<j along -u.  Space/time reversals only reindex the
        arrays; the wave operator is invariant.
        """
        K = self.K
        ui, vj = self.u[:, i], self.u[:, j]
        gamma = self.gamma_G(i, j)
        if i != j:
            gu, gv = self.slope_G(i, j)
        lower = self.side == "controller"

        if lower and i <= j:                       # time +u, space v
            Tn, Sn = ui, vj
            q, f = -cgrid, stilde
            if i == j:
                pi_d, mu_d = self.goursat_pi(i), None
            else:
                pi_d, mu_d = 0.5 * (gu + gv), 0.5 * (gu - gv)
            out = _box_march(Tn, Sn, gamma, pi_d, mu_d,
                             ("robin", self.kappa[j]), q, f)
            return out
        if lower:                                  # i > j: time -v, space -u
            Tn = -vj[::-1]
            Sn = -ui[::-1]
            q = cgrid[::-1, ::-1].T
            f = -stilde[::-1, ::-1].T
            gt, gs = -gv[::-1], -gu[::-1]
            pi_d, mu_d = 0.5 * (gt + gs), 0.5 * (gt - gs)
            out = _box_march(Tn, Sn, gamma[::-1], pi_d, mu_d,
                             ("dirichlet0", 0.0), q, f)
            return out.T[::-1, ::-1]
        if i >= j:                                 # observer: time +v, space u
            Tn, Sn = vj, ui
            q, f = cgrid.T, -stilde.T
            if i == j:
                pi_d, mu_d = self.goursat_pi(i), None
            else:
                pi_d, mu_d = 0.5 * (gv + gu), 0.5 * (gv - gu)
            out = _box_march(Tn, Sn, gamma, pi_d, mu_d,
                             ("robin", self.kappa[i]), q, f)
            return out.T
        # observer i < j: time -u, space -v
        Tn = -ui[::-1]
        Sn = -vj[::-1]
        q = -cgrid[::-1, ::-1]
        f = stilde[::-1, ::-1]
        gt, gs = -gu[::-1], -gv[::-1]
        pi_d, mu_d = 0.5 * (gt + gs), 0.5 * (gt - gs)
        out = _box_march(Tn, Sn, gamma[::-1], pi_d, mu_d,
                         ("dirichlet0", 0.0), q, f)
        return out[::-1, ::-1]


def _solve_family(spec, mu, grid, side, tol=1e-10, max_iter=200):
    fam = _ParabolicFamily(spec, mu, grid, side)
    nm, K = fam.nm, fam.K
    P = np.zeros((nm, nm, K + 1, K + 1))
    update = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        P_new = fam.march_all(P)
        update = float(np.max(np.abs(P_new - P)))
        P = P_new
        if update < tol:
            break
    else:
        raise RuntimeError(
            f"parabolic {side} kernel did not converge: last update {update:.3e}")
    return fam, P, KernelSolveReport(iterations=iterations, final_update=update)


def _read_target_controller(fam, P):
    """Ft0 (strictly lower) from the zeta = 0 relation, rows i > j."""
    nm, K = fam.nm, fam.K
    h = fam.grid.h
    F0 = np.zeros((K + 1, nm, nm))
    th0 = fam.theta[0]
    for i in range(nm):
        for j in range(i):
            ptheta = P[i, j] * fam.theta[:, j][None, :]
            der = np.empty(K + 1)
            der[2:] = _one_sided_first(
                [ptheta[2:, 0], ptheta[2:, 1], ptheta[2:, 2]], (h, h))
            der[1] = (ptheta[1, 1] - ptheta[1, 0]) / h
            val = P[i, j][:, 0]
            F0[1:, i, j] = val[1:] * th0[j] * fam.q0[j] - der[1:]
            F0[0, i, j] = 2.0 * F0[1, i, j] - F0[2, i, j]
    return F0


def _read_target_observer(fam, P):
    """Fb0 (strictly upper) from the z = 0 relation, rows i < j."""
    nm, K = fam.nm, fam.K
    h = fam.grid.h
    F0 = np.zeros((K + 1, nm, nm))
    for i in range(nm):
        for j in range(i + 1, nm):
            pij = P[i, j]
            der = np.empty(K + 1)
            der[: K - 1] = _one_sided_first(
                [pij[0, : K - 1], pij[1, 1:K], pij[2, 2:]], (h, h))
            der[K - 1] = (pij[1, K - 1] - pij[0, K - 1]) / h
            F0[: K, i, j] = fam.q0[i] * pij[0, : K] - der[: K]
            F0[K, i, j] = 2.0 * F0[K - 1, i, j] - F0[K - 2, i, j]
    return F0


def _identity_checks(spec, fam, P, report):
    grid = fam.grid
    diag = np.array([P[:, :, a, a] for a in range(grid.n_points)])
    theta_d = fam.theta
    comm = np.einsum("aij,aj->aij", diag, theta_d) - np.einsum(
        "ai,aij->aij", theta_d, diag)
    report["commutation_sup"] = float(np.max(np.abs(comm)))
    report["corner_vs_Q0"] = float(np.max(np.abs(diag[0] - spec.parabolic.Q0)))


def solve_parabolic_controller_kernel(spec, mu_c, grid):
    """Solve for P on the lower triangle; returns (P, Ft0, report)."""
    fam, P, report = _solve_family(spec, mu_c, grid, "controller")
    F0 = _read_target_controller(fam, P)
    kern = Kernel2D("lower", grid, np.moveaxis(P, (0, 1), (2, 3)))
    _identity_checks(spec, fam, P, report)
    return kern, GridFunction(grid, F0), report


def solve_parabolic_observer_kernel(spec, mu_o, grid):
    """Solve for Pbar on the upper triangle; returns (Pbar, Fb0, report)."""
    fam, P, report = _solve_family(spec, mu_o, grid, "observer")
    F0 = _read_target_observer(fam, P)
    kern = Kernel2D("upper", grid, np.moveaxis(P, (0, 1), (2, 3)))
    _identity_checks(spec, fam, P, report)
    return kern, GridFunction(grid, F0), report


def parabolic_kernel_residual(spec, kernel: Kernel2D, mu, side="controller",
                              margin=3, smear=2.0):
    """Sup-norm of the centered-FD residual of the kernel PDE at interior
    nodes.

    The kernels are only piecewise C^2: curvature jumps travel along the
    characteristics u_i(z) +- v_j(zeta) = const emanating from the corners
    (0,0) and (1,1), so stencils within ``margin`` nodes of those lines (or
    of the domain boundary) are skipped.
    """
    grid = kernel.grid
    z = grid.nodes
    h = grid.h
    nm = spec.n_minus
    theta = np.column_stack([t(z) for t in spec.parabolic.theta])
    Fz = spec.parabolic.F(z)
    Fmu = Fz + mu * np.eye(nm)[None, :, :]
    uu = np.column_stack([
        _fine_table(lambda s, t=spec.parabolic.theta[i]: np.asarray(t(s)) ** -0.5, z)
        for i in range(nm)])
    P = np.moveaxis(kernel.values, (2, 3), (0, 1))      # (nm, nm, a, b)
    K = grid.n_points - 1
    ia, ib = np.meshgrid(np.arange(K + 1), np.arange(K + 1), indexing="ij")
    if side == "controller":
        interior = (ib + margin <= ia) & (ia <= K - margin) & (ib >= margin)
    else:
        interior = (ib - margin >= ia) & (ib <= K - margin) & (ia >= margin)
    worst = 0.0
    for i in range(nm):
        for j in range(nm):
            ui = uu[:, i][:, None]
            vj = uu[:, j][None, :]
            scale = 0.5 * (1.0 / np.sqrt(theta[:, i])[:, None]
                           + 1.0 / np.sqrt(theta[:, j])[None, :])
            # transported kinks are smeared over O(sqrt(n)) nodes by the
            # interpolating march, a band of physical width O(sqrt(h))
            width = scale * (2.0 * margin * h + smear * np.sqrt(h))
            good = interior.copy()
            for expr, consts in (
                    (ui - vj, (0.0, uu[-1, i] - uu[-1, j])),
                    (ui + vj, (uu[-1, i] + uu[-1, j],))):
                for c in consts:
                    good &= np.abs(expr - c) > width
            pij = P[i, j]
            pth = pij * theta[:, j][None, :]
            if side == "controller":
                rhs = np.einsum("kab,bk->ab", P[i], Fmu[:, :, j])
            else:
                rhs = -np.einsum("ak,kab->ab", Fmu[:, i, :], P[:, j])
            res = np.zeros((K + 1, K + 1))
            res[1:-1, 1:-1] = (
                theta[1:-1, i][:, None]
                * (pij[2:, 1:-1] - 2.0 * pij[1:-1, 1:-1] + pij[:-2, 1:-1]) / h**2
                - (pth[1:-1, 2:] - 2.0 * pth[1:-1, 1:-1] + pth[1:-1, :-2]) / h**2
                - rhs[1:-1, 1:-1])
            if np.any(good):
                worst = max(worst, float(np.max(np.abs(res[good]))))
    return worst
