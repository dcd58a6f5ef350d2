"""Canonical dynamics: Legendre map, constraints, Hamilton equations, RK4.

Phase-space point: four one-form fields theta^A and four two-form fields
p_A on the torus.  The Hamiltonian is the sum of the smeared scalar and
vector constraints, H = S(N) + V(Nvec), so the equations of motion are
assembled from the constraint gradients:

    thetadot^A = N * p^A + E^A,          E^A = d(N xi^A) + L_N theta^A
    pdot_A     = -(dS/dtheta^A)(M=N) + L_N p_A

Because the gradients are the exact gradients of the discretized
functionals, the discrete bracket of two smeared constraints is computed
consistently, and the closure residuals measured here converge away at
the stencil order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from teleham.exterior import MetricAtPoint, contract_components, wedge_components
from teleham.fields import (
    BandlimitedForm,
    PeriodicGrid,
    d_components,
    integrate_components,
    lie_components,
    partial_derivative,
)
from teleham.teleparallel import ETA, ETA_INV, flat_cotetrad
from teleham.variational import (
    CotetradContext,
    FunctionalGradient,
    cotetrad_context,
    dS1_dtheta,
    dS1_dp,
    dS2_dtheta,
    dS2_dp,
    dS3_dtheta,
    poisson_bracket,
    scalar_gradient,
    vector_gradient,
)

__all__ = [
    "PhaseState",
    "Multipliers",
    "StateInvalidError",
    "flat_state",
    "random_state",
    "e_form",
    "legendre",
    "inverse_legendre",
    "scalar_constraint",
    "vector_constraint",
    "hamiltonian",
    "hamiltonian_direct",
    "hamilton_rhs",
    "cfl_limit",
    "step_rk4",
    "evolve",
    "EvolutionRecord",
    "lie_bracket_vectors",
    "gradient_smearing",
    "bracket_closure",
    "project_constraints",
    "constrained_state",
    "constraint_sup_norms",
]


class StateInvalidError(RuntimeError):
    """Raised when the induced metric loses positive definiteness mid-run."""


@dataclass(frozen=True)
class PhaseState:
    """Canonical pair (theta^A, p_A); components (4,)+grid+(3,) and (4,)+grid+(3,3)."""

    grid: PeriodicGrid
    theta: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if theta.shape != (4,) + self.grid.shape + (3,):
            raise ValueError(f"theta shape {theta.shape} invalid")
        if p.shape != (4,) + self.grid.shape + (3, 3):
            raise ValueError(f"p shape {p.shape} invalid")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "p", p)

    def context(self) -> CotetradContext:
        return cotetrad_context(self.theta, self.grid)

    def axpy(self, c: float, other: "PhaseState") -> "PhaseState":
        return PhaseState(self.grid, self.theta + c * other.theta, self.p + c * other.p)


@dataclass(frozen=True)
class Multipliers:
    """Lapse field N > 0 and shift vector field."""

    lapse: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        lapse = np.asarray(self.lapse, dtype=float)
        if np.any(lapse <= 0.0):
            raise ValueError("lapse must be positive everywhere")
        object.__setattr__(self, "lapse", lapse)
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=float))


def flat_state(grid: PeriodicGrid) -> PhaseState:
    return PhaseState(grid, flat_cotetrad(grid).components, np.zeros((4,) + grid.shape + (3, 3)))


def random_state(grid: PeriodicGrid, amplitude: float, seed, max_mode: int = 2) -> PhaseState:
    """Flat cotetrad plus band-limited perturbations of sup norm <= amplitude."""
    from teleham.fields import half_lattice_modes

    rng = np.random.default_rng(seed)
    per_mode = amplitude / len(half_lattice_modes(max_mode))
    theta = flat_cotetrad(grid).components.copy()
    for A in range(4):
        theta[A] += BandlimitedForm.random(1, max_mode, per_mode, rng).sample(grid).components
    p = np.stack([BandlimitedForm.random(2, max_mode, per_mode, rng).sample(grid).components
                  for _ in range(4)])
    return PhaseState(grid, theta, p)


# ---------------------------------------------------------------------------
# Legendre transform


def e_form(mult: Multipliers, ctx: CotetradContext) -> np.ndarray:
    """E^A = d(N xi^A) + L_N theta^A (four one-form fields)."""
    scalars = mult.lapse[None] * ctx.xi
    return d_components(scalars, 0, ctx.grid) + lie_components(mult.shift, ctx.theta, 1, ctx.grid)


def legendre(ctx: CotetradContext, theta_dot: np.ndarray, mult: Multipliers) -> np.ndarray:
    """p_A = (1/N) * star(thetadot_A - E_A)."""
    e_up = e_form(mult, ctx)
    diff_low = np.einsum("AB,B...->A...", ETA, theta_dot - e_up)
    return ctx.metric.hodge(diff_low, 1) / mult.lapse[None, ..., None, None]


def inverse_legendre(ctx: CotetradContext, p: np.ndarray, mult: Multipliers) -> np.ndarray:
    """thetadot^A = N * star(p^A) + E^A."""
    p_up = np.einsum("AB,B...->A...", ETA_INV, p)
    return mult.lapse[None, ..., None] * ctx.metric.hodge(p_up, 2) + e_form(mult, ctx)


# ---------------------------------------------------------------------------
# constraints and Hamiltonian


def _scalar_density(ctx: CotetradContext, p: np.ndarray,
                    dtheta: np.ndarray | None = None, dp: np.ndarray | None = None) -> np.ndarray:
    dtheta = d_components(ctx.theta, 1, ctx.grid) if dtheta is None else dtheta
    dp = d_components(p, 2, ctx.grid) if dp is None else dp
    p_up = np.einsum("AB,B...->A...", ETA_INV, p)
    dtheta_low = np.einsum("AB,B...->A...", ETA, dtheta)
    dens = 0.5 * wedge_components(p_up, 2, ctx.metric.hodge(p, 2), 1).sum(axis=0)
    dens = dens - np.einsum("A...,A...->...", ctx.xi[(...,) + (None,) * 3], dp)
    dens = dens + 0.5 * wedge_components(dtheta, 2, ctx.metric.hodge(dtheta_low, 2), 1).sum(axis=0)
    return dens


def _vector_density(ctx: CotetradContext, p: np.ndarray, shift: np.ndarray,
                    dtheta: np.ndarray | None = None, dp: np.ndarray | None = None) -> np.ndarray:
    dtheta = d_components(ctx.theta, 1, ctx.grid) if dtheta is None else dtheta
    dp = d_components(p, 2, ctx.grid) if dp is None else dp
    t1 = wedge_components(dtheta, 2, contract_components(shift, p, 2), 1).sum(axis=0)
    t2 = contract_components(shift, ctx.theta, 1)[..., None, None, None] * dp
    return -t1 - np.einsum("A...->...", t2)


def scalar_constraint(state: PhaseState, M: np.ndarray,
                      ctx: CotetradContext | None = None) -> tuple[float, np.ndarray]:
    """Smeared scalar constraint S(M) and its density 3-form."""
    ctx = state.context() if ctx is None else ctx
    dens = _scalar_density(ctx, state.p)
    value = float(integrate_components(np.asarray(M, float)[..., None, None, None] * dens, state.grid))
    return value, dens


def vector_constraint(state: PhaseState, Mvec: np.ndarray,
                      ctx: CotetradContext | None = None) -> tuple[float, np.ndarray]:
    """Smeared vector constraint V(Mvec) and its density 3-form (shift contracted)."""
    ctx = state.context() if ctx is None else ctx
    dens = _vector_density(ctx, state.p, np.asarray(Mvec, float))
    return float(integrate_components(dens, state.grid)), dens


def vector_constraint_directions(state: PhaseState, ctx: CotetradContext | None = None) -> np.ndarray:
    """Density scalars of the vector constraint for the three coordinate directions."""
    ctx = state.context() if ctx is None else ctx
    out = np.zeros((3,) + state.grid.shape)
    for i in range(3):
        e = np.zeros(state.grid.shape + (3,))
        e[..., i] = 1.0
        out[i] = _vector_density(ctx, state.p, e)[..., 0, 1, 2]
    return out


def hamiltonian(state: PhaseState, mult: Multipliers, ctx: CotetradContext | None = None) -> float:
    """H = S(N) + V(Nvec)."""
    ctx = state.context() if ctx is None else ctx
    s, _ = scalar_constraint(state, mult.lapse, ctx)
    v, _ = vector_constraint(state, mult.shift, ctx)
    return s + v


def hamiltonian_direct(state: PhaseState, mult: Multipliers, ctx: CotetradContext | None = None) -> float:
    """Single-pass quadrature of the assembled Hamiltonian density."""
    ctx = state.context() if ctx is None else ctx
    dens = mult.lapse[..., None, None, None] * _scalar_density(ctx, state.p)
    dens = dens + _vector_density(ctx, state.p, mult.shift)
    return float(integrate_components(dens, state.grid))


def hamilton_rhs(state: PhaseState, mult: Multipliers,
                 ctx: CotetradContext | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(thetadot, pdot) from the constraint gradients at (M, Mvec) = (N, Nvec)."""
    ctx = state.context() if ctx is None else ctx
    theta_dot = inverse_legendre(ctx, state.p, mult)
    dtheta = d_components(ctx.theta, 1, ctx.grid)
    dp = d_components(state.p, 2, ctx.grid)
    d_th = (dS1_dtheta(ctx, state.p, mult.lapse)
            + dS2_dtheta(ctx, dp, mult.lapse)
            + dS3_dtheta(ctx, dtheta, mult.lapse))
    p_dot = -d_th + lie_components(mult.shift, state.p, 2, state.grid)
    return theta_dot, p_dot


def cfl_limit(grid: PeriodicGrid, mult: Multipliers) -> float:
    return 0.5 * min(grid.spacing) / float(np.max(mult.lapse))


def step_rk4(state: PhaseState, mult: Multipliers, dt: float) -> PhaseState:
    """One classical Runge-Kutta step with static multipliers."""
    k1t, k1p = hamilton_rhs(state, mult)
    s2 = PhaseState(state.grid, state.theta + 0.5 * dt * k1t, state.p + 0.5 * dt * k1p)
    k2t, k2p = hamilton_rhs(s2, mult)
    s3 = PhaseState(state.grid, state.theta + 0.5 * dt * k2t, state.p + 0.5 * dt * k2p)
    k3t, k3p = hamilton_rhs(s3, mult)
    s4 = PhaseState(state.grid, state.theta + dt * k3t, state.p + dt * k3p)
    k4t, k4p = hamilton_rhs(s4, mult)
    theta = state.theta + (dt / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    p = state.p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return PhaseState(state.grid, theta, p)


@dataclass(frozen=True)
class EvolutionRecord:
    """Per-step smeared constraint values for a battery of smearings."""

    times: np.ndarray
    scalar_values: np.ndarray   # (steps+1, n_scalar_smearings)
    vector_values: np.ndarray   # (steps+1, n_vector_smearings)
    snapshots: list


def evolve(state: PhaseState, mult: Multipliers, dt: float, steps: int,
           scalar_smearings: list[np.ndarray] | None = None,
           vector_smearings: list[np.ndarray] | None = None,
           snap_every: int = 0, enforce_cfl: bool = True) -> EvolutionRecord:
    """RK4 trajectory with constraint drift monitoring.

    Halts with StateInvalidError when the induced metric stops being
    positive definite; refuses dt beyond the CFL-style guard.
    """
    if enforce_cfl and dt > cfl_limit(state.grid, mult):
        raise ValueError(f"dt={dt} exceeds CFL guard {cfl_limit(state.grid, mult):.6g}")
    Ms = scalar_smearings if scalar_smearings is not None else [np.ones(state.grid.shape)]
    Mvs = vector_smearings if vector_smearings is not None else []
    svals, vvals, snaps = [], [], []

    def record(s: PhaseState, ctx: CotetradContext):
        svals.append([scalar_constraint(s, M, ctx)[0] for M in Ms])
        vvals.append([vector_constraint(s, Mv, ctx)[0] for Mv in Mvs])

    current = state
    try:
        ctx = current.context()
    except ValueError as exc:
        raise StateInvalidError(f"initial state invalid: {exc}") from exc
    record(current, ctx)
    if snap_every:
        snaps.append(current)
    for step in range(1, steps + 1):
        current = step_rk4(current, mult, dt)
        try:
            ctx = current.context()
        except ValueError as exc:
            raise StateInvalidError(f"state invalid after step {step}: {exc}") from exc
        record(current, ctx)
        if snap_every and step % snap_every == 0:
            snaps.append(current)
    times = dt * np.arange(steps + 1)
    return EvolutionRecord(times, np.array(svals), np.array(vvals), snaps)


# ---------------------------------------------------------------------------
# constraint algebra closure


def lie_bracket_vectors(X: np.ndarray, Y: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i with stencil derivatives."""
    gX = np.stack([partial_derivative(X, 4 - j, grid.spacing[j]) for j in range(3)], axis=-2)
    gY = np.stack([partial_derivative(Y, 4 - j, grid.spacing[j]) for j in range(3)], axis=-2)
    return np.einsum("...j,...ji->...i", X, gY) - np.einsum("...j,...ji->...i", Y, gX)


def gradient_smearing(M: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """One-form dM on raw scalar field components."""
    return d_components(np.asarray(M, float), 0, grid)


def bracket_closure(state: PhaseState, M: np.ndarray, Mp: np.ndarray,
                    Mvec: np.ndarray, Mvecp: np.ndarray,
                    frozen_metric: bool = False) -> tuple[float, float, float]:
    """Residuals of the three closure relations under the discrete bracket.

    r1 = {V(Mvec), V(Mvecp)} - V([Mvec, Mvecp])
    r2 = {S(M), S(Mp)} - V(mvec), m = M dMp - Mp dM raised with the state
         inverse metric (with frozen_metric=True a flat inverse metric is
         used instead; that control must spoil convergence)
    r3 = {S(M), V(Mvec)} + S(L_Mvec M)
    """
    grid = state.grid
    ctx = state.context()
    gS_M = scalar_gradient(ctx, state.p, M)
    gS_Mp = scalar_gradient(ctx, state.p, Mp)
    gV_M = vector_gradient(ctx, state.p, Mvec)
    gV_Mp = vector_gradient(ctx, state.p, Mvecp)

    br_vv = poisson_bracket(gV_M, gV_Mp, grid)
    v_of_bracket, _ = vector_constraint(state, lie_bracket_vectors(Mvec, Mvecp, grid), ctx)
    r1 = br_vv - v_of_bracket

    br_ss = poisson_bracket(gS_M, gS_Mp, grid)
    m_low = (np.asarray(M, float)[..., None] * gradient_smearing(Mp, grid)
             - np.asarray(Mp, float)[..., None] * gradient_smearing(M, grid))
    qinv = np.broadcast_to(np.eye(3), grid.shape + (3, 3)) if frozen_metric else ctx.metric.ginv
    m_vec = np.einsum("...ij,...j->...i", qinv, m_low)
    v_of_m, _ = vector_constraint(state, m_vec, ctx)
    r2 = br_ss - v_of_m

    br_sv = poisson_bracket(gS_M, gV_M, grid)
    lie_M = np.einsum("...i,...i->...", np.asarray(Mvec, float), gradient_smearing(M, grid))
    s_of_lie, _ = scalar_constraint(state, lie_M, ctx)
    r3 = br_sv + s_of_lie

    return r1, r2, r3


# ---------------------------------------------------------------------------
# constraint projection (constrained initial data)


def constraint_sup_norms(state: PhaseState, ctx: CotetradContext | None = None) -> tuple[float, float]:
    """Sup norms of the scalar and vector constraint density scalars."""
    ctx = state.context() if ctx is None else ctx
    s = _scalar_density(ctx, state.p)[..., 0, 1, 2]
    v = vector_constraint_directions(state, ctx)
    return float(np.max(np.abs(s))), float(np.max(np.abs(v)))


def _constraint_objective(state: PhaseState) -> tuple[float, FunctionalGradient]:
    """Half the volume-weighted square sum of constraint density scalars and its exact gradient.

    Both constraints are linear in their smearing, so the chain rule turns
    the objective gradient into the constraint gradients smeared with the
    current residual density fields.
    """
    grid = state.grid
    ctx = state.context()
    dtheta = d_components(ctx.theta, 1, grid)
    dp = d_components(state.p, 2, grid)
    s_dens = _scalar_density(ctx, state.p, dtheta, dp)[..., 0, 1, 2]
    v_dens = np.zeros((3,) + grid.shape)
    for i in range(3):
        e = np.zeros(grid.shape + (3,))
        e[..., i] = 1.0
        v_dens[i] = _vector_density(ctx, state.p, e, dtheta, dp)[..., 0, 1, 2]
    vol = grid.cell_volume
    value = 0.5 * vol * (np.sum(s_dens**2) + np.sum(v_dens**2))
    gS = scalar_gradient(ctx, state.p, s_dens, dtheta, dp)
    mvec = np.moveaxis(v_dens, 0, -1)
    gV = vector_gradient(ctx, state.p, mvec)
    grad = FunctionalGradient(gS.d_theta + gV.d_theta, gS.d_p + gV.d_p)
    return value, grad


_PAIRS = [(0, 1), (0, 2), (1, 2)]


def _pack(state: PhaseState) -> np.ndarray:
    p_ind = np.stack([state.p[..., i, j] for i, j in _PAIRS], axis=-1)
    return np.concatenate([state.theta.ravel(), p_ind.ravel()])


def _unpack(x: np.ndarray, grid: PeriodicGrid) -> PhaseState:
    nth = 4 * grid.npoints * 3
    theta = x[:nth].reshape((4,) + grid.shape + (3,))
    p_ind = x[nth:].reshape((4,) + grid.shape + (3,))
    p = np.zeros((4,) + grid.shape + (3, 3))
    for k, (i, j) in enumerate(_PAIRS):
        p[..., i, j] = p_ind[..., k]
        p[..., j, i] = -p_ind[..., k]
    return PhaseState(grid, theta, p)


def _grad_to_dofs(grad: FunctionalGradient, grid: PeriodicGrid) -> np.ndarray:
    from teleham.variational import form_gradient_to_density

    vol = grid.cell_volume
    g_theta = vol * form_gradient_to_density(grad.d_theta, 1)
    dens_p = form_gradient_to_density(grad.d_p, 2)
    g_p = 2.0 * vol * np.stack([dens_p[..., i, j] for i, j in _PAIRS], axis=-1)
    return np.concatenate([g_theta.ravel(), g_p.ravel()])


def _residual_vector(state: PhaseState) -> np.ndarray:
    """Stacked constraint density scalars weighted by sqrt(cell volume)."""
    ctx = state.context()
    dtheta = d_components(ctx.theta, 1, state.grid)
    dp = d_components(state.p, 2, state.grid)
    s = _scalar_density(ctx, state.p, dtheta, dp)[..., 0, 1, 2]
    v = np.zeros((3,) + state.grid.shape)
    for i in range(3):
        e = np.zeros(state.grid.shape + (3,))
        e[..., i] = 1.0
        v[i] = _vector_density(ctx, state.p, e, dtheta, dp)[..., 0, 1, 2]
    w = math.sqrt(state.grid.cell_volume)
    return w * np.concatenate([s.ravel(), v.ravel()])


def project_constraints(state: PhaseState, tol: float = 1e-9, max_rounds: int = 6,
                        inner_iters: int = 60) -> PhaseState:
    """Project onto the constraint surface by matrix-free Gauss-Newton.

    Each round solves the linearized least-squares system with LSMR; the
    forward action of the constraint Jacobian is a central difference, the
    adjoint action is exact (the constraints are linear in their smearing,
    so smearing the analytic gradients with a residual field gives J^T u).
    Deterministic for a deterministic starting state.
    """
    from scipy.sparse.linalg import LinearOperator, lsmr

    grid = state.grid
    vol = grid.cell_volume
    x = _pack(state)
    n = x.size
    r = _residual_vector(_unpack(x, grid))
    best_norm = float(np.linalg.norm(r))
    for _ in range(max_rounds):
        if max(constraint_sup_norms(_unpack(x, grid))) <= tol:
            break
        x0 = x.copy()
        scale = max(1.0, float(np.max(np.abs(x0))))

        def matvec(v):
            step = 1e-6 * scale / max(float(np.max(np.abs(v))), 1e-300)
            rp = _residual_vector(_unpack(x0 + step * v, grid))
            rm = _residual_vector(_unpack(x0 - step * v, grid))
            return (rp - rm) / (2.0 * step)

        def rmatvec(u):
            # J^T u = (1/sqrt(vol)) grad of S(u_s) + V(u_v): the residual is
            # sqrt(vol) * densities while the smeared values carry one volume factor
            s = _unpack(x0, grid)
            ctx = s.context()
            m_scalar = u[: grid.npoints].reshape(grid.shape)
            m_vector = np.moveaxis(u[grid.npoints:].reshape((3,) + grid.shape), 0, -1)
            gS = scalar_gradient(ctx, s.p, m_scalar)
            gV = vector_gradient(ctx, s.p, m_vector)
            grad = FunctionalGradient(gS.d_theta + gV.d_theta, gS.d_p + gV.d_p)
            return _grad_to_dofs(grad, grid) / math.sqrt(vol)

        op = LinearOperator((r.size, n), matvec=matvec, rmatvec=rmatvec, dtype=float)
        delta = lsmr(op, -r, maxiter=inner_iters, atol=1e-12, btol=1e-12)[0]
        # backtracking on the true residual
        step = 1.0
        for _ in range(6):
            cand = x0 + step * delta
            r_new = _residual_vector(_unpack(cand, grid))
            if float(np.linalg.norm(r_new)) < best_norm:
                x, r, best_norm = cand, r_new, float(np.linalg.norm(r_new))
                break
            step *= 0.5
        else:
            break
    return _unpack(x, grid)


def constrained_state(grid: PeriodicGrid, amplitude: float, seed, max_mode: int = 1,
                      tol: float = 1e-9) -> PhaseState:
    """Random band-limited state with closed momenta, projected onto the constraint surface.

    Momenta start as stencil-exact closed two-forms (d of one-form fields),
    which kills the linearized constraint around flat data; the remaining
    quadratic residual is removed by project_constraints.
    """
    from teleham.fields import half_lattice_modes

    rng = np.random.default_rng(seed)
    per_mode = amplitude / len(half_lattice_modes(max_mode))
    theta = flat_cotetrad(grid).components.copy()
    for A in range(4):
        theta[A] += BandlimitedForm.random(1, max_mode, per_mode, rng).sample(grid).components
    p = np.zeros((4,) + grid.shape + (3, 3))
    for A in range(4):
        u = BandlimitedForm.random(1, max_mode, per_mode, rng).sample(grid).components
        p[A] = d_components(u, 1, grid)
    start = PhaseState(grid, theta, p)
    return project_constraints(start, tol=tol)
