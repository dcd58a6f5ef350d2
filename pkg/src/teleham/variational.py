"""Functional-derivative machinery for the cotetrad phase space.

The configuration variable is a quadruple of one-forms theta^A on the
3-torus; the conjugate momentum is a quadruple of two-forms p_A.  For a
functional F, delta F = int dbeta ^ (dF/dbeta), so dF/dtheta^A is a
two-form field and dF/dp_A a one-form field.

Central kernel: the cotetrad variation of the spatial Hodge operator,

    alpha ^ star'_A beta = tv^B _| ( eta_AB alpha ^ * beta
                                     - (tv_A _| alpha) ^ * (tv_B _| beta)
                                     - (tv_B _| alpha) ^ * (tv_A _| beta) ),

with tv_A = q^{ij} theta_{A j} d_i.  It is the exact pointwise derivative
of the star pairing with respect to theta, so every gradient assembled
from it is the exact gradient of the discretized functional (stencil
derivative terms enter through exact discrete summation by parts); the
finite-difference harness below checks this directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from teleham.exterior import (
    MetricAtPoint,
    contract_components,
    hodge_components,
    levi_civita,
    raise_components,
    wedge_components,
)
from teleham.fields import PeriodicGrid, d_components, integrate_components, lie_components
from teleham.teleparallel import ETA, ETA_INV, EPS4, induced_metric, normal_components

__all__ = [
    "CotetradContext",
    "FunctionalGradient",
    "cotetrad_context",
    "theta_vector_fields",
    "star_variation",
    "star_variation_form",
    "star_variation_density",
    "dS1_dtheta",
    "dS1_dp",
    "dS2_dtheta",
    "dS2_dp",
    "dS3_dtheta",
    "scalar_gradient",
    "vector_gradient",
    "s1_value",
    "s2_value",
    "s3_value",
    "lie_star_residual",
    "form_gradient_to_density",
    "density_to_form_gradient",
    "momentum_density",
    "momentum_from_density",
    "poisson_bracket",
    "pairing",
    "directional_derivative_check",
    "sampled_density_check",
    "sqrt_det_derivative_check",
]

_EPS3 = levi_civita(3)


def theta_vector_fields(theta: np.ndarray, metric: MetricAtPoint) -> tuple[np.ndarray, np.ndarray]:
    """Vector fields tv_A = q^{ij} theta_{A j} d_i and their eta-raised partners."""
    theta_low = np.einsum("AB,B...j->A...j", ETA, theta)
    tv_low = np.einsum("...ij,A...j->A...i", metric.ginv, theta_low)
    tv_up = np.einsum("AB,B...i->A...i", ETA_INV, tv_low)
    return tv_low, tv_up


@dataclass(frozen=True)
class CotetradContext:
    """Per-state geometric data reused by every gradient evaluation."""

    grid: PeriodicGrid
    theta: np.ndarray
    metric: MetricAtPoint
    xi: np.ndarray
    tv_low: np.ndarray
    tv_up: np.ndarray


def cotetrad_context(theta: np.ndarray, grid: PeriodicGrid) -> CotetradContext:
    metric = induced_metric(theta)
    xi = normal_components(theta, metric)
    tv_low, tv_up = theta_vector_fields(theta, metric)
    return CotetradContext(grid, np.asarray(theta, dtype=float), metric, xi, tv_low, tv_up)


def star_variation_form(alpha: np.ndarray, beta: np.ndarray, k: int, ctx: CotetradContext,
                        quad: bool = False) -> np.ndarray:
    """alpha ^ star'_A beta assembled literally from contractions, wedges and stars.

    With quad=True, alpha and beta carry a paired leading internal axis
    that is summed, which is how the kernel appears in the constraint
    gradients.  For k = 0 the contraction terms vanish identically.
    """
    metric = ctx.metric
    if not quad:
        alpha = np.asarray(alpha, dtype=float)[None]
        beta = np.asarray(beta, dtype=float)[None]
    base = wedge_components(alpha, k, metric.hodge(beta, k), 3 - k).sum(axis=0)
    if k > 0:
        ca = [contract_components(ctx.tv_low[A], alpha, k) for A in range(4)]
        scb = [metric.hodge(contract_components(ctx.tv_low[B], beta, k), k - 1) for B in range(4)]
    out = np.zeros((4,) + base.shape[:-3] + (3, 3))
    for A in range(4):
        for B in range(4):
            inner = ETA[A, B] * base
            if k > 0:
                inner = inner - wedge_components(ca[A], k - 1, scb[B], 4 - k).sum(axis=0)
                inner = inner - wedge_components(ca[B], k - 1, scb[A], 4 - k).sum(axis=0)
            out[A] += contract_components(ctx.tv_up[B], inner, 3)
    return out


def star_variation(alpha: np.ndarray, beta: np.ndarray, k: int, ctx: CotetradContext,
                   quad: bool = False) -> np.ndarray:
    """alpha ^ star'_A beta for A = 0..3, as a stack of two-form fields.

    Numerically identical to star_variation_form (the tests pin the two
    routes against each other) but assembled from scalar products of the
    contracted forms, which is much cheaper on large grids.
    """
    metric = ctx.metric
    if not quad:
        alpha = np.asarray(alpha, dtype=float)[None]
        beta = np.asarray(beta, dtype=float)[None]
    ginv = metric.ginv
    batch = metric.g.shape[:-2]
    idx = "abc"[:k]
    if k == 0:
        sp = (np.asarray(alpha, float) * np.asarray(beta, float)).sum(axis=0)
    else:
        ar = raise_components(alpha, k, ginv)
        sp = np.einsum(f"P...{idx},P...{idx}->...", ar, beta) / math.factorial(k)
    core = ETA.reshape((4, 4) + (1,) * len(batch)) * sp[None, None]
    if k > 0:
        sub = "abc"[1:k]
        ca = np.einsum(f"X...z,P...z{sub}->XP...{sub}", ctx.tv_low, alpha)
        cb = np.einsum(f"X...z,P...z{sub}->XP...{sub}", ctx.tv_low, beta)
        car = raise_components(ca, k - 1, ginv)
        fac = math.factorial(k - 1)
        core = core - np.einsum(f"BP...{sub},AP...{sub}->AB...", car, cb) / fac
        core = core - np.einsum(f"AP...{sub},BP...{sub}->AB...", car, cb) / fac
    dens = np.einsum("AB...,B...i->A...i", core, ctx.tv_up) * metric.sqrt_abs_det[..., None]
    return density_to_form_gradient(dens, 1)


def star_variation_density(alpha: np.ndarray, beta: np.ndarray, k: int, ctx: CotetradContext,
                           quad: bool = False) -> np.ndarray:
    """Weight-1 density route to the same derivative, used as an independent oracle.

    dF~/dtheta^A_i = ( <a|b> eta_AB - <tv_B _| a | tv_A _| b>
                       - <tv_A _| a | tv_B _| b> ) tv^{B i} sqrt(det q),
    summed over the paired internal axis when quad is set.
    """
    from teleham.exterior import scalar_product_components

    metric = ctx.metric
    if not quad:
        alpha = np.asarray(alpha, dtype=float)[None]
        beta = np.asarray(beta, dtype=float)[None]
    ginv = metric.ginv
    out = np.zeros((4,) + metric.g.shape[:-2] + (3,))
    for A in range(4):
        for B in range(4):
            core = ETA[A, B] * scalar_product_components(alpha, beta, k, ginv).sum(axis=0)
            if k > 0:
                ca_B = contract_components(ctx.tv_low[B], alpha, k)
                cb_A = contract_components(ctx.tv_low[A], beta, k)
                ca_A = contract_components(ctx.tv_low[A], alpha, k)
                cb_B = contract_components(ctx.tv_low[B], beta, k)
                core = core - scalar_product_components(ca_B, cb_A, k - 1, ginv).sum(axis=0)
                core = core - scalar_product_components(ca_A, cb_B, k - 1, ginv).sum(axis=0)
            out[A] += core[..., None] * ctx.tv_up[B]
    return out * metric.sqrt_abs_det[..., None]


# ---------------------------------------------------------------------------
# the five nonzero constraint-part gradients


def _smear(M: np.ndarray, comps: np.ndarray, extra_axes: int) -> np.ndarray:
    return np.asarray(M, dtype=float)[(None, ...) + (None,) * extra_axes] * comps


def dS1_dtheta(ctx: CotetradContext, p: np.ndarray, M: np.ndarray) -> np.ndarray:
    p_up = np.einsum("AB,B...->A...", ETA_INV, p)
    return _smear(0.5 * np.asarray(M, float), star_variation(p, p_up, 2, ctx, quad=True), 2)


def dS1_dp(ctx: CotetradContext, p: np.ndarray, M: np.ndarray) -> np.ndarray:
    p_up = np.einsum("AB,B...->A...", ETA_INV, p)
    return _smear(M, ctx.metric.hodge(p_up, 2), 1)


def dS2_dtheta(ctx: CotetradContext, dp: np.ndarray, M: np.ndarray) -> np.ndarray:
    star_dp = ctx.metric.hodge(dp, 3)
    eps_d = np.einsum("DE,EBCA->DBCA", ETA_INV, EPS4)
    # (1/2) (star dp_D) eps^D_{BCA} (theta^B ^ theta^C); eps kills the explicit wedge factor
    x = np.einsum("DBCA,D...->BCA...", eps_d, star_dp)
    u = np.einsum("BCA...,B...i->CA...i", x, ctx.theta)
    term1 = np.einsum("CA...i,C...j->A...ij", u, ctx.theta)
    w_up = _triple_wedge_dual(ctx.theta)
    term2 = star_variation(dp, w_up, 3, ctx, quad=True)
    return _smear(M, term1 + term2, 2)


def _triple_wedge_dual(theta: np.ndarray) -> np.ndarray:
    """W^B = (1/3!) eps^B_{CDE} theta^C ^ theta^D ^ theta^E (three-form quadruple)."""
    eps_b = np.einsum("BF,FCDE->BCDE", ETA_INV, EPS4)
    t1 = np.einsum("BCDE,C...i->BDE...i", eps_b, theta)
    t2 = np.einsum("BDE...i,D...j->BE...ij", t1, theta)
    return np.einsum("BE...ij,E...k->B...ijk", t2, theta)


def dS2_dp(ctx: CotetradContext, M: np.ndarray) -> np.ndarray:
    return d_components(np.asarray(M, float)[None] * ctx.xi, 0, ctx.grid)


def dS3_dtheta(ctx: CotetradContext, dtheta: np.ndarray, M: np.ndarray) -> np.ndarray:
    dtheta_low = np.einsum("AB,B...->A...", ETA, dtheta)
    term1 = d_components(_smear(M, ctx.metric.hodge(dtheta_low, 2), 1), 1, ctx.grid)
    term2 = _smear(0.5 * np.asarray(M, float), star_variation(dtheta, dtheta_low, 2, ctx, quad=True), 2)
    return term1 + term2


@dataclass(frozen=True)
class FunctionalGradient:
    """Gradient pair (dF/dtheta^A as two-forms, dF/dp_A as one-forms)."""

    d_theta: np.ndarray
    d_p: np.ndarray


def scalar_gradient(ctx: CotetradContext, p: np.ndarray, M: np.ndarray,
                    dtheta: np.ndarray | None = None, dp: np.ndarray | None = None) -> FunctionalGradient:
    """Gradient of the smeared scalar constraint (all three parts summed)."""
    dtheta = d_components(ctx.theta, 1, ctx.grid) if dtheta is None else dtheta
    dp = d_components(p, 2, ctx.grid) if dp is None else dp
    d_th = dS1_dtheta(ctx, p, M) + dS2_dtheta(ctx, dp, M) + dS3_dtheta(ctx, dtheta, M)
    d_p = dS1_dp(ctx, p, M) + dS2_dp(ctx, M)
    return FunctionalGradient(d_th, d_p)


def vector_gradient(ctx: CotetradContext, p: np.ndarray, Mvec: np.ndarray) -> FunctionalGradient:
    """Gradient of the smeared vector constraint: (-L_M p_A, L_M theta^A)."""
    d_th = -lie_components(Mvec, p, 2, ctx.grid)
    d_p = lie_components(Mvec, ctx.theta, 1, ctx.grid)
    return FunctionalGradient(d_th, d_p)


# values of the three scalar-constraint parts (for bracket and FD tests)


def s1_value(ctx: CotetradContext, p: np.ndarray, M: np.ndarray) -> float:
    p_up = np.einsum("AB,B...->A...", ETA_INV, p)
    dens = wedge_components(p_up, 2, ctx.metric.hodge(p, 2), 1).sum(axis=0)
    return float(integrate_components(0.5 * np.asarray(M, float)[..., None, None, None] * dens, ctx.grid))


def s2_value(ctx: CotetradContext, p: np.ndarray, M: np.ndarray,
             dp: np.ndarray | None = None) -> float:
    dp = d_components(p, 2, ctx.grid) if dp is None else dp
    dens = -np.einsum("A...,A...->...", ctx.xi[(...,) + (None,) * 3], dp)
    return float(integrate_components(np.asarray(M, float)[..., None, None, None] * dens, ctx.grid))


def s3_value(ctx: CotetradContext, M: np.ndarray, dtheta: np.ndarray | None = None) -> float:
    dtheta = d_components(ctx.theta, 1, ctx.grid) if dtheta is None else dtheta
    dtheta_low = np.einsum("AB,B...->A...", ETA, dtheta)
    dens = wedge_components(dtheta, 2, ctx.metric.hodge(dtheta_low, 2), 1).sum(axis=0)
    return float(integrate_components(0.5 * np.asarray(M, float)[..., None, None, None] * dens, ctx.grid))


# ---------------------------------------------------------------------------
# Lie-derivative identity for the star pairing


def lie_star_residual(Mvec: np.ndarray, alpha: np.ndarray, beta: np.ndarray, k: int,
                      ctx: CotetradContext) -> np.ndarray:
    """Residual 3-form of L_M(a ^ *b) = L_M a ^ *b + a ^ *L_M b + L_M theta^A ^ (a star'_A b)."""
    metric, grid = ctx.metric, ctx.grid
    lhs = lie_components(Mvec, wedge_components(alpha, k, metric.hodge(beta, k), 3 - k), 3, grid)
    t1 = wedge_components(lie_components(Mvec, alpha, k, grid), k, metric.hodge(beta, k), 3 - k)
    t2 = wedge_components(alpha, k, metric.hodge(lie_components(Mvec, beta, k, grid), k), 3 - k)
    kernel = star_variation(alpha, beta, k, ctx)
    lie_theta = lie_components(Mvec, ctx.theta, 1, grid)
    t3 = wedge_components(lie_theta, 1, kernel, 2).sum(axis=0)
    return lhs - t1 - t2 - t3


# ---------------------------------------------------------------------------
# form <-> density dictionaries


def form_gradient_to_density(comps: np.ndarray, k: int) -> np.ndarray:
    """Weight-1 density components of a form-valued functional derivative.

    k is the degree of the varied variable; the gradient form has degree 3-k.
    """
    l = 3 - k
    left = "abc"[:k]
    right = "abc"[k:]
    return np.einsum(f"...{right},{left}{right}->...{left}", comps, _EPS3) / (
        math.factorial(l) * math.factorial(k))


def density_to_form_gradient(dens: np.ndarray, k: int) -> np.ndarray:
    left = "abc"[:k]
    right = "abc"[k:]
    return np.einsum(f"...{left},{left}{right}->...{right}", dens, _EPS3)


def momentum_density(p: np.ndarray) -> np.ndarray:
    """Vector-density image of a momentum two-form, p~^b = (1/2) eps~^{b i j} p_ij."""
    return 0.5 * np.einsum("bij,...ij->...b", _EPS3, p)


def momentum_from_density(ptilde: np.ndarray) -> np.ndarray:
    """Inverse dictionary, p_ij = p~^b eps~_{b i j}."""
    return np.einsum("...b,bij->...ij", ptilde, _EPS3)


# ---------------------------------------------------------------------------
# discrete Poisson bracket and finite-difference harness


def pairing(grad: FunctionalGradient, dtheta: np.ndarray, dp: np.ndarray, grid: PeriodicGrid) -> float:
    """First variation int dtheta^A ^ dF/dtheta^A + int dp_A ^ dF/dp_A."""
    t = wedge_components(dtheta, 1, grad.d_theta, 2).sum(axis=0)
    u = wedge_components(dp, 2, grad.d_p, 1).sum(axis=0)
    return float(integrate_components(t + u, grid))


def poisson_bracket(grad_f: FunctionalGradient, grad_g: FunctionalGradient, grid: PeriodicGrid) -> float:
    """{F, G} = int ( dF/dtheta^A ^ dG/dp_A - dG/dtheta^A ^ dF/dp_A )."""
    t = wedge_components(grad_f.d_theta, 2, grad_g.d_p, 1).sum(axis=0)
    u = wedge_components(grad_g.d_theta, 2, grad_f.d_p, 1).sum(axis=0)
    return float(integrate_components(t - u, grid))


def directional_derivative_check(functional, theta: np.ndarray, p: np.ndarray,
                                 grad: FunctionalGradient, grid: PeriodicGrid,
                                 delta_theta: np.ndarray, delta_p: np.ndarray,
                                 eps_values=(1e-3, 1e-4, 1e-5)) -> tuple[float, float]:
    """Central-difference slope along a direction against the analytic pairing.

    Returns (best relative error over the sweep, order in the step size
    estimated from the two largest steps).  functional maps (theta, p) to a
    float.
    """
    predicted = pairing(grad, delta_theta, delta_p, grid)
    scale = max(abs(predicted), 1e-30)
    errors = []
    for eps in eps_values:
        fp = functional(theta + eps * delta_theta, p + eps * delta_p)
        fm = functional(theta - eps * delta_theta, p - eps * delta_p)
        errors.append(abs((fp - fm) / (2.0 * eps) - predicted) / scale)
    e0, e1 = max(errors[0], 1e-300), max(errors[1], 1e-300)
    order = math.log10(e0 / e1) / math.log10(eps_values[0] / eps_values[1])
    return min(errors), order


_PAIRS = [(0, 1), (0, 2), (1, 2)]


def sampled_density_check(functional, theta: np.ndarray, p: np.ndarray,
                          grad: FunctionalGradient, grid: PeriodicGrid,
                          rng: np.random.Generator, n_samples: int = 12,
                          eps: float = 1e-5, vary: str = "both") -> float:
    """Per-dof central differences at random grid sites against the density dual.

    The discrete convention is dF/d(value at a site) = h1 h2 h3 times the
    weight-1 density gradient; antisymmetric momentum pairs contribute both
    orderings.  vary restricts the sampled family when only one partial
    gradient is under test.  Returns the maximum relative deviation.
    """
    vol = grid.cell_volume
    dens_theta = form_gradient_to_density(grad.d_theta, 1)
    dens_p = form_gradient_to_density(grad.d_p, 2)
    f0_scale = max(float(np.max(np.abs(dens_theta))), float(np.max(np.abs(dens_p))), 1e-12) * vol
    worst = 0.0
    for _ in range(n_samples):
        site = tuple(rng.integers(0, s) for s in grid.shape)
        A = int(rng.integers(0, 4))
        pick_theta = vary == "theta" or (vary == "both" and rng.random() < 0.5)
        if pick_theta:
            i = int(rng.integers(0, 3))
            pred = vol * dens_theta[(A,) + site + (i,)]
            bump = np.zeros_like(theta)
            bump[(A,) + site + (i,)] = 1.0
            fp = functional(theta + eps * bump, p)
            fm = functional(theta - eps * bump, p)
        else:
            i, j = _PAIRS[int(rng.integers(0, 3))]
            pred = 2.0 * vol * dens_p[(A,) + site + (i, j)]
            bump = np.zeros_like(p)
            bump[(A,) + site + (i, j)] = 1.0
            bump[(A,) + site + (j, i)] = -1.0
            fp = functional(theta, p + eps * bump)
            fm = functional(theta, p - eps * bump)
        slope = (fp - fm) / (2.0 * eps)
        worst = max(worst, abs(slope - pred) / max(abs(pred), f0_scale))
    return worst


def sqrt_det_derivative_check(theta: np.ndarray, grid: PeriodicGrid,
                              rng: np.random.Generator, n_samples: int = 12,
                              eps: float = 1e-6) -> float:
    """Pointwise check of d sqrt(det q) / d theta^A_i = sqrt(det q) theta^i_A."""
    ctx = cotetrad_context(theta, grid)
    analytic = ctx.metric.sqrt_abs_det[None, ..., None] * ctx.tv_low
    worst = 0.0
    for _ in range(n_samples):
        site = tuple(rng.integers(0, s) for s in grid.shape)
        A = int(rng.integers(0, 4))
        i = int(rng.integers(0, 3))
        bump = np.zeros_like(theta)
        bump[(A,) + site + (i,)] = 1.0
        qp = induced_metric(theta + eps * bump).sqrt_abs_det[site]
        qm = induced_metric(theta - eps * bump).sqrt_abs_det[site]
        slope = (qp - qm) / (2.0 * eps)
        pred = analytic[(A,) + site + (i,)]
        worst = max(worst, abs(slope - pred) / max(abs(pred), 1.0))
    return worst
