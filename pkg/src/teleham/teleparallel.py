"""Cotetrad-derived geometry on the spatial slice and pointwise 4D checks.

A cotetrad here is a quadruple of one-forms theta^A (A = 0..3) on the
3-torus whose 4x3 component matrix has rank 3 everywhere and induces a
positive-definite spatial metric q_ij = eta_AB theta^A_i theta^B_j, with
eta = diag(-1,1,1,1) the fixed internal scalar product.  From it follow
the internal unit normal xi^A, the lapse/shift split of a full 4x4
cotetrad, the 3+1 decomposition of the spacetime metric and volume, and
the quadratic action densities built from d(theta).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from teleham.exterior import (
    MetricAtPoint,
    Signature,
    antisymmetrize,
    contract_components,
    hodge_components,
    levi_civita,
    raise_components,
    wedge_components,
)
from teleham.fields import FormField, PeriodicGrid

__all__ = [
    "ETA",
    "ETA_INV",
    "EPS4",
    "CotetradField",
    "LapseShift",
    "flat_cotetrad",
    "induced_metric",
    "normal",
    "normal_components",
    "lapse_shift",
    "assemble_full_cotetrad",
    "metric_decomposition",
    "volume_decomposition_check",
    "spacetime_metric_from_multipliers",
    "perp_part",
    "spatial_part",
    "embed_spatial",
    "perp_underline",
    "hodge_decomposition_residual",
    "irreducible_parts",
    "action_density",
    "tegr_density",
    "TEGR_COEFFICIENTS",
]

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
ETA_INV = np.diag([-1.0, 1.0, 1.0, 1.0])
EPS4 = levi_civita(4)
TEGR_COEFFICIENTS = (1.0, -2.0, -0.5)

_DT = np.array([1.0, 0.0, 0.0, 0.0])
_ET = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class CotetradField:
    """Quadruple of spatial one-forms; components shaped (4,) + grid.shape + (3,)."""

    grid: PeriodicGrid
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.shape != (4,) + self.grid.shape + (3,):
            raise ValueError(f"cotetrad component shape {comps.shape} invalid for grid {self.grid.shape}")
        object.__setattr__(self, "components", comps)

    def one_form(self, A: int) -> FormField:
        return FormField(self.grid, 1, self.components[A])


@dataclass(frozen=True)
class LapseShift:
    """Lapse N > 0 and shift vector; N_i = q_ij N^j available via the metric."""

    lapse: np.ndarray
    shift: np.ndarray

    def shift_lowered(self, metric: MetricAtPoint) -> np.ndarray:
        return np.einsum("...ij,...j->...i", metric.g, self.shift)


def flat_cotetrad(grid: PeriodicGrid) -> CotetradField:
    comps = np.zeros((4,) + grid.shape + (3,))
    for a in range(3):
        comps[1 + a, ..., a] = 1.0
    return CotetradField(grid, comps)


def induced_metric(theta: np.ndarray | CotetradField) -> MetricAtPoint:
    """q_ij = eta_AB theta^A_i theta^B_j; rejects non-positive-definite points by name."""
    comps = theta.components if isinstance(theta, CotetradField) else np.asarray(theta, dtype=float)
    q = np.einsum("AB,A...i,B...j->...ij", ETA, comps, comps, optimize=True)
    eig = np.linalg.eigvalsh(q)
    bad = eig[..., 0] <= 0.0
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(bad)[0])
        raise ValueError(f"induced metric not positive definite at point index {where}")
    return MetricAtPoint(q, Signature(3, 0))


def normal_components(theta: np.ndarray, metric: MetricAtPoint, sign: str = "minus") -> np.ndarray:
    """Internal unit normal from the closed-form triple-wedge dual.

    The default branch pairs with a positive lapse; the "plus" branch is a
    test-only toggle that flips the normal and hence the sign of the lapse.
    """
    if sign not in ("minus", "plus"):
        raise ValueError(f"unknown sign branch {sign!r}")
    eps_mixed = np.einsum("AE,EBCD->ABCD", ETA_INV, EPS4)
    # *(theta^B ^ theta^C ^ theta^D) = eps3_ijk theta^B_i theta^C_j theta^D_k / sqrt(det q)
    t1 = np.einsum("ijk,D...k->D...ij", levi_civita(3), theta)
    t2 = np.einsum("D...ij,C...j->CD...i", t1, theta)
    tri = np.einsum("CD...i,B...i->BCD...", t2, theta)
    triple = np.einsum("ABCD,BCD...->A...", eps_mixed, tri)
    xi = -(1.0 / 6.0) * triple / metric.sqrt_abs_det
    return -xi if sign == "plus" else xi


def normal(theta: CotetradField, metric: MetricAtPoint | None = None, sign: str = "minus") -> np.ndarray:
    metric = induced_metric(theta) if metric is None else metric
    return normal_components(theta.components, metric, sign)


def lapse_shift(theta_perp: np.ndarray, theta: np.ndarray, metric: MetricAtPoint,
                xi: np.ndarray | None = None) -> LapseShift:
    """Split the time leg theta^A_perp into N xi^A + N^i theta^A_i.

    Uses the basis projections N = -xi_A theta^A_perp and
    N^i = q^{ij} theta_{A j} theta^A_perp; validates the reconstruction and
    the positivity of the lapse.
    """
    theta = np.asarray(theta, dtype=float)
    theta_perp = np.asarray(theta_perp, dtype=float)
    if xi is None:
        xi = normal_components(theta, metric)
    xi_low = np.einsum("AB,B...->A...", ETA, xi)
    lapse = -np.einsum("A...,A...->...", xi_low, theta_perp)
    theta_low = np.einsum("AB,B...i->A...i", ETA, theta)
    shift_low = np.einsum("A...i,A...->...i", theta_low, theta_perp)
    shift = np.einsum("...ij,...j->...i", metric.ginv, shift_low)
    recon = lapse[None, ...] * xi + np.einsum("...i,A...i->A...", shift, theta)
    defect = np.max(np.abs(recon - theta_perp))
    scale = max(1.0, float(np.max(np.abs(theta_perp))))
    if defect > 1e-10 * scale:
        raise ValueError(f"time leg outside the span of (xi, theta_i); defect {defect:.3e}")
    if np.any(lapse <= 0.0):
        where = tuple(int(i) for i in np.argwhere(lapse <= 0.0)[0])
        raise ValueError(f"non-positive lapse at point index {where}")
    return LapseShift(lapse, shift)


def assemble_full_cotetrad(lapse: np.ndarray, shift: np.ndarray, theta: np.ndarray,
                           xi: np.ndarray | None = None, metric: MetricAtPoint | None = None) -> np.ndarray:
    """Full cotetrad Theta^A_mu (time leg from lapse/shift, spatial legs as given)."""
    theta = np.asarray(theta, dtype=float)
    if xi is None:
        metric = induced_metric(theta) if metric is None else metric
        xi = normal_components(theta, metric)
    perp = np.asarray(lapse, dtype=float)[None, ...] * xi + np.einsum("...i,A...i->A...", np.asarray(shift, float), theta)
    return np.concatenate([perp[..., None], theta], axis=-1)


def metric_decomposition(lapse: np.ndarray, shift: np.ndarray, metric: MetricAtPoint) -> tuple[np.ndarray, np.ndarray]:
    """ADM-form spacetime metric and inverse built from (N, shift, q)."""
    lapse = np.asarray(lapse, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if np.any(lapse <= 0.0):
        raise ValueError("lapse must be positive")
    batch = np.broadcast_shapes(lapse.shape, shift.shape[:-1], metric.g.shape[:-2])
    shift_low = np.einsum("...ij,...j->...i", metric.g, shift)
    g = np.zeros(batch + (4, 4))
    g[..., 0, 0] = -lapse**2 + np.einsum("...i,...i->...", shift, shift_low)
    g[..., 0, 1:] = shift_low
    g[..., 1:, 0] = shift_low
    g[..., 1:, 1:] = metric.g
    ginv = np.zeros(batch + (4, 4))
    n2 = lapse**2
    ginv[..., 0, 0] = -1.0 / n2
    ginv[..., 0, 1:] = shift / n2[..., None]
    ginv[..., 1:, 0] = shift / n2[..., None]
    ginv[..., 1:, 1:] = metric.ginv - np.einsum("...i,...j->...ij", shift, shift) / n2[..., None, None]
    return g, ginv


def spacetime_metric_from_multipliers(lapse: np.ndarray, shift: np.ndarray, metric: MetricAtPoint) -> MetricAtPoint:
    g, _ = metric_decomposition(lapse, shift, metric)
    return MetricAtPoint(g, Signature(4, 1))


def volume_decomposition_check(lapse: np.ndarray, metric: MetricAtPoint, shift: np.ndarray | None = None) -> np.ndarray:
    """|eps_{0123}(g) - N sqrt(det q)| pointwise."""
    shift = np.zeros(np.shape(lapse) + (3,)) if shift is None else shift
    g4 = spacetime_metric_from_multipliers(lapse, shift, metric)
    return np.abs(g4.sqrt_abs_det - np.asarray(lapse, float) * metric.sqrt_abs_det)


# ---------------------------------------------------------------------------
# perp / underline split of 4D forms (adapted coordinates, d_0 = d_t)


def perp_part(comps: np.ndarray, k: int) -> np.ndarray:
    """d_t _| alpha as a spatial (k-1)-form (batched)."""
    if k == 0:
        return np.zeros(np.shape(comps))
    et = np.broadcast_to(_ET, comps.shape[:comps.ndim - k] + (4,))
    contracted = contract_components(et, comps, k)
    return contracted[(...,) + (slice(1, 4),) * (k - 1)]


def spatial_part(comps: np.ndarray, k: int) -> np.ndarray:
    """Components with all indices spatial, as a form on the slice."""
    if k == 0:
        return np.asarray(comps, dtype=float)
    return np.asarray(comps, dtype=float)[(...,) + (slice(1, 4),) * k]


def embed_spatial(comps: np.ndarray, k: int) -> np.ndarray:
    """Embed a spatial k-form into 4D components (zero whenever an index is 0)."""
    comps = np.asarray(comps, dtype=float)
    if k == 0:
        return comps
    out = np.zeros(comps.shape[:comps.ndim - k] + (4,) * k)
    out[(...,) + (slice(1, 4),) * k] = comps
    return out


def perp_underline(comps: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a 4D k-form into (perp part on the slice, spatial part on the slice)."""
    if k == 0:
        return np.zeros(np.shape(comps)), spatial_part(comps, 0)
    return perp_part(comps, k), spatial_part(comps, k)


def reassemble(perp: np.ndarray, under: np.ndarray, k: int) -> np.ndarray:
    """dt ^ perp + underline as a 4D k-form."""
    under4 = embed_spatial(under, k)
    if k == 0:
        return under4
    dt = np.broadcast_to(_DT, under4.shape[:under4.ndim - k] + (4,))
    return wedge_components(dt, 1, embed_spatial(perp, k - 1), k - 1) + under4


def hodge_decomposition_residual(alpha: np.ndarray, beta: np.ndarray, k: int,
                                 lapse: np.ndarray, shift: np.ndarray,
                                 metric: MetricAtPoint) -> np.ndarray:
    """Componentwise residual of the 3+1 split of alpha ^ (4D star) beta.

    Valid for k = 0..4; the right-hand side uses only the spatial Hodge
    operator of q, the lapse and the shift.
    """
    g4 = spacetime_metric_from_multipliers(lapse, shift, metric)
    lhs = wedge_components(alpha, k, g4.hodge(beta, k), 4 - k)
    a_perp, a_under = perp_underline(alpha, k)
    b_perp, b_under = perp_underline(beta, k)
    if k == 0:
        a_eff = np.zeros(np.shape(a_perp))
        b_eff = np.zeros(np.shape(b_perp))
    else:
        a_eff = a_perp - contract_components(shift, a_under, k)
        b_eff = b_perp - contract_components(shift, b_under, k)
    lapse = np.asarray(lapse, dtype=float)
    star_b_eff = metric.hodge(b_eff, k - 1) if k > 0 else None
    star_b_under = metric.hodge(b_under, k) if k < 4 else None

    def _dt_wedge(spatial_comps: np.ndarray, deg: int) -> np.ndarray:
        four = embed_spatial(spatial_comps, deg)
        dt = np.broadcast_to(_DT, four.shape[:four.ndim - deg] + (4,))
        return wedge_components(dt, 1, four, deg)

    rhs = np.zeros(np.shape(lhs))
    if k > 0:
        term = wedge_components(a_eff, k - 1, star_b_eff, 3 - (k - 1))
        rhs = rhs - _dt_wedge(term / lapse[(...,) + (None,) * 3], 3)
    if k < 4:
        term = wedge_components(a_under, k, star_b_under, 3 - k)
        rhs = rhs + _dt_wedge(lapse[(...,) + (None,) * 3] * term, 3)
    return np.abs(lhs - rhs)


# ---------------------------------------------------------------------------
# irreducible split of d(theta) and the quadratic action densities


def irreducible_parts(dtheta: np.ndarray, full_cotetrad: np.ndarray,
                      cond_limit: float = 1e8) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the quadruple of 4D two-forms dtheta^A into its three invariant parts.

    dtheta has shape (4,) + batch + (4, 4); full_cotetrad (4,) + batch + (4,)
    indexed [A, ..., mu].  Returns (part1, part2, part3) with
    part2^A = (1/3) theta^A ^ (e_B _| dtheta^B),
    part3^A = (1/3) e^A _| (theta_B ^ dtheta^B), part1 the remainder.
    """
    dtheta = np.asarray(dtheta, dtype=float)
    theta = np.asarray(full_cotetrad, dtype=float)
    mat = np.moveaxis(theta, 0, -2)              # [..., A, mu]
    cond = np.linalg.cond(mat)
    if np.any(cond > cond_limit):
        warnings.warn(f"cotetrad matrix condition number up to {np.max(cond):.3e} exceeds {cond_limit:.1e}")
    inv = np.linalg.inv(mat)                     # [..., mu, A]
    reper = np.moveaxis(inv, -1, 0)              # [B, ..., mu] = e_B^mu
    trace_vec = np.einsum("B...m,B...mn->...n", reper, dtheta)
    part2 = (1.0 / 3.0) * wedge_components(theta, 1, trace_vec[None, ...], 1)
    theta_low = np.einsum("AB,B...m->A...m", ETA, theta)
    three = np.einsum("B...m,B...no->...mno", theta_low, dtheta)
    three = 3.0 * antisymmetrize(three, 3)       # theta_B ^ dtheta^B summed over B
    reper_up = np.einsum("AB,B...m->A...m", ETA_INV, reper)
    part3 = (1.0 / 3.0) * contract_components(reper_up, np.broadcast_to(three, reper_up.shape[:1] + three.shape), 3)
    part1 = dtheta - part2 - part3
    return part1, part2, part3


def _spacetime_metric(full_cotetrad: np.ndarray) -> MetricAtPoint:
    g = np.einsum("AB,A...m,B...n->...mn", ETA, full_cotetrad, full_cotetrad, optimize=True)
    return MetricAtPoint(g, Signature(4, 1))


def action_density(dtheta: np.ndarray, full_cotetrad: np.ndarray,
                   coefficients: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> np.ndarray:
    """-(1/2) dtheta^A ^ star(sum_i a_i part_i(dtheta)_A) as a pointwise 4-form."""
    g4 = _spacetime_metric(full_cotetrad)
    parts = irreducible_parts(dtheta, full_cotetrad)
    mix = sum(a * p for a, p in zip(coefficients, parts))
    mix_low = np.einsum("AB,B...->A...", ETA, mix)
    star_mix = g4.hodge(mix_low, 2)
    dens = np.einsum("A...->...", wedge_components(dtheta, 2, star_mix, 2))
    return -0.5 * dens


def direct_action_density(dtheta: np.ndarray, full_cotetrad: np.ndarray) -> np.ndarray:
    """-(1/2) dtheta^A ^ star dtheta_A without the irreducible split."""
    g4 = _spacetime_metric(full_cotetrad)
    dtheta_low = np.einsum("AB,B...->A...", ETA, dtheta)
    dens = np.einsum("A...->...", wedge_components(dtheta, 2, g4.hodge(dtheta_low, 2), 2))
    return -0.5 * dens


def tegr_density(dtheta: np.ndarray, full_cotetrad: np.ndarray) -> np.ndarray:
    """Two-squares density -(1/2)(dth^A ^ th_B) ^ star(dth^B ^ th_A) + (1/4)(dth^A ^ th_A) ^ star(dth^B ^ th_B)."""
    g4 = _spacetime_metric(full_cotetrad)
    theta = np.asarray(full_cotetrad, dtype=float)
    theta_low = np.einsum("AB,B...m->A...m", ETA, theta)
    # w[A, B, ...] = dtheta^A ^ theta_B
    w = wedge_components(dtheta[:, None, ...], 2, theta_low[None, :, ...], 1)
    star_w = g4.hodge(w, 3)
    first = np.einsum("AB...->...", wedge_components(w, 3, np.swapaxes(star_w, 0, 1), 1))
    trace = np.einsum("AA...->A...", w).sum(axis=0)
    second = wedge_components(trace, 3, g4.hodge(trace, 3), 1)
    return -0.5 * first + 0.25 * second
