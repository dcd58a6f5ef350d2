"""Verification suite drivers.

Each suite returns ReportRow lists consumed by the command-line front end
and by the acceptance tests.  Identities are evaluated over seeded random
batches; convergence studies sample the same band-limited continuum
fields on every grid of a refinement sequence.

Convergence orders are reported per refinement step; the asymptotic
measurement of a sequence is the finest pair (coarser pairs document the
approach to the stencil rate).  Quantities that sit at the rounding floor
on every grid report an infinite order: the identity holds exactly in
floating point, there is nothing left to converge.
"""

from __future__ import annotations

import math

import numpy as np

from teleham import exterior as ex
from teleham import fields as fl
from teleham import teleparallel as tp
from teleham import variational as vr
from teleham import dynamics as dy
from teleham.report import ReportRow, order_row_residual

__all__ = [
    "algebra_suite",
    "variational_suite",
    "bracket_suite",
    "measure_orders",
    "closure_battery",
    "drift_battery",
    "axis_limited_form",
    "axis_limited_vector",
]

ALGEBRA_TOL = 1e-10
FD_TOL = 1e-6
ORDER_BAR_STENCIL = 3.8
ORDER_BAR_BRACKET = 1.8
ROUNDING_FLOOR = 1e-13


def measure_orders(errors: list[float], floor: float = ROUNDING_FLOOR) -> list[float]:
    """log2 ratios of successive refinement errors; inf when both sit at the floor."""
    orders = []
    for coarse, fine in zip(errors, errors[1:]):
        if coarse < floor and fine < floor:
            orders.append(math.inf)
        else:
            orders.append(math.log2(max(coarse, 1e-300) / max(fine, 1e-300)))
    return orders


def _rel(resid: float, scale: float) -> float:
    return float(resid) / max(1.0, float(scale))


# ---------------------------------------------------------------------------
# pointwise algebra suite


def _random_metric(rng: np.random.Generator, n: int, m: int, batch: int) -> ex.MetricAtPoint:
    a = 0.25 * rng.normal(size=(batch, n, n)) + np.eye(n)
    signs = np.diag([-1.0] * m + [1.0] * (n - m))
    g = np.einsum("...ki,kl,...lj->...ij", a, signs, a)
    return ex.MetricAtPoint(g, ex.Signature(n, m))


def _random_form(rng: np.random.Generator, n: int, k: int, batch: int) -> np.ndarray:
    return ex.antisymmetrize(rng.normal(size=(batch,) + (n,) * k), k)


def _random_cotetrad_points(rng: np.random.Generator, batch: int) -> np.ndarray:
    theta = np.zeros((4, batch, 3))
    for a in range(3):
        theta[1 + a, :, a] = 1.0
    return theta + rng.uniform(-0.12, 0.12, size=(4, batch, 3))


def algebra_suite(trials: int, seed: int) -> list[ReportRow]:
    """Pointwise identity battery over seeded random instances."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    rows = []

    def add(case: str, resid: float, tol: float = ALGEBRA_TOL):
        rows.append(ReportRow("algebra", case, seed, "-", float(resid), tol))

    # volume-form contraction identity for every (n, k) pair, both parities
    for n in range(1, 5):
        for m in (0, 1):
            if m > n:
                continue
            for k in range(0, n + 1):
                lhs, rhs = ex.levi_contraction(ex.Signature(n, m), k, n - k)
                add(f"eps-contraction n={n} m={m} k={k}", _rel(np.max(np.abs(lhs - rhs)), np.max(np.abs(rhs))))

    for (n, m) in ((3, 0), (4, 1)):
        metric = _random_metric(rng, n, m, trials)
        sig = ex.Signature(n, m)
        vol = metric.volume()
        for k in range(0, n + 1):
            alpha = _random_form(rng, n, k, trials)
            beta = _random_form(rng, n, k, trials)
            star_b = metric.hodge(beta, k)
            # defining property  alpha ^ *beta = <alpha|beta> eps
            lhs = ex.wedge_components(alpha, k, star_b, n - k)
            sp = ex.scalar_product_components(alpha, beta, k, metric.ginv)
            rhs = sp[(...,) + (None,) * n] * vol
            add(f"hodge-defining n={n} m={m} k={k}", _rel(np.max(np.abs(lhs - rhs)), np.max(np.abs(rhs))))
            # double dual  **beta = (-1)^(k(n-k)+m) beta
            sign = (-1) ** (k * (n - k) + m)
            ss = metric.hodge(star_b, n - k)
            add(f"double-dual n={n} m={m} k={k}", _rel(np.max(np.abs(ss - sign * beta)), np.max(np.abs(beta))))
            # *(*beta ^ a) = (-1)^(m+k(n-k)) avec _| beta for one-forms a
            one = _random_form(rng, n, 1, trials)
            mixed = metric.hodge(ex.wedge_components(star_b, n - k, one, 1), n - k + 1)
            avec = ex.raise_components(one, 1, metric.ginv)
            pull = ex.contract_components(avec, beta, k)
            sgn = (-1) ** (m + k * (n - k))
            add(f"dual-wedge-contract n={n} m={m} k={k}",
                _rel(np.max(np.abs(mixed - sgn * pull), initial=0.0), np.max(np.abs(pull), initial=1.0)))

        # wedge associativity and contraction Leibniz at this signature
        ka, kb, kc = (1, 1, 1) if n == 3 else (1, 2, 1)
        fa, fb, fc = (_random_form(rng, n, kk, trials) for kk in (ka, kb, kc))
        w1 = ex.wedge_components(ex.wedge_components(fa, ka, fb, kb), ka + kb, fc, kc)
        w2 = ex.wedge_components(fa, ka, ex.wedge_components(fb, kb, fc, kc), kb + kc)
        add(f"wedge-associativity n={n}", _rel(np.max(np.abs(w1 - w2)), np.max(np.abs(w1))))
        X = rng.normal(size=(trials, n))
        kx = 2
        fx = _random_form(rng, n, kx, trials)
        gx = _random_form(rng, n, 1, trials)
        lhs = ex.contract_components(X, ex.wedge_components(fx, kx, gx, 1), kx + 1)
        rhs = (ex.wedge_components(ex.contract_components(X, fx, kx), kx - 1, gx, 1)
               + (-1) ** kx * ex.wedge_components(fx, kx, ex.contract_components(X, gx, 1), 0))
        add(f"contraction-leibniz n={n}", _rel(np.max(np.abs(lhs - rhs)), np.max(np.abs(lhs))))

    # cotetrad identities on a batch of points
    theta = _random_cotetrad_points(rng, trials)
    metric = tp.induced_metric(theta)
    xi = tp.normal_components(theta, metric)
    xi_low = np.einsum("AB,B...->A...", tp.ETA, xi)
    add("normal-unit", np.max(np.abs(np.einsum("A...,A...->...", xi_low, xi) + 1.0)))
    add("normal-transverse", np.max(np.abs(np.einsum("A...,A...i->...i", xi_low, theta))))
    eps_mixed = np.einsum("DE,EBCA->DBCA", tp.ETA_INV, tp.EPS4)
    ww = ex.wedge_components(theta[:, None], 1, theta[None, :], 1)
    lhs = 0.5 * np.einsum("DBCA,BC...ij,A...->D...ij", eps_mixed, ww, xi, optimize=True)
    rhs = -metric.hodge(theta, 1)
    add("triple-wedge-normal", _rel(np.max(np.abs(lhs - rhs)), np.max(np.abs(rhs))))

    # lapse/shift split and 3+1 identities at random points
    lapse = 0.5 + rng.uniform(0.0, 1.5, size=trials)
    shift = 0.4 * rng.normal(size=(trials, 3))
    perp = lapse[None] * xi + np.einsum("...i,A...i->A...", shift, theta)
    split = tp.lapse_shift(perp, theta, metric, xi)
    add("lapse-shift-roundtrip", max(np.max(np.abs(split.lapse - lapse)), np.max(np.abs(split.shift - shift))))
    g4, g4inv = tp.metric_decomposition(lapse, shift, metric)
    add("adm-inverse", np.max(np.abs(np.einsum("...ij,...jk->...ik", g4, g4inv) - np.eye(4))))
    full = tp.assemble_full_cotetrad(lapse, shift, theta, xi)
    g4_direct = np.einsum("AB,A...m,B...n->...mn", tp.ETA, full, full, optimize=True)
    add("adm-vs-cotetrad-metric", _rel(np.max(np.abs(g4 - g4_direct)), np.max(np.abs(g4))))
    add("volume-split", np.max(tp.volume_decomposition_check(lapse, metric, shift)))
    dets = np.linalg.det(np.moveaxis(full, 0, -2))
    add("cotetrad-det-positive", float(np.max(np.abs(dets - lapse * metric.sqrt_abs_det)))
        if np.all(dets > 0) else math.inf)

    # perp/underline table (nine pointwise identities) and the 3+1 Hodge split
    for k in range(0, 5):
        alpha = _random_form(rng, 4, k, trials)
        beta = _random_form(rng, 4, k, trials)
        a_perp, a_under = tp.perp_underline(alpha, k)
        add(f"split-reassemble k={k}",
            _rel(np.max(np.abs(tp.reassemble(a_perp, a_under, k) - alpha)), np.max(np.abs(alpha))))
        res = tp.hodge_decomposition_residual(alpha, beta, k, lapse, shift, metric)
        add(f"hodge-split k={k}", _rel(np.max(res), 1.0))
    rows.extend(_perp_table_rows(rng, trials, seed))

    # transversality of the star-variation kernel on a small grid batch
    grid = fl.PeriodicGrid.cubic(8)
    state = dy.random_state(grid, 0.1, seed + 1)
    ctx = vr.cotetrad_context(state.theta, grid)
    for k in range(0, 4):
        a = fl.random_bandlimited(grid, k, 2, 0.05, seed + 10 + k).components
        b = fl.random_bandlimited(grid, k, 2, 0.05, seed + 20 + k).components
        kernel = vr.star_variation(a, b, k, ctx)
        tr = np.einsum("A...,A...ij->...ij", ctx.xi, kernel)
        add(f"kernel-transversality k={k}", _rel(np.max(np.abs(tr)), np.max(np.abs(kernel))))
    return rows


def _perp_table_rows(rng: np.random.Generator, trials: int, seed: int) -> list[ReportRow]:
    rows = []
    k = 2
    alpha = _random_form(rng, 4, k, trials)
    beta = _random_form(rng, 4, 1, trials)
    dt = np.zeros((trials, 4))
    dt[:, 0] = 1.0
    et = dt.copy()

    def perp_op(c, deg):
        p, _ = tp.perp_underline(c, deg)
        return ex.wedge_components(dt, 1, tp.embed_spatial(p, deg - 1), deg - 1) if deg else np.zeros_like(c)

    def under_op(c, deg):
        _, u = tp.perp_underline(c, deg)
        return tp.embed_spatial(u, deg)

    names_and_resids = []
    pa = perp_op(alpha, k)
    ua = under_op(alpha, k)
    names_and_resids.append(("perp-idempotent", np.max(np.abs(perp_op(pa, k) - pa))))
    names_and_resids.append(("under-of-perp", np.max(np.abs(under_op(pa, k)))))
    names_and_resids.append(("perp-of-under", np.max(np.abs(perp_op(ua, k)))))
    names_and_resids.append(("under-idempotent", np.max(np.abs(under_op(ua, k) - ua))))
    wab = ex.wedge_components(alpha, k, beta, 1)
    lhs = perp_op(wab, k + 1)
    rhs = (ex.wedge_components(pa, k, under_op(beta, 1), 1)
           + ex.wedge_components(ua, k, perp_op(beta, 1), 1))
    names_and_resids.append(("perp-of-wedge", np.max(np.abs(lhs - rhs))))
    names_and_resids.append(("under-of-wedge", np.max(np.abs(
        under_op(wab, k + 1) - ex.wedge_components(ua, k, under_op(beta, 1), 1)))))
    a_perp, _ = tp.perp_underline(alpha, k)
    emb = tp.embed_spatial(a_perp, k - 1)
    names_and_resids.append(("under-of-perp-part", np.max(np.abs(under_op(emb, k - 1) - emb))))
    names_and_resids.append(("contract-under", np.max(np.abs(ex.contract_components(et, ua, k)))))
    names_and_resids.append(("reassembly", np.max(np.abs(pa + ua - alpha))))
    scale = float(np.max(np.abs(alpha)))
    return [ReportRow("algebra", f"perp-table {name}", seed, "-", _rel(r, scale), ALGEBRA_TOL)
            for name, r in names_and_resids]


# ---------------------------------------------------------------------------
# variational suite


def axis_limited_form(degree: int, max_mode: int, amplitude: float, axis: int, seed) -> fl.BandlimitedForm:
    """Band-limited form whose components vary along a single coordinate axis."""
    rng = np.random.default_rng(seed)
    modes = np.array([[j if i == axis else 0 for i in range(3)] for j in range(1, max_mode + 1)])

    def poly():
        return fl.TrigPoly(modes, rng.uniform(-amplitude, amplitude, len(modes)),
                           rng.uniform(0.0, 2.0 * np.pi, len(modes)))

    return fl.BandlimitedForm(degree, tuple(poly() for _ in fl._INDEP[degree]), max_mode, amplitude)


def axis_limited_vector(max_mode: int, amplitude: float, axis: int, seed) -> fl.BandlimitedVector:
    rng = np.random.default_rng(seed)
    modes = np.array([[j if i == axis else 0 for i in range(3)] for j in range(1, max_mode + 1)])

    def poly():
        return fl.TrigPoly(modes, rng.uniform(-amplitude, amplitude, len(modes)),
                           rng.uniform(0.0, 2.0 * np.pi, len(modes)))

    return fl.BandlimitedVector(tuple(poly() for _ in range(3)), max_mode)


def variational_suite(grid_n: int, seed: int, refinement: tuple[int, ...] = (8, 16, 32)) -> list[ReportRow]:
    """Finite-difference oracle battery plus the Lie-star refinement study."""
    if grid_n < 8:
        raise ValueError("grid must be at least 8 points per axis")
    grid = fl.PeriodicGrid.cubic(grid_n)
    gname = f"{grid_n}^3"
    rng = np.random.default_rng(seed)
    rows = []
    state = dy.random_state(grid, 0.15, seed)
    theta, p = state.theta, state.p
    M = 1.0 + fl.random_bandlimited(grid, 0, 2, 0.02, seed + 1).components
    ctx = vr.cotetrad_context(theta, grid)
    dtheta = fl.d_components(theta, 1, grid)
    dp = fl.d_components(p, 2, grid)
    Z1 = np.zeros((4,) + grid.shape + (3,))
    Z2 = np.zeros((4,) + grid.shape + (3, 3))

    def s1(th, pp):
        return vr.s1_value(vr.cotetrad_context(th, grid), pp, M)

    def s2(th, pp):
        return vr.s2_value(vr.cotetrad_context(th, grid), pp, M)

    def s3(th, pp):
        return vr.s3_value(vr.cotetrad_context(th, grid), M)

    gradients = [
        ("dS1/dtheta", s1, vr.FunctionalGradient(vr.dS1_dtheta(ctx, p, M), Z1), "theta"),
        ("dS1/dp", s1, vr.FunctionalGradient(Z2, vr.dS1_dp(ctx, p, M)), "p"),
        ("dS2/dtheta", s2, vr.FunctionalGradient(vr.dS2_dtheta(ctx, dp, M), Z1), "theta"),
        ("dS2/dp", s2, vr.FunctionalGradient(Z2, vr.dS2_dp(ctx, M)), "p"),
        ("dS3/dtheta", s3, vr.FunctionalGradient(vr.dS3_dtheta(ctx, dtheta, M), Z1), "theta"),
    ]
    for name, functional, grad, family in gradients:
        dth, dpp = _fd_direction(grid, family, seed + hash(name) % 1000)
        err, slope = vr.directional_derivative_check(functional, theta, p, grad, grid, dth, dpp)
        rows.append(ReportRow("variational", f"{name} directional", seed, gname, err, FD_TOL))
        if family == "theta":
            rows.append(ReportRow("variational", f"{name} fd-order", seed, gname,
                                  order_row_residual(slope, 1.5), 0.0, slope))
        samp = vr.sampled_density_check(functional, theta, p, grad, grid,
                                        np.random.default_rng(seed + 2), 10, 1e-5, vary=family)
        rows.append(ReportRow("variational", f"{name} sampled", seed, gname, samp, FD_TOL))

    # star-variation as the derivative of the frozen star pairing, k = 0..3
    for k in range(4):
        a = fl.random_bandlimited(grid, k, 2, 0.05, seed + 30 + k).components
        b = fl.random_bandlimited(grid, k, 2, 0.05, seed + 40 + k).components

        def pairing_functional(th, pp, a=a, b=b, k=k):
            c = vr.cotetrad_context(th, grid)
            dens = ex.wedge_components(a, k, c.metric.hodge(b, k), 3 - k)
            return float(fl.integrate_components(dens, grid))

        grad = vr.FunctionalGradient(vr.star_variation(a, b, k, ctx), Z1)
        dth, dpp = _fd_direction(grid, "theta", seed + 50 + k)
        err, slope = vr.directional_derivative_check(pairing_functional, theta, p, grad, grid, dth, dpp)
        rows.append(ReportRow("variational", f"star-variation k={k} directional", seed, gname, err, FD_TOL))
        rows.append(ReportRow("variational", f"star-variation k={k} fd-order", seed, gname,
                              order_row_residual(slope, 1.5), 0.0, slope))
        samp = vr.sampled_density_check(pairing_functional, theta, p, grad, grid,
                                        np.random.default_rng(seed + 3), 8, 1e-5, vary="theta")
        rows.append(ReportRow("variational", f"star-variation k={k} sampled", seed, gname, samp, FD_TOL))
        # dual route equality
        d_routes = np.max(np.abs(vr.star_variation_form(a, b, k, ctx) - grad.d_theta))
        rows.append(ReportRow("variational", f"star-variation k={k} routes", seed, gname,
                              _rel(d_routes, np.max(np.abs(grad.d_theta))), 1e-12))

    # sqrt(det q) derivative
    psdq = vr.sqrt_det_derivative_check(theta, grid, np.random.default_rng(seed + 4), 12)
    rows.append(ReportRow("variational", "sqrt-det-derivative", seed, gname, psdq, 1e-8))

    # transversality on the grid
    a = fl.random_bandlimited(grid, 1, 2, 0.05, seed + 60).components
    b = fl.random_bandlimited(grid, 1, 2, 0.05, seed + 61).components
    kern = vr.star_variation(a, b, 1, ctx)
    tr = np.einsum("A...,A...ij->...ij", ctx.xi, kern)
    rows.append(ReportRow("variational", "kernel-transversality", seed, gname,
                          _rel(np.max(np.abs(tr)), np.max(np.abs(kern))), 1e-10))

    # dictionaries: form <-> density roundtrip and momentum roundtrip
    gth = np.stack([fl.random_bandlimited(grid, 2, 2, 0.3, seed + 70 + A).components for A in range(4)])
    gp = np.stack([fl.random_bandlimited(grid, 1, 2, 0.3, seed + 80 + A).components for A in range(4)])
    rt = max(np.max(np.abs(vr.density_to_form_gradient(vr.form_gradient_to_density(gth, 1), 1) - gth)),
             np.max(np.abs(vr.density_to_form_gradient(vr.form_gradient_to_density(gp, 2), 2) - gp)))
    rows.append(ReportRow("variational", "form-density-roundtrip", seed, gname, float(rt), 1e-12))
    pm = vr.momentum_from_density(vr.momentum_density(p))
    rows.append(ReportRow("variational", "momentum-density-roundtrip", seed, gname,
                          float(np.max(np.abs(pm - p))), 1e-12))
    rows.append(ReportRow("variational", "symbol-contraction-3d", seed, gname,
                          _symbol_contraction_residual(), 1e-12))

    # flat-state exact zeros
    flat = dy.flat_state(grid)
    fctx = vr.cotetrad_context(flat.theta, grid)
    rows.append(ReportRow("variational", "flat dS1 zero", seed, gname,
                          float(max(np.max(np.abs(vr.dS1_dtheta(fctx, flat.p, M))),
                                    np.max(np.abs(vr.dS1_dp(fctx, flat.p, M))))), 1e-14))
    dmxi = vr.dS2_dp(fctx, M)
    expect = fctx.xi[..., None] * fl.d_components(M, 0, grid)[None]
    rows.append(ReportRow("variational", "flat dS2/dp is xi dM", seed, gname,
                          _rel(np.max(np.abs(dmxi - expect)), np.max(np.abs(expect))), 1e-12))

    # Lie-star identity refinement study
    errs = []
    for n in refinement:
        g = fl.PeriodicGrid.cubic(n)
        th = tp.flat_cotetrad(g).components.copy()
        for A in range(4):
            th[A] += fl.BandlimitedForm.random(1, 1, 0.05, seed + 100 + A).sample(g).components
        c = vr.cotetrad_context(th, g)
        a = axis_limited_form(1, 1, 0.3, 0, seed + 110).sample(g).components
        b = axis_limited_form(1, 1, 0.3, 1, seed + 111).sample(g).components
        Mv = axis_limited_vector(1, 0.3, 2, seed + 112).sample(g).components
        r = vr.lie_star_residual(Mv, a, b, 1, c)
        errs.append(float(np.sqrt(np.mean(r**2))))
    orders = measure_orders(errs)
    for (na, nb), order in zip(zip(refinement, refinement[1:]), orders):
        rows.append(ReportRow("variational", f"lie-star order {na}->{nb}", seed, f"{na}^3/{nb}^3",
                              0.0, math.inf, order))
    rows.append(ReportRow("variational", "lie-star asymptotic order", seed,
                          f"{refinement[-2]}^3/{refinement[-1]}^3",
                          order_row_residual(orders[-1], ORDER_BAR_STENCIL), 0.0, orders[-1]))
    # zero vector field: every term vanishes individually
    za = fl.random_bandlimited(grid, 1, 1, 0.3, seed + 113).components
    zb = fl.random_bandlimited(grid, 1, 1, 0.3, seed + 114).components
    zres = vr.lie_star_residual(np.zeros(grid.shape + (3,)), za, zb, 1, ctx)
    rows.append(ReportRow("variational", "lie-star zero field", seed, gname, float(np.max(np.abs(zres))), 1e-14))
    return rows


def _fd_direction(grid: fl.PeriodicGrid, family: str, seed) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    dth = np.zeros((4,) + grid.shape + (3,))
    dpp = np.zeros((4,) + grid.shape + (3, 3))
    if family in ("theta", "both"):
        dth = np.stack([fl.BandlimitedForm.random(1, 2, 0.01, rng).sample(grid).components
                        for _ in range(4)])
    if family in ("p", "both"):
        dpp = np.stack([fl.BandlimitedForm.random(2, 2, 0.01, rng).sample(grid).components
                        for _ in range(4)])
    return dth, dpp


def _symbol_contraction_residual() -> float:
    """Exact symbol identity used by the form/density dictionaries, n = 3.

    Contracting the weight -1 and weight +1 permutation symbols over their
    first k indices leaves k! l! antisymmetrized deltas, for every k.
    """
    eps = ex.levi_civita(3)
    eye = np.eye(3)
    worst = 0.0
    for k in range(0, 4):
        l = 3 - k
        left = "abc"[:k]
        right = "abc"[k:]
        out = "xyz"[:l]
        if k == 0:
            lhs = np.einsum("abc,xyz->abcxyz", eps, eps)
        elif l == 0:
            lhs = np.einsum("abc,abc->", eps, eps)
        else:
            lhs = np.einsum(f"{left}{right},{left}{out}->{right}{out}", eps, eps)
        if l == 0:
            rhs = np.array(float(math.factorial(k)))
        else:
            sub = ",".join(f"{right[i]}{out[i]}" for i in range(l))
            outer = np.einsum(f"{sub}->{right}{out}", *([eye] * l))
            rhs = math.factorial(k) * math.factorial(l) * ex.antisymmetrize(outer, l)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


# ---------------------------------------------------------------------------
# bracket closure suite


def closure_battery(grid: fl.PeriodicGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Smearings for the closure study: varying, noncommuting fields."""
    x = grid.coordinates()
    L = grid.periods
    M = np.broadcast_to(np.cos(2.0 * np.pi * x[0] / L[0]), grid.shape).copy()
    Mp = np.broadcast_to(np.sin(2.0 * np.pi * x[1] / L[1]), grid.shape).copy()
    Mv = np.zeros(grid.shape + (3,))
    Mv[..., 1] = np.broadcast_to(np.cos(2.0 * np.pi * x[0] / L[0]), grid.shape)
    Mvp = np.zeros(grid.shape + (3,))
    Mvp[..., 2] = np.broadcast_to(np.cos(2.0 * np.pi * x[1] / L[1]), grid.shape)
    return M, Mp, Mv, Mvp


def drift_battery(grid: fl.PeriodicGrid) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Constraint-monitor smearings: constant and varying, noncommuting cases."""
    x = grid.coordinates()
    L = grid.periods
    M1 = np.ones(grid.shape)
    M2 = np.broadcast_to(np.cos(2.0 * np.pi * x[0] / L[0]), grid.shape).copy()
    Mv1 = np.zeros(grid.shape + (3,))
    Mv1[..., 0] = 1.0
    Mv2 = np.zeros(grid.shape + (3,))
    Mv2[..., 2] = np.broadcast_to(np.cos(2.0 * np.pi * x[1] / L[1]), grid.shape)
    return [M1, M2], [Mv1, Mv2]


def bracket_suite(grids: tuple[int, ...], seed: int, amplitude: float = 0.1) -> list[ReportRow]:
    """Constraint-algebra closure refinement study with the frozen-metric control."""
    if len(grids) < 2:
        raise ValueError("need at least two grids for a refinement study")
    rows = []
    r1s, r2s, r3s, controls = [], [], [], []
    for n in grids:
        grid = fl.PeriodicGrid.cubic(n)
        state = dy.random_state(grid, amplitude, seed)
        M, Mp, Mv, Mvp = closure_battery(grid)
        r1, r2, r3 = dy.bracket_closure(state, M, Mp, Mv, Mvp)
        rc = dy.bracket_closure(state, M, Mp, Mv, Mvp, frozen_metric=True)[1]
        r1s.append(abs(r1))
        r2s.append(abs(r2))
        r3s.append(abs(r3))
        controls.append(abs(rc))
        for name, val in (("vv-closure", r1), ("ss-closure", r2), ("sv-closure", r3)):
            rows.append(ReportRow("brackets", f"{name} residual", seed, f"{n}^3", abs(val), math.inf))
        rows.append(ReportRow("brackets", "ss-frozen-control residual", seed, f"{n}^3", abs(rc), math.inf))

        # exact antisymmetry cases on the coarsest grid only
        if n == grids[0]:
            ctx = state.context()
            gS = vr.scalar_gradient(ctx, state.p, M)
            self_bracket = vr.poisson_bracket(gS, gS, grid)
            rows.append(ReportRow("brackets", "self-bracket zero", seed, f"{n}^3", abs(self_bracket), 1e-12))
            r2_same = dy.bracket_closure(state, M, M, Mv, Mv)[1]
            m_zero = (M[..., None] * dy.gradient_smearing(M, grid)
                      - M[..., None] * dy.gradient_smearing(M, grid))
            rows.append(ReportRow("brackets", "equal-smearing ss residual", seed, f"{n}^3",
                                  abs(r2_same) + float(np.max(np.abs(m_zero))), 1e-12))

    for name, series in (("vv-closure", r1s), ("ss-closure", r2s), ("sv-closure", r3s)):
        orders = measure_orders(series)
        for (na, nb), order in zip(zip(grids, grids[1:]), orders):
            rows.append(ReportRow("brackets", f"{name} order {na}->{nb}", seed, f"{na}^3/{nb}^3",
                                  0.0, math.inf, order))
        rows.append(ReportRow("brackets", f"{name} asymptotic order", seed,
                              f"{grids[-2]}^3/{grids[-1]}^3",
                              order_row_residual(orders[-1], ORDER_BAR_BRACKET), 0.0, orders[-1]))
    ctrl_orders = measure_orders(controls)
    rows.append(ReportRow("brackets", "frozen-control must not converge", seed,
                          f"{grids[-2]}^3/{grids[-1]}^3",
                          order_row_residual(ctrl_orders[-1], 1.0, forbid=True), 0.0, ctrl_orders[-1]))
    return rows
