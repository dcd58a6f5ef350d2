"""Pointwise exterior algebra of k-forms in low dimension.

Forms are stored as dense, fully antisymmetric component arrays.  Every
kernel in this module accepts arbitrary leading batch axes in front of the
trailing form axes, so the same code evaluates a single algebraic identity
at one point or at every node of a grid (and for every internal index) in
one vectorized call.

Conventions, fixed once for the whole package:

* (alpha ^ beta)_{m1..mk n1..nl} = C(k+l, k) * antisym(alpha (x) beta)
* (X _| alpha)_{m2..mk} = X^{m1} alpha_{m1 m2..mk}
* <alpha|beta> = (1/k!) alpha^{m1..mk} beta_{m1..mk}
* eps_{1..n} = orientation * sqrt((-1)^m det g), m = number of negative
  eigenvalues of g
* (*beta)_{n1..nl} = (1/k!) beta^{m1..mk} eps_{m1..mk n1..nl}
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations

import numpy as np

__all__ = [
    "Signature",
    "KForm",
    "MetricAtPoint",
    "VectorAtPoint",
    "DegenerateMetricError",
    "levi_civita",
    "antisymmetrize",
    "wedge_components",
    "contract_components",
    "raise_components",
    "scalar_product_components",
    "hodge_components",
    "volume_components",
    "wedge",
    "contract",
    "volume_form",
    "levi_contraction",
    "scalar_product",
    "hodge",
    "raise_index",
]

_AXES = "abcdefghijkl"


class DegenerateMetricError(ValueError):
    """Metric determinant too close to zero for Hodge duality."""


def _perm_parity(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


@lru_cache(maxsize=None)
def levi_civita(n: int) -> np.ndarray:
    """Dense rank-n permutation symbol with entries in {-1, 0, +1}."""
    eps = np.zeros((n,) * n)
    for perm in permutations(range(n)):
        eps[perm] = _perm_parity(perm)
    eps.setflags(write=False)
    return eps


@lru_cache(maxsize=None)
def _signed_perms(k: int) -> tuple:
    return tuple((perm, _perm_parity(perm)) for perm in permutations(range(k)))


def antisymmetrize(comps: np.ndarray, k: int) -> np.ndarray:
    """Antisymmetrizing projection over the trailing k axes (includes 1/k!)."""
    comps = np.asarray(comps, dtype=float)
    if k < 2:
        return comps
    lead = comps.ndim - k
    total = np.zeros_like(comps)
    for perm, sign in _signed_perms(k):
        axes = tuple(range(lead)) + tuple(lead + p for p in perm)
        total += sign * np.transpose(comps, axes)
    return total / math.factorial(k)


@lru_cache(maxsize=None)
def _shuffles(k: int, l: int) -> tuple:
    """Axis reorderings and signs for the (k, l)-shuffle sum of a wedge product."""
    out = []
    for subset in combinations(range(k + l), k):
        rest = [i for i in range(k + l) if i not in subset]
        perm = list(subset) + rest
        axes = tuple(int(i) for i in np.argsort(perm))
        out.append((axes, _perm_parity(perm)))
    return tuple(out)


def wedge_components(a: np.ndarray, ka: int, b: np.ndarray, kb: int) -> np.ndarray:
    """Wedge of antisymmetric component arrays via the shuffle sum."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if ka == 0 and kb == 0:
        return a * b
    if ka == 0:
        return a[(...,) + (None,) * kb] * b
    if kb == 0:
        return a * b[(...,) + (None,) * ka]
    outer = a[(...,) + (slice(None),) * ka + (None,) * kb] * b[(...,) + (None,) * ka + (slice(None),) * kb]
    lead = outer.ndim - ka - kb
    total = None
    for axes, sign in _shuffles(ka, kb):
        arranged = np.transpose(outer, tuple(range(lead)) + tuple(lead + ax for ax in axes))
        term = sign * arranged
        total = term if total is None else total + term
    return total


def contract_components(v: np.ndarray, a: np.ndarray, k: int) -> np.ndarray:
    """Interior product; k = 0 yields the zero scalar by convention."""
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    if k == 0:
        batch = np.broadcast_shapes(v.shape[:-1], a.shape)
        return np.zeros(batch)
    rest = _AXES[1:k]
    return np.einsum(f"...a,...a{rest}->...{rest}", v, a)


def raise_components(a: np.ndarray, k: int, ginv: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=float)
    idx = _AXES[:k]
    for t in range(k):
        src = idx[:t] + "z" + idx[t + 1:]
        out = np.einsum(f"...{idx[t]}z,...{src}->...{idx}", ginv, out)
    return out


def scalar_product_components(a: np.ndarray, b: np.ndarray, k: int, ginv: np.ndarray) -> np.ndarray:
    if k == 0:
        return np.asarray(a, dtype=float) * np.asarray(b, dtype=float)
    idx = _AXES[:k]
    araised = raise_components(a, k, ginv)
    return np.einsum(f"...{idx},...{idx}->...", araised, b) / math.factorial(k)


def hodge_components(b: np.ndarray, k: int, ginv: np.ndarray, scale: np.ndarray, n: int) -> np.ndarray:
    """Hodge dual of the trailing-k-axis components; scale = orientation * sqrt(|det g|)."""
    eps = levi_civita(n)
    scale = np.asarray(scale, dtype=float)
    braised = raise_components(b, k, ginv)
    up = _AXES[:k]
    out = _AXES[k:n]
    if k == 0:
        core = np.einsum(f"...,{out}->...{out}", braised, eps)
    else:
        core = np.einsum(f"...{up},{up}{out}->...{out}", braised, eps)
        core /= math.factorial(k)
    return core * scale[(...,) + (None,) * (n - k)]


def volume_components(scale: np.ndarray, n: int) -> np.ndarray:
    scale = np.asarray(scale, dtype=float)
    return scale[(...,) + (None,) * n] * levi_civita(n)


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class Signature:
    """Dimension n and number m of -1 eigenvalues of the metric."""

    n: int
    m: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"dimension must be positive, got {self.n}")
        if not 0 <= self.m <= self.n:
            raise ValueError(f"need 0 <= m <= n, got m={self.m}, n={self.n}")

    @property
    def sign_factor(self) -> int:
        return -1 if self.m % 2 else 1


@dataclass(frozen=True)
class MetricAtPoint:
    """Metric context (possibly batched over leading axes) with fixed orientation.

    Derived fields ginv / det / sqrt_abs_det are computed on construction;
    (-1)^m det > 0 is enforced and near-degenerate metrics are rejected.
    """

    g: np.ndarray
    signature: Signature
    orientation: int = 1
    ginv: np.ndarray = None
    det: np.ndarray = None
    sqrt_abs_det: np.ndarray = None

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        n = self.signature.n
        if g.shape[-2:] != (n, n):
            raise ValueError(f"metric shape {g.shape} incompatible with n={n}")
        if np.max(np.abs(g - np.swapaxes(g, -1, -2))) > 1e-12 * max(1.0, np.max(np.abs(g))):
            raise ValueError("metric is not symmetric")
        det = np.linalg.det(g)
        scale = np.max(np.abs(g), axis=(-2, -1))
        if np.any(np.abs(det) < 1e-14 * np.maximum(scale, 1e-300) ** n):
            raise DegenerateMetricError("metric determinant below degeneracy threshold")
        signed = self.signature.sign_factor * det
        if np.any(signed <= 0.0):
            raise ValueError(f"(-1)^m det g must be positive for signature {self.signature}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "ginv", np.linalg.inv(g))
        object.__setattr__(self, "det", det)
        object.__setattr__(self, "sqrt_abs_det", np.sqrt(signed))

    @property
    def n(self) -> int:
        return self.signature.n

    @property
    def hodge_scale(self) -> np.ndarray:
        return self.orientation * self.sqrt_abs_det

    def hodge(self, comps: np.ndarray, k: int) -> np.ndarray:
        return hodge_components(comps, k, self.ginv, self.hodge_scale, self.n)

    def volume(self) -> np.ndarray:
        return volume_components(self.hodge_scale, self.n)

    @classmethod
    def euclidean(cls, n: int) -> "MetricAtPoint":
        return cls(np.eye(n), Signature(n, 0))

    @classmethod
    def minkowski(cls) -> "MetricAtPoint":
        return cls(np.diag([-1.0, 1.0, 1.0, 1.0]), Signature(4, 1))


@dataclass(frozen=True)
class KForm:
    """Antisymmetric rank-k covariant array in n dimensions (batched allowed)."""

    degree: int
    n: int
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if not 0 <= self.degree <= self.n:
            raise ValueError(f"degree {self.degree} not representable in n={self.n}")
        if comps.shape[comps.ndim - self.degree:] != (self.n,) * self.degree:
            raise ValueError(f"component shape {comps.shape} does not end in (n,)*k")
        object.__setattr__(self, "components", comps)

    def antisymmetry_defect(self) -> float:
        return float(np.max(np.abs(self.components - antisymmetrize(self.components, self.degree)), initial=0.0))

    @classmethod
    def zero(cls, n: int, degree: int, batch: tuple = ()) -> "KForm":
        return cls(degree, n, np.zeros(batch + (n,) * degree))

    @classmethod
    def basis(cls, n: int, indices: tuple) -> "KForm":
        """Coordinate basis form dx^{i1} ^ ... ^ dx^{ik} (0-based indices)."""
        k = len(indices)
        comps = np.zeros((n,) * k) if k else np.array(1.0)
        if k:
            seed = np.zeros((n,) * k)
            seed[tuple(indices)] = 1.0
            comps = math.factorial(k) * antisymmetrize(seed, k)
        return cls(k, n, comps)


@dataclass(frozen=True)
class VectorAtPoint:
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))

    @property
    def n(self) -> int:
        return self.components.shape[-1]


# ---------------------------------------------------------------------------
# operations on the domain types


def wedge(a: KForm, b: KForm) -> KForm:
    if a.n != b.n:
        raise ValueError("mixed dimensions in wedge")
    k = a.degree + b.degree
    if k > a.n:
        raise ValueError(f"wedge degree {k} exceeds dimension {a.n}")
    return KForm(k, a.n, wedge_components(a.components, a.degree, b.components, b.degree))


def contract(X: VectorAtPoint, a: KForm) -> KForm:
    if X.n != a.n:
        raise ValueError("mixed dimensions in contraction")
    k = max(a.degree - 1, 0)
    return KForm(k, a.n, contract_components(X.components, a.components, a.degree))


def volume_form(metric: MetricAtPoint, signature: Signature | None = None) -> KForm:
    if signature is not None and signature != metric.signature:
        raise ValueError("signature disagrees with metric context")
    return KForm(metric.n, metric.n, metric.volume())


def levi_contraction(signature: Signature, k: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the volume-form contraction identity, as explicit arrays.

    Entry layout of the returned pair is (nu_1..nu_l, mu_1..mu_l); the left
    side is eps_{r..nu..} eps^{r..mu..} in an orthonormal basis, the right
    side (-1)^m k! l! delta^{[mu_1}_{nu_1} .. delta^{mu_l]}_{nu_l}.
    """
    n, m = signature.n, signature.m
    if k + l != n:
        raise ValueError(f"need k + l = n, got {k} + {l} != {n}")
    eps = levi_civita(n)
    sf = signature.sign_factor
    if l == 0:
        lhs = np.array(sf * float(np.einsum(eps, list(range(n)), eps, list(range(n)))))
        rhs = np.array(sf * float(math.factorial(k)))
        return lhs, rhs
    rr = _AXES[:k]
    nu = _AXES[k:k + l]
    mu = _AXES[k + l:k + 2 * l]
    lhs = sf * np.einsum(f"{rr}{nu},{rr}{mu}->{nu}{mu}", eps, eps)
    eye = np.eye(n)
    pieces = [eye] * l
    sub = ",".join(f"{nu[i]}{mu[i]}" for i in range(l))
    outer = np.einsum(f"{sub}->{nu}{mu}", *pieces)
    rhs = sf * math.factorial(k) * math.factorial(l) * antisymmetrize(outer, l)
    return lhs, rhs


def scalar_product(a: KForm, b: KForm, metric: MetricAtPoint) -> np.ndarray:
    if a.degree != b.degree:
        raise ValueError(f"degree mismatch {a.degree} != {b.degree}")
    return scalar_product_components(a.components, b.components, a.degree, metric.ginv)


def hodge(b: KForm, metric: MetricAtPoint, signature: Signature | None = None) -> KForm:
    if signature is not None and signature != metric.signature:
        raise ValueError("signature disagrees with metric context")
    return KForm(metric.n - b.degree, metric.n, metric.hodge(b.components, b.degree))


def raise_index(a: KForm, metric: MetricAtPoint) -> VectorAtPoint:
    if a.degree != 1:
        raise ValueError("raise_index expects a one-form")
    return VectorAtPoint(raise_components(a.components, 1, metric.ginv))
