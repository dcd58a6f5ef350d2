"""Fields of forms and vectors on a flat periodic 3-torus grid.

Component arrays carry the three grid axes immediately before the form
axes, with optional extra leading axes (an internal-index quadruple, a
trial batch).  Spatial derivatives use 4th-order centered differences with
periodic wrap; integration is the plain Riemann sum, exact up to rounding
for band-limited periodic integrands.

Band-limited random fields are drawn from a grid-independent coefficient
spec (`TrigPoly`), so the same seed realizes the same continuum field on
every resolution -- that is what makes refinement studies meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from teleham.exterior import antisymmetrize, contract_components, wedge_components

__all__ = [
    "PeriodicGrid",
    "FormField",
    "VectorFieldOnGrid",
    "TrigPoly",
    "BandlimitedForm",
    "BandlimitedVector",
    "partial_derivative",
    "d_components",
    "exterior_derivative",
    "lie_components",
    "lie_derivative",
    "lie_derivative_coordinate",
    "integrate",
    "integrate_components",
    "random_bandlimited",
    "random_bandlimited_vector",
]


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on the 3-torus with periods L_i = N_i h_i."""

    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]

    def __post_init__(self):
        if len(self.shape) != 3 or any(int(s) < 1 for s in self.shape):
            raise ValueError(f"bad grid shape {self.shape}")
        if len(self.spacing) != 3 or any(h <= 0 for h in self.spacing):
            raise ValueError(f"bad grid spacing {self.spacing}")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))

    @classmethod
    def cubic(cls, n: int, period: float = 2.0 * math.pi) -> "PeriodicGrid":
        return cls((n, n, n), (period / n,) * 3)

    @property
    def periods(self) -> tuple[float, float, float]:
        return tuple(n * h for n, h in zip(self.shape, self.spacing))

    @property
    def npoints(self) -> int:
        return self.shape[0] * self.shape[1] * self.shape[2]

    @property
    def cell_volume(self) -> float:
        return self.spacing[0] * self.spacing[1] * self.spacing[2]

    def axis_coordinates(self, i: int) -> np.ndarray:
        return np.arange(self.shape[i]) * self.spacing[i]

    def coordinates(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, shapes (N1,1,1), (1,N2,1), (1,1,N3)."""
        out = []
        for i in range(3):
            shape = [1, 1, 1]
            shape[i] = self.shape[i]
            out.append(self.axis_coordinates(i).reshape(shape))
        return out


@dataclass(frozen=True)
class FormField:
    """Degree-k form field; components shaped lead + grid.shape + (3,)*k.

    Degree 4 is legal only as the empty marker produced by d on a top form:
    its final axis has size zero and it supports no further operations.
    """

    grid: PeriodicGrid
    degree: int
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if self.degree == 4:
            if comps.shape[-1] != 0:
                raise ValueError("degree-4 fields exist only as the empty marker")
        elif not 0 <= self.degree <= 3:
            raise ValueError(f"bad degree {self.degree}")
        else:
            tail = comps.shape[comps.ndim - self.degree:] if self.degree else ()
            if tail != (3,) * self.degree:
                raise ValueError(f"component shape {comps.shape} does not end in (3,)*{self.degree}")
            gaxes = comps.shape[comps.ndim - self.degree - 3: comps.ndim - self.degree]
            if gaxes != self.grid.shape:
                raise ValueError(f"component shape {comps.shape} lacks grid axes {self.grid.shape}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, grid: PeriodicGrid, degree: int, lead: tuple = ()) -> "FormField":
        return cls(grid, degree, np.zeros(lead + grid.shape + (3,) * degree))

    @property
    def is_empty_marker(self) -> bool:
        return self.degree == 4

    def antisymmetry_defect(self) -> float:
        return float(np.max(np.abs(self.components - antisymmetrize(self.components, self.degree)), initial=0.0))

    def __add__(self, other: "FormField") -> "FormField":
        self._check_mate(other)
        return FormField(self.grid, self.degree, self.components + other.components)

    def __sub__(self, other: "FormField") -> "FormField":
        self._check_mate(other)
        return FormField(self.grid, self.degree, self.components - other.components)

    def __rmul__(self, c: float) -> "FormField":
        return FormField(self.grid, self.degree, c * self.components)

    def _check_mate(self, other: "FormField"):
        if self.grid != other.grid or self.degree != other.degree:
            raise ValueError("grid or degree mismatch")


@dataclass(frozen=True)
class VectorFieldOnGrid:
    """Contravariant vector field; components shaped lead + grid.shape + (3,)."""

    grid: PeriodicGrid
    components: np.ndarray

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        if comps.shape[-1] != 3 or comps.shape[-4:-1] != self.grid.shape:
            raise ValueError(f"vector component shape {comps.shape} incompatible with grid")
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, grid: PeriodicGrid) -> "VectorFieldOnGrid":
        return cls(grid, np.zeros(grid.shape + (3,)))


# ---------------------------------------------------------------------------
# derivatives and integration on raw component arrays


def partial_derivative(values: np.ndarray, axis_from_end: int, h: float) -> np.ndarray:
    """4th-order centered difference along a grid axis addressed from the end.

    axis_from_end counts backwards over the trailing (grid + form) axes:
    for a degree-k array the grid axis x^i sits at position -(k + 3 - i).
    """
    ax = values.ndim - axis_from_end
    fwd1 = np.roll(values, -1, axis=ax)
    bwd1 = np.roll(values, 1, axis=ax)
    fwd2 = np.roll(values, -2, axis=ax)
    bwd2 = np.roll(values, 2, axis=ax)
    return (8.0 * (fwd1 - bwd1) - (fwd2 - bwd2)) / (12.0 * h)


def _grad_components(comps: np.ndarray, k: int, grid: PeriodicGrid) -> np.ndarray:
    """Stack of partial derivatives, new coordinate axis inserted before the form axes."""
    parts = [partial_derivative(comps, k + 3 - i, grid.spacing[i]) for i in range(3)]
    return np.stack(parts, axis=comps.ndim - k)


def d_components(comps: np.ndarray, k: int, grid: PeriodicGrid) -> np.ndarray:
    """Raw-array exterior derivative of trailing-form-axis components."""
    if k >= 3:
        raise ValueError("d of a top form vanishes identically on the slice")
    grad = _grad_components(comps, k, grid)
    return (k + 1) * antisymmetrize(grad, k + 1)


def exterior_derivative(f: FormField) -> FormField:
    """d via antisymmetrized 4th-order partial derivatives; d of a top form is the empty marker."""
    if f.degree == 3:
        lead = f.components.shape[: f.components.ndim - 6]
        return FormField(f.grid, 4, np.zeros(lead + f.grid.shape + (0,)))
    return FormField(f.grid, f.degree + 1, d_components(f.components, f.degree, f.grid))


def lie_components(X: np.ndarray, comps: np.ndarray, k: int, grid: PeriodicGrid) -> np.ndarray:
    """Lie derivative along X via d(X _| f) + X _| df on raw component arrays."""
    if k == 0:
        return contract_components(X, d_components(comps, 0, grid), 1)
    term1 = d_components(contract_components(X, comps, k), k - 1, grid)
    if k == 3:
        return term1
    term2 = contract_components(X, d_components(comps, k, grid), k + 1)
    return term1 + term2


def lie_derivative(X: VectorFieldOnGrid, f: FormField) -> FormField:
    if X.grid != f.grid:
        raise ValueError("grid mismatch between vector field and form field")
    return FormField(f.grid, f.degree, lie_components(X.components, f.components, f.degree, f.grid))


def lie_derivative_coordinate(X: VectorFieldOnGrid, f: FormField) -> FormField:
    """Coordinate expression for one-forms: (X^i d_i f_j + f_i d_j X^i) dx^j."""
    if f.degree != 1:
        raise ValueError("coordinate Lie derivative implemented for one-forms only")
    gradf = _grad_components(f.components, 1, f.grid)
    gradX = _grad_components(X.components, 1, X.grid)
    adv = np.einsum("...i,...ij->...j", X.components, gradf)
    stretch = np.einsum("...i,...ji->...j", f.components, gradX)
    return FormField(f.grid, 1, adv + stretch)


def integrate_components(comps: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Riemann-sum integral of raw 3-form components over the torus."""
    top = np.asarray(comps, dtype=float)[..., 0, 1, 2]
    return np.sum(top, axis=(-3, -2, -1)) * grid.cell_volume


def integrate(f: FormField) -> np.ndarray:
    """Riemann-sum integral of a 3-form over the torus."""
    if f.degree != 3:
        raise ValueError(f"integration needs a 3-form, got degree {f.degree}")
    return integrate_components(f.components, f.grid)


# ---------------------------------------------------------------------------
# band-limited random fields


def half_lattice_modes(max_mode: int) -> np.ndarray:
    """One representative per +-m pair of nonzero integer modes with |m|_inf <= max_mode."""
    modes = []
    for m in product(range(-max_mode, max_mode + 1), repeat=3):
        if m == (0, 0, 0):
            continue
        lead = next(c for c in m if c != 0)
        if lead > 0:
            modes.append(m)
    return np.array(modes, dtype=int)


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial on the torus, sum of amp*cos(2 pi m.x/L + phase)."""

    modes: np.ndarray
    amps: np.ndarray
    phases: np.ndarray

    @classmethod
    def random(cls, max_mode: int, amplitude: float, rng: np.random.Generator) -> "TrigPoly":
        modes = half_lattice_modes(max_mode)
        amps = rng.uniform(-amplitude, amplitude, size=len(modes))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(modes))
        return cls(modes, amps, phases)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def sample(self, grid: PeriodicGrid) -> np.ndarray:
        coords = grid.coordinates()
        periods = grid.periods
        out = np.zeros(grid.shape)
        for m, a, ph in zip(self.modes, self.amps, self.phases):
            phase = 2.0 * np.pi * sum(m[i] * coords[i] / periods[i] for i in range(3)) + ph
            out += a * np.cos(phase)
        return out


_INDEP = {0: [()], 1: [(0,), (1,), (2,)], 2: [(0, 1), (0, 2), (1, 2)], 3: [(0, 1, 2)]}


def _fill_components(degree: int, grid: PeriodicGrid, values: list[np.ndarray]) -> np.ndarray:
    if degree == 0:
        return values[0]
    comps = np.zeros(grid.shape + (3,) * degree)
    for idx, val in zip(_INDEP[degree], values):
        seed = np.zeros(grid.shape + (3,) * degree)
        seed[(...,) + idx] = val
        comps += math.factorial(degree) * antisymmetrize(seed, degree)
    return comps


@dataclass(frozen=True)
class BandlimitedForm:
    """Grid-independent spec of a band-limited form field: one TrigPoly per component."""

    degree: int
    polys: tuple[TrigPoly, ...]
    max_mode: int
    amplitude: float

    @classmethod
    def random(cls, degree: int, max_mode: int, amplitude: float, seed) -> "BandlimitedForm":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        polys = tuple(TrigPoly.random(max_mode, amplitude, rng) for _ in _INDEP[degree])
        return cls(degree, polys, max_mode, amplitude)

    @property
    def n_modes(self) -> int:
        return self.polys[0].n_modes

    def sample(self, grid: PeriodicGrid) -> FormField:
        if self.max_mode > min(grid.shape) / 4:
            raise ValueError(f"max mode {self.max_mode} too large for grid {grid.shape}")
        values = [p.sample(grid) for p in self.polys]
        return FormField(grid, self.degree, _fill_components(self.degree, grid, values))


@dataclass(frozen=True)
class BandlimitedVector:
    polys: tuple[TrigPoly, TrigPoly, TrigPoly]
    max_mode: int

    @classmethod
    def random(cls, max_mode: int, amplitude: float, seed) -> "BandlimitedVector":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return cls(tuple(TrigPoly.random(max_mode, amplitude, rng) for _ in range(3)), max_mode)

    def sample(self, grid: PeriodicGrid) -> VectorFieldOnGrid:
        if self.max_mode > min(grid.shape) / 4:
            raise ValueError(f"max mode {self.max_mode} too large for grid {grid.shape}")
        return VectorFieldOnGrid(grid, np.stack([p.sample(grid) for p in self.polys], axis=-1))


def random_bandlimited(grid: PeriodicGrid, degree: int, max_mode: int, amplitude: float, seed) -> FormField:
    """Deterministic band-limited random form field; same seed, same coefficients on any grid."""
    return BandlimitedForm.random(degree, max_mode, amplitude, seed).sample(grid)


def random_bandlimited_vector(grid: PeriodicGrid, max_mode: int, amplitude: float, seed) -> VectorFieldOnGrid:
    return BandlimitedVector.random(max_mode, amplitude, seed).sample(grid)


def wedge_fields(a: FormField, b: FormField) -> FormField:
    if a.grid != b.grid:
        raise ValueError("grid mismatch in wedge")
    k = a.degree + b.degree
    if k > 3:
        raise ValueError(f"wedge degree {k} exceeds 3")
    return FormField(a.grid, k, wedge_components(a.components, a.degree, b.components, b.degree))
