"""Mini-grammar for smearing fields given on the command line.

Scalars:  "const:c"             constant c
          "cos:axis:mode:amp"   amp * cos(2 pi * mode * x_axis / L_axis)
Vectors:  "e1:amp" | "e2:amp" | "e3:amp"    constant coordinate direction
          "cos:axis:mode:amp:dir"           cosine profile along dir

Axes and directions are 1-based on the command line.
"""

from __future__ import annotations

import numpy as np

from teleham.fields import PeriodicGrid

__all__ = ["parse_scalar_smearing", "parse_vector_smearing", "SmearingError"]


class SmearingError(ValueError):
    pass


def _cos_profile(grid: PeriodicGrid, axis: int, mode: int, amp: float) -> np.ndarray:
    if not 0 <= axis <= 2:
        raise SmearingError(f"axis must be 1..3, got {axis + 1}")
    x = grid.coordinates()[axis]
    L = grid.periods[axis]
    return np.broadcast_to(amp * np.cos(2.0 * np.pi * mode * x / L), grid.shape).copy()


def parse_scalar_smearing(spec: str, grid: PeriodicGrid) -> np.ndarray:
    parts = spec.split(":")
    try:
        if parts[0] == "const" and len(parts) == 2:
            return float(parts[1]) * np.ones(grid.shape)
        if parts[0] == "cos" and len(parts) == 4:
            axis, mode, amp = int(parts[1]) - 1, int(parts[2]), float(parts[3])
            return _cos_profile(grid, axis, mode, amp)
    except ValueError as exc:
        raise SmearingError(f"bad scalar smearing {spec!r}: {exc}") from exc
    raise SmearingError(f"bad scalar smearing {spec!r}")


def parse_vector_smearing(spec: str, grid: PeriodicGrid) -> np.ndarray:
    parts = spec.split(":")
    try:
        if parts[0] in ("e1", "e2", "e3") and len(parts) == 2:
            out = np.zeros(grid.shape + (3,))
            out[..., int(parts[0][1]) - 1] = float(parts[1])
            return out
        if parts[0] == "cos" and len(parts) == 5:
            axis, mode, amp, direction = int(parts[1]) - 1, int(parts[2]), float(parts[3]), int(parts[4]) - 1
            if not 0 <= direction <= 2:
                raise SmearingError(f"direction must be 1..3, got {direction + 1}")
            out = np.zeros(grid.shape + (3,))
            out[..., direction] = _cos_profile(grid, axis, mode, amp)
            return out
    except ValueError as exc:
        raise SmearingError(f"bad vector smearing {spec!r}: {exc}") from exc
    raise SmearingError(f"bad vector smearing {spec!r}")
