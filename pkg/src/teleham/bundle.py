"""Field bundle file format: state snapshots on disk.

Layout: a text header of key=value lines terminated by one blank line,
then a little-endian float64 payload in declared order

    theta  4 x 3 x Npts   (theta^A_i, A outer, i middle)
    p      4 x 3 x Npts   (independent two-form components (12),(13),(23))
    lapse  Npts
    shift  3 x Npts

Points run in row-major order over (N1, N2, N3), the third axis fastest.
The payload is written and read bit-exactly, so a write/read roundtrip is
lossless.  Parse failures report the byte offset of the offending header
line; non-finite payload entries are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from teleham.dynamics import Multipliers, PhaseState
from teleham.fields import PeriodicGrid

__all__ = ["FieldBundle", "BundleFormatError", "write_bundle", "read_bundle"]

_MAGIC = "teleham-bundle"
_PAIRS = [(0, 1), (0, 2), (1, 2)]


class BundleFormatError(ValueError):
    """Malformed bundle; message carries the byte offset of the failure."""


@dataclass(frozen=True)
class FieldBundle:
    grid: PeriodicGrid
    theta: np.ndarray            # (4,) + grid.shape + (3,)
    p: np.ndarray                # (4,) + grid.shape + (3, 3)
    lapse: np.ndarray            # grid.shape
    shift: np.ndarray            # grid.shape + (3,)
    seed: int = 0
    description: str = ""

    def state(self) -> PhaseState:
        return PhaseState(self.grid, self.theta, self.p)

    def multipliers(self) -> Multipliers:
        return Multipliers(self.lapse, self.shift)


def _flatten_payload(bundle: FieldBundle) -> np.ndarray:
    grid = bundle.grid
    npts = grid.npoints
    theta = np.moveaxis(bundle.theta, -1, 1).reshape(4, 3, npts)
    p_ind = np.stack([bundle.p[..., i, j] for i, j in _PAIRS], axis=1).reshape(4, 3, npts)
    lapse = bundle.lapse.reshape(npts)
    shift = np.moveaxis(bundle.shift, -1, 0).reshape(3, npts)
    return np.concatenate([theta.ravel(), p_ind.ravel(), lapse, shift.ravel()])


def write_bundle(path, bundle: FieldBundle) -> None:
    payload = _flatten_payload(bundle)
    if not np.all(np.isfinite(payload)):
        raise ValueError("bundle payload contains non-finite values")
    n = bundle.grid.shape
    h = bundle.grid.spacing
    header = (
        f"format={_MAGIC}\n"
        f"n={n[0]},{n[1]},{n[2]}\n"
        f"h={h[0]!r},{h[1]!r},{h[2]!r}\n"
        f"seed={bundle.seed}\n"
        f"description={bundle.description}\n"
        "\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(payload.astype("<f8").tobytes())


def read_bundle(path) -> FieldBundle:
    with open(path, "rb") as fh:
        raw = fh.read()
    fields = {}
    offset = 0
    while True:
        end = raw.find(b"\n", offset)
        if end < 0:
            raise BundleFormatError(f"unterminated header at byte offset {offset}")
        line = raw[offset:end]
        if line == b"":
            offset = end + 1
            break
        try:
            key, value = line.decode("utf-8").split("=", 1)
        except (UnicodeDecodeError, ValueError) as exc:
            raise BundleFormatError(f"bad header line at byte offset {offset}: {exc}") from exc
        fields[key] = value
        offset = end + 1
    if fields.get("format") != _MAGIC:
        raise BundleFormatError(f"missing or wrong format marker at byte offset 0")
    try:
        shape = tuple(int(v) for v in fields["n"].split(","))
        spacing = tuple(float(v) for v in fields["h"].split(","))
        seed = int(fields.get("seed", "0"))
    except (KeyError, ValueError) as exc:
        raise BundleFormatError(f"bad grid header before byte offset {offset}: {exc}") from exc
    grid = PeriodicGrid(shape, spacing)
    npts = grid.npoints
    expected = (4 * 3 + 4 * 3 + 1 + 3) * npts
    payload = np.frombuffer(raw, dtype="<f8", offset=offset)
    if payload.size != expected:
        raise BundleFormatError(
            f"payload of {payload.size} values at byte offset {offset}, expected {expected}")
    if not np.all(np.isfinite(payload)):
        bad = int(np.argwhere(~np.isfinite(payload))[0, 0])
        raise BundleFormatError(f"non-finite payload value at byte offset {offset + 8 * bad}")
    pos = 0
    theta_flat = payload[pos:pos + 12 * npts].reshape(4, 3, npts)
    pos += 12 * npts
    p_flat = payload[pos:pos + 12 * npts].reshape(4, 3, npts)
    pos += 12 * npts
    lapse = payload[pos:pos + npts].reshape(grid.shape).copy()
    pos += npts
    shift_flat = payload[pos:pos + 3 * npts].reshape(3, npts)
    theta = np.moveaxis(theta_flat.reshape(4, 3, *grid.shape), 1, -1).copy()
    p = np.zeros((4,) + grid.shape + (3, 3))
    p_ind = p_flat.reshape(4, 3, *grid.shape)
    for k, (i, j) in enumerate(_PAIRS):
        p[..., i, j] = p_ind[:, k]
        p[..., j, i] = -p_ind[:, k]
    shift = np.moveaxis(shift_flat.reshape(3, *grid.shape), 0, -1).copy()
    return FieldBundle(grid, theta, p, lapse, shift, seed,
                       fields.get("description", ""))
