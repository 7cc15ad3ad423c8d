"""Two-channel voxel encoding of electrode values and the contact point.

Channel 0 scatters the 19 electrode values into the cells containing their
positions; channel 1 is a one-hot marker for the cell containing the contact
point (all zeros when not in contact). Data is stored channels-first:
shape (2, nx, ny, nz).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutCollisionError, OutOfBoundsError, SchemaError
from .sensor import N_ELECTRODES, ElectrodeLayout, SurfaceGeometry

DEFAULT_DIMS = (15, 15, 7)

CHANNEL_ELECTRODES = 0
CHANNEL_CONTACT = 1
N_CHANNELS = 2


@dataclass(frozen=True)
class GridSpec:
    """Voxel grid dimensions and the axis-aligned box they cover (meters)."""

    dims: tuple[int, int, int] = DEFAULT_DIMS
    bounds_min: np.ndarray = None
    bounds_max: np.ndarray = None

    def __post_init__(self):
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise SchemaError(f"dims must be three positive counts, got {self.dims}")
        lo = np.asarray(self.bounds_min, dtype=float)
        hi = np.asarray(self.bounds_max, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise SchemaError("bounds must be 3-vectors")
        if np.any(hi <= lo):
            raise SchemaError("bounds_max must exceed bounds_min on every axis")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "bounds_min", lo)
        object.__setattr__(self, "bounds_max", hi)

    @property
    def cell_size(self) -> np.ndarray:
        return (self.bounds_max - self.bounds_min) / np.array(self.dims)

    def cell_center(self, index: tuple[int, int, int]) -> np.ndarray:
        return self.bounds_min + (np.array(index) + 0.5) * self.cell_size

    @classmethod
    def for_geometry(
        cls, geometry: SurfaceGeometry | None = None, dims: tuple[int, int, int] = DEFAULT_DIMS
    ) -> "GridSpec":
        """Grid covering the sensor bounding box plus a one-cell margin.

        The margin (one tight-box cell per side) keeps cap and edge contacts
        away from the clamped boundary cells.
        """
        geometry = geometry or SurfaceGeometry()
        lo, hi = geometry.tight_bounds()
        margin = (hi - lo) / np.array(dims)
        return cls(dims=dims, bounds_min=lo - margin, bounds_max=hi + margin)

    @classmethod
    def from_config(cls, config: dict) -> "GridSpec":
        try:
            return cls(
                dims=tuple(config["dims"]),
                bounds_min=np.array(config["bounds"]["min"], dtype=float),
                bounds_max=np.array(config["bounds"]["max"], dtype=float),
            )
        except KeyError as exc:
            raise SchemaError(f"grid spec missing field {exc.args[0]!r}") from exc

    def to_config(self) -> dict:
        return {
            "dims": list(self.dims),
            "bounds": {"min": self.bounds_min.tolist(), "max": self.bounds_max.tolist()},
        }


def voxel_index(point: np.ndarray, spec: GridSpec) -> tuple[int, int, int]:
    """Floor-based cell index of a point; the max corner maps to the last cell."""
    p = np.asarray(point, dtype=float)
    if p.shape != (3,):
        raise SchemaError(f"point must be a 3-vector, got shape {p.shape}")
    if np.any(p < spec.bounds_min) or np.any(p > spec.bounds_max):
        raise OutOfBoundsError(f"point {p.tolist()} outside grid bounds")
    idx = np.floor((p - spec.bounds_min) / spec.cell_size).astype(int)
    idx = np.minimum(idx, np.array(spec.dims) - 1)
    return int(idx[0]), int(idx[1]), int(idx[2])


def encode(
    e: np.ndarray,
    s_c: np.ndarray | None,
    layout: ElectrodeLayout,
    spec: GridSpec,
) -> np.ndarray:
    """Build the (2, nx, ny, nz) grid from electrode values and contact point.

    s_c = None means no contact: channel 1 stays all-zero. Raises if an
    electrode position or the contact point falls outside the bounds, or if
    two electrodes share a voxel.
    """
    e = np.asarray(e, dtype=float)
    if e.shape != (N_ELECTRODES,):
        raise SchemaError(f"expected {N_ELECTRODES} electrode values, got shape {e.shape}")
    grid = np.zeros((N_CHANNELS,) + spec.dims)
    seen: dict[tuple[int, int, int], int] = {}
    for i, pos in enumerate(layout.positions):
        try:
            idx = voxel_index(pos, spec)
        except OutOfBoundsError as exc:
            raise OutOfBoundsError(f"electrode {i} at {pos.tolist()} outside bounds") from exc
        if idx in seen:
            raise LayoutCollisionError(
                f"electrodes {seen[idx]} and {i} both bin to voxel {idx}"
            )
        seen[idx] = i
        grid[(CHANNEL_ELECTRODES,) + idx] = e[i]
    if s_c is not None:
        grid[(CHANNEL_CONTACT,) + voxel_index(np.asarray(s_c, dtype=float), spec)] = 1.0
    return grid


def encode_batch(
    e_batch: np.ndarray,
    s_c_batch: np.ndarray,
    layout: ElectrodeLayout,
    spec: GridSpec,
) -> np.ndarray:
    """Encode many (e, s_c) pairs into a (batch, 2, nx, ny, nz) array."""
    e_batch = np.asarray(e_batch, dtype=float)
    s_c_batch = np.asarray(s_c_batch, dtype=float)
    out = np.zeros((e_batch.shape[0], N_CHANNELS) + spec.dims)
    for i in range(e_batch.shape[0]):
        out[i] = encode(e_batch[i], s_c_batch[i], layout, spec)
    return out
