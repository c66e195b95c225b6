"""Uniform Cartesian lattices over the computational box.

The box is [-1, 1]^d with spacing dx = 2/(n-1), so nodes sit at
-1 + i*dx for i in range(n).  The sampled lattice is padded outward by
`pad` whole cells on every side: shapes are allowed to approach (or, as
the ellipse catalog entry does, slightly leave) the nominal box, and the
narrow band plus its finite-difference stencils must still be interior
to the sampled region.  Padding changes neither dx nor the node
positions, only which nodes exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """A padded uniform lattice with spacing locked to the [-1,1]^d box."""

    dim: int
    n: int
    pad: int = 0

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if self.pad < 0:
            raise ValueError(f"pad must be nonnegative, got {self.pad}")

    @property
    def dx(self) -> float:
        return 2.0 / (self.n - 1)

    @property
    def npts(self) -> int:
        """Nodes per axis, padding included."""
        return self.n + 2 * self.pad

    @property
    def origin(self) -> float:
        """Coordinate of node index 0 on every axis."""
        return -1.0 - self.pad * self.dx

    @property
    def strides(self) -> tuple[int, ...]:
        """Row-major strides turning a multi-index into a flat index."""
        if self.dim == 2:
            return (self.npts, 1)
        return (self.npts * self.npts, self.npts, 1)

    @property
    def size(self) -> int:
        return self.npts**self.dim

    def axis_coords(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.npts)

    def flatten_index(self, idx: np.ndarray) -> np.ndarray:
        """Multi-indices (Q, dim) -> flat indices (Q,)."""
        idx = np.asarray(idx, dtype=np.int64)
        strides = np.asarray(self.strides, dtype=np.int64)
        return idx @ strides

    def unflatten_index(self, flat: np.ndarray) -> np.ndarray:
        """Flat indices (Q,) -> multi-indices (Q, dim)."""
        flat = np.asarray(flat, dtype=np.int64)
        out = np.empty((flat.size, self.dim), dtype=np.int64)
        rem = flat
        for a, s in enumerate(self.strides):
            out[:, a] = rem // s
            rem = rem % s
        return out

    def positions(self, idx: np.ndarray) -> np.ndarray:
        """Multi-indices (Q, dim) -> coordinates (Q, dim)."""
        return self.origin + self.dx * np.asarray(idx, dtype=np.float64)

    @staticmethod
    def for_shape(dim: int, n: int, extent: float, margin: float) -> "GridSpec":
        """Lattice padded so |x| <= extent + margin is covered on every axis.

        extent is the shape's bounding radius, margin the band depth plus
        stencil clearance that must stay inside the sampled region.
        """
        dx = 2.0 / (n - 1)
        need = extent + margin
        pad = max(0, int(np.ceil((need - 1.0) / dx)) + 1)
        return GridSpec(dim=dim, n=n, pad=pad)


def cubic_lagrange_weights(t: np.ndarray):
    """Cubic Lagrange basis on nodes {-1, 0, 1, 2} cells; t in [0, 1)."""
    tm1 = t - 1.0
    tm2 = t - 2.0
    tp1 = t + 1.0
    return (
        -t * tm1 * tm2 / 6.0,
        tp1 * tm1 * tm2 / 2.0,
        -tp1 * t * tm2 / 2.0,
        tp1 * t * tm1 / 6.0,
    )
