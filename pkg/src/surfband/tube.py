"""Narrow-band classification of lattice nodes around the zero level set.

Nodes split into an inner computational tube (|phi| < R), an outer
extension layer (R <= |phi| < R'), and exterior.  Defaults R = 3*dx and
R' = 8*dx.  Fields live only on inner+outer points, addressed by slot
into lexicographically sorted index lists; a dense int8 class array is
kept for classification queries.  Every inner point must have its full
radius-2 scheme stencil inside the band, and R must stay below the
reach 1/max-curvature so projections in the band are unique.
"""

from __future__ import annotations

import numpy as np

from .errors import CurvatureBoundError, TubeConfigError
from .geometry import LevelSetField
from .grid import GridSpec

EXTERIOR = np.int8(0)
INNER = np.int8(1)
OUTER = np.int8(2)

_OFFSETS = (-2, -1, 1, 2)


class TubeGrid:
    """Sorted band storage plus per-axis neighbor slot maps.

    flat: sorted flat lattice indices of band points, shape (Q,).
    indices: matching multi-indices, (Q, d) int32.
    is_inner: bool mask over slots; inner_slots/outer_slots are its
    flatnonzero complements.
    neighbor maps m2/m1/p1/p2: (d, Q) int32 slot of the -2/-1/+1/+2
    axis neighbor, or the point's own slot when the neighbor is not in
    the band (never the case for inner points, checked at build).
    """

    def __init__(self, grid, r_inner, r_outer, flat, indices, is_inner, class_flat, maps):
        self.grid = grid
        self.r_inner = r_inner
        self.r_outer = r_outer
        self.flat = flat
        self.indices = indices
        self.is_inner = is_inner
        self.class_flat = class_flat
        self.m2, self.m1, self.p1, self.p2 = maps
        self.inner_slots = np.flatnonzero(is_inner).astype(np.int32)
        self.outer_slots = np.flatnonzero(~is_inner).astype(np.int32)

    @property
    def n_points(self) -> int:
        return self.flat.size

    def positions(self, slots=None) -> np.ndarray:
        idx = self.indices if slots is None else self.indices[slots]
        return self.grid.positions(idx)

    def find_slots(self, flat_targets: np.ndarray) -> np.ndarray:
        """Slots of the given flat lattice indices; -1 where not in the band."""
        flat_targets = np.asarray(flat_targets, dtype=np.int64)
        pos = np.searchsorted(self.flat, flat_targets)
        pos_c = np.minimum(pos, self.flat.size - 1)
        found = self.flat[pos_c] == flat_targets
        return np.where(found, pos_c, -1).astype(np.int64)


def _classify_chunk(abs_phi: np.ndarray, r_inner: float, r_outer: float) -> np.ndarray:
    cls = np.zeros(abs_phi.shape, dtype=np.int8)
    cls[abs_phi < r_outer] = OUTER
    cls[abs_phi < r_inner] = INNER
    return cls


def build_tube(field: LevelSetField, r_inner: float | None = None, r_outer: float | None = None) -> TubeGrid:
    """Classify the lattice and assemble band storage and neighbor maps."""
    grid: GridSpec = field.grid
    dx = grid.dx
    if r_inner is None:
        r_inner = 3.0 * dx
    if r_outer is None:
        r_outer = 8.0 * dx
    if not r_inner < r_outer:
        raise TubeConfigError(f"need R < R', got R={r_inner:.6g}, R'={r_outer:.6g}")
    kappa = field.shape.max_curvature
    if r_inner >= 1.0 / kappa:
        raise CurvatureBoundError(
            f"inner radius R={r_inner:.6g} violates R < 1/kappa_max = "
            f"{1.0 / kappa:.6g} for {field.shape!r} (kappa_max={kappa:.6g})"
        )

    npts = grid.npts
    if grid.dim == 2:
        class_flat = _classify_chunk(np.abs(field.phi_dense).ravel(), r_inner, r_outer)
    else:
        # Slab by slab along the first axis to avoid a dense 3-d float array.
        coords = grid.axis_coords()
        yy, zz = np.meshgrid(coords, coords, indexing="ij")
        plane = np.empty((npts * npts, 3))
        plane[:, 1] = yy.ravel()
        plane[:, 2] = zz.ravel()
        class_flat = np.empty(npts**3, dtype=np.int8)
        for i, xv in enumerate(coords):
            plane[:, 0] = xv
            aphi = np.abs(field.shape.signed_distance(plane))
            class_flat[i * npts * npts : (i + 1) * npts * npts] = _classify_chunk(
                aphi, r_inner, r_outer
            )

    flat = np.flatnonzero(class_flat).astype(np.int64)  # sorted by construction
    if flat.size == 0:
        raise TubeConfigError("tube is empty: no lattice node lies within R' of the surface")
    is_inner = class_flat[flat] == INNER
    indices = grid.unflatten_index(flat).astype(np.int32)

    lo, hi = int(indices.min()), int(indices.max())
    if lo < 2 or hi > npts - 3:
        raise TubeConfigError(
            f"band touches the sampled lattice edge (multi-index range [{lo}, {hi}] "
            f"of [0, {npts - 1}]); padding is undersized"
        )

    strides = grid.strides
    maps = []
    for off in _OFFSETS:
        per_axis = np.empty((grid.dim, flat.size), dtype=np.int32)
        for a in range(grid.dim):
            target = flat + off * strides[a]
            slots = np.searchsorted(flat, target)
            slots_c = np.minimum(slots, flat.size - 1)
            found = flat[slots_c] == target
            per_axis[a] = np.where(found, slots_c, np.arange(flat.size))
        maps.append(per_axis)
    m2, m1, p1, p2 = maps

    self_slots = np.arange(flat.size, dtype=np.int32)[None, :]
    inner = is_inner
    for name, mp in (("-2", m2), ("-1", m1), ("+1", p1), ("+2", p2)):
        missing = (mp == self_slots) & inner[None, :]
        if missing.any():
            a, s = np.argwhere(missing)[0]
            raise TubeConfigError(
                f"inner point at {grid.positions(indices[s][None, :])[0].tolist()} "
                f"lacks its axis-{a} {name} neighbor; R' - R is too thin"
            )

    return TubeGrid(grid, r_inner, r_outer, flat, indices, is_inner, class_flat, (m2, m1, p1, p2))


def stencil_ok(tube: TubeGrid, index, radius: int) -> bool:
    """True iff the full axis-aligned stencil of the given radius is in the band."""
    index = np.asarray(index, dtype=np.int64)
    if radius == 0:
        return bool(tube.class_flat[tube.grid.flatten_index(index[None, :])[0]] != EXTERIOR)
    offsets = np.arange(-radius, radius + 1)
    for a in range(tube.grid.dim):
        stencil = np.tile(index, (offsets.size, 1))
        stencil[:, a] += offsets
        if (stencil[:, a] < 0).any() or (stencil[:, a] >= tube.grid.npts).any():
            return False
        flats = tube.grid.flatten_index(stencil)
        if (tube.class_flat[flats] == EXTERIOR).any():
            return False
    return True
