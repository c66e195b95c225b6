"""Surface sampling, interpolation from the band, and error reporting.

Errors are measured on dense parameter meshes of the surface itself:
band values are pulled onto the mesh with tensor-product cubic Lagrange
interpolation (fourth order, so it never limits a third-order scheme)
and compared against exact profiles in weighted surface norms.

Mesh weights are exact band areas, not midpoint-rule approximations, so
the total weight of a sphere mesh is 4*pi*r^2 and of a torus mesh is
4*pi^2*R*r to round-off.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import StencilError
from .grid import cubic_lagrange_weights
from .tube import TubeGrid

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SurfaceMesh:
    """Quadrature mesh on a surface: sample points, weights, parameters."""

    kind: str
    params: np.ndarray
    positions: np.ndarray
    weights: np.ndarray

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))


def curve_mesh(shape, n: int = 4096) -> SurfaceMesh:
    """Uniform parameter mesh on a closed curve with arclength weights."""
    theta = TWO_PI * np.arange(n) / n
    if isinstance(shape, geometry.Circle):
        r = shape.radius
        positions = r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        weights = np.full(n, r * TWO_PI / n)
    else:
        positions = shape.point(theta)
        speed = np.linalg.norm(shape.tangent(theta), axis=-1)
        weights = speed * (TWO_PI / n)
    return SurfaceMesh("curve", theta, positions, weights)


def equator_mesh(shape, n: int = 4096) -> SurfaceMesh:
    """Azimuth mesh along the z=0 great circle of a sphere."""
    theta = TWO_PI * np.arange(n) / n
    r = shape.radius
    positions = np.stack(
        [r * np.cos(theta), r * np.sin(theta), np.zeros(n)], axis=1
    )
    weights = np.full(n, r * TWO_PI / n)
    return SurfaceMesh("equator", theta, positions, weights)


def sphere_mesh(shape, n_theta: int = 512, n_lat: int = 256) -> SurfaceMesh:
    """Azimuth/latitude product mesh; band weights integrate cos(lat) exactly."""
    r = shape.radius
    theta = TWO_PI * (np.arange(n_theta) + 0.5) / n_theta
    edges = -0.5 * np.pi + np.pi * np.arange(n_lat + 1) / n_lat
    lat = 0.5 * (edges[:-1] + edges[1:])
    band = r * r * (TWO_PI / n_theta) * np.diff(np.sin(edges))
    th, la = np.meshgrid(theta, lat, indexing="ij")
    params = np.stack([th.ravel(), la.ravel()], axis=1)
    weights = np.broadcast_to(band, (n_theta, n_lat)).ravel().copy()
    positions = np.stack(
        [
            r * np.cos(params[:, 1]) * np.cos(params[:, 0]),
            r * np.cos(params[:, 1]) * np.sin(params[:, 0]),
            r * np.sin(params[:, 1]),
        ],
        axis=1,
    )
    return SurfaceMesh("sphere", params, positions, weights)


def torus_mesh(shape, n_theta: int = 512, n_eta: int = 256) -> SurfaceMesh:
    """Toroidal/poloidal product mesh; weights integrate R + r*cos(eta) exactly."""
    big_r, r = shape.ring_radius, shape.tube_radius
    theta = TWO_PI * (np.arange(n_theta) + 0.5) / n_theta
    edges = -np.pi + TWO_PI * np.arange(n_eta + 1) / n_eta
    eta = 0.5 * (edges[:-1] + edges[1:])
    band = (TWO_PI / n_theta) * r * (big_r * np.diff(edges) + r * np.diff(np.sin(edges)))
    th, et = np.meshgrid(theta, eta, indexing="ij")
    params = np.stack([th.ravel(), et.ravel()], axis=1)
    weights = np.broadcast_to(band, (n_theta, n_eta)).ravel().copy()
    rho = big_r + r * np.cos(params[:, 1])
    positions = np.stack(
        [
            rho * np.cos(params[:, 0]),
            rho * np.sin(params[:, 0]),
            r * np.sin(params[:, 1]),
        ],
        axis=1,
    )
    return SurfaceMesh("torus", params, positions, weights)


def interpolate_to_surface(tube: TubeGrid, values: np.ndarray,
                           points: np.ndarray) -> np.ndarray:
    """Cubic Lagrange interpolation of a band field at arbitrary points.

    Every node of the 4^d stencil must lie in the band; a stencil that
    leaves it raises StencilError naming the offending sample point.
    """
    grid = tube.grid
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    rel = (pts - grid.origin) / grid.dx
    base = np.floor(rel).astype(np.int64)
    frac = rel - base
    dim = grid.dim
    axis_w = [np.stack(cubic_lagrange_weights(frac[:, a]), axis=1) for a in range(dim)]
    strides = np.asarray(grid.strides, dtype=np.int64)
    out = np.zeros(len(pts))
    for corner in itertools.product(range(4), repeat=dim):
        idx = base + (np.asarray(corner, dtype=np.int64) - 1)
        flat = idx @ strides
        oob = np.any((idx < 0) | (idx >= grid.npts), axis=1)
        flat[oob] = -1
        slots = tube.find_slots(flat)
        missing = slots < 0
        if np.any(missing):
            bad = pts[np.flatnonzero(missing)[0]]
            raise StencilError(
                f"interpolation stencil leaves the band near sample {bad.tolist()}"
            )
        w = axis_w[0][:, corner[0]]
        for a in range(1, dim):
            w = w * axis_w[a][:, corner[a]]
        out += w * values[slots]
    return out


def error_norms(mesh: SurfaceMesh, numeric: np.ndarray,
                exact: np.ndarray) -> dict[str, float]:
    """Weighted L1/L2 and pointwise Linf errors on a surface mesh."""
    e = np.asarray(numeric, dtype=np.float64) - np.asarray(exact, dtype=np.float64)
    return {
        "l1": float(np.sum(mesh.weights * np.abs(e))),
        "l2": float(np.sqrt(np.sum(mesh.weights * e * e))),
        "linf": float(np.max(np.abs(e))),
    }


def convergence_rate(dxs, errors) -> float | None:
    """Least-squares slope of log(error) against log(dx); None under two points."""
    dxs = np.asarray(dxs, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    keep = errors > 0.0
    if np.count_nonzero(keep) < 2:
        return None
    return float(np.polyfit(np.log(dxs[keep]), np.log(errors[keep]), 1)[0])


def total_mass(mesh: SurfaceMesh, surface_values: np.ndarray) -> float:
    """Surface integral of a sampled field."""
    return float(np.sum(mesh.weights * np.asarray(surface_values, dtype=np.float64)))


def normal_variation(tube: TubeGrid, values: np.ndarray, shape,
                     base_points: np.ndarray, offsets) -> float:
    """Largest deviation from constancy along normal lines through the surface."""
    base = np.atleast_2d(np.asarray(base_points, dtype=np.float64))
    normals = shape.gradient(base)
    ref = interpolate_to_surface(tube, values, base)
    worst = 0.0
    for h in np.asarray(offsets, dtype=np.float64):
        shifted = interpolate_to_surface(tube, values, base + h * normals)
        worst = max(worst, float(np.max(np.abs(shifted - ref))))
    return worst
