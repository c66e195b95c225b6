"""Implicit curves and surfaces: signed distance, projections, curvature.

Every shape exposes an exact signed distance (negative inside, ``|grad| = 1``).
Circle, sphere and torus have closed forms, including the level-set Hessian;
ellipse and star distances come from Newton minimization of the squared
distance to the parametrized curve.  The solver consumes Hessians produced by
second-order central differences of the sampled distance, so that route works
for every shape; the closed forms back the analytic shapes and the tests.

Conventions: curves are parametrized counterclockwise; ``closest_point``
projects along the normal, ``x = P(x) + phi(x) * n(P(x))``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ellipeinc

from .errors import NonConvergenceError, ProjectionError, StencilError
from .grid import GridSpec

_EPS_SURFACE = 1e-12


def azimuth(pts: np.ndarray) -> np.ndarray:
    """Angle atan2(y, x) of points (Q, 2) or (Q, 3)."""
    pts = np.atleast_2d(pts)
    return np.arctan2(pts[:, 1], pts[:, 0])


def latitude(pts: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Latitude asin(z/r) of points (Q, 3) on a sphere of given radius."""
    pts = np.atleast_2d(pts)
    return np.arcsin(np.clip(pts[:, 2] / radius, -1.0, 1.0))


def tube_angle(pts: np.ndarray, ring_radius: float) -> np.ndarray:
    """Poloidal angle atan2(z, rho - R) of points (Q, 3) near a torus."""
    pts = np.atleast_2d(pts)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    return np.arctan2(pts[:, 2], rho - ring_radius)


class Circle:
    """x^2 + y^2 = r^2."""

    dim = 2
    parametric = False

    def __init__(self, radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = radius

    def __repr__(self) -> str:
        return f"Circle(radius={self.radius})"

    @property
    def bounding_radius(self) -> float:
        return self.radius

    @property
    def max_curvature(self) -> float:
        return 1.0 / self.radius

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.hypot(pts[:, 0], pts[:, 1]) - self.radius

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        safe = np.where(rho < _EPS_SURFACE, 1.0, rho)
        return pts / safe[:, None]

    def closest_point(self, pts: np.ndarray) -> np.ndarray:
        return self.radius * self.gradient(pts)

    def level_curvatures(self, pts: np.ndarray) -> np.ndarray:
        """Principal curvatures (Q, dim-1) of the level set through each point."""
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        return (1.0 / rho)[:, None]

    def hessian(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        rho3 = np.hypot(x, y) ** 3
        h = np.empty((len(pts), 2, 2))
        h[:, 0, 0] = y * y
        h[:, 0, 1] = h[:, 1, 0] = -x * y
        h[:, 1, 1] = x * x
        return h / rho3[:, None, None]


class Sphere:
    """x^2 + y^2 + z^2 = r^2."""

    dim = 3
    parametric = False

    def __init__(self, radius: float = 1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = radius

    def __repr__(self) -> str:
        return f"Sphere(radius={self.radius})"

    @property
    def bounding_radius(self) -> float:
        return self.radius

    @property
    def max_curvature(self) -> float:
        return 1.0 / self.radius

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.linalg.norm(pts, axis=1) - self.radius

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        r = np.linalg.norm(pts, axis=1)
        safe = np.where(r < _EPS_SURFACE, 1.0, r)
        return pts / safe[:, None]

    def closest_point(self, pts: np.ndarray) -> np.ndarray:
        return self.radius * self.gradient(pts)

    def level_curvatures(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        r = np.linalg.norm(pts, axis=1)
        return np.repeat((1.0 / r)[:, None], 2, axis=1)

    def hessian(self, pts: np.ndarray) -> np.ndarray:
        # H = (I - n n^T) / r: projector onto the tangent plane over the radius.
        pts = np.atleast_2d(pts)
        r = np.linalg.norm(pts, axis=1)
        n = pts / r[:, None]
        eye = np.eye(3)[None, :, :]
        return (eye - n[:, :, None] * n[:, None, :]) / r[:, None, None]


class Torus:
    """(sqrt(x^2+y^2) - R)^2 + z^2 = r^2, ring radius R > tube radius r."""

    dim = 3
    parametric = False

    def __init__(self, ring_radius: float = 1.0, tube_radius: float = 0.5):
        if not 0 < tube_radius < ring_radius:
            raise ValueError("need 0 < tube_radius < ring_radius")
        self.ring_radius = ring_radius
        self.tube_radius = tube_radius

    def __repr__(self) -> str:
        return f"Torus(ring_radius={self.ring_radius}, tube_radius={self.tube_radius})"

    @property
    def bounding_radius(self) -> float:
        return self.ring_radius + self.tube_radius

    @property
    def max_curvature(self) -> float:
        # Tube circles have curvature 1/r; the inner equator's ring curvature
        # is 1/(R - r).  The distance function stays smooth until whichever
        # is hit first.
        return max(1.0 / self.tube_radius, 1.0 / (self.ring_radius - self.tube_radius))

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        return np.hypot(rho - self.ring_radius, pts[:, 2]) - self.tube_radius

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        s = np.hypot(rho - self.ring_radius, pts[:, 2])
        rho_safe = np.where(rho < _EPS_SURFACE, 1.0, rho)
        s_safe = np.where(s < _EPS_SURFACE, 1.0, s)
        g = np.empty_like(pts, dtype=np.float64)
        radial = (rho - self.ring_radius) / s_safe
        g[:, 0] = radial * pts[:, 0] / rho_safe
        g[:, 1] = radial * pts[:, 1] / rho_safe
        g[:, 2] = pts[:, 2] / s_safe
        return g

    def closest_point(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        phi = self.signed_distance(pts)
        return pts - phi[:, None] * self.gradient(pts)

    def level_curvatures(self, pts: np.ndarray) -> np.ndarray:
        # The level set through x is the torus with tube radius s(x); its
        # principal curvatures are 1/s (tube) and cos(eta)/(R + s cos(eta))
        # (ring), with eta the poloidal angle.
        pts = np.atleast_2d(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        s = np.hypot(rho - self.ring_radius, pts[:, 2])
        cos_eta = (rho - self.ring_radius) / s
        out = np.empty((len(pts), 2))
        out[:, 0] = 1.0 / s
        out[:, 1] = cos_eta / (self.ring_radius + s * cos_eta)
        return out

    def hessian(self, pts: np.ndarray) -> np.ndarray:
        # grad phi = (radial*cos t, radial*sin t, z/s) with t the azimuth;
        # differentiate analytically in cylindrical coordinates.
        pts = np.atleast_2d(pts)
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        rho = np.hypot(x, y)
        d = rho - self.ring_radius
        s2 = d * d + z * z
        s = np.sqrt(s2)
        ct, st = x / rho, y / rho
        # In the orthonormal frame (e_rho, e_t, e_z):
        #   d(grad)/d(rho) row: [z^2/s^3, 0, -d z/s^3]
        #   azimuthal curvature term: (d/s)/rho on e_t e_t
        #   d(grad)/dz row: [-d z/s^3, 0, d^2/s^3]
        a_rr = z * z / (s2 * s)
        a_rz = -d * z / (s2 * s)
        a_zz = d * d / (s2 * s)
        a_tt = d / (s * rho)
        h = np.empty((len(pts), 3, 3))
        h[:, 0, 0] = a_rr * ct * ct + a_tt * st * st
        h[:, 0, 1] = h[:, 1, 0] = (a_rr - a_tt) * ct * st
        h[:, 1, 1] = a_rr * st * st + a_tt * ct * ct
        h[:, 0, 2] = h[:, 2, 0] = a_rz * ct
        h[:, 1, 2] = h[:, 2, 1] = a_rz * st
        h[:, 2, 2] = a_zz
        return h


class _ParametricCurve:
    """Closed planar curve p(theta), theta in [0, 2pi), counterclockwise.

    Signed distance and projection run through a multistart Newton
    minimization of D(theta) = |p(theta) - x|^2 / 2; subclasses supply the
    parametrization, its derivatives and an inside test.
    """

    dim = 2
    parametric = True
    _n_starts = 8
    _newton_tol = 1e-12
    _newton_max_iter = 60

    def point(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tangent(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def second_derivative(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def is_inside(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def closest_param(self, pts: np.ndarray) -> np.ndarray:
        """Global minimizer theta* of the distance to the curve, per point.

        Newton iteration on D'(theta) = (p - x) . p' from 8 equally spaced
        starts plus the query's own polar angle; the converged start with the
        smallest distance wins.  Tolerance is on |D'|.
        """
        pts = np.atleast_2d(pts).astype(np.float64)
        q = len(pts)
        starts = np.linspace(0.0, 2.0 * np.pi, self._n_starts, endpoint=False)
        th = np.empty((q, self._n_starts + 1))
        th[:, :-1] = starts[None, :]
        th[:, -1] = np.arctan2(pts[:, 1], pts[:, 0])
        x = pts[:, None, :]
        for _ in range(self._newton_max_iter):
            p = self.point(th)
            dp = self.tangent(th)
            ddp = self.second_derivative(th)
            diff = p - x
            d1 = np.einsum("qsk,qsk->qs", diff, dp)
            d2 = np.einsum("qsk,qsk->qs", dp, dp) + np.einsum("qsk,qsk->qs", diff, ddp)
            if np.all(np.abs(d1) <= self._newton_tol):
                break
            denom = np.where(np.abs(d2) < 1e-300, 1e-300, d2)
            step = np.clip(d1 / denom, -0.5, 0.5)
            th = th - step
        p = self.point(th)
        dp = self.tangent(th)
        diff = p - x
        d1 = np.abs(np.einsum("qsk,qsk->qs", diff, dp))
        dist2 = np.einsum("qsk,qsk->qs", diff, diff)
        converged = d1 <= self._newton_tol
        if not converged.any(axis=1).all():
            bad = int(np.flatnonzero(~converged.any(axis=1))[0])
            raise NonConvergenceError(
                f"closest-point Newton failed at point {pts[bad].tolist()}: "
                f"best |D'| = {d1[bad].min():.3e}"
            )
        dist2 = np.where(converged, dist2, np.inf)
        best = np.argmin(dist2, axis=1)
        return np.mod(th[np.arange(q), best], 2.0 * np.pi)

    def closest_point(self, pts: np.ndarray) -> np.ndarray:
        return self.point(self.closest_param(pts))

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        dist = np.linalg.norm(self.closest_point(pts) - pts, axis=1)
        return np.where(self.is_inside(pts), -dist, dist)

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        theta = self.closest_param(pts)
        p = self.point(theta)
        diff = pts - p
        dist = np.linalg.norm(diff, axis=1)
        phi = np.where(self.is_inside(pts), -dist, dist)
        # On the curve itself the quotient degenerates; use the outward
        # curve normal (t_y, -t_x) of the counterclockwise tangent.
        dp = self.tangent(theta)
        nrm = np.linalg.norm(dp, axis=1)
        outward = np.stack([dp[:, 1], -dp[:, 0]], axis=1) / nrm[:, None]
        on_curve = np.abs(phi) < 1e-9
        safe = np.where(on_curve, 1.0, phi)
        g = diff / safe[:, None]
        g[on_curve] = outward[on_curve]
        return g


class Ellipse(_ParametricCurve):
    """(x/a)^2 + (y/b)^2 = 1, parametrized (a cos t, b sin t)."""

    def __init__(self, a: float = 0.75, b: float = 1.25):
        if a <= 0 or b <= 0:
            raise ValueError("semi-axes must be positive")
        self.a = a
        self.b = b

    def __repr__(self) -> str:
        return f"Ellipse(a={self.a}, b={self.b})"

    @property
    def bounding_radius(self) -> float:
        return max(self.a, self.b)

    @property
    def max_curvature(self) -> float:
        return max(self.a / self.b**2, self.b / self.a**2)

    def point(self, theta):
        return np.stack([self.a * np.cos(theta), self.b * np.sin(theta)], axis=-1)

    def tangent(self, theta):
        return np.stack([-self.a * np.sin(theta), self.b * np.cos(theta)], axis=-1)

    def second_derivative(self, theta):
        return np.stack([-self.a * np.cos(theta), -self.b * np.sin(theta)], axis=-1)

    def is_inside(self, pts):
        pts = np.atleast_2d(pts)
        return (pts[:, 0] / self.a) ** 2 + (pts[:, 1] / self.b) ** 2 < 1.0

    def arclength(self, theta: np.ndarray) -> np.ndarray:
        """Arc length from theta=0, exact via incomplete elliptic integrals.

        |p'(t)| = b*sqrt(1 - m sin^2 ... ) holds with m = 1 - (a/b)^2 after
        the quarter-period phase shift, giving s(t) = b*E(t | m).
        """
        m = 1.0 - (self.a / self.b) ** 2
        return self.b * ellipeinc(theta, m)

    @property
    def perimeter(self) -> float:
        return float(self.arclength(2.0 * np.pi))


class Star(_ParametricCurve):
    """Polar curve r(theta) = r0 + amp * sin^2(lobes * theta)."""

    def __init__(self, r0: float = 1.0, amp: float = 0.5, lobes: int = 3):
        if r0 <= 0 or amp < 0:
            raise ValueError("need r0 > 0 and amp >= 0")
        self.r0 = r0
        self.amp = amp
        self.lobes = lobes
        self._table_theta = np.linspace(0.0, 2.0 * np.pi, 16385)
        speed = self._speed(self._table_theta)
        ds = 0.5 * (speed[1:] + speed[:-1]) * np.diff(self._table_theta)
        self._table_s = np.concatenate([[0.0], np.cumsum(ds)])

    def __repr__(self) -> str:
        return f"Star(r0={self.r0}, amp={self.amp}, lobes={self.lobes})"

    def radius(self, theta):
        return self.r0 + self.amp * np.sin(self.lobes * theta) ** 2

    def _radius_d1(self, theta):
        return self.amp * self.lobes * np.sin(2.0 * self.lobes * theta)

    def _radius_d2(self, theta):
        return 2.0 * self.amp * self.lobes**2 * np.cos(2.0 * self.lobes * theta)

    def _speed(self, theta):
        return np.hypot(self.radius(theta), self._radius_d1(theta))

    @property
    def bounding_radius(self) -> float:
        return self.r0 + self.amp

    @property
    def max_curvature(self) -> float:
        th = np.linspace(0.0, 2.0 * np.pi, 20001)
        r, r1, r2 = self.radius(th), self._radius_d1(th), self._radius_d2(th)
        kappa = np.abs(r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1) ** 1.5
        return float(kappa.max())

    def point(self, theta):
        r = self.radius(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    def tangent(self, theta):
        r, r1 = self.radius(theta), self._radius_d1(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)

    def second_derivative(self, theta):
        r, r1, r2 = self.radius(theta), self._radius_d1(theta), self._radius_d2(theta)
        c, s = np.cos(theta), np.sin(theta)
        return np.stack(
            [(r2 - r) * c - 2.0 * r1 * s, (r2 - r) * s + 2.0 * r1 * c], axis=-1
        )

    def is_inside(self, pts):
        pts = np.atleast_2d(pts)
        theta = np.arctan2(pts[:, 1], pts[:, 0])
        return np.hypot(pts[:, 0], pts[:, 1]) < self.radius(theta)

    def arclength(self, theta: np.ndarray) -> np.ndarray:
        """Arc length from theta=0 by a dense cumulative-trapezoid table."""
        theta = np.mod(theta, 2.0 * np.pi)
        return np.interp(theta, self._table_theta, self._table_s)

    def param_of_arclength(self, s: np.ndarray) -> np.ndarray:
        s = np.mod(s, self.perimeter)
        return np.interp(s, self._table_s, self._table_theta)

    @property
    def perimeter(self) -> float:
        return float(self._table_s[-1])


def closest_point(shape, pts: np.ndarray) -> np.ndarray:
    """Project points onto the shape, refusing queries beyond its reach.

    The projection x - phi*grad(phi) is single-valued only while
    |phi| < 1/max-curvature; farther out the nearest point can jump.
    """
    pts = np.atleast_2d(pts)
    phi = shape.signed_distance(pts)
    reach = 1.0 / shape.max_curvature
    bad = np.abs(phi) >= reach
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ProjectionError(
            f"point {pts[i].tolist()} at distance {phi[i]:.6g} is beyond the "
            f"projection reach {reach:.6g} of {shape!r}"
        )
    return shape.closest_point(pts)


class LevelSetField:
    """Signed distance of one shape sampled over a padded lattice.

    In 2-d the distance (and, for parametric curves, the closest-point
    parameter) is cached densely: classification touches every node anyway
    and the dense plane is small.  In 3-d nothing dense beyond the int8
    classification held by the tube is stored; values are evaluated on
    demand from the closed forms.
    """

    def __init__(self, shape, grid: GridSpec):
        if shape.dim != grid.dim:
            raise ValueError(f"shape dim {shape.dim} != grid dim {grid.dim}")
        self.shape = shape
        self.grid = grid
        self.phi_dense: np.ndarray | None = None
        self.param_dense: np.ndarray | None = None
        if grid.dim == 2:
            coords = grid.axis_coords()
            xx, yy = np.meshgrid(coords, coords, indexing="ij")
            pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
            if shape.parametric:
                theta = shape.closest_param(pts)
                p = shape.point(theta)
                dist = np.linalg.norm(pts - p, axis=1)
                inside = shape.is_inside(pts)
                phi = np.where(inside, -dist, dist)
                self.param_dense = theta.reshape(grid.npts, grid.npts)
            else:
                phi = shape.signed_distance(pts)
            self.phi_dense = phi.reshape(grid.npts, grid.npts)

    def phi_at_indices(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self.phi_dense is not None:
            return self.phi_dense[idx[:, 0], idx[:, 1]]
        return self.shape.signed_distance(self.grid.positions(idx))

    def param_at_indices(self, idx: np.ndarray) -> np.ndarray:
        if self.param_dense is None:
            raise ValueError(f"{self.shape!r} has no cached curve parameter")
        idx = np.asarray(idx, dtype=np.int64)
        return self.param_dense[idx[:, 0], idx[:, 1]]


def hessian_at_indices(field: LevelSetField, idx: np.ndarray) -> np.ndarray:
    """Central-difference Hessians of phi at lattice multi-indices (Q, d).

    Diagonal entries use the standard 3-point second difference, mixed
    entries the 4-point cross stencil; both are second-order accurate.
    """
    grid = field.grid
    idx = np.asarray(idx, dtype=np.int64)
    if (idx.min() < 1) or (idx.max() > grid.npts - 2):
        raise StencilError("Hessian stencil leaves the sampled lattice")
    d = grid.dim
    q = len(idx)
    dx2 = grid.dx * grid.dx

    def phi_off(*offsets: int) -> np.ndarray:
        shifted = idx + np.asarray(offsets, dtype=np.int64)
        return field.phi_at_indices(shifted)

    h = np.empty((q, d, d))
    center = field.phi_at_indices(idx)
    for a in range(d):
        ea = [0] * d
        ea[a] = 1
        plus = phi_off(*ea)
        minus = phi_off(*[-v for v in ea])
        h[:, a, a] = (plus - 2.0 * center + minus) / dx2
        for b in range(a + 1, d):
            eb = [0] * d
            eb[b] = 1
            pp = phi_off(*[ea[k] + eb[k] for k in range(d)])
            pm = phi_off(*[ea[k] - eb[k] for k in range(d)])
            mp = phi_off(*[-ea[k] + eb[k] for k in range(d)])
            mm = phi_off(*[-ea[k] - eb[k] for k in range(d)])
            h[:, a, b] = h[:, b, a] = (pp - pm - mp + mm) / (4.0 * dx2)
    return h


def hessian(field: LevelSetField, index) -> np.ndarray:
    """Hessian of phi at a single multi-index, shape (d, d)."""
    return hessian_at_indices(field, np.asarray(index)[None, :])[0]


class TubeGeometry:
    """Per-point geometry on the stored band: phi, normal, closest point, Hessian."""

    def __init__(self, phi, normal, closest, hess, curve_param=None):
        self.phi = phi
        self.normal = normal
        self.closest = closest
        self.hessian = hess
        self.curve_param = curve_param


def tube_geometry(field: LevelSetField, tube) -> TubeGeometry:
    """Evaluate band geometry for every stored tube point (inner + outer)."""
    shape = field.shape
    grid = field.grid
    idx = tube.indices
    phi = field.phi_at_indices(idx)
    if shape.parametric:
        theta = field.param_at_indices(idx)
        p = shape.point(theta)
        pos = grid.positions(idx)
        diff = pos - p
        on_curve = np.abs(phi) < 1e-9
        safe = np.where(on_curve, 1.0, phi)
        normal = diff / safe[:, None]
        if on_curve.any():
            dp = shape.tangent(theta[on_curve])
            nrm = np.linalg.norm(dp, axis=1)
            normal[on_curve] = np.stack([dp[:, 1], -dp[:, 0]], axis=1) / nrm[:, None]
        closest = p
        curve_param = theta
    else:
        pos = grid.positions(idx)
        normal = shape.gradient(pos)
        closest = pos - phi[:, None] * normal
        curve_param = None
    hess = hessian_at_indices(field, idx)
    return TubeGeometry(phi, normal, closest, hess, curve_param)


def sample_level_set(shape, grid: GridSpec) -> LevelSetField:
    return LevelSetField(shape, grid)
