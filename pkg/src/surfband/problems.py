"""Experiment catalog: shapes, fluxes, initial data, and reference solutions.

Each problem fixes a surface, either a tangential velocity (advection) or
a tangential flux F(x, u) = g(u) * e(x) (conservation form), an initial
condition expressed through an intrinsic surface parameter, and, where
available, an exact or reference solution in that same parameter.

Initial data is always evaluated analytically from the parameter of the
closest point, never interpolated, so discontinuous profiles stay sharp
and the initial band field is constant along normals by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable

import numpy as np

from . import geometry
from .errors import NonConvergenceError, SolverError

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# reference solvers on the periodic parameter line


def _axis_speed_1d(g, lo: float, hi: float) -> float:
    us = np.linspace(lo, hi, 5)
    delta = 1e-6 * np.maximum(1.0, np.abs(us))
    return float(np.max(np.abs(g(us + delta) - g(us - delta)) / (2.0 * delta)))


def _lxf_rhs_1d(u, g, dtheta, dt):
    gu = g(u)
    up = np.roll(u, -1)
    fhat = 0.5 * (gu + np.roll(gu, -1)) - 0.5 * (dtheta / dt) * (up - u)
    return -(fhat - np.roll(fhat, 1)) / dtheta


def _weno3_rhs_1d(u, g, alpha, dtheta, eps):
    gu = g(u)
    fp = 0.5 * (gu + alpha * u)
    fm = 0.5 * (gu - alpha * u)
    a0 = np.roll(fp, 1)
    a1 = fp
    a2 = np.roll(fp, -1)
    b0 = (a1 - a0) ** 2
    b1 = (a2 - a1) ** 2
    w0 = (1.0 / 3.0) / (eps + b0) ** 2
    w1 = (2.0 / 3.0) / (eps + b1) ** 2
    hp = (w0 * (1.5 * a1 - 0.5 * a0) + w1 * 0.5 * (a1 + a2)) / (w0 + w1)
    c0 = fm
    c1 = np.roll(fm, -1)
    c2 = np.roll(fm, -2)
    b0m = (c1 - c2) ** 2
    b1m = (c0 - c1) ** 2
    w0m = (1.0 / 3.0) / (eps + b0m) ** 2
    w1m = (2.0 / 3.0) / (eps + b1m) ** 2
    hm = (w0m * (1.5 * c1 - 0.5 * c2) + w1m * 0.5 * (c0 + c1)) / (w0m + w1m)
    fhat = hp + hm
    return -(fhat - np.roll(fhat, 1)) / dtheta


def _advance_1d(u, g, order, dtheta, t_from, t_to, cfl, eps):
    t = t_from
    while t < t_to - 1e-14:
        alpha = _axis_speed_1d(g, float(u.min()), float(u.max()))
        dt = dtheta if alpha <= 0 else min(cfl * dtheta / alpha, dtheta)
        dt = min(dt, t_to - t)
        if order == 1:
            u = u + dt * _lxf_rhs_1d(u, g, dtheta, dt)
        else:
            rhs = lambda v: _weno3_rhs_1d(v, g, alpha, dtheta, eps)
            u1 = u + dt * rhs(u)
            u2 = 0.75 * u + 0.25 * (u1 + dt * rhs(u1))
            u = u / 3.0 + (2.0 / 3.0) * (u2 + dt * rhs(u2))
        t += dt
    return u


def reference_1d_periodic(u0_fn: Callable, g: Callable, order: int, n: int, t: float,
                          cfl: float = 0.5, eps: float = 1e-6):
    """Solve u_t + g(u)_theta = 0 on [0, 2pi) periodic; returns (theta, u)."""
    if n < 4096:
        raise ValueError(f"reference resolution too coarse: n={n} < 4096")
    theta = TWO_PI * np.arange(n) / n
    u = np.asarray(u0_fn(theta), dtype=np.float64).copy()
    u = _advance_1d(u, g, order, TWO_PI / n, 0.0, t, cfl, eps)
    return theta, u


class Reference1D:
    """Periodic 1-d reference advanced lazily, sampled at arbitrary times.

    Supports the Runge-Kutta stage query pattern (t+dt, t+dt/2, t+dt):
    states computed from the last committed base are cached per exact
    time; a query past all cached times commits the newest state and
    restarts the cache.
    """

    def __init__(self, u0_fn, g, order: int, n: int = 16384, cfl: float = 0.5,
                 eps: float = 1e-6):
        self.theta = TWO_PI * np.arange(n) / n
        self.dtheta = TWO_PI / n
        self.g = g
        self.order = order
        self.cfl = cfl
        self.eps = eps
        self._t_base = 0.0
        self._u_base = np.asarray(u0_fn(self.theta), dtype=np.float64).copy()
        self._cache: dict[float, np.ndarray] = {}

    def state_at(self, t: float) -> np.ndarray:
        if abs(t - self._t_base) <= 1e-14:
            return self._u_base
        if t in self._cache:
            return self._cache[t]
        if self._cache:
            t_max = max(self._cache)
            if t > t_max + 1e-14:
                self._u_base = self._cache[t_max]
                self._t_base = t_max
                self._cache = {}
        if t < self._t_base - 1e-12:
            raise SolverError(f"reference solve queried backwards: {t} < {self._t_base}")
        u = _advance_1d(self._u_base.copy(), self.g, self.order, self.dtheta,
                        self._t_base, t, self.cfl, self.eps)
        self._cache[t] = u
        return u

    def sample(self, thetas: np.ndarray, t: float) -> np.ndarray:
        u = self.state_at(t)
        grid = np.concatenate([self.theta, [TWO_PI]])
        vals = np.concatenate([u, u[:1]])
        return np.interp(np.mod(thetas, TWO_PI), grid, vals)


def burgers_oracle_circle(u0_fn, theta, t, u0_prime=None, tol: float = 1e-12,
                          max_iter: int = 100):
    """Pre-shock Burgers solution u = u0(theta - u*t) by Newton iteration."""
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if u0_prime is None:
        h = 1e-7
        u0_prime = lambda s: (u0_fn(s + h) - u0_fn(s - h)) / (2.0 * h)
    u = np.asarray(u0_fn(theta), dtype=np.float64).copy()
    for _ in range(max_iter):
        res = u - u0_fn(theta - u * t)
        if np.max(np.abs(res)) <= tol:
            return u
        slope = 1.0 + t * u0_prime(theta - u * t)
        u = u - res / slope
    raise NonConvergenceError(
        f"implicit Burgers solve did not reach {tol:g} at t={t} "
        f"(max residual {np.max(np.abs(res)):.3e}); post-shock query?"
    )


# ---------------------------------------------------------------------------
# problem catalog


@dataclass
class ProblemSpec:
    """One catalog experiment; callables close over the shape."""

    pid: str
    title: str
    shape: object
    kind: str
    t_final: float
    params_of: Callable
    u0_of_params: Callable
    velocity: Callable | None = None
    flux_direction: Callable | None = None
    flux_profile: Callable | None = None
    oracle: Callable | None = None
    exact_on_mesh: Callable | None = None
    mesh_factory: Callable | None = None
    outer_reference: Callable | None = None
    exact_mass: float | None = None
    geometry_compatible: bool | None = None
    discontinuous: bool = False

    def error_mesh(self):
        from . import analysis

        return self.mesh_factory(analysis)

    def make_outer_oracle(self, params_outer, cfg):
        """Callable t -> outer-layer values for exact_outer extension."""
        if self.oracle is not None:
            return lambda t: self.oracle(params_outer, t)
        if self.outer_reference is not None:
            ref = self.outer_reference(cfg)
            return lambda t: ref.sample(params_outer, t)
        raise SolverError(f"exact extension is not available for {self.pid}")


def extend_initial(problem: ProblemSpec, tube, geom):
    """Initial band field u0(P(x)), evaluated analytically per tube point."""
    from .schemes import GridField

    params = problem.params_of(geom.closest, geom.curve_param)
    return GridField(np.asarray(problem.u0_of_params(params), dtype=np.float64), 0.0)


def advection_oracle(problem: ProblemSpec, surface_points, t: float):
    """Exact advected solution at points on the surface."""
    if problem.oracle is None:
        raise SolverError(f"{problem.pid} has no advection oracle")
    return problem.oracle(problem.params_of(np.atleast_2d(surface_points), None), t)


def _theta_of(closest, _param):
    return geometry.azimuth(closest)


def _burgers_profile(u):
    return 0.5 * u * u


def _circle_tangent(pts):
    pts = np.atleast_2d(pts)
    r = np.hypot(pts[:, 0], pts[:, 1])
    return np.stack([-pts[:, 1], pts[:, 0]], axis=1) / r[:, None]


def _a1() -> ProblemSpec:
    shape = geometry.Circle(1.0)
    u0 = lambda th: np.sin(th)
    return ProblemSpec(
        pid="A1",
        title="advection of sin(theta) around the unit circle",
        shape=shape,
        kind="advection",
        t_final=0.5,
        velocity=_circle_tangent,
        params_of=_theta_of,
        u0_of_params=u0,
        oracle=lambda th, t: u0(th - t),
        exact_on_mesh=lambda mesh, t: u0(mesh.params - t),
        mesh_factory=lambda analysis: analysis.curve_mesh(shape),
    )


def _a2() -> ProblemSpec:
    shape = geometry.Ellipse(0.75, 1.25)
    length = shape.perimeter

    def velocity(pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        a2, b2 = shape.a**2, shape.b**2
        v = np.stack([-y / b2, x / a2], axis=1)
        norm = np.sqrt((x / a2) ** 2 + (y / b2) ** 2)
        return v / norm[:, None]

    def params_of(closest, curve_param):
        theta = curve_param if curve_param is not None else shape.closest_param(closest)
        return shape.arclength(theta)

    u0 = lambda s: np.cos(2.0 * np.pi * s / length) ** 2
    oracle = lambda s, t: u0(np.mod(s - t, length))
    return ProblemSpec(
        pid="A2",
        title="unit-speed advection of cos^2(2*pi*s/L) along an ellipse",
        shape=shape,
        kind="advection",
        t_final=length / 4.0,
        velocity=velocity,
        params_of=params_of,
        u0_of_params=u0,
        oracle=oracle,
        exact_on_mesh=lambda mesh, t: oracle(shape.arclength(mesh.params), t),
        mesh_factory=lambda analysis: analysis.curve_mesh(shape),
    )


def _star_bands(theta):
    k = np.floor(np.mod(theta, TWO_PI) / (np.pi / 3.0)).astype(np.int64) % 6
    return np.asarray([1.0, 2.0, 3.0, 1.0, 2.0, 3.0])[k]


def _a3() -> ProblemSpec:
    shape = geometry.Star(1.0, 0.5, 3)
    length = shape.perimeter

    def velocity(pts):
        theta = geometry.azimuth(pts)
        dp = shape.tangent(theta)
        return dp / np.linalg.norm(dp, axis=-1, keepdims=True)

    def params_of(closest, curve_param):
        theta = curve_param if curve_param is not None else shape.closest_param(closest)
        return shape.arclength(theta)

    u0 = lambda s: _star_bands(shape.param_of_arclength(s))
    oracle = lambda s, t: u0(np.mod(s - t, length))
    return ProblemSpec(
        pid="A3",
        title="three-level piecewise profile advected around a star curve",
        shape=shape,
        kind="advection",
        t_final=length,
        velocity=velocity,
        params_of=params_of,
        u0_of_params=u0,
        oracle=oracle,
        exact_on_mesh=lambda mesh, t: oracle(shape.arclength(mesh.params), t),
        mesh_factory=lambda analysis: analysis.curve_mesh(shape),
        discontinuous=True,
    )


def _torus_profile(eta):
    eta = np.asarray(eta, dtype=np.float64)
    x = np.where(eta <= 0.0, (np.pi + eta) / np.pi, (np.pi - eta) / np.pi)
    prod = x * (1.0 - x)
    out = np.full_like(x, -1.0)
    ok = prod > 1e-12
    out[ok] = -np.tanh(1.0 / (2.0 * prod[ok]))
    return out


def _wrap_pi(a):
    return np.mod(a + np.pi, TWO_PI) - np.pi


def _a4() -> ProblemSpec:
    shape = geometry.Torus(1.0, 0.5)

    def velocity(pts):
        # u_t + u_eta = 0 on the (theta, eta) parameter grid corresponds to
        # motion along the unit poloidal direction at parameter speed 1,
        # i.e. physical speed r * d(eta)/dt with d(eta)/dt = 1.
        pts = np.atleast_2d(pts)
        theta = geometry.azimuth(pts)
        eta = geometry.tube_angle(pts, shape.ring_radius)
        ct, st = np.cos(theta), np.sin(theta)
        ce, se = np.cos(eta), np.sin(eta)
        return shape.tube_radius * np.stack([-se * ct, -se * st, ce], axis=1)

    params_of = lambda closest, _p: geometry.tube_angle(closest, shape.ring_radius)
    oracle = lambda eta, t: _torus_profile(_wrap_pi(eta - t))
    return ProblemSpec(
        pid="A4",
        title="poloidal advection of a smooth bump profile on a torus",
        shape=shape,
        kind="advection",
        t_final=1.0,
        velocity=velocity,
        params_of=params_of,
        u0_of_params=_torus_profile,
        oracle=oracle,
        exact_on_mesh=lambda mesh, t: oracle(mesh.params[:, 1], t),
        mesh_factory=lambda analysis: analysis.torus_mesh(shape),
    )


def _b1(pid: str = "B1") -> ProblemSpec:
    shape = geometry.Circle(1.0)
    u0 = lambda th: np.sin(th) + 0.5
    u0p = lambda th: np.cos(th)

    def oracle(th, t):
        if t == 0.0:
            return u0(th)
        return burgers_oracle_circle(u0, th, t, u0_prime=u0p)

    def exact_on_mesh(mesh, t):
        if t >= 1.0:  # shock time: the implicit solution stops being single-valued
            return None
        return oracle(mesh.params, t)

    return ProblemSpec(
        pid=pid,
        title="Burgers flow of sin(theta)+0.5 on the unit circle",
        shape=shape,
        kind="conservation",
        t_final=0.9,
        flux_direction=_circle_tangent,
        flux_profile=_burgers_profile,
        params_of=_theta_of,
        u0_of_params=u0,
        oracle=None,
        exact_on_mesh=exact_on_mesh,
        mesh_factory=lambda analysis: analysis.curve_mesh(shape),
        outer_reference=lambda cfg: Reference1D(u0, _burgers_profile, cfg.order,
                                                cfl=cfg.cfl, eps=cfg.weno_eps),
        geometry_compatible=True,
    )


def _sphere_azimuthal(pts):
    pts = np.atleast_2d(pts)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    out = np.zeros((len(pts), 3))
    ok = rho > 1e-12  # on the polar axis the azimuthal direction is undefined
    out[ok, 0] = -pts[ok, 1] / rho[ok]
    out[ok, 1] = pts[ok, 0] / rho[ok]
    return out


def _sphere_params(closest, _p):
    return np.stack([geometry.azimuth(closest), geometry.latitude(closest)], axis=1)


def _b2_box(params):
    theta, lat = params[:, 0], params[:, 1]
    inside = (np.abs(lat) < np.pi / 4.0) & (np.abs(_wrap_pi(theta)) < np.pi / 4.0)
    return inside.astype(np.float64)


def _b2_harmonics(params):
    theta, lat = params[:, 0], params[:, 1]
    x = np.cos(lat) * np.cos(theta)
    y = np.cos(lat) * np.sin(theta)
    z = np.sin(lat)
    y2m1 = np.sqrt(15.0 / (4.0 * np.pi)) * y * z
    y4m3 = 0.75 * np.sqrt(35.0 / (2.0 * np.pi)) * y * z * (3.0 * x * x - y * y)
    return y2m1 + y4m3


def _b2(variant: str, pid: str | None = None, exact_mass: float | None = None,
        t_final: float = 2.0 * np.pi, title: str | None = None) -> ProblemSpec:
    shape = geometry.Sphere(1.0)
    u0_sin = lambda p: np.sin(p[:, 0]) + 0.5
    u0_by_variant = {"u1": u0_sin, "u2": _b2_box, "u3": _b2_harmonics}
    titles = {
        "u1": "Burgers flow of sin(theta)+0.5 along sphere latitudes",
        "u2": "Burgers flow of a box indicator along sphere latitudes",
        "u3": "Burgers flow of two spherical-harmonic modes along sphere latitudes",
    }

    exact_on_mesh = None
    if variant == "u1":
        th_fn = lambda th: np.sin(th) + 0.5
        thp_fn = lambda th: np.cos(th)

        def exact_on_mesh(mesh, t):
            # The flow restricted to the equator is classical periodic
            # Burgers in the azimuth; valid until its shock at t=1.
            if mesh.kind != "equator" or t >= 1.0:
                return None
            if t == 0.0:
                return th_fn(mesh.params)
            return burgers_oracle_circle(th_fn, mesh.params, t, u0_prime=thp_fn)

    mesh_kind = "equator" if variant == "u1" else "sphere"
    return ProblemSpec(
        pid=pid or f"B2{variant}",
        title=title or titles[variant],
        shape=shape,
        kind="conservation",
        t_final=0.5 if variant == "u1" else t_final,
        flux_direction=_sphere_azimuthal,
        flux_profile=_burgers_profile,
        params_of=_sphere_params,
        u0_of_params=u0_by_variant[variant],
        exact_on_mesh=exact_on_mesh,
        mesh_factory=(
            (lambda analysis: analysis.equator_mesh(shape))
            if mesh_kind == "equator"
            else (lambda analysis: analysis.sphere_mesh(shape))
        ),
        exact_mass=exact_mass,
        geometry_compatible=True,
        discontinuous=(variant == "u2"),
    )


def _b3() -> ProblemSpec:
    shape = geometry.Torus(1.0, 0.5)

    def direction(pts):
        pts = np.atleast_2d(pts)
        theta = geometry.azimuth(pts)
        eta = geometry.tube_angle(pts, shape.ring_radius)
        ct, st = np.cos(theta), np.sin(theta)
        ce, se = np.cos(eta), np.sin(eta)
        theta_hat = np.stack([-st, ct, np.zeros_like(ct)], axis=1)
        eta_hat = np.stack([-se * ct, -se * st, ce], axis=1)
        return theta_hat + eta_hat

    def params_of(closest, _p):
        return np.stack(
            [geometry.azimuth(closest), geometry.tube_angle(closest, shape.ring_radius)],
            axis=1,
        )

    u0 = lambda p: np.sin(p[:, 0]) * np.cos(p[:, 1])
    return ProblemSpec(
        pid="B3",
        title="Burgers flow along both principal directions of a torus",
        shape=shape,
        kind="conservation",
        t_final=2.0 * np.pi,
        flux_direction=direction,
        flux_profile=_burgers_profile,
        params_of=params_of,
        u0_of_params=u0,
        mesh_factory=lambda analysis: analysis.torus_mesh(shape),
        # div_Gamma of the poloidal unit direction is -sin(eta)/rho != 0,
        # so the constant-state surface divergence does not vanish here.
        geometry_compatible=False,
    )


def _m1() -> ProblemSpec:
    shape = geometry.Circle(1.0)
    u0 = lambda th: (np.abs(_wrap_pi(th)) <= np.pi / 4.0).astype(np.float64)
    return ProblemSpec(
        pid="M1",
        title="mass tracking for Burgers flow of a box profile on the unit circle",
        shape=shape,
        kind="conservation",
        t_final=2.0 * np.pi,
        flux_direction=_circle_tangent,
        flux_profile=_burgers_profile,
        params_of=_theta_of,
        u0_of_params=u0,
        mesh_factory=lambda analysis: analysis.curve_mesh(shape),
        outer_reference=lambda cfg: Reference1D(u0, _burgers_profile, cfg.order,
                                                cfl=cfg.cfl, eps=cfg.weno_eps),
        exact_mass=np.pi / 2.0,
        geometry_compatible=True,
        discontinuous=True,
    )


_BUILDERS: dict[str, Callable[[], ProblemSpec]] = {
    "A1": _a1,
    "A2": _a2,
    "A3": _a3,
    "A4": _a4,
    "B1": _b1,
    "B2u1": lambda: _b2("u1"),
    "B2u2": lambda: _b2("u2"),
    "B2u3": lambda: _b2("u3"),
    "B3": _b3,
    "M1": _m1,
    "M2": lambda: _b2(
        "u2",
        pid="M2",
        exact_mass=np.pi / np.sqrt(2.0),
        title="mass tracking for the sphere box-indicator Burgers flow",
    ),
}


def problem_ids() -> list[str]:
    return list(_BUILDERS)


def make_problem(pid: str) -> ProblemSpec:
    try:
        builder = _BUILDERS[pid]
    except KeyError:
        raise SolverError(
            f"unknown experiment {pid!r}; available: {', '.join(_BUILDERS)}"
        ) from None
    return builder()
