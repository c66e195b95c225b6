"""Serial numba kernels for the per-point scheme updates.

All kernels operate on flat band arrays: u has one entry per band slot,
neighbor maps are (d, Q) int32 slot arrays (self slot where the neighbor
is missing), and velocity / flux-direction fields are (d, Q) with the
axis leading so each axis pass streams contiguously.  Conservative
fluxes fhat[a, i] live on the interface between slot i and its +1
neighbor along axis a.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def upwind_advection_rhs(u, vel, m1, p1, inner, dx, out):
    """First-order dimension-by-dimension upwind L(u) = -V.grad(u)."""
    d = vel.shape[0]
    for ii in range(inner.size):
        i = inner[ii]
        acc = 0.0
        for a in range(d):
            v = vel[a, i]
            if v > 0.0:
                acc -= v * (u[i] - u[m1[a, i]])
            elif v < 0.0:
                acc -= v * (u[p1[a, i]] - u[i])
        out[i] = acc / dx
    return 0


@njit(cache=True)
def hj_weno3_rhs(u, vel, m2, m1, p1, p2, inner, dx, eps, out):
    """Third-order HJ-WENO one-sided derivatives selected by velocity sign.

    Smoothness is measured on divided second differences so eps keeps the
    same meaning at every resolution.
    """
    d = vel.shape[0]
    inv2 = 1.0 / (dx * dx)
    for ii in range(inner.size):
        i = inner[ii]
        acc = 0.0
        for a in range(d):
            v = vel[a, i]
            if v == 0.0:
                continue
            if v > 0.0:
                d1 = u[m1[a, i]] - u[m2[a, i]]
                d2 = u[i] - u[m1[a, i]]
                d3 = u[p1[a, i]] - u[i]
            else:
                d1 = u[p2[a, i]] - u[p1[a, i]]
                d2 = u[p1[a, i]] - u[i]
                d3 = u[i] - u[m1[a, i]]
            q1 = (d2 - d1) * inv2
            q2 = (d3 - d2) * inv2
            r = (eps + q1 * q1) / (eps + q2 * q2)
            w = 1.0 / (1.0 + 2.0 * r * r)
            du = 0.5 * (d2 + d3) - 0.5 * w * (d3 - 2.0 * d2 + d1)
            acc -= v * du
        out[i] = acc / dx
    return 0


@njit(cache=True)
def lxf_interface_flux(u, gu, w, p1, dx_over_ddt, fhat):
    """Lax-Friedrichs interface fluxes on every band interface.

    fhat[a,i] = (f_i + f_{i+1})/2 - (dx/(d*dt))/2 * (u_{i+1} - u_i) with
    f = w*g(u); dx_over_ddt carries the dimension-scaled dissipation.
    """
    d, n = w.shape
    for a in range(d):
        for i in range(n):
            j = p1[a, i]
            fi = w[a, i] * gu[i]
            fj = w[a, j] * gu[j]
            fhat[a, i] = 0.5 * (fi + fj) - 0.5 * dx_over_ddt * (u[j] - u[i])
    return 0


@njit(cache=True)
def weno3_interface_flux(u, gu, w, alpha, m1, p1, p2, eps, fhat):
    """Third-order WENO interface fluxes with global Lax-Friedrichs splitting.

    Per axis a the flux f = w[a]*g(u) splits into f +- alpha[a]*u halves;
    the upwind half reconstructs from {i-1, i, i+1}, the downwind half
    mirrors from {i, i+1, i+2}.
    """
    d, n = w.shape
    for a in range(d):
        al = alpha[a]
        for i in range(n):
            im1 = m1[a, i]
            ip1 = p1[a, i]
            ip2 = p2[a, i]
            f0 = w[a, im1] * gu[im1]
            f1 = w[a, i] * gu[i]
            f2 = w[a, ip1] * gu[ip1]
            f3 = w[a, ip2] * gu[ip2]
            # upwind-biased half
            a0 = 0.5 * (f0 + al * u[im1])
            a1 = 0.5 * (f1 + al * u[i])
            a2 = 0.5 * (f2 + al * u[ip1])
            b0 = (a1 - a0) * (a1 - a0)
            b1 = (a2 - a1) * (a2 - a1)
            w0 = (1.0 / 3.0) / ((eps + b0) * (eps + b0))
            w1 = (2.0 / 3.0) / ((eps + b1) * (eps + b1))
            hp = (w0 * (1.5 * a1 - 0.5 * a0) + w1 * 0.5 * (a1 + a2)) / (w0 + w1)
            # downwind-biased half, mirrored about the interface
            c0 = 0.5 * (f1 - al * u[i])
            c1 = 0.5 * (f2 - al * u[ip1])
            c2 = 0.5 * (f3 - al * u[ip2])
            b0m = (c1 - c2) * (c1 - c2)
            b1m = (c0 - c1) * (c0 - c1)
            w0m = (1.0 / 3.0) / ((eps + b0m) * (eps + b0m))
            w1m = (2.0 / 3.0) / ((eps + b1m) * (eps + b1m))
            hm = (w0m * (1.5 * c1 - 0.5 * c2) + w1m * 0.5 * (c0 + c1)) / (w0m + w1m)
            fhat[a, i] = hp + hm
    return 0


@njit(cache=True)
def flux_divergence_rhs(fhat, m1, inner, dx, out):
    """L(u) = -sum_a (fhat[a,i] - fhat[a,i-1]) / dx at inner points."""
    d = fhat.shape[0]
    for ii in range(inner.size):
        i = inner[ii]
        acc = 0.0
        for a in range(d):
            acc -= fhat[a, i] - fhat[a, m1[a, i]]
        out[i] = acc / dx
    return 0


@njit(cache=True)
def sweep_iterate(src, dst, outer, vsweep, m1, p1, dx, dtau):
    """One Jacobi pseudo-time upwind iteration of u_tau + sign(phi) n.grad(u) = 0.

    Reads src only, writes outer slots of dst, returns the max absolute
    change so the caller can stop at steady state.
    """
    d = vsweep.shape[0]
    res = 0.0
    for jj in range(outer.size):
        i = outer[jj]
        acc = 0.0
        for a in range(d):
            v = vsweep[a, jj]
            if v > 0.0:
                acc += v * (src[i] - src[m1[a, i]])
            elif v < 0.0:
                acc += v * (src[p1[a, i]] - src[i])
        new = src[i] - (dtau / dx) * acc
        diff = new - src[i]
        if diff < 0.0:
            diff = -diff
        if diff > res:
            res = diff
        dst[i] = new
    return res


@njit(cache=True)
def tensor_interp_2d(u, slots, wx, wy, targets, out):
    """Cubic tensor-product gather: out[targets[k]] = sum w*u over 4x4 slots."""
    for k in range(targets.size):
        acc = 0.0
        for a in range(4):
            wa = wx[k, a]
            if wa == 0.0:
                continue
            for b in range(4):
                acc += wa * wy[k, b] * u[slots[k, 4 * a + b]]
        out[targets[k]] = acc
    return 0


@njit(cache=True)
def tensor_interp_3d(u, slots, wx, wy, wz, targets, out):
    """Cubic tensor-product gather: out[targets[k]] = sum w*u over 4x4x4 slots."""
    for k in range(targets.size):
        acc = 0.0
        for a in range(4):
            wa = wx[k, a]
            if wa == 0.0:
                continue
            for b in range(4):
                wab = wa * wy[k, b]
                if wab == 0.0:
                    continue
                base = 16 * a + 4 * b
                for c in range(4):
                    acc += wab * wz[k, c] * u[slots[k, base + c]]
        out[targets[k]] = acc
    return 0
