"""Push-forward operator M = [I - phi*H]^(-1) and flux/velocity embedding.

Surface fluxes defined on the zero level set extend to the band by
evaluation at the closest point followed by left-multiplication with M,
which rescales tangential components so that the extended flux is again
tangential to the level set through each band point.  The matrix is
inverted in closed form (2x2 / 3x3 adjugate) for speed and determinism.

In ``straightforward`` mode M = I: fluxes are extended by closest-point
evaluation only.  That mode solves the same surface equation on the zero
level set but generates flux across neighboring level sets, which shows
up as normal variation of the solution; it exists for comparison runs.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularOperatorError

_DET_FLOOR = 1e-8
_CHUNK = 1 << 20


class PushForwardField:
    """Per-band-point embedding matrices (or identity in straightforward mode)."""

    def __init__(self, mode: str, mat: np.ndarray | None, n_fallback: int = 0):
        self.mode = mode
        self.mat = mat
        self.n_fallback = n_fallback

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Matrix-vector product per point: (Q, d) -> (Q, d)."""
        if self.mat is None:
            return vec
        out = np.empty_like(vec)
        for lo in range(0, len(vec), _CHUNK):
            hi = lo + _CHUNK
            out[lo:hi] = np.einsum("qij,qj->qi", self.mat[lo:hi], vec[lo:hi])
        return out


def _inverse_2x2(a: np.ndarray, det: np.ndarray) -> np.ndarray:
    inv = np.empty_like(a)
    inv[:, 0, 0] = a[:, 1, 1]
    inv[:, 0, 1] = -a[:, 0, 1]
    inv[:, 1, 0] = -a[:, 1, 0]
    inv[:, 1, 1] = a[:, 0, 0]
    return inv / det[:, None, None]


def _inverse_3x3(a: np.ndarray, det: np.ndarray) -> np.ndarray:
    inv = np.empty_like(a)
    inv[:, 0, 0] = a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1]
    inv[:, 0, 1] = a[:, 0, 2] * a[:, 2, 1] - a[:, 0, 1] * a[:, 2, 2]
    inv[:, 0, 2] = a[:, 0, 1] * a[:, 1, 2] - a[:, 0, 2] * a[:, 1, 1]
    inv[:, 1, 0] = a[:, 1, 2] * a[:, 2, 0] - a[:, 1, 0] * a[:, 2, 2]
    inv[:, 1, 1] = a[:, 0, 0] * a[:, 2, 2] - a[:, 0, 2] * a[:, 2, 0]
    inv[:, 1, 2] = a[:, 0, 2] * a[:, 1, 0] - a[:, 0, 0] * a[:, 1, 2]
    inv[:, 2, 0] = a[:, 1, 0] * a[:, 2, 1] - a[:, 1, 1] * a[:, 2, 0]
    inv[:, 2, 1] = a[:, 0, 1] * a[:, 2, 0] - a[:, 0, 0] * a[:, 2, 1]
    inv[:, 2, 2] = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    return inv / det[:, None, None]


def _det(a: np.ndarray) -> np.ndarray:
    if a.shape[-1] == 2:
        return a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    return (
        a[:, 0, 0] * (a[:, 1, 1] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 1])
        - a[:, 0, 1] * (a[:, 1, 0] * a[:, 2, 2] - a[:, 1, 2] * a[:, 2, 0])
        + a[:, 0, 2] * (a[:, 1, 0] * a[:, 2, 1] - a[:, 1, 1] * a[:, 2, 0])
    )


def pushforward_matrix(phi: np.ndarray, hess: np.ndarray, positions: np.ndarray | None = None) -> np.ndarray:
    """Invert I - phi*H per point, failing loudly on a near-singular matrix."""
    phi = np.asarray(phi, dtype=np.float64)
    d = hess.shape[-1]
    a = -phi[:, None, None] * hess
    a[:, range(d), range(d)] += 1.0
    det = _det(a)
    bad = np.abs(det) < _DET_FLOOR
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        where = f" at {positions[i].tolist()}" if positions is not None else f" (slot {i})"
        raise SingularOperatorError(
            f"|det(I - phi*H)| = {abs(det[i]):.3e} < {_DET_FLOOR:g}{where}; "
            f"the tube radius violates the curvature bound"
        )
    return _inverse_2x2(a, det) if d == 2 else _inverse_3x3(a, det)


def build_pushforward(geom, mode: str = "pushforward", guard_mask: np.ndarray | None = None,
                      positions: np.ndarray | None = None) -> PushForwardField:
    """Build the embedding matrices for band geometry.

    guard_mask limits where a near-singular matrix is fatal: schemes only
    read fluxes within |phi| <= R + 2*dx, while far outer points of the
    parametric shapes can straddle the distance function's cut locus,
    where difference Hessians are meaningless.  Outside the mask such
    matrices fall back to identity and are counted, never read.
    """
    if mode == "straightforward":
        return PushForwardField(mode, None)
    if mode != "pushforward":
        raise ValueError(f"unknown embedding mode: {mode!r}")
    phi = np.asarray(geom.phi, dtype=np.float64)
    hess = geom.hessian
    d = hess.shape[-1]
    a = -phi[:, None, None] * hess
    a[:, range(d), range(d)] += 1.0
    det = _det(a)
    bad = np.abs(det) < _DET_FLOOR
    n_fallback = 0
    if bad.any():
        fatal = bad if guard_mask is None else (bad & guard_mask)
        if fatal.any():
            i = int(np.flatnonzero(fatal)[0])
            where = f" at {positions[i].tolist()}" if positions is not None else f" (slot {i})"
            raise SingularOperatorError(
                f"|det(I - phi*H)| = {abs(det[i]):.3e} < {_DET_FLOOR:g}{where}; "
                f"the tube radius violates the curvature bound"
            )
        n_fallback = int(bad.sum())
        det = np.where(bad, 1.0, det)
    mat = _inverse_2x2(a, det) if d == 2 else _inverse_3x3(a, det)
    if n_fallback:
        eye = np.eye(d)
        mat[bad] = eye
    return PushForwardField(mode, mat, n_fallback)


def embed_velocity(pf: PushForwardField, closest: np.ndarray, velocity_fn) -> np.ndarray:
    """Embedded velocity M(x) * V(P(x)) at every band point, (Q, d)."""
    return pf.apply(np.asarray(velocity_fn(closest), dtype=np.float64))


def embed_flux(pf: PushForwardField, closest: np.ndarray, flux_fn, u: np.ndarray) -> np.ndarray:
    """Embedded flux M(x) * F(P(x), u) at every band point, (Q, d)."""
    return pf.apply(np.asarray(flux_fn(closest, u), dtype=np.float64))
