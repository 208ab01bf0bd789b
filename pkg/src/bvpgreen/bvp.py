"""Boundary value problems and their Green matrices.

Solutions go through the matrizant reduction: the general solution of the
inhomogeneous system is x + Y c with x the zero-initial-value Cauchy
solution, and the boundary condition picks c by solving the characteristic
system [U Y] c = c_rhs - U x.  Well-posedness is the non-degeneracy of
[U Y], checked against a relative threshold built from its row norms.

The Green matrix is assembled from the matrizant Y, the measure transform
H_Y and the characteristic matrix H_Y(b) = [U Y]:

    G(t, s) = Y(t) [ H_Y(b)^{-1} H_Y(s) - 1_{t < s} I ] Y(s)^{-1}

with H_Y(s) the left-continuous transform.  On the diagonal the s <= t
branch applies, giving the unit jump G(t+, t) - G(t-, t) = I.  At atom
locations of the measure, G inherits s-direction jumps from the left
continuity of H_Y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .boundary import BoundaryMeasure, HTransform, apply, h_transform
from .ode import (CoeffFn, Interval, Matrizant, VecFn, cauchy_solution,
                  matrizant, zero_vecfn, DEFAULT_TOL)
from .quad import adaptive_integral

__all__ = [
    "BVProblem", "GreenMatrix", "NonUniqueError", "SingularBoundaryError",
    "VerificationError", "check_wellposed", "solve_bvp", "green_matrix",
    "green_apply", "green_grid_csv", "tabulation_grid",
]

#: relative scale for the |det [U Y]| degeneracy threshold
DET_RTOL = 1e-10

#: residual tolerance of the boundary condition after a solve
RESIDUAL_RTOL = 1e-7


class NonUniqueError(ArithmeticError):
    """The homogeneous problem has a nontrivial kernel at this parameter."""


class SingularBoundaryError(ArithmeticError):
    """The characteristic matrix H_Y(b) is degenerate; no Green matrix."""


class VerificationError(RuntimeError):
    """A post-solve consistency check failed beyond its tolerance."""


@dataclass
class BVProblem:
    """Inhomogeneous problem  y' = A y + f  on [a, b],  U y = c."""

    interval: Interval
    A: CoeffFn
    f: VecFn
    U: BoundaryMeasure
    c: np.ndarray

    def __post_init__(self):
        self.c = linalg.as_cvec(self.c)
        m = self.A.dim
        if not (self.f.dim == m and self.U.dim == m and self.c.shape[0] == m):
            raise ValueError("problem parts disagree on the dimension")
        if self.U.interval != self.interval:
            raise ValueError("boundary measure interval differs from the problem interval")

    @property
    def dim(self) -> int:
        return self.A.dim


def _det_threshold(UY: np.ndarray) -> float:
    """Relative degeneracy threshold: DET_RTOL times the product of row
    abs-sums of the characteristic matrix (survives problem rescaling)."""
    rows = np.abs(UY).sum(axis=1)
    return DET_RTOL * float(np.prod(rows))


def _characteristic(A: CoeffFn, U: BoundaryMeasure, interval: Interval, tol: float):
    Y = matrizant(A, interval, tol)
    HY = h_transform(U, Y)
    UY = HY.total
    return Y, HY, UY, linalg.det(UY)


def check_wellposed(A: CoeffFn, U: BoundaryMeasure, interval: Interval,
                    tol: float = DEFAULT_TOL) -> complex:
    """Determinant of the characteristic matrix [U Y].

    The caller judges the magnitude; zero (or tiny against the row-norm
    scale) means the limit homogeneous problem has nontrivial solutions.
    """
    _, _, _, d = _characteristic(A, U, interval, tol)
    return d


def _solve_given(Y: Matrizant, HY: HTransform, UY, detUY, p: BVProblem, tol: float) -> VecFn:
    if abs(detUY) <= _det_threshold(UY):
        raise NonUniqueError(
            f"characteristic determinant {detUY:.3e} below threshold; "
            "the homogeneous problem has a nontrivial kernel")
    x = cauchy_solution(p.A, p.f, p.interval, tol)
    Ux = apply(p.U, x)
    try:
        ctilde = linalg.lu_solve(UY, p.c - Ux)
    except linalg.SingularMatrixError as exc:
        raise NonUniqueError(str(exc)) from exc

    def fn(t):
        return Y(t) @ ctilde + x(t)

    def batch(ts):
        return Y.values_on(ts) @ ctilde + x.eval_many(ts)

    y = VecFn(p.dim, fn, batch=batch, oscillation_scale=p.A.oscillation_scale)
    resid = linalg.abs_norm(apply(p.U, y) - p.c)
    if resid > RESIDUAL_RTOL * (1.0 + linalg.abs_norm(p.c)):
        raise VerificationError(
            f"boundary residual {resid:.3e} exceeds tolerance; integration or "
            "quadrature accuracy is insufficient for this problem")
    return y


def solve_bvp(p: BVProblem, tol: float = DEFAULT_TOL) -> VecFn:
    """Solve the boundary value problem; raises NonUniqueError when the
    characteristic matrix is degenerate at this parameter."""
    Y, HY, UY, d = _characteristic(p.A, p.U, p.interval, tol)
    return _solve_given(Y, HY, UY, d, p, tol)


@dataclass
class GreenMatrix:
    """Evaluable Green kernel of the semihomogeneous problem (U y = 0).

    Stores the matrizant, the left-continuous measure transform and the
    inverse characteristic matrix; values are assembled lazily.
    """

    interval: Interval
    dim: int
    Y: Matrizant
    HY: HTransform
    HYb: np.ndarray
    HYb_inv: np.ndarray

    def __call__(self, t: float, s: float) -> np.ndarray:
        core = self.HYb_inv @ self.HY(s)
        if t < s:
            core = core - np.eye(self.dim)
        return self.Y(t) @ core @ self.Y.inverse_at(s)

    def tabulate(self, ts, ss) -> np.ndarray:
        """Values on a grid, shape (len(ts), len(ss), m, m)."""
        ts = np.asarray(ts, dtype=float)
        ss = np.asarray(ss, dtype=float)
        Yt = self.Y.values_on(ts)
        Yinv = self.Y.inverses_on(ss)
        cores = self.HYb_inv @ self.HY.at_many(ss)
        smooth = np.einsum("aij,bjk,bkl->abil", Yt, cores, Yinv)
        jump = np.einsum("aij,bjk->abik", Yt, Yinv)
        mask = (ts[:, None] < ss[None, :]).astype(float)
        return smooth - mask[:, :, None, None] * jump


def green_matrix(A: CoeffFn, U: BoundaryMeasure, interval: Interval,
                 tol: float = DEFAULT_TOL) -> GreenMatrix:
    """Construct the Green matrix; requires a nondegenerate H_Y(b)."""
    Y, HY, UY, d = _characteristic(A, U, interval, tol)
    return _green_given(Y, HY, UY, d)


def _green_given(Y: Matrizant, HY: HTransform, UY, detUY) -> GreenMatrix:
    if abs(detUY) <= _det_threshold(UY):
        raise SingularBoundaryError(
            f"det H_Y(b) = {detUY:.3e} is below threshold; no Green matrix")
    return GreenMatrix(Y.interval, Y.dim, Y, HY, UY, linalg.inverse(UY))


def green_apply(G: GreenMatrix, f: VecFn) -> VecFn:
    """Quadrature of the kernel against a load:  y(t) = int G(t, s) f(s) ds.

    Panels split at t, at atom locations of the boundary measure and at
    declared breakpoints of the load, so the kernel's jumps never straddle a
    panel.  The result solves the semihomogeneous problem (U y = 0).
    """
    if f.dim != G.dim:
        raise ValueError("dimension mismatch")
    iv = G.interval
    base_breaks = set(G.HY.U.atom_locations.tolist()) | set(f.breakpoints)
    scales = [s for s in (f.oscillation_scale, G.Y.coeff.oscillation_scale)
              if s is not None]
    width = min(scales) / 4 if scales else None

    def at(t: float) -> np.ndarray:
        Yt = G.Y(float(t))

        def integrand(ss):
            cores = G.HYb_inv @ G.HY.at_many(ss)
            mask = (float(t) < ss)
            cores[mask] -= np.eye(G.dim)
            Yinv = G.Y.inverses_on(ss)
            fv = f.eval_many(ss)
            return np.einsum("ij,njk,nkl,nl->ni", Yt, cores, Yinv, fv)

        breaks = tuple(sorted(base_breaks | {float(t)}))
        return adaptive_integral(integrand, iv.a, iv.b, breakpoints=breaks,
                                 max_width=width, rel_tol=1e-9, abs_tol=1e-12)

    def batch(ts):
        return np.stack([at(t) for t in np.asarray(ts, dtype=float)])

    return VecFn(G.dim, at, batch=batch)


def tabulation_grid(interval: Interval, n: int, avoid=()) -> np.ndarray:
    """Midpoint grid of n points, nudged off the listed coordinates.

    Cell midpoints avoid the endpoints and the diagonal-degenerate corners;
    any point colliding with an ``avoid`` coordinate (atom locations) is
    shifted by a deterministic fraction of the spacing.
    """
    span = interval.span
    step = span / n
    pts = interval.a + step * (np.arange(n) + 0.5)
    avoid = np.asarray(sorted(avoid), dtype=float)
    if avoid.size:
        for _ in range(4):
            j = np.searchsorted(avoid, pts)
            lo = np.clip(j - 1, 0, avoid.size - 1)
            hi = np.clip(j, 0, avoid.size - 1)
            near = np.minimum(np.abs(pts - avoid[lo]), np.abs(avoid[hi] - pts))
            hit = near < 1e-12 * span
            if not hit.any():
                break
            pts[hit] += step / 7
    return pts


def green_grid_csv(G: GreenMatrix, ts, ss) -> str:
    """CSV tabulation: columns t, s, then m^2 (re, im) pairs, row-major."""
    m = G.dim
    header = ["t", "s"]
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            header += [f"g_{i}{j}_re", f"g_{i}{j}_im"]
    vals = G.tabulate(ts, ss)
    lines = [",".join(header)]
    for a, t in enumerate(ts):
        for b, s in enumerate(ss):
            row = [f"{t:.17g}", f"{s:.17g}"]
            for i in range(m):
                for j in range(m):
                    z = vals[a, b, i, j]
                    row += [f"{z.real:.17g}", f"{z.imag:.17g}"]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"
