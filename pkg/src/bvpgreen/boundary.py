"""Stieltjes boundary operators: atoms plus an absolutely continuous density.

A boundary operator U maps continuous m-vector functions on [a, b] to C^m:

    U y  =  sum_k  B_k y(t_k)  +  integral of Phi(t) y(t) dt

which is the atoms+density representation of a normalized bounded-variation
matrix measure (zero at a, left-continuous).  Atoms at both endpoints are
allowed.  The transform ``h_transform`` accumulates the measure against a
matrizant and is left-continuous: the atom at t contributes only for
arguments strictly beyond t, while ``total`` includes every atom (in
particular one at b) and equals the operator applied to the matrizant
column-wise.

The operator norm uses the matrix norm induced by the l1 vector norm
(maximum column abs-sum).  For measures with distinct atoms this attains the
supremum over the unit ball of continuous functions, since values at
distinct points can be chosen independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .ode import CoeffFn, VecFn, Interval, Matrizant, coeff_sub, coeff_scale, zero_coeff
from .quad import adaptive_integral, cumulative_integral

__all__ = [
    "BoundaryMeasure", "HTransform", "apply", "apply_to_matrix",
    "h_transform", "operator_norm", "variation_distance",
    "strong_convergence_probe", "point_operator",
]

_APPLY_RTOL = 1e-9
_ZERO_WEIGHT_TOL = 0.0  # atoms are dropped only when exactly zero


@dataclass(frozen=True)
class BoundaryMeasure:
    """Boundary operator as atoms (t_k, B_k) plus an optional density.

    Construction canonicalizes: atom weights at identical locations are
    merged, exactly-zero weights are dropped, locations are sorted and must
    lie within the interval.
    """

    dim: int
    interval: Interval
    atoms: tuple = ()
    density: CoeffFn | None = None

    def __post_init__(self):
        merged: dict[float, np.ndarray] = {}
        for loc, w in self.atoms:
            loc = float(loc)
            if not self.interval.a <= loc <= self.interval.b:
                raise ValueError(f"atom location {loc} outside [{self.interval.a}, {self.interval.b}]")
            W = linalg.as_cmat(w, self.dim)
            merged[loc] = merged.get(loc, 0) + W
        canon = tuple(sorted(
            ((loc, W) for loc, W in merged.items() if linalg.abs_norm(W) > _ZERO_WEIGHT_TOL),
            key=lambda kv: kv[0]))
        object.__setattr__(self, "atoms", canon)
        if self.density is not None and self.density.dim != self.dim:
            raise ValueError("density dimension mismatch")

    @property
    def atom_locations(self) -> np.ndarray:
        return np.array([loc for loc, _ in self.atoms])


def point_operator(interval: Interval, loc: float, weight) -> BoundaryMeasure:
    """Single-atom operator  y -> B y(loc)."""
    W = linalg.as_cmat(weight)
    return BoundaryMeasure(W.shape[0], interval, atoms=((loc, W),))


def _density_quad_width(U: BoundaryMeasure, other=None) -> float | None:
    scales = []
    if U.density is not None and U.density.oscillation_scale is not None:
        scales.append(U.density.oscillation_scale)
    if other is not None and getattr(other, "oscillation_scale", None) is not None:
        scales.append(other.oscillation_scale)
    return min(scales) / 4 if scales else None


def apply(U: BoundaryMeasure, y: VecFn) -> np.ndarray:
    """Apply the operator to a continuous vector function."""
    if y.dim != U.dim:
        raise ValueError("dimension mismatch")
    out = np.zeros(U.dim, dtype=np.complex128)
    for loc, W in U.atoms:
        out += W @ y(loc)
    if U.density is not None:
        Phi = U.density

        def integrand(ts):
            return np.einsum("nij,nj->ni", Phi.eval_many(ts), y.eval_many(ts))

        breaks = tuple(sorted(set(Phi.breakpoints) | set(y.breakpoints)))
        out += adaptive_integral(integrand, U.interval.a, U.interval.b,
                                 breakpoints=breaks,
                                 max_width=_density_quad_width(U, y),
                                 rel_tol=_APPLY_RTOL)
    return out


class HTransform:
    """Left-continuous accumulation of the boundary measure against Y.

    ``__call__(t)`` gives   sum_{t_k < t} B_k Y(t_k) + integral_a^t Phi Y;
    ``total`` additionally includes atoms at the right endpoint, matching
    the operator applied to the matrizant.
    """

    def __init__(self, U: BoundaryMeasure, Y: Matrizant):
        if U.dim != Y.dim:
            raise ValueError("dimension mismatch")
        self.U = U
        self.Y = Y
        self.dim = U.dim
        locs = U.atom_locations
        self._locs = locs
        if len(U.atoms):
            Yk = Y.values_on(locs)
            self._contribs = np.stack([W @ Yk[i] for i, (_, W) in enumerate(U.atoms)])
            self._atom_prefix = np.concatenate(
                [np.zeros((1, self.dim, self.dim), dtype=np.complex128),
                 np.cumsum(self._contribs, axis=0)])
        else:
            self._contribs = np.empty((0, self.dim, self.dim), dtype=np.complex128)
            self._atom_prefix = np.zeros((1, self.dim, self.dim), dtype=np.complex128)
        self._cum = None
        if U.density is not None:
            Phi = U.density

            def integrand(ts):
                return np.einsum("nij,njk->nik", Phi.eval_many(ts), Y.values_on(ts))

            self._cum = cumulative_integral(
                integrand, U.interval.a, U.interval.b,
                breakpoints=Phi.breakpoints,
                max_width=_density_quad_width(U, Y.coeff),
                rel_tol=_APPLY_RTOL)

    def __call__(self, t: float) -> np.ndarray:
        return self.at_many(np.array([float(t)]))[0]

    def at_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        # atoms strictly below t (left continuity)
        k = np.searchsorted(self._locs, ts, side="left")
        out = self._atom_prefix[k].copy()
        if self._cum is not None:
            out += self._cum.at_many(ts)
        return out

    @property
    def total(self) -> np.ndarray:
        """Full-measure value, endpoint atoms included."""
        out = self._atom_prefix[-1].copy()
        if self._cum is not None:
            out += self._cum.total
        return out


def h_transform(U: BoundaryMeasure, Y: Matrizant) -> HTransform:
    return HTransform(U, Y)


def apply_to_matrix(U: BoundaryMeasure, Y: Matrizant) -> np.ndarray:
    """Operator applied column-wise to the matrizant (= transform total)."""
    return h_transform(U, Y).total


def operator_norm(U: BoundaryMeasure) -> float:
    """Norm as an operator from continuous functions (sup of l1) to l1."""
    out = sum(linalg.colsum_norm(W) for _, W in U.atoms)
    if U.density is not None:
        Phi = U.density

        def integrand(ts):
            return np.abs(Phi.eval_many(ts)).sum(axis=1).max(axis=1)

        out += float(adaptive_integral(integrand, U.interval.a, U.interval.b,
                                       breakpoints=Phi.breakpoints,
                                       max_width=_density_quad_width(U),
                                       rel_tol=_APPLY_RTOL))
    return float(out)


def measure_sub(U1: BoundaryMeasure, U2: BoundaryMeasure) -> BoundaryMeasure:
    """Signed difference measure; shared atom locations merge by subtraction."""
    if U1.dim != U2.dim or U1.interval != U2.interval:
        raise ValueError("measures must share dimension and interval")
    atoms = list(U1.atoms) + [(loc, -W) for loc, W in U2.atoms]
    if U1.density is None and U2.density is None:
        density = None
    elif U2.density is None:
        density = U1.density
    elif U1.density is None:
        density = coeff_scale(U2.density, -1.0)
    else:
        density = coeff_sub(U1.density, U2.density)
        if U1.density is U2.density:
            density = None
    return BoundaryMeasure(U1.dim, U1.interval, atoms=tuple(atoms), density=density)


def variation_distance(U1: BoundaryMeasure, U2: BoundaryMeasure) -> float:
    """Total-variation distance in the induced operator norm."""
    return operator_norm(measure_sub(U1, U2))


def strong_convergence_probe(U_eps: BoundaryMeasure, U_0: BoundaryMeasure,
                             probes: Sequence[VecFn]) -> float:
    """Finite-probe surrogate of strong operator convergence.

    Returns max_k |U_eps y_k - U_0 y_k| over the probe functions; a
    necessary-condition check only (a finite family cannot certify strong
    convergence).
    """
    worst = 0.0
    for y in probes:
        worst = max(worst, linalg.abs_norm(apply(U_eps, y) - apply(U_0, y)))
    return worst
