"""Matrizants, Cauchy solutions and functional norms for linear ODE systems.

The integrator is an embedded explicit Runge-Kutta pair of orders 5(4)
(Dormand-Prince coefficients) with proportional-integral step control.
Coefficients are bounded measurable, not stiff; oscillation is handled by
capping the step at 1/20 of the declared feature wavelength.  Dense output
between stored nodes re-integrates from the nearest node with one fixed
fifth-order step, which preserves the order without storing stage values.

Discontinuous coefficients must declare their breakpoints; accepted steps
land exactly on them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import linalg
from .quad import adaptive_integral, cumulative_integral, CumulativeIntegral

__all__ = [
    "Interval", "CoeffFn", "VecFn", "Matrizant", "StepUnderflowError",
    "matrizant", "inverse_matrizant", "cauchy_solution", "antiderivative",
    "l1_norm", "sup_norm", "coeff_add", "coeff_sub", "coeff_scale",
    "zero_coeff", "zero_vecfn", "constant_coeff", "constant_vecfn",
    "batch_values", "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-8

#: accepted tolerance range for the integrator
TOL_MIN, TOL_MAX = 1e-12, 1e-2

#: minimum step as a fraction of the interval length
STEP_UNDERFLOW_FRAC = 1e-14

#: steps per declared feature wavelength
STEPS_PER_WAVELENGTH = 20


class StepUnderflowError(RuntimeError):
    """Required step fell below 1e-14 of the interval: coefficient too rough."""


@dataclass(frozen=True)
class Interval:
    """Compact segment [a, b] with a < b."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("interval endpoints must be finite")
        if not self.a < self.b:
            raise ValueError(f"interval requires a < b, got [{self.a}, {self.b}]")

    @property
    def span(self) -> float:
        return self.b - self.a

    def grid(self, n: int) -> np.ndarray:
        return np.linspace(self.a, self.b, n)


@dataclass
class CoeffFn:
    """Time-dependent m x m coefficient on [a, b].

    ``fn`` maps a scalar t to an (m, m) complex array.  ``batch``, when
    given, vectorizes over a 1-d array of abscissae (-> (n, m, m)); it makes
    quadrature and the fixed-step fast path cheap but is never required.
    ``oscillation_scale`` is the smallest feature wavelength (for instance
    the parameter value itself for coefficients oscillating like t/eps);
    ``breakpoints`` list discontinuities the integrator must land on.
    """

    dim: int
    fn: Callable[[float], np.ndarray]
    batch: Callable[[np.ndarray], np.ndarray] | None = None
    oscillation_scale: float | None = None
    l1_bound: float | None = None
    breakpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.oscillation_scale is not None and not self.oscillation_scale > 0:
            raise ValueError("oscillation_scale must be positive")

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.fn(t), dtype=np.complex128)

    def eval_many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.batch is not None:
            return np.asarray(self.batch(ts), dtype=np.complex128)
        return np.stack([self(t) for t in ts]) if ts.size else \
            np.empty((0, self.dim, self.dim), dtype=np.complex128)


@dataclass
class VecFn:
    """Time-dependent m-vector on [a, b]; same metadata as :class:`CoeffFn`.

    ``is_zero`` marks the identically-zero function, enabling exact
    shortcuts (the Cauchy solution of a zero load is zero).
    """

    dim: int
    fn: Callable[[float], np.ndarray]
    batch: Callable[[np.ndarray], np.ndarray] | None = None
    oscillation_scale: float | None = None
    l1_bound: float | None = None
    breakpoints: tuple[float, ...] = ()
    is_zero: bool = False

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.fn(t), dtype=np.complex128)

    def eval_many(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.batch is not None:
            return np.asarray(self.batch(ts), dtype=np.complex128)
        return np.stack([self(t) for t in ts]) if ts.size else \
            np.empty((0, self.dim), dtype=np.complex128)


def batch_values(F, ts: np.ndarray) -> np.ndarray:
    """Evaluate any supported evaluable on an array of abscissae."""
    for attr in ("at_many", "values_on", "eval_many"):
        fn = getattr(F, attr, None)
        if fn is not None:
            return np.asarray(fn(ts))
    return np.stack([np.asarray(F(t)) for t in ts])


# ---------------------------------------------------------------------------
# coefficient arithmetic

def _merge_meta(F, G):
    scales = [s for s in (F.oscillation_scale, G.oscillation_scale) if s is not None]
    scale = min(scales) if scales else None
    breaks = tuple(sorted(set(F.breakpoints) | set(G.breakpoints)))
    return scale, breaks


def coeff_add(F: CoeffFn, G: CoeffFn) -> CoeffFn:
    if F.dim != G.dim:
        raise ValueError("dimension mismatch")
    scale, breaks = _merge_meta(F, G)
    batch = None
    if F.batch is not None and G.batch is not None:
        batch = lambda ts: F.eval_many(ts) + G.eval_many(ts)
    return CoeffFn(F.dim, lambda t: F(t) + G(t), batch=batch,
                   oscillation_scale=scale, breakpoints=breaks)


def coeff_scale(F: CoeffFn, s: complex) -> CoeffFn:
    batch = None if F.batch is None else (lambda ts: s * F.eval_many(ts))
    return CoeffFn(F.dim, lambda t: s * F(t), batch=batch,
                   oscillation_scale=F.oscillation_scale,
                   breakpoints=F.breakpoints)


def coeff_sub(F: CoeffFn, G: CoeffFn) -> CoeffFn:
    if F is G:
        return zero_coeff(F.dim)
    if F.dim != G.dim:
        raise ValueError("dimension mismatch")
    scale, breaks = _merge_meta(F, G)
    batch = None
    if F.batch is not None and G.batch is not None:
        batch = lambda ts: F.eval_many(ts) - G.eval_many(ts)
    return CoeffFn(F.dim, lambda t: F(t) - G(t), batch=batch,
                   oscillation_scale=scale, breakpoints=breaks)


def zero_coeff(dim: int) -> CoeffFn:
    Z = np.zeros((dim, dim), dtype=np.complex128)
    return CoeffFn(dim, lambda t: Z, batch=lambda ts: np.zeros((len(ts), dim, dim), dtype=np.complex128),
                   l1_bound=0.0)


def constant_coeff(M) -> CoeffFn:
    M = linalg.as_cmat(M)
    return CoeffFn(M.shape[0], lambda t: M,
                   batch=lambda ts: np.broadcast_to(M, (len(ts),) + M.shape).copy())


def zero_vecfn(dim: int) -> VecFn:
    z = np.zeros(dim, dtype=np.complex128)
    return VecFn(dim, lambda t: z, batch=lambda ts: np.zeros((len(ts), dim), dtype=np.complex128),
                 l1_bound=0.0, is_zero=True)


def constant_vecfn(v) -> VecFn:
    v = linalg.as_cvec(v)
    return VecFn(v.shape[0], lambda t: v,
                 batch=lambda ts: np.broadcast_to(v, (len(ts),) + v.shape).copy(),
                 is_zero=not np.abs(v).sum())


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) tableau

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = np.zeros((7, 7))
_DP_A[1, 0] = 1 / 5
_DP_A[2, :2] = (3 / 40, 9 / 40)
_DP_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_DP_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_DP_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_DP_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
# row 6 doubles as the 5th-order combination (FSAL); the error weights are
# the difference to the embedded 4th-order solution
_DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                  -17253 / 339200, 22 / 525, -1 / 40])

_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 5.0
_PI_ALPHA, _PI_BETA = 0.7 / 4, 0.4 / 4
_MAX_STEPS = 8_000_000


class _GrowBuf:
    """Append-only buffer of fixed-shape complex values plus their times."""

    def __init__(self, shape, cap=1024):
        self.ts = np.empty(cap)
        self.vals = np.empty((cap,) + shape, dtype=np.complex128)
        self.n = 0

    def append(self, t, v):
        if self.n == len(self.ts):
            self.ts = np.concatenate([self.ts, np.empty_like(self.ts)])
            self.vals = np.concatenate([self.vals, np.empty_like(self.vals)])
        self.ts[self.n] = t
        self.vals[self.n] = v
        self.n += 1

    def extend(self, ts, vals):
        need = self.n + len(ts)
        while need > len(self.ts):
            self.ts = np.concatenate([self.ts, np.empty_like(self.ts)])
            self.vals = np.concatenate([self.vals, np.empty_like(self.vals)])
        self.ts[self.n:need] = ts
        self.vals[self.n:need] = vals
        self.n = need

    def arrays(self):
        return self.ts[: self.n].copy(), self.vals[: self.n].copy()


def _rk_step(rhs, t, y, h, k1):
    """One Dormand-Prince step; returns (y5, err_estimate, k7)."""
    k = [k1]
    for j in range(1, 7):
        yj = y
        for l in range(j):
            a = _DP_A[j, l]
            if a:
                yj = yj + (h * a) * k[l]
        k.append(rhs(t + _DP_C[j] * h, yj))
        if j == 6:
            y5 = yj  # stage-7 argument is the 5th-order solution
    err = np.zeros_like(y)
    for j in range(7):
        e = _DP_E[j]
        if e:
            err = err + (h * e) * k[j]
    return y5, err, k[6]


def _adaptive_segment(rhs, t0, t1, y0, tol, max_step, span, buf):
    """Integrate one smooth segment adaptively, appending accepted nodes."""
    t, y = t0, y0
    k1 = rhs(t0, y0)
    h = min(max_step, (t1 - t0) / 4)
    prev_ratio = 1.0
    steps = 0
    while t < t1:
        h = min(h, t1 - t)
        if h < STEP_UNDERFLOW_FRAC * span:
            raise StepUnderflowError(
                f"step size underflow at t={t!r} (h={h:.3e}); "
                "coefficient too rough for the integrator")
        with np.errstate(over="ignore", invalid="ignore"):
            y5, err, k7 = _rk_step(rhs, t, y, h, k1)
            err_norm = float(np.abs(err).sum())
        budget = tol * (h / span) * (1.0 + float(np.abs(y).sum()))
        ratio = err_norm / budget if budget > 0 else np.inf
        if not np.isfinite(ratio):
            ratio = np.inf
        if ratio <= 1.0 and np.all(np.isfinite(y5.view(np.float64))):
            t = t1 if (t1 - t - h) < 1e-16 * span else t + h
            y, k1 = y5, k7
            buf.append(t, y)
            r = max(ratio, 1e-10)  # floor keeps zero-error steps growing
            fac = _SAFETY * r ** -_PI_ALPHA * prev_ratio ** _PI_BETA
            prev_ratio = r
        else:
            fac = max(0.1, _SAFETY * ratio ** -0.25) if np.isfinite(ratio) else 0.1
        h = min(max_step, h * min(_FAC_MAX, max(_FAC_MIN, fac)))
        steps += 1
        if steps > _MAX_STEPS:
            raise StepUnderflowError("step budget exhausted; integration stalled")
    return y


def _try_fastpath(kind, A, f, lo, hi, y0, tol, max_step, span, buf):
    """Fixed-step compiled fast path for long oscillatory segments.

    Only engages when the coefficient is batched and the step cap forces
    a large step count.  Error control is preserved: every step's embedded
    estimate is checked against the same budget as the adaptive path, and
    the whole segment is re-run with halved steps until it passes.
    Returns the endpoint value, or None when the path does not apply.
    """
    from . import _fastpath
    if not _fastpath.AVAILABLE:
        return None
    if A.batch is None or (kind == "vec" and f is not None and f.batch is None):
        return None
    n_est = (hi - lo) / max_step
    if n_est < 2000:
        return None
    h = max_step
    for _ in range(16):
        n = int(np.ceil((hi - lo) / h))
        if n + 1 > _MAX_STEPS:
            return None
        h_eff = (hi - lo) / n
        ts, vals, max_ratio = _fastpath.run_fixed(
            kind, A, f, lo, y0, n, h_eff, tol / span)
        if max_ratio <= 1.0:
            thin = max(1, int(np.floor(max_step / h_eff + 1e-9)))
            keep = np.arange(1, n + 1, thin)
            if keep[-1] != n:
                keep = np.concatenate([keep, [n]])
            buf.extend(ts[keep], vals[keep])
            return vals[n]
        h = h_eff / 2
        if h < STEP_UNDERFLOW_FRAC * span:
            raise StepUnderflowError("fixed-step refinement underflow")
    return None


def _integrate(kind, A, f, interval, tol, y0):
    """Drive the integration over all smooth segments of [a, b]."""
    if not TOL_MIN <= tol <= TOL_MAX:
        raise ValueError(f"tol must lie in [{TOL_MIN:g}, {TOL_MAX:g}], got {tol:g}")
    span = interval.span
    breaks = set(A.breakpoints)
    scales = [A.oscillation_scale]
    if f is not None:
        breaks |= set(f.breakpoints)
        scales.append(f.oscillation_scale)
    scales = [s for s in scales if s is not None]
    max_step = min(scales) / STEPS_PER_WAVELENGTH if scales else span / 8
    max_step = min(max_step, span / 8)
    edges = [interval.a] + sorted(b for b in breaks if interval.a < b < interval.b) \
        + [interval.b]

    if kind == "mat":
        rhs = lambda t, Y: A(t) @ Y
    else:
        rhs = lambda t, x: A(t) @ x + f(t)

    buf = _GrowBuf(y0.shape)
    buf.append(interval.a, y0)
    y = y0
    for lo, hi in zip(edges[:-1], edges[1:]):
        y_end = _try_fastpath(kind, A, f, lo, hi, y, tol, max_step, span, buf)
        if y_end is None:
            y_end = _adaptive_segment(rhs, lo, hi, y, tol, max_step, span, buf)
        y = y_end
    ts, vals = buf.arrays()
    return ts, vals, max_step


@dataclass
class Matrizant:
    """Fundamental matrix Y of Y' = A(t) Y, Y(a) = I on integration nodes.

    Between nodes the value is recovered by a single fifth-order step from
    the nearest node; ``values_on`` vectorizes this over many query points.
    """

    interval: Interval
    dim: int
    nodes: np.ndarray
    values: np.ndarray
    coeff: CoeffFn
    achieved_tol: float
    _inv_cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, t: float) -> np.ndarray:
        return self.values_on(np.array([float(t)]))[0]

    def values_on(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        return _dense_eval(self.nodes, self.values, self.coeff, None, ts)

    def inverse_at(self, t: float) -> np.ndarray:
        return linalg.inverse(self(t))

    def inverses_on(self, ts) -> np.ndarray:
        vals = self.values_on(ts)
        return np.stack([linalg.inverse(v) for v in vals]) if len(vals) else vals

    @property
    def at_a(self) -> np.ndarray:
        return self.values[0]

    @property
    def at_b(self) -> np.ndarray:
        return self.values[-1]


def _dense_eval(nodes, values, A, f, ts):
    """Vectorized one-step dense output from the nearest stored node."""
    idx = np.searchsorted(nodes, ts)
    left = np.clip(idx - 1, 0, len(nodes) - 1)
    right = np.clip(idx, 0, len(nodes) - 1)
    pick_right = np.abs(nodes[right] - ts) < np.abs(ts - nodes[left])
    near = np.where(pick_right, right, left)
    h = ts - nodes[near]
    out = values[near].copy()
    live = h != 0
    if not live.any():
        return out
    t0 = nodes[near][live]
    hh = h[live]
    y = values[near][live]
    vector = y.ndim == 2
    k = []
    expand = (slice(None),) + (None,) * (y.ndim - 1)
    for j in range(7):
        yj = y
        for l in range(j):
            a = _DP_A[j, l]
            if a:
                yj = yj + (hh[expand] * a) * k[l]
        if j == 6:
            out[live] = yj
            break
        Aj = A.eval_many(t0 + _DP_C[j] * hh)
        if vector:
            kj = np.einsum("nij,nj->ni", Aj, yj)
            if f is not None:
                kj = kj + f.eval_many(t0 + _DP_C[j] * hh)
        else:
            kj = Aj @ yj
        k.append(kj)
    return out


def matrizant(A: CoeffFn, interval: Interval, tol: float = DEFAULT_TOL) -> Matrizant:
    """Fundamental matrix of Y' = A(t) Y with Y(a) = I.

    Local error control targets ``tol`` per unit step (scaled by the
    solution size); declared oscillation is resolved by at least
    ``STEPS_PER_WAVELENGTH`` node intervals per wavelength.

    Raises :class:`StepUnderflowError` when the required step falls below
    1e-14 of the interval length.
    """
    y0 = np.eye(A.dim, dtype=np.complex128)
    ts, vals, _ = _integrate("mat", A, None, interval, tol, y0)
    dets = np.linalg.det(vals)
    if not np.all(np.abs(dets) > 0.0):
        raise linalg.SingularMatrixError("matrizant lost invertibility at a node")
    return Matrizant(interval, A.dim, ts, vals, A, tol)


class InverseMatrizant:
    """Evaluable t -> Y(t)^-1 obtained by LU inversion of the dense values."""

    def __init__(self, Y: Matrizant):
        self.Y = Y

    def __call__(self, t: float) -> np.ndarray:
        return self.Y.inverse_at(t)

    def at_many(self, ts) -> np.ndarray:
        return self.Y.inverses_on(ts)


def inverse_matrizant(Y: Matrizant) -> InverseMatrizant:
    return InverseMatrizant(Y)


def cauchy_solution(A: CoeffFn, f: VecFn, interval: Interval,
                    tol: float = DEFAULT_TOL) -> VecFn:
    """Solution of x' = A(t) x + f(t) with x(a) = 0 (exactly).

    A zero load short-circuits to the zero function, which is the exact
    solution.
    """
    if A.dim != f.dim:
        raise ValueError("dimension mismatch between coefficient and load")
    if f.is_zero:
        return zero_vecfn(A.dim)
    y0 = np.zeros(A.dim, dtype=np.complex128)
    ts, vals, _ = _integrate("vec", A, f, interval, tol, y0)

    def fn(t):
        return _dense_eval(ts, vals, A, f, np.array([float(t)]))[0]

    def batch(qs):
        return _dense_eval(ts, vals, A, f, np.asarray(qs, dtype=float))

    return VecFn(A.dim, fn, batch=batch,
                 oscillation_scale=A.oscillation_scale)


class MatrixAntiderivative:
    """Evaluable t -> integral of R from a to t (matrix or vector valued)."""

    def __init__(self, cum: CumulativeIntegral, dim: int):
        self._cum = cum
        self.dim = dim
        self.interval = Interval(cum.lo, cum.hi)

    def __call__(self, t: float) -> np.ndarray:
        return self._cum(float(t))

    def at_many(self, ts) -> np.ndarray:
        return self._cum.at_many(ts)

    @property
    def total(self) -> np.ndarray:
        return self._cum.total


def _quad_width(F) -> float | None:
    return None if F.oscillation_scale is None else F.oscillation_scale / 4


def antiderivative(R, interval: Interval) -> MatrixAntiderivative:
    """Antiderivative of a coefficient, zero at the left endpoint.

    Works for matrix (:class:`CoeffFn`) and vector (:class:`VecFn`)
    integrands.  The quadrature budget is 1e-10 * (1 + an L1 estimate),
    uniformly over the interval.
    """
    f_batch = R.eval_many
    l1_est = R.l1_bound
    if l1_est is None:
        rough = adaptive_integral(
            lambda ts: np.abs(f_batch(ts)).reshape(len(ts), -1).sum(axis=1),
            interval.a, interval.b, breakpoints=R.breakpoints,
            max_width=_quad_width(R), rel_tol=1e-3, max_levels=8)
        l1_est = float(rough)
    cum = cumulative_integral(f_batch, interval.a, interval.b,
                              breakpoints=R.breakpoints,
                              max_width=_quad_width(R),
                              rel_tol=0.0, abs_tol=1e-10 * (1.0 + l1_est))
    return MatrixAntiderivative(cum, R.dim)


def l1_norm(R, interval: Interval) -> float:
    """Integral of the entrywise abs-sum over the interval, 1e-6 relative."""
    f_batch = R.eval_many

    def absnorm_batch(ts):
        v = f_batch(ts)
        return np.abs(v).reshape(len(ts), -1).sum(axis=1)

    val = adaptive_integral(absnorm_batch, interval.a, interval.b,
                            breakpoints=R.breakpoints,
                            max_width=_quad_width(R), rel_tol=1e-6)
    return float(val)


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def sup_norm(F, interval: Interval, grid_size: int = 2001) -> float:
    """Deterministic sup of the abs-sum norm over a uniform grid.

    The grid maximum is refined once around the argmax: the two golden
    interior points of the three-point bracket are also evaluated.  This is
    a grid proxy of the essential supremum; the grid size is the caller's
    resolution choice.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    ts = interval.grid(grid_size)
    vals = batch_values(F, ts)
    norms = np.abs(vals).reshape(len(ts), -1).sum(axis=1)
    i = int(np.argmax(norms))
    lo = ts[max(i - 1, 0)]
    hi = ts[min(i + 1, grid_size - 1)]
    best = float(norms[i])
    if hi > lo:
        g1 = hi - _GOLDEN * (hi - lo)
        g2 = lo + _GOLDEN * (hi - lo)
        extra = batch_values(F, np.array([g1, g2]))
        best = max(best, float(np.abs(extra).reshape(2, -1).sum(axis=1).max()))
    return best
