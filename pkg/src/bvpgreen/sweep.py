"""Parameter sweeps: every diagnostic the convergence theory asks about.

For a family of problems indexed by a small parameter eps the sweep
computes, per eps: the oscillation-averaging diagnostic sup|Z - I| for the
coefficient difference R = A(eps) - A(0) (Z' = R Z, Z(a) = I), the four
integral conditions on R and its antiderivative, the classical condition
battery (L1 bounds, operator norm, sup norms of antiderivative differences,
boundary data distances), and the solution / Green-matrix convergence
against the baseline problem.

Limits are judged by finite-sample trend rules, reported as booleans next
to the raw columns: "to zero" means monotone decrease after the first point
with a last/first ratio of at most 1/4; "bounded" means max/min at most 10.
Both proxies are explicit and configurable.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .boundary import (BoundaryMeasure, operator_norm,
                       strong_convergence_probe, variation_distance)
from .bvp import (BVProblem, NonUniqueError, SingularBoundaryError, solve_bvp,
                  _characteristic, _det_threshold, _green_given, _solve_given,
                  tabulation_grid)
from .ode import (CoeffFn, Interval, VecFn, StepUnderflowError, antiderivative,
                  coeff_sub, l1_norm, matrizant, sup_norm, DEFAULT_TOL)

__all__ = [
    "FamilyScenario", "SweepRow", "ConvergenceReport", "BatteryRow",
    "class_M_diagnostic", "levin_conditions", "kiguradze_battery",
    "solution_convergence", "green_convergence", "multipoint_equivalence",
    "run_sweep", "probe_basis", "trend_to_zero", "trend_bounded",
    "DEFAULT_EPSILONS",
]

#: half-decade sweep spanning three decades
DEFAULT_EPSILONS = (1e-1, 3.16e-2, 1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4)

TO_ZERO_RATIO = 0.25
BOUNDED_FACTOR = 10.0
_TINY = 1e-13


@dataclass
class FamilyScenario:
    """A parameterized problem family with its well-posed baseline.

    ``family`` maps eps > 0 to the member problem; ``baseline`` is the
    eps = 0 problem, whose non-degeneracy is verified at construction.
    """

    name: str
    interval: Interval
    dim: int
    epsilons: tuple[float, ...]
    baseline: BVProblem
    family: Callable[[float], BVProblem]
    tol: float = DEFAULT_TOL
    sup_grid: int = 2001
    green_grid: int = 201
    baseline_det: complex = field(init=False, default=0j)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("epsilons must be positive")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        self.epsilons = eps
        for p in [self.baseline] + [self.family(e) for e in eps]:
            if p.dim != self.dim or p.interval != self.interval:
                raise ValueError("family members must share interval and dimension")
        _, _, UY, d = _characteristic(self.baseline.A, self.baseline.U,
                                      self.interval, self.tol)
        if abs(d) <= _det_threshold(UY):
            raise NonUniqueError(
                f"baseline problem is degenerate (det = {d:.3e}); "
                "the limit homogeneous problem must have only the trivial solution")
        self.baseline_det = d


@dataclass
class BatteryRow:
    """Raw values of the classical conditions at one eps."""

    a_l1: float
    f_l1: float
    u_norm: float
    cond4_prime: float
    cond5_prime: float
    c_diff: float
    u_variation: float
    strong_probe: float


@dataclass
class SweepRow:
    epsilon: float
    sup_z_minus_i: float = np.nan
    levin_alpha: float = np.nan
    levin_beta: float = np.nan
    levin_gamma: float = np.nan
    levin_delta: float = np.nan
    a_l1: float = np.nan
    f_l1: float = np.nan
    u_norm: float = np.nan
    cond4_prime: float = np.nan
    cond5_prime: float = np.nan
    c_diff: float = np.nan
    u_variation: float = np.nan
    strong_probe: float = np.nan
    sol_diff: float = np.nan
    green_diff: float = np.nan
    wellposed_det: complex = np.nan + 0j
    status: str = "ok"


CSV_COLUMNS = (
    "epsilon", "sup_z_minus_i", "levin_alpha", "levin_beta", "levin_gamma",
    "levin_delta", "a_l1", "f_l1", "u_norm", "cond4_prime", "cond5_prime",
    "c_diff", "u_variation", "strong_probe", "sol_diff", "green_diff",
    "det_re", "det_im", "status",
)

_TO_ZERO_COLUMNS = ("sup_z_minus_i", "cond4_prime", "cond5_prime", "c_diff",
                    "u_variation", "strong_probe", "sol_diff", "green_diff",
                    "levin_beta", "levin_gamma", "levin_delta")
_BOUNDED_COLUMNS = ("levin_alpha", "a_l1", "f_l1", "u_norm")


def trend_to_zero(values, ratio: float = TO_ZERO_RATIO) -> bool:
    """Finite-sample proxy of convergence to zero along the sweep."""
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size < 2:
        return False
    if v[0] <= _TINY:
        return bool(np.all(v <= _TINY))
    monotone = np.all(np.diff(v[1:]) <= _TINY) if v.size > 2 else True
    return bool(monotone and v[-1] <= ratio * v[0])


def trend_bounded(values, factor: float = BOUNDED_FACTOR) -> bool:
    """Finite-sample proxy of O(1) boundedness along the sweep."""
    v = np.asarray([x for x in values if np.isfinite(x)], dtype=float)
    if v.size == 0:
        return False
    if v.max() <= _TINY:
        return True
    if v.min() <= _TINY:
        return False
    return bool(v.max() / v.min() <= factor)


class _BatchEval:
    """Minimal evaluable wrapper over a batched callable."""

    def __init__(self, fb):
        self._fb = fb

    def __call__(self, t):
        return self._fb(np.array([float(t)]))[0]

    def at_many(self, ts):
        return self._fb(np.asarray(ts, dtype=float))


def probe_basis(dim: int, interval: Interval) -> list[VecFn]:
    """Fixed probe family for the strong-convergence surrogate.

    Shapes 1, t, t^2, sin(3t) placed in each coordinate; enough to separate
    point evaluations at nearby locations.
    """
    shapes = [lambda t: np.ones_like(t), lambda t: t, lambda t: t * t,
              lambda t: np.sin(3 * t)]
    probes = []
    for i in range(dim):
        for shape in shapes:
            def batch(ts, i=i, shape=shape):
                out = np.zeros((len(ts), dim), dtype=np.complex128)
                out[:, i] = shape(np.asarray(ts, dtype=float))
                return out

            probes.append(VecFn(dim, lambda t, b=batch: b(np.array([t]))[0], batch=batch))
    return probes


def _residual_coeff(scenario: FamilyScenario, eps: float) -> CoeffFn:
    return coeff_sub(scenario.family(eps).A, scenario.baseline.A)


def _sup_z_minus_i(R: CoeffFn, interval: Interval, tol: float,
                   grid_size: int) -> float:
    Z = matrizant(R, interval, tol)
    ts = interval.grid(grid_size)
    eye = np.eye(R.dim)
    return float(np.abs(Z.values_on(ts) - eye).sum(axis=(1, 2)).max())


def class_M_diagnostic(scenario: FamilyScenario, tol: float | None = None) -> list[float]:
    """Per-eps sup over the evaluation grid of |Z(t) - I|.

    Z solves Z' = R Z, Z(a) = I for R = A(eps) - A(0).  The sup uses the
    scenario's fixed grid (not the integration nodes), so runs at different
    tolerances are compared at identical abscissae and their difference
    reflects integration accuracy alone.
    """
    tol = scenario.tol if tol is None else tol
    return [_sup_z_minus_i(_residual_coeff(scenario, e), scenario.interval,
                           tol, scenario.sup_grid)
            for e in scenario.epsilons]


def _coeff_product(left_batch, right_batch, template: CoeffFn) -> CoeffFn:
    return CoeffFn(template.dim,
                   lambda t: left_batch(np.array([t]))[0] @ right_batch(np.array([t]))[0],
                   batch=lambda ts: left_batch(ts) @ right_batch(ts),
                   oscillation_scale=template.oscillation_scale,
                   breakpoints=template.breakpoints)


def levin_conditions(scenario: FamilyScenario, eps: float) -> tuple[float, float, float, float]:
    """The four integral quantities (alpha, beta, gamma, delta) at one eps.

    alpha = |R|_1,  beta = |V R|_1,  gamma = |R V|_1,
    delta = |V R - R V|_1  with V the antiderivative of R.
    """
    R = _residual_coeff(scenario, eps)
    return _levin_given(R, scenario.interval)


def _levin_given(R: CoeffFn, interval: Interval,
                 Rv=None) -> tuple[float, float, float, float]:
    if Rv is None:
        Rv = antiderivative(R, interval)
    alpha = l1_norm(R, interval)
    vr = _coeff_product(Rv.at_many, R.eval_many, R)
    rv = _coeff_product(R.eval_many, Rv.at_many, R)
    comm = CoeffFn(R.dim, lambda t: vr(t) - rv(t),
                   batch=lambda ts: vr.eval_many(ts) - rv.eval_many(ts),
                   oscillation_scale=R.oscillation_scale,
                   breakpoints=R.breakpoints)
    return (alpha, l1_norm(vr, interval), l1_norm(rv, interval),
            l1_norm(comm, interval))


def kiguradze_battery(scenario: FamilyScenario, eps: float) -> BatteryRow:
    """Raw values of the classical condition battery at one eps."""
    p = scenario.family(eps)
    R = coeff_sub(p.A, scenario.baseline.A)
    Rv = antiderivative(R, scenario.interval)
    return _battery_given(scenario, p, R, Rv)


def _f_antiderivative(f: VecFn, interval: Interval):
    if f.is_zero:
        dim = f.dim
        return _BatchEval(lambda ts: np.zeros((len(ts), dim), dtype=np.complex128))
    return antiderivative(f, interval)


def _battery_given(scenario: FamilyScenario, p: BVProblem, R: CoeffFn, Rv) -> BatteryRow:
    iv = scenario.interval
    base = scenario.baseline
    fv_eps = _f_antiderivative(p.f, iv)
    fv_0 = _f_antiderivative(base.f, iv)
    cond5 = sup_norm(_BatchEval(lambda ts: fv_eps.at_many(ts) - fv_0.at_many(ts)),
                     iv, scenario.sup_grid)
    return BatteryRow(
        a_l1=l1_norm(p.A, iv),
        f_l1=0.0 if p.f.is_zero else l1_norm(p.f, iv),
        u_norm=operator_norm(p.U),
        cond4_prime=sup_norm(Rv, iv, scenario.sup_grid),
        cond5_prime=cond5,
        c_diff=linalg.abs_norm(p.c - base.c),
        u_variation=variation_distance(p.U, base.U),
        strong_probe=strong_convergence_probe(p.U, base.U,
                                              probe_basis(scenario.dim, iv)),
    )


def _family_atom_locations(scenario: FamilyScenario) -> set[float]:
    locs = set(scenario.baseline.U.atom_locations.tolist())
    for e in scenario.epsilons:
        locs |= set(scenario.family(e).U.atom_locations.tolist())
    return locs


def solution_convergence(scenario: FamilyScenario,
                         tol: float | None = None) -> list[tuple[float, str]]:
    """Per-eps sup-norm distance of the member solution to the baseline.

    Degenerate members are recorded as (nan, error tag) instead of aborting
    the sweep.
    """
    tol = scenario.tol if tol is None else tol
    grid = scenario.interval.grid(scenario.sup_grid)
    y0 = solve_bvp(scenario.baseline, tol)
    y0v = y0.eval_many(grid)
    out = []
    for e in scenario.epsilons:
        try:
            y = solve_bvp(scenario.family(e), tol)
            d = float(np.abs(y.eval_many(grid) - y0v).sum(axis=1).max())
            out.append((d, "ok"))
        except (NonUniqueError, StepUnderflowError) as exc:
            out.append((float("nan"), type(exc).__name__.replace("Error", "")))
    return out


def green_convergence(scenario: FamilyScenario, grid: int | None = None,
                      tol: float | None = None) -> list[tuple[float, str]]:
    """Per-eps sup over a shared (t, s) grid of |G(eps) - G(0)|.

    The grid avoids exact atom coordinates of every family member, where the
    kernel's s-direction jumps make pointwise values convention-bound.
    """
    tol = scenario.tol if tol is None else tol
    n = scenario.green_grid if grid is None else grid
    pts = tabulation_grid(scenario.interval, n, avoid=_family_atom_locations(scenario))
    base = scenario.baseline
    Y0, HY0, UY0, d0 = _characteristic(base.A, base.U, scenario.interval, tol)
    G0 = _green_given(Y0, HY0, UY0, d0).tabulate(pts, pts)
    out = []
    for e in scenario.epsilons:
        p = scenario.family(e)
        try:
            Y, HY, UY, d = _characteristic(p.A, p.U, p.interval, tol)
            G = _green_given(Y, HY, UY, d).tabulate(pts, pts)
            out.append((float(np.abs(G - G0).sum(axis=(2, 3)).max()), "ok"))
        except (SingularBoundaryError, StepUnderflowError) as exc:
            out.append((float("nan"), type(exc).__name__.replace("Error", "")))
    return out


def multipoint_equivalence(interval: Interval, locations: Sequence[float],
                           weights: Callable[[float], Sequence],
                           epsilons: Sequence[float]) -> list[tuple[float, float]]:
    """Variation distance vs. the largest per-atom weight drift.

    For multipoint operators with eps-independent distinct locations the two
    quantities vanish together; the first is the exact sum of the induced
    norms of the weight differences.
    """
    locs = [float(t) for t in locations]
    if len(set(locs)) != len(locs):
        raise ValueError("atom locations must be distinct")
    B0 = [linalg.as_cmat(B) for B in weights(0.0)]
    dim = B0[0].shape[0]
    U0 = BoundaryMeasure(dim, interval, atoms=tuple(zip(locs, B0)))
    out = []
    for e in epsilons:
        Bk = [linalg.as_cmat(B) for B in weights(float(e))]
        Ue = BoundaryMeasure(dim, interval, atoms=tuple(zip(locs, Bk)))
        drift = max(linalg.colsum_norm(Be - B) for Be, B in zip(Bk, B0))
        out.append((variation_distance(Ue, U0), drift))
    return out


@dataclass
class ConvergenceReport:
    """Per-eps diagnostic table plus finite-sample trend booleans."""

    scenario: FamilyScenario
    rows: list[SweepRow]
    trends: dict[str, bool]

    def csv_text(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            vals = [r.epsilon, r.sup_z_minus_i, r.levin_alpha, r.levin_beta,
                    r.levin_gamma, r.levin_delta, r.a_l1, r.f_l1, r.u_norm,
                    r.cond4_prime, r.cond5_prime, r.c_diff, r.u_variation,
                    r.strong_probe, r.sol_diff, r.green_diff,
                    r.wellposed_det.real, r.wellposed_det.imag]
            lines.append(",".join(f"{v:.17g}" for v in vals) + f",{r.status}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.csv_text())

    def json_dict(self) -> dict:
        sc = self.scenario
        rows = []
        for r in self.rows:
            d = {k: getattr(r, k) for k in
                 ("epsilon", "sup_z_minus_i", "levin_alpha", "levin_beta",
                  "levin_gamma", "levin_delta", "a_l1", "f_l1", "u_norm",
                  "cond4_prime", "cond5_prime", "c_diff", "u_variation",
                  "strong_probe", "sol_diff", "green_diff", "status")}
            d["det_re"] = r.wellposed_det.real
            d["det_im"] = r.wellposed_det.imag
            rows.append(d)
        return {
            "scenario": {
                "name": sc.name, "interval": [sc.interval.a, sc.interval.b],
                "dim": sc.dim, "epsilons": list(sc.epsilons), "tol": sc.tol,
                "sup_grid": sc.sup_grid, "green_grid": sc.green_grid,
                "baseline_det": [sc.baseline_det.real, sc.baseline_det.imag],
            },
            "rows": rows,
            "trends": self.trends,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.json_dict(), fh, indent=2, allow_nan=True)
            fh.write("\n")

    def column(self, name: str) -> list[float]:
        return [getattr(r, name) for r in self.rows]


def _build_row(scenario: FamilyScenario, eps: float, baseline_ctx) -> SweepRow:
    y0v, G0, pts, grid = baseline_ctx
    row = SweepRow(epsilon=eps)
    tags = []
    p = scenario.family(eps)
    R = coeff_sub(p.A, scenario.baseline.A)

    try:
        row.sup_z_minus_i = _sup_z_minus_i(R, scenario.interval, scenario.tol,
                                           scenario.sup_grid)
    except StepUnderflowError:
        tags.append("StepUnderflow:classM")

    Rv = antiderivative(R, scenario.interval)
    row.levin_alpha, row.levin_beta, row.levin_gamma, row.levin_delta = \
        _levin_given(R, scenario.interval, Rv)
    batt = _battery_given(scenario, p, R, Rv)
    row.a_l1, row.f_l1, row.u_norm = batt.a_l1, batt.f_l1, batt.u_norm
    row.cond4_prime, row.cond5_prime = batt.cond4_prime, batt.cond5_prime
    row.c_diff, row.u_variation = batt.c_diff, batt.u_variation
    row.strong_probe = batt.strong_probe

    try:
        Y, HY, UY, d = _characteristic(p.A, p.U, p.interval, scenario.tol)
        row.wellposed_det = complex(d)
        try:
            y = _solve_given(Y, HY, UY, d, p, scenario.tol)
            row.sol_diff = float(np.abs(y.eval_many(grid) - y0v).sum(axis=1).max())
        except NonUniqueError:
            tags.append("NonUnique")
        try:
            G = _green_given(Y, HY, UY, d).tabulate(pts, pts)
            row.green_diff = float(np.abs(G - G0).sum(axis=(2, 3)).max())
        except SingularBoundaryError:
            if "NonUnique" not in tags:
                tags.append("SingularBoundary")
    except StepUnderflowError:
        tags.append("StepUnderflow")

    row.status = "ok" if not tags else ";".join(tags)
    return row


def run_sweep(scenario: FamilyScenario, jobs: int = 1) -> ConvergenceReport:
    """Full diagnostic sweep; deterministic for a fixed scenario.

    Rows are independent and may be computed in parallel (``jobs``); the
    report is assembled in sweep order regardless.  Degenerate members are
    tagged in their row status rather than aborting.
    """
    base = scenario.baseline
    grid = scenario.interval.grid(scenario.sup_grid)
    y0 = solve_bvp(base, scenario.tol)
    y0v = y0.eval_many(grid)
    pts = tabulation_grid(scenario.interval, scenario.green_grid,
                          avoid=_family_atom_locations(scenario))
    Y0, HY0, UY0, d0 = _characteristic(base.A, base.U, scenario.interval, scenario.tol)
    G0 = _green_given(Y0, HY0, UY0, d0).tabulate(pts, pts)
    ctx = (y0v, G0, pts, grid)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(lambda e: _build_row(scenario, e, ctx),
                               scenario.epsilons))
    else:
        rows = [_build_row(scenario, e, ctx) for e in scenario.epsilons]

    trends: dict[str, bool] = {}
    for col in _TO_ZERO_COLUMNS:
        trends[f"{col}_to_zero"] = trend_to_zero([getattr(r, col) for r in rows])
    for col in _BOUNDED_COLUMNS:
        trends[f"{col}_bounded"] = trend_bounded([getattr(r, col) for r in rows])
    return ConvergenceReport(scenario, rows, trends)
