"""Built-in problem families for sweeps, and their parameter parsing.

Families are registered by name with numeric parameters (matrices, vectors,
atom lists) rather than a runtime expression parser; new families are added
in code by registering another builder.  Matrices in parameter dictionaries
are nested lists of reals, or ``{"re": M, "im": M}`` for complex values;
boundary atoms are ``[t, real_matrix, imag_matrix]`` triples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .boundary import BoundaryMeasure
from .ode import (CoeffFn, Interval, VecFn, constant_coeff, constant_vecfn,
                  zero_vecfn, DEFAULT_TOL)
from .bvp import BVProblem
from .sweep import FamilyScenario, DEFAULT_EPSILONS

__all__ = ["FamilySpec", "REGISTRY", "registry_list", "build_scenario",
           "oscillating_offdiagonal"]


# ---------------------------------------------------------------------------
# parameter parsing helpers

def parse_matrix(obj, dim: int | None = None, path: str = "matrix") -> np.ndarray:
    try:
        if isinstance(obj, dict):
            re = np.asarray(obj["re"], dtype=float)
            im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
            M = re + 1j * im
        else:
            M = np.asarray(obj, dtype=float).astype(np.complex128)
        return linalg.as_cmat(M, dim)
    except (ValueError, TypeError, KeyError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


def parse_vector(obj, dim: int | None = None, path: str = "vector") -> np.ndarray:
    try:
        if isinstance(obj, dict):
            re = np.asarray(obj["re"], dtype=float)
            im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
            v = re + 1j * im
        else:
            v = np.asarray(obj, dtype=float).astype(np.complex128)
        return linalg.as_cvec(v, dim)
    except (ValueError, TypeError, KeyError) as exc:
        raise ValueError(f"{path}: {exc}") from exc


_DENSITY_NAMES = ("constant", "zero")


def parse_density(obj, dim: int, path: str) -> CoeffFn | None:
    if obj is None:
        return None
    name = obj.get("name") if isinstance(obj, dict) else None
    if name == "zero":
        return None
    if name == "constant":
        return constant_coeff(parse_matrix(obj.get("value"), dim, f"{path}.value"))
    raise ValueError(f"{path}.name: unknown density '{name}' (known: {_DENSITY_NAMES})")


def parse_boundary(obj, dim: int, interval: Interval, path: str = "boundary") -> BoundaryMeasure:
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: expected an object with 'atoms'/'density'")
    atoms = []
    for i, triple in enumerate(obj.get("atoms", [])):
        if not isinstance(triple, (list, tuple)) or len(triple) != 3:
            raise ValueError(f"{path}.atoms[{i}]: expected [t, real_matrix, imag_matrix]")
        t, re, im = triple
        W = parse_matrix(re, dim, f"{path}.atoms[{i}][1]") \
            + 1j * parse_matrix(im, dim, f"{path}.atoms[{i}][2]")
        atoms.append((float(t), W))
    density = parse_density(obj.get("density"), dim, f"{path}.density")
    try:
        return BoundaryMeasure(dim, interval, atoms=tuple(atoms), density=density)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


_VEC_NAMES = ("zero", "constant")


def parse_vecfn(obj, dim: int, path: str = "f") -> VecFn:
    if obj is None:
        return zero_vecfn(dim)
    name = obj.get("name") if isinstance(obj, dict) else None
    if name == "zero":
        return zero_vecfn(dim)
    if name == "constant":
        return constant_vecfn(parse_vector(obj.get("value"), dim, f"{path}.value"))
    raise ValueError(f"{path}.name: unknown function '{name}' (known: {_VEC_NAMES})")


def _identity_atom(interval: Interval, dim: int) -> BoundaryMeasure:
    return BoundaryMeasure(dim, interval,
                           atoms=((interval.a, np.eye(dim, dtype=np.complex128)),))


# ---------------------------------------------------------------------------
# coefficient constructors

def oscillating_offdiagonal(eps: float, base: np.ndarray | None = None) -> CoeffFn:
    """2x2 coefficient with fast off-diagonal oscillation at wavelength eps.

    Entries (1,2) and (2,1) are cos(t/eps)/sqrt(eps) and sin(2t/eps)/sqrt(eps);
    the L1 norm grows like 1/sqrt(eps) while the antiderivative shrinks like
    sqrt(eps), which is exactly the regime separating the averaging-based
    convergence condition from naive L1 boundedness.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    amp = 1.0 / np.sqrt(eps)
    B = None if base is None else linalg.as_cmat(base, 2)

    def batch(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.zeros((len(ts), 2, 2), dtype=np.complex128)
        out[:, 0, 1] = amp * np.cos(ts / eps)
        out[:, 1, 0] = amp * np.sin(2 * ts / eps)
        if B is not None:
            out += B
        return out

    return CoeffFn(2, lambda t: batch(np.array([float(t)]))[0], batch=batch,
                   oscillation_scale=eps)


def _linear_coeff(A0: np.ndarray, B: np.ndarray, s: float) -> CoeffFn:
    M = A0 + s * B
    return constant_coeff(M)


# ---------------------------------------------------------------------------
# family builders

@dataclass(frozen=True)
class FamilySpec:
    name: str
    summary: str
    params_doc: dict
    builder: Callable


def _build_example1(interval, epsilons, params, tol, sup_grid, green_grid):
    iv = interval or Interval(0.0, 1.0)
    base = parse_matrix(params["a0"], 2, "params.a0") if "a0" in params \
        else np.zeros((2, 2), dtype=np.complex128)
    A0 = constant_coeff(base)
    f = parse_vecfn(params.get("f"), 2, "params.f")
    c = parse_vector(params.get("c", [1.0, 1.0]), 2, "params.c")
    U = parse_boundary(params["boundary"], 2, iv, "params.boundary") \
        if "boundary" in params else _identity_atom(iv, 2)
    baseline = BVProblem(iv, A0, f, U, c)

    def member(eps):
        return BVProblem(iv, oscillating_offdiagonal(eps, base), f, U, c)

    return FamilyScenario("example1", iv, 2, epsilons, baseline, member,
                          tol=tol, sup_grid=sup_grid, green_grid=green_grid)


def _build_example2(interval, epsilons, params, tol, sup_grid, green_grid):
    iv = interval or Interval(0.0, 1.0)
    A = constant_coeff(np.zeros((1, 1)))
    f = parse_vecfn(params.get("f", {"name": "constant", "value": [1.0]}), 1, "params.f")
    c = parse_vector(params.get("c", [0.0]), 1, "params.c")
    if "boundary" in params:
        raise ValueError("params.boundary: example2 defines its own boundary family")
    one = np.eye(1, dtype=np.complex128)

    def measure(loc):
        return BoundaryMeasure(1, iv, atoms=((loc, one),))

    baseline = BVProblem(iv, A, f, measure(iv.a), c)

    def member(eps):
        if not iv.a + eps <= iv.b:
            raise ValueError(f"evaluation point a+{eps} outside the interval")
        return BVProblem(iv, A, f, measure(iv.a + eps), c)

    return FamilyScenario("example2", iv, 1, epsilons, baseline, member,
                          tol=tol, sup_grid=sup_grid, green_grid=green_grid)


def _build_linear_perturbation(interval, epsilons, params, tol, sup_grid, green_grid):
    iv = interval or Interval(0.0, 1.0)
    A0 = parse_matrix(params["a0"], None, "params.a0")
    m = A0.shape[0]
    B = parse_matrix(params["b"], m, "params.b")
    f = parse_vecfn(params.get("f"), m, "params.f")
    c = parse_vector(params.get("c", np.zeros(m)), m, "params.c")
    U0 = parse_boundary(params["boundary"], m, iv, "params.boundary") \
        if "boundary" in params else _identity_atom(iv, m)
    perturb = None
    if "u_perturbation" in params:
        triple = params["u_perturbation"]
        if not isinstance(triple, (list, tuple)) or len(triple) != 3:
            raise ValueError("params.u_perturbation: expected [t, real_matrix, imag_matrix]")
        loc = float(triple[0])
        C = parse_matrix(triple[1], m, "params.u_perturbation[1]") \
            + 1j * parse_matrix(triple[2], m, "params.u_perturbation[2]")
        perturb = (loc, C)
    baseline = BVProblem(iv, constant_coeff(A0), f, U0, c)

    def member(eps):
        U = U0
        if perturb is not None:
            loc, C = perturb
            U = BoundaryMeasure(m, iv, atoms=U0.atoms + ((loc, eps * C),),
                                density=U0.density)
        return BVProblem(iv, _linear_coeff(A0, B, eps), f, U, c)

    return FamilyScenario("linear_perturbation", iv, m, epsilons, baseline,
                          member, tol=tol, sup_grid=sup_grid, green_grid=green_grid)


def _build_multipoint(interval, epsilons, params, tol, sup_grid, green_grid):
    iv = interval or Interval(0.0, 1.0)
    locations = [float(t) for t in params["locations"]]
    if len(set(locations)) != len(locations):
        raise ValueError("params.locations: atom locations must be distinct")
    weights = [parse_matrix(W, None, f"params.weights[{i}]")
               for i, W in enumerate(params["weights"])]
    m = weights[0].shape[0]
    if len(weights) != len(locations):
        raise ValueError("params.weights: need one weight per location")
    perturbs = [parse_matrix(C, m, f"params.perturbations[{i}]")
                for i, C in enumerate(params.get("perturbations", []))]
    if perturbs and len(perturbs) != len(locations):
        raise ValueError("params.perturbations: need one matrix per location")
    A0 = parse_matrix(params.get("a0", np.zeros((m, m))), m, "params.a0")
    f = parse_vecfn(params.get("f"), m, "params.f")
    c = parse_vector(params.get("c", np.zeros(m)), m, "params.c")

    def measure(eps):
        atoms = []
        for k, (loc, W) in enumerate(zip(locations, weights)):
            Wk = W if not perturbs else W + eps * perturbs[k]
            atoms.append((loc, Wk))
        return BoundaryMeasure(m, iv, atoms=tuple(atoms))

    baseline = BVProblem(iv, constant_coeff(A0), f, measure(0.0), c)

    def member(eps):
        return BVProblem(iv, constant_coeff(A0), f, measure(eps), c)

    return FamilyScenario("multipoint", iv, m, epsilons, baseline, member,
                          tol=tol, sup_grid=sup_grid, green_grid=green_grid)


def _build_constant(interval, epsilons, params, tol, sup_grid, green_grid):
    iv = interval or Interval(0.0, 1.0)
    A0 = parse_matrix(params.get("a0", [[0.0]]), None, "params.a0")
    m = A0.shape[0]
    f = parse_vecfn(params.get("f", {"name": "constant", "value": [1.0] * m}),
                    m, "params.f")
    c = parse_vector(params.get("c", np.zeros(m)), m, "params.c")
    U = parse_boundary(params["boundary"], m, iv, "params.boundary") \
        if "boundary" in params else _identity_atom(iv, m)
    problem = BVProblem(iv, constant_coeff(A0), f, U, c)
    return FamilyScenario("constant", iv, m, epsilons, problem,
                          lambda eps: problem, tol=tol, sup_grid=sup_grid,
                          green_grid=green_grid)


REGISTRY: dict[str, FamilySpec] = {
    "example1": FamilySpec(
        "example1",
        "2x2 system with 1/sqrt(eps)-amplitude oscillation at wavelength eps "
        "off the diagonal; L1-unbounded but averaging to zero",
        {"a0": "optional 2x2 base coefficient (default zero)",
         "f": "optional load spec (default zero)",
         "c": "optional boundary data (default [1, 1])",
         "boundary": "optional measure spec (default y(a) = c)"},
        _build_example1),
    "example2": FamilySpec(
        "example2",
        "scalar y' = f with the evaluation point y(a + eps) = c drifting to "
        "the endpoint; strong but not norm convergence of the operators",
        {"f": "optional load spec (default constant 1)",
         "c": "optional boundary data (default [0])"},
        _build_example2),
    "linear_perturbation": FamilySpec(
        "linear_perturbation",
        "A(eps) = a0 + eps*b with optional eps-scaled extra boundary atom",
        {"a0": "m x m base coefficient (required)",
         "b": "m x m perturbation direction (required)",
         "boundary": "optional measure spec (default y(a) = c)",
         "u_perturbation": "optional [t, re, im] atom added with weight eps*C",
         "f": "optional load spec (default zero)",
         "c": "optional boundary data (default zero)"},
        _build_linear_perturbation),
    "multipoint": FamilySpec(
        "multipoint",
        "sum_k B_k(eps) y(t_k) with fixed distinct locations and "
        "B_k(eps) = weights[k] + eps*perturbations[k]",
        {"locations": "list of distinct points in [a, b] (required)",
         "weights": "list of m x m matrices, one per location (required)",
         "perturbations": "optional list of m x m drift directions",
         "a0": "optional constant coefficient (default zero)",
         "f": "optional load spec (default zero)",
         "c": "optional boundary data (default zero)"},
        _build_multipoint),
    "constant": FamilySpec(
        "constant",
        "eps-independent problem; every convergence column must vanish",
        {"a0": "optional constant coefficient (default [[0]])",
         "f": "optional load spec (default constant 1)",
         "boundary": "optional measure spec (default y(a) = c)",
         "c": "optional boundary data (default zero)"},
        _build_constant),
}


def registry_list() -> list[FamilySpec]:
    return [REGISTRY[k] for k in sorted(REGISTRY)]


def build_scenario(name: str, params: dict | None = None, *,
                   interval: Interval | None = None,
                   epsilons=None, tol: float = DEFAULT_TOL,
                   sup_grid: int = 2001, green_grid: int = 201) -> FamilyScenario:
    """Instantiate a registered family as a sweep-ready scenario."""
    if name not in REGISTRY:
        raise ValueError(f"unknown family '{name}' (known: {', '.join(sorted(REGISTRY))})")
    eps = tuple(epsilons) if epsilons is not None else DEFAULT_EPSILONS
    return REGISTRY[name].builder(interval, eps, dict(params or {}),
                                  tol, sup_grid, green_grid)
