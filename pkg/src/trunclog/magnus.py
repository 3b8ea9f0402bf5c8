"""Development of a control path into the truncated group and its logarithm.

Three independent routes to C(t) = log g(t), where g solves dg/dt = g * xi'
with g(0) = 1:

* chen_product -- for piecewise-constant controls the development is the
  ordered product of increment exponentials, exact in the truncated algebra;
* group_ode_solve -- fixed-step RK4 on the group equation, degree-0 block
  re-pinned to exactly 1 each step (drift there is pure rounding);
* c_ode_solve -- fixed-step RK4 on the logarithm's own equation
  dC/dt = psi_minus(ad_C) xi', integrated in Hall coordinates.

Step grids are always aligned to control breakpoints so RK4 stages never
straddle a discontinuity of a piecewise-constant control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import tensor_algebra as ta
from .free_lie import HallBasis, LieCoordinates, require_lie

__all__ = [
    "ControlPath",
    "PiecewiseConstantPath",
    "PolynomialPath",
    "PathNorms",
    "chen_product",
    "group_ode_solve",
    "magnus_log",
    "c_ode_solve",
    "path_norms",
    "ad_flow_operator",
    "dilate_path",
    "restrict_path",
    "bump_poly",
    "aligned_grid",
    "path_to_json_dict",
    "path_from_json_dict",
]

MAGNUS_LIE_TOL = 1e-9  # residual contract for every solved logarithm


class ControlPath:
    """Interface: a time-dependent Lie-algebra value xi'(t) on [0, T]."""

    basis: HallBasis
    T: float

    def derivative(self, t: float) -> LieCoordinates:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        raise NotImplementedError

    def stage_value(self, t: float, segment: tuple[float, float]) -> LieCoordinates:
        """Value used for an RK4 stage at time t inside the given segment.

        Piecewise-constant paths return the segment's piece value (sampled at
        the segment midpoint) so stages at segment endpoints never pick up
        the neighbouring piece.
        """
        raise NotImplementedError


class PiecewiseConstantPath(ControlPath):
    kind = "pwc"

    def __init__(self, pieces: Sequence[tuple[float, float, LieCoordinates]]):
        if not pieces:
            raise ValueError("need at least one piece")
        t_prev = None
        basis = pieces[0][2].basis
        for t0, t1, value in pieces:
            if not t1 > t0:
                raise ValueError(f"degenerate piece [{t0}, {t1}]")
            if t_prev is not None and not math.isclose(t0, t_prev, abs_tol=1e-12):
                raise ValueError("pieces must tile the horizon without gaps")
            if value.basis.params != basis.params:
                raise ValueError("all pieces must share one Hall basis")
            t_prev = t1
        if not math.isclose(pieces[0][0], 0.0, abs_tol=1e-12):
            raise ValueError("path must start at t = 0")
        self.pieces = [(float(t0), float(t1), v) for t0, t1, v in pieces]
        self.basis = basis
        self.T = self.pieces[-1][1]

    def breakpoints(self) -> np.ndarray:
        return np.array([self.pieces[0][0]] + [t1 for _, t1, _ in self.pieces])

    def piece_index(self, t: float) -> int:
        for i, (t0, t1, _) in enumerate(self.pieces):
            if t < t1 or i == len(self.pieces) - 1:
                return i
        return len(self.pieces) - 1

    def derivative(self, t: float) -> LieCoordinates:
        return self.pieces[self.piece_index(t)][2]

    def stage_value(self, t: float, segment: tuple[float, float]) -> LieCoordinates:
        return self.derivative(0.5 * (segment[0] + segment[1]))


class PolynomialPath(ControlPath):
    """Smooth control: each Hall coordinate is a polynomial in t.

    coeff_matrix has shape (n_words, deg+1); coordinate i at time t is
    sum_j coeff_matrix[i, j] * t**j.
    """

    kind = "smooth"

    def __init__(self, basis: HallBasis, coeff_matrix: np.ndarray, T: float):
        coeff_matrix = np.atleast_2d(np.asarray(coeff_matrix, dtype=float))
        if coeff_matrix.shape[0] != len(basis.words):
            raise ValueError(
                f"coefficient matrix needs {len(basis.words)} rows, got {coeff_matrix.shape[0]}"
            )
        if not T > 0:
            raise ValueError("horizon must be positive")
        self.basis = basis
        self.coeff_matrix = coeff_matrix
        self.T = float(T)

    def breakpoints(self) -> np.ndarray:
        return np.array([0.0, self.T])

    def derivative(self, t: float) -> LieCoordinates:
        powers = float(t) ** np.arange(self.coeff_matrix.shape[1])
        return LieCoordinates(self.basis, self.coeff_matrix @ powers)

    def stage_value(self, t: float, segment: tuple[float, float]) -> LieCoordinates:
        return self.derivative(t)


def bump_poly() -> np.ndarray:
    """Coefficients of 30 t^2 (1-t)^2: unit integral on [0,1], C^1 with flat
    endpoints.  Useful for smooth replacements of a constant unit piece."""
    return np.array([0.0, 0.0, 30.0, -60.0, 30.0])


def dilate_path(path: ControlPath, lam: float) -> ControlPath:
    """Apply the degree dilation to every control value."""
    if isinstance(path, PiecewiseConstantPath):
        return PiecewiseConstantPath([(t0, t1, v.dilate(lam)) for t0, t1, v in path.pieces])
    if isinstance(path, PolynomialPath):
        scale = float(lam) ** path.basis.degrees
        return PolynomialPath(path.basis, path.coeff_matrix * scale[:, None], path.T)
    raise TypeError(f"unsupported path type {type(path)!r}")


def restrict_path(path: PiecewiseConstantPath, s: float, t: float) -> PiecewiseConstantPath:
    """The control on [s, t], shifted to start at 0."""
    if not (0.0 <= s < t <= path.T + 1e-12):
        raise ValueError(f"bad restriction window [{s}, {t}]")
    pieces = []
    for t0, t1, v in path.pieces:
        a, b = max(t0, s), min(t1, t)
        if b - a > 1e-15:
            pieces.append((a - s, b - s, v))
    return PiecewiseConstantPath(pieces)


def aligned_grid(path: ControlPath, t0: float, t1: float, steps: int) -> list[tuple[float, float]]:
    """Integration segments covering [t0, t1], split at path breakpoints,
    with at least `steps` sub-steps in total (allocated proportionally)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if math.isclose(t0, t1, abs_tol=1e-15):
        return []
    lo, hi = (t0, t1) if t1 > t0 else (t1, t0)
    cuts = [lo] + [float(b) for b in path.breakpoints() if lo < b < hi] + [hi]
    total = hi - lo
    segments = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(math.ceil(steps * (b - a) / total - 1e-9)))
        ts = np.linspace(a, b, n + 1)
        segments.extend(zip(ts[:-1], ts[1:]))
    if t1 < t0:
        segments = [(b, a) for a, b in reversed(segments)]
    return segments


def chen_product(path: PiecewiseConstantPath, t: float) -> ta.GroupElement:
    """Ordered product of increment exponentials; exact up to rounding."""
    if not isinstance(path, PiecewiseConstantPath):
        raise TypeError("chen_product requires a piecewise-constant control")
    if not -1e-12 <= t <= path.T + 1e-12:
        raise ValueError(f"time {t} outside [0, {path.T}]")
    g = ta.unit(path.basis.params)
    for t0, t1, value in path.pieces:
        h = min(t, t1) - t0
        if h <= 0:
            break
        g = ta.mul(g, ta.exp(ta.scale(value.to_tensor(), h).as_algebra()))
    return g


def group_ode_solve(path: ControlPath, t: float, steps: int) -> ta.GroupElement:
    """RK4 for dg/dt = g * xi'(t) from g(0) = 1, breakpoint-aligned."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    params = path.basis.params
    g = ta.unit(params)
    for a, b in aligned_grid(path, 0.0, t, steps):
        h = b - a

        def rhs(tau: float, gv: ta.GradedTensor) -> ta.GradedTensor:
            return ta.mul(gv, path.stage_value(tau, (a, b)).to_tensor())

        k1 = rhs(a, g)
        k2 = rhs(a + h / 2, g + (h / 2) * k1)
        k3 = rhs(a + h / 2, g + (h / 2) * k2)
        k4 = rhs(b, g + h * k3)
        g_next = g + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        levels = [blk.copy() for blk in g_next.levels]
        levels[0][0] = 1.0  # drift on the scalar block is pure rounding
        g = ta.GroupElement(params, levels)
    return g


def magnus_log(
    path: ControlPath,
    t: float,
    method: str = "chen",
    steps: Optional[int] = None,
) -> LieCoordinates:
    """Logarithm of the development, projected onto the Lie algebra.

    The projection residual must meet MAGNUS_LIE_TOL (scaled); a violation
    raises, since the logarithm of a development is a Lie element.
    """
    if method == "chen":
        g = chen_product(path, t)
    elif method == "ode":
        g = group_ode_solve(path, t, steps if steps is not None else 1024)
    else:
        raise ValueError(f"unknown method {method!r} (want 'chen' or 'ode')")
    return require_lie(ta.log(g), path.basis, MAGNUS_LIE_TOL)


def c_ode_derivative(path: ControlPath, C: LieCoordinates, t: float,
                     segment: Optional[tuple[float, float]] = None,
                     _coeffs: Optional[list] = None) -> LieCoordinates:
    """Right-hand side psi_minus(ad_C) xi'(t) in Hall coordinates."""
    basis = path.basis
    coeffs = _coeffs if _coeffs is not None else ta.psi_minus_coeffs(basis.params.kappa)
    xi_value = path.stage_value(t, segment) if segment is not None else path.derivative(t)
    rhs_tensor = ta.ad_series_apply(coeffs, C.to_tensor(), xi_value.to_tensor())
    coords, _ = basis.project(rhs_tensor)  # exact Lie element; residual is rounding
    return LieCoordinates(basis, coords)


def c_ode_solve(path: ControlPath, t: float, steps: int,
                _coeffs_override: Optional[list] = None) -> LieCoordinates:
    """RK4 on dC/dt = psi_minus(ad_C) xi'(t), C(0) = 0, in Hall coordinates.

    _coeffs_override substitutes the psi_minus coefficients; it exists as a
    fault-injection hook for the negative-control test in the CLI harness.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    basis = path.basis
    coeffs = _coeffs_override if _coeffs_override is not None else ta.psi_minus_coeffs(basis.params.kappa)
    C = LieCoordinates.zero(basis)
    for a, b in aligned_grid(path, 0.0, t, steps):
        h = b - a
        k1 = c_ode_derivative(path, C, a, (a, b), coeffs)
        k2 = c_ode_derivative(path, C + (h / 2) * k1, a + h / 2, (a, b), coeffs)
        k3 = c_ode_derivative(path, C + (h / 2) * k2, a + h / 2, (a, b), coeffs)
        k4 = c_ode_derivative(path, C + h * k3, b, (a, b), coeffs)
        C = C + (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return C


@dataclass(frozen=True)
class PathNorms:
    """Per-degree L1 accumulations of the control and their homogeneous max."""

    per_degree: np.ndarray  # index k-1 holds the degree-k accumulation

    @property
    def homogeneous(self) -> float:
        best = 0.0
        for k, v in enumerate(self.per_degree, start=1):
            if v > 0.0:
                best = max(best, float(v) ** (1.0 / k))
        return best


def path_norms(path: ControlPath, t: float, panels: int = 64) -> PathNorms:
    """Accumulate integral_0^t |xi'_k(tau)| dtau per degree.

    Exact sums for piecewise-constant controls; composite 5-point
    Gauss-Legendre per panel for smooth ones (the integrand is smooth except
    at isolated zeros, where it is still Lipschitz).
    """
    kappa = path.basis.params.kappa
    acc = np.zeros(kappa)
    if isinstance(path, PiecewiseConstantPath):
        for t0, t1, value in path.pieces:
            h = min(t, t1) - t0
            if h <= 0:
                break
            acc += h * ta.level_norms(value.to_tensor())[1:]
        return PathNorms(acc)
    nodes, weights = np.polynomial.legendre.leggauss(5)
    edges = np.linspace(0.0, t, panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for x, w in zip(nodes, weights):
            tau = mid + half * x
            acc += half * w * ta.level_norms(path.derivative(tau).to_tensor())[1:]
    return PathNorms(acc)


def path_to_json_dict(path: ControlPath) -> dict:
    """Serializable form.  Lie values are flat coordinate lists in Hall-word
    order (degree-major, lexicographic Lyndon words within a degree)."""
    params = path.basis.params
    out = {"d": params.d, "kappa": params.kappa, "T": path.T}
    if isinstance(path, PiecewiseConstantPath):
        out["kind"] = "pwc"
        out["pieces"] = [
            {"t0": t0, "t1": t1, "value": v.coords.tolist()} for t0, t1, v in path.pieces
        ]
        return out
    if isinstance(path, PolynomialPath):
        out["kind"] = "smooth-spec"
        out["family"] = "polynomial"
        out["coeffs"] = path.coeff_matrix.tolist()
        return out
    raise TypeError(f"unsupported path type {type(path)!r}")


def path_from_json_dict(data: dict, basis: Optional[HallBasis] = None) -> ControlPath:
    if basis is None:
        basis = HallBasis(ta.AlgebraParams(int(data["d"]), int(data["kappa"])))
    kind = data.get("kind", "pwc")
    if kind == "pwc":
        pieces = [
            (float(p["t0"]), float(p["t1"]), LieCoordinates(basis, p["value"]))
            for p in data["pieces"]
        ]
        return PiecewiseConstantPath(pieces)
    if kind == "smooth-spec":
        family = data.get("family", "polynomial")
        if family != "polynomial":
            raise ValueError(f"unknown smooth path family {family!r}")
        return PolynomialPath(basis, np.asarray(data["coeffs"], dtype=float), float(data["T"]))
    raise ValueError(f"unknown path kind {kind!r}")


def ad_flow_operator(path: ControlPath, t: float, steps: int) -> ta.GradedOperator:
    """Operator form of conjugation by the development, integrated directly
    via d/dt Ad = Ad o ad_{xi'} from the identity.  Agrees with
    conjugation_operator(chen/ode development) up to solver error."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    op = ta.GradedOperator.identity(path.basis.params)
    for a, b in aligned_grid(path, 0.0, t, steps):
        h = b - a

        def rhs(tau: float, O: ta.GradedOperator) -> ta.GradedOperator:
            return O.compose(ta.ad_operator(path.stage_value(tau, (a, b)).to_tensor()))

        k1 = rhs(a, op)
        k2 = rhs(a + h / 2, op.add(k1.scale(h / 2)))
        k3 = rhs(a + h / 2, op.add(k2.scale(h / 2)))
        k4 = rhs(b, op.add(k3.scale(h)))
        inc = k1.add(k2.scale(2.0)).add(k3.scale(2.0)).add(k4).scale(h / 6)
        op = op.add(inc)
    return op
