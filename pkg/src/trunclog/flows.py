"""Polynomial dynamical systems on flat space and the round sphere.

A dynamical system assigns a polynomial vector field to every generator and,
through nested Lie brackets, to every Hall word; Lie-algebra elements then
extend linearly to fields V_A.  All differentiation is symbolic on the
polynomial coefficients, so brackets, Jacobians, and Hessians are exact and
the only numerical error anywhere is the flow integrator's.

Sphere systems are handled extrinsically: fields live in ambient coordinates
and must be tangent ( x·V(x)=0 ); flows renormalize the point and re-project
the transported vector after every step.  Differential (pushforward) distance
measurements are restricted to flat space, where the ambient linearization is
the exact variational equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import tensor_algebra as ta
from .free_lie import HallBasis, LieCoordinates, build_hall_basis, lie_bracket
from .magnus import ControlPath, PiecewiseConstantPath, aligned_grid

__all__ = [
    "Polynomial",
    "PolyVectorField",
    "vf_bracket",
    "FlatManifold",
    "SphereManifold",
    "TangentSample",
    "FlowConfig",
    "DynamicalSystem",
    "flow",
    "exp_flow",
    "pushforward_flow",
    "exp_pushforward",
    "adjoint_eval",
    "w_field_eval",
    "dist_M",
    "dist_map",
    "dist_TM_flat",
    "dist_dmap",
    "homomorphism_defect",
    "displacement_bound",
    "built_in_system",
    "system_to_json_dict",
    "system_from_json_dict",
]

OFF_MANIFOLD_TOL = 1e-8
TANGENCY_TOL = 1e-12


# ---------------------------------------------------------------------------
# multivariate polynomials with exact symbolic calculus
# ---------------------------------------------------------------------------

class Polynomial:
    """Real polynomial in n variables, stored as {exponent tuple: coeff}."""

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Optional[dict] = None):
        clean = {}
        for expo, c in (terms or {}).items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != n or any(e < 0 for e in expo):
                raise ValueError(f"bad exponent tuple {expo} for n={n}")
            c = float(c)
            if c != 0.0:
                clean[expo] = clean.get(expo, 0.0) + c
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "terms", {k: v for k, v in clean.items() if v != 0.0})

    def __setattr__(self, name, value):
        raise AttributeError("Polynomial is immutable")

    @classmethod
    def constant(cls, n: int, c: float) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def coordinate(cls, n: int, i: int) -> "Polynomial":
        expo = [0] * n
        expo[i] = 1
        return cls(n, {tuple(expo): 1.0})

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """x has shape (..., n); returns shape (...)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for expo, c in self.terms.items():
            term = np.full(x.shape[:-1], c)
            for i, e in enumerate(expo):
                if e:
                    term = term * x[..., i] ** e
            out = out + term
        return out

    def partial(self, i: int) -> "Polynomial":
        terms = {}
        for expo, c in self.terms.items():
            if expo[i]:
                lowered = list(expo)
                lowered[i] -= 1
                key = tuple(lowered)
                terms[key] = terms.get(key, 0.0) + c * expo[i]
        return Polynomial(self.n, terms)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if self.n != other.n:
            raise ValueError("variable count mismatch")
        terms = dict(self.terms)
        for expo, c in other.terms.items():
            terms[expo] = terms.get(expo, 0.0) + c
        return Polynomial(self.n, terms)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        if self.n != other.n:
            raise ValueError("variable count mismatch")
        terms = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                terms[key] = terms.get(key, 0.0) + c1 * c2
        return Polynomial(self.n, terms)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.n, {e: c * v for e, v in self.terms.items()})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1.0)

    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def __repr__(self):
        return f"Polynomial(n={self.n}, {len(self.terms)} terms, deg={self.total_degree()})"


class PolyVectorField:
    """Vector field on R^n with polynomial components.

    Jacobian and Hessian component polynomials are materialized lazily and
    cached; evaluation broadcasts over any batch of points shaped (..., n).
    """

    __slots__ = ("n", "components", "_jac", "_hess")

    def __init__(self, components: Sequence[Polynomial]):
        if not components:
            raise ValueError("need at least one component")
        n = components[0].n
        if len(components) != n or any(p.n != n for p in components):
            raise ValueError("need exactly n polynomials in n variables")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "components", tuple(components))
        object.__setattr__(self, "_jac", None)
        object.__setattr__(self, "_hess", None)

    def __setattr__(self, name, value):
        raise AttributeError("PolyVectorField is immutable")

    @classmethod
    def zero(cls, n: int) -> "PolyVectorField":
        return cls([Polynomial(n) for _ in range(n)])

    @classmethod
    def linear(cls, M: np.ndarray) -> "PolyVectorField":
        """x -> M x."""
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        if M.shape != (n, n):
            raise ValueError("matrix must be square")
        comps = []
        for i in range(n):
            terms = {}
            for j in range(n):
                if M[i, j] != 0.0:
                    expo = [0] * n
                    expo[j] = 1
                    terms[tuple(expo)] = M[i, j]
            comps.append(Polynomial(n, terms))
        return cls(comps)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([p.evaluate(x) for p in self.components], axis=-1)

    def _jacobian_polys(self):
        if self._jac is None:
            jac = tuple(
                tuple(p.partial(j) for j in range(self.n)) for p in self.components
            )
            object.__setattr__(self, "_jac", jac)
        return self._jac

    def _hessian_polys(self):
        if self._hess is None:
            jac = self._jacobian_polys()
            hess = tuple(
                tuple(tuple(jac[i][j].partial(k) for k in range(self.n)) for j in range(self.n))
                for i in range(self.n)
            )
            object.__setattr__(self, "_hess", hess)
        return self._hess

    def jacobian_at(self, x: np.ndarray) -> np.ndarray:
        """shape (..., n, n), entry [i, j] = dV_i/dx_j."""
        x = np.asarray(x, dtype=float)
        jac = self._jacobian_polys()
        rows = [np.stack([jac[i][j].evaluate(x) for j in range(self.n)], axis=-1) for i in range(self.n)]
        return np.stack(rows, axis=-2)

    def hessian_at(self, x: np.ndarray) -> np.ndarray:
        """shape (..., n, n, n), entry [i, j, k] = d2 V_i / dx_j dx_k."""
        x = np.asarray(x, dtype=float)
        hess = self._hessian_polys()
        out = np.empty(x.shape[:-1] + (self.n, self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                for k in range(self.n):
                    out[..., i, j, k] = hess[i][j][k].evaluate(x)
        return out

    def add(self, other: "PolyVectorField") -> "PolyVectorField":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        return PolyVectorField([p + q for p, q in zip(self.components, other.components)])

    def scale(self, c: float) -> "PolyVectorField":
        return PolyVectorField([p.scale(c) for p in self.components])

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def __repr__(self):
        return f"PolyVectorField(n={self.n}, deg={max(p.total_degree() for p in self.components)})"


def vf_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """Lie bracket [X, Y] = (DY)X - (DX)Y, i.e. the derivation XY - YX.

    For linear fields V(x)=Mx, W(x)=Nx this evaluates to (NM - MN)x, so the
    matrix of the bracket field is minus the matrix commutator.
    """
    if X.n != Y.n:
        raise ValueError("dimension mismatch")
    n = X.n
    comps = []
    for i in range(n):
        acc = Polynomial(n)
        for j in range(n):
            acc = acc + Y.components[i].partial(j) * X.components[j]
            acc = acc - X.components[i].partial(j) * Y.components[j]
        comps.append(acc)
    return PolyVectorField(comps)


# ---------------------------------------------------------------------------
# manifolds
# ---------------------------------------------------------------------------

class FlatManifold:
    """R^n with the Euclidean metric."""

    kind = "flat"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = n

    @property
    def ambient_dim(self) -> int:
        return self.n

    def require_point(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if m.shape[-1] != self.n:
            raise ValueError(f"point has ambient dimension {m.shape[-1]}, want {self.n}")
        return m

    def project_point(self, m: np.ndarray) -> np.ndarray:
        return m

    def project_tangent(self, m: np.ndarray, v: np.ndarray) -> np.ndarray:
        return v

    def dist(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        p, q = self.require_point(p), self.require_point(q)
        return np.linalg.norm(np.asarray(p) - np.asarray(q), axis=-1)

    def sample_points(self, rng: np.random.Generator, count: int, radius: float = 1.0) -> np.ndarray:
        # uniform in the ball of the given radius
        z = rng.standard_normal((count, self.n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = radius * rng.random(count) ** (1.0 / self.n)
        return z * r[:, None]

    def sample_tangents(self, rng: np.random.Generator, count: int, radius: float = 1.0):
        pts = self.sample_points(rng, count, radius)
        v = rng.standard_normal((count, self.n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return [TangentSample(m, u) for m, u in zip(pts, v)]

    def __eq__(self, other):
        return isinstance(other, FlatManifold) and other.n == self.n

    def __repr__(self):
        return f"FlatManifold(n={self.n})"


class SphereManifold:
    """Unit sphere S^n embedded in R^{n+1}; geodesic distance arccos(p.q)."""

    kind = "sphere"

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = n

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    def require_point(self, m: np.ndarray) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if m.shape[-1] != self.ambient_dim:
            raise ValueError(f"point has ambient dimension {m.shape[-1]}, want {self.ambient_dim}")
        drift = np.abs(np.linalg.norm(m, axis=-1) - 1.0)
        if np.any(drift > OFF_MANIFOLD_TOL):
            raise ValueError(f"point off the sphere by {float(np.max(drift)):.3e}")
        return m

    def project_point(self, m: np.ndarray) -> np.ndarray:
        return m / np.linalg.norm(m, axis=-1, keepdims=True)

    def project_tangent(self, m: np.ndarray, v: np.ndarray) -> np.ndarray:
        return v - np.sum(m * v, axis=-1, keepdims=True) * m

    def dist(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        # 2*atan2(|p-q|, |p+q|): unlike arccos of the dot product this stays
        # accurate near zero separation (arccos bottoms out at ~sqrt(eps))
        p, q = self.require_point(p), self.require_point(q)
        return 2.0 * np.arctan2(np.linalg.norm(p - q, axis=-1),
                                np.linalg.norm(p + q, axis=-1))

    def sample_points(self, rng: np.random.Generator, count: int, radius: float = 1.0) -> np.ndarray:
        z = rng.standard_normal((count, self.ambient_dim))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    def sample_tangents(self, rng: np.random.Generator, count: int, radius: float = 1.0):
        pts = self.sample_points(rng, count)
        v = rng.standard_normal((count, self.ambient_dim))
        v = self.project_tangent(pts, v)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return [TangentSample(m, u) for m, u in zip(pts, v)]

    def __eq__(self, other):
        return isinstance(other, SphereManifold) and other.n == self.n

    def __repr__(self):
        return f"SphereManifold(n={self.n})"


@dataclass(frozen=True)
class TangentSample:
    """A base point with a tangent vector, both in embedding coordinates."""

    m: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.m.shape != self.v.shape:
            raise ValueError("point and vector shapes differ")


@dataclass(frozen=True)
class FlowConfig:
    """Integration knobs: fixed RK4 step count per unit of span."""

    steps_per_unit: int = 4096

    def __post_init__(self):
        if self.steps_per_unit < 1:
            raise ValueError("steps_per_unit must be >= 1")

    def steps_for(self, span: float) -> int:
        return max(1, int(math.ceil(self.steps_per_unit * abs(span) - 1e-9)))


# ---------------------------------------------------------------------------
# dynamical systems
# ---------------------------------------------------------------------------

class DynamicalSystem:
    """Generator fields plus the Hall-word bracket cache.

    The map A -> V_A is the linear extension of w -> V_w over Hall words,
    where V_w is built by nested vf_bracket calls mirroring the word's
    standard bracketing.  On the sphere every generator field must be
    tangent; brackets of tangent fields are tangent automatically.
    """

    def __init__(self, manifold, base_fields: Sequence[PolyVectorField], basis: HallBasis,
                 name: str = "custom"):
        d = basis.params.d
        if len(base_fields) != d:
            raise ValueError(f"need {d} generator fields, got {len(base_fields)}")
        n = manifold.ambient_dim
        if any(f.n != n for f in base_fields):
            raise ValueError("field dimension does not match the manifold's ambient dimension")
        if manifold.kind == "sphere":
            _check_tangency(manifold, base_fields)
        self.manifold = manifold
        self.basis = basis
        self.name = name
        cache = {}
        for w in basis.words:
            if w.letter is not None:
                cache[w.word] = base_fields[w.letter]
            else:
                cache[w.word] = vf_bracket(cache[w.left.word], cache[w.right.word])
        self.hall_fields = cache
        self._field_list = [cache[w.word] for w in basis.words]
        # affine fast path: when every hall field has degree <= 1 the stage
        # evaluations inside the integrators collapse to one matrix product
        if all(p.total_degree() <= 1 for f in self._field_list for p in f.components):
            zero = np.zeros(n)
            self._affine = (
                np.stack([f.jacobian_at(zero) for f in self._field_list]),
                np.stack([f(zero) for f in self._field_list]),
            )
        else:
            self._affine = None

    @property
    def base_fields(self) -> list:
        return self._field_list[: self.basis.params.d]

    def extend(self, A: LieCoordinates) -> PolyVectorField:
        """V_A = sum_w A_w V_w."""
        if A.basis.params != self.basis.params:
            raise ValueError("Lie element uses an incompatible basis")
        out = PolyVectorField.zero(self.manifold.ambient_dim)
        for c, f in zip(A.coords, self._field_list):
            if c != 0.0:
                out = out.add(f.scale(float(c)))
        return out

    # fast paths used inside integrators: combine per-word evaluations
    # instead of materializing a new symbolic field at every RK4 stage
    def eval_combined(self, coords: np.ndarray, x: np.ndarray) -> np.ndarray:
        if self._affine is not None:
            M = np.tensordot(coords, self._affine[0], axes=1)
            return x @ M.T + coords @ self._affine[1]
        out = np.zeros(x.shape)
        for c, f in zip(coords, self._field_list):
            if c != 0.0:
                out += c * f(x)
        return out

    def jac_combined(self, coords: np.ndarray, x: np.ndarray) -> np.ndarray:
        n = self.manifold.ambient_dim
        if self._affine is not None:
            M = np.tensordot(coords, self._affine[0], axes=1)
            return np.broadcast_to(M, x.shape[:-1] + (n, n)).copy()
        out = np.zeros(x.shape[:-1] + (n, n))
        for c, f in zip(coords, self._field_list):
            if c != 0.0:
                out += c * f.jacobian_at(x)
        return out

    def __repr__(self):
        return (
            f"DynamicalSystem({self.name!r}, {self.manifold!r}, d={self.basis.params.d}, "
            f"kappa={self.basis.params.kappa})"
        )


def _check_tangency(manifold, fields):
    rng = np.random.default_rng(20240917)
    pts = manifold.sample_points(rng, 64)
    for f in fields:
        worst = float(np.max(np.abs(np.sum(pts * f(pts), axis=-1))))
        if worst > TANGENCY_TOL:
            raise ValueError(f"generator field is not tangent to the sphere (x.V(x) up to {worst:.3e})")


def homomorphism_defect(sys: DynamicalSystem, A: LieCoordinates, B: LieCoordinates,
                        points: np.ndarray) -> float:
    """max_x |V_[A,B](x) - [V_A, V_B](x)| over the given points.

    Zero (to rounding) whenever the truncated bracket loses nothing, i.e. for
    genuinely nilpotent systems or when deg(A)+deg(B) stays within the cutoff.
    """
    lhs = sys.extend(lie_bracket(A, B))
    rhs = vf_bracket(sys.extend(A), sys.extend(B))
    diff = lhs(points) - rhs(points)
    return float(np.max(np.linalg.norm(diff, axis=-1)))


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def _rk4_points(sys: DynamicalSystem, coords_of: Callable, segments, m: np.ndarray) -> np.ndarray:
    x = np.array(m, dtype=float)
    manifold = sys.manifold
    for a, b in segments:
        h = b - a
        c1 = coords_of(a, (a, b))
        cmid = coords_of(a + h / 2, (a, b))
        c4 = coords_of(b, (a, b))
        k1 = sys.eval_combined(c1, x)
        k2 = sys.eval_combined(cmid, x + (h / 2) * k1)
        k3 = sys.eval_combined(cmid, x + (h / 2) * k2)
        k4 = sys.eval_combined(c4, x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if manifold.kind == "sphere":
            x = manifold.project_point(x)
    return x


def _rk4_tangent(sys: DynamicalSystem, coords_of: Callable, segments,
                 m: np.ndarray, v: np.ndarray) -> tuple:
    x = np.array(m, dtype=float)
    u = np.array(v, dtype=float)
    manifold = sys.manifold

    def rhs(c, xx, uu):
        dx = sys.eval_combined(c, xx)
        J = sys.jac_combined(c, xx)
        du = np.einsum("...ij,...j->...i", J, uu)
        return dx, du

    for a, b in segments:
        h = b - a
        c1 = coords_of(a, (a, b))
        cmid = coords_of(a + h / 2, (a, b))
        c4 = coords_of(b, (a, b))
        k1x, k1u = rhs(c1, x, u)
        k2x, k2u = rhs(cmid, x + (h / 2) * k1x, u + (h / 2) * k1u)
        k3x, k3u = rhs(cmid, x + (h / 2) * k2x, u + (h / 2) * k2u)
        k4x, k4u = rhs(c4, x + h * k3x, u + h * k3u)
        x = x + (h / 6) * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + (h / 6) * (k1u + 2 * k2u + 2 * k3u + k4u)
        if manifold.kind == "sphere":
            x = manifold.project_point(x)
            u = manifold.project_tangent(x, u)
    return x, u


def _path_coords(path: ControlPath):
    def coords_of(tau, segment):
        return path.stage_value(tau, segment).coords

    return coords_of


def _const_segments(T: float, steps: int):
    ts = np.linspace(0.0, T, steps + 1)
    return list(zip(ts[:-1], ts[1:]))


def flow(sys: DynamicalSystem, path: ControlPath, m: np.ndarray, t0: float, t1: float,
         cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """The flow of the time-dependent field V_xi'(t) from time t0 to t1."""
    if path.basis.params != sys.basis.params:
        raise ValueError("path and system use different algebra parameters")
    m = sys.manifold.require_point(m)
    segments = aligned_grid(path, t0, t1, cfg.steps_for(t1 - t0))
    return _rk4_points(sys, _path_coords(path), segments, m)


def exp_flow(sys: DynamicalSystem, A: LieCoordinates, m: np.ndarray,
             cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """Time-1 flow of the autonomous field V_A."""
    m = sys.manifold.require_point(m)
    coords = A.coords

    def coords_of(tau, segment):
        return coords

    return _rk4_points(sys, coords_of, _const_segments(1.0, cfg.steps_for(1.0)), m)


def pushforward_flow(sys: DynamicalSystem, path: ControlPath, m: np.ndarray, v: np.ndarray,
                     t0: float, t1: float, cfg: FlowConfig = FlowConfig()) -> TangentSample:
    """Flow the point and solve the variational equation for the vector.

    The vector obeys the ambient linearization dv/dt = DV(m(t)) v; on the
    sphere it is re-projected onto the tangent plane after every step.
    """
    if path.basis.params != sys.basis.params:
        raise ValueError("path and system use different algebra parameters")
    m = sys.manifold.require_point(m)
    segments = aligned_grid(path, t0, t1, cfg.steps_for(t1 - t0))
    x, u = _rk4_tangent(sys, _path_coords(path), segments, m, np.asarray(v, dtype=float))
    return TangentSample(x, u)


def exp_pushforward(sys: DynamicalSystem, A: LieCoordinates, m: np.ndarray, v: np.ndarray,
                    cfg: FlowConfig = FlowConfig()) -> TangentSample:
    """(e^{V_A})_* at m: time-1 pushforward of the autonomous field."""
    m = sys.manifold.require_point(m)
    coords = A.coords

    def coords_of(tau, segment):
        return coords

    x, u = _rk4_tangent(
        sys, coords_of, _const_segments(1.0, cfg.steps_for(1.0)), m, np.asarray(v, dtype=float)
    )
    return TangentSample(x, u)


def adjoint_eval(sys: DynamicalSystem, A: LieCoordinates, Z: PolyVectorField, s: float,
                 m: np.ndarray, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """(Ad_{e^{sV_A}} Z)(m): pull the point back, evaluate Z, push forward."""
    m = sys.manifold.require_point(m)
    if s == 0.0:
        return Z(m)
    m_back = exp_flow(sys, (-s) * A, m, cfg)
    z = Z(m_back)
    coords = (s * A).coords

    def coords_of(tau, segment):
        return coords

    _, u = _rk4_tangent(sys, coords_of, _const_segments(1.0, cfg.steps_for(abs(s))), m_back, z)
    return u


def w_field_eval(sys: DynamicalSystem, C: LieCoordinates, Cdot: LieCoordinates, m: np.ndarray,
                 squad: int = 16, cfg: FlowConfig = FlowConfig()) -> np.ndarray:
    """int_0^1 (Ad_{e^{s V_C}} V_Cdot)(m) ds by Gauss-Legendre in s."""
    if squad < 1:
        raise ValueError("quadrature order must be >= 1")
    m = sys.manifold.require_point(m)
    Z = sys.extend(Cdot)
    nodes, weights = np.polynomial.legendre.leggauss(squad)
    out = np.zeros(np.asarray(m, dtype=float).shape)
    for xk, wk in zip(nodes, weights):
        s = 0.5 * (xk + 1.0)
        out += 0.5 * wk * adjoint_eval(sys, C, Z, s, m, cfg)
    return out


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def dist_M(manifold, p: np.ndarray, q: np.ndarray) -> float:
    return float(np.max(manifold.dist(p, q)))


def dist_map(sys: DynamicalSystem, f: Callable, g: Callable, points: np.ndarray) -> float:
    """max over the sample of d(f(m), g(m)) — a lower estimate of the sup."""
    fp = np.asarray(f(points), dtype=float)
    gp = np.asarray(g(points), dtype=float)
    return float(np.max(sys.manifold.dist(fp, gp)))


def dist_TM_flat(a: TangentSample, b: TangentSample, manifold=None) -> float:
    """sqrt(|m-p|^2 + |v-w|^2); the exact tangent-bundle distance on flat
    space, where parallel transport is path independent.  The curved-space
    infimum over connecting paths is not implemented, so passing a sphere
    manifold is an error rather than a mis-measurement."""
    if manifold is not None and manifold.kind != "flat":
        raise ValueError("tangent distance is only implemented on flat space")
    dm = np.linalg.norm(a.m - b.m)
    dv = np.linalg.norm(a.v - b.v)
    return float(np.hypot(dm, dv))


def dist_dmap(sys: DynamicalSystem, fstar: Callable, gstar: Callable,
              samples: Sequence[TangentSample]) -> float:
    """max over unit tangent samples of the flat tangent-space distance."""
    if sys.manifold.kind != "flat":
        raise ValueError("differential distance is measured on flat space only")
    worst = 0.0
    for ts in samples:
        if abs(np.linalg.norm(ts.v) - 1.0) > 1e-10:
            raise ValueError("differential distance requires unit tangent samples")
        worst = max(worst, dist_TM_flat(fstar(ts), gstar(ts)))
    return worst


def displacement_bound(sys: DynamicalSystem, path: ControlPath, points: np.ndarray,
                       cfg: FlowConfig = FlowConfig(), slack: float = 1.1) -> dict:
    """Measured sup-sample displacement of the flow against the integrated
    sampled sup speed along the flowed sample.

    The sup of |V_xi'(s)| is sampled at the moving cloud (the trajectory lies
    on M, so this is a legitimate sample of the sup and it tracks regions the
    flow actually visits); the slack factor covers that sampling plus
    quadrature of the time integral.
    """
    points = sys.manifold.require_point(points)
    coords_of = _path_coords(path)
    x = np.array(points, dtype=float)
    bound = 0.0
    for a, b in aligned_grid(path, 0.0, path.T, cfg.steps_for(path.T)):
        h = b - a
        s0 = float(np.max(np.linalg.norm(sys.eval_combined(coords_of(a, (a, b)), x), axis=-1)))
        x = _rk4_points(sys, coords_of, [(a, b)], x)
        s1 = float(np.max(np.linalg.norm(sys.eval_combined(coords_of(b, (a, b)), x), axis=-1)))
        bound += h * max(s0, s1)
    measured = float(np.max(sys.manifold.dist(points, x)))
    return {"measured": measured, "bound": float(bound), "ok": bool(measured <= slack * bound + 1e-12)}


# ---------------------------------------------------------------------------
# built-in systems and serialization
# ---------------------------------------------------------------------------

def _heisenberg_fields():
    # V1 = dx - (y/2) dz, V2 = dy + (x/2) dz; [V1, V2] = dz, deeper brackets
    # vanish, so the system is step-2 nilpotent and truncated flows at
    # cutoff >= 2 are exact
    n = 3
    V1 = PolyVectorField([
        Polynomial.constant(n, 1.0),
        Polynomial(n),
        Polynomial(n, {(0, 1, 0): -0.5}),
    ])
    V2 = PolyVectorField([
        Polynomial(n),
        Polynomial.constant(n, 1.0),
        Polynomial(n, {(1, 0, 0): 0.5}),
    ])
    return [V1, V2]


def _so3_generators():
    J1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    J2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    J3 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return [J1, J2, J3]


def built_in_system(name: str, kappa: int, d: int = 2, n: int = 3, seed: int = 0,
                    scale: float = 0.35, basis: Optional[HallBasis] = None) -> DynamicalSystem:
    """Named systems: heisenberg | linear | polyquad | so3.

    `scale` tempers the random coefficients of linear/polyquad so unit-time
    flows stay in a moderate region.
    """
    if name == "heisenberg":
        if d != 2:
            raise ValueError("the Heisenberg system has exactly 2 generators")
        fields = _heisenberg_fields()
        manifold = FlatManifold(3)
    elif name == "linear":
        rng = np.random.default_rng(seed)
        mats = scale * rng.standard_normal((d, n, n)) / math.sqrt(n)
        fields = [PolyVectorField.linear(M) for M in mats]
        manifold = FlatManifold(n)
    elif name == "polyquad":
        rng = np.random.default_rng(seed)
        nq = 2
        monomials = [e for e in _monomials_up_to(nq, 2)]
        fields = []
        for _ in range(d):
            comps = []
            for _ in range(nq):
                coeffs = scale * rng.standard_normal(len(monomials))
                comps.append(Polynomial(nq, dict(zip(monomials, coeffs))))
            fields.append(PolyVectorField(comps))
        manifold = FlatManifold(2)
    elif name == "so3":
        if not 1 <= d <= 3:
            raise ValueError("so3 provides at most 3 generators")
        fields = [PolyVectorField.linear(J) for J in _so3_generators()[:d]]
        manifold = SphereManifold(2)
    else:
        raise ValueError(f"unknown system {name!r}")
    if basis is None:
        basis = build_hall_basis(ta.AlgebraParams(len(fields), kappa))
    return DynamicalSystem(manifold, fields, basis, name=name)


def _monomials_up_to(n: int, deg: int):
    if n == 0:
        yield ()
        return
    for head in range(deg + 1):
        for rest in _monomials_up_to(n - 1, deg - head):
            yield (head,) + rest


def system_to_json_dict(sys: DynamicalSystem) -> dict:
    mf = {"type": sys.manifold.kind, "n": sys.manifold.n}
    fields = []
    for f in sys.base_fields:
        comps = []
        for p in f.components:
            comps.append({",".join(str(e) for e in expo): c for expo, c in p.terms.items()})
        fields.append(comps)
    return {"name": sys.name, "manifold": mf, "fields": fields,
            "kappa": sys.basis.params.kappa}


def system_from_json_dict(data: dict, kappa: Optional[int] = None,
                          basis: Optional[HallBasis] = None) -> DynamicalSystem:
    mf = data["manifold"]
    if mf["type"] == "flat":
        manifold = FlatManifold(int(mf["n"]))
    elif mf["type"] == "sphere":
        manifold = SphereManifold(int(mf["n"]))
    else:
        raise ValueError(f"unknown manifold type {mf['type']!r}")
    n = manifold.ambient_dim
    fields = []
    for comps in data["fields"]:
        if len(comps) != n:
            raise ValueError(f"field needs {n} components, got {len(comps)}")
        polys = []
        for term_map in comps:
            terms = {}
            for key, c in term_map.items():
                expo = tuple(int(s) for s in str(key).split(",")) if key else ()
                terms[expo] = float(c)
            polys.append(Polynomial(n, terms))
        fields.append(PolyVectorField(polys))
    if kappa is None:
        kappa = int(data["kappa"])
    if basis is None:
        basis = build_hall_basis(ta.AlgebraParams(len(fields), kappa))
    return DynamicalSystem(manifold, fields, basis, name=data.get("name", "custom"))
