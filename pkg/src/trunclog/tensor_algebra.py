"""Arithmetic in the degree-truncated tensor algebra over R^d.

An element is stored as one dense coefficient block per degree 0..kappa; the
degree-k block is indexed lexicographically by words over the alphabet
{0,..,d-1} of length k (flattened, length d**k, word (w_1..w_k) at position
sum(w_i * d**(k-i))).  The product truncates everything past degree kappa,
which makes the strictly-positive-degree part nilpotent and every analytic
series a finite sum.

Conventions used throughout:

* group elements have degree-0 block exactly 1.0, algebra elements exactly
  0.0 -- enforced on construction and preserved exactly by the operations
  (the degree-0 block of a product is the product of degree-0 blocks, so no
  rounding can creep in);
* series coefficients (exp, log, inverse, psi, psi_minus) are generated by
  exact rational recurrences and converted to float at the end;
* all values are immutable: operations return fresh instances and the
  underlying numpy blocks are marked read-only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "AlgebraParams",
    "GradedTensor",
    "AlgebraElement",
    "GroupElement",
    "GradedOperator",
    "zero",
    "unit",
    "basis_vector",
    "from_levels",
    "add",
    "sub",
    "scale",
    "mul",
    "mul_extended",
    "bracket",
    "inner",
    "norm",
    "hom_norm",
    "dilate",
    "exp",
    "log",
    "inverse",
    "series_apply",
    "exp_coeffs",
    "log_coeffs",
    "inverse_coeffs",
    "psi_coeffs",
    "psi_minus_coeffs",
    "ad_operator",
    "ad_apply",
    "ad_series_apply",
    "operator_exp",
    "conjugation_operator",
    "operator_from_linear_map",
    "to_json_dict",
    "from_json_dict",
]


@dataclass(frozen=True)
class AlgebraParams:
    """Shape of a truncated tensor algebra: ambient dimension and cutoff."""

    d: int
    kappa: int

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ValueError(f"ambient dimension must be a positive integer, got {self.d!r}")
        if not (isinstance(self.kappa, int) and self.kappa >= 1):
            raise ValueError(f"truncation degree must be a positive integer, got {self.kappa!r}")

    def level_dim(self, k: int) -> int:
        return self.d ** k

    def extended(self) -> "AlgebraParams":
        """Parameters of the doubled-truncation algebra used by mul_extended."""
        return AlgebraParams(self.d, 2 * self.kappa)


def _check_same_params(a: "GradedTensor", b: "GradedTensor") -> None:
    if a.params != b.params:
        raise ValueError(f"algebra parameters differ: {a.params} vs {b.params}")


class GradedTensor:
    """Element of the truncated tensor algebra (any degree-0 value)."""

    __slots__ = ("params", "levels")

    def __init__(self, params: AlgebraParams, levels: Sequence[np.ndarray]):
        if len(levels) != params.kappa + 1:
            raise ValueError(f"expected {params.kappa + 1} levels, got {len(levels)}")
        frozen = []
        for k, block in enumerate(levels):
            arr = np.asarray(block, dtype=float)
            if arr.shape != (params.level_dim(k),):
                raise ValueError(
                    f"level {k} must have shape ({params.level_dim(k)},), got {arr.shape}"
                )
            if not np.isfinite(arr).all():
                raise ValueError(f"level {k} contains non-finite entries")
            if arr is levels[k]:
                arr = arr.copy()
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "levels", tuple(frozen))

    def __setattr__(self, name, value):
        raise AttributeError("GradedTensor is immutable")

    @property
    def level0(self) -> float:
        return float(self.levels[0][0])

    def as_algebra(self) -> "AlgebraElement":
        # levels are already frozen, so the blocks can be shared, not copied
        if self.levels[0][0] != 0.0:
            raise ValueError(f"algebra element requires level 0 == 0 exactly, got {self.level0!r}")
        out = object.__new__(AlgebraElement)
        object.__setattr__(out, "params", self.params)
        object.__setattr__(out, "levels", self.levels)
        return out

    def as_group(self) -> "GroupElement":
        if self.levels[0][0] != 1.0:
            raise ValueError(f"group element requires level 0 == 1 exactly, got {self.level0!r}")
        out = object.__new__(GroupElement)
        object.__setattr__(out, "params", self.params)
        object.__setattr__(out, "levels", self.levels)
        return out

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rmul__(self, c):
        if isinstance(c, (int, float)):
            return scale(self, c)
        return NotImplemented

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        head = ", ".join(f"|{k}|={np.linalg.norm(b):.3g}" for k, b in enumerate(self.levels))
        return f"<{type(self).__name__} d={self.params.d} kappa={self.params.kappa} {head}>"


class AlgebraElement(GradedTensor):
    """Tensor with degree-0 block exactly zero (the nilpotent part)."""

    __slots__ = ()

    def __init__(self, params, levels):
        super().__init__(params, levels)
        if self.levels[0][0] != 0.0:
            raise ValueError(f"algebra element requires level 0 == 0 exactly, got {self.level0!r}")


class GroupElement(GradedTensor):
    """Tensor with degree-0 block exactly one (the group 1 + nilpotent)."""

    __slots__ = ()

    def __init__(self, params, levels):
        super().__init__(params, levels)
        if self.levels[0][0] != 1.0:
            raise ValueError(f"group element requires level 0 == 1 exactly, got {self.level0!r}")


def _wrap(params: AlgebraParams, levels: Sequence[np.ndarray], cls=GradedTensor) -> GradedTensor:
    if cls is AlgebraElement:
        return AlgebraElement(params, levels)
    if cls is GroupElement:
        return GroupElement(params, levels)
    return GradedTensor(params, levels)


def _fresh(params: AlgebraParams, levels: list, cls=GradedTensor) -> GradedTensor:
    """Wrap freshly computed arithmetic results without the defensive copy.

    The arrays are conformal by construction and owned by the caller (or
    aliased from an already-frozen element), so only the cheap invariants
    are re-checked: finiteness and the exact level-0 value of the subclass.
    """
    if cls is AlgebraElement and levels[0][0] != 0.0:
        raise ValueError(f"algebra element requires level 0 == 0 exactly, got {levels[0][0]!r}")
    if cls is GroupElement and levels[0][0] != 1.0:
        raise ValueError(f"group element requires level 0 == 1 exactly, got {levels[0][0]!r}")
    for k, arr in enumerate(levels):
        if not np.isfinite(arr).all():
            raise ValueError(f"level {k} contains non-finite entries")
        arr.setflags(write=False)
    out = object.__new__(cls)
    object.__setattr__(out, "params", params)
    object.__setattr__(out, "levels", tuple(levels))
    return out


def zero(params: AlgebraParams) -> AlgebraElement:
    return AlgebraElement(params, [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)])


def unit(params: AlgebraParams) -> GroupElement:
    levels = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
    levels[0][0] = 1.0
    return GroupElement(params, levels)


def basis_vector(params: AlgebraParams, i: int) -> AlgebraElement:
    """The i-th generator (0-based), a pure degree-1 element."""
    if not 0 <= i < params.d:
        raise ValueError(f"generator index {i} out of range for d={params.d}")
    levels = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
    levels[1][i] = 1.0
    return AlgebraElement(params, levels)


def from_levels(params: AlgebraParams, levels: Sequence[Sequence[float]]) -> GradedTensor:
    return GradedTensor(params, [np.asarray(b, dtype=float) for b in levels])


def add(A: GradedTensor, B: GradedTensor) -> GradedTensor:
    _check_same_params(A, B)
    cls = AlgebraElement if isinstance(A, AlgebraElement) and isinstance(B, AlgebraElement) else GradedTensor
    return _fresh(A.params, [a + b for a, b in zip(A.levels, B.levels)], cls)


def sub(A: GradedTensor, B: GradedTensor) -> GradedTensor:
    _check_same_params(A, B)
    cls = AlgebraElement if A.levels[0][0] == B.levels[0][0] else GradedTensor
    out = [a - b for a, b in zip(A.levels, B.levels)]
    if cls is AlgebraElement:
        out[0] = np.zeros(1)  # exact zero even if level0 values were equal non-zero floats
    return _fresh(A.params, out, cls)


def scale(A: GradedTensor, c: float) -> GradedTensor:
    cls = AlgebraElement if isinstance(A, AlgebraElement) else GradedTensor
    return _fresh(A.params, [c * b for b in A.levels], cls)


def mul(A: GradedTensor, B: GradedTensor) -> GradedTensor:
    """Truncated product: degree-k block is sum over j of A_j (x) B_{k-j}.

    Degrees above kappa are discarded.  The flattened outer product of the
    degree-j and degree-(k-j) blocks lands exactly on the lexicographic
    word indexing, so no reshuffling is needed.
    """
    _check_same_params(A, B)
    params = A.params
    out = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
    for j, a in enumerate(A.levels):
        if not a.any():
            continue
        for m, b in enumerate(B.levels):
            k = j + m
            if k > params.kappa:
                break
            if not b.any():
                continue
            out[k] += np.outer(a, b).ravel()
    both_group = isinstance(A, GroupElement) and isinstance(B, GroupElement)
    both_algebra = isinstance(A, AlgebraElement) and isinstance(B, AlgebraElement)
    if both_group:
        out[0][0] = 1.0
        return _fresh(params, out, GroupElement)
    if both_algebra:
        return _fresh(params, out, AlgebraElement)
    return _fresh(params, out)


def mul_extended(A: GradedTensor, B: GradedTensor) -> GradedTensor:
    """Exact product of two nilpotent elements, carried in the 2*kappa algebra.

    Since both operands vanish above degree kappa, nothing is truncated: the
    result holds every component of the full tensor product.  The returned
    value lives in a distinct AlgebraParams(d, 2*kappa) and must not be mixed
    with kappa-truncated values.
    """
    _check_same_params(A, B)
    if A.levels[0][0] != 0.0 or B.levels[0][0] != 0.0:
        raise ValueError("mul_extended expects nilpotent (level-0 zero) operands")
    big = A.params.extended()

    def _embed(X: GradedTensor) -> AlgebraElement:
        levels = [np.zeros(big.level_dim(k)) for k in range(big.kappa + 1)]
        for k in range(1, A.params.kappa + 1):
            levels[k] = X.levels[k].copy()
        return AlgebraElement(big, levels)

    return mul(_embed(A), _embed(B))


def bracket(A: GradedTensor, B: GradedTensor) -> GradedTensor:
    """Commutator AB - BA in the truncated algebra."""
    return sub(mul(A, B), mul(B, A))


def inner(A: GradedTensor, B: GradedTensor) -> float:
    """Inner product making words orthonormal and degree blocks orthogonal."""
    _check_same_params(A, B)
    return float(sum(float(np.dot(a, b)) for a, b in zip(A.levels, B.levels)))


def norm(A: GradedTensor) -> float:
    return math.sqrt(max(inner(A, A), 0.0))


def level_norms(A: GradedTensor) -> np.ndarray:
    """Euclidean norm of each degree block, indices 0..kappa."""
    return np.array([float(np.linalg.norm(b)) for b in A.levels])


def hom_norm(A: GradedTensor) -> float:
    """Homogeneous norm: max over degrees k>=1 of |A_k|^(1/k).

    Scales linearly under dilate() and is sub-additive.  Only defined on the
    nilpotent part, hence the exact level-0 check.
    """
    if A.levels[0][0] != 0.0:
        raise ValueError("homogeneous norm requires level 0 == 0")
    best = 0.0
    for k in range(1, A.params.kappa + 1):
        nk = float(np.linalg.norm(A.levels[k]))
        if nk > 0.0:
            best = max(best, nk ** (1.0 / k))
    return best


def dilate(A: GradedTensor, lam: float) -> GradedTensor:
    """Degree-k block scaled by lam**k; an algebra homomorphism for every lam."""
    cls = type(A) if isinstance(A, (AlgebraElement, GroupElement)) else GradedTensor
    if isinstance(A, GroupElement):
        # lam**0 == 1 keeps the group invariant exactly
        cls = GroupElement
    out = [A.levels[0]] + [(lam ** k) * b for k, b in enumerate(A.levels) if k]
    return _fresh(A.params, out, cls)


# ---------------------------------------------------------------------------
# analytic functional calculus: finite series in a nilpotent argument
# ---------------------------------------------------------------------------

def _float_coeffs(fracs: Sequence[Fraction]) -> list[float]:
    return [float(c) for c in fracs]


def exp_coeffs(kappa: int) -> list[float]:
    """1/k! for k = 0..kappa."""
    return _float_coeffs([Fraction(1, math.factorial(k)) for k in range(kappa + 1)])


def log_coeffs(kappa: int) -> list[float]:
    """Coefficients of log(1+z): 0, 1, -1/2, 1/3, ... up to degree kappa."""
    out = [Fraction(0)]
    for k in range(1, kappa + 1):
        out.append(Fraction((-1) ** (k + 1), k))
    return _float_coeffs(out)


def inverse_coeffs(kappa: int) -> list[float]:
    """Coefficients of 1/(1+z): (-1)^k."""
    return [float((-1) ** k) for k in range(kappa + 1)]


def _psi_fractions(n: int) -> list[Fraction]:
    # psi(z) = (e^z - 1)/z has Maclaurin coefficients 1/(k+1)!
    return [Fraction(1, math.factorial(k + 1)) for k in range(n)]


def psi_coeffs(kappa: int) -> list[float]:
    return _float_coeffs(_psi_fractions(kappa + 1))


def psi_minus_coeffs(kappa: int) -> list[float]:
    """First kappa Maclaurin coefficients of z/(1 - e^(-z)).

    Computed as the exact power-series reciprocal of psi(-z); the constant
    term of psi is 1, so b_0 = 1 and b_k = -sum_{j<k} b_j a_{k-j} with
    a_k = (-1)^k/(k+1)!.  Values: 1, 1/2, 1/12, 0, -1/720, ...
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    a = [((-1) ** k) * c for k, c in enumerate(_psi_fractions(kappa))]
    b: list[Fraction] = [Fraction(1)]
    for k in range(1, kappa):
        b.append(-sum(b[j] * a[k - j] for j in range(k)))
    return _float_coeffs(b)


def series_apply(coeffs: Sequence[float], xi: GradedTensor) -> GradedTensor:
    """Evaluate sum_k coeffs[k] * xi^k, k = 0..kappa (extra coeffs ignored).

    Multiplicative in the series: applying a product of two power series
    equals the algebra product of the separate applications, because xi is
    nilpotent of degree kappa+1.
    """
    if xi.levels[0][0] != 0.0:
        raise ValueError("series_apply expects a nilpotent argument (level 0 == 0)")
    params = xi.params
    if len(coeffs) < params.kappa + 1:
        raise ValueError(f"need at least {params.kappa + 1} coefficients, got {len(coeffs)}")
    out = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
    out[0][0] = float(coeffs[0])  # exact: xi^k has zero level 0 for k >= 1
    power = xi
    for k in range(1, params.kappa + 1):
        if k > 1:
            power = mul(power, xi)
        c = float(coeffs[k])
        if c != 0.0:
            for m in range(1, params.kappa + 1):
                out[m] += c * power.levels[m]
    return _fresh(params, out)


def exp(xi: GradedTensor) -> GroupElement:
    """Truncated exponential; bijection from nilpotent onto group elements."""
    return series_apply(exp_coeffs(xi.params.kappa), xi).as_group()


def log(g: GradedTensor) -> AlgebraElement:
    """Truncated logarithm, inverse of exp.  Requires level 0 exactly 1."""
    if g.levels[0][0] != 1.0:
        raise ValueError("log requires a group element (level 0 == 1)")
    xi = _fresh(g.params, [np.zeros(1), *g.levels[1:]], AlgebraElement)
    return series_apply(log_coeffs(g.params.kappa), xi).as_algebra()


def inverse(g: GradedTensor) -> GroupElement:
    """Group inverse of 1 + xi via the finite geometric series."""
    if g.levels[0][0] != 1.0:
        raise ValueError("inverse requires a group element (level 0 == 1)")
    xi = _fresh(g.params, [np.zeros(1), *g.levels[1:]], AlgebraElement)
    return series_apply(inverse_coeffs(g.params.kappa), xi).as_group()


# ---------------------------------------------------------------------------
# graded operators on the nilpotent part (ad, Ad, and friends)
# ---------------------------------------------------------------------------

class GradedOperator:
    """Degree-nondecreasing linear map on the nilpotent part.

    blocks[(k, j)] is the (d^k x d^j) matrix of the degree-j -> degree-k
    action, stored for every 1 <= j <= k <= kappa.
    """

    __slots__ = ("params", "blocks")

    def __init__(self, params: AlgebraParams, blocks: dict):
        for k in range(1, params.kappa + 1):
            for j in range(1, k + 1):
                blk = blocks.get((k, j))
                if blk is None:
                    blocks[(k, j)] = np.zeros((params.level_dim(k), params.level_dim(j)))
                elif blk.shape != (params.level_dim(k), params.level_dim(j)):
                    raise ValueError(f"block {(k, j)} has shape {blk.shape}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "blocks", blocks)

    def __setattr__(self, name, value):
        raise AttributeError("GradedOperator is immutable")

    @classmethod
    def identity(cls, params: AlgebraParams) -> "GradedOperator":
        blocks = {
            (k, k): np.eye(params.level_dim(k)) for k in range(1, params.kappa + 1)
        }
        return cls(params, blocks)

    @classmethod
    def zero(cls, params: AlgebraParams) -> "GradedOperator":
        return cls(params, {})

    def apply(self, A: GradedTensor) -> AlgebraElement:
        if A.levels[0][0] != 0.0:
            raise ValueError("graded operators act on nilpotent elements only")
        _check_same_params_op(self, A)
        params = self.params
        out = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
        for k in range(1, params.kappa + 1):
            for j in range(1, k + 1):
                blk = self.blocks[(k, j)]
                if blk.any():
                    out[k] += blk @ A.levels[j]
        return AlgebraElement(params, out)

    def compose(self, other: "GradedOperator") -> "GradedOperator":
        """self after other."""
        if self.params != other.params:
            raise ValueError("operator parameter mismatch")
        params = self.params
        blocks = {}
        for k in range(1, params.kappa + 1):
            for j in range(1, k + 1):
                acc = np.zeros((params.level_dim(k), params.level_dim(j)))
                for m in range(j, k + 1):
                    a = self.blocks[(k, m)]
                    b = other.blocks[(m, j)]
                    if a.any() and b.any():
                        acc += a @ b
                blocks[(k, j)] = acc
        return GradedOperator(params, blocks)

    def add(self, other: "GradedOperator") -> "GradedOperator":
        if self.params != other.params:
            raise ValueError("operator parameter mismatch")
        return GradedOperator(
            self.params,
            {key: self.blocks[key] + other.blocks[key] for key in self.blocks},
        )

    def scale(self, c: float) -> "GradedOperator":
        return GradedOperator(self.params, {key: c * blk for key, blk in self.blocks.items()})

    def dense(self) -> np.ndarray:
        """Full matrix on the flattened nilpotent part (degree-major order)."""
        params = self.params
        dims = [params.level_dim(k) for k in range(1, params.kappa + 1)]
        offs = np.concatenate([[0], np.cumsum(dims)])
        n = int(offs[-1])
        M = np.zeros((n, n))
        for k in range(1, params.kappa + 1):
            for j in range(1, k + 1):
                M[offs[k - 1]:offs[k], offs[j - 1]:offs[j]] = self.blocks[(k, j)]
        return M

    def frobenius_distance(self, other: "GradedOperator") -> float:
        if self.params != other.params:
            raise ValueError("operator parameter mismatch")
        acc = 0.0
        for key in self.blocks:
            acc += float(np.sum((self.blocks[key] - other.blocks[key]) ** 2))
        return math.sqrt(acc)

    def is_strictly_raising(self) -> bool:
        return all(not self.blocks[(k, k)].any() for k in range(1, self.params.kappa + 1))


def _check_same_params_op(op: GradedOperator, A: GradedTensor) -> None:
    if op.params != A.params:
        raise ValueError("operator/element parameter mismatch")


def ad_operator(xi: GradedTensor) -> GradedOperator:
    """Matrix form of B -> [xi, B] on the nilpotent part.

    For nilpotent xi the map strictly raises degree, so its kappa-th power
    vanishes; block (k, j) is left-tensoring minus right-tensoring by the
    degree-(k-j) component of xi.
    """
    if xi.levels[0][0] != 0.0:
        raise ValueError("ad requires a nilpotent element")
    params = xi.params
    blocks = {}
    for k in range(1, params.kappa + 1):
        for j in range(1, k):
            u = xi.levels[k - j]
            if u.any():
                col = u.reshape(-1, 1)
                eye = np.eye(params.level_dim(j))
                blocks[(k, j)] = np.kron(col, eye) - np.kron(eye, col)
    return GradedOperator(params, blocks)


def ad_apply(xi: GradedTensor, B: GradedTensor) -> GradedTensor:
    return bracket(xi, B)


def ad_series_apply(coeffs: Sequence[float], xi: GradedTensor, B: GradedTensor) -> AlgebraElement:
    """sum_k coeffs[k] * ad_xi^k B, truncated at power kappa-1.

    ad_xi is nilpotent of order kappa on the positive-degree part, so the
    series needs only kappa coefficients (extra entries are ignored).
    """
    if xi.levels[0][0] != 0.0 or B.levels[0][0] != 0.0:
        raise ValueError("ad series requires nilpotent arguments")
    _check_same_params(xi, B)
    params = xi.params
    out = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
    term = B
    for k in range(min(len(coeffs), params.kappa)):
        if k > 0:
            term = bracket(xi, term)
        c = float(coeffs[k])
        if c != 0.0:
            for m in range(1, params.kappa + 1):
                out[m] += c * term.levels[m]
    return AlgebraElement(params, out)


def operator_exp(op: GradedOperator) -> GradedOperator:
    """Exponential of a strictly degree-raising operator (finite series).

    Such operators are nilpotent (power kappa vanishes), so exp is the exact
    finite sum I + op + op^2/2! + ... + op^(kappa-1)/(kappa-1)!.
    """
    if not op.is_strictly_raising():
        raise ValueError("operator_exp is only defined for strictly degree-raising operators")
    out = GradedOperator.identity(op.params)
    power = op
    fact = 1.0
    for k in range(1, op.params.kappa):
        if k > 1:
            power = power.compose(op)
        fact *= k
        out = out.add(power.scale(1.0 / fact))
    return out


def operator_from_linear_map(
    params: AlgebraParams, fn: Callable[[AlgebraElement], GradedTensor]
) -> GradedOperator:
    """Assemble the GradedOperator of a linear map by probing basis elements.

    The map must be degree-nondecreasing; components it produces below the
    input degree are rejected, catching convention bugs early.
    """
    blocks = {
        (k, j): np.zeros((params.level_dim(k), params.level_dim(j)))
        for k in range(1, params.kappa + 1)
        for j in range(1, k + 1)
    }
    for j in range(1, params.kappa + 1):
        for idx in range(params.level_dim(j)):
            levels = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
            levels[j][idx] = 1.0
            image = fn(AlgebraElement(params, levels))
            for k in range(1, params.kappa + 1):
                blk = image.levels[k]
                if k < j and np.linalg.norm(blk) > 1e-12:
                    raise ValueError("linear map lowered the degree; not a graded operator")
                if k >= j:
                    blocks[(k, j)][:, idx] = blk
    return GradedOperator(params, blocks)


def conjugation_operator(g: GradedTensor) -> GradedOperator:
    """Operator form of B -> g B g^(-1) restricted to the nilpotent part."""
    g_inv = inverse(g)
    return operator_from_linear_map(g.params, lambda B: mul(mul(g, B), g_inv))


# ---------------------------------------------------------------------------
# JSON serialization (used for golden files and CLI reports)
# ---------------------------------------------------------------------------

def to_json_dict(A: GradedTensor) -> dict:
    return {
        "d": A.params.d,
        "kappa": A.params.kappa,
        "levels": [b.tolist() for b in A.levels],
    }


def from_json_dict(data: dict) -> GradedTensor:
    params = AlgebraParams(int(data["d"]), int(data["kappa"]))
    return from_levels(params, data["levels"])


def dumps(A: GradedTensor) -> str:
    return json.dumps(to_json_dict(A))


def loads(text: str) -> GradedTensor:
    return from_json_dict(json.loads(text))
