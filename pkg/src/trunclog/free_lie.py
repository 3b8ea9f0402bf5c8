"""Hall basis (Lyndon words) of the free nilpotent Lie algebra inside the
truncated tensor algebra, with projection, coordinates, and truncated BCH.

The degree-k slice of the free Lie algebra embeds into the degree-k tensor
block, so the embedding matrix is block diagonal by degree and projection
reduces to a per-degree least-squares solve.  Pseudo-inverses are computed
once at construction; a rank check there guards against a broken basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import tensor_algebra as ta

__all__ = [
    "HallWord",
    "HallBasis",
    "LieCoordinates",
    "LieProjectionError",
    "build_hall_basis",
    "project_to_lie",
    "lie_bracket",
    "bch",
    "random_lie",
    "witt_dimension",
    "lyndon_words",
]

LIE_RESIDUAL_TOL = 1e-10  # scaled by max(1, |element|)


class LieProjectionError(RuntimeError):
    """A value that had to be a Lie element failed the projection residual."""


@dataclass(frozen=True)
class HallWord:
    """A Lyndon word with its standard bracketing.

    degree-1 words are bare generators; longer words carry the standard
    factorization w = left*right with right the longest proper Lyndon suffix.
    """

    word: tuple  # letters 0..d-1
    left: Optional["HallWord"] = None
    right: Optional["HallWord"] = None

    @property
    def degree(self) -> int:
        return len(self.word)

    @property
    def letter(self) -> Optional[int]:
        return self.word[0] if len(self.word) == 1 else None

    def bracket_string(self) -> str:
        if self.letter is not None:
            return str(self.letter + 1)
        return f"[{self.left.bracket_string()},{self.right.bracket_string()}]"

    def __repr__(self):
        return f"HallWord({self.bracket_string()})"


def lyndon_words(d: int, max_len: int) -> list[tuple]:
    """All Lyndon words over {0..d-1} of length <= max_len, lexicographic."""
    if d == 1:
        # single letter: the only Lyndon word is (0,)
        return [(0,)] if max_len >= 1 else []
    out = []
    w = [0]
    while w:
        out.append(tuple(w))
        w = [w[i % len(w)] for i in range(max_len)]
        while w and w[-1] == d - 1:
            w.pop()
        if w:
            w[-1] += 1
    return out


def _standard_factorization(word: tuple) -> tuple:
    """Split a Lyndon word of length >= 2 as u*v, v the least proper suffix."""
    n = len(word)
    v = min(word[i:] for i in range(1, n))
    return word[: n - len(v)], v


@lru_cache(maxsize=None)
def _hall_word(word: tuple) -> HallWord:
    if len(word) == 1:
        return HallWord(word)
    u, v = _standard_factorization(word)
    return HallWord(word, _hall_word(u), _hall_word(v))


def _mobius(n: int) -> int:
    if n == 1:
        return 1
    result, m, p = 1, n, 2
    while p * p <= m:
        if m % p == 0:
            m //= p
            if m % p == 0:
                return 0
            result = -result
        p += 1
    if m > 1:
        result = -result
    return result


def witt_dimension(d: int, k: int) -> int:
    """Number of degree-k basis words: (1/k) sum_{j|k} mu(j) d^(k/j)."""
    total = sum(_mobius(j) * d ** (k // j) for j in range(1, k + 1) if k % j == 0)
    assert total % k == 0
    return total // k


class HallBasis:
    """Ordered Lyndon-word basis with its tensor embedding, per degree."""

    __slots__ = (
        "params",
        "words",
        "degrees",
        "degree_dims",
        "_slices",
        "_embed",
        "_pinv",
        "_qr",
    )

    def __init__(self, params: ta.AlgebraParams):
        words = [

            _hall_word(w)
            for w in sorted(lyndon_words(params.d, params.kappa), key=lambda w: (len(w), w))
        ]
        degrees = np.array([w.degree for w in words], dtype=int)
        degree_dims = [int(np.sum(degrees == k)) for k in range(1, params.kappa + 1)]
        for k in range(1, params.kappa + 1):
            expected = witt_dimension(params.d, k)
            if degree_dims[k - 1] != expected:
                raise AssertionError(
                    f"degree-{k} word count {degree_dims[k - 1]} != Witt number {expected}"
                )

        slices, embed, pinv, qr = {}, {}, {}, {}
        start = 0
        for k in range(1, params.kappa + 1):
            nk = degree_dims[k - 1]
            slices[k] = slice(start, start + nk)
            cols = np.zeros((params.level_dim(k), nk))
            for i, w in enumerate(words[start : start + nk]):
                cols[:, i] = _embed_word(params, w).levels[k]
            if nk:
                sv = np.linalg.svd(cols, compute_uv=False)
                if sv[-1] <= 1e-10 * max(sv[0], 1.0):
                    raise np.linalg.LinAlgError(
                        f"degree-{k} embedding is rank deficient (basis construction bug)"
                    )
                pinv[k] = np.linalg.pinv(cols)
                q, r = np.linalg.qr(cols)
                qr[k] = (q, r)
            else:
                pinv[k] = np.zeros((0, params.level_dim(k)))
                qr[k] = (np.zeros((params.level_dim(k), 0)), np.zeros((0, 0)))
            embed[k] = cols
            start += nk

        object.__setattr__(self, "params", params)
        object.__setattr__(self, "words", tuple(words))
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "degree_dims", tuple(degree_dims))
        object.__setattr__(self, "_slices", slices)
        object.__setattr__(self, "_embed", embed)
        object.__setattr__(self, "_pinv", pinv)
        object.__setattr__(self, "_qr", qr)

    def __setattr__(self, name, value):
        raise AttributeError("HallBasis is immutable")

    def __len__(self):
        return len(self.words)

    def degree_slice(self, k: int) -> slice:
        return self._slices[k]

    def embed_matrix(self, k: int) -> np.ndarray:
        return self._embed[k]

    def to_tensor(self, coords: np.ndarray) -> ta.AlgebraElement:
        params = self.params
        levels = [np.zeros(params.level_dim(k)) for k in range(params.kappa + 1)]
        for k in range(1, params.kappa + 1):
            ck = coords[self._slices[k]]
            if ck.size and np.any(ck):
                levels[k] = self._embed[k] @ ck
        return ta.AlgebraElement(params, levels)

    def project(self, A: ta.GradedTensor) -> tuple[np.ndarray, float]:
        """Least-squares Hall coordinates of A and the projection residual."""
        if A.params != self.params:
            raise ValueError("algebra parameter mismatch")
        if A.levels[0][0] != 0.0:
            raise ValueError("only nilpotent elements can be projected onto the Lie algebra")
        coords = np.zeros(len(self.words))
        res_sq = 0.0
        for k in range(1, self.params.kappa + 1):
            block = A.levels[k]
            ck = self._pinv[k] @ block
            coords[self._slices[k]] = ck
            diff = block - self._embed[k] @ ck
            res_sq += float(np.dot(diff, diff))
        return coords, math.sqrt(max(res_sq, 0.0))

    def random_unit(self, rng: np.random.Generator, degree: Optional[int] = None) -> "LieCoordinates":
        """Uniform direction on the unit sphere of the embedded Lie subspace.

        Drawn through the per-degree orthonormal frames so the embedding norm
        of the result is exactly the norm of the Gaussian draw; restricting
        `degree` samples within a single homogeneous component.
        """
        coords = np.zeros(len(self.words))
        z_all = []
        ks = [degree] if degree is not None else range(1, self.params.kappa + 1)
        for k in ks:
            nk = self.degree_dims[k - 1]
            if nk == 0:
                continue
            z = rng.standard_normal(nk)
            z_all.append(z)
            q, r = self._qr[k]
            coords[self._slices[k]] = np.linalg.solve(r, z)
        flat = np.concatenate(z_all) if z_all else np.zeros(0)
        nrm = float(np.linalg.norm(flat))
        if nrm == 0.0:
            raise ValueError("no basis words at the requested degree")
        return LieCoordinates(self, coords / nrm)

    def dump_json(self) -> str:
        entries = [
            {
                "degree": w.degree,
                "word": "".join(str(c + 1) for c in w.word),
                "bracketing": w.bracket_string(),
                "column": _embed_word(self.params, w).levels[w.degree].tolist(),
            }
            for w in self.words
        ]
        return json.dumps({"d": self.params.d, "kappa": self.params.kappa, "words": entries}, indent=1)


def _embed_word(params: ta.AlgebraParams, w: HallWord) -> ta.AlgebraElement:
    if w.letter is not None:
        return ta.basis_vector(params, w.letter)
    left = _embed_word(params, w.left)
    right = _embed_word(params, w.right)
    return ta.bracket(left, right).as_algebra()


def build_hall_basis(params: ta.AlgebraParams) -> HallBasis:
    return HallBasis(params)


class LieCoordinates:
    """Coefficient vector over a HallBasis; supports the linear ops an ODE
    integrator needs plus embedding back into the tensor algebra."""

    __slots__ = ("basis", "coords")

    def __init__(self, basis: HallBasis, coords: Sequence[float]):
        arr = np.asarray(coords, dtype=float)
        if arr.shape != (len(basis.words),):
            raise ValueError(f"expected {len(basis.words)} coordinates, got {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coords", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LieCoordinates is immutable")

    @classmethod
    def zero(cls, basis: HallBasis) -> "LieCoordinates":
        return cls(basis, np.zeros(len(basis.words)))

    def to_tensor(self) -> ta.AlgebraElement:
        return self.basis.to_tensor(self.coords)

    def norm(self) -> float:
        return ta.norm(self.to_tensor())

    def dilate(self, lam: float) -> "LieCoordinates":
        scaled = self.coords * (float(lam) ** self.basis.degrees)
        return LieCoordinates(self.basis, scaled)

    def __add__(self, other: "LieCoordinates") -> "LieCoordinates":
        _same_basis(self, other)
        return LieCoordinates(self.basis, self.coords + other.coords)

    def __sub__(self, other: "LieCoordinates") -> "LieCoordinates":
        _same_basis(self, other)
        return LieCoordinates(self.basis, self.coords - other.coords)

    def __rmul__(self, c: float) -> "LieCoordinates":
        return LieCoordinates(self.basis, float(c) * self.coords)

    def __neg__(self) -> "LieCoordinates":
        return LieCoordinates(self.basis, -self.coords)

    def __repr__(self):
        return f"<LieCoordinates n={len(self.coords)} |.|={np.linalg.norm(self.coords):.3g}>"


def _same_basis(a: LieCoordinates, b: LieCoordinates) -> None:
    if a.basis is not b.basis and a.basis.params != b.basis.params:
        raise ValueError("Hall basis mismatch")


def project_to_lie(A: ta.GradedTensor, basis: HallBasis) -> tuple[LieCoordinates, float]:
    coords, residual = basis.project(A)
    return LieCoordinates(basis, coords), residual


def require_lie(A: ta.GradedTensor, basis: HallBasis, tol: float = LIE_RESIDUAL_TOL) -> LieCoordinates:
    """Project and insist the residual is consistent with A being Lie."""
    coords, residual = basis.project(A)
    scale = max(1.0, ta.norm(A))
    if residual > tol * scale:
        raise LieProjectionError(
            f"projection residual {residual:.3e} exceeds {tol:.1e} x {scale:.3e}"
        )
    return LieCoordinates(basis, coords)


def lie_bracket(A: LieCoordinates, B: LieCoordinates) -> LieCoordinates:
    """[A, B] in Hall coordinates (tensor commutator, then projection).

    The commutator of Lie elements stays in the Lie subspace even after
    degree truncation, so the residual check only guards arithmetic.
    """
    _same_basis(A, B)
    return require_lie(ta.bracket(A.to_tensor(), B.to_tensor()), A.basis, LIE_RESIDUAL_TOL)


def bch(A: LieCoordinates, B: LieCoordinates) -> LieCoordinates:
    """Truncated log(exp(A) exp(B)), computed at tensor level and projected.

    The projection doubles as a self-check: the combined logarithm must be a
    Lie element, so a residual above tolerance signals an arithmetic bug.
    """
    _same_basis(A, B)
    g = ta.mul(ta.exp(A.to_tensor()), ta.exp(B.to_tensor()))
    return require_lie(ta.log(g), A.basis, LIE_RESIDUAL_TOL)


def random_lie(
    basis: HallBasis,
    seed=None,
    unit_norm: bool = False,
    degree_profile: Optional[Sequence[float]] = None,
    rng: Optional[np.random.Generator] = None,
) -> LieCoordinates:
    """Reproducible pseudo-random element.

    degree_profile scales the degree-k coordinate block by profile[k-1]
    (length kappa); unit_norm rescales so the tensor-embedding norm is 1.
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    coords = rng.standard_normal(len(basis.words))
    if degree_profile is not None:
        profile = np.asarray(degree_profile, dtype=float)
        if profile.shape != (basis.params.kappa,):
            raise ValueError(f"degree profile must have length {basis.params.kappa}")
        coords = coords * profile[basis.degrees - 1]
    elem = LieCoordinates(basis, coords)
    if unit_norm:
        nrm = elem.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero element")
        elem = (1.0 / nrm) * elem
    return elem
