"""Q-functions, sampled dynamical-system norms, and log-log order fits.

Norm estimation notes.  The sups defining |V|, |DV|, |D2V| and the graded
commutator constants run over all unit Lie elements and (for polynomial
fields on R^n) over an unbounded region, where they are typically infinite.
Everything here is therefore *region-restricted*: maxima over a supplied
point sample and over seeded unit draws, i.e. lower estimates of the
region sups.  Derivatives themselves are exact polynomial evaluations; only
the sup is sampled.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "QSpec",
    "q_eval",
    "NormEstimate",
    "estimate_dyn_norms",
    "fit_slope",
    "ConvergenceReport",
    "build_report",
]


# ---------------------------------------------------------------------------
# Q-functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QSpec:
    """Degree window for Q(lam) = max over integer exponents k in the window.

    Since lam^k is monotone in k for fixed lam, only the endpoints matter:
    Q_[m,n](lam) = max(lam^m, lam^n).  closed_left=False gives the half-open
    window (m, n], i.e. Q_[m+1,n].
    """

    m: int
    n: int
    closed_left: bool = True

    def __post_init__(self):
        if not (1 <= self.m < self.n):
            raise ValueError(f"need 1 <= m < n, got [{self.m}, {self.n}]")

    @property
    def low_exponent(self) -> int:
        return self.m if self.closed_left else self.m + 1

    def label(self) -> str:
        left = "[" if self.closed_left else "("
        return f"Q_{left}{self.m},{self.n}]"


def q_eval(spec: QSpec, lam: float) -> float:
    if lam < 0:
        raise ValueError("Q is only defined for lam >= 0")
    return max(lam ** spec.low_exponent, lam ** spec.n)


# ---------------------------------------------------------------------------
# dynamical-system norm estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormEstimate:
    tag: str            # "V", "DV", "D2V", "C0", "C1", "C0[m,n]", "C1[m,n]"
    value: float
    n_points: int
    n_lie: int
    region: str

    def to_json_dict(self) -> dict:
        return {
            "tag": self.tag,
            "value": self.value,
            "n_points": self.n_points,
            "n_lie": self.n_lie,
            "region": self.region,
        }


def _batch_spectral(mats: np.ndarray) -> np.ndarray:
    """Largest singular value per leading index of a (p, a, b) stack."""
    return np.linalg.svd(mats, compute_uv=False)[..., 0]


def estimate_dyn_norms(sys, region_points, lie_samples: int = 200, seed: int = 0,
                       region: str = "sampled") -> dict:
    """Sampled |V|, |DV|, |D2V| and graded commutator constants C0, C1.

    |V| is the max of |V_A(x)| over unit Lie draws A and region points x;
    |DV| and |D2V| are the corresponding spectral norms of the Jacobian and
    of the (n, n^2)-matricized Hessian (the latter dominates the bilinear
    operator norm, so downstream inequalities stay one-sided).

    C0[m,n] samples unit elements of homogeneous degrees m and n with
    kappa < m+n <= 2*kappa and takes the max of |[V_A, V_B](x)|; C1[m,n]
    does the same for the bracket's Jacobian; C0/C1 are the sums over
    ordered degree pairs.  Pair draws are folded back into the |V|, |DV|,
    |D2V| pools and share the point set, so

        C0 <= kappa*(kappa+1) * |V| * |DV|
        C1 <= kappa*(kappa+1) * (|D2V| * |V| + |DV|**2)

    hold by construction: each bracket summand is dominated pointwise by the
    pooled factors and there are kappa*(kappa+1)/2 ordered pairs, each
    contributing at most two such products.

    Per-section child seeds keep every draw sequence a prefix of any longer
    run, so enlarging lie_samples or the point set never decreases a value.
    """
    pts = np.atleast_2d(np.asarray(region_points, dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one region point")
    if lie_samples < 1:
        raise ValueError("need at least one unit Lie draw")
    basis = sys.basis
    kappa = basis.params.kappa
    n = sys.manifold.ambient_dim
    if pts.shape[1] != n:
        raise ValueError(f"points have dimension {pts.shape[1]}, system expects {n}")

    def field_data(A):
        V = sys.extend(A)
        return V(pts), V.jacobian_at(pts), V.hessian_at(pts)

    sup = {"V": 0.0, "DV": 0.0, "D2V": 0.0}

    def absorb(vals, jac, hess):
        sup["V"] = max(sup["V"], float(np.linalg.norm(vals, axis=-1).max()))
        sup["DV"] = max(sup["DV"], float(_batch_spectral(jac).max()))
        sup["D2V"] = max(sup["D2V"], float(_batch_spectral(hess.reshape(-1, n, n * n)).max()))

    windows = [(m, nn) for m in range(1, kappa + 1) for nn in range(m, kappa + 1)
               if m + nn > kappa]
    children = np.random.SeedSequence(seed).spawn(1 + len(windows))

    rng = np.random.default_rng(children[0])
    for _ in range(lie_samples):
        absorb(*field_data(basis.random_unit(rng)))
    pool_lie = lie_samples

    pair_c0, pair_c1, pair_counts = {}, {}, {}
    for (m, nn), child in zip(windows, children[1:]):
        if basis.degree_dims[m - 1] == 0 or basis.degree_dims[nn - 1] == 0:
            pair_c0[(m, nn)], pair_c1[(m, nn)], pair_counts[(m, nn)] = 0.0, 0.0, 0
            continue
        rng = np.random.default_rng(child)
        c0 = c1 = 0.0
        for _ in range(lie_samples):
            A = basis.random_unit(rng, degree=m)
            B = basis.random_unit(rng, degree=nn)
            vA, jA, hA = field_data(A)
            vB, jB, hB = field_data(B)
            absorb(vA, jA, hA)
            absorb(vB, jB, hB)
            pool_lie += 2
            # [V_A, V_B](x) = DV_B(x) V_A(x) - DV_A(x) V_B(x), exactly
            bval = np.einsum("pij,pj->pi", jB, vA) - np.einsum("pij,pj->pi", jA, vB)
            bjac = (np.einsum("pijk,pj->pik", hB, vA) + jB @ jA
                    - np.einsum("pijk,pj->pik", hA, vB) - jA @ jB)
            c0 = max(c0, float(np.linalg.norm(bval, axis=-1).max()))
            c1 = max(c1, float(_batch_spectral(bjac).max()))
        pair_c0[(m, nn)], pair_c1[(m, nn)] = c0, c1
        pair_counts[(m, nn)] = 2 * lie_samples

    n_pts = pts.shape[0]
    out = {
        tag: NormEstimate(tag, sup[tag], n_pts, pool_lie, region)
        for tag in ("V", "DV", "D2V")
    }
    # the double sum runs over ordered pairs; brackets are antisymmetric so
    # the mirrored window reuses the same estimate
    total_c0 = total_c1 = 0.0
    total_pairs = 0
    for (m, nn) in windows:
        mult = 1 if m == nn else 2
        total_c0 += mult * pair_c0[(m, nn)]
        total_c1 += mult * pair_c1[(m, nn)]
        total_pairs += mult * pair_counts[(m, nn)]
        for key in ({(m, nn), (nn, m)}):
            out[f"C0[{key[0]},{key[1]}]"] = NormEstimate(
                f"C0[{key[0]},{key[1]}]", pair_c0[(m, nn)], n_pts,
                pair_counts[(m, nn)], region)
            out[f"C1[{key[0]},{key[1]}]"] = NormEstimate(
                f"C1[{key[0]},{key[1]}]", pair_c1[(m, nn)], n_pts,
                pair_counts[(m, nn)], region)
    out["C0"] = NormEstimate("C0", total_c0, n_pts, total_pairs, region)
    out["C1"] = NormEstimate("C1", total_c1, n_pts, total_pairs, region)
    return out


# ---------------------------------------------------------------------------
# order extraction
# ---------------------------------------------------------------------------

def fit_slope(lambdas, distances) -> tuple[float, float]:
    """Least-squares slope of log(distance) vs log(lambda) and RMS residual.

    Nonpositive distances carry no order information and are dropped; at
    least three usable pairs are required for a meaningful line.
    """
    lam = np.asarray(lambdas, dtype=float)
    dist = np.asarray(distances, dtype=float)
    if lam.shape != dist.shape or lam.ndim != 1:
        raise ValueError("lambdas and distances must be equal-length 1-d")
    if np.any(lam <= 0):
        raise ValueError("lambda values must be positive")
    keep = dist > 0
    if int(keep.sum()) < 3:
        raise ValueError("need at least 3 positive distances for a slope fit")
    x = np.log(lam[keep])
    y = np.log(dist[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid ** 2)))


@dataclass(frozen=True)
class ConvergenceReport:
    """Distances over a decreasing lambda grid with a fitted order.

    slope is None when fewer than three grid points survive the positivity
    and noise-floor filters (e.g. an exact model where every distance sits
    at integrator noise); excluded rows keep a note saying why.
    """

    lambdas: tuple
    distances: tuple
    used: tuple
    notes: tuple
    slope: Optional[float]
    residual: Optional[float]
    noise_floor: float
    metadata: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)   # name -> per-row tuple

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("need a nonempty lambda grid")
        if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
            raise ValueError("lambda grid must be positive and strictly decreasing")
        for name, col in self.extras.items():
            if len(col) != lam.size:
                raise ValueError(f"extra column {name!r} has wrong length")

    def running_slopes(self) -> list:
        """Consecutive-pair slopes; None where either endpoint is excluded."""
        out = [None]
        for i in range(1, len(self.lambdas)):
            if self.used[i] and self.used[i - 1]:
                out.append(
                    math.log(self.distances[i] / self.distances[i - 1])
                    / math.log(self.lambdas[i] / self.lambdas[i - 1])
                )
            else:
                out.append(None)
        return out

    def to_json_dict(self) -> dict:
        return {
            "lambdas": list(self.lambdas),
            "distances": list(self.distances),
            "used": list(self.used),
            "notes": list(self.notes),
            "running_slopes": self.running_slopes(),
            "slope": self.slope,
            "residual": self.residual,
            "noise_floor": self.noise_floor,
            "metadata": self.metadata,
            "extras": {k: list(v) for k, v in self.extras.items()},
        }

    def to_csv(self) -> str:
        cols = ["lambda", "distance", "running_slope"] + sorted(self.extras)
        lines = [",".join(cols)]
        slopes = self.running_slopes()
        for i in range(len(self.lambdas)):
            row = ["%.17g" % self.lambdas[i], "%.17g" % self.distances[i],
                   "" if slopes[i] is None else "%.17g" % slopes[i]]
            for name in sorted(self.extras):
                row.append("%.17g" % self.extras[name][i])
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def build_report(lambdas, distances, noise_floor: float = 0.0,
                 metadata: Optional[dict] = None,
                 extras: Optional[dict] = None) -> ConvergenceReport:
    """Filter a distance table by positivity and noise floor, then fit."""
    lam = np.asarray(lambdas, dtype=float)
    dist = np.asarray(distances, dtype=float)
    if lam.shape != dist.shape:
        raise ValueError("lambdas and distances must have equal length")
    used, notes = [], []
    for d in dist:
        if d <= 0:
            used.append(False)
            notes.append("zero distance excluded from fit")
        elif d <= noise_floor:
            used.append(False)
            notes.append(f"below noise floor {noise_floor:.3g}")
        else:
            used.append(True)
            notes.append("")
    kept = int(np.sum(used))
    if kept >= 3:
        slope, residual = fit_slope(lam[np.array(used)], dist[np.array(used)])
    else:
        slope = residual = None
    return ConvergenceReport(
        lambdas=tuple(float(v) for v in lam),
        distances=tuple(float(v) for v in dist),
        used=tuple(used),
        notes=tuple(notes),
        slope=slope,
        residual=residual,
        noise_floor=float(noise_floor),
        metadata=dict(metadata or {}),
        extras={k: tuple(float(x) for x in v) for k, v in (extras or {}).items()},
    )
