"""Seeded two-class Gaussian generators and the Bayes-rule oracle.

Every design used by the experiments is built here: the 12-variable
direction-stability example, the one-dimensional imbalance example, the
increasing-dimension study, the covariance-structure study and the
block-interchangeable comparison.  Sampling uses numpy's PCG64 bit generator
and a Cholesky factor of the covariance, so a seed reproduces the same
matrix on every platform numpy supports.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve

from .core import InvalidArgument, LabeledDataset, LinearModel

__all__ = [
    "CovarianceKind",
    "CovarianceSpec",
    "TwoClassGaussianSpec",
    "make_covariance",
    "scale_mean_to_mahalanobis",
    "mahalanobis_sq",
    "sample_two_class",
    "bayes_rule",
    "spec_bayes_rule",
    "split_sizes",
    "proportional_blocks",
    "direction_stability_spec",
    "one_dim_imbalance_spec",
    "increasing_dimension_spec",
    "covariance_structure_spec",
    "block_comparison_spec",
    "placeholder_expression_corpus",
]


class CovarianceKind(str, enum.Enum):
    IDENTITY = "identity"
    INTERCHANGEABLE = "interchangeable"
    BLOCK_INTERCHANGEABLE = "block_interchangeable"


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance structure: identity, interchangeable, or block-interchangeable.

    Interchangeable blocks have unit diagonal and constant off-diagonal
    ``rho``; positive definiteness needs ``-1/(size-1) < rho < 1`` for every
    block.
    """

    kind: CovarianceKind
    d: int
    rho: float = 0.0
    blocks: tuple = ()

    def __post_init__(self):
        kind = CovarianceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.d) != self.d or self.d < 1:
            raise InvalidArgument(f"d must be a positive integer, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        rho = float(self.rho)
        object.__setattr__(self, "rho", rho)
        if kind is CovarianceKind.IDENTITY:
            return
        sizes = self.block_sizes
        if any(b < 1 for b in sizes) or sum(sizes) != self.d:
            raise InvalidArgument(f"block sizes {sizes} must be positive and sum to d={self.d}")
        largest = max(sizes)
        lower = -1.0 / (largest - 1) if largest > 1 else -math.inf
        if not (lower < rho < 1.0):
            raise InvalidArgument(
                f"rho={rho} is not positive definite for block size {largest}; "
                f"need {lower:g} < rho < 1"
            )

    @property
    def block_sizes(self) -> tuple:
        if self.kind is CovarianceKind.INTERCHANGEABLE:
            return (self.d,)
        if self.kind is CovarianceKind.BLOCK_INTERCHANGEABLE:
            return self.blocks
        return ()

    @classmethod
    def identity(cls, d: int) -> "CovarianceSpec":
        return cls(CovarianceKind.IDENTITY, d)

    @classmethod
    def interchangeable(cls, d: int, rho: float) -> "CovarianceSpec":
        return cls(CovarianceKind.INTERCHANGEABLE, d, rho)

    @classmethod
    def block_interchangeable(cls, blocks: Sequence[int], rho: float) -> "CovarianceSpec":
        blocks = tuple(int(b) for b in blocks)
        return cls(CovarianceKind.BLOCK_INTERCHANGEABLE, sum(blocks), rho, blocks)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "d": self.d, "rho": self.rho, "blocks": list(self.blocks)}

    @classmethod
    def from_dict(cls, payload: dict) -> "CovarianceSpec":
        return cls(payload["kind"], payload["d"], payload.get("rho", 0.0), tuple(payload.get("blocks", ())))


def make_covariance(spec: CovarianceSpec) -> np.ndarray:
    """Dense covariance matrix for ``spec``; verified positive definite."""
    d = spec.d
    if spec.kind is CovarianceKind.IDENTITY:
        return np.eye(d)
    sigma = np.zeros((d, d))
    start = 0
    for size in spec.block_sizes:
        blk = np.full((size, size), spec.rho)
        np.fill_diagonal(blk, 1.0)
        sigma[start:start + size, start:start + size] = blk
        start += size
    try:
        np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgument(f"covariance {spec} is not positive definite") from exc
    return sigma


def _as_cov(sigma) -> np.ndarray:
    if isinstance(sigma, CovarianceSpec):
        return make_covariance(sigma)
    arr = np.asarray(sigma, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidArgument("covariance must be a square matrix")
    return arr


def _cho(sigma: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgument("covariance is not positive definite") from exc


def _solve(sigma: np.ndarray, v: np.ndarray) -> np.ndarray:
    return cho_solve((_cho(sigma), True), v)


def mahalanobis_sq(mu_plus, mu_minus, sigma) -> float:
    """``(mu+ - mu-)' Sigma^{-1} (mu+ - mu-)``."""
    sigma = _as_cov(sigma)
    diff = np.asarray(mu_plus, float) - np.asarray(mu_minus, float)
    return float(diff @ _solve(sigma, diff))


def scale_mean_to_mahalanobis(mu1, sigma, target: float) -> np.ndarray:
    """Return ``c * mu1`` (``c > 0``) so that means ``+-c mu1`` are ``target`` apart.

    The distance is the squared Mahalanobis distance
    ``(2c mu1)' Sigma^{-1} (2c mu1)``.
    """
    mu1 = np.asarray(mu1, dtype=float)
    sigma = _as_cov(sigma)
    if not (target > 0 and math.isfinite(target)):
        raise InvalidArgument("target distance must be positive and finite")
    if not np.any(mu1 != 0):
        raise InvalidArgument("mu1 must be non-zero")
    if sigma.shape != (mu1.size, mu1.size):
        raise InvalidArgument("mu1 and sigma dimensions differ")
    q = float(mu1 @ _solve(sigma, mu1))
    c = math.sqrt(target / (4.0 * q))
    return c * mu1


@dataclass(frozen=True)
class TwoClassGaussianSpec:
    """Two Gaussian populations ``MVN(mu+-, Sigma)`` with sample sizes and a seed."""

    mu_plus: np.ndarray
    mu_minus: np.ndarray
    covariance: CovarianceSpec
    n_plus: int
    n_minus: int
    seed: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        mp = np.array(self.mu_plus, dtype=float).reshape(-1)
        mm = np.array(self.mu_minus, dtype=float).reshape(-1)
        if mp.shape != mm.shape or mp.size != self.covariance.d:
            raise InvalidArgument(
                f"dimension mismatch: mu+ {mp.size}, mu- {mm.size}, covariance {self.covariance.d}"
            )
        if not (np.all(np.isfinite(mp)) and np.all(np.isfinite(mm))):
            raise InvalidArgument("means must be finite")
        if int(self.n_plus) < 1 or int(self.n_minus) < 1:
            raise InvalidArgument("n_plus and n_minus must be at least 1")
        for arr in (mp, mm):
            arr.setflags(write=False)
        object.__setattr__(self, "mu_plus", mp)
        object.__setattr__(self, "mu_minus", mm)
        object.__setattr__(self, "n_plus", int(self.n_plus))
        object.__setattr__(self, "n_minus", int(self.n_minus))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def d(self) -> int:
        return self.covariance.d

    @property
    def imbalance(self) -> float:
        return self.n_minus / self.n_plus

    def with_(self, **changes) -> "TwoClassGaussianSpec":
        return replace(self, **changes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TwoClassGaussianSpec):
            return NotImplemented
        return (
            np.array_equal(self.mu_plus, other.mu_plus)
            and np.array_equal(self.mu_minus, other.mu_minus)
            and self.covariance == other.covariance
            and (self.n_plus, self.n_minus, self.seed) == (other.n_plus, other.n_minus, other.seed)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "mu_plus": self.mu_plus.tolist(),
            "mu_minus": self.mu_minus.tolist(),
            "covariance": self.covariance.to_dict(),
            "n_plus": self.n_plus,
            "n_minus": self.n_minus,
            "seed": self.seed,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TwoClassGaussianSpec":
        return cls(
            mu_plus=np.asarray(payload["mu_plus"], float),
            mu_minus=np.asarray(payload["mu_minus"], float),
            covariance=CovarianceSpec.from_dict(payload["covariance"]),
            n_plus=payload["n_plus"],
            n_minus=payload["n_minus"],
            seed=payload.get("seed", 0),
            name=payload.get("name", ""),
        )


def sample_two_class(spec: TwoClassGaussianSpec, seed: Optional[int] = None) -> LabeledDataset:
    """Draw ``n+`` rows labelled +1 then ``n-`` rows labelled -1.

    ``seed`` overrides ``spec.seed``; equal seeds give bit-identical data.
    """
    seed = spec.seed if seed is None else int(seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    sigma = make_covariance(spec.covariance)
    d = spec.d
    if spec.covariance.kind is CovarianceKind.IDENTITY:
        zp = rng.standard_normal((spec.n_plus, d))
        zm = rng.standard_normal((spec.n_minus, d))
    else:
        L = _cho(sigma)
        zp = rng.standard_normal((spec.n_plus, d)) @ L.T
        zm = rng.standard_normal((spec.n_minus, d)) @ L.T
    X = np.vstack([zp + spec.mu_plus, zm + spec.mu_minus])
    y = np.concatenate([np.ones(spec.n_plus, int), -np.ones(spec.n_minus, int)])
    return LabeledDataset(X, y)


def bayes_rule(mu_plus, mu_minus, sigma) -> LinearModel:
    """``w_B = Sigma^{-1}(mu+ - mu-)``, ``beta_B = -(mu+ + mu-)' w_B / 2``."""
    mp = np.asarray(mu_plus, float).reshape(-1)
    mm = np.asarray(mu_minus, float).reshape(-1)
    sigma = _as_cov(sigma)
    if sigma.shape != (mp.size, mp.size) or mm.shape != mp.shape:
        raise InvalidArgument("means and covariance dimensions differ")
    w = _solve(sigma, mp - mm)
    beta = -0.5 * float((mp + mm) @ w)
    return LinearModel(w, beta)


def spec_bayes_rule(spec: TwoClassGaussianSpec) -> LinearModel:
    return bayes_rule(spec.mu_plus, spec.mu_minus, make_covariance(spec.covariance))


# --------------------------------------------------------------------------
# experiment designs
# --------------------------------------------------------------------------
def split_sizes(n_total: int, m: float) -> tuple:
    """Minority and majority sizes with ``n- / n+ = m`` and ``n+ + n- = n_total``."""
    if m < 1:
        raise InvalidArgument("imbalance factor m must be >= 1")
    n_plus = int(round(n_total / (1.0 + m)))
    n_plus = max(1, n_plus)
    return n_plus, n_total - n_plus


def proportional_blocks(d: int, fractions: Sequence[float]) -> tuple:
    """Block sizes ``floor(f * d)`` with the remainder added to the last block."""
    sizes = [int(math.floor(f * d)) for f in fractions]
    sizes[-1] += d - sum(sizes)
    if any(s < 1 for s in sizes):
        raise InvalidArgument(f"d={d} too small for block fractions {tuple(fractions)}")
    return tuple(sizes)


def direction_stability_spec(seed: int = 0, d: int = 12, n_per_class: int = 120,
                             shift: float = 3.0) -> TwoClassGaussianSpec:
    """Twelve independent unit-variance variables; the means differ only in the
    first three coordinates, where ``mu+- = +-shift/2``.

    The size of the mean difference is not given for this example; ``shift``
    is a free choice (see the decisions log).
    """
    mu = np.zeros(d)
    mu[:3] = 0.5 * shift
    return TwoClassGaussianSpec(mu, -mu, CovarianceSpec.identity(d), n_per_class, n_per_class, seed,
                                name="direction_stability")


def one_dim_imbalance_spec(m: int, seed: int = 0, n_plus: int = 100,
                           mean: float = 2.0) -> TwoClassGaussianSpec:
    """One variable, ``N(+mean, 1)`` for the minority and ``N(-mean, 1)`` for the
    majority, with ``n- = m n+``.  The Bayes boundary sits at 0."""
    return TwoClassGaussianSpec([mean], [-mean], CovarianceSpec.identity(1), n_plus, int(m) * n_plus,
                                seed, name="one_dim_imbalance")


def increasing_dimension_spec(d: int, m: float, seed: int = 0, n_total: int = 240,
                              norm: float = 2.7) -> TwoClassGaussianSpec:
    """Identity covariance, ``mu+- = +-mu0`` with ``mu0 ~ (d, d-1, ..., 1)`` scaled to ``norm``."""
    mu0 = np.arange(d, 0, -1, dtype=float)
    mu0 *= norm / np.linalg.norm(mu0)
    n_plus, n_minus = split_sizes(n_total, m)
    return TwoClassGaussianSpec(mu0, -mu0, CovarianceSpec.identity(d), n_plus, n_minus, seed,
                                name="increasing_dimension")


_PAPER_BLOCKS = (150, 100, 25, 15, 10)


def covariance_structure_spec(kind: str, m: float, seed: int = 0, d: int = 300, n_total: int = 240,
                              rho: float = 0.8, distance: float = 5.4) -> TwoClassGaussianSpec:
    """Covariance-structure design.

    ``mu1 = (k, k-1, ..., 1, 0, ..., 0)`` with ``k = d/4`` (75 at d=300), scaled
    so the squared Mahalanobis distance between ``+-c mu1`` equals
    ``distance``.  For the block-interchangeable kind the five block sizes
    150, 100, 25, 15, 10 are used at d=300 and rescaled proportionally
    otherwise.
    """
    kind = CovarianceKind(kind)
    if kind is CovarianceKind.IDENTITY:
        cov = CovarianceSpec.identity(d)
    elif kind is CovarianceKind.INTERCHANGEABLE:
        cov = CovarianceSpec.interchangeable(d, rho)
    else:
        blocks = _PAPER_BLOCKS if d == 300 else proportional_blocks(d, [b / 300 for b in _PAPER_BLOCKS])
        cov = CovarianceSpec.block_interchangeable(blocks, rho)
    k = max(1, int(round(d / 4)))
    mu1 = np.zeros(d)
    mu1[:k] = np.arange(k, 0, -1, dtype=float)
    mu = scale_mean_to_mahalanobis(mu1, make_covariance(cov), distance)
    n_plus, n_minus = split_sizes(n_total, m)
    return TwoClassGaussianSpec(mu, -mu, cov, n_plus, n_minus, seed, name=f"covariance_{kind.value}")


def block_comparison_spec(d: int, seed: int = 0, m: float = 3, n_total: int = 240, rho: float = 0.8,
                          distance: float = 5.4) -> TwoClassGaussianSpec:
    """Block-interchangeable design with three blocks of 50%, 25%, 25% of ``d``.

    The first block is ``floor(d/2)``, the second ``floor(d/4)`` and the last
    takes the remainder.  Means as in :func:`covariance_structure_spec`.
    """
    blocks = proportional_blocks(d, (0.5, 0.25, 0.25))
    cov = CovarianceSpec.block_interchangeable(blocks, rho)
    k = max(1, int(round(d / 4)))
    mu1 = np.zeros(d)
    mu1[:k] = np.arange(k, 0, -1, dtype=float)
    mu = scale_mean_to_mahalanobis(mu1, make_covariance(cov), distance)
    n_plus, n_minus = split_sizes(n_total, m)
    return TwoClassGaussianSpec(mu, -mu, cov, n_plus, n_minus, seed, name="block_comparison")


def placeholder_expression_corpus(n_plus: int = 20, n_minus: int = 120, d: int = 2000,
                                  informative: int = 40, effect: float = 1.0,
                                  seed: int = 0) -> LabeledDataset:
    """Synthetic stand-in for a gene-expression table (positive-valued features).

    Each feature is log-normal with its own location and spread; the first
    ``informative`` features have their log-mean shifted by ``effect`` in the
    positive class.  Only useful for exercising the CSV, filtering and
    cross-validation pipeline; it carries no claim about real expression data.
    """
    if informative < 0 or informative > d:
        raise InvalidArgument("informative must lie in [0, d]")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    loc = rng.uniform(0.0, 3.0, d)
    scale = rng.uniform(0.1, 1.0, d)
    shift = np.zeros(d)
    shift[:informative] = effect
    Zp = rng.standard_normal((int(n_plus), d)) * scale + loc + shift
    Zm = rng.standard_normal((int(n_minus), d)) * scale + loc
    X = np.exp(np.vstack([Zp, Zm]))
    y = np.concatenate([np.ones(int(n_plus), int), -np.ones(int(n_minus), int)])
    names = tuple(f"g{j + 1}" for j in range(d))
    return LabeledDataset(X, y, names)
