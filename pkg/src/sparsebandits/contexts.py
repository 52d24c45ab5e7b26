"""Synthetic context sets, sparse true parameters, and stochastic rewards.

Three context generators are shipped:

* ``gaussian``   -- per-dimension K-vectors drawn from N(0, V) with V having
                    unit diagonal and rho2 off-diagonal, so arms are
                    correlated within a coordinate and coordinates are
                    independent.
* ``uniform``    -- each coordinate i.i.d. Uniform[-1, 1].
* ``elliptical`` -- X = mu + R * A u with R ~ N(0,1) and u uniform on the
                    unit sphere in R^k.

All shipped generators are symmetric around zero, so the density-ratio
bound nu equals 1 for each of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .links import LINEAR, Link

VALID_KINDS = ("gaussian", "uniform", "elliptical")


@dataclass
class DistributionSpec:
    kind: str
    d: int
    K: int
    rho2: float = 0.0
    clip_to_xmax: float | None = None
    # elliptical parameters (rank k, mixing matrix A, mean mu)
    ell_rank: int | None = None
    ell_A: np.ndarray | None = None
    ell_mu: np.ndarray | None = None
    _chol: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.d < 1 or self.K < 1:
            raise ValueError("need d >= 1 and K >= 1")
        if self.kind == "gaussian":
            if not (0.0 <= self.rho2 < 1.0):
                raise ValueError("rho2 must lie in [0, 1)")
            V = np.full((self.K, self.K), self.rho2)
            np.fill_diagonal(V, 1.0)
            try:
                self._chol = np.linalg.cholesky(V)
            except np.linalg.LinAlgError as exc:
                raise ValueError("cross-arm covariance is not PSD") from exc
        elif self.kind == "elliptical":
            if self.ell_rank is None:
                self.ell_rank = self.d
            if self.ell_A is None:
                raise ValueError("elliptical kind needs a mixing matrix ell_A")
            self.ell_A = np.asarray(self.ell_A, dtype=float)
            if self.ell_A.shape != (self.d, self.ell_rank):
                raise ValueError(
                    f"ell_A must be {self.d}x{self.ell_rank}, got {self.ell_A.shape}"
                )
            if np.linalg.matrix_rank(self.ell_A) != self.ell_rank:
                raise ValueError("ell_A must have full column rank")
            if self.ell_mu is None:
                self.ell_mu = np.zeros(self.d)
            self.ell_mu = np.asarray(self.ell_mu, dtype=float).ravel()

    @property
    def nu(self) -> float:
        """Density-ratio bound p(-x)/p(x); 1 for the symmetric kinds shipped."""
        return 1.0

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d, "K": self.K, "rho2": self.rho2,
               "clip_to_xmax": self.clip_to_xmax}
        if self.kind == "elliptical":
            out["ell_rank"] = self.ell_rank
            out["ell_A"] = self.ell_A.tolist()
            out["ell_mu"] = self.ell_mu.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DistributionSpec":
        data = dict(data)
        if data.get("ell_A") is not None:
            data["ell_A"] = np.asarray(data["ell_A"], dtype=float)
        if data.get("ell_mu") is not None:
            data["ell_mu"] = np.asarray(data["ell_mu"], dtype=float)
        return cls(**data)


def make_elliptical_spec(d, K, rng, k=None, clip_to_xmax=None) -> DistributionSpec:
    """Elliptical spec with A entries drawn once from Uniform[0,1]."""
    k = d if k is None else k
    A = rng.uniform(0.0, 1.0, size=(d, k))
    return DistributionSpec(
        kind="elliptical", d=d, K=K, clip_to_xmax=clip_to_xmax, ell_rank=k, ell_A=A
    )


@dataclass
class ContextSet:
    """One round's K feature vectors; row i is the feature of arm i."""

    features: np.ndarray
    round: int = 0

    @property
    def K(self) -> int:
        return self.features.shape[0]


@dataclass
class ModelSpec:
    """True parameter, link, and noise level of the reward model."""

    beta_star: np.ndarray
    link: Link = LINEAR
    sigma: float = 1.0
    x_max: float | None = None

    def __post_init__(self):
        self.beta_star = np.asarray(self.beta_star, dtype=float).ravel()
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def d(self) -> int:
        return self.beta_star.shape[0]

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.beta_star)

    @property
    def s0(self) -> int:
        return int(np.count_nonzero(self.beta_star))

    @property
    def b(self) -> float:
        """Recorded l2 bound on the true parameter."""
        return float(np.linalg.norm(self.beta_star))


def make_parameter(d: int, s0: int, rng: np.random.Generator) -> np.ndarray:
    """Sparse parameter: s0 support indices chosen uniformly, filled U[0,1]."""
    if not (0 <= s0 <= d):
        raise ValueError(f"need 0 <= s0 <= d, got s0={s0}, d={d}")
    beta = np.zeros(d)
    if s0 > 0:
        support = rng.choice(d, size=s0, replace=False)
        beta[support] = rng.uniform(0.0, 1.0, size=s0)
    return beta


def make_model(d, s0, rng, link=LINEAR, sigma=1.0, x_max=None) -> ModelSpec:
    return ModelSpec(make_parameter(d, s0, rng), link=link, sigma=sigma, x_max=x_max)


def _clip_rows(F: np.ndarray, x_max: float) -> np.ndarray:
    norms = np.linalg.norm(F, axis=1, keepdims=True)
    scale = np.where(norms > x_max, x_max / np.maximum(norms, 1e-300), 1.0)
    return F * scale


def sample_context_features(spec: DistributionSpec, rng: np.random.Generator,
                            n_sets: int = 1) -> np.ndarray:
    """Batch of n_sets context sets as an (n_sets, K, d) array."""
    if spec.kind == "gaussian":
        Z = rng.standard_normal((n_sets, spec.K, spec.d))
        F = np.einsum("kl,nld->nkd", spec._chol, Z)
    elif spec.kind == "uniform":
        F = rng.uniform(-1.0, 1.0, size=(n_sets, spec.K, spec.d))
    else:
        R = rng.standard_normal((n_sets, spec.K))
        U = rng.standard_normal((n_sets, spec.K, spec.ell_rank))
        U /= np.linalg.norm(U, axis=2, keepdims=True)
        F = spec.ell_mu + R[:, :, None] * (U @ spec.ell_A.T)
    if spec.clip_to_xmax is not None:
        F = np.stack([_clip_rows(F[i], spec.clip_to_xmax) for i in range(n_sets)])
    return F


def sample_context_set(spec: DistributionSpec, rng: np.random.Generator,
                       round: int = 0) -> ContextSet:
    return ContextSet(features=sample_context_features(spec, rng, 1)[0], round=round)


def sample_reward(model: ModelSpec, x: np.ndarray, rng: np.random.Generator) -> float:
    """mu(x' beta*) + N(0, sigma^2) noise."""
    return expected_reward(model, x) + model.sigma * rng.standard_normal()


def expected_reward(model: ModelSpec, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != model.d:
        raise ValueError(f"x has dim {x.shape[0]}, expected {model.d}")
    return float(model.link.mu(x @ model.beta_star))


def best_arm(model: ModelSpec, ctx: ContextSet) -> int:
    """Lowest-index maximizer of the expected reward over arms."""
    scores = model.link.mu(ctx.features @ model.beta_star)
    return int(np.argmax(scores))
