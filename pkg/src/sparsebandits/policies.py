"""Bandit policies behind one choose/update interface.

Learning policies only ever see observed contexts and rewards -- never the
true parameter, the noise level, or the sparsity index.  The oracle policy
is the explicit exception used to define regret.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from .contexts import ContextSet, ModelSpec, best_arm
from .estimator import (
    LassoProblem,
    OnlineLinearLasso,
    fit_lasso,
    lambda_schedule,
)
from .links import LINEAR, Link


def default_lambda0(sigma: float, x_max: float) -> float:
    """Penalty-scale prescription 2 * sigma * x_max."""
    return 2.0 * sigma * x_max


class Policy(ABC):
    """Sequential arm-selection policy.

    Call order per round: ``choose(ctx)`` then ``update(chosen_x, y)``.
    """

    name = "policy"

    def reset(self, d: int, K: int, rng: np.random.Generator):
        self.d = d
        self.K = K
        self.rng = rng
        self.history_X: list[np.ndarray] = []
        self.history_y: list[float] = []
        self.solver_warnings = 0

    @property
    def round(self) -> int:
        """Current decision round (1-based)."""
        return len(self.history_y) + 1

    @abstractmethod
    def choose(self, ctx: ContextSet) -> int: ...

    def update(self, x: np.ndarray, y: float):
        self.history_X.append(np.asarray(x, dtype=float))
        self.history_y.append(float(y))


class RandomPolicy(Policy):
    name = "random"

    def choose(self, ctx: ContextSet) -> int:
        return int(self.rng.integers(ctx.K))


class OraclePolicy(Policy):
    """Plays the true best arm; defines the zero-regret reference."""

    name = "oracle"

    def __init__(self, model: ModelSpec):
        self.model = model

    def choose(self, ctx: ContextSet) -> int:
        return best_arm(self.model, ctx)


class SALassoBandit(Policy):
    """Greedy arm selection under an L1-regularized GLM estimate.

    The single input is the penalty scale ``lambda0``; the per-round
    penalty follows lambda_schedule and the estimate is refit on all
    observations each round (warm-started).  An optional geometric refit
    accelerator reuses the estimate between refit rounds; it is off by
    default and excluded from acceptance runs.
    """

    name = "sa_lasso"

    def __init__(self, lambda0: float, link: Link = LINEAR, tol: float = 1e-7,
                 max_iter: int = 10_000, geometric_refit: bool = False):
        if lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        self.lambda0 = lambda0
        self.link = link
        self.tol = tol
        self.max_iter = max_iter
        self.geometric_refit = geometric_refit

    def reset(self, d, K, rng):
        super().reset(d, K, rng)
        self.beta_hat = np.zeros(d)
        self._online = OnlineLinearLasso(d) if self.link.name == "linear" else None
        self._next_refit = 1

    def choose(self, ctx: ContextSet) -> int:
        return int(np.argmax(ctx.features @ self.beta_hat))

    def update(self, x, y):
        super().update(x, y)
        t = len(self.history_y)
        if self._online is not None:
            self._online.add(x, y)
        if self.geometric_refit and t < self._next_refit:
            return
        self._next_refit = max(t + 1, int(np.ceil(t * 1.1)))
        lam_t = lambda_schedule(self.lambda0, t, self.d)
        if self._online is not None:
            sol = self._online.fit(lam_t, init=self.beta_hat,
                                   tol=self.tol, max_iter=self.max_iter)
        else:
            problem = LassoProblem(np.vstack(self.history_X),
                                   np.asarray(self.history_y), lam_t, self.link)
            sol = fit_lasso(problem, init=self.beta_hat,
                            tol=self.tol, max_iter=self.max_iter)
        if not sol.converged:
            self.solver_warnings += 1
        self.beta_hat = sol.beta


def forced_sample_times(K: int, q: int, horizon: int) -> list[np.ndarray]:
    """Forced-sampling times per arm: {(2^n - 1) K q + j} blocks of width q.

    Arm i (0-based) is forced at rounds (2^n - 1)*K*q + j for
    j in [q*i + 1, q*(i + 1)], for every n >= 0, up to ``horizon``.
    """
    times = [[] for _ in range(K)]
    n = 0
    while (2**n - 1) * K * q < horizon:
        base = (2**n - 1) * K * q
        for i in range(K):
            for j in range(q * i + 1, q * (i + 1) + 1):
                if base + j <= horizon:
                    times[i].append(base + j)
        n += 1
    return [np.array(t, dtype=int) for t in times]


def _forced_arm(t: int, K: int, q: int) -> int | None:
    """Arm forced at round t, or None."""
    block = K * q
    n = 0
    while (2**n - 1) * block < t:
        base = (2**n - 1) * block
        if t <= base + block:
            return (t - base - 1) // q
        n += 1
    return None


class ForcedSampleLassoBandit(Policy):
    """Forced-sampling Lasso baseline on the concatenated K*d representation.

    Maintains per-arm forced-sample and all-sample Lasso estimates over the
    stacked context [x_1', ..., x_K']'.  Outside forced rounds it
    pre-screens arms whose forced-sample score is within h/2 of the best,
    then picks the all-sample maximizer among them.  Tuning inputs
    (q, h, lam1, lam2) follow the cited forced-sampling construction.
    """

    name = "lasso_bandit"

    def __init__(self, q: int, h: float, lam1: float, lam2: float,
                 tol: float = 1e-5, max_iter: int = 500):
        if q < 1:
            raise ValueError("q must be >= 1")
        self.q = q
        self.h = h
        self.lam1 = lam1
        self.lam2 = lam2
        self.tol = tol
        self.max_iter = max_iter

    @classmethod
    def default_tuning(cls, s0: int, **kwargs) -> "ForcedSampleLassoBandit":
        """Common-practice tuning; forced-sampling width grows with s0."""
        q = max(1, int(round(s0 / 5)))
        return cls(q=q, h=5.0, lam1=1.0, lam2=1.0, **kwargs)

    def reset(self, d, K, rng):
        super().reset(d, K, rng)
        dim = K * d
        self._forced = [OnlineLinearLasso(dim) for _ in range(K)]
        self._all = [OnlineLinearLasso(dim) for _ in range(K)]
        self.beta_forced = [np.zeros(dim) for _ in range(K)]
        self.beta_all = [np.zeros(dim) for _ in range(K)]
        self._last = None  # (concat context, chosen arm, was_forced)

    def choose(self, ctx: ContextSet) -> int:
        t = self.round
        xcat = ctx.features.ravel()
        arm = _forced_arm(t, self.K, self.q)
        if arm is None:
            fscores = np.array([xcat @ b for b in self.beta_forced])
            cand = np.flatnonzero(fscores >= fscores.max() - self.h / 2)
            ascores = np.array([xcat @ self.beta_all[i] for i in cand])
            arm = int(cand[np.argmax(ascores)])
            forced = False
        else:
            forced = True
        self._last = (xcat, arm, forced)
        return arm

    def update(self, x, y):
        super().update(x, y)
        t = len(self.history_y)
        xcat, arm, forced = self._last
        dim = self.K * self.d
        if forced:
            self._forced[arm].add(xcat, y)
            sol = self._forced[arm].fit(self.lam1, init=self.beta_forced[arm],
                                        tol=self.tol, max_iter=self.max_iter)
            if not sol.converged:
                self.solver_warnings += 1
            self.beta_forced[arm] = sol.beta
        self._all[arm].add(xcat, y)
        lam2_t = self.lam2 * np.sqrt((np.log(t) + np.log(dim)) / t)
        sol = self._all[arm].fit(lam2_t, init=self.beta_all[arm],
                                 tol=self.tol, max_iter=self.max_iter)
        if not sol.converged:
            self.solver_warnings += 1
        self.beta_all[arm] = sol.beta


class DRLassoBandit(Policy):
    """Doubly-robust Lasso baseline.

    Regresses doubly-robust pseudo-rewards on the across-arm average
    context.  Three tuning inputs: the exploration-probability floor
    ``lam1``, penalty scale ``lam2``, and exploration horizon ``zT``; the
    round-t uniform-exploration probability is min(1, max(zT/t, lam1)).
    The pseudo-reward for chosen arm a with selection probability pi_a is

        rhat = mean_i x_i' beta + (y - x_a' beta) / (K * pi_a).
    """

    name = "dr_lasso"

    def __init__(self, lam1: float, lam2: float, zT: int,
                 tol: float = 1e-5, max_iter: int = 500):
        if not (0.0 <= lam1 <= 1.0):
            raise ValueError("lam1 must be a probability")
        self.lam1 = lam1
        self.lam2 = lam2
        self.zT = zT
        self.tol = tol
        self.max_iter = max_iter

    @classmethod
    def default_tuning(cls, s0: int, **kwargs) -> "DRLassoBandit":
        return cls(lam1=0.02, lam2=1.0, zT=2 * s0, **kwargs)

    def reset(self, d, K, rng):
        super().reset(d, K, rng)
        self.beta_hat = np.zeros(d)
        self._online = OnlineLinearLasso(d)
        self._last = None  # (ctx features, chosen arm, pi_a)

    def choose(self, ctx: ContextSet) -> int:
        t = self.round
        F = ctx.features
        p = min(1.0, max(self.zT / t, self.lam1))
        greedy = int(np.argmax(F @ self.beta_hat))
        if self.rng.uniform() < p:
            arm = int(self.rng.integers(self.K))
        else:
            arm = greedy
        pi = p / self.K + (1.0 - p) * (arm == greedy)
        self._last = (F, arm, pi)
        return arm

    def update(self, x, y):
        super().update(x, y)
        t = len(self.history_y)
        F, arm, pi = self._last
        scores = F @ self.beta_hat
        pseudo = float(np.mean(scores) + (y - scores[arm]) / (self.K * pi))
        xbar = F.mean(axis=0)
        self._online.add(xbar, pseudo)
        lam2_t = self.lam2 * np.sqrt((np.log(t) + np.log(self.d)) / t)
        sol = self._online.fit(lam2_t, init=self.beta_hat,
                               tol=self.tol, max_iter=self.max_iter)
        if not sol.converged:
            self.solver_warnings += 1
        self.beta_hat = sol.beta
