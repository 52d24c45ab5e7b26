"""L1-penalized maximum likelihood for linear and logistic GLMs.

The penalized objective is

    f(beta) = nll(beta) + lambda * ||beta||_1
    nll(beta) = -(1/n) sum_j [ y_j x_j'beta - m(x_j'beta) ]

For the linear link the solver is cyclic coordinate descent on the Gram
("covariance updates") with an active-set strategy; for the logistic link
it is proximal gradient with backtracking line search.  Both converge on
the coordinate-wise KKT stationarity residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .links import LINEAR, LOGISTIC, Link


def soft_threshold(z: float, gamma: float) -> float:
    """Proximal operator of gamma*|.| : sign(z) * max(|z| - gamma, 0)."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return np.sign(z) * max(abs(z) - gamma, 0.0)


@dataclass
class LassoProblem:
    """Design matrix, responses, penalty and link for one Lasso fit.

    If ``x_max`` is given, every row must satisfy ||x||_2 <= x_max.
    """

    X: np.ndarray
    y: np.ndarray
    lam: float
    link: Link = LINEAR
    x_max: float | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"shape mismatch: X is {self.X.shape}, y has {self.y.shape[0]} entries"
            )
        if self.X.shape[0] < 1 or self.X.shape[1] < 1:
            raise ValueError("need n >= 1 and d >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.x_max is not None:
            norms = np.linalg.norm(self.X, axis=1)
            if np.any(norms > self.x_max * (1 + 1e-12)):
                bad = int(np.argmax(norms))
                raise ValueError(
                    f"row {bad} has norm {norms[bad]:.6g} > x_max={self.x_max:.6g}"
                )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class LassoSolution:
    beta: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_violation: float
    objective_trace: list = field(default_factory=list, repr=False)


def neg_log_likelihood(problem: LassoProblem, beta: np.ndarray) -> float:
    """-(1/n) sum [ y_j x_j'beta - m(x_j'beta) ]."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != problem.d:
        raise ValueError(f"beta has dim {beta.shape[0]}, expected {problem.d}")
    z = problem.X @ beta
    return float(-np.mean(problem.y * z - problem.link.cumulant(z)))


def nll_gradient(problem: LassoProblem, beta: np.ndarray) -> np.ndarray:
    """(1/n) X' (mu(X beta) - y)."""
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != problem.d:
        raise ValueError(f"beta has dim {beta.shape[0]}, expected {problem.d}")
    z = problem.X @ beta
    return problem.X.T @ (problem.link.mu(z) - problem.y) / problem.n


def kkt_residual(grad: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Max coordinate-wise violation of the Lasso stationarity conditions."""
    active = beta != 0
    viol_zero = np.maximum(np.abs(grad[~active]) - lam, 0.0)
    viol_act = np.abs(grad[active] + lam * np.sign(beta[active]))
    out = 0.0
    if viol_zero.size:
        out = max(out, float(viol_zero.max()))
    if viol_act.size:
        out = max(out, float(viol_act.max()))
    return out


def lambda_schedule(lambda0: float, t: int, d: int) -> float:
    """Decaying penalty lambda0 * sqrt((4 ln t + 2 ln d) / t)."""
    if lambda0 <= 0:
        raise ValueError("lambda0 must be positive")
    if t < 1:
        raise ValueError("t must be >= 1")
    if d < 2:
        raise ValueError("d must be >= 2")
    return lambda0 * np.sqrt((4.0 * np.log(t) + 2.0 * np.log(d)) / t)


def _check_finite(beta: np.ndarray):
    if not np.all(np.isfinite(beta)):
        bad = int(np.argmax(~np.isfinite(beta)))
        raise FloatingPointError(f"non-finite value at coordinate {bad}")


def _cd_gram(G, b, c0, lam, beta0, tol, max_iter):
    """Coordinate descent on f = .5 b'Gb - b'beta + c0 + lam*||beta||_1.

    G = X'X/n, b = X'y/n, c0 = y'y/(2n) so that f equals the linear-link
    penalized negative log-likelihood up to exact equality.
    Returns (beta, n_sweeps, converged, kkt, trace).
    """
    d = G.shape[0]
    diag = np.diag(G).copy()
    beta = np.zeros(d) if beta0 is None else np.array(beta0, dtype=float)
    # never start worse than the all-zero point
    f0 = c0
    if beta0 is not None:
        f_init = 0.5 * beta @ G @ beta - b @ beta + c0 + lam * np.abs(beta).sum()
        if f_init > f0:
            beta = np.zeros(d)
    g = G @ beta - b  # gradient of the smooth part

    def objective():
        return 0.5 * beta @ G @ beta - b @ beta + c0 + lam * np.abs(beta).sum()

    def sweep(idx):
        nonlocal g
        moved = 0.0
        for j in idx:
            if diag[j] <= 0.0:
                continue
            old = beta[j]
            z = diag[j] * old - g[j]
            new = soft_threshold(z, lam) / diag[j]
            if new != old:
                beta[j] = new
                g += G[:, j] * (new - old)
                moved = max(moved, abs(new - old))
        return moved

    trace = [objective()]
    all_idx = np.arange(d)
    n_sweeps = 0
    converged = False
    kkt = np.inf
    while n_sweeps < max_iter:
        sweep(all_idx)
        n_sweeps += 1
        _check_finite(beta)
        trace.append(objective())
        kkt = kkt_residual(g, beta, lam)
        if kkt <= tol:
            converged = True
            break
        # polish the active set before the next full pass
        while n_sweeps < max_iter:
            active = np.flatnonzero(beta)
            if active.size == 0:
                break
            moved = sweep(active)
            n_sweeps += 1
            trace.append(objective())
            if moved <= 0.1 * tol:
                break
    if not converged:
        kkt = kkt_residual(G @ beta - b, beta, lam)
        converged = kkt <= tol
    return beta, n_sweeps, converged, kkt, trace


def _prox_grad(problem, lam, beta0, tol, max_iter):
    """Proximal gradient with backtracking (halving, sufficient decrease)."""
    d = problem.d
    beta = np.zeros(d) if beta0 is None else np.array(beta0, dtype=float)
    if beta0 is not None and neg_log_likelihood(problem, beta) + lam * np.abs(beta).sum() \
            > neg_log_likelihood(problem, np.zeros(d)):
        beta = np.zeros(d)
    step = 1.0
    nll = neg_log_likelihood(problem, beta)
    trace = [nll + lam * np.abs(beta).sum()]
    converged = False
    kkt = np.inf
    it = 0
    while it < max_iter:
        it += 1
        grad = nll_gradient(problem, beta)
        kkt = kkt_residual(grad, beta, lam)
        if kkt <= tol:
            converged = True
            break
        while True:
            cand = np.sign(beta - step * grad) * np.maximum(
                np.abs(beta - step * grad) - step * lam, 0.0
            )
            diff = cand - beta
            nll_cand = neg_log_likelihood(problem, cand)
            if nll_cand <= nll + grad @ diff + (diff @ diff) / (2 * step) + 1e-15:
                break
            step *= 0.5
            if step < 1e-18:
                raise FloatingPointError(
                    f"line search collapsed at coordinate {int(np.argmax(np.abs(grad)))}"
                )
        beta = cand
        _check_finite(beta)
        nll = nll_cand
        trace.append(nll + lam * np.abs(beta).sum())
        step *= 1.25
    if not converged:
        kkt = kkt_residual(nll_gradient(problem, beta), beta, lam)
        converged = kkt <= tol
    return beta, it, converged, kkt, trace


def fit_lasso(
    problem: LassoProblem,
    init: np.ndarray | None = None,
    tol: float = 1e-7,
    max_iter: int = 10_000,
) -> LassoSolution:
    """Minimize nll(beta) + lam*||beta||_1 to KKT residual <= tol.

    ``init`` warm-starts the solver (useful across bandit rounds).  On
    non-convergence the best iterate is returned with converged=False.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if init is not None:
        init = np.asarray(init, dtype=float).ravel()
        if init.shape[0] != problem.d:
            raise ValueError(f"init has dim {init.shape[0]}, expected {problem.d}")
    if problem.link.name == "linear":
        G = problem.X.T @ problem.X / problem.n
        b = problem.X.T @ problem.y / problem.n
        c0 = float(problem.y @ problem.y) / (2 * problem.n)
        beta, its, conv, kkt, trace = _cd_gram(
            G, b, c0, problem.lam, init, tol, max_iter
        )
    else:
        beta, its, conv, kkt, trace = _prox_grad(
            problem, problem.lam, init, tol, max_iter
        )
    obj = neg_log_likelihood(problem, beta) + problem.lam * np.abs(beta).sum()
    return LassoSolution(
        beta=beta,
        objective=obj,
        iterations=its,
        converged=conv,
        kkt_violation=kkt,
        objective_trace=trace,
    )


class OnlineLinearLasso:
    """Incremental Gram/moment state for per-round linear-link refits.

    Keeps G = X'X/n, b = X'y/n and y'y/(2n) updated in O(d^2) per sample
    so each bandit round's refit avoids touching the full history.
    """

    def __init__(self, d: int):
        self.d = d
        self.n = 0
        self.G = np.zeros((d, d))
        self.b = np.zeros(d)
        self.half_yty = 0.0

    def add(self, x: np.ndarray, y: float):
        x = np.asarray(x, dtype=float).ravel()
        self.n += 1
        w = 1.0 / self.n
        self.G += w * (np.outer(x, x) - self.G)
        self.b += w * (x * y - self.b)
        self.half_yty += w * (0.5 * y * y - self.half_yty)

    def fit(self, lam, init=None, tol=1e-7, max_iter=10_000) -> LassoSolution:
        if self.n == 0:
            raise ValueError("no observations yet")
        beta, its, conv, kkt, trace = _cd_gram(
            self.G, self.b, self.half_yty, lam, init, tol, max_iter
        )
        return LassoSolution(
            beta=beta,
            objective=trace[-1],
            iterations=its,
            converged=conv,
            kkt_violation=kkt,
            objective_trace=trace,
        )
