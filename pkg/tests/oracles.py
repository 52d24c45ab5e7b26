"""Independent reference solvers used to validate the package solvers.

Deliberately shares no code with the package: its own likelihood, its own
optimizer (projected gradient on the split positive/negative formulation
beta = p - q with p, q >= 0, Armijo backtracking).  Slow and simple.
"""

import numpy as np
from scipy.special import expit


def _nll(X, y, beta, link):
    z = X @ beta
    if link == "linear":
        m = 0.5 * z * z
    elif link == "logistic":
        m = np.logaddexp(0.0, z)
    else:
        raise ValueError(link)
    return -np.mean(y * z - m)


def _nll_grad(X, y, beta, link):
    z = X @ beta
    mu = z if link == "linear" else expit(z)
    return X.T @ (mu - y) / X.shape[0]


def reference_objective(X, y, lam, beta, link="linear"):
    return _nll(X, y, beta, link) + lam * np.abs(beta).sum()


def reference_lasso(X, y, lam, link="linear", max_iter=200_000, tol=1e-12):
    """Projected gradient on f(p, q) = nll(p - q) + lam * sum(p + q), p,q >= 0.

    The penalty is linear on the positive orthant, so the whole objective
    is smooth there and plain projected gradient with Armijo backtracking
    applies.  Stops when the objective stalls below ``tol``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    d = X.shape[1]
    p = np.zeros(d)
    q = np.zeros(d)

    def objective(p, q):
        return _nll(X, y, p - q, link) + lam * (p.sum() + q.sum())

    f = objective(p, q)
    step = 1.0
    for _ in range(max_iter):
        g = _nll_grad(X, y, p - q, link)
        gp = g + lam
        gq = -g + lam
        while True:
            pn = np.maximum(p - step * gp, 0.0)
            qn = np.maximum(q - step * gq, 0.0)
            fn = objective(pn, qn)
            decrease = gp @ (p - pn) + gq @ (q - qn)
            if fn <= f - 1e-4 * decrease + 1e-16:
                break
            step *= 0.5
            if step < 1e-20:
                return p - q
        improved = f - fn
        p, q, f = pn, qn, fn
        step *= 1.3
        if improved < tol and decrease < tol:
            break
    return p - q
