"""Empirical checks of the estimation-theoretic machinery at desk scale.

Everything here is a Monte-Carlo consistency check on small instances:
cone-restricted compatibility constants, the adapted-sample oracle
inequality, Gram-matrix concentration, a Bernstein-type tail bound for
adapted sequences, and the balanced-covariance constant.  None of it
feeds back into any policy decision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .contexts import DistributionSpec, make_parameter, sample_context_features
from .estimator import OnlineLinearLasso, lambda_schedule
from .links import LINEAR, Link


@dataclass
class ConeSample:
    """Vector in the cone {beta : ||beta_off||_1 <= 3 ||beta_on||_1}."""

    beta: np.ndarray
    S0: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).ravel()
        self.S0 = np.asarray(self.S0, dtype=int).ravel()
        on = np.abs(self.beta[self.S0]).sum()
        mask = np.ones(self.beta.shape[0], dtype=bool)
        mask[self.S0] = False
        off = np.abs(self.beta[mask]).sum()
        if off > 3.0 * on + 1e-12:
            raise ValueError("vector is outside the compatibility cone")


@dataclass
class GramEstimate:
    """Symmetric PSD d x d matrix tagged with how it was obtained."""

    matrix: np.ndarray
    kind: str  # "theoretical" | "adapted" | "empirical"

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if not np.allclose(M, M.T, atol=1e-12):
            raise ValueError("Gram estimate must be symmetric")
        w = np.linalg.eigvalsh(M)
        if w.min() < -1e-10:
            raise ValueError(f"Gram estimate not PSD (min eigenvalue {w.min():.3g})")
        self.matrix = M


def _sample_cone(d, S0, n, rng):
    """Cone points with ||beta_S0||_1 = 1, off-support l1 mass in [0, 3]."""
    s0 = len(S0)
    comp = np.setdiff1d(np.arange(d), S0)
    B = np.zeros((n, d))
    mag_on = rng.dirichlet(np.ones(s0), size=n)
    B[:, S0] = mag_on * rng.choice([-1.0, 1.0], size=(n, s0))
    if comp.size:
        r = rng.uniform(size=n)
        r[rng.uniform(size=n) < 0.3] = 0.0  # boundary beta_off = 0 is often optimal
        mag_off = rng.dirichlet(np.ones(comp.size), size=n) * (3.0 * r)[:, None]
        B[:, comp] = mag_off * rng.choice([-1.0, 1.0], size=(n, comp.size))
    return B


def _refine_pattern(M, S0, signs, u0, s0):
    """Min of s0 (s*u)'M(s*u) over u >= 0, sum_{S0} u = 1, sum_off u <= 3."""
    d = M.shape[0]
    comp = np.setdiff1d(np.arange(d), S0)
    Ms = (signs[:, None] * M) * signs[None, :]

    def fun(u):
        return s0 * u @ Ms @ u

    def jac(u):
        return 2 * s0 * (Ms @ u)

    cons = [{"type": "eq", "fun": lambda u: u[S0].sum() - 1.0,
             "jac": lambda u: np.isin(np.arange(d), S0).astype(float)}]
    if comp.size:
        cons.append({"type": "ineq", "fun": lambda u: 3.0 - u[comp].sum(),
                     "jac": lambda u: -(~np.isin(np.arange(d), S0)).astype(float)})
    res = optimize.minimize(fun, u0, jac=jac, bounds=[(0, None)] * d,
                            constraints=cons, method="SLSQP",
                            options={"maxiter": 200, "ftol": 1e-12})
    u = np.clip(res.x, 0.0, None)
    on = u[S0].sum()
    if on <= 0:
        return np.inf
    u = u / on  # renormalize back onto the slice
    if comp.size and u[comp].sum() > 3.0:
        u[comp] *= 3.0 / u[comp].sum()
    return s0 * (signs * u) @ M @ (signs * u)


def compatibility_constant(M: np.ndarray, S0, n_samples: int = 2000,
                           n_refine: int = 5, seed: int = 0) -> float:
    """Estimated min over the cone of s0 b'Mb / ||b_S0||_1^2.

    Scale-fixed random sampling of the cone plus SLSQP refinement from the
    best sign patterns.  The reported value upper-bounds the true minimum
    (it is a feasible-point value); it is a consistency check, not a
    certified bound.  Homogeneous of degree 1 in M by construction.
    """
    M = np.asarray(M, dtype=float)
    S0 = np.asarray(S0, dtype=int).ravel()
    if S0.size == 0:
        raise ValueError("S0 must be nonempty")
    scale = np.abs(M).max()
    if scale == 0:
        return 0.0
    Mn = M / scale
    d = Mn.shape[0]
    s0 = S0.size
    rng = np.random.default_rng(seed)
    B = _sample_cone(d, S0, n_samples, rng)
    q = s0 * np.einsum("nd,de,ne->n", B, Mn, B)
    order = np.argsort(q)
    best = float(q[order[0]])
    seen = set()
    for idx in order:
        signs = np.sign(B[idx])
        signs[signs == 0] = 1.0
        key = tuple(signs.astype(int))
        if key in seen:
            continue
        seen.add(key)
        val = _refine_pattern(Mn, S0, signs, np.abs(B[idx]), s0)
        best = min(best, float(val))
        if len(seen) >= n_refine:
            break
    return best * scale


def oracle_bound(s0: int, lam_t: float, kappa0: float, phi2: float) -> float:
    """High-probability l1 error bound 4 s0 lam_t / (kappa0 phi2)."""
    return 4.0 * s0 * lam_t / (kappa0 * phi2)


def lemma_lambda(sigma, x_max, delta, d, t):
    """Penalty 2 sigma x_max sqrt(2[log(2/delta) + log d]/t)."""
    return 2.0 * sigma * x_max * np.sqrt(2.0 * (np.log(2.0 / delta) + np.log(d)) / t)


def kappa0_for(link: Link, x_max: float, b: float) -> float:
    """Min of mu_dot over the realized score interval [-x_max*b, x_max*b]."""
    if link.name == "linear":
        return 1.0
    return float(link.mu_dot(np.array([x_max * b]))[0])


@dataclass
class CheckpointStat:
    t: int
    n_valid: int
    n_excluded: int
    violations: int
    violation_rate: float
    slack: float
    bound_mean: float
    phi2_mean: float
    passed: bool


@dataclass
class OracleInequalityReport:
    delta: float
    n_traj: int
    checkpoints: list[CheckpointStat]
    passed: bool

    def to_text(self) -> str:
        lines = [f"oracle-inequality check: delta={self.delta}, "
                 f"trajectories={self.n_traj}"]
        for c in self.checkpoints:
            lines.append(
                f"  t={c.t}: valid={c.n_valid} excluded={c.n_excluded} "
                f"violation_rate={c.violation_rate:.4f} "
                f"(allowed {self.delta:.3f}+{c.slack:.4f}) "
                f"mean_bound={c.bound_mean:.3f} mean_phi2={c.phi2_mean:.3f} "
                f"{'PASS' if c.passed else 'FAIL'}")
        lines.append("overall: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def check_oracle_inequality(d=10, s0=2, delta=0.05, T=500, n_traj=200,
                            checkpoints=(250, 500), K=2, rho2=0.0, sigma=1.0,
                            link: Link = LINEAR, seed=0,
                            phi_samples=500) -> OracleInequalityReport:
    """Empirical violation frequency of the adapted-sample l1 error bound.

    Runs greedy Lasso trajectories with the penalty set exactly to
    lemma_lambda and counts, per checkpoint, how often the realized l1
    estimation error exceeds the bound evaluated at the empirical
    compatibility constant of Sigma_hat_t.  Checkpoints where the
    empirical compatibility constant is not yet positive are excluded
    (initial-period logic).
    """
    checkpoints = sorted(checkpoints)
    stats = {t: {"valid": 0, "excluded": 0, "viol": 0, "bounds": [], "phis": []}
             for t in checkpoints}
    for traj in range(n_traj):
        rng = np.random.default_rng(np.random.SeedSequence([seed, traj]))
        beta_star = make_parameter(d, s0, rng)
        S0 = np.flatnonzero(beta_star)
        spec = DistributionSpec(kind="gaussian", d=d, K=K, rho2=rho2)
        contexts = sample_context_features(spec, rng, T)
        x_max = float(np.linalg.norm(contexts, axis=2).max())
        k0 = kappa0_for(link, x_max, float(np.linalg.norm(beta_star)))
        online = OnlineLinearLasso(d)
        beta_hat = np.zeros(d)
        emp = np.zeros((d, d))
        for t in range(1, T + 1):
            F = contexts[t - 1]
            a = int(np.argmax(F @ beta_hat))
            x = F[a]
            z = float(x @ beta_star)
            y = float(link.mu(np.array([z]))[0]) + sigma * rng.standard_normal()
            online.add(x, y)
            emp += np.outer(x, x)
            lam_t = lemma_lambda(sigma, x_max, delta, d, t)
            beta_hat = online.fit(lam_t, init=beta_hat).beta
            if t in stats:
                phi2 = compatibility_constant(emp / t, S0, n_samples=phi_samples,
                                              n_refine=2, seed=traj)
                if phi2 <= 1e-8:
                    stats[t]["excluded"] += 1
                    continue
                bound = oracle_bound(s0, lam_t, k0, phi2)
                err = float(np.abs(beta_hat - beta_star).sum())
                stats[t]["valid"] += 1
                stats[t]["bounds"].append(bound)
                stats[t]["phis"].append(phi2)
                if err > bound:
                    stats[t]["viol"] += 1
    out = []
    for t in checkpoints:
        s = stats[t]
        n = max(s["valid"], 1)
        rate = s["viol"] / n
        slack = 3.0 * np.sqrt(delta * (1 - delta) / n)
        out.append(CheckpointStat(
            t=t, n_valid=s["valid"], n_excluded=s["excluded"],
            violations=s["viol"], violation_rate=rate, slack=slack,
            bound_mean=float(np.mean(s["bounds"])) if s["bounds"] else np.nan,
            phi2_mean=float(np.mean(s["phis"])) if s["phis"] else np.nan,
            passed=rate <= delta + slack))
    return OracleInequalityReport(delta=delta, n_traj=n_traj, checkpoints=out,
                                  passed=all(c.passed for c in out))


@dataclass
class ConcentrationReport:
    checkpoints: list[int]
    mean_gap: list[float]  # mean over trajectories of ||Sigma_t - Sigma_hat_t||_inf
    phi2_emp: list[float] | None
    decay_ratio: float  # gap(last) / gap(first)
    loglog_slope: float
    n_traj: int
    mc_draws: int

    def to_text(self) -> str:
        rows = "\n".join(
            f"  t={t}: ||Sigma_t - Sigma_hat_t||_inf = {g:.5f}"
            for t, g in zip(self.checkpoints, self.mean_gap))
        return (f"matrix-concentration check ({self.n_traj} trajectories, "
                f"{self.mc_draws} conditional draws/round)\n{rows}\n"
                f"decay ratio last/first = {self.decay_ratio:.3f}, "
                f"log-log slope = {self.loglog_slope:.3f}")


def check_matrix_concentration(d=10, K=2, rho2=0.0, s0=2, checkpoints=(100, 400),
                               n_traj=50, mc_draws=10_000, sigma=1.0,
                               policy="sa", lambda0=1.0, seed=0,
                               compute_phi=False) -> ConcentrationReport:
    """Decay of the adapted-vs-empirical Gram gap along trajectories.

    Sigma_t is approximated per round by Monte-Carlo resampling of context
    sets conditional on the current estimate (the chosen-arm second
    moment), with ``mc_draws`` draws.
    """
    checkpoints = sorted(checkpoints)
    T = checkpoints[-1]
    gaps = np.zeros((n_traj, len(checkpoints)))
    phis = np.zeros((n_traj, len(checkpoints)))
    spec_proto = DistributionSpec(kind="gaussian", d=d, K=K, rho2=rho2)
    for traj in range(n_traj):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 7, traj]))
        beta_star = make_parameter(d, s0, rng)
        S0 = np.flatnonzero(beta_star)
        online = OnlineLinearLasso(d)
        beta_hat = np.zeros(d)
        emp = np.zeros((d, d))
        cond_sum = np.zeros((d, d))
        cached_key, cached_cond = None, None
        for t in range(1, T + 1):
            F = sample_context_features(spec_proto, rng, 1)[0]
            if policy == "sa":
                a = int(np.argmax(F @ beta_hat))
            else:
                a = int(rng.integers(K))
            x = F[a]
            # conditional second moment of the chosen feature given beta_hat
            key = None if policy != "sa" else beta_hat.tobytes()
            if cached_key is not None and key == cached_key:
                cond = cached_cond
            else:
                sim = sample_context_features(spec_proto, rng, mc_draws)
                if policy == "sa":
                    picks = np.argmax(sim @ beta_hat, axis=1)
                else:
                    picks = rng.integers(K, size=mc_draws)
                chosen = sim[np.arange(mc_draws), picks]
                cond = chosen.T @ chosen / mc_draws
                cached_key, cached_cond = key, cond
            cond_sum += cond
            emp += np.outer(x, x)
            y = float(x @ beta_star) + sigma * rng.standard_normal()
            online.add(x, y)
            if policy == "sa":
                beta_hat = online.fit(lambda_schedule(lambda0, t, d),
                                      init=beta_hat).beta
            if t in checkpoints:
                i = checkpoints.index(t)
                gaps[traj, i] = np.abs(cond_sum / t - emp / t).max()
                if compute_phi:
                    phis[traj, i] = compatibility_constant(
                        emp / t, S0, n_samples=400, n_refine=2, seed=traj)
    mean_gap = gaps.mean(axis=0)
    slope = np.polyfit(np.log(checkpoints), np.log(mean_gap), 1)[0] \
        if len(checkpoints) > 1 else np.nan
    return ConcentrationReport(
        checkpoints=list(checkpoints), mean_gap=mean_gap.tolist(),
        phi2_emp=phis.mean(axis=0).tolist() if compute_phi else None,
        decay_ratio=float(mean_gap[-1] / mean_gap[0]),
        loglog_slope=float(slope), n_traj=n_traj, mc_draws=mc_draws)


def rademacher_averages(rng, trials, tau, n_pairs):
    """Time-averages of i.i.d. +/-1 martingale differences, via binomial."""
    heads = rng.binomial(tau, 0.5, size=(trials, n_pairs))
    return (2.0 * heads - tau) / tau


@dataclass
class BernsteinReport:
    tau: int
    w: float
    d: int
    trials: int
    threshold: float
    bound: float
    empirical_tail: float
    slack: float
    passed: bool

    def to_text(self) -> str:
        return (f"bernstein check tau={self.tau} w={self.w} d={self.d} "
                f"trials={self.trials}: tail={self.empirical_tail:.2e} "
                f"<= bound {self.bound:.2e} + {self.slack:.2e} : "
                f"{'PASS' if self.passed else 'FAIL'}")


def check_bernstein_adapted(tau: int, w: float, trials: int = 100_000, d: int = 5,
                            generator=rademacher_averages, seed=0) -> BernsteinReport:
    """Empirical tail of the maximal adapted-sample average vs exp(-tau w/2).

    ``generator(rng, trials, tau, n_pairs)`` must return time-averages
    (1/tau) sum_t gamma_t for martingale differences with conditional
    m-th moments bounded by m!.
    """
    rng = np.random.default_rng(seed)
    n_pairs = d * (d + 1) // 2
    avgs = generator(rng, trials, tau, n_pairs)
    thr = w + np.sqrt(2 * w) + np.sqrt(4 * np.log(2 * d * d) / tau) \
        + 2 * np.log(2 * d * d) / tau
    tail = float(np.mean(np.abs(avgs).max(axis=1) >= thr))
    bound = float(np.exp(-tau * w / 2))
    slack = 3.0 * np.sqrt(max(bound * (1 - bound), 1e-12) / trials)
    return BernsteinReport(tau=tau, w=w, d=d, trials=trials, threshold=float(thr),
                           bound=bound, empirical_tail=tail, slack=slack,
                           passed=tail <= bound + slack)


@dataclass
class BalancedCovReport:
    K: int
    d: int
    n_samples: int
    c_estimate: float
    c_se: float
    per_ordering: dict = field(repr=False, default_factory=dict)
    skipped: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"balanced-covariance estimate: C = {self.c_estimate:.3f} "
                 f"+/- {self.c_se:.3f} (K={self.K}, d={self.d}, "
                 f"{self.n_samples} samples)"]
        if self.skipped:
            lines.append(f"  skipped orderings (too few samples): {self.skipped}")
        return "\n".join(lines)


def estimate_balanced_covariance_constant(dist: DistributionSpec, beta,
                                          n_samples: int = 1_000_000,
                                          n_batches: int = 10,
                                          seed: int = 0) -> BalancedCovReport:
    """Monte-Carlo estimate of the smallest C with

        E[X_mid X_mid' 1{order}] <= C E[(X_lo X_lo' + X_hi X_hi') 1{order}]

    over score orderings of the K arms, via generalized eigenvalues of the
    two accumulated matrices.  Exploration-only; reported with MC error
    bars from batch splitting.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    K, d = dist.K, dist.d
    if K < 3:
        raise ValueError("balanced covariance needs K >= 3")
    rng = np.random.default_rng(seed)
    batch = n_samples // n_batches
    perms = list(itertools.permutations(range(K)))
    mids = range(1, K - 1)
    acc_mid = {(p, k): np.zeros((d, d)) for p in perms for k in mids}
    acc_ext = {p: np.zeros((d, d)) for p in perms}
    counts = {p: 0 for p in perms}
    batch_cs = []
    for bi in range(n_batches):
        F = sample_context_features(dist, rng, batch)
        order = np.argsort(F @ beta, axis=1)  # ascending scores
        perm_ids = np.zeros(batch, dtype=np.int64)
        for pos in range(K):
            perm_ids = perm_ids * K + order[:, pos]
        b_mid = {}
        b_ext = {}
        for p in perms:
            pid = 0
            for pos in range(K):
                pid = pid * K + p[pos]
            mask = perm_ids == pid
            m = int(mask.sum())
            counts[p] += m
            if m == 0:
                continue
            lo = F[mask][:, p[0], :]
            hi = F[mask][:, p[-1], :]
            b_ext[p] = lo.T @ lo + hi.T @ hi
            acc_ext[p] += b_ext[p]
            for k in mids:
                mid = F[mask][:, p[k], :]
                b_mid[(p, k)] = mid.T @ mid
                acc_mid[(p, k)] += b_mid[(p, k)]
        batch_cs.append(_max_gen_eig(b_mid, b_ext, d))
    per_ordering = {}
    skipped = []
    for p in perms:
        if counts[p] < 10 * d:
            skipped.append(p)
            continue
        for k in mids:
            per_ordering[(p, k)] = _gen_eig(acc_mid[(p, k)], acc_ext[p], d)
    c_est = max(per_ordering.values()) if per_ordering else np.nan
    good = [c for c in batch_cs if np.isfinite(c)]
    c_se = float(np.std(good) / np.sqrt(len(good))) if len(good) > 1 else np.nan
    return BalancedCovReport(K=K, d=d, n_samples=n_samples, c_estimate=float(c_est),
                             c_se=c_se, per_ordering=per_ordering, skipped=skipped)


def _gen_eig(M_mid, M_ext, d):
    """Largest generalized eigenvalue of (M_mid, M_ext)."""
    reg = 1e-9 * np.trace(M_ext) / d * np.eye(d)
    try:
        return float(linalg.eigh(M_mid, M_ext + reg, eigvals_only=True)[-1])
    except linalg.LinAlgError:
        return np.inf


def _max_gen_eig(b_mid, b_ext, d):
    vals = [_gen_eig(m, b_ext[p], d) for (p, _k), m in b_mid.items()
            if p in b_ext]
    return max(vals) if vals else np.nan
