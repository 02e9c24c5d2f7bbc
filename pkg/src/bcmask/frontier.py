"""Search over transmit strategies to trace achievable frontiers.

Maximizes the weighted sum rate ``R1 + mu R2`` over
``(K_X1, Sigma_XS1, Sigma_XS2)`` subject to the power-split feasibility
constraint and optional leakage budgets ``E_k <= e_k``.  The search is
multi-start projected gradient ascent on a penalized objective:
``K_X1 = L L^T`` with lower-triangular ``L`` keeps the iterate in the PSD
cone, the remaining constraints enter through quadratic penalties whose
weights grow over a fixed round schedule, and the final iterate is
projected onto the feasible set before the exact region values are
reported.  Everything is deterministic given the query seed.

A vectorized exhaustive grid over normalized scalar parameters
(:func:`scalar_grid_oracle`) provides an independent optimum reference at
t = 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    DomainError,
    InfeasibleError,
    MonotonicityWarning,
    NotPositiveDefiniteError,
)
from .linalg import cholesky_lower, logdet, min_eigenvalue, sym_sqrt
from .model import ChannelSpec, RegionPoint, Strategy, effective_cap, validate
from .region import eval_region

BUDGET_SLACK = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the multi-start penalized ascent."""

    restarts: int = 8
    rounds: int = 3
    budget_weight: float = 10.0
    feasibility_weight: float = 1e4
    penalty_growth: float = 10.0
    max_iter: int = 300
    grad_tol: float = 1e-8
    fd_step: float = 1e-6
    seed: int = 0


@dataclass(frozen=True)
class FrontierQuery:
    """One frontier request: channel, weight(s), budgets, solver options.

    ``mu`` and the budgets may be sequences, in which case
    :func:`frontier_sweep` traces their cartesian product in order.
    """

    spec: ChannelSpec
    mu: float | Sequence[float] = 1.0
    e1_budget: float | Sequence[float] = math.inf
    e2_budget: float | Sequence[float] = math.inf
    options: SolverOptions = field(default_factory=SolverOptions)


@dataclass(frozen=True)
class FrontierPoint:
    strategy: Strategy
    point: RegionPoint
    objective: float
    kkt_residual: float
    active_constraints: dict

    def strategy_vector(self) -> tuple[float, ...]:
        return tuple(
            np.concatenate(
                [
                    self.strategy.K_X1.ravel(),
                    self.strategy.Sigma_XS1.ravel(),
                    self.strategy.Sigma_XS2.ravel(),
                ]
            ).tolist()
        )


@dataclass(frozen=True)
class SweepEntry:
    mu: float
    e1_budget: float
    e2_budget: float
    result: FrontierPoint | None
    error: str | None = None


class _Problem:
    """Penalized objective over the flat parameter vector (L, Sigma1, Sigma2)."""

    def __init__(self, spec: ChannelSpec, mu: float, e1: float, e2: float):
        if mu < 1.0:
            raise DomainError(f"weight must be >= 1, got {mu}")
        if e1 < 0.0 or e2 < 0.0:
            raise DomainError("leakage budgets must be nonnegative")
        self.spec = spec
        self.mu = float(mu)
        self.e1 = float(e1)
        self.e2 = float(e2)
        t = spec.t
        self.t = t
        self.tril = np.tril_indices(t)
        self.n_l = len(self.tril[0])
        self.dim = self.n_l + 2 * t * t
        k_scale = math.sqrt(max(float(np.linalg.eigvalsh(spec.K)[-1]), 1e-12))
        s1_scale = math.sqrt(max(float(np.linalg.eigvalsh(spec.K_S1)[-1]), 1e-12))
        s2_scale = math.sqrt(max(float(np.linalg.eigvalsh(spec.K_S2)[-1]), 1e-12))
        self.scales = np.concatenate(
            [
                np.full(self.n_l, k_scale),
                np.full(t * t, k_scale * s1_scale),
                np.full(t * t, k_scale * s2_scale),
            ]
        )
        self.inv_s1 = np.linalg.inv(spec.K_S1)
        self.inv_s2 = np.linalg.inv(spec.K_S2)

    def unpack(self, theta: np.ndarray) -> Strategy:
        t = self.t
        low = np.zeros((t, t))
        low[self.tril] = theta[: self.n_l]
        k_x1 = low @ low.T
        s1 = theta[self.n_l : self.n_l + t * t].reshape(t, t)
        s2 = theta[self.n_l + t * t :].reshape(t, t)
        return Strategy(K_X1=k_x1, Sigma_XS1=s1, Sigma_XS2=s2)

    def pack(self, strategy: Strategy) -> np.ndarray:
        try:
            low = cholesky_lower(strategy.K_X1 + 1e-14 * np.eye(self.t))
        except NotPositiveDefiniteError:
            w, v = np.linalg.eigh(strategy.K_X1)
            low = (v * np.sqrt(np.clip(w, 0.0, None)))
        return np.concatenate(
            [low[self.tril], strategy.Sigma_XS1.ravel(), strategy.Sigma_XS2.ravel()]
        )

    def value(self, theta: np.ndarray, w_budget: float, w_feas: float) -> float:
        spec = self.spec
        t = self.t
        low = np.zeros((t, t))
        low[self.tril] = theta[: self.n_l]
        k_x1 = low @ low.T
        s1 = theta[self.n_l : self.n_l + t * t].reshape(t, t)
        s2 = theta[self.n_l + t * t :].reshape(t, t)
        q = s1 @ self.inv_s1 @ s1.T + s2 @ self.inv_s2 @ s2.T
        k_eff = spec.K - 0.5 * (q + q.T)
        k_x2 = k_eff - k_x1
        feas_def = np.clip(np.linalg.eigvalsh(0.5 * (k_x2 + k_x2.T)), None, 0.0)
        pen_feas = float(np.sum(feas_def**2))
        try:
            r1 = 0.5 * (logdet(k_x1 + spec.K_Z1) - logdet(spec.K_Z1))
            r2 = 0.5 * (logdet(k_eff + spec.K_Z2) - logdet(k_x1 + spec.K_Z2))
            num1 = spec.K + s1 + s1.T + spec.K_S1 + spec.K_Z1
            num2 = spec.K + s2 + s2.T + spec.K_S2 + spec.K_Z2
            e1 = 0.5 * (logdet(num1) - logdet(k_eff + spec.K_Z1))
            e2 = 0.5 * (logdet(num2) - logdet(k_eff + spec.K_Z2))
        except NotPositiveDefiniteError:
            deficit = -min(
                min_eigenvalue(k_eff + spec.K_Z1), min_eigenvalue(k_eff + spec.K_Z2)
            )
            return -1e3 * (1.0 + max(deficit, 0.0)) - w_feas * pen_feas
        pen_budget = max(0.0, e1 - self.e1) ** 2 + max(0.0, e2 - self.e2) ** 2
        return r1 + self.mu * r2 - w_budget * pen_budget - w_feas * pen_feas

    def gradient(self, theta: np.ndarray, w_budget: float, w_feas: float, h: float) -> np.ndarray:
        g = np.zeros_like(theta)
        for i in range(len(theta)):
            step = h * self.scales[i]
            up = theta.copy()
            up[i] += step
            down = theta.copy()
            down[i] -= step
            g[i] = (self.value(up, w_budget, w_feas) - self.value(down, w_budget, w_feas)) / (
                2.0 * step
            )
        return g


def _bb_ascent(
    problem: _Problem,
    theta0: np.ndarray,
    w_budget: float,
    w_feas: float,
    options: SolverOptions,
) -> np.ndarray:
    """Gradient ascent with Barzilai-Borwein steps and an Armijo guard."""
    theta = theta0.copy()
    f_cur = problem.value(theta, w_budget, w_feas)
    g = problem.gradient(theta, w_budget, w_feas, options.fd_step)
    alpha = 0.1 / max(float(np.linalg.norm(g / problem.scales)), 1.0)
    for _ in range(options.max_iter):
        g_norm = float(np.linalg.norm(g * problem.scales))
        if g_norm <= options.grad_tol:
            break
        step = alpha
        trial = theta + step * g
        f_new = problem.value(trial, w_budget, w_feas)
        shrink = 0
        while f_new < f_cur + 1e-4 * step * float(np.dot(g, g)) and shrink < 40:
            step *= 0.5
            trial = theta + step * g
            f_new = problem.value(trial, w_budget, w_feas)
            shrink += 1
        if f_new <= f_cur - 1e-15 * (1.0 + abs(f_cur)):
            break
        g_new = problem.gradient(trial, w_budget, w_feas, options.fd_step)
        s = trial - theta
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy < -1e-300:
            alpha = min(max(float(np.dot(s, s)) / (-sy), 1e-10), 1e6)
        else:
            alpha = step * 2.0
        theta, f_cur, g = trial, f_new, g_new
    return theta


def _project_strategy(spec: ChannelSpec, strategy: Strategy) -> Strategy:
    """Exact projection of the power split: shrink the cross-covariances
    until K_eff is PSD, then sandwich-clip K_X1 into [0, K_eff]."""
    s1, s2 = strategy.Sigma_XS1, strategy.Sigma_XS2
    q = s1 @ np.linalg.inv(spec.K_S1) @ s1.T + s2 @ np.linalg.inv(spec.K_S2) @ s2.T
    q = 0.5 * (q + q.T)
    k_eff = spec.K - q
    if min_eigenvalue(k_eff) < 0.0:
        # generalized shrink factor: largest s with K - s^2 q >= 0
        w_k, v_k = np.linalg.eigh(spec.K)
        inv_sqrt = (v_k / np.sqrt(np.clip(w_k, 1e-15, None))) @ v_k.T
        beta = max(float(np.linalg.eigvalsh(inv_sqrt @ q @ inv_sqrt)[-1]), 1e-300)
        shrink = math.sqrt(min(1.0, (1.0 - 1e-12) / beta))
        s1, s2 = shrink * s1, shrink * s2
        q = s1 @ np.linalg.inv(spec.K_S1) @ s1.T + s2 @ np.linalg.inv(spec.K_S2) @ s2.T
        k_eff = spec.K - 0.5 * (q + q.T)
    root = sym_sqrt(k_eff)
    w_e, v_e = np.linalg.eigh(k_eff)
    inv_root = (v_e / np.sqrt(np.clip(w_e, 1e-15, None))) @ v_e.T
    mid = inv_root @ strategy.K_X1 @ inv_root
    w_m, v_m = np.linalg.eigh(0.5 * (mid + mid.T))
    mid = (v_m * np.clip(w_m, 0.0, 1.0)) @ v_m.T
    k_x1 = root @ mid @ root
    return Strategy(K_X1=0.5 * (k_x1 + k_x1.T), Sigma_XS1=s1, Sigma_XS2=s2)


def _initial_points(problem: _Problem, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    spec = problem.spec
    t = problem.t
    starts = []
    half = Strategy(
        K_X1=0.5 * spec.K, Sigma_XS1=np.zeros((t, t)), Sigma_XS2=np.zeros((t, t))
    )
    starts.append(problem.pack(half))
    for _ in range(max(count - 1, 0)):
        theta = rng.standard_normal(problem.dim) * problem.scales * 0.5
        starts.append(theta)
    return starts


def _finalize(
    problem: _Problem, theta: np.ndarray, w_budget: float, w_feas: float
) -> tuple[FrontierPoint | None, float]:
    """Project, re-validate, and score a raw iterate.  Returns (point, violation)."""
    spec = problem.spec
    strategy = _project_strategy(spec, problem.unpack(theta))
    report = validate(spec, strategy)
    if not report.passed:
        return None, math.inf
    point = eval_region(spec, strategy)
    violation = max(point.E1 - problem.e1, point.E2 - problem.e2, 0.0)
    objective = point.R1 + problem.mu * point.R2
    grad = problem.gradient(problem.pack(strategy), w_budget, w_feas, 1e-6)
    kkt = float(np.linalg.norm(grad * problem.scales))
    k_eff = effective_cap(spec, strategy)
    scale = 1.0 + float(np.trace(spec.K))
    active = {
        "e1_budget": bool(point.E1 >= problem.e1 - 1e-6) if math.isfinite(problem.e1) else False,
        "e2_budget": bool(point.E2 >= problem.e2 - 1e-6) if math.isfinite(problem.e2) else False,
        "k_x1_low": bool(min_eigenvalue(strategy.K_X1) <= 1e-7 * scale),
        "power_split": bool(min_eigenvalue(k_eff - strategy.K_X1) <= 1e-7 * scale),
    }
    fp = FrontierPoint(
        strategy=strategy,
        point=point,
        objective=objective,
        kkt_residual=kkt,
        active_constraints=active,
    )
    return fp, violation


def maximize_weighted(query: FrontierQuery, warm_start: Strategy | None = None) -> FrontierPoint:
    """Best frontier point for a scalar-valued query.

    Deterministic given the seed.  Raises :class:`InfeasibleError` when no
    strategy meets the leakage budgets within ``1e-6``.
    """
    mu = float(_scalar(query.mu, "mu"))
    e1 = float(_scalar(query.e1_budget, "e1_budget"))
    e2 = float(_scalar(query.e2_budget, "e2_budget"))
    options = query.options
    problem = _Problem(query.spec, mu, e1, e2)
    rng = np.random.default_rng(np.random.SeedSequence(options.seed))
    starts = _initial_points(problem, rng, options.restarts)
    if warm_start is not None:
        starts.insert(0, problem.pack(warm_start))

    candidates: list[tuple[FrontierPoint, float]] = []
    for theta0 in starts:
        theta = theta0
        w_budget, w_feas = options.budget_weight, options.feasibility_weight
        for _ in range(options.rounds):
            theta = _bb_ascent(problem, theta, w_budget, w_feas, options)
            w_budget *= options.penalty_growth
            w_feas *= options.penalty_growth
        fp, violation = _finalize(problem, theta, w_budget, w_feas)
        if fp is not None:
            candidates.append((fp, violation))

    feasible = [fp for fp, v in candidates if v <= BUDGET_SLACK]
    if not feasible:
        best_violation = min((v for _, v in candidates), default=math.inf)
        raise InfeasibleError(
            f"no strategy met the leakage budgets (best violation {best_violation:.3e})"
        )
    # objective first; among exact ties the lexicographically smallest strategy
    return max(
        feasible, key=lambda fp: (fp.objective, tuple(-x for x in fp.strategy_vector()))
    )


def _scalar(value, name: str) -> float:
    if np.iterable(value):
        raise DomainError(f"{name} must be a scalar here; use frontier_sweep for lists")
    return float(value)


def _as_list(value) -> list[float]:
    if np.iterable(value):
        return [float(v) for v in value]
    return [float(value)]


def frontier_sweep(query: FrontierQuery) -> list[SweepEntry]:
    """One frontier point per swept parameter value, warm-started in order.

    Sweeps the cartesian product of ``mu``, ``e1_budget`` and ``e2_budget``
    (any of which may be a list), with ``mu`` varying slowest.  Entries that
    admit no feasible strategy are reported with their error and the sweep
    continues.  Expected monotonicities (objective nondecreasing in every
    budget and in ``mu``) are checked and flagged as warnings when violated
    beyond solver noise.
    """
    mus = _as_list(query.mu)
    e1s = _as_list(query.e1_budget)
    e2s = _as_list(query.e2_budget)
    if not mus or not e1s or not e2s:
        raise DomainError("sweep lists must be nonempty")
    entries: list[SweepEntry] = []
    warm: Strategy | None = None
    for mu in mus:
        for e1 in e1s:
            for e2 in e2s:
                sub = replace(query, mu=mu, e1_budget=e1, e2_budget=e2)
                try:
                    fp = maximize_weighted(sub, warm_start=warm)
                    warm = fp.strategy
                    entries.append(SweepEntry(mu, e1, e2, fp))
                except InfeasibleError as exc:
                    entries.append(SweepEntry(mu, e1, e2, None, error=str(exc)))
    _check_monotonicity(entries)
    return entries


def _check_monotonicity(entries: list[SweepEntry]) -> None:
    by_budget: dict[tuple[float, float], list[SweepEntry]] = {}
    for entry in entries:
        by_budget.setdefault((entry.e1_budget, entry.e2_budget), []).append(entry)
    for group in by_budget.values():
        group = [e for e in group if e.result is not None]
        group.sort(key=lambda e: e.mu)
        for prev, cur in zip(group, group[1:]):
            if cur.result.objective < prev.result.objective - 1e-6:
                warnings.warn(
                    f"objective decreased from mu={prev.mu} to mu={cur.mu}",
                    MonotonicityWarning,
                    stacklevel=3,
                )
            if cur.result.point.R2 < prev.result.point.R2 - 1e-6:
                warnings.warn(
                    f"R2 decreased as its weight grew (mu {prev.mu} -> {cur.mu})",
                    MonotonicityWarning,
                    stacklevel=3,
                )
    by_mu_e2: dict[tuple[float, float], list[SweepEntry]] = {}
    for entry in entries:
        by_mu_e2.setdefault((entry.mu, entry.e2_budget), []).append(entry)
    for group in by_mu_e2.values():
        group = [e for e in group if e.result is not None]
        group.sort(key=lambda e: e.e1_budget)
        for prev, cur in zip(group, group[1:]):
            if cur.result.objective < prev.result.objective - 1e-6:
                warnings.warn(
                    f"objective decreased as the e1 budget grew "
                    f"({prev.e1_budget} -> {cur.e1_budget})",
                    MonotonicityWarning,
                    stacklevel=3,
                )


@dataclass(frozen=True)
class GridOracleResult:
    objective: float
    k_x1: float
    sigma1: float
    sigma2: float
    feasible: bool


def scalar_grid_oracle(
    spec: ChannelSpec,
    mu: float,
    e1_budget: float = math.inf,
    e2_budget: float = math.inf,
    resolution: float = 0.01,
    refine: int = 2,
) -> GridOracleResult:
    """Exhaustive grid reference for t = 1 queries.

    Normalizes ``K_X1 = u K_eff`` with u in [0, 1] and the cross-covariances
    by ``sqrt(K K_Sk)``, enumerates the grid at the given resolution, keeps
    points meeting ``E_k <= budget + 1e-6``, and zooms twice around the
    incumbent.  When a budget is finite the exact zero-leakage candidates
    (full cancellation of one state) are appended so budget-0 queries are
    not lost to grid quantization.  Independent of the ascent solver.
    """
    if spec.t != 1:
        raise DomainError("the grid oracle is defined for t = 1 only")
    k = float(spec.K[0, 0])
    s1 = float(spec.K_S1[0, 0])
    s2 = float(spec.K_S2[0, 0])
    z1 = float(spec.K_Z1[0, 0])
    z2 = float(spec.K_Z2[0, 0])
    lim1 = math.sqrt(k * s1)
    lim2 = math.sqrt(k * s2)

    def evaluate(u_grid, sig1_grid, sig2_grid, extra_pairs=()):
        sig1, sig2 = np.meshgrid(sig1_grid, sig2_grid, indexing="ij")
        sig1 = sig1.ravel()
        sig2 = sig2.ravel()
        if extra_pairs:
            sig1 = np.concatenate([sig1, [p[0] for p in extra_pairs]])
            sig2 = np.concatenate([sig2, [p[1] for p in extra_pairs]])
        q = sig1**2 / s1 + sig2**2 / s2
        keff = k - q
        ok = keff >= -1e-12
        keff = np.where(ok, np.maximum(keff, 0.0), np.nan)
        with np.errstate(invalid="ignore", divide="ignore"):
            e1 = 0.5 * np.log((k + 2.0 * sig1 + s1 + z1) / (keff + z1))
            e2 = 0.5 * np.log((k + 2.0 * sig2 + s2 + z2) / (keff + z2))
            ok &= (e1 <= e1_budget + BUDGET_SLACK) & (e2 <= e2_budget + BUDGET_SLACK)
        if not np.any(ok):
            return None
        keff_ok = keff[ok]
        sig1_ok = sig1[ok]
        sig2_ok = sig2[ok]
        best = (-math.inf, 0.0, 0.0, 0.0)
        for u in u_grid:
            kx1 = u * keff_ok
            obj = 0.5 * np.log1p(kx1 / z1) + 0.5 * mu * np.log((keff_ok + z2) / (kx1 + z2))
            j = int(np.argmax(obj))
            if obj[j] > best[0]:
                best = (float(obj[j]), float(kx1[j]), float(sig1_ok[j]), float(sig2_ok[j]))
        return best

    extra = []
    if math.isfinite(e1_budget) and k >= s1:
        extra.append((-s1, 0.0))
    if math.isfinite(e2_budget) and k >= s2:
        extra.append((0.0, -s2))

    n_u = int(round(1.0 / resolution)) + 1
    n_s = 2 * int(round(1.0 / resolution)) + 1
    u_grid = np.linspace(0.0, 1.0, n_u)
    best = evaluate(
        u_grid,
        np.linspace(-lim1, lim1, n_s) if lim1 > 0 else np.array([0.0]),
        np.linspace(-lim2, lim2, n_s) if lim2 > 0 else np.array([0.0]),
        extra,
    )
    if best is None:
        return GridOracleResult(-math.inf, 0.0, 0.0, 0.0, feasible=False)

    step_u = resolution
    step_1 = resolution * max(lim1, 1e-12)
    step_2 = resolution * max(lim2, 1e-12)
    for _ in range(refine):
        _, kx1_b, sg1_b, sg2_b = best
        q_b = sg1_b**2 / s1 + sg2_b**2 / s2
        u_b = kx1_b / max(k - q_b, 1e-300)
        u_lo, u_hi = max(0.0, u_b - 2 * step_u), min(1.0, u_b + 2 * step_u)
        g_u = np.linspace(u_lo, u_hi, 41)
        g_1 = np.clip(np.linspace(sg1_b - 2 * step_1, sg1_b + 2 * step_1, 41), -lim1, lim1)
        g_2 = np.clip(np.linspace(sg2_b - 2 * step_2, sg2_b + 2 * step_2, 41), -lim2, lim2)
        cand = evaluate(g_u, g_1, g_2, extra)
        if cand is not None and cand[0] > best[0]:
            best = cand
        step_u /= 10.0
        step_1 /= 10.0
        step_2 /= 10.0
    return GridOracleResult(best[0], best[1], best[2], best[3], feasible=True)
