"""The acceptance gate: every exit criterion as a runnable, seeded check.

Each criterion returns a :class:`CriterionResult` with a PASS/FAIL verdict
and a one-line detail string; :func:`run_all` executes all ten in order.
The pytest suite asserts on exactly these checks, and the command line
exposes them as ``bcmask self-test``.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import coding, extremal, frontier, mcval, region
from .errors import InfeasibleError
from .linalg import conditional_mutual_information
from .model import ChannelSpec, Strategy, build_joint
from .rand import random_candidate, random_spec, random_strategy


@dataclass(frozen=True)
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float


def _rel_gap(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _instances(seed: int, count: int, dims: tuple[int, ...]):
    rng = np.random.default_rng(seed)
    for i in range(count):
        t = dims[i % len(dims)]
        spec = random_spec(rng, t)
        yield spec, random_strategy(rng, spec)


def criterion_inner_outer(seed: int = 101) -> CriterionResult:
    """Construction and closed form agree componentwise on 200 instances."""
    start = time.perf_counter()
    worst = 0.0
    for spec, strat in _instances(seed, 200, (1, 2, 3, 4)):
        outer = region.eval_region(spec, strat)
        inner = coding.inner_region(spec, strat)
        for name in ("R1", "R2", "E1", "E2"):
            worst = max(worst, _rel_gap(getattr(outer, name), getattr(inner, name)))
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-8 and elapsed < 10.0
    return CriterionResult(
        1,
        "inner/outer coincidence",
        passed,
        f"max relative gap {worst:.3e} (tol 1e-8), {elapsed:.2f}s (limit 10s)",
        elapsed,
    )


_FAULTS = {
    "a21": "state_vs_v",
    "m_v_y2": "v_vs_y2",
    "a11": "x2_state_vs_u",
    "m_u_y1": "u_vs_y1",
}


def inject_fault(coeffs: coding.CodingCoefficients, name: str) -> coding.CodingCoefficients:
    """Perturb one coefficient matrix by +0.1; used to prove the residual
    checks can actually fire."""
    key = {"a21": "A21", "a11": "A11", "a10": "A10", "a12": "A12", "a22": "A22",
           "b1": "B1", "b2": "B2", "m_u_y1": "M_U_Y1", "m_v_y2": "M_V_Y2"}[name]
    return coeffs.replace(**{key: getattr(coeffs, key) + 0.1})


def criterion_wdp_residuals(seed: int = 101) -> CriterionResult:
    """All four residual families vanish, and each detector can fire."""
    start = time.perf_counter()
    worst = 0.0
    for spec, strat in _instances(seed, 200, (1, 2, 3, 4)):
        coeffs = coding.derive_coefficients(spec, strat)
        worst = max(worst, coding.wdp_residuals(spec, strat, coeffs).max_abs())
    clean = worst <= 1e-10

    rng = np.random.default_rng(seed + 1)
    spec = random_spec(rng, 2)
    strat = random_strategy(rng, spec)
    coeffs = coding.derive_coefficients(spec, strat)
    detectors = True
    for fault, family in _FAULTS.items():
        res = coding.wdp_residuals(spec, strat, inject_fault(coeffs, fault))
        detectors = detectors and getattr(res, family) > 1e-6
    elapsed = time.perf_counter() - start
    return CriterionResult(
        2,
        "dirty-paper residuals",
        clean and detectors,
        f"max residual {worst:.3e} (tol 1e-10), fault detectors "
        f"{'all fire' if detectors else 'MISSED a family'}",
        elapsed,
    )


def criterion_masking_independence(seed: int = 101) -> CriterionResult:
    """I(S; V | Y2) vanishes on the built joint for every instance."""
    start = time.perf_counter()
    worst = 0.0
    for spec, strat in _instances(seed, 200, (1, 2, 3, 4)):
        coeffs = coding.derive_coefficients(spec, strat)
        joint = build_joint(spec, strat, coeffs)
        value = conditional_mutual_information(joint, ("S1", "S2"), "V", "Y2")
        worst = max(worst, abs(value))
    elapsed = time.perf_counter() - start
    return CriterionResult(
        3,
        "masking independence",
        worst <= 1e-10,
        f"max |I(S;V|Y2)| = {worst:.3e} (tol 1e-10)",
        elapsed,
    )


def criterion_enhanced_channel(seed: int = 202) -> CriterionResult:
    """Orderings, proportionality, and preservation hold for 100 degraded
    channels at four weights; the scalar clipped case is exact."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = 0
    for i in range(100):
        t = (1, 2, 3)[i % 3]
        spec = random_spec(rng, t, degraded=True)
        for mu in (1.1, 1.5, 3.0, 10.0):
            try:
                sol = extremal.solve_gaussian_subproblem(spec, mu)
                enh = extremal.enhance(spec, mu, sol.K_X_star, sol.M1, sol.M2)
            except Exception:
                failures += 1
                continue
            prop = float(np.abs(enh.K_X_star + enh.K_Zt1 - enh.K_Zt / (mu - 1.0)).max())
            pres = extremal.preservation_residuals(spec, enh)
            orderings = -min(
                float(np.linalg.eigvalsh(enh.K_Zt1)[0]),
                float(np.linalg.eigvalsh(spec.K_Z1 - enh.K_Zt1)[0]),
                float(np.linalg.eigvalsh(enh.K_Zt)[0]),
                float(np.linalg.eigvalsh(spec.K_Z2 - enh.K_Zt2)[0]),
            )
            worst = max(worst, prop, pres.noise_identity, pres.power_identity, orderings)

    scalar = ChannelSpec(
        t=1, K=[[1.0]], K_S1=[[1.0]], K_S2=[[1.0]], K_Z1=[[1.0]], K_Z2=[[2.0]]
    )
    sol = extremal.solve_gaussian_subproblem(scalar, 3.0)
    enh = extremal.enhance(scalar, 3.0, sol.K_X_star, sol.M1, sol.M2)
    exact = (
        abs(float(sol.K_X_star[0, 0])) <= 1e-12
        and abs(float(sol.M1[0, 0]) - 0.25) <= 1e-12
        and abs(float(enh.K_Zt1[0, 0]) - 2.0 / 3.0) <= 1e-12
    )
    elapsed = time.perf_counter() - start
    passed = failures == 0 and worst <= 1e-8 and exact
    return CriterionResult(
        4,
        "enhanced channel",
        passed,
        f"{failures} failures, worst margin {worst:.3e} (tol 1e-8), "
        f"scalar case {'exact' if exact else 'WRONG'}",
        elapsed,
    )


def criterion_scalar_kkt() -> CriterionResult:
    """Solver matches the scalar closed form clip((K_Z2 - mu K_Z1)/(mu-1), 0, K)."""
    start = time.perf_counter()
    z1, z2 = 1.0, 2.0
    worst = 0.0
    for mu in (1.1, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 7.5, 10.0):
        for cap in (0.25, 0.5, 1.0, 2.0, 4.0):
            spec = ChannelSpec(
                t=1, K=[[cap]], K_S1=[[1.0]], K_S2=[[1.0]], K_Z1=[[z1]], K_Z2=[[z2]]
            )
            sol = extremal.solve_gaussian_subproblem(spec, mu)
            closed = min(max((z2 - mu * z1) / (mu - 1.0), 0.0), cap)
            worst = max(worst, abs(float(sol.K_X_star[0, 0]) - closed))
    elapsed = time.perf_counter() - start
    return CriterionResult(
        5,
        "scalar KKT closed form",
        worst <= 1e-7,
        f"max |K_X* - closed form| = {worst:.3e} over 50 grid points (tol 1e-7)",
        elapsed,
    )


def criterion_extremal_stress(seed: int = 303) -> CriterionResult:
    """No admissible non-Gaussian candidate beats the Gaussian optimum."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_margin = math.inf
    worst_gauss = 0.0
    for _ in range(5):
        spec = random_spec(rng, 1, degraded=True)
        mu = float(rng.uniform(1.2, 4.0))
        sol = extremal.solve_gaussian_subproblem(spec, mu)
        gauss = extremal.Candidate1D.gaussian(max(float(sol.K_X_star[0, 0]), 0.0))
        res = extremal.candidate_margin(spec, mu, gauss)
        worst_gauss = max(worst_gauss, abs(res.margin))
        for _ in range(10):
            cand = random_candidate(rng, float(spec.K[0, 0]))
            res = extremal.candidate_margin(spec, mu, cand)
            worst_margin = min(worst_margin, res.margin)
    elapsed = time.perf_counter() - start
    passed = worst_margin >= -1e-6 and worst_gauss <= 1e-6 and elapsed < 60.0
    return CriterionResult(
        6,
        "extremal inequality stress",
        passed,
        f"min margin {worst_margin:.3e} (>= -1e-6), |gaussian margin| "
        f"{worst_gauss:.3e} (<= 1e-6), {elapsed:.1f}s (limit 60s)",
        elapsed,
    )


def criterion_epi_bound(seed: int = 404) -> CriterionResult:
    """The closed-form argmax matches a fine grid on 20 random (mu, b) pairs."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    dominated = True
    for _ in range(20):
        mu = float(rng.uniform(1.05, 8.0))
        b = float(rng.uniform(-2.0, 2.0))
        t = int(rng.integers(1, 4))
        a_star = extremal.epi_bound_argmax(b, mu, t)
        grid = np.arange(a_star - 3.0, a_star + 3.0 + 1e-12, 1e-3)
        values = np.array([extremal.epi_bound(a, b, mu, t) for a in grid])
        worst = max(worst, abs(float(grid[int(np.argmax(values))]) - a_star))
        dominated = dominated and bool(
            np.all(extremal.epi_bound(a_star, b, mu, t) >= values - 1e-12)
        )
    elapsed = time.perf_counter() - start
    return CriterionResult(
        7,
        "entropy-power bound maximizer",
        worst <= 1e-3 and dominated,
        f"max |grid argmax - closed form| = {worst:.2e} (tol 1e-3), "
        f"dominance {'holds' if dominated else 'FAILS'}",
        elapsed,
    )


def _random_scalar_spec_for_budget(rng: np.random.Generator) -> ChannelSpec:
    # K > K_S1 keeps the zero-leakage strategy inside the power budget
    return ChannelSpec(
        t=1,
        K=[[float(rng.uniform(1.5, 3.0))]],
        K_S1=[[float(rng.uniform(0.3, 1.2))]],
        K_S2=[[float(rng.uniform(0.3, 1.2))]],
        K_Z1=[[float(rng.uniform(0.5, 1.5))]],
        K_Z2=[[float(rng.uniform(0.5, 2.0))]],
    )


def criterion_optimizer_grid(seed: int = 505) -> CriterionResult:
    """Multi-start optimizer matches the exhaustive scalar grid and budgets
    act monotonically."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    mono_ok = True
    for _ in range(20):
        spec = _random_scalar_spec_for_budget(rng)
        mu = float(rng.uniform(1.0, 4.0))
        results = {}
        for e1 in (math.inf, 0.0, 0.05):
            query = frontier.FrontierQuery(
                spec=spec,
                mu=mu,
                e1_budget=e1,
                options=frontier.SolverOptions(seed=int(rng.integers(1 << 30))),
            )
            try:
                point = frontier.maximize_weighted(query)
            except InfeasibleError:
                results[e1] = None
                continue
            results[e1] = point.objective
            oracle = frontier.scalar_grid_oracle(spec, mu, e1_budget=e1)
            if oracle.feasible:
                worst = max(worst, abs(point.objective - oracle.objective))
        if results.get(0.0) is not None and results.get(0.05) is not None:
            mono_ok = mono_ok and results[0.0] <= results[0.05] + 1e-6
        if results.get(0.05) is not None and results.get(math.inf) is not None:
            mono_ok = mono_ok and results[0.05] <= results[math.inf] + 1e-6
    elapsed = time.perf_counter() - start
    return CriterionResult(
        8,
        "optimizer vs grid oracle",
        worst <= 1e-3 and mono_ok,
        f"max |solver - grid| = {worst:.3e} (tol 1e-3), budget monotonicity "
        f"{'holds' if mono_ok else 'FAILS'}",
        elapsed,
    )


def criterion_monte_carlo(seed: int = 606) -> CriterionResult:
    """Plug-in estimates reproduce every closed form at n = 10^6, and a
    corrupted oracle fails loudly."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst_z = 0.0
    all_pass = True
    first = None
    for i in range(15):
        t = 1 if i < 10 else 2
        spec = random_spec(rng, t)
        strat = random_strategy(rng, spec)
        if first is None:
            first = (spec, strat)
        report = mcval.cross_check(spec, strat, n=10**6, seed=int(rng.integers(1 << 30)))
        worst_z = max(worst_z, max(abs(z) for z in report.z_scores.values()))
        all_pass = all_pass and report.passed
    corrupted = mcval.cross_check(first[0], first[1], n=10**6, seed=seed, oracle_offset=0.1)
    corrupt_fails = not corrupted.passed
    elapsed = time.perf_counter() - start
    passed = all_pass and corrupt_fails and elapsed < 300.0
    return CriterionResult(
        9,
        "Monte-Carlo cross-check",
        passed,
        f"max |z| = {worst_z:.2f} (limit 4), corrupted oracle "
        f"{'FAILS as it must' if corrupt_fails else 'passes (BAD)'}, "
        f"{elapsed:.1f}s (limit 300s)",
        elapsed,
    )


def criterion_reductions() -> CriterionResult:
    """Interference-free reduction and the vanishing-state limit."""
    start = time.perf_counter()
    t = 2
    base = np.array([[2.0, 0.3], [0.3, 1.5]])
    k_z1 = np.array([[1.0, 0.1], [0.1, 0.8]])
    k_z2 = np.array([[1.5, 0.2], [0.2, 1.7]])
    zero = np.zeros((t, t))
    full_power = Strategy(K_X1=base, Sigma_XS1=zero, Sigma_XS2=zero)

    r1_values = []
    for scale in np.linspace(0.1, 3.0, 10):
        spec = ChannelSpec(
            t=t,
            K=base,
            K_S1=scale * np.array([[1.0, 0.2], [0.2, 0.9]]),
            K_S2=np.eye(t),
            K_Z1=k_z1,
            K_Z2=k_z2,
        )
        r1_values.append(region.eval_region(spec, full_power).R1)
    costa_dev = max(r1_values) - min(r1_values)

    strat = Strategy(K_X1=0.5 * base, Sigma_XS1=zero, Sigma_XS2=zero)
    leaks = []
    rate_dev = 0.0
    no_state = None
    for eps in (1e-2, 1e-4, 1e-6):
        spec = ChannelSpec(
            t=t, K=base, K_S1=eps * np.eye(t), K_S2=eps * np.eye(t), K_Z1=k_z1, K_Z2=k_z2
        )
        point = region.eval_region(spec, strat)
        leaks.append(max(point.E1, point.E2))
        if no_state is None:
            no_state = (point.R1, point.R2)
        rate_dev = max(
            rate_dev, abs(point.R1 - no_state[0]), abs(point.R2 - no_state[1])
        )
    vanishing = leaks[0] > leaks[1] > leaks[2] > 0.0 and leaks[2] < 1e-5
    elapsed = time.perf_counter() - start
    passed = costa_dev <= 1e-12 and vanishing and rate_dev <= 1e-12
    return CriterionResult(
        10,
        "special-case reductions",
        passed,
        f"interference-free R1 deviation {costa_dev:.2e} (tol 1e-12), leakages "
        f"{leaks[0]:.2e} > {leaks[1]:.2e} > {leaks[2]:.2e} -> 0, rate deviation "
        f"{rate_dev:.2e}",
        elapsed,
    )


CRITERIA = (
    criterion_inner_outer,
    criterion_wdp_residuals,
    criterion_masking_independence,
    criterion_enhanced_channel,
    criterion_scalar_kkt,
    criterion_extremal_stress,
    criterion_epi_bound,
    criterion_optimizer_grid,
    criterion_monte_carlo,
    criterion_reductions,
)


def run_all(verbose: bool = False) -> list[CriterionResult]:
    """Run every acceptance criterion in order, suppressing benign warnings."""
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for check in CRITERIA:
            result = check()
            results.append(result)
            if verbose:
                status = "PASS" if result.passed else "FAIL"
                print(f"[{result.index:2d}/10] {status} {result.name}: {result.detail}")
    return results
