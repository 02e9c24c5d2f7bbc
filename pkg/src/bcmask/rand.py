"""Seeded random instance generators shared by tests, the verification
command, and the acceptance checks.  All draws flow from caller-provided
``numpy`` generators, so identical seeds give identical instances."""

from __future__ import annotations

import numpy as np

from .extremal import Candidate1D, MixtureComponent
from .model import ChannelSpec, Strategy


def random_pd(rng: np.random.Generator, t: int, min_eig: float = 0.2, scale: float = 1.0) -> np.ndarray:
    """Random positive definite matrix with eigenvalues bounded away from zero."""
    a = rng.standard_normal((t, t))
    m = a @ a.T / t + min_eig * np.eye(t)
    return scale * 0.5 * (m + m.T)


def random_psd(rng: np.random.Generator, t: int, scale: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((t, t))
    m = a @ a.T / t
    return scale * 0.5 * (m + m.T)


def random_orth(rng: np.random.Generator, t: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((t, t)))
    return q * np.sign(np.diag(r))


def random_spec(rng: np.random.Generator, t: int, degraded: bool = False) -> ChannelSpec:
    """Random channel with O(1) covariance scales; ``degraded`` forces
    K_Z1 <= K_Z2 strictly."""
    k = random_pd(rng, t, min_eig=0.3, scale=float(rng.uniform(0.8, 2.5)))
    k_s1 = random_pd(rng, t, min_eig=0.25, scale=float(rng.uniform(0.6, 1.8)))
    k_s2 = random_pd(rng, t, min_eig=0.25, scale=float(rng.uniform(0.6, 1.8)))
    k_z1 = random_pd(rng, t, min_eig=0.25, scale=float(rng.uniform(0.6, 1.5)))
    if degraded:
        k_z2 = k_z1 + random_psd(rng, t, scale=float(rng.uniform(0.3, 1.2))) + 0.05 * np.eye(t)
    else:
        k_z2 = random_pd(rng, t, min_eig=0.25, scale=float(rng.uniform(0.6, 1.8)))
    return ChannelSpec(t=t, K=k, K_S1=k_s1, K_S2=k_s2, K_Z1=k_z1, K_Z2=k_z2)


def _inv_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v / np.sqrt(np.clip(w, 1e-15, None))) @ v.T


def random_strategy(
    rng: np.random.Generator,
    spec: ChannelSpec,
    cancel_lo: float = 0.05,
    cancel_hi: float = 0.75,
) -> Strategy:
    """Random feasible strategy.

    Cross-covariances are drawn and rescaled so the cancellation term eats a
    uniform fraction of the power cap, then K_X1 fills a random contraction
    of what remains, so both feasibility eigenvalue margins stay positive.
    """
    t = spec.t
    sig1 = rng.standard_normal((t, t)) * 0.5
    sig2 = rng.standard_normal((t, t)) * 0.5
    q = sig1 @ np.linalg.solve(spec.K_S1, sig1.T) + sig2 @ np.linalg.solve(spec.K_S2, sig2.T)
    q = 0.5 * (q + q.T)
    inv_root = _inv_sqrt(spec.K)
    beta = float(np.linalg.eigvalsh(inv_root @ q @ inv_root)[-1])
    frac = float(rng.uniform(cancel_lo, cancel_hi))
    if beta > 1e-12:
        shrink = np.sqrt(frac / beta)
        sig1, sig2 = shrink * sig1, shrink * sig2
        q = sig1 @ np.linalg.solve(spec.K_S1, sig1.T) + sig2 @ np.linalg.solve(spec.K_S2, sig2.T)
        q = 0.5 * (q + q.T)
    k_eff = spec.K - q
    w, v = np.linalg.eigh(k_eff)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    basis = random_orth(rng, t)
    fill = (basis * rng.uniform(0.05, 0.95, size=t)) @ basis.T
    k_x1 = root @ fill @ root
    return Strategy(K_X1=0.5 * (k_x1 + k_x1.T), Sigma_XS1=sig1, Sigma_XS2=sig2)


def random_candidate(rng: np.random.Generator, power_cap: float) -> Candidate1D:
    """Random non-Gaussian mixture candidate with second moment below the cap."""
    n_comp = int(rng.integers(1, 4))
    weights = rng.dirichlet(np.ones(n_comp))
    comps = []
    for w in weights:
        kind = rng.choice(["gaussian", "uniform", "two_point"])
        if kind == "gaussian":
            params = (float(rng.normal(0.0, 0.5)), float(rng.uniform(0.1, 1.5)))
        elif kind == "uniform":
            center = float(rng.normal(0.0, 0.5))
            half = float(rng.uniform(0.2, 2.0))
            params = (center - half, center + half)
        else:
            params = (
                -float(rng.uniform(0.2, 1.5)),
                float(rng.uniform(0.2, 1.5)),
                float(rng.uniform(0.2, 0.8)),
            )
        comps.append(MixtureComponent(float(w), kind, params))
    raw = Candidate1D(tuple(comps))
    target = float(rng.uniform(0.25, 0.95)) * power_cap
    scale = np.sqrt(target / raw.second_moment())
    return Candidate1D(tuple(c.scaled(float(scale)) for c in raw.components))
