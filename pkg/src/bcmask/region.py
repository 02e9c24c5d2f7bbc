"""Closed-form evaluation of the rate-leakage quadruple.

With ``K_eff = K - Sigma_XS K_S^{-1} Sigma_XS^T`` the four quantities are

    R1  = 1/2 ln |K_X1 + K_Z1| / |K_Z1|
    R2  = 1/2 ln |K_eff + K_Z2| / |K_X1 + K_Z2|
    E_k = 1/2 ln |K + Sigma_XSk + Sigma_XSk^T + K_Sk + K_Zk| / |K_eff + K_Zk|

all in nats.  Every ratio is computed as a difference of Cholesky
log-determinants, never through explicit determinants.  The leakage lower
bound is evaluated independently through the conditional covariance of the
output given the stacked state, so its agreement with ``E_k`` crosses two
derivations rather than one code path.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DomainError, NegativeRateWarning
from .linalg import BlockCov, logdet, mutual_information
from .model import (
    ChannelSpec,
    RegionPoint,
    Strategy,
    effective_cap,
    require_feasible,
)

_CLAMP_TOL = 1e-9


def _clamp(value: float, name: str) -> float:
    if value >= 0.0:
        return value
    if value < -_CLAMP_TOL:
        warnings.warn(
            f"{name} = {value:.3e} is negative beyond numerical noise; clamped to 0",
            NegativeRateWarning,
            stacklevel=3,
        )
    else:
        warnings.warn(
            f"{name} = {value:.3e} clamped to 0", NegativeRateWarning, stacklevel=3
        )
    return 0.0


def _output_cov(spec: ChannelSpec, strategy: Strategy, k: int) -> np.ndarray:
    sigma = strategy.Sigma_XS1 if k == 1 else strategy.Sigma_XS2
    k_s = spec.K_S1 if k == 1 else spec.K_S2
    k_z = spec.K_Z1 if k == 1 else spec.K_Z2
    return spec.K + sigma + sigma.T + k_s + k_z


def eval_region(spec: ChannelSpec, strategy: Strategy) -> RegionPoint:
    """Rates and exact leakages of a feasible strategy, in nats.

    Raises :class:`InfeasibleStrategyError` when validation fails and
    :class:`NotPositiveDefiniteError` on degenerate denominators.  Tiny
    negative values caused by roundoff at boundary strategies are clamped
    to zero with a :class:`NegativeRateWarning`.
    """
    require_feasible(spec, strategy)
    k_eff = effective_cap(spec, strategy)

    r1 = 0.5 * (logdet(strategy.K_X1 + spec.K_Z1, "K_X1 + K_Z1") - logdet(spec.K_Z1, "K_Z1"))
    r2 = 0.5 * (
        logdet(k_eff + spec.K_Z2, "K_eff + K_Z2")
        - logdet(strategy.K_X1 + spec.K_Z2, "K_X1 + K_Z2")
    )
    e1 = 0.5 * (
        logdet(_output_cov(spec, strategy, 1), "cov(Y1)")
        - logdet(k_eff + spec.K_Z1, "K_eff + K_Z1")
    )
    e2 = 0.5 * (
        logdet(_output_cov(spec, strategy, 2), "cov(Y2)")
        - logdet(k_eff + spec.K_Z2, "K_eff + K_Z2")
    )
    return RegionPoint(
        R1=_clamp(r1, "R1"), R2=_clamp(r2, "R2"), E1=_clamp(e1, "E1"), E2=_clamp(e2, "E2")
    )


def weighted_sum_upper(spec: ChannelSpec, strategy: Strategy, mu: float) -> float:
    """The weighted sum-rate bound R1 + mu * R2 at the given covariances.

    Requires mu > 1.  The bound is tight at the evaluating strategy, so this
    equals ``R1 + mu * R2`` of :func:`eval_region` exactly.
    """
    if not mu > 1.0:
        raise DomainError(f"weight must exceed 1, got {mu}")
    point = eval_region(spec, strategy)
    return point.R1 + mu * point.R2


def leakage_lower_bound(spec: ChannelSpec, strategy: Strategy, k: int) -> float:
    """I(S; Y_k) evaluated through h(Y_k) - h(Y_k | S1, S2), in nats.

    This is the converse route: the mutual information of the stacked state
    with receiver k's output, computed from the (S1, S2, Y_k) covariance by
    Schur conditioning.  For every feasible strategy it coincides with the
    corresponding leakage of :func:`eval_region`.
    """
    if k not in (1, 2):
        raise DomainError(f"receiver index must be 1 or 2, got {k}")
    require_feasible(spec, strategy)
    t = spec.t
    k_s = spec.K_S1 if k == 1 else spec.K_S2
    # cov(S_j, Y_k) = Sigma_XSj^T + (K_Sk if j == k else 0)
    c1 = strategy.Sigma_XS1.T + (k_s if k == 1 else np.zeros((t, t)))
    c2 = strategy.Sigma_XS2.T + (k_s if k == 2 else np.zeros((t, t)))
    s_y = _output_cov(spec, strategy, k)
    cov = np.block(
        [
            [spec.K_S1, np.zeros((t, t)), c1],
            [np.zeros((t, t)), spec.K_S2, c2],
            [c1.T, c2.T, s_y],
        ]
    )
    bc = BlockCov(labels=("S1", "S2", "Yk"), dims=(t, t, t), cov=cov)
    return _clamp(mutual_information(bc, ("S1", "S2"), "Yk"), f"E{k}")
