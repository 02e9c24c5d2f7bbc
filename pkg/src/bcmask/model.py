"""Channel and strategy data model, feasibility validation, and the exact
joint second-order law of the coded system.

A channel instance fixes the antenna dimension ``t``, the transmit
covariance cap ``K``, the per-receiver additive state covariances ``K_S1``
and ``K_S2``, and the noise covariances ``K_Z1`` and ``K_Z2``.  A transmit
strategy fixes the private-signal covariance ``K_X1`` and the
cross-covariances ``Sigma_XS1``, ``Sigma_XS2`` between the transmit signal
and the two states.  The second private covariance is derived so the full
power budget is spent:

    K_X2 = K - K_X1 - Sigma_XS K_S^{-1} Sigma_XS^T,

with ``Sigma_XS = [Sigma_XS1  Sigma_XS2]`` and
``K_S = blockdiag(K_S1, K_S2)``.  Feasibility is exactly
``0 <= K_X1 <= K - Sigma_XS K_S^{-1} Sigma_XS^T`` in the PSD order.

JSON serialization is strict: every matrix is a row-major ``t x t`` nested
list, shapes are validated, and nothing is broadcast silently.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .errors import (
    DegenerateChannelWarning,
    InfeasibleStrategyError,
    InvalidMatrixError,
    ShapeError,
)
from .linalg import (
    BlockCov,
    as_matrix,
    as_sym,
    cholesky_lower,
    min_eigenvalue,
    psd_project,
    solve_psd,
)

if TYPE_CHECKING:  # pragma: no cover
    from .coding import CodingCoefficients

FEAS_TOL = 1e-9

JOINT_LABELS = ("X1", "X2", "S1", "S2", "Z1", "Z2", "U", "V", "X", "Y1", "Y2")

SPEC_MATRIX_KEYS = ("K", "K_S1", "K_S2", "K_Z1", "K_Z2")
STRATEGY_MATRIX_KEYS = ("K_X1", "Sigma_XS1", "Sigma_XS2")


def _pd_or_warn(mat: np.ndarray, name: str) -> None:
    """States and noises should be positive definite; a singular one is
    accepted at the boundary but flagged, since several formulas invert it."""
    try:
        cholesky_lower(mat, name=name)
    except Exception:
        if min_eigenvalue(mat) < -FEAS_TOL * (1.0 + float(np.trace(np.abs(mat)))):
            raise
        warnings.warn(
            f"{name} is singular; boundary semantics (pseudo-inverse) apply",
            DegenerateChannelWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class ChannelSpec:
    """Two-user MIMO Gaussian broadcast channel with additive state.

    Outputs are ``Y_k = X + S_k + Z_k`` for k in {1, 2}, with all vectors of
    dimension ``t`` and covariances in consistent power units.
    """

    t: int
    K: np.ndarray
    K_S1: np.ndarray
    K_S2: np.ndarray
    K_Z1: np.ndarray
    K_Z2: np.ndarray

    def __post_init__(self):
        t = int(self.t)
        if t < 1:
            raise ShapeError(f"t must be a positive integer, got {self.t}")
        object.__setattr__(self, "t", t)
        for key in SPEC_MATRIX_KEYS:
            mat = as_sym(getattr(self, key), name=key)
            if mat.shape != (t, t):
                raise ShapeError(f"{key} must be {t}x{t}, got {mat.shape}")
            object.__setattr__(self, key, mat)
        if min_eigenvalue(self.K) < -FEAS_TOL * (1.0 + float(np.trace(self.K))):
            raise InvalidMatrixError("K must be positive semidefinite")
        for key in ("K_S1", "K_S2", "K_Z1", "K_Z2"):
            _pd_or_warn(getattr(self, key), key)

    @property
    def degraded(self) -> bool:
        """True iff K_Z1 <= K_Z2 in the PSD order (within tolerance).

        Only the enhanced-channel operations require this ordering.
        """
        gap = self.K_Z2 - self.K_Z1
        scale = 1.0 + float(np.trace(self.K_Z2))
        return min_eigenvalue(gap) >= -FEAS_TOL * scale

    def to_dict(self) -> dict:
        out: dict = {"t": self.t}
        for key in SPEC_MATRIX_KEYS:
            out[key] = getattr(self, key).tolist()
        return out


@dataclass(frozen=True)
class Strategy:
    """Transmitter degrees of freedom: K_X1 plus the two state cross-covariances."""

    K_X1: np.ndarray
    Sigma_XS1: np.ndarray
    Sigma_XS2: np.ndarray

    def __post_init__(self):
        k_x1 = as_sym(self.K_X1, name="K_X1")
        t = k_x1.shape[0]
        object.__setattr__(self, "K_X1", k_x1)
        object.__setattr__(self, "Sigma_XS1", as_matrix(self.Sigma_XS1, (t, t), "Sigma_XS1"))
        object.__setattr__(self, "Sigma_XS2", as_matrix(self.Sigma_XS2, (t, t), "Sigma_XS2"))

    @property
    def t(self) -> int:
        return self.K_X1.shape[0]

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "K_X1": self.K_X1.tolist(),
            "Sigma_XS1": self.Sigma_XS1.tolist(),
            "Sigma_XS2": self.Sigma_XS2.tolist(),
        }

    @classmethod
    def zero(cls, t: int) -> "Strategy":
        z = np.zeros((t, t))
        return cls(K_X1=z, Sigma_XS1=z, Sigma_XS2=z)


@dataclass(frozen=True)
class RegionPoint:
    """An achievable (R1, R2, E1, E2) quadruple, all entries in nats per use."""

    R1: float
    R2: float
    E1: float
    E2: float

    def __post_init__(self):
        for name in ("R1", "R2", "E1", "E2"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val < 0.0:
                raise ValueError(f"{name} must be finite and nonnegative, got {val}")
            object.__setattr__(self, name, val)

    def to_dict(self) -> dict:
        return {"R1": self.R1, "R2": self.R2, "E1": self.E1, "E2": self.E2}

    def in_bits(self) -> dict:
        ln2 = float(np.log(2.0))
        return {k: v / ln2 for k, v in self.to_dict().items()}


@dataclass(frozen=True)
class FeasibilityCheck:
    name: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class FeasibilityReport:
    checks: tuple[FeasibilityCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst(self) -> FeasibilityCheck:
        return min(self.checks, key=lambda c: c.margin)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "margin": c.margin}
                for c in self.checks
            ],
        }


def _check_dims(spec: ChannelSpec, strategy: Strategy) -> None:
    if strategy.t != spec.t:
        raise ShapeError(
            f"strategy dimension {strategy.t} does not match channel dimension {spec.t}"
        )


def sigma_stack(strategy: Strategy) -> np.ndarray:
    """The t x 2t stacked cross-covariance [Sigma_XS1  Sigma_XS2]."""
    return np.hstack([strategy.Sigma_XS1, strategy.Sigma_XS2])


def state_block(spec: ChannelSpec) -> np.ndarray:
    """blockdiag(K_S1, K_S2), the 2t x 2t joint state covariance."""
    t = spec.t
    out = np.zeros((2 * t, 2 * t))
    out[:t, :t] = spec.K_S1
    out[t:, t:] = spec.K_S2
    return out


def _cancellation_term(sigma: np.ndarray, k_s: np.ndarray, name: str) -> np.ndarray:
    """sigma k_s^{-1} sigma^T, with pseudo-inverse semantics at singular k_s.

    At a singular state covariance the cross-covariance must live in the
    state's range; components outside it are not a valid second-order law.
    """
    try:
        out = sigma @ solve_psd(k_s, sigma.T, name=name)
    except Exception:
        pinv = np.linalg.pinv(k_s, hermitian=True)
        residual = sigma - (sigma @ pinv) @ k_s
        if np.abs(residual).max() > 1e-8 * (1.0 + np.abs(sigma).max()):
            raise InvalidMatrixError(
                f"cross-covariance with singular {name} lies outside its range"
            )
        out = sigma @ pinv @ sigma.T
    return 0.5 * (out + out.T)


def state_cancellation(spec: ChannelSpec, strategy: Strategy) -> np.ndarray:
    """Sigma_XS K_S^{-1} Sigma_XS^T, the power spent on state correlation."""
    _check_dims(spec, strategy)
    return _cancellation_term(strategy.Sigma_XS1, spec.K_S1, "K_S1") + _cancellation_term(
        strategy.Sigma_XS2, spec.K_S2, "K_S2"
    )


def effective_cap(spec: ChannelSpec, strategy: Strategy) -> np.ndarray:
    """K - Sigma_XS K_S^{-1} Sigma_XS^T, the cap left for K_X1 + K_X2."""
    return spec.K - state_cancellation(spec, strategy)


def derived_k_x2(spec: ChannelSpec, strategy: Strategy) -> np.ndarray:
    """K_X2 under the full-power split; PSD exactly when the strategy is feasible."""
    return effective_cap(spec, strategy) - strategy.K_X1


def validate(spec: ChannelSpec, strategy: Strategy, tol: float = FEAS_TOL) -> FeasibilityReport:
    """Check the power-split constraints and report per-check eigenvalue margins.

    The report passes iff ``K_X1 >= 0`` and ``K_X1 <= K - Sigma_XS K_S^{-1}
    Sigma_XS^T`` hold within a trace-relative tolerance.  Dimension mismatch
    raises :class:`ShapeError` instead of reporting.
    """
    _check_dims(spec, strategy)
    scale = 1.0 + float(np.trace(spec.K))
    thresh = -tol * scale
    m_x1 = min_eigenvalue(strategy.K_X1)
    m_x2 = min_eigenvalue(derived_k_x2(spec, strategy))
    checks = (
        FeasibilityCheck("K_X1_psd", m_x1 >= thresh, m_x1),
        FeasibilityCheck("power_split_psd", m_x2 >= thresh, m_x2),
    )
    return FeasibilityReport(checks)


def require_feasible(spec: ChannelSpec, strategy: Strategy) -> FeasibilityReport:
    report = validate(spec, strategy)
    if not report.passed:
        worst = report.worst()
        raise InfeasibleStrategyError(
            f"infeasible strategy: check {worst.name!r} has eigenvalue margin "
            f"{worst.margin:.6e}",
            report=report,
        )
    return report


def build_joint(
    spec: ChannelSpec, strategy: Strategy, coeffs: "CodingCoefficients"
) -> BlockCov:
    """Exact second-order law of (X1, X2, S1, S2, Z1, Z2, U, V, X, Y1, Y2).

    The base blocks are independent with covariances (K_X1, K_X2, K_S1,
    K_S2, K_Z1, K_Z2); the remaining blocks are their linear images

        X  = X1 + X2 + B1 S1 + B2 S2
        U  = X1 + A10 X2 + A11 S1 + A12 S2
        V  = X2 + A21 S1 + A22 S2
        Y1 = X + S1 + Z1
        Y2 = X + S2 + Z2.

    No sampling is involved; the returned covariance is exact bookkeeping.
    """
    require_feasible(spec, strategy)
    t = spec.t
    eye = np.eye(t)
    zero = np.zeros((t, t))
    k_x2 = psd_project(derived_k_x2(spec, strategy))

    base = [strategy.K_X1, k_x2, spec.K_S1, spec.K_S2, spec.K_Z1, spec.K_Z2]
    d = np.zeros((6 * t, 6 * t))
    for i, blk in enumerate(base):
        d[i * t : (i + 1) * t, i * t : (i + 1) * t] = blk

    def row(m_x1, m_x2, m_s1, m_s2, m_z1, m_z2):
        return np.hstack([m_x1, m_x2, m_s1, m_s2, m_z1, m_z2])

    b1, b2 = coeffs.B1, coeffs.B2
    rows = [
        row(eye, zero, zero, zero, zero, zero),                      # X1
        row(zero, eye, zero, zero, zero, zero),                      # X2
        row(zero, zero, eye, zero, zero, zero),                      # S1
        row(zero, zero, zero, eye, zero, zero),                      # S2
        row(zero, zero, zero, zero, eye, zero),                      # Z1
        row(zero, zero, zero, zero, zero, eye),                      # Z2
        row(eye, coeffs.A10, coeffs.A11, coeffs.A12, zero, zero),    # U
        row(zero, eye, coeffs.A21, coeffs.A22, zero, zero),          # V
        row(eye, eye, b1, b2, zero, zero),                           # X
        row(eye, eye, b1 + eye, b2, eye, zero),                      # Y1
        row(eye, eye, b1, b2 + eye, zero, eye),                      # Y2
    ]
    transform = np.vstack(rows)
    cov = transform @ d @ transform.T
    return BlockCov(labels=JOINT_LABELS, dims=(t,) * len(JOINT_LABELS), cov=cov)


def _matrix_from_obj(obj, t: int, key: str) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != t:
        raise ShapeError(f"{key} must be a {t}x{t} row-major array")
    rows = []
    for i, r in enumerate(obj):
        if not isinstance(r, list) or len(r) != t:
            raise ShapeError(f"{key}[{i}] must be a row of length {t}")
        for j, x in enumerate(r):
            if not isinstance(x, (int, float)) or isinstance(x, bool):
                raise InvalidMatrixError(f"{key}[{i}][{j}] is not a number")
        rows.append([float(x) for x in r])
    return np.asarray(rows, dtype=float)


def spec_from_dict(data: Mapping) -> ChannelSpec:
    if "t" not in data:
        raise ShapeError("channel object must carry an explicit 't'")
    t = data["t"]
    if not isinstance(t, int) or isinstance(t, bool) or t < 1:
        raise ShapeError(f"'t' must be a positive integer, got {t!r}")
    kwargs = {}
    for key in SPEC_MATRIX_KEYS:
        if key not in data:
            raise ShapeError(f"channel object is missing {key!r}")
        kwargs[key] = _matrix_from_obj(data[key], t, key)
    return ChannelSpec(t=t, **kwargs)


def strategy_from_dict(data: Mapping) -> Strategy:
    if "t" not in data:
        raise ShapeError("strategy object must carry an explicit 't'")
    t = data["t"]
    if not isinstance(t, int) or isinstance(t, bool) or t < 1:
        raise ShapeError(f"'t' must be a positive integer, got {t!r}")
    kwargs = {}
    for key in STRATEGY_MATRIX_KEYS:
        if key not in data:
            raise ShapeError(f"strategy object is missing {key!r}")
        kwargs[key] = _matrix_from_obj(data[key], t, key)
    return Strategy(**kwargs)


def load_spec(path) -> ChannelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def load_strategy(path) -> Strategy:
    with open(path, "r", encoding="utf-8") as fh:
        return strategy_from_dict(json.load(fh))
