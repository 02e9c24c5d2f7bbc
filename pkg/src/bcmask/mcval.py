"""Monte-Carlo cross-validation of the closed-form information quantities.

Samples the jointly Gaussian system, plugs the sample covariance into the
Gaussian mutual-information formulas, and compares against the exact
second-order values with jackknife standard errors.  A statistical PASS
requires every z-score to stay within four standard errors, which keeps
the per-term false-alarm probability around 6e-5.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .coding import derive_coefficients, mi_terms
from .errors import DegenerateSampleError, DomainError, LowSampleWarning
from .linalg import BlockCov, mutual_information
from .model import ChannelSpec, Strategy, build_joint

import warnings

Z_LIMIT = 4.0
JACKKNIFE_FOLDS = 20


@dataclass(frozen=True)
class JointSamples:
    """Row-major draws of the stacked joint vector with its block layout."""

    data: np.ndarray
    labels: tuple[str, ...]
    dims: tuple[int, ...]
    seed: int

    def indices(self, labels: Iterable[str] | str) -> np.ndarray:
        if isinstance(labels, str):
            labels = (labels,)
        offsets, pos = {}, 0
        for lab, d in zip(self.labels, self.dims):
            offsets[lab] = (pos, pos + d)
            pos += d
        idx: list[int] = []
        for lab in labels:
            lo, hi = offsets[lab]
            idx.extend(range(lo, hi))
        return np.asarray(idx, dtype=int)

    @property
    def n(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class McReport:
    """Estimates with standard errors against their closed forms."""

    estimates: dict
    closed_forms: dict
    z_scores: dict
    n: int
    seed: int

    @property
    def passed(self) -> bool:
        return all(abs(z) <= Z_LIMIT for z in self.z_scores.values())

    def to_dict(self) -> dict:
        terms = {}
        for name, (est, se) in self.estimates.items():
            terms[name] = {
                "estimate": est,
                "std_error": se,
                "closed_form": self.closed_forms[name],
                "z": self.z_scores[name],
            }
        return {"n": self.n, "seed": self.seed, "passed": self.passed, "terms": terms}


def sample_joint(joint: BlockCov, n: int, seed: int) -> JointSamples:
    """n i.i.d. draws of the stacked vector, deterministic per seed.

    The joint covariance is factored by eigendecomposition with negative
    eigenvalues clipped at zero (the joint is singular by construction:
    several blocks are deterministic linear images of the base blocks).
    """
    if n < 2:
        raise DomainError(f"need at least 2 samples, got {n}")
    dim = joint.dim
    if n < max(1000, 25 * dim * dim):
        warnings.warn(
            f"n = {n} is small for dimension {dim}; estimates will be noisy",
            LowSampleWarning,
            stacklevel=2,
        )
    w, v = np.linalg.eigh(joint.cov)
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, dim)) @ factor.T
    return JointSamples(data=data, labels=joint.labels, dims=joint.dims, seed=int(seed))


class _FoldedMoments:
    """Per-fold sufficient statistics enabling cheap leave-one-fold-out covariances."""

    def __init__(self, data: np.ndarray, folds: int):
        n = data.shape[0]
        if folds < 2 or n < 2 * folds:
            raise DomainError(f"need at least {2 * folds} samples for {folds} folds")
        bounds = np.linspace(0, n, folds + 1).astype(int)
        self.counts = []
        self.sums = []
        self.outers = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            chunk = data[lo:hi]
            self.counts.append(hi - lo)
            self.sums.append(chunk.sum(axis=0))
            self.outers.append(chunk.T @ chunk)
        self.total_count = n
        self.total_sum = np.sum(self.sums, axis=0)
        self.total_outer = np.sum(self.outers, axis=0)

    @staticmethod
    def _cov(count: int, vec_sum: np.ndarray, outer: np.ndarray) -> np.ndarray:
        mean = vec_sum / count
        cov = outer / count - np.outer(mean, mean)
        return 0.5 * (cov + cov.T)

    def cov_full(self) -> np.ndarray:
        return self._cov(self.total_count, self.total_sum, self.total_outer)

    def cov_without(self, fold: int) -> np.ndarray:
        return self._cov(
            self.total_count - self.counts[fold],
            self.total_sum - self.sums[fold],
            self.total_outer - self.outers[fold],
        )

    @property
    def folds(self) -> int:
        return len(self.counts)


def _logdet_sub(cov: np.ndarray, idx: np.ndarray) -> float:
    sign, value = np.linalg.slogdet(cov[np.ix_(idx, idx)])
    if sign <= 0:
        raise DegenerateSampleError("singular sample covariance block")
    return float(value)


def _mi_from_cov(cov: np.ndarray, ia: np.ndarray, ib: np.ndarray) -> float:
    iab = np.concatenate([ia, ib])
    return 0.5 * (_logdet_sub(cov, ia) + _logdet_sub(cov, ib) - _logdet_sub(cov, iab))


def _jackknife(
    functional: Callable[[np.ndarray], float], moments: _FoldedMoments
) -> tuple[float, float]:
    estimate = functional(moments.cov_full())
    loo = np.array([functional(moments.cov_without(i)) for i in range(moments.folds)])
    g = moments.folds
    se = float(np.sqrt((g - 1) / g * np.sum((loo - loo.mean()) ** 2)))
    return float(estimate), se


def plugin_mi(
    samples: JointSamples,
    block_a: Iterable[str] | str,
    block_b: Iterable[str] | str,
    folds: int = JACKKNIFE_FOLDS,
) -> tuple[float, float]:
    """Plug-in Gaussian mutual information with a jackknife standard error."""
    ia = samples.indices(block_a)
    ib = samples.indices(block_b)
    if samples.n <= len(ia) + len(ib) + 2:
        raise DomainError(
            f"need more than {len(ia) + len(ib) + 2} samples, got {samples.n}"
        )
    moments = _FoldedMoments(samples.data, folds)
    return _jackknife(lambda cov: _mi_from_cov(cov, ia, ib), moments)


def plugin_cmi(
    samples: JointSamples,
    block_a: Iterable[str] | str,
    block_b: Iterable[str] | str,
    given: Iterable[str] | str,
    folds: int = JACKKNIFE_FOLDS,
) -> tuple[float, float]:
    """Plug-in conditional mutual information I(a; b | given)."""
    ia = samples.indices(block_a)
    ib = samples.indices(block_b)
    ig = samples.indices(given)
    moments = _FoldedMoments(samples.data, folds)

    def functional(cov: np.ndarray) -> float:
        return _mi_from_cov(cov, ia, np.concatenate([ib, ig])) - _mi_from_cov(cov, ia, ig)

    return _jackknife(functional, moments)


def cross_check(
    spec: ChannelSpec,
    strategy: Strategy,
    n: int,
    seed: int,
    oracle_offset: float = 0.0,
) -> McReport:
    """Estimate every information term of the construction and z-score it
    against the exact second-order value.

    ``oracle_offset`` shifts every closed form by a constant; it exists so
    the harness can demonstrate its own sensitivity (a corrupted oracle must
    FAIL loudly).
    """
    coeffs = derive_coefficients(spec, strategy)
    joint = build_joint(spec, strategy, coeffs)
    terms = mi_terms(joint)
    state = ("S1", "S2")
    closed = {
        "rU": terms.rU,
        "rV": terms.rV,
        "mask1": terms.mask1,
        "mask2": terms.mask2,
        "marton": terms.marton,
        "leakage1": mutual_information(joint, state, "Y1"),
        "leakage2": mutual_information(joint, state, "Y2"),
    }
    closed = {k: v + oracle_offset for k, v in closed.items()}

    samples = sample_joint(joint, n, seed)
    moments = _FoldedMoments(samples.data, JACKKNIFE_FOLDS)
    idx = {lab: samples.indices(lab) for lab in samples.labels}
    i_state = np.concatenate([idx["S1"], idx["S2"]])

    def mi(a, b):
        return lambda cov: _mi_from_cov(cov, a, b)

    def diff(a, b1, b2):
        return lambda cov: _mi_from_cov(cov, a, b1) - _mi_from_cov(cov, a, b2)

    functionals = {
        "rU": diff(idx["U"], idx["Y1"], np.concatenate([idx["V"], i_state])),
        "rV": diff(idx["V"], idx["Y2"], i_state),
        "mask1": mi(i_state, np.concatenate([idx["U"], idx["Y1"]])),
        "mask2": mi(i_state, np.concatenate([idx["V"], idx["Y2"]])),
        "marton": diff(idx["U"], np.concatenate([idx["V"], i_state]), i_state),
        "leakage1": mi(i_state, idx["Y1"]),
        "leakage2": mi(i_state, idx["Y2"]),
    }

    estimates = {}
    z_scores = {}
    for name, functional in functionals.items():
        est, se = _jackknife(functional, moments)
        estimates[name] = (est, se)
        gap = est - closed[name]
        if se > 0.0:
            z_scores[name] = gap / se
        else:
            z_scores[name] = 0.0 if gap == 0.0 else np.inf
    return McReport(
        estimates=estimates, closed_forms=closed, z_scores=z_scores, n=int(n), seed=int(seed)
    )
