"""Symmetric-matrix primitives: PSD tests, Cholesky log-determinants,
Schur complements over labeled block covariances, and eigenvalue-clipping
projection onto the PSD cone.

All functions treat their array arguments as immutable values and hold no
state, so they are safe to call from any number of threads.  Logarithms
are natural; every determinant-based quantity downstream is in nats.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateConditioningWarning,
    InvalidMatrixError,
    NotPositiveDefiniteError,
    ShapeError,
)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-9


def as_sym(a, tol: float = SYMMETRY_TOL, name: str = "matrix") -> np.ndarray:
    """Validate a square symmetric real matrix and return an exactly
    symmetric float copy.

    Symmetry is accepted up to ``tol * (1 + max|a|)``.  Raises
    :class:`ShapeError` for non-square input and :class:`InvalidMatrixError`
    for non-finite entries or asymmetry, naming the offending entry.
    """
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise InvalidMatrixError(f"{name}[{i}][{j}] is not finite")
    gap = np.abs(arr - arr.T)
    bound = tol * (1.0 + (np.abs(arr).max() if arr.size else 0.0))
    if arr.size and gap.max() > bound:
        i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
        raise InvalidMatrixError(
            f"{name} is not symmetric: entry [{i}][{j}]={arr[i, j]!r} vs "
            f"[{j}][{i}]={arr[j, i]!r}"
        )
    return 0.5 * (arr + arr.T)


def as_matrix(a, shape: tuple[int, int], name: str = "matrix") -> np.ndarray:
    """Validate a general real matrix of the given shape (no symmetry)."""
    arr = np.asarray(a, dtype=float)
    if arr.shape != shape:
        raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise InvalidMatrixError(f"{name}[{i}][{j}] is not finite")
    return arr.copy()


def min_eigenvalue(a) -> float:
    """Smallest eigenvalue of the symmetric part of ``a``."""
    arr = np.asarray(a, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (arr + arr.T))[0])


def is_psd(a, tol: float = PSD_TOL) -> bool:
    """PSD test with a trace-relative tolerance.

    True iff the minimum eigenvalue of the symmetrized input is at least
    ``-tol * (1 + sum|diag|)``.  The relative scaling keeps the test
    meaningful for covariances spanning orders of magnitude.
    """
    arr = as_sym(a)
    scale = 1.0 + float(np.abs(np.diag(arr)).sum())
    return min_eigenvalue(arr) >= -tol * scale


def cholesky_lower(a, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor; raises :class:`NotPositiveDefiniteError` on failure."""
    try:
        return np.linalg.cholesky(np.asarray(a, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from exc


def logdet(a, name: str = "matrix") -> float:
    """ln det of a positive definite matrix, via Cholesky.  Deterministic."""
    low = cholesky_lower(a, name=name)
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def solve_psd(a, b, name: str = "matrix") -> np.ndarray:
    """Solve ``a x = b`` for positive definite ``a`` through its Cholesky factor."""
    low = cholesky_lower(a, name=name)
    y = np.linalg.solve(low, np.asarray(b, dtype=float))
    return np.linalg.solve(low.T, y)


def psd_project(a) -> np.ndarray:
    """Project onto the PSD cone by clipping negative eigenvalues to zero.

    Idempotent, and the identity on PSD input up to roundoff.
    """
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidMatrixError("input to psd_project has non-finite entries")
    arr = 0.5 * (arr + arr.T)
    w, v = np.linalg.eigh(arr)
    out = (v * np.clip(w, 0.0, None)) @ v.T
    return 0.5 * (out + out.T)


def sym_sqrt(a) -> np.ndarray:
    """Symmetric PSD square root (eigenvalues clipped at zero)."""
    arr = 0.5 * (np.asarray(a, dtype=float) + np.asarray(a, dtype=float).T)
    w, v = np.linalg.eigh(arr)
    out = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (out + out.T)


@dataclass(frozen=True)
class BlockCov:
    """Joint covariance of a stack of named vector blocks.

    ``labels`` name the blocks in storage order, ``dims`` give their sizes,
    and ``cov`` is the covariance of the stacked vector.  The matrix must be
    PSD within ``min eigenvalue >= -1e-9 * trace``.
    """

    labels: tuple[str, ...]
    dims: tuple[int, ...]
    cov: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        dims = tuple(int(d) for d in self.dims)
        if len(labels) != len(dims):
            raise ShapeError("labels and dims must have equal length")
        if len(set(labels)) != len(labels):
            raise ShapeError("block labels must be unique")
        if any(d <= 0 for d in dims):
            raise ShapeError("block dims must be positive")
        cov = as_sym(self.cov, name="cov")
        total = sum(dims)
        if cov.shape != (total, total):
            raise ShapeError(
                f"cov must be {total}x{total} for dims {dims}, got {cov.shape}"
            )
        tol = 1e-9 * float(np.trace(cov)) + 1e-14
        if min_eigenvalue(cov) < -tol:
            raise NotPositiveDefiniteError(
                f"block covariance has eigenvalue {min_eigenvalue(cov):.3e} < -{tol:.3e}"
            )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return int(sum(self.dims))

    def _offsets(self) -> dict[str, tuple[int, int]]:
        out, pos = {}, 0
        for lab, d in zip(self.labels, self.dims):
            out[lab] = (pos, pos + d)
            pos += d
        return out

    def indices(self, labels: Iterable[str] | str) -> np.ndarray:
        """Concatenated row indices of the given blocks, in the given order."""
        if isinstance(labels, str):
            labels = (labels,)
        offsets = self._offsets()
        idx: list[int] = []
        for lab in labels:
            if lab not in offsets:
                raise ShapeError(f"unknown block label {lab!r}")
            lo, hi = offsets[lab]
            idx.extend(range(lo, hi))
        return np.asarray(idx, dtype=int)

    def block(self, rows: Iterable[str] | str, cols: Iterable[str] | str | None = None) -> np.ndarray:
        """Submatrix of the covariance for the given row/column blocks."""
        ri = self.indices(rows)
        ci = ri if cols is None else self.indices(cols)
        return self.cov[np.ix_(ri, ci)].copy()


def schur_complement(s_kk: np.ndarray, s_kg: np.ndarray, s_gg: np.ndarray) -> np.ndarray:
    """``s_kk - s_kg s_gg^{-1} s_kg^T`` with a pseudo-inverse fallback.

    Emits :class:`DegenerateConditioningWarning` when the conditioning block
    is singular.
    """
    if s_gg.size == 0:
        return 0.5 * (s_kk + s_kk.T)
    try:
        out = s_kk - s_kg @ solve_psd(s_gg, s_kg.T, name="conditioning block")
    except NotPositiveDefiniteError:
        warnings.warn(
            "singular conditioning block; using Moore-Penrose pseudo-inverse",
            DegenerateConditioningWarning,
            stacklevel=2,
        )
        out = s_kk - s_kg @ np.linalg.pinv(s_gg, hermitian=True) @ s_kg.T
    return 0.5 * (out + out.T)


def schur(bc: BlockCov, keep: Iterable[str] | str, given: Iterable[str] | str) -> np.ndarray:
    """Conditional covariance of the ``keep`` blocks given the ``given`` blocks.

    Empty ``given`` returns the kept marginal covariance unchanged.  A
    singular conditioning block falls back to the pseudo-inverse and warns.
    """
    keep_t = (keep,) if isinstance(keep, str) else tuple(keep)
    given_t = (given,) if isinstance(given, str) else tuple(given)
    if set(keep_t) & set(given_t):
        raise ShapeError("keep and given blocks must be disjoint")
    s_kk = bc.block(keep_t)
    if not given_t:
        return s_kk
    s_kg = bc.block(keep_t, given_t)
    s_gg = bc.block(given_t)
    return schur_complement(s_kk, s_kg, s_gg)


def _whitening_basis(cov: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    """Columns ``u_i / sqrt(w_i)`` over the positive-rank subspace of ``cov``."""
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    top = max(float(w[-1]), 0.0)
    mask = w > rel_tol * max(top, 1e-300)
    if not np.any(mask):
        return np.zeros((cov.shape[0], 0))
    return v[:, mask] / np.sqrt(w[mask])


def _canonical_mi(s_a: np.ndarray, s_b: np.ndarray, cross: np.ndarray) -> float:
    """Gaussian mutual information via canonical correlations.

    Valid for rank-deficient marginals: deterministic directions have zero
    variance, carry no information, and drop out of the whitened problem.
    """
    ta = _whitening_basis(s_a)
    tb = _whitening_basis(s_b)
    if ta.shape[1] == 0 or tb.shape[1] == 0:
        return 0.0
    rho = np.linalg.svd(ta.T @ cross @ tb, compute_uv=False)
    rho = np.clip(rho, 0.0, 1.0 - 1e-15)
    return -0.5 * float(np.sum(np.log1p(-rho * rho)))


def mutual_information(bc: BlockCov, a: Iterable[str] | str, b: Iterable[str] | str) -> float:
    """I(a; b) in nats for jointly Gaussian blocks of ``bc``.

    Uses ``0.5 (logdet S_a + logdet S_b - logdet S_ab)`` when both marginals
    are positive definite; rank-deficient blocks fall back to canonical
    correlations with a :class:`DegenerateConditioningWarning`.
    """
    a_t = (a,) if isinstance(a, str) else tuple(a)
    b_t = (b,) if isinstance(b, str) else tuple(b)
    if set(a_t) & set(b_t):
        raise ShapeError("mutual information blocks must be disjoint")
    s_a = bc.block(a_t)
    s_b = bc.block(b_t)
    cross = bc.block(a_t, b_t)
    try:
        la = logdet(s_a)
        lb = logdet(s_b)
        joint = np.block([[s_a, cross], [cross.T, s_b]])
        return 0.5 * (la + lb - logdet(joint))
    except NotPositiveDefiniteError:
        warnings.warn(
            "rank-deficient block in mutual information; using canonical correlations",
            DegenerateConditioningWarning,
            stacklevel=2,
        )
        return _canonical_mi(s_a, s_b, cross)


def conditional_mutual_information(
    bc: BlockCov,
    a: Iterable[str] | str,
    b: Iterable[str] | str,
    given: Iterable[str] | str,
) -> float:
    """I(a; b | given) via the chain rule I(a; b, given) - I(a; given)."""
    b_t = (b,) if isinstance(b, str) else tuple(b)
    g_t = (given,) if isinstance(given, str) else tuple(given)
    if not g_t:
        return mutual_information(bc, a, b_t)
    return mutual_information(bc, a, b_t + g_t) - mutual_information(bc, a, g_t)
