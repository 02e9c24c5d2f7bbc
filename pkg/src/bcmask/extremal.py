"""Enhanced-channel machinery for the weighted-rate converse.

Solves the Gaussian log-determinant subproblem

    maximize  1/2 ln|K_X + K_Z1| - (mu/2) ln|K_X + K_Z2|
    over      0 <= K_X <= K        (PSD order, mu > 1, K_Z1 <= K_Z2)

extracts the KKT multipliers M1 (at the lower constraint) and M2 (at the
upper constraint), and constructs the enhanced noises

    K_Zt1 = ((K_X* + K_Z1)^{-1} + 2 M1)^{-1} - K_X*
    K_Zt2 = ((K_X* + K_Z2)^{-1} + (2/mu) M2)^{-1} - K_X*

which restore the entropy-power-inequality proportionality condition
``K_X* + K_Zt1 = (mu - 1)^{-1} (K_Zt2 - K_Zt1)`` while preserving the
optimal value (two matrix identities checked by
:func:`preservation_residuals`).  A one-dimensional quadrature harness
stress-tests the conditional extremal inequality: no admissible
non-Gaussian conditional law beats the Gaussian optimum.

The interior stationarity condition ``K_X + K_Z2 = mu (K_X + K_Z1)`` is
linear in K_X, so the unconstrained candidate ``(K_Z2 - mu K_Z1)/(mu - 1)``
is unique and analytic; projected gradient ascent is only needed when that
candidate leaves the feasible interval.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import (
    DegradednessRequiredError,
    DomainError,
    EnhancementFailedError,
    MaxIterationsError,
    NotPositiveDefiniteError,
    QuadratureError,
    ShapeError,
)
from .linalg import as_sym, cholesky_lower, logdet, min_eigenvalue, psd_project, solve_psd
from .model import ChannelSpec

LOG_2PIE = math.log(2.0 * math.pi * math.e)

STATIONARITY_TOL = 1e-7


@dataclass(frozen=True)
class SubproblemSolution:
    """Optimizer output: the maximizing covariance, multipliers, and diagnostics."""

    K_X_star: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    objective: float
    grad_norm: float
    iterations: int


@dataclass(frozen=True)
class EnhancedChannel:
    """Enhanced noises with their multipliers and the value-matching constant F."""

    mu: float
    K_X_star: np.ndarray
    M1: np.ndarray
    M2: np.ndarray
    K_Zt1: np.ndarray
    K_Zt2: np.ndarray
    K_Zt: np.ndarray
    F: float


@dataclass(frozen=True)
class PreservationReport:
    """Max-abs residuals of the two value-preservation identities."""

    noise_identity: float
    power_identity: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.noise_identity <= self.tol and self.power_identity <= self.tol


def _sym_inv(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    out = solve_psd(a, np.eye(a.shape[0]), name=name)
    return 0.5 * (out + out.T)


def _objective(x: np.ndarray, k_z1: np.ndarray, k_z2: np.ndarray, mu: float) -> float:
    return 0.5 * logdet(x + k_z1) - 0.5 * mu * logdet(x + k_z2)


def _gradient(x: np.ndarray, k_z1: np.ndarray, k_z2: np.ndarray, mu: float) -> np.ndarray:
    return 0.5 * _sym_inv(x + k_z1) - 0.5 * mu * _sym_inv(x + k_z2)


def project_box(x: np.ndarray, cap: np.ndarray, max_sweeps: int = 500) -> np.ndarray:
    """Map a symmetric matrix into {0 <= X <= cap} by alternating eigenvalue
    clipping at both faces until the iterate stops moving."""
    x = 0.5 * (x + x.T)
    scale = 1.0 + float(np.abs(cap).max())
    for _ in range(max_sweeps):
        clipped = psd_project(x)
        clipped = cap - psd_project(cap - clipped)
        if np.abs(clipped - x).max() <= 1e-14 * scale:
            x = clipped
            break
        x = clipped
    # final pass guards the lower face against roundoff from the upper clip
    return psd_project(x)


def _projected_gradient_norm(
    x: np.ndarray, cap: np.ndarray, k_z1: np.ndarray, k_z2: np.ndarray, mu: float, step: float
) -> float:
    g = _gradient(x, k_z1, k_z2, mu)
    moved = project_box(x + step * g, cap)
    return float(np.linalg.norm(moved - x) / step)


def _ascend(
    x0: np.ndarray,
    cap: np.ndarray,
    k_z1: np.ndarray,
    k_z2: np.ndarray,
    mu: float,
    step0: float,
    grad_tol: float,
    max_iter: int,
) -> tuple[np.ndarray, int, bool]:
    """Monotone projected gradient ascent with an Armijo-guarded step."""
    x = project_box(x0, cap)
    fx = _objective(x, k_z1, k_z2, mu)
    step = step0
    for it in range(max_iter):
        g = _gradient(x, k_z1, k_z2, mu)
        base = project_box(x + step0 * g, cap)
        if np.linalg.norm(base - x) / step0 <= grad_tol:
            return x, it, True
        moved = project_box(x + step * g, cap)
        f_new = _objective(moved, k_z1, k_z2, mu)
        shrink = 0
        while f_new < fx - 1e-14 * (1.0 + abs(fx)) and shrink < 60:
            step *= 0.5
            moved = project_box(x + step * g, cap)
            f_new = _objective(moved, k_z1, k_z2, mu)
            shrink += 1
        if f_new < fx - 1e-14 * (1.0 + abs(fx)):
            return x, it, False  # no ascent direction left at this scale
        if shrink == 0:
            step = min(step * 1.5, 1e4 * step0)
        x, fx = moved, f_new
    return x, max_iter, False


def _snap_active(x: np.ndarray, cap: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    """Zero out near-active eigenvalues at both faces so the null spaces of
    K_X* and cap - K_X* are exact for multiplier extraction."""
    scale = max(float(np.abs(cap).max()), 1e-300)
    w, v = np.linalg.eigh(0.5 * (x + x.T))
    w = np.where(w < rel_tol * scale, 0.0, w)
    x = (v * w) @ v.T
    gap = cap - x
    d, u = np.linalg.eigh(0.5 * (gap + gap.T))
    d = np.where(d < rel_tol * scale, 0.0, np.clip(d, 0.0, None))
    return 0.5 * ((cap - (u * d) @ u.T) + (cap - (u * d) @ u.T).T)


def _null_basis(a: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    scale = max(float(np.abs(w).max()), 1e-300)
    return v[:, np.abs(w) <= rel_tol * scale]


def _face_polish(
    x: np.ndarray,
    cap: np.ndarray,
    k_z1: np.ndarray,
    k_z2: np.ndarray,
    mu: float,
) -> np.ndarray:
    """Drive the stationarity residual on the identified face to machine
    precision with a root solve over the inactive subspace."""
    t = x.shape[0]
    v0 = _null_basis(x, rel_tol=1e-7)
    v1 = _null_basis(cap - x, rel_tol=1e-7)
    pinned = np.hstack([v0, v1]) if (v0.size or v1.size) else np.zeros((t, 0))
    if pinned.shape[1] == 0:
        free = np.eye(t)
    else:
        # orthonormal complement of the pinned directions
        u, s, _ = np.linalg.svd(pinned, full_matrices=True)
        rank = int(np.sum(s > 1e-10))
        free = u[:, rank:]
    s_dim = free.shape[1]
    if s_dim == 0:
        return x
    iu = np.triu_indices(s_dim)

    def unpack(vec: np.ndarray) -> np.ndarray:
        m = np.zeros((s_dim, s_dim))
        m[iu] = vec
        m = m + m.T - np.diag(np.diag(m))
        return m

    def residual(vec: np.ndarray) -> np.ndarray:
        xm = x + free @ unpack(vec) @ free.T
        try:
            g = _gradient(xm, k_z1, k_z2, mu)
        except NotPositiveDefiniteError:
            return np.full(len(vec), 1e6)
        r = free.T @ g @ free
        return r[iu]

    sol = optimize.root(residual, np.zeros(len(iu[0])), method="hybr", tol=1e-13)
    if not sol.success:
        return x
    polished = x + free @ unpack(sol.x) @ free.T
    scale = 1.0 + float(np.abs(cap).max())
    if np.abs(polished - x).max() > 1e-3 * scale:
        return x
    if min_eigenvalue(polished) < -1e-11 * scale:
        return x
    if min_eigenvalue(cap - polished) < -1e-11 * scale:
        return x
    return project_box(polished, cap)


def solve_gaussian_subproblem(
    spec: ChannelSpec,
    mu: float,
    grad_tol: float = 1e-9,
    max_iter: int = 20000,
) -> SubproblemSolution:
    """Maximize the weighted log-det difference over {0 <= K_X <= K}.

    Returns the maximizer with PSD multipliers assigned from the
    stationarity gap ``G = (mu/2)(K_X*+K_Z2)^{-1} - (1/2)(K_X*+K_Z1)^{-1}``
    on the active eigenspaces: ``M1`` is the PSD part of G restricted to the
    null space of K_X*, and ``M2 = M1 - G`` so the stationarity equation
    holds exactly.  Requires mu > 1 and a degraded channel.
    """
    if not mu > 1.0:
        raise DomainError(f"weight must exceed 1, got {mu}")
    if not spec.degraded:
        raise DegradednessRequiredError(
            "enhanced-channel construction needs K_Z1 <= K_Z2 in the PSD order"
        )
    cap, k_z1, k_z2 = spec.K, spec.K_Z1, spec.K_Z2
    t = spec.t
    scale = 1.0 + float(np.abs(cap).max())
    lip = 0.5 / min_eigenvalue(k_z1) ** 2 + 0.5 * mu / min_eigenvalue(k_z2) ** 2
    step0 = 1.0 / lip

    interior = as_sym((k_z2 - mu * k_z1) / (mu - 1.0), name="interior candidate")
    iterations = 0
    if (
        min_eigenvalue(interior) >= -1e-12 * scale
        and min_eigenvalue(cap - interior) >= -1e-12 * scale
    ):
        x = project_box(interior, cap)
    else:
        starts = [project_box(interior, cap), 0.5 * cap, np.zeros((t, t)), 0.95 * cap]
        best_x, best_f = None, -np.inf
        budget = max(max_iter // (2 * len(starts)), 500)
        for x0 in starts:
            xc, its, _ = _ascend(x0, cap, k_z1, k_z2, mu, step0, grad_tol, budget)
            iterations += its
            fc = _objective(xc, k_z1, k_z2, mu)
            if fc > best_f:
                best_x, best_f = xc, fc
        x = best_x
        for _ in range(3):
            snapped = _snap_active(x, cap, rel_tol=1e-6)
            polished = _face_polish(snapped, cap, k_z1, k_z2, mu)
            polished = _snap_active(polished, cap, rel_tol=1e-9)
            if _objective(polished, k_z1, k_z2, mu) >= best_f - 1e-10 * (1.0 + abs(best_f)):
                x = polished
            pg = _projected_gradient_norm(x, cap, k_z1, k_z2, mu, step0)
            if pg <= max(grad_tol, 1e-10) * (1.0 + scale):
                break
            x, its, _ = _ascend(x, cap, k_z1, k_z2, mu, step0, grad_tol, max_iter)
            iterations += its
            best_f = max(best_f, _objective(x, k_z1, k_z2, mu))
        pg = _projected_gradient_norm(x, cap, k_z1, k_z2, mu, step0)
        if pg > STATIONARITY_TOL * (1.0 + scale):
            raise MaxIterationsError(
                f"projected gradient norm {pg:.3e} after {iterations} iterations",
                best=x,
                grad_norm=pg,
            )

    grad_norm = _projected_gradient_norm(x, cap, k_z1, k_z2, mu, step0)

    gap = 0.5 * mu * _sym_inv(x + k_z2) - 0.5 * _sym_inv(x + k_z1)
    null0 = _null_basis(x)
    if null0.shape[1]:
        proj0 = null0 @ null0.T
        m1 = psd_project(proj0 @ gap @ proj0)
    else:
        m1 = np.zeros((t, t))
    m2 = as_sym(m1 - gap, name="M2")
    return SubproblemSolution(
        K_X_star=x,
        M1=m1,
        M2=m2,
        objective=_objective(x, k_z1, k_z2, mu),
        grad_norm=grad_norm,
        iterations=iterations,
    )


def enhance(
    spec: ChannelSpec,
    mu: float,
    k_x_star: np.ndarray,
    m1: np.ndarray,
    m2: np.ndarray,
    tol: float = 1e-8,
) -> EnhancedChannel:
    """Construct the enhanced noises and verify every invariant family.

    Checks, each within ``tol`` (scaled by the channel magnitude): the
    partial orderings 0 <= K_Zt1 <= K_Z1 and K_Zt1 <= K_Zt2 <= K_Z2, the
    proportionality condition, and complementary slackness of both
    multipliers.  Raises :class:`EnhancementFailedError` with the failing
    margin otherwise.
    """
    if not mu > 1.0:
        raise DomainError(f"weight must exceed 1, got {mu}")
    x = as_sym(k_x_star, name="K_X_star")
    m1 = as_sym(m1, name="M1")
    m2 = as_sym(m2, name="M2")
    k_z1, k_z2, cap = spec.K_Z1, spec.K_Z2, spec.K

    try:
        k_zt1 = _sym_inv(_sym_inv(x + k_z1) + 2.0 * m1) - x
        k_zt2 = _sym_inv(_sym_inv(x + k_z2) + (2.0 / mu) * m2) - x
    except NotPositiveDefiniteError as exc:
        raise EnhancementFailedError(f"enhanced noise construction failed: {exc}") from exc
    k_zt = k_zt2 - k_zt1

    scale = 1.0 + float(max(np.abs(k_z2).max(), np.abs(cap).max()))
    margin = tol * scale
    checks = {
        "K_Zt1 >= 0": min_eigenvalue(k_zt1),
        "K_Zt1 <= K_Z1": min_eigenvalue(k_z1 - k_zt1),
        "K_Zt1 <= K_Zt2": min_eigenvalue(k_zt),
        "K_Zt2 <= K_Z2": min_eigenvalue(k_z2 - k_zt2),
        "proportionality": -float(np.abs(x + k_zt1 - k_zt / (mu - 1.0)).max()),
        "slackness M1": -float(np.abs(m1 @ x).max()),
        "slackness M2": -float(np.abs(m2 @ (cap - x)).max()),
        "M1 >= 0": min_eigenvalue(m1),
        "M2 >= 0": min_eigenvalue(m2),
    }
    for name, value in checks.items():
        if value < -margin:
            raise EnhancementFailedError(
                f"enhanced-channel invariant {name!r} violated by {-value:.3e}"
            )

    try:
        f_const = 0.5 * (logdet(k_z1) - logdet(k_zt1)) + 0.5 * mu * (
            logdet(cap + k_zt2) - logdet(cap + k_z2)
        )
    except NotPositiveDefiniteError as exc:
        raise EnhancementFailedError(f"value constant undefined: {exc}") from exc

    return EnhancedChannel(
        mu=float(mu), K_X_star=x, M1=m1, M2=m2, K_Zt1=k_zt1, K_Zt2=k_zt2, K_Zt=k_zt, F=f_const
    )


def preservation_residuals(
    spec: ChannelSpec, enhanced: EnhancedChannel, tol: float = 1e-8
) -> PreservationReport:
    """Residuals of the two identities that make the enhanced problem's
    optimum equal the original Gaussian optimum:

        (K_X*+K_Zt1)^{-1} K_Zt1      = (K_X*+K_Z1)^{-1} K_Z1
        (K_X*+K_Zt2)^{-1} (K+K_Zt2)  = (K_X*+K_Z2)^{-1} (K+K_Z2)
    """
    x = enhanced.K_X_star
    lhs1 = solve_psd(x + enhanced.K_Zt1, enhanced.K_Zt1)
    rhs1 = solve_psd(x + spec.K_Z1, spec.K_Z1)
    lhs2 = solve_psd(x + enhanced.K_Zt2, spec.K + enhanced.K_Zt2)
    rhs2 = solve_psd(x + spec.K_Z2, spec.K + spec.K_Z2)
    return PreservationReport(
        noise_identity=float(np.abs(lhs1 - rhs1).max()),
        power_identity=float(np.abs(lhs2 - rhs2).max()),
        tol=tol,
    )


def epi_bound(a: float, b: float, mu: float, t: int = 1) -> float:
    """The scalarized entropy-power bound ``a - (mu t / 2) ln(e^{2a/t} + e^{2b/t})``.

    ``a`` plays the role of a conditional entropy of the signal plus the
    smaller enhanced noise and ``b`` the entropy of the noise increment,
    both in nats.
    """
    if not mu > 1.0:
        raise DomainError(f"weight must exceed 1, got {mu}")
    if t < 1:
        raise DomainError(f"dimension must be >= 1, got {t}")
    return float(a - 0.5 * mu * t * np.logaddexp(2.0 * a / t, 2.0 * b / t))


def epi_bound_argmax(b: float, mu: float, t: int = 1) -> float:
    """Global maximizer of :func:`epi_bound` in ``a``: ``b - (t/2) ln(mu - 1)``."""
    if not mu > 1.0:
        raise DomainError(f"weight must exceed 1, got {mu}")
    if t < 1:
        raise DomainError(f"dimension must be >= 1, got {t}")
    return float(b - 0.5 * t * math.log(mu - 1.0))


@dataclass(frozen=True)
class MixtureComponent:
    """One conditional law of the scalar input given the auxiliary index.

    ``kind`` is one of ``gaussian`` (params: mean, variance), ``uniform``
    (params: lo, hi) or ``two_point`` (params: left mass point, right mass
    point, probability of the left point).
    """

    weight: float
    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if not self.weight > 0.0:
            raise DomainError("component weight must be positive")
        if self.kind == "gaussian":
            if len(self.params) != 2 or self.params[1] < 0.0:
                raise DomainError("gaussian component needs (mean, variance >= 0)")
        elif self.kind == "uniform":
            if len(self.params) != 2 or not self.params[0] < self.params[1]:
                raise DomainError("uniform component needs lo < hi")
        elif self.kind == "two_point":
            if len(self.params) != 3 or not 0.0 <= self.params[2] <= 1.0:
                raise DomainError("two_point component needs (a, b, p) with p in [0, 1]")
        else:
            raise DomainError(f"unknown component kind {self.kind!r}")

    def second_moment(self) -> float:
        if self.kind == "gaussian":
            mean, var = self.params
            return mean * mean + var
        if self.kind == "uniform":
            lo, hi = self.params
            return (lo * lo + lo * hi + hi * hi) / 3.0
        a, b, p = self.params
        return p * a * a + (1.0 - p) * b * b

    def scaled(self, s: float) -> "MixtureComponent":
        """The law of s * X; second moment scales by s^2."""
        if self.kind == "gaussian":
            mean, var = self.params
            return MixtureComponent(self.weight, "gaussian", (s * mean, s * s * var))
        if self.kind == "uniform":
            lo, hi = self.params
            lo, hi = sorted((s * lo, s * hi))
            return MixtureComponent(self.weight, "uniform", (lo, hi))
        a, b, p = self.params
        return MixtureComponent(self.weight, "two_point", (s * a, s * b, p))


@dataclass(frozen=True)
class Candidate1D:
    """A finite-mixture conditional law of the scalar input.

    The mixture index models the joint value of the auxiliary and the state;
    each index carries one base density, so the conditional shape does not
    vary within an index.  Weights must sum to one.
    """

    components: tuple[MixtureComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DomainError("candidate needs at least one mixture component")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"mixture weights must sum to 1, got {total}")
        object.__setattr__(self, "components", comps)

    def second_moment(self) -> float:
        return sum(c.weight * c.second_moment() for c in self.components)

    @classmethod
    def gaussian(cls, variance: float) -> "Candidate1D":
        return cls((MixtureComponent(1.0, "gaussian", (0.0, variance)),))

    @classmethod
    def uniform_full_power(cls, power: float) -> "Candidate1D":
        half = math.sqrt(3.0 * power)
        return cls((MixtureComponent(1.0, "uniform", (-half, half)),))

    @classmethod
    def symmetric_two_point(cls, power: float) -> "Candidate1D":
        root = math.sqrt(power)
        return cls((MixtureComponent(1.0, "two_point", (-root, root, 0.5)),))


@dataclass(frozen=True)
class CandidateResult:
    objective: float
    gaussian_optimum: float
    margin: float


def _convolved_entropy(comp: MixtureComponent, noise_var: float, quad_tol: float) -> float:
    """Differential entropy of comp's law plus independent N(0, noise_var),
    by adaptive quadrature of -p ln p over +-10 sigma beyond the support."""
    sigma = math.sqrt(noise_var)

    if comp.kind == "gaussian":
        mean, var = comp.params
        spread = math.sqrt(var + noise_var)
        lo, hi = mean - 10.0 * spread, mean + 10.0 * spread

        def density(y):
            z = (y - mean) / spread
            return math.exp(-0.5 * z * z) / (spread * math.sqrt(2.0 * math.pi))

    elif comp.kind == "uniform":
        lo0, hi0 = comp.params
        width = hi0 - lo0
        lo, hi = lo0 - 10.0 * sigma, hi0 + 10.0 * sigma

        def density(y):
            return (special.ndtr((y - lo0) / sigma) - special.ndtr((y - hi0) / sigma)) / width

    else:  # two_point
        a, b, p = comp.params
        lo, hi = min(a, b) - 10.0 * sigma, max(a, b) + 10.0 * sigma
        norm = sigma * math.sqrt(2.0 * math.pi)

        def density(y):
            za = (y - a) / sigma
            zb = (y - b) / sigma
            return (p * math.exp(-0.5 * za * za) + (1.0 - p) * math.exp(-0.5 * zb * zb)) / norm

    def integrand(y):
        p_y = max(density(y), 1e-300)
        return -p_y * math.log(p_y)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(integrand, lo, hi, epsabs=quad_tol, epsrel=quad_tol, limit=400)
    if err > max(100.0 * quad_tol, 1e-7):
        raise QuadratureError(
            f"entropy quadrature error estimate {err:.3e} exceeds tolerance"
        )
    return value


def candidate_margin(
    spec: ChannelSpec, mu: float, candidate: Candidate1D, quad_tol: float = 1e-9
) -> CandidateResult:
    """Compare a scalar mixture candidate against the Gaussian optimum.

    The candidate objective is ``h(X+Z1 | index) - mu h(X+Z2 | index)``
    with the conditional entropies computed by quadrature of the convolved
    densities; the Gaussian optimum is the closed-form value at the solved
    covariance.  The margin (optimum minus candidate) is nonnegative up to
    quadrature error for every admissible candidate.
    """
    if spec.t != 1:
        raise ShapeError("the candidate stress test is defined for t = 1 only")
    if not mu > 1.0:
        raise DomainError(f"weight must exceed 1, got {mu}")
    power_cap = float(spec.K[0, 0])
    if candidate.second_moment() > power_cap + 1e-9:
        raise DomainError(
            f"candidate second moment {candidate.second_moment():.6f} exceeds the "
            f"power cap {power_cap:.6f}"
        )
    z1 = float(spec.K_Z1[0, 0])
    z2 = float(spec.K_Z2[0, 0])
    sol = solve_gaussian_subproblem(spec, mu)
    kx = float(sol.K_X_star[0, 0])
    gaussian_opt = 0.5 * (LOG_2PIE + math.log(kx + z1)) - 0.5 * mu * (
        LOG_2PIE + math.log(kx + z2)
    )
    objective = 0.0
    for comp in candidate.components:
        h1 = _convolved_entropy(comp, z1, quad_tol)
        h2 = _convolved_entropy(comp, z2, quad_tol)
        objective += comp.weight * (h1 - mu * h2)
    return CandidateResult(
        objective=objective,
        gaussian_optimum=gaussian_opt,
        margin=gaussian_opt - objective,
    )
