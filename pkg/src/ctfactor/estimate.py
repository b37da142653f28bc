"""Constrained Gaussian maximum likelihood for sparse factor models.

The estimator maximizes the Gaussian log-likelihood of a sample covariance
matrix over loadings restricted to a given support, a unit-diagonal factor
correlation matrix, and positive error variances. The ascent is
expectation-maximization over the latent factors:

* E-step: posterior moments of the factors given the observed covariance.
* M-step: each loading row is a regression of its variable on that row's
  factor set only (rows off the support stay exactly zero); error
  variances absorb the residual; the factor covariance is refreshed and
  then renormalized to a unit diagonal, with the compensating scale folded
  into the loading columns, which leaves the implied covariance unchanged.

Each M-step maximizes the complete-data objective exactly, so the
log-likelihood is non-decreasing along the path up to round-off. Multiple
restarts jitter the starting loadings; the best final likelihood wins.
Column signs are normalized afterwards so that each factor's anchor
variable (its smallest-index unique child, falling back to the
smallest-index child) loads non-negatively.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import (
    ConstantColumn,
    DimensionMismatch,
    DomainError,
    NonPDSampleWarning,
    NotPositiveDefinite,
)
from .model import FactorParams, unique_children
from .numerics import RngState, as_sym_matrix, cholesky

__all__ = [
    "FitOptions",
    "FitResult",
    "gaussian_loglik",
    "fit_mle",
    "count_free_params",
    "bic_value",
    "bic",
    "kfold_test_loglik",
    "sample_covariance",
    "pearson_correlation",
]


@dataclass(frozen=True)
class FitOptions:
    """Knobs of the EM fit."""

    max_iterations: int = 2000
    loglik_tolerance: float = 1e-8
    omega_floor: float = 1e-6
    restarts: int = 3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if self.loglik_tolerance <= 0:
            raise DomainError("loglik_tolerance must be positive")
        if self.omega_floor <= 0:
            raise DomainError("omega_floor must be positive")
        if self.restarts < 1:
            raise DomainError("restarts must be >= 1")


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters plus fit diagnostics.

    ``loglik_path`` is the per-iteration log-likelihood of the winning
    restart (first entry is the initial point).
    """

    theta: FactorParams
    loglik: float
    bic: float
    converged: bool
    n_iterations: int
    n_free_params: int
    loglik_path: tuple

    def to_json_dict(self):
        doc = self.theta.to_json_dict()
        doc.update(
            {
                "loglik": self.loglik,
                "bic": self.bic,
                "converged": self.converged,
                "n_iterations": self.n_iterations,
            }
        )
        return doc


def gaussian_loglik(sigma_model, s_sample, n):
    """Gaussian log-likelihood of a covariance model against a sample matrix.

    ``-(n / 2) * (p * log(2 pi) + logdet(sigma) + trace(sigma^-1 @ s))``.
    The sample matrix only needs to be symmetric; the model matrix must be
    positive definite.
    """
    if n <= 0:
        raise DomainError(f"n must be positive, got {n}")
    sig = as_sym_matrix(sigma_model, name="sigma_model")
    s = as_sym_matrix(s_sample, name="s_sample")
    if sig.shape != s.shape:
        raise DimensionMismatch(
            f"shape mismatch: model {sig.shape} vs sample {s.shape}"
        )
    lower = cholesky(sig)
    p = sig.shape[0]
    logdet = 2.0 * float(np.sum(np.log(np.diag(lower))))
    half = solve_triangular(lower, s, lower=True)
    solved = solve_triangular(lower.T, half, lower=False)
    trace = float(np.trace(solved))
    return -0.5 * n * (p * math.log(2.0 * math.pi) + logdet + trace)


def count_free_params(structure):
    """Free parameters: support size + factor correlations + error variances."""
    d = structure.d
    return len(structure.support) + d * (d - 1) // 2 + structure.p


def bic_value(loglik, k, n):
    """``-2 * loglik + k * log(n)``."""
    if n <= 0:
        raise DomainError(f"n must be positive, got {n}")
    return -2.0 * loglik + k * math.log(n)


def bic(fit, n):
    """Bayesian information criterion of a fit at sample size ``n``."""
    return bic_value(fit.loglik, fit.n_free_params, n)


def _row_classes(structure):
    """Supported rows batched by parent-set size.

    Returns ``[(rows, pidx)]`` where ``rows`` is an index vector and
    ``pidx[r]`` lists the sorted parents of ``rows[r]``; every class shares
    one parent count so its M-step regressions solve as one stacked system.
    Rows with no parents are omitted (their error variance is the sample
    variance itself).
    """
    parents = structure.parent_sets()
    by_size = {}
    for i in range(structure.p):
        k = len(parents[i])
        if k:
            by_size.setdefault(k, []).append((i, sorted(parents[i])))
    return [
        (
            np.asarray([i for i, _ in pairs], dtype=int),
            np.asarray([ps for _, ps in pairs], dtype=int),
        )
        for _, pairs in sorted(by_size.items())
    ]


def _canonicalize_signs(lam, phi, structure):
    unique, _ = unique_children(structure)
    children = structure.child_sets()
    for j in range(structure.d):
        anchor = min(unique[j]) if unique[j] else min(children[j])
        if lam[anchor, j] < 0:
            lam[:, j] *= -1.0
            phi[j, :] *= -1.0
            phi[:, j] *= -1.0
    return lam, phi


def _em_ascent(s, n, structure, classes, lam0, options):
    # Sigma = lam phi lam' + diag(omega) is never assembled: with
    # D = diag(1/omega) and M = phi^-1 + lam' D lam, the determinant lemma
    # gives logdet Sigma = logdet M + logdet phi + sum log omega, and
    # Woodbury gives Sigma^-1 lam = D lam (I - M^-1 lam' D lam). The one
    # p x p product per iteration is s @ (D lam).
    p, d = structure.p, structure.d
    s_diag = np.diag(s).copy()
    eye_d = np.eye(d)
    lam = lam0.copy()
    phi = eye_d.copy()
    omega = np.maximum(0.5 * s_diag, options.omega_floor)
    path = []
    ll_prev = None
    converged = False
    updates = 0
    log2pi = math.log(2.0 * math.pi)
    while True:
        dinv = 1.0 / omega
        lam_d = lam * dinv[:, None]
        ltd_lam = lam.T @ lam_d
        try:
            phi_low = np.linalg.cholesky(phi)
            phi_inv = cho_solve((phi_low, True), eye_d, check_finite=False)
            m_low = np.linalg.cholesky(phi_inv + ltd_lam)
        except np.linalg.LinAlgError:
            return None  # numerically broken restart
        m_inv = cho_solve((m_low, True), eye_d, check_finite=False)
        logdet = (
            2.0 * float(np.log(m_low.diagonal()).sum())
            + 2.0 * float(np.log(phi_low.diagonal()).sum())
            + float(np.log(omega).sum())
        )
        sld = s @ lam_d
        tmat = lam_d.T @ sld
        # trace(sigma^-1 s) via Woodbury; m_inv and tmat are symmetric
        trace = float(dinv @ s_diag) - float((m_inv * tmat).sum())
        ll = -0.5 * n * (p * log2pi + logdet + trace)
        if not math.isfinite(ll):
            return None
        path.append(ll)
        if ll_prev is not None and abs(ll - ll_prev) < options.loglik_tolerance:
            converged = True
            break
        if updates >= options.max_iterations:
            break
        ll_prev = ll

        # E-step: expected cross-moments of data with factors and of factors
        kmat = eye_d - m_inv @ ltd_lam
        inv_lam = lam_d @ kmat                    # sigma^-1 lam, p x d
        sw = sld @ kmat                           # s sigma^-1 lam
        bmat = sw @ phi                           # E[X L'] under current fit
        core = inv_lam.T @ sw - lam.T @ inv_lam
        cmat = phi + phi @ core @ phi
        cmat = (cmat + cmat.T) / 2.0              # E[L L']

        # M-step: stacked per-row regressions, then variance refresh
        lam_new = np.zeros_like(lam)
        omega_new = s_diag.copy()
        for rows, pidx in classes:
            csub = cmat[pidx[:, :, None], pidx[:, None, :]]
            rhs = bmat[rows[:, None], pidx]
            coef = np.linalg.solve(csub, rhs[:, :, None])[:, :, 0]
            lam_new[rows[:, None], pidx] = coef
            # at the regression optimum the residual quadratic collapses
            omega_new[rows] = s_diag[rows] - (coef * rhs).sum(axis=1)
        omega = np.maximum(omega_new, options.omega_floor)
        scale = np.sqrt(cmat.diagonal())
        phi = cmat / np.outer(scale, scale)
        np.fill_diagonal(phi, 1.0)
        lam = lam_new * scale[None, :]
        updates += 1
    return lam, phi, omega, path, converged, updates


def fit_mle(s_sample, n, structure, options=None, seed=0):
    """Maximum likelihood fit of a factor model with a fixed support.

    Parameters
    ----------
    s_sample : array_like
        Symmetric sample covariance (or correlation) matrix. A
        non-positive-definite input is accepted with a warning.
    n : int
        Sample size behind ``s_sample``; scales the likelihood and the BIC.
    structure : Structure
        Loading support. Rows without factors are fitted as pure noise.
    options : FitOptions, optional
    seed : int
        Seeds the restart jitter.

    Returns
    -------
    FitResult
    """
    options = options or FitOptions()
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    s = as_sym_matrix(s_sample, name="s_sample")
    if s.shape[0] != structure.p:
        raise DimensionMismatch(
            f"sample matrix is {s.shape[0]} x {s.shape[0]} but structure has p={structure.p}"
        )
    if np.any(np.diag(s) <= 0):
        raise DomainError("sample matrix has non-positive diagonal entries")
    try:
        cholesky(s)
    except NotPositiveDefinite:
        warnings.warn(
            "sample matrix is not positive definite; the fit maximizes the "
            "likelihood formula as given",
            NonPDSampleWarning,
            stacklevel=2,
        )

    classes = _row_classes(structure)
    base = np.zeros((structure.p, structure.d))
    support_rows = np.asarray([i for i, _ in sorted(structure.support)], dtype=int)
    support_cols = np.asarray([j for _, j in sorted(structure.support)], dtype=int)
    base[support_rows, support_cols] = 0.5

    rng = RngState(seed)
    best = None
    for r in range(options.restarts):
        lam0 = base.copy()
        if r > 0:
            jitter = rng.derive(r).generator.uniform(
                -0.1, 0.1, size=support_rows.size
            )
            lam0[support_rows, support_cols] += jitter
        out = _em_ascent(s, n, structure, classes, lam0, options)
        if out is None:
            continue
        if best is None or out[3][-1] > best[3][-1]:
            best = out
    if best is None:
        raise NotPositiveDefinite(
            "every restart broke down numerically; sample matrix is too degenerate"
        )
    lam, phi, omega, path, converged, n_iter = best
    lam, phi = _canonicalize_signs(lam.copy(), phi.copy(), structure)
    theta = FactorParams(loadings=lam, factor_corr=phi, error_var=omega)
    k = count_free_params(structure)
    ll = path[-1]
    return FitResult(
        theta=theta,
        loglik=float(ll),
        bic=bic_value(ll, k, n),
        converged=converged,
        n_iterations=n_iter,
        n_free_params=k,
        loglik_path=tuple(path),
    )


def sample_covariance(data, ddof=1):
    """Mean-centered sample covariance of rows."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"data must be 2-D, got shape {arr.shape}")
    if arr.shape[0] <= ddof:
        raise DomainError(f"need more than {ddof} rows, got {arr.shape[0]}")
    centered = arr - arr.mean(axis=0)
    return centered.T @ centered / (arr.shape[0] - ddof)


def pearson_correlation(data):
    """Product-moment correlation of columns (unbiased-denominator scaling).

    Raises
    ------
    ConstantColumn
        If any column has zero variance.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"data must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DomainError(f"need at least 2 rows, got {arr.shape[0]}")
    cov = sample_covariance(arr, ddof=1)
    sd = np.sqrt(np.diag(cov))
    flat = np.flatnonzero(sd == 0)
    if flat.size:
        raise ConstantColumn(
            f"columns {[int(i) for i in flat]} are constant; correlation undefined"
        )
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return (corr + corr.T) / 2.0


def kfold_test_loglik(data, structure, k_folds, options=None, rng=None, seed=0):
    """Cross-validated held-out log-likelihood of a structure.

    Rows are shuffled once and split into ``k_folds`` contiguous folds.
    Each fold is scored by the Gaussian log density of its rows at the
    model fitted on the remaining rows (held-out second moments are taken
    about the training mean), and the fold scores are summed.
    """
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatch(f"data must be 2-D, got shape {arr.shape}")
    n = arr.shape[0]
    if not 2 <= k_folds <= n:
        raise DomainError(f"k_folds must lie in [2, {n}], got {k_folds}")
    options = options or FitOptions()
    rng = rng or RngState(seed)
    order = rng.generator.permutation(n)
    folds = np.array_split(order, k_folds)
    from .model import implied_covariance  # local to avoid cycles at import

    total = 0.0
    for fold in folds:
        mask = np.ones(n, dtype=bool)
        mask[fold] = False
        train = arr[mask]
        test = arr[fold]
        mu = train.mean(axis=0)
        s_train = sample_covariance(train, ddof=1)
        fit = fit_mle(
            s_train,
            train.shape[0],
            structure,
            options=options,
            seed=int(rng.generator.integers(2**62)),
        )
        centered = test - mu
        s_test = centered.T @ centered / test.shape[0]
        total += gaussian_loglik(
            implied_covariance(fit.theta), s_test, test.shape[0]
        )
    return float(total)
