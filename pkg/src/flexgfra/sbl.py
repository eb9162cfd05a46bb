"""Per-AP variational Bayes sparse Bayesian learning.

Model at one AP, column by column over its ``N_r`` antennas::

    z_n | g_n   ~ CN(D g_n, I_W)
    g_n | alpha ~ CN(0, diag(1 / alpha))
    alpha_m     ~ Gamma(a, b)

The mean-field posterior ``q(G) q(alpha)`` has one covariance shared by all
antennas.  It is computed in the ``W x W`` domain with the Woodbury identity,
since the window is much shorter than the dictionary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import gammaln, digamma


@dataclass(frozen=True)
class Hyperparams:
    a: float = 1e-10
    b: float = 1e-10
    max_inner: int = 5
    max_total: int = 250
    alpha_cap: float = 1e12
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("Gamma shape and rate must be nonnegative")
        if self.max_inner < 1 or self.max_total < 1:
            raise ValueError("iteration budgets must be at least 1")
        if not self.alpha_cap > 1:
            raise ValueError("alpha_cap must exceed 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")

    @property
    def outer_rounds(self) -> int:
        return max(self.max_total // self.max_inner, 1)


@dataclass
class ApPosterior:
    alpha_mean: np.ndarray   # (M,)
    covariance: np.ndarray   # (M, M), shared by all antennas
    g_mean: np.ndarray       # (M, N_r)


def _matrix(D):
    return getattr(D, "matrix", D)


def _check_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha > 0)):
        raise ValueError("precisions must be strictly positive")
    return alpha


def vb_covariance(D, alpha_mean) -> np.ndarray:
    """Posterior covariance ``(D^H D + diag(alpha))^{-1}`` via Woodbury.

    Only the ``W x W`` matrix ``I + D diag(1/alpha) D^H`` is factorized
    (Cholesky).
    """
    D = _matrix(D)
    alpha = _check_alpha(alpha_mean)
    if alpha.shape != (D.shape[1],):
        raise ValueError(f"alpha has shape {alpha.shape}, expected ({D.shape[1]},)")
    inv_alpha = 1.0 / alpha
    A = D * inv_alpha                     # D P^-1
    inner = np.eye(D.shape[0]) + A @ D.conj().T
    try:
        factor = sla.cho_factor(inner, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("Woodbury inner matrix is numerically singular") from exc
    sigma = np.diag(inv_alpha).astype(complex) - A.conj().T @ sla.cho_solve(factor, A)
    return 0.5 * (sigma + sigma.conj().T)


def vb_mean(sigma, D, Z) -> np.ndarray:
    """``<G> = Sigma D^H Z``; one covariance serves every antenna column."""
    D = _matrix(D)
    Z = np.asarray(Z)
    if Z.ndim == 1:
        Z = Z[:, None]
    if sigma.shape != (D.shape[1], D.shape[1]) or Z.shape[0] != D.shape[0]:
        raise ValueError(f"shape mismatch: Sigma {sigma.shape}, D {D.shape}, Z {Z.shape}")
    return sigma @ (D.conj().T @ Z)


def alpha_update(g_mean, sigma, hyper: Hyperparams, n_antennas=None) -> np.ndarray:
    """Gamma posterior mean ``(a + N_r) / (b + sum_n <|g_nm|^2>)``, capped.

    ``sigma`` may be the full covariance or just its diagonal.
    """
    g_mean = np.asarray(g_mean)
    if g_mean.ndim == 1:
        g_mean = g_mean[:, None]
    n_antennas = g_mean.shape[1] if n_antennas is None else n_antennas
    sigma = np.asarray(sigma)
    var = np.real(np.diagonal(sigma)) if sigma.ndim == 2 else np.real(sigma)
    second_moment = (np.abs(g_mean) ** 2).sum(axis=1) + n_antennas * np.maximum(var, 0.0)
    denom = hyper.b + second_moment
    with np.errstate(divide="ignore"):
        alpha = (hyper.a + n_antennas) / denom
    return np.minimum(alpha, hyper.alpha_cap)


def posterior_moments(D, alpha_mean, Z, _dh=None, _eye=None):
    """Diagonal of ``Sigma`` and ``<G>`` without forming the ``M x M`` covariance.

    With ``A = D P^-1``, ``C = I + A D^H`` (only ``W x W``) and ``X = C^-1 A``::

        diag(Sigma) = 1/alpha - Re sum_w conj(A_wm) X_wm
        <G>         = A^H C^-1 Z = X^H Z
    """
    D = _matrix(D)
    W = D.shape[0]
    dh = D.conj().T if _dh is None else _dh
    eye = np.eye(W) if _eye is None else _eye
    inv_alpha = 1.0 / alpha_mean
    A = D * inv_alpha
    X = np.linalg.inv(A @ dh + eye) @ A
    diag = inv_alpha - (A.real * X.real + A.imag * X.imag).sum(axis=0)
    return diag, X.conj().T @ Z


def run_inner_loop(D, Z, alpha_init, hyper: Hyperparams, iterations=None) -> ApPosterior:
    """Alternate covariance, mean and precision updates ``max_inner`` times."""
    n_iter = hyper.max_inner if iterations is None else iterations
    if n_iter < 1:
        raise ValueError("the inner loop needs at least one iteration")
    Z = np.asarray(Z)
    if Z.ndim == 1:
        Z = Z[:, None]
    alpha = _check_alpha(alpha_init).copy()
    for _ in range(n_iter):
        sigma = vb_covariance(D, alpha)
        g_mean = vb_mean(sigma, D, Z)
        alpha = alpha_update(g_mean, sigma, hyper, Z.shape[1])
    return ApPosterior(alpha_mean=alpha, covariance=sigma, g_mean=g_mean)


def inner_sweep(D, Z, alpha, hyper: Hyperparams, iterations):
    """Fast counterpart of :func:`run_inner_loop` for a stack of APs.

    ``Z`` has shape ``(L, W, N_r)`` and ``alpha`` ``(L, M)``; returns the
    updated precisions and the last posterior means ``(L, M, N_r)``.
    """
    D = _matrix(D)
    dh = np.ascontiguousarray(D.conj().T)
    eye = np.eye(D.shape[0])
    alpha = np.array(alpha, dtype=float)
    L, _, Nr = Z.shape
    g_mean = np.empty((L, alpha.shape[1], Nr), dtype=complex)
    for ell in range(L):
        a = alpha[ell]
        for _ in range(iterations):
            diag, g = posterior_moments(D, a, Z[ell], dh, eye)
            second = (g.real ** 2 + g.imag ** 2).sum(axis=1) + Nr * np.maximum(diag, 0.0)
            a = np.minimum((hyper.a + Nr) / (hyper.b + second), hyper.alpha_cap)
        alpha[ell] = a
        g_mean[ell] = g
    return alpha, g_mean


def evidence_lower_bound(D, Z, alpha_mean, g_mean, sigma, hyper: Hyperparams) -> float:
    """Variational free energy of ``q(G) q(alpha)``.

    ``q(alpha_m)`` is the Gamma with shape ``a + N_r`` whose mean is
    ``alpha_mean[m]``, which is exactly what the precision update produces.
    Needs ``a > 0`` and ``b > 0`` for the prior normalizer.
    """
    D = _matrix(D)
    Z = np.asarray(Z)
    if Z.ndim == 1:
        Z = Z[:, None]
    W, M = D.shape
    Nr = Z.shape[1]
    a, b = hyper.a, hyper.b
    shape = a + Nr
    rate = shape / alpha_mean
    e_log_alpha = digamma(shape) - np.log(rate)
    var = np.real(np.diag(sigma))
    second = (np.abs(g_mean) ** 2).sum(axis=1) + Nr * var

    resid = Z - D @ g_mean
    e_lik = (-Nr * W * np.log(np.pi) - np.sum(np.abs(resid) ** 2)
             - Nr * np.real(np.trace(D @ sigma @ D.conj().T)))
    e_prior_g = -Nr * M * np.log(np.pi) + Nr * e_log_alpha.sum() - np.sum(alpha_mean * second)
    e_prior_alpha = np.sum(a * np.log(b) - gammaln(a) + (a - 1) * e_log_alpha - b * alpha_mean)
    _, logdet = np.linalg.slogdet(sigma)
    h_g = Nr * (M * np.log(np.pi * np.e) + logdet)
    h_alpha = np.sum(shape - np.log(rate) + gammaln(shape) + (1 - shape) * digamma(shape))
    return float(e_lik + e_prior_g + e_prior_alpha + h_g + h_alpha)


def genie_estimate(D, Z, support_rows, prior_variance) -> np.ndarray:
    """Linear MMSE estimate on a known support, zero elsewhere.

    ``prior_variance`` gives the per-row channel variance; ``inf`` reduces to
    least squares on the support.
    """
    D = _matrix(D)
    Z = np.asarray(Z)
    if Z.ndim == 1:
        Z = Z[:, None]
    rows = np.asarray(support_rows, dtype=int)
    G = np.zeros((D.shape[1], Z.shape[1]), dtype=complex)
    if rows.size == 0:
        return G
    Ds = D[:, rows]
    prior_precision = 1.0 / np.broadcast_to(np.asarray(prior_variance, dtype=float), rows.shape)
    gram = Ds.conj().T @ Ds + np.diag(prior_precision)
    G[rows] = sla.solve(gram, Ds.conj().T @ Z, assume_a="her")
    return G
