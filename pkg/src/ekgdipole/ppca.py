"""Probabilistic PCA with missing entries, fit by EM.

Model: ``x_t = F z_t + mu + eps`` with ``z_t ~ N(0, I_K)`` and
``eps ~ N(0, sigma^2 I)``. Only observed entries enter the likelihood. The
E-step conditions each frame on its observed subvector through a K x K
system, batched over frames.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InsufficientData
from .geometry import N_LEADS

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class PpcaConfig:
    max_iters: int = 500
    tol: float = 1e-8
    seed: int = 0
    center: bool = True
    min_noise_variance: float = 1e-14


@dataclass
class PpcaModel:
    factors: np.ndarray     # (12, K), mV per unit latent
    mean: np.ndarray        # (12,), mV
    noise_variance: float   # mV^2

    @property
    def K(self):
        return self.factors.shape[1]


@dataclass
class PpcaFit:
    model: PpcaModel
    latent_means: np.ndarray
    log_likelihood_trace: list = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self):
        return max(len(self.log_likelihood_trace) - 1, 0)


def _posterior(model, X, M):
    """Posterior means (T, K), per-frame covariances (T, K, K) and log-likelihood.

    ``X`` holds zeros at unobserved entries and ``M`` is the boolean
    observation mask; every frame gets its own batched K x K solve.
    """
    F, mu, s2 = model.factors, model.mean, model.noise_variance
    K = F.shape[1]
    Mf = M.astype(float)
    n_o = Mf.sum(axis=1)
    C = np.einsum("ik,ti,il->tkl", F, Mf, F) + s2 * np.eye(K)
    Cinv = np.linalg.inv(C)
    r = Mf * (X - mu)
    proj = r @ F                                        # (T, K)
    means = np.einsum("tk,tkl->tl", proj, Cinv)
    covs = s2 * Cinv
    _, logdet_c = np.linalg.slogdet(C)
    # frames with nothing observed contribute nothing
    seen = n_o > 0
    logdet = (n_o - K) * np.log(s2) + logdet_c
    quad = (np.sum(r * r, axis=1) - np.sum(proj * means, axis=1)) / s2
    loglik = -0.5 * np.sum((quad + n_o * LOG_2PI + logdet)[seen])
    return means, covs, float(loglik)


def _initial_model(X, M, K, config):
    counts = M.sum(axis=0)
    col_mean = np.where(counts > 0, (X * M).sum(axis=0) / np.maximum(counts, 1), 0.0)
    mu = col_mean if config.center else np.zeros(X.shape[1])
    filled = np.where(M, X, col_mean) - mu
    T = X.shape[0]
    _, sv, vt = np.linalg.svd(filled, full_matrices=False)
    eig = sv ** 2 / T
    rest = eig[K:]
    floor = config.min_noise_variance * max(float(np.mean(eig)), 1.0)
    s2 = max(float(rest.mean()) if rest.size else 0.0, floor)
    scale = np.sqrt(np.maximum(eig[:K] - s2, floor))
    F = vt[:K].T * scale
    return PpcaModel(F, mu, s2)


def _m_step(X, M, means, covs, model, config):
    T, K = means.shape
    Ezz = covs + means[:, :, None] * means[:, None, :]
    Mf = M.astype(float)
    if config.center:
        ez = np.concatenate([means, np.ones((T, 1))], axis=1)
        ezz = np.zeros((T, K + 1, K + 1))
        ezz[:, :K, :K] = Ezz
        ezz[:, :K, K] = means
        ezz[:, K, :K] = means
        ezz[:, K, K] = 1.0
    else:
        ez, ezz = means, Ezz
    A = np.einsum("ti,tab->iab", Mf, ezz)            # (12, K', K')
    b = np.einsum("ti,ta->ia", Mf * X, ez)             # (12, K')
    W = np.linalg.solve(A, b[..., None])[..., 0]      # rows [F_i, mu_i]
    F = W[:, :K]
    mu = W[:, K] if config.center else np.zeros(X.shape[1])
    pred = ez @ W.T                                    # (T, 12)
    quad = np.einsum("ia,tab,ib->ti", W, ezz, W)
    resid = Mf * (X * X - 2.0 * X * pred + quad)
    s2 = float(resid.sum() / Mf.sum())
    floor = config.min_noise_variance * max(float(np.var(X[M])), 1.0)
    return PpcaModel(F, mu, max(s2, floor))


def ppca_fit(record, K, config=PpcaConfig()):
    """Fit PPCA with ``K`` factors to the observed entries of ``record``.

    Raises
    ------
    InsufficientData
        If some lead has fewer than ``K + 1`` observed samples or ``T < K``.
    """
    if not 1 <= K <= N_LEADS - 1:
        raise ValueError("K must lie in 1..11")
    M = record.observed
    X = record.observed_values()
    T = X.shape[0]
    counts = M.sum(axis=0)
    if T < K or np.any(counts < K + 1):
        raise InsufficientData(
            f"need T >= {K} and >= {K + 1} observed samples per lead; got T={T}, "
            f"min per lead {int(counts.min())}")
    model = _initial_model(X, M, K, config)
    means, covs, ll = _posterior(model, X, M)
    trace = [ll]
    converged = False
    for _ in range(config.max_iters):
        model = _m_step(X, M, means, covs, model, config)
        means, covs, ll = _posterior(model, X, M)
        trace.append(ll)
        if abs(trace[-1] - trace[-2]) <= config.tol * max(abs(trace[-2]), 1.0):
            converged = True
            break
    return PpcaFit(model, means, trace, converged)


def conditional_latents(model, record):
    """E[z_t | observed entries of x_t] for every frame."""
    X = record.observed_values()
    means, _, _ = _posterior(model, X, record.observed)
    return means


def ppca_impute(fit, record):
    """Fill non-observed entries with ``mu + F E[z_t | observed x_t]``."""
    if fit.latent_means.shape[0] != record.n_samples:
        raise DimensionMismatch("fit does not match record length")
    m = fit.model
    recon = conditional_latents(m, record) @ m.factors.T + m.mean
    return np.where(record.observed, record.samples, recon)
