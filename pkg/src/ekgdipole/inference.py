"""MAP fitting of the moving-dipole model to one EKG record.

The objective is the log-joint

    sum_t log N(x_t[obs] | leads(s_t, p_t, R)[obs], sigma^2 I)
        + sum_t [log N(s_t | 0, sigma_s^2 I) + log N(p_t | 0, sigma_p^2 I)]
        + sum_e log p_e(r_e)
        - barrier(distances)

maximized over all dipole locations ``S`` (T, 3), moments ``P`` (T, 3) and
electrode positions ``R`` (9, 3). Leads are linear in ``p_t`` for fixed
``s_t`` and ``R``, so the moment posterior given everything else is Gaussian
and is used both for initialization and to profile moments out of the
per-frame location updates.

Optimization runs in whitened coordinates (``S / sigma_s``, ``P / sigma_p``
and ``(R - mean) / prior_sigma``); reported gradient norms use those units.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .data import EkgRecord
from .errors import DegenerateGeometry, DimensionMismatch, NoObservedData
from .geometry import (KAPPA_DEFAULT, LEAD_MATRIX, N_ELECTRODES, N_LEADS,
                       VOLTS_TO_MV, DipoleState, ElectrodeLayout,
                       leads_from_trajectory)
from .priors import LOG_2PI, default_electrode_priors

log = logging.getLogger(__name__)

# sharpness of the softplus barrier, in units of 1 / d_min
BARRIER_SHARPNESS = 10.0


@dataclass(frozen=True)
class FitConfig:
    sigma_noise: float = 0.02
    sigma_s: float = 0.10
    sigma_p: float = 1e-4
    kappa: float = KAPPA_DEFAULT
    max_outer_iterations: int = 20
    lbfgs_memory: int = 10
    lbfgs_max_iters: int = 500
    block_iters: int = 30
    joint_lm_iters: int = 50
    gradient_tolerance: float = 1e-6
    objective_tolerance: float = 1e-12
    n_restarts: int = 3
    rng_seed: int = 0
    degeneracy_penalty_weight: float = 100.0
    d_min: float = 1e-3
    init_location_jitter: float = 0.05
    restart_layout_jitter: float = 0.5
    screen_grid: int = 5
    screen_extent: float = 1.0

    def __post_init__(self):
        for name in ("sigma_noise", "sigma_s", "sigma_p", "kappa", "max_outer_iterations",
                     "lbfgs_memory", "lbfgs_max_iters", "gradient_tolerance",
                     "objective_tolerance", "n_restarts", "degeneracy_penalty_weight", "d_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (self.gradient_tolerance < 1 and self.objective_tolerance < 1):
            raise ValueError("tolerances must be below 1")
        if min(self.block_iters, self.joint_lm_iters, self.screen_grid) < 0:
            raise ValueError("block_iters, joint_lm_iters and screen_grid must be non-negative")


@dataclass
class FitResult:
    locations: np.ndarray
    moments: np.ndarray
    layout: ElectrodeLayout
    log_joint: float
    reconstruction: np.ndarray
    converged: bool
    iterations: int
    grad_inf_norm: float
    restart_log_joints: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def trajectory(self):
        return [DipoleState(s, p) for s, p in zip(self.locations, self.moments)]


# ---------------------------------------------------------------------------
# objective

def _check_shapes(locations, moments, positions, record):
    T = record.n_samples
    if locations.shape != (T, 3) or moments.shape != (T, 3):
        raise DimensionMismatch(
            f"trajectory must be ({T}, 3); got {locations.shape} and {moments.shape}")
    if positions.shape != (N_ELECTRODES, 3):
        raise DimensionMismatch(f"layout must be ({N_ELECTRODES}, 3)")


def _positions(layout):
    return layout.positions if isinstance(layout, ElectrodeLayout) else np.asarray(layout, float)


def _unpack_trajectory(trajectory):
    if isinstance(trajectory, tuple) and len(trajectory) == 2:
        return np.asarray(trajectory[0], float), np.asarray(trajectory[1], float)
    states = list(trajectory)
    return (np.array([st.location for st in states]).reshape(-1, 3),
            np.array([st.moment for st in states]).reshape(-1, 3))


class _Problem:
    """Masked data and hyperparameters bundled for repeated evaluation."""

    def __init__(self, record, priors, config):
        self.config = config
        self.priors = priors
        self.M = record.observed.astype(float)
        self.X = record.observed_values()
        self.n_obs = int(self.M.sum())
        self.c = 1.0 / (4.0 * np.pi * config.kappa)
        self.r_mean = priors.means
        self.r_sigma = priors.sigmas
        T = record.n_samples
        self.T = T
        self.empty_frames = self.M.sum(axis=1) == 0

    # -- pieces ----------------------------------------------------------

    def const(self):
        cfg = self.config
        lik = -self.n_obs * (0.5 * LOG_2PI + np.log(cfg.sigma_noise))
        dip = -3 * self.T * (LOG_2PI + np.log(cfg.sigma_s) + np.log(cfg.sigma_p))
        elec = -3 * np.sum(0.5 * LOG_2PI + np.log(self.r_sigma))
        return lik + dip + elec

    def evaluate(self, S, P, R, need_grad=True):
        """Log-joint and its gradients (gS, gP, gR) in physical units."""
        cfg = self.config
        D = R[None, :, :] - S[:, None, :]
        dist = np.sqrt(np.einsum("tej,tej->te", D, D))
        dist = np.maximum(dist, 1e-12)
        inv3 = dist ** -3
        dp = np.einsum("tej,tj->te", D, P)
        phi = self.c * dp * inv3
        leads = VOLTS_TO_MV * phi @ LEAD_MATRIX.T
        res = self.M * (self.X - leads)
        s2 = cfg.sigma_noise ** 2

        k = BARRIER_SHARPNESS / cfg.d_min
        z = k * (cfg.d_min - dist)
        barrier = cfg.degeneracy_penalty_weight * np.sum(np.logaddexp(0.0, z))

        value = (-0.5 * np.sum(res * res) / s2
                 - 0.5 * np.sum(S * S) / cfg.sigma_s ** 2
                 - 0.5 * np.sum(P * P) / cfg.sigma_p ** 2
                 - 0.5 * np.sum(((R - self.r_mean) / self.r_sigma[:, None]) ** 2)
                 - barrier + self.const())
        if not need_grad:
            return value, None
        W = VOLTS_TO_MV * (res / s2) @ LEAD_MATRIX          # dL/dphi
        gP = self.c * np.einsum("te,tej->tj", W * inv3, D)
        gD = (self.c * (W * inv3)[:, :, None] * P[:, None, :]
              - (3.0 * self.c * W * dp * inv3 / dist ** 2)[:, :, None] * D)
        gD += (cfg.degeneracy_penalty_weight * k * expit(z) / dist)[:, :, None] * D
        gR = gD.sum(axis=0) - (R - self.r_mean) / self.r_sigma[:, None] ** 2
        gS = -gD.sum(axis=1) - S / cfg.sigma_s ** 2
        gP -= P / cfg.sigma_p ** 2
        return value, (gS, gP, gR)

    def coefficients(self, S, R):
        """Moment-to-lead matrices A_t (T, 3, 12) in mV per A m, unmasked."""
        D = R[None, :, :] - S[:, None, :]
        dist = np.maximum(np.sqrt(np.sum(D * D, axis=2)), 1e-12)
        G = self.c * D * (dist ** -3)[:, :, None]
        return VOLTS_TO_MV * np.matmul(G.transpose(0, 2, 1), LEAD_MATRIX.T)

    def moment_posterior(self, S, R):
        """Gaussian posterior of every p_t given s_t and R: (means, covariances)."""
        cfg = self.config
        At = self.coefficients(S, R)
        AtM = At * self.M[:, None, :]
        sp, s2 = cfg.sigma_p, cfg.sigma_noise ** 2
        # whitened 3x3 systems: (sp^2 A'MA / s2 + I) (p / sp) = sp A'Mx / s2
        prec_w = np.matmul(AtM, At.transpose(0, 2, 1)) * (sp * sp / s2) + np.eye(3)
        rhs_w = np.matmul(AtM, self.X[:, :, None]) * (sp / s2)
        mean = sp * np.linalg.solve(prec_w, rhs_w)[..., 0]
        cov = sp * sp * np.linalg.inv(prec_w)
        return mean, cov

    # -- whitening -------------------------------------------------------

    def pack(self, S, P, R):
        cfg = self.config
        return np.concatenate([(S / cfg.sigma_s).ravel(), (P / cfg.sigma_p).ravel(),
                               ((R - self.r_mean) / self.r_sigma[:, None]).ravel()])

    def unpack(self, theta):
        cfg = self.config
        n = 3 * self.T
        S = theta[:n].reshape(-1, 3) * cfg.sigma_s
        P = theta[n:2 * n].reshape(-1, 3) * cfg.sigma_p
        R = theta[2 * n:].reshape(N_ELECTRODES, 3) * self.r_sigma[:, None] + self.r_mean
        return S, P, R

    def pack_grad(self, gS, gP, gR):
        cfg = self.config
        return np.concatenate([(gS * cfg.sigma_s).ravel(), (gP * cfg.sigma_p).ravel(),
                               (gR * self.r_sigma[:, None]).ravel()])

    # -- optimizer steps -------------------------------------------------

    def joint_step(self, S, P, R, maxiter, trace):
        def fun(theta):
            value, grads = self.evaluate(*self.unpack(theta))
            return -value, -self.pack_grad(*grads)

        def callback(intermediate_result):
            trace.append(-float(intermediate_result.fun))

        res = _lbfgs(fun, self.pack(S, P, R), self.config, maxiter, callback)
        S, P, R = self.unpack(res.x)
        return S, P, R, int(res.nit)

    def frame_values(self, S, P, R):
        """Per-frame log-joint terms (no electrode prior, no constants)."""
        cfg = self.config
        D = R[None, :, :] - S[:, None, :]
        dist = np.maximum(np.sqrt(np.sum(D * D, axis=2)), 1e-12)
        phi = self.c * np.sum(D * P[:, None, :], axis=2) * dist ** -3
        res = self.M * (self.X - VOLTS_TO_MV * phi @ LEAD_MATRIX.T)
        z = BARRIER_SHARPNESS / cfg.d_min * (cfg.d_min - dist)
        return (-0.5 * np.sum(res * res, axis=1) / cfg.sigma_noise ** 2
                - 0.5 * np.sum(S * S, axis=1) / cfg.sigma_s ** 2
                - 0.5 * np.sum(P * P, axis=1) / cfg.sigma_p ** 2
                - cfg.degeneracy_penalty_weight * np.sum(np.logaddexp(0.0, z), axis=1))

    def profiled(self, S, R):
        """Moments at their conditional optimum and the resulting frame values."""
        P, _ = self.moment_posterior(S, R)
        return P, self.frame_values(S, P, R)

    def screen_locations(self, S, R):
        """Move each frame's location to the best grid point if that helps."""
        cfg = self.config
        n = cfg.screen_grid
        if n == 0:
            return S
        axis = np.linspace(-cfg.screen_extent, cfg.screen_extent, n) * cfg.sigma_s
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
        _, best = self.profiled(S, R)
        S = S.copy()
        for g in grid:
            cand = np.broadcast_to(g, S.shape)
            _, vals = self.profiled(cand, R)
            better = vals > best
            S[better] = g
            best[better] = vals[better]
        return S

    def frame_jacobian(self, S, P, R):
        """Whitened per-frame Jacobian of the masked, noise-scaled residuals.

        Returns (res, J, gbar) where ``res`` is (T, 12), ``J`` is (T, 12, 6)
        with columns d res / d (s / sigma_s, p / sigma_p), and ``gbar`` is
        the barrier gradient (T, 6) in the same whitened coordinates.
        """
        cfg = self.config
        D = R[None, :, :] - S[:, None, :]
        dist = np.maximum(np.sqrt(np.sum(D * D, axis=2)), 1e-12)
        inv3 = dist ** -3
        dp = np.sum(D * P[:, None, :], axis=2)
        G = self.c * D * inv3[:, :, None]                      # d phi / d p
        phi = dp * self.c * inv3
        dphi_ds = -(self.c * inv3[:, :, None] * P[:, None, :]
                    - (3.0 * self.c * dp * inv3 / dist ** 2)[:, :, None] * D)
        scale = self.M[:, :, None] * (VOLTS_TO_MV / cfg.sigma_noise)
        Js = np.matmul(LEAD_MATRIX, dphi_ds) * scale * cfg.sigma_s
        Jp = np.matmul(LEAD_MATRIX, G) * scale * cfg.sigma_p
        res = self.M * (self.X - VOLTS_TO_MV * phi @ LEAD_MATRIX.T) / cfg.sigma_noise
        # residual is data minus prediction, hence the sign
        J = -np.concatenate([Js, Jp], axis=2)
        k = BARRIER_SHARPNESS / cfg.d_min
        w = cfg.degeneracy_penalty_weight * k * expit(k * (cfg.d_min - dist)) / dist
        gbar = np.zeros((S.shape[0], 6))
        gbar[:, :3] = np.sum(w[:, :, None] * D, axis=1) * cfg.sigma_s
        return res, J, gbar

    def layout_jacobian(self, S, P, R):
        """Whitened Jacobian of the residuals with respect to the layout.

        Returns (JR, gbarR): ``JR`` is (T, 12, 27) with columns
        d res / d ((r_e - mean_e) / sigma_e) and ``gbarR`` the (27,) barrier
        gradient in the same coordinates.
        """
        cfg = self.config
        D = R[None, :, :] - S[:, None, :]
        dist = np.maximum(np.sqrt(np.sum(D * D, axis=2)), 1e-12)
        inv3 = dist ** -3
        dp = np.sum(D * P[:, None, :], axis=2)
        dphi_dr = (self.c * inv3[:, :, None] * P[:, None, :]
                   - (3.0 * self.c * dp * inv3 / dist ** 2)[:, :, None] * D)
        dphi_dr *= self.r_sigma[None, :, None]
        scale = self.M * (-VOLTS_TO_MV / cfg.sigma_noise)
        JR = (scale[:, :, None, None] * LEAD_MATRIX[None, :, :, None]
              * dphi_dr[:, None, :, :]).reshape(S.shape[0], N_LEADS, 3 * N_ELECTRODES)
        k = BARRIER_SHARPNESS / cfg.d_min
        w = cfg.degeneracy_penalty_weight * k * expit(k * (cfg.d_min - dist)) / dist
        gbarR = -(np.sum(w[:, :, None] * D, axis=0) * self.r_sigma[:, None]).ravel()
        return JR, gbarR

    def joint_lm_step(self, S, P, R, iters, trace):
        """Damped Gauss-Newton over every parameter at once.

        The normal equations have one 6x6 block per frame coupled only
        through the 27 layout coordinates, so the layout update is solved on
        its Schur complement and the frame updates follow by back
        substitution.
        """
        cfg = self.config
        value, grads = self.evaluate(S, P, R)
        lam = 1e-3
        eye6, eye27 = np.eye(6), np.eye(3 * N_ELECTRODES)
        n_iter = 0
        for _ in range(iters):
            if np.max(np.abs(self.pack_grad(*grads))) < cfg.gradient_tolerance:
                break
            n_iter += 1
            res, J, gbar = self.frame_jacobian(S, P, R)
            JR, gbarR = self.layout_jacobian(S, P, R)
            u = np.concatenate([S / cfg.sigma_s, P / cfg.sigma_p], axis=1)
            v = ((R - self.r_mean) / self.r_sigma[:, None]).ravel()
            g_t = np.einsum("tli,tl->ti", J, res) + u + gbar
            g_R = np.einsum("tlk,tl->k", JR, res) + v + gbarR
            Htt = np.matmul(J.transpose(0, 2, 1), J) + eye6
            HtR = np.matmul(J.transpose(0, 2, 1), JR)
            HRR = np.einsum("tlk,tlm->km", JR, JR) + eye27
            accepted = False
            for _ in range(10):
                A = Htt + lam * eye6
                Ainv_HtR = np.linalg.solve(A, HtR)
                Ainv_g = np.linalg.solve(A, g_t[:, :, None])[..., 0]
                schur = HRR + lam * eye27 - np.einsum("tik,tim->km", HtR, Ainv_HtR)
                rhs = -g_R + np.einsum("tik,ti->k", HtR, Ainv_g)
                dR = np.linalg.solve(schur, rhs)
                dT = -(Ainv_g + Ainv_HtR @ dR)
                S2 = S + dT[:, :3] * cfg.sigma_s
                P2 = P + dT[:, 3:] * cfg.sigma_p
                R2 = R + dR.reshape(N_ELECTRODES, 3) * self.r_sigma[:, None]
                value2, _ = self.evaluate(S2, P2, R2, need_grad=False)
                if value2 > value:
                    accepted = True
                    break
                lam *= 10.0
            if not accepted:
                break
            gain = value2 - value
            S, P, R = S2, P2, R2
            value, grads = self.evaluate(S, P, R)
            trace.append(float(value))
            lam = max(lam * 0.3, 1e-9)
            if gain <= cfg.objective_tolerance * max(1.0, abs(value)):
                break
        return S, P, R, n_iter

    def block_step(self, S, P, R, iters):
        """Per-frame damped Gauss-Newton on (s_t, p_t) with the layout fixed.

        Frames are independent given R, so every frame carries its own
        damping and accepts a step only if its own objective improves.
        """
        cfg = self.config
        T = S.shape[0]
        lam = np.full(T, 1e-3)
        f = -self.frame_values(S, P, R)
        active = ~self.empty_frames
        n_iter = 0
        eye = np.eye(6)
        for _ in range(iters):
            if not active.any():
                break
            n_iter += 1
            idx = np.flatnonzero(active)
            Si, Pi = S[idx], P[idx]
            sub = _Subset(self, idx)
            res, J, gbar = sub.frame_jacobian(Si, Pi, R)
            u = np.concatenate([Si / cfg.sigma_s, Pi / cfg.sigma_p], axis=1)
            grad = np.einsum("tli,tl->ti", J, res) + u + gbar
            H = np.matmul(J.transpose(0, 2, 1), J) + eye
            fi = f[idx]
            improved = np.zeros(idx.size, bool)
            li = lam[idx]
            for _ in range(8):
                todo = ~improved
                if not todo.any():
                    break
                A = H[todo] + li[todo, None, None] * eye
                step = -np.linalg.solve(A, grad[todo][:, :, None])[..., 0]
                S2 = Si[todo] + step[:, :3] * cfg.sigma_s
                P2 = Pi[todo] + step[:, 3:] * cfg.sigma_p
                f2 = -_Subset(self, idx[todo]).frame_values(S2, P2, R)
                ok = f2 < fi[todo]
                where = np.flatnonzero(todo)
                acc = where[ok]
                Si[acc], Pi[acc] = S2[ok], P2[ok]
                gain = fi[acc] - f2[ok]
                fi[acc] = f2[ok]
                improved[acc] = True
                li[acc] = np.maximum(li[acc] * 0.3, 1e-9)
                li[where[~ok]] *= 10.0
                # converged frames: tiny relative improvement
                done = gain <= 1e-12 * np.maximum(1.0, np.abs(fi[acc]))
                active[idx[acc[done]]] = False
            S[idx], P[idx], f[idx], lam[idx] = Si, Pi, fi, li
            stuck = ~improved
            active[idx[stuck & (li > 1e8)]] = False
        return S, P, n_iter


class _Subset(_Problem):
    """View of a problem restricted to a subset of frames."""

    def __init__(self, parent, idx):
        self.__dict__.update(parent.__dict__)
        self.M = parent.M[idx]
        self.X = parent.X[idx]
        self.T = len(idx)
        self.empty_frames = parent.empty_frames[idx]


def _lbfgs(fun, x0, config, maxiter, callback=None):
    return minimize(fun, x0, jac=True, method="L-BFGS-B", callback=callback,
                    options=dict(maxcor=config.lbfgs_memory, maxiter=maxiter,
                                 gtol=config.gradient_tolerance,
                                 ftol=config.objective_tolerance, maxls=40))


# ---------------------------------------------------------------------------
# public operations

def log_joint(trajectory, layout, record, config=FitConfig(), priors=None):
    """Log-joint density of a trajectory and layout given a record."""
    priors = priors or default_electrode_priors()
    S, P = _unpack_trajectory(trajectory)
    R = _positions(layout)
    _check_shapes(S, P, R, record)
    value, _ = _Problem(record, priors, config).evaluate(S, P, R, need_grad=False)
    return float(value)


def log_joint_gradient(trajectory, layout, record, config=FitConfig(), priors=None):
    """Gradient of ``log_joint`` as (d/dS (T,3), d/dP (T,3), d/dR (9,3))."""
    priors = priors or default_electrode_priors()
    S, P = _unpack_trajectory(trajectory)
    R = _positions(layout)
    _check_shapes(S, P, R, record)
    _, grads = _Problem(record, priors, config).evaluate(S, P, R)
    return grads


def conditional_moment_posterior(location, layout, observed_leads, mask, config=FitConfig()):
    """Gaussian posterior over one frame's moment with the location fixed.

    Parameters
    ----------
    location : array_like, shape (3,)
    layout : ElectrodeLayout
    observed_leads : array_like, shape (12,)
        Lead values in mV; entries where ``mask`` is False are ignored.
    mask : array_like of bool, shape (12,)
        True where the lead is observed.

    Returns
    -------
    mean : ndarray, shape (3,)
    cov : ndarray, shape (3, 3)
    """
    s = np.asarray(location, float).reshape(1, 3)
    R = _positions(layout)
    mask = np.asarray(mask, bool).reshape(N_LEADS)
    if not mask.any():
        raise NoObservedData("no observed lead at this frame")
    dist = np.linalg.norm(R - s, axis=1)
    if dist.min() < config.d_min:
        e = int(np.argmin(dist))
        raise DegenerateGeometry(f"dipole within {dist[e]:.3g} m of electrode {e}", e)
    x = np.where(mask, np.nan_to_num(np.asarray(observed_leads, float)), 0.0)
    rec = EkgRecord(x[None, :], np.where(mask, 0, 2)[None, :], 1.0)
    prob = _Problem(rec, default_electrode_priors(), config)
    mean, cov = prob.moment_posterior(s, R)
    return mean[0], cov[0]


def initialize(record, priors, config=FitConfig(), restart_index=0):
    """Starting (locations, moments, positions) for one restart."""
    if record.n_samples == 0:
        raise DimensionMismatch("empty record")
    rng = np.random.default_rng([config.rng_seed, restart_index])
    R = priors.means.copy()
    if restart_index > 0:
        scale = config.restart_layout_jitter * restart_index * priors.sigmas[:, None]
        R = R + scale * rng.standard_normal(R.shape)
    S = config.init_location_jitter * config.sigma_s * rng.standard_normal((record.n_samples, 3))
    prob = _Problem(record, priors, config)
    S[prob.empty_frames] = 0.0
    P, _ = prob.moment_posterior(S, R)
    return S, P, R


def fit(record, priors=None, config=FitConfig()):
    """MAP estimate of dipole trajectory and electrode layout for one record.

    Each restart alternates a block pass (grid screening on the first round,
    then damped Gauss-Newton steps on each frame's location and moment)
    with a joint L-BFGS pass over every parameter. The restart with
    the highest log-joint is returned.
    """
    priors = priors or default_electrode_priors()
    if not record.observed.any():
        raise NoObservedData(f"record {record.record_id} has no observed entries")
    prob = _Problem(record, priors, config)
    best = None
    restart_values = []
    for restart in range(config.n_restarts):
        S, P, R = initialize(record, priors, config, restart)
        value, _ = prob.evaluate(S, P, R, need_grad=False)
        trace = [value]
        iterations = 0
        for outer in range(config.max_outer_iterations):
            previous = value
            if outer == 0:
                S = prob.screen_locations(S, R)
                P, _ = prob.moment_posterior(S, R)
            S, P, nit = prob.block_step(S, P, R, config.block_iters)
            iterations += nit
            S, P, R, nit = prob.joint_lm_step(S, P, R, config.joint_lm_iters, trace)
            iterations += nit
            S, P, R, nit = prob.joint_step(S, P, R, config.lbfgs_max_iters, trace)
            iterations += nit
            value, grads = prob.evaluate(S, P, R)
            gnorm = float(np.max(np.abs(prob.pack_grad(*grads))))
            log.debug("restart %d outer %d: log_joint %.6f |g|inf %.3g",
                      restart, outer, value, gnorm)
            if gnorm < config.gradient_tolerance:
                break
            if value - previous <= config.objective_tolerance * max(1.0, abs(value)):
                break
        restart_values.append(float(value))
        if best is None or value > best[0]:
            best = (value, S, P, R, iterations, gnorm, trace)

    value, S, P, R, iterations, gnorm, trace = best
    recon = leads_from_trajectory(S, P, R, config.kappa)
    return FitResult(S, P, ElectrodeLayout(R), float(value), recon,
                     converged=gnorm < config.gradient_tolerance,
                     iterations=iterations, grad_inf_norm=gnorm,
                     restart_log_joints=restart_values, trace=trace)


def impute(result, record):
    """Fill every non-observed entry of ``record`` with the model reconstruction."""
    if result.reconstruction.shape != record.samples.shape:
        raise DimensionMismatch("fit result does not match record")
    return np.where(record.observed, record.samples, result.reconstruction)
