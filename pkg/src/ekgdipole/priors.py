"""Gaussian priors for dipole states and electrode locations."""

from dataclasses import dataclass, field

import numpy as np

from .geometry import ELECTRODES, N_ELECTRODES, ElectrodeLayout, as_vec3
from .errors import DimensionMismatch

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GaussianPrior3:
    mean: np.ndarray
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "mean", as_vec3(self.mean, "mean"))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class TorsoEllipse:
    """Horizontal torso cross-section carrying the precordial electrodes.

    ``half_width`` is the semi-major axis (m) along x; the anterior-posterior
    semi-axis is ``half_width / axis_ratio``. Angles are in degrees.
    """

    half_width: float = 0.125
    axis_ratio: float = 2.75
    angle_start: float = 260.0
    angle_end: float = 360.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if not self.axis_ratio > 1:
            raise ValueError("axis_ratio must exceed 1")
        if not self.angle_start < self.angle_end:
            raise ValueError("angle_start must be below angle_end")

    @property
    def half_depth(self):
        return self.half_width / self.axis_ratio


def precordial_prior_means(ellipse=TorsoEllipse()):
    """V1..V6 prior means at evenly spaced angles on the torso ellipse.

    Returns an array of shape (6, 3). Angle theta maps to
    ``(a cos theta, -b sin theta, 0)``, so the default 260..360 degree sweep
    runs from right-parasternal across the anterior chest to the left side.
    """
    theta = np.deg2rad(np.linspace(ellipse.angle_start, ellipse.angle_end, 6))
    a, b = ellipse.half_width, ellipse.half_depth
    return np.column_stack([a * np.cos(theta), -b * np.sin(theta), np.zeros(6)])


@dataclass(frozen=True)
class ElectrodePriorSet:
    """One isotropic Gaussian per electrode, in layout order."""

    priors: tuple

    def __post_init__(self):
        if len(self.priors) != N_ELECTRODES:
            raise DimensionMismatch(f"need {N_ELECTRODES} electrode priors")

    @property
    def means(self):
        return np.array([p.mean for p in self.priors])

    @property
    def sigmas(self):
        return np.array([p.sigma for p in self.priors])

    def mean_layout(self):
        return ElectrodeLayout(self.means)


@dataclass(frozen=True)
class PriorConfig:
    """Electrode prior hyperparameters (all overridable from a run config)."""

    ellipse: TorsoEllipse = field(default_factory=TorsoEllipse)
    precordial_sigma: float = 0.02
    la_mean: tuple = (0.30, 0.0, 0.0)
    ra_mean: tuple = (-0.30, 0.0, 0.0)
    ll_mean: tuple = (0.15, 0.0, -0.45)
    limb_sigma: float = 0.10


def default_electrode_priors(config=PriorConfig()):
    limbs = [GaussianPrior3(m, config.limb_sigma)
             for m in (config.la_mean, config.ra_mean, config.ll_mean)]
    chest = [GaussianPrior3(m, config.precordial_sigma)
             for m in precordial_prior_means(config.ellipse)]
    return ElectrodePriorSet(tuple(limbs + chest))


def _isotropic_logpdf(x, mean, sigma):
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    sq = np.sum((x - mean) ** 2, axis=-1)
    return -0.5 * sq / sigma ** 2 - dim * (0.5 * LOG_2PI + np.log(sigma))


def log_prior_dipole(state, sigma_s, sigma_p):
    """Log-density of a dipole state under zero-mean isotropic Gaussians.

    Returns
    -------
    value : float
    grad : ndarray, shape (6,)
        Gradient with respect to ``(location, moment)``.
    """
    if not (sigma_s > 0 and sigma_p > 0):
        raise ValueError("prior scales must be positive")
    s, p = state.location, state.moment
    value = _isotropic_logpdf(s, 0.0, sigma_s) + _isotropic_logpdf(p, 0.0, sigma_p)
    grad = np.concatenate([-s / sigma_s ** 2, -p / sigma_p ** 2])
    return float(value), grad


def log_prior_electrodes(layout, priors):
    """Summed electrode log-density and its (9, 3) gradient."""
    pos = layout.positions if isinstance(layout, ElectrodeLayout) else np.asarray(layout)
    if pos.shape != (len(priors.priors), 3):
        raise DimensionMismatch("layout and prior set lengths differ")
    means, sigmas = priors.means, priors.sigmas
    value = np.sum(_isotropic_logpdf(pos, means, sigmas))
    grad = -(pos - means) / sigmas[:, None] ** 2
    return float(value), grad


__all__ = [
    "ELECTRODES", "GaussianPrior3", "TorsoEllipse", "ElectrodePriorSet",
    "PriorConfig", "precordial_prior_means", "default_electrode_priors",
    "log_prior_dipole", "log_prior_electrodes",
]
