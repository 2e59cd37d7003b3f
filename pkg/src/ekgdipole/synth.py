"""Synthetic EKG records with known ground truth.

Two generators: ``DipoleLoop`` draws a layout from the electrode priors and
sweeps a dipole around a closed loop; ``LowRank`` draws a linear factor model
with an offset. Both are fully determined by their seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .data import full_record
from .geometry import (KAPPA_DEFAULT, LEAD_MATRIX, N_ELECTRODES, N_LEADS,
                       VOLTS_TO_MV, leads_from_trajectory, potential_coefficients)
from .priors import PriorConfig, default_electrode_priors


@dataclass(frozen=True)
class DipoleLoop:
    T: int = 2500
    sample_rate_hz: float = 250.0
    noise_sigma: float = 0.02
    seed: int = 0
    loop_center: tuple = (0.0, 0.0, 0.0)
    loop_radius: float = 0.01
    beats: int = 12
    moment_scale: float = 1e-5
    noise_domain: str = "lead"
    kappa: float = KAPPA_DEFAULT
    priors: PriorConfig = field(default_factory=PriorConfig)

    def __post_init__(self):
        _check_common(self)
        if not (self.loop_radius > 0 and self.moment_scale > 0):
            raise ValueError("loop_radius and moment_scale must be positive")
        if self.beats < 1:
            raise ValueError("beats must be at least 1")
        if self.noise_domain not in ("lead", "electrode"):
            raise ValueError("noise_domain must be 'lead' or 'electrode'")


@dataclass(frozen=True)
class LowRank:
    T: int = 2500
    sample_rate_hz: float = 250.0
    noise_sigma: float = 0.02
    seed: int = 0
    K: int = 3
    factor_scale: float = 0.5

    def __post_init__(self):
        _check_common(self)
        if not 1 <= self.K <= N_LEADS - 1:
            raise ValueError("K must lie in 1..11")
        if not self.factor_scale > 0:
            raise ValueError("factor_scale must be positive")


def _check_common(spec):
    if spec.T < 2:
        raise ValueError("T must be at least 2")
    if not spec.sample_rate_hz > 0:
        raise ValueError("sample_rate_hz must be positive")
    if spec.noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")


@dataclass
class DipoleTruth:
    locations: np.ndarray   # (T, 3) m
    moments: np.ndarray     # (T, 3) A m
    positions: np.ndarray   # (9, 3) m
    clean_leads: np.ndarray  # (T, 12) mV, noiseless


@dataclass
class LowRankTruth:
    factors: np.ndarray     # (12, K)
    mean: np.ndarray        # (12,)
    latents: np.ndarray     # (T, K)
    noise_sigma: float


def _orthonormal_pair(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 2)))
    return q[:, 0], q[:, 1]


def _generate_dipole(spec, rng, record_id):
    prior = default_electrode_priors(spec.priors)
    positions = prior.means + prior.sigmas[:, None] * rng.standard_normal((N_ELECTRODES, 3))

    t = np.arange(spec.T) / spec.sample_rate_hz
    phase = 2.0 * np.pi * spec.beats * t / (spec.T / spec.sample_rate_hz)
    u1, u2 = _orthonormal_pair(rng)
    v1, v2 = _orthonormal_pair(rng)
    offset = rng.uniform(0.0, 2.0 * np.pi)
    locations = (np.asarray(spec.loop_center, float)
                 + spec.loop_radius * (np.outer(np.cos(phase), u1) + np.outer(np.sin(phase), u2)))
    envelope = 0.5 * (1.0 - np.cos(phase))
    moments = spec.moment_scale * envelope[:, None] * (
        np.outer(np.cos(phase + offset), v1) + np.outer(np.sin(phase + offset), v2))

    clean = leads_from_trajectory(locations, moments, positions, spec.kappa)
    if spec.noise_domain == "lead":
        noisy = clean + spec.noise_sigma * rng.standard_normal(clean.shape)
    else:
        coef = potential_coefficients(locations, positions, spec.kappa)
        phi = VOLTS_TO_MV * np.einsum("tej,tj->te", coef, moments)
        phi = phi + spec.noise_sigma * rng.standard_normal(phi.shape)
        noisy = phi @ LEAD_MATRIX.T
    record = full_record(noisy, spec.sample_rate_hz, record_id)
    return record, DipoleTruth(locations, moments, positions, clean)


def _generate_lowrank(spec, rng, record_id):
    factors = spec.factor_scale * rng.standard_normal((N_LEADS, spec.K))
    mean = spec.factor_scale * rng.standard_normal(N_LEADS)
    latents = rng.standard_normal((spec.T, spec.K))
    x = latents @ factors.T + mean
    x = x + spec.noise_sigma * rng.standard_normal(x.shape)
    record = full_record(x, spec.sample_rate_hz, record_id)
    return record, LowRankTruth(factors, mean, latents, spec.noise_sigma)


def generate(spec, record_id=None):
    """Draw one record and its ground truth from ``spec``."""
    rng = np.random.default_rng(spec.seed)
    if isinstance(spec, DipoleLoop):
        return _generate_dipole(spec, rng, record_id or f"dipole_{spec.seed}")
    if isinstance(spec, LowRank):
        return _generate_lowrank(spec, rng, record_id or f"lowrank_{spec.seed}")
    raise TypeError(f"unknown synth spec {spec!r}")
