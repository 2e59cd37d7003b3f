"""Shared builders for the inference tests."""

import numpy as np

from ekgdipole.data import EkgRecord
from ekgdipole.inference import FitConfig
from ekgdipole.priors import default_electrode_priors
from ekgdipole.synth import DipoleLoop, generate

PRIORS = default_electrode_priors()
CONFIG = FitConfig()


def random_instance(seed, T=3, missing=0.2):
    """Noisy short record plus a parameter point near (not at) the truth."""
    rng = np.random.default_rng(seed)
    rec, truth = generate(DipoleLoop(T=max(T, 2), seed=seed, loop_radius=0.01))
    rec = EkgRecord(rec.samples[:T], rec.mask[:T], rec.sample_rate_hz)
    truth.locations, truth.moments = truth.locations[:T], truth.moments[:T]
    mask = np.where(rng.random(rec.samples.shape) < missing, 2, 0)
    mask[0, 0] = 0
    rec = EkgRecord(rec.samples, mask, rec.sample_rate_hz, "inst")
    S = truth.locations + 0.01 * rng.standard_normal((T, 3))
    P = truth.moments + 3e-6 * rng.standard_normal((T, 3))
    R = truth.positions + 0.005 * rng.standard_normal((9, 3))
    return rec, S, P, R


def whitening(config=CONFIG, priors=PRIORS, T=3):
    """Per-coordinate scales (S, P, R) used for steps and gradient norms."""
    return (np.full((T, 3), config.sigma_s), np.full((T, 3), config.sigma_p),
            np.repeat(priors.sigmas[:, None], 3, axis=1))
