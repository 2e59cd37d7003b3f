"""Moving-dipole forward model: dipole state and electrode layout to 12 leads.

Coordinates are SI (meters, ampere-meters, siemens per meter, volts) with the
origin at the torso center at heart level, +x toward the patient's left,
+y anterior and +z superior. Lead values are returned in millivolts.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, DimensionMismatch

ELECTRODES = ("la", "ra", "ll", "v1", "v2", "v3", "v4", "v5", "v6")
LEADS = ("I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6")
N_ELECTRODES = len(ELECTRODES)
N_LEADS = len(LEADS)

KAPPA_DEFAULT = 0.2
D_MIN_DEFAULT = 1e-3
VOLTS_TO_MV = 1e3


def as_vec3(value, name="vector"):
    """Return ``value`` as a finite float array of shape (3,)."""
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise DimensionMismatch(f"{name} must have shape (3,), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components")
    return arr


def check_kappa(kappa):
    kappa = float(kappa)
    if not kappa > 0:
        raise ValueError(f"conductivity must be positive, got {kappa}")
    return kappa


@dataclass(frozen=True)
class DipoleState:
    """Location ``s`` (m) and moment ``p`` (A m) of a single current dipole."""

    location: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "location", as_vec3(self.location, "location"))
        object.__setattr__(self, "moment", as_vec3(self.moment, "moment"))


@dataclass(frozen=True)
class ElectrodeLayout:
    """Positions of the nine physical electrodes, ordered as ``ELECTRODES``."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.shape != (N_ELECTRODES, 3):
            raise DimensionMismatch(
                f"layout must have shape ({N_ELECTRODES}, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("layout has non-finite positions")
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.linalg.norm(diff, axis=-1) + np.eye(N_ELECTRODES)
        if dist.min() <= 1e-6:
            raise ValueError("electrode positions must be pairwise distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __getitem__(self, name):
        return self.positions[ELECTRODES.index(name)]


def lead_matrix():
    """The fixed 12x9 map from electrode potentials to the standard leads.

    Rows follow ``LEADS`` and columns follow ``ELECTRODES``.
    """
    o_e = np.array([[1.0, -1.0, 0.0],
                    [0.0, -1.0, 1.0],
                    [-1.0, 0.0, 1.0]])
    o_a = np.array([[-0.5, 1.0, -0.5],
                    [1.0, -0.5, -0.5],
                    [-0.5, -0.5, 1.0]])
    o_v = np.full((6, 3), -1.0 / 3.0)
    top = np.hstack([o_e, np.zeros((3, 6))])
    mid = np.hstack([o_a, np.zeros((3, 6))])
    bottom = np.hstack([o_v, np.eye(6)])
    return np.vstack([top, mid, bottom])


LEAD_MATRIX = lead_matrix()
LEAD_MATRIX.setflags(write=False)


def dipole_potential(state, electrode, kappa=KAPPA_DEFAULT, d_min=D_MIN_DEFAULT):
    """Potential (V) at one electrode induced by a dipole in a uniform medium.

    Raises
    ------
    DegenerateGeometry
        If the electrode is closer than ``d_min`` to the dipole.
    """
    kappa = check_kappa(kappa)
    r = as_vec3(electrode, "electrode")
    d = r - state.location
    dist = float(np.sqrt(d @ d))
    if dist < d_min:
        raise DegenerateGeometry(
            f"dipole within {dist:.3g} m of electrode (d_min={d_min:g})")
    return float(d @ state.moment) / (4.0 * np.pi * kappa * dist ** 3)


def electrode_potentials(state, layout, kappa=KAPPA_DEFAULT, d_min=D_MIN_DEFAULT):
    """Potentials (V) at all nine electrodes, in layout order."""
    kappa = check_kappa(kappa)
    d = layout.positions - state.location
    dist = np.linalg.norm(d, axis=1)
    bad = np.flatnonzero(dist < d_min)
    if bad.size:
        e = int(bad[0])
        raise DegenerateGeometry(
            f"dipole within {dist[e]:.3g} m of electrode {ELECTRODES[e]}",
            electrode_index=e)
    return (d @ state.moment) / (4.0 * np.pi * kappa * dist ** 3)


def leads_from_dipole(state, layout, kappa=KAPPA_DEFAULT, d_min=D_MIN_DEFAULT):
    """The 12 lead values (mV) produced by one dipole state."""
    phi = electrode_potentials(state, layout, kappa, d_min)
    return VOLTS_TO_MV * (LEAD_MATRIX @ phi)


def potential_coefficients(locations, positions, kappa=KAPPA_DEFAULT):
    """Per-electrode coefficient rows mapping a moment to potentials.

    For dipole locations of shape (..., 3) and electrode positions (9, 3),
    returns an array of shape (..., 9, 3) whose product with the moment gives
    the electrode potentials in volts. No degeneracy check is made.
    """
    d = positions - np.asarray(locations)[..., None, :]
    dist = np.sqrt(np.einsum("...i,...i->...", d, d))
    return d / (4.0 * np.pi * kappa * dist[..., None] ** 3)


def leads_from_trajectory(locations, moments, positions, kappa=KAPPA_DEFAULT):
    """Vectorized lead values (mV) for a (T, 3) trajectory; no degeneracy check."""
    coef = potential_coefficients(locations, positions, kappa)
    phi = np.einsum("tej,tj->te", coef, np.asarray(moments))
    return VOLTS_TO_MV * phi @ LEAD_MATRIX.T
