"""Physics-based moving-dipole model for 12-lead EKG records.

Fits a single moving current dipole plus electrode locations to a record by
MAP estimation, imputes missing lead segments and compares against a
probabilistic PCA baseline.
"""

from .data import EdLayout, EkgRecord, Mask, PtbHoldout, apply_mask_scheme, read_record, write_record
from .geometry import (ELECTRODES, LEADS, DipoleState, ElectrodeLayout, dipole_potential,
                       electrode_potentials, lead_matrix, leads_from_dipole)
from .inference import FitConfig, FitResult, fit, impute, log_joint, log_joint_gradient
from .ppca import PpcaConfig, ppca_fit, ppca_impute

__version__ = "0.1.0"
