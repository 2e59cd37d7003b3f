"""Forward model walk-through: one dipole, nine electrodes, twelve leads.

Places electrodes at their prior means, sweeps a dipole around a small loop
and prints the resulting lead values, then checks a few physical invariants
numerically. Writes ``forward_leads.svg`` next to this script.

    python demos/01_forward_model.py
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ekgdipole.geometry import (ELECTRODES, LEADS, DipoleState, ElectrodeLayout,
                                electrode_potentials, lead_matrix, leads_from_dipole,
                                leads_from_trajectory)
from ekgdipole.priors import default_electrode_priors

priors = default_electrode_priors()
layout = priors.mean_layout()

print("electrode prior means (m):")
for name, pos, sd in zip(ELECTRODES, layout.positions, priors.sigmas):
    print(f"  {name:>3}  ({pos[0]:+.4f}, {pos[1]:+.4f}, {pos[2]:+.4f})  sigma {sd:.2f}")

# a dipole near the heart, pointing down and to the left
state = DipoleState(location=(0.0, 0.0, 0.0), moment=(1e-5, -0.3e-5, -0.6e-5))
leads = leads_from_dipole(state, layout)
print("\nlead values (mV):")
print("  " + "  ".join(f"{n}={v:+.3f}" for n, v in zip(LEADS, leads)))

# Invariants: moving everything together changes nothing; leads ignore a
# common offset on the electrodes; doubling the moment doubles the leads.
shift = np.array([0.05, -0.02, 0.10])
moved = leads_from_dipole(DipoleState(state.location + shift, state.moment),
                          ElectrodeLayout(layout.positions + shift))
phi = electrode_potentials(state, layout)
O = lead_matrix()
print("\ntranslation change:", np.max(np.abs(moved - leads)))
print("common-mode change:", np.max(np.abs(O @ (phi + 0.7) - O @ phi)))
print("III - (II - I):    ", leads[2] - (leads[1] - leads[0]))

# a two-beat loop traced at 250 Hz
t = np.arange(500) / 250.0
phase = 2 * np.pi * t
S = 0.01 * np.column_stack([np.cos(phase), np.sin(phase), np.zeros_like(t)])
envelope = 0.5 * (1 - np.cos(phase))
P = 1e-5 * envelope[:, None] * np.column_stack([np.cos(phase), -np.sin(phase), -0.5 * np.ones_like(t)])
X = leads_from_trajectory(S, P, layout.positions)

fig, axes = plt.subplots(4, 3, figsize=(10, 6), sharex=True)
for ax, j in zip(axes.T.ravel(), range(12)):
    ax.plot(t, X[:, j], lw=0.8)
    ax.set_title(LEADS[j], fontsize=8)
    ax.tick_params(labelsize=6)
fig.supxlabel("time (s)")
fig.supylabel("mV")
fig.tight_layout()
out = Path(__file__).with_name("forward_leads.svg")
fig.savefig(out, metadata={"Date": None})
print(f"\nwrote {out}")
