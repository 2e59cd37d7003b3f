"""SVG figures: bootstrap median distributions and reconstruction overlays."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import LEADS  # noqa: E402

# stable element ids and no timestamp, so reruns produce identical files
plt.rcParams["svg.hashsalt"] = "ekgdipole"
SVG_METADATA = {"Date": None}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)


def plot_median_distributions(comparison, path):
    """Box plot of the bootstrap median RMSE per model."""
    models = list(comparison.summaries)
    data = [comparison.summaries[m].median_rmse_samples for m in models]
    fig, ax = plt.subplots(figsize=(1.6 * len(models) + 2.0, 3.5))
    ax.boxplot(data, whis=(2.5, 97.5), showfliers=False)
    ax.set_xticks(range(1, len(models) + 1), models)
    ax.set_ylabel("median held-out RMSE (mV)")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_reconstruction(record, imputed, path, model_label="model", leads=LEADS):
    """Observed signal (solid), held-out truth (dashed) and model imputation."""
    t = np.arange(record.n_samples) / record.sample_rate_hz
    cols = [LEADS.index(name) for name in leads]
    fig, axes = plt.subplots(len(cols), 1, figsize=(10, 1.1 * len(cols) + 0.6),
                             sharex=True, squeeze=False)
    for ax, j in zip(axes[:, 0], cols):
        obs = np.where(record.observed[:, j], record.samples[:, j], np.nan)
        held = np.where(record.held_out[:, j], record.samples[:, j], np.nan)
        fill = np.where(record.observed[:, j], np.nan, imputed[:, j])
        ax.plot(t, obs, color="tab:blue", lw=0.8)
        ax.plot(t, held, color="tab:red", lw=0.9, ls="--")
        ax.plot(t, fill, color="tab:green", lw=0.7, alpha=0.8)
        ax.set_ylabel(LEADS[j], rotation=0, ha="right", va="center")
        ax.tick_params(labelsize=7)
    axes[-1, 0].set_xlabel("time (s)")
    axes[0, 0].set_title(f"{record.record_id}: {model_label}", fontsize=9)
    fig.tight_layout()
    _save(fig, path)
