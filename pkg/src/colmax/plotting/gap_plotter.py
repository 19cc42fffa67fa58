import logging

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from ..curation.clustering import GapCurve
from ..logger import LOGGER_NAME
from .labels import GAP_LABEL, K_LABEL, LOG_W_LABEL

logger = logging.getLogger(LOGGER_NAME)


def plot_gap_curve(curve: GapCurve, fname: str = None):
    """log W_k (left) and Gap(k) with ±s_k error bars (right).

    The chosen k is marked on both panels.
    """
    fig, axs = plt.subplots(1, 2, figsize=(8, 3.5))
    ks = np.array(curve.ks)
    log_w = np.log(np.maximum(curve.within_dispersion, np.finfo(float).tiny))
    axs[0].plot(ks, log_w, "o-", color="k")
    axs[0].set_ylabel(LOG_W_LABEL)
    axs[1].errorbar(ks, curve.gap, yerr=curve.sd, fmt="o-", color="tab:blue")
    axs[1].set_ylabel(GAP_LABEL)
    for ax in axs:
        ax.axvline(curve.chosen_k, color="tab:orange", ls="--", zorder=-1)
        ax.set_xlabel(K_LABEL)
        ax.set_xticks(ks)
    axs[1].set_title(f"chosen k = {curve.chosen_k}", fontsize="small")
    fig.tight_layout()
    if fname:
        fig.savefig(fname)
        logger.info(f"Saved {fname}")
        plt.close(fig)
    return fig, axs
