import logging
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from ..evaluation.ablation import AblationRow, ablation_dataframe
from ..logger import LOGGER_NAME
from .labels import NDCG_PCT_LABEL, STORAGE_PCT_LABEL

logger = logging.getLogger(LOGGER_NAME)


def plot_ablation(rows: Sequence[AblationRow], fname: str = None):
    """% NDCG against % storage, one marker per configuration."""
    df = ablation_dataframe(rows)
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    for i, (precision, d) in enumerate(df.groupby("precision", sort=False)):
        ax.scatter(
            d.storage_pct, d.ndcg_pct, color=f"C{i}", label=precision
        )
        for _, r in d.iterrows():
            ax.annotate(
                str(r["dim"]),
                (r.storage_pct, r.ndcg_pct),
                textcoords="offset points",
                xytext=(4, 4),
                fontsize="x-small",
            )
    ax.set_xlabel(STORAGE_PCT_LABEL)
    ax.set_ylabel(NDCG_PCT_LABEL)
    ax.legend(frameon=False, fontsize="small")
    fig.tight_layout()
    if fname:
        fig.savefig(fname)
        logger.info(f"Saved {fname}")
        plt.close(fig)
    return fig, ax
