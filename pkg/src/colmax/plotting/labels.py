# PLOT FILE NAMES
GAP_CURVE_PLOT = "gap_curve.png"
ABLATION_PLOT = "ablation.png"

# PLOT AXES LABELS
K_LABEL = "Number of clusters $k$"
LOG_W_LABEL = r"$\log W_k$"
GAP_LABEL = r"Gap$(k)$"
STORAGE_PCT_LABEL = "% storage"
NDCG_PCT_LABEL = "% NDCG@10"
