from .ablation_plotter import plot_ablation
from .gap_plotter import plot_gap_curve
