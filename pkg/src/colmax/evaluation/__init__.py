from .ablation import (
    AblationRow,
    ablation_dataframe,
    ablation_from_published,
    ablation_markdown,
    run_ablation,
    write_ablation_csv,
)
from .metrics import NdcgReport, ndcg_at_k, ndcg_pct, top1_agreement
from .pipelines import Pipeline, run_pipeline
from .synthetic import (
    PlantedStructureConfig,
    SyntheticBenchmark,
    TokenCountDistribution,
    generate_synthetic_benchmark,
)
