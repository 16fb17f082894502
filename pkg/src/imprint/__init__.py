"""Linear classifier heads from embedding vectors, without gradient training.

The pipeline has three stages: per-class proxy generation (seven strategies,
from proxying all samples to k-means cluster centers), normalization at three
slots (before generation, after generation, at inference), and aggregation of
proxy activations into a prediction (max or weighted m-NN). On top of that
sit a variability-collapse metric, a closed-form least-squares reference, a
grid runner, and a rank-based significance pipeline with critical-difference
diagrams.
"""

__version__ = "0.1.0"

from .collapse import CollapseStats, compute_nc1, imbalanced_nc1
from .dataset import (
    EmbeddingSet,
    SyntheticTaskSpec,
    few_shot_sample,
    generate_synthetic,
    load_embeddings,
    remap_labels,
    save_embeddings,
    synthetic_train_test,
)
from .generate import (
    GenStrategy,
    gen_all,
    gen_k_cov_max,
    gen_k_fps,
    gen_k_means,
    gen_k_medoids,
    gen_k_random,
    gen_mean,
    generate_proxies,
    kmeans,
)
from .head import (
    AggMode,
    ClassifierHead,
    ImprintConfig,
    imprint,
    load_head,
    predict_batch,
    predict_m_nn,
    predict_max,
    save_head,
)
from .normalize import l2_normalize, l2_normalize_rows, quantile_normalize
from .oracle import (
    OracleWeights,
    k_least_squares,
    least_squares_weights,
    oracle_predict,
)
from .runner import (
    GridSpec,
    TaskSpec,
    evaluate_config,
    grid_spec_from_json,
    load_grid_spec,
    read_results_csv,
    results_matrix,
    run_grid,
    write_results_csv,
)
from .stats import (
    CDDiagram,
    FriedmanResult,
    RankMatrix,
    build_cd_diagram,
    diagram_summary,
    emit_cd_svg,
    friedman_test,
    holm_correct,
    rank_columns,
    wilcoxon_signed_rank,
)

__all__ = [
    "__version__",
    "AggMode",
    "CDDiagram",
    "ClassifierHead",
    "CollapseStats",
    "EmbeddingSet",
    "FriedmanResult",
    "GenStrategy",
    "GridSpec",
    "ImprintConfig",
    "OracleWeights",
    "RankMatrix",
    "SyntheticTaskSpec",
    "TaskSpec",
    "build_cd_diagram",
    "compute_nc1",
    "diagram_summary",
    "emit_cd_svg",
    "evaluate_config",
    "few_shot_sample",
    "friedman_test",
    "gen_all",
    "gen_k_cov_max",
    "gen_k_fps",
    "gen_k_means",
    "gen_k_medoids",
    "gen_k_random",
    "gen_mean",
    "generate_proxies",
    "generate_synthetic",
    "grid_spec_from_json",
    "holm_correct",
    "imbalanced_nc1",
    "imprint",
    "k_least_squares",
    "kmeans",
    "l2_normalize",
    "l2_normalize_rows",
    "least_squares_weights",
    "load_embeddings",
    "load_grid_spec",
    "load_head",
    "oracle_predict",
    "predict_batch",
    "predict_m_nn",
    "predict_max",
    "quantile_normalize",
    "rank_columns",
    "read_results_csv",
    "remap_labels",
    "results_matrix",
    "run_grid",
    "save_embeddings",
    "save_head",
    "synthetic_train_test",
    "wilcoxon_signed_rank",
    "write_results_csv",
]
