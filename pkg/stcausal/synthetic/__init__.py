from stcausal.synthetic.baselines import (
    RecoveredGraph,
    granger_chi2,
    lasso_granger_graph,
    pairwise_granger_graph,
)
from stcausal.synthetic.benchmark import (
    BenchmarkReport,
    BenchmarkSettings,
    EdgeMetrics,
    PgSettings,
    edge_metrics,
    run_benchmark,
    simplified_pg_graph,
)
from stcausal.synthetic.generator import (
    SyntheticSpec,
    SyntheticSystem,
    TruthEdge,
    TruthGraph,
    export_dataset,
    gen_synthetic,
)

__all__ = [
    "BenchmarkReport",
    "BenchmarkSettings",
    "EdgeMetrics",
    "PgSettings",
    "RecoveredGraph",
    "SyntheticSpec",
    "SyntheticSystem",
    "TruthEdge",
    "TruthGraph",
    "edge_metrics",
    "export_dataset",
    "gen_synthetic",
    "granger_chi2",
    "lasso_granger_graph",
    "pairwise_granger_graph",
    "run_benchmark",
    "simplified_pg_graph",
]
