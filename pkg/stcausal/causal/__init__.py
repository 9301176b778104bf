from stcausal.causal.design import (
    DesignRows,
    Neighbor,
    ParentSpec,
    Slot,
    build_design_rows,
)
from stcausal.causal.diagnostics import pca_project
from stcausal.causal.em import (
    CausalModel,
    EMSettings,
    GbnCluster,
    e_step,
    em_learn,
    kmeans_init,
    m_step,
)
from stcausal.causal.pathway import (
    PathwayEdge,
    PathwayGraph,
    PathwayNode,
    expand_pathway,
)
from stcausal.causal.refine import (
    accuracy_eval,
    held_out_accuracy,
    predict_1h,
    predict_diff,
    refine,
    structure_reconstruction,
)
from stcausal.causal.regression import (
    RegressionFit,
    chi2_quantile,
    conditional_variance,
    fit_wls,
)
from stcausal.causal.scoring import GCScore, gc_score, init_structure, select_neighbors

__all__ = [
    "CausalModel",
    "DesignRows",
    "EMSettings",
    "GCScore",
    "GbnCluster",
    "Neighbor",
    "ParentSpec",
    "PathwayEdge",
    "PathwayGraph",
    "PathwayNode",
    "RegressionFit",
    "Slot",
    "accuracy_eval",
    "build_design_rows",
    "chi2_quantile",
    "conditional_variance",
    "e_step",
    "em_learn",
    "expand_pathway",
    "fit_wls",
    "gc_score",
    "held_out_accuracy",
    "init_structure",
    "kmeans_init",
    "m_step",
    "pca_project",
    "predict_1h",
    "predict_diff",
    "refine",
    "select_neighbors",
    "structure_reconstruction",
]
