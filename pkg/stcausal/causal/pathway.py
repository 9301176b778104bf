"""
Multi-hop causal pathways assembled from the trained models of several targets.
"""
import logging
from collections import deque
from typing import Dict, List, Mapping

from pydantic import Field, NonNegativeInt, PositiveInt, confloat

from stcausal.causal.em import CausalModel
from stcausal.common_structures import ResultsConfig, SeriesKey
from stcausal.exceptions import MissingModelError

logger = logging.getLogger(__name__)


class PathwayNode(ResultsConfig):
    sensor_id: str
    category: PositiveInt
    hop: NonNegativeInt = Field(..., description="The hops from the root.")

    @property
    def key(self) -> SeriesKey:
        return SeriesKey(self.category, self.sensor_id)


class PathwayEdge(ResultsConfig):
    cause: str = Field(..., description="The label of the cause series.")
    effect: str = Field(..., description="The label of the effect series.")
    cluster: NonNegativeInt = Field(
        ..., description="The cluster of the effect's model the edge belongs to."
    )
    weight: confloat(ge=0, le=1) = Field(..., description="The weight of that cluster.")
    hop: PositiveInt = Field(..., description="The hop depth of the edge.")


class PathwayGraph(ResultsConfig):
    """
    The causes of a root series expanded hop by hop, every edge points from cause to effect.
    """

    root: str = Field(..., description="The label of the root series.")
    max_hops: PositiveInt = Field(..., description="The expansion depth bound.")
    nodes: List[PathwayNode] = Field(default_factory=list)
    edges: List[PathwayEdge] = Field(default_factory=list)

    def to_document(self) -> Dict:
        return {
            "root": self.root,
            "max_hops": self.max_hops,
            "nodes": [
                {
                    "label": n.key.label(),
                    "sensor": n.sensor_id,
                    "category": n.category,
                    "hop": n.hop,
                }
                for n in self.nodes
            ],
            "edges": [edge.dict() for edge in self.edges],
        }

    def to_dot(self) -> str:
        """Render the graph in the DOT language, edges are labelled with the cluster weight."""
        lines = ["digraph pathway {", "  rankdir=LR;"]
        for node in self.nodes:
            shape = "doublecircle" if node.hop == 0 else "ellipse"
            lines.append(f'  "{node.key.label()}" [shape={shape}];')
        for edge in self.edges:
            lines.append(
                f'  "{edge.cause}" -> "{edge.effect}" '
                f'[label="k{edge.cluster} {100 * edge.weight:.1f}%"];'
            )
        lines.append("}")
        return "\n".join(lines) + "\n"


def expand_pathway(
    models: Mapping[SeriesKey, CausalModel], root: SeriesKey, max_hops: int = 3
) -> PathwayGraph:
    """
    Expand the causes of ``root`` breadth first.

    A node is expanded when its model predicts no worse than the local-only model on the
    validation windows; each neighbour of each cluster becomes an edge weighted by that
    cluster's weight. Every node is expanded at most once and nothing beyond ``max_hops``
    hops is added.

    Raises:
        MissingModelError: If a node which has to be expanded has no model.
    """
    nodes = {root: PathwayNode(sensor_id=root.sensor_id, category=root.category, hop=0)}
    edges: List[PathwayEdge] = []
    queue = deque([root])

    while queue:
        key = queue.popleft()
        hop = nodes[key].hop
        if key not in models:
            raise MissingModelError(f"there is no trained model for {key.label()}.")
        model = models[key]
        if (
            model.validation_accuracy is not None
            and model.local_validation_accuracy is not None
            and model.local_validation_accuracy > model.validation_accuracy
        ):
            logger.info(
                f"{key.label()}: the local history predicts best, stopping here."
            )
            continue
        for k, cluster in enumerate(model.clusters):
            for neighbor in cluster.parents.neighbors:
                cause = neighbor.key
                edges.append(
                    PathwayEdge(
                        cause=cause.label(),
                        effect=key.label(),
                        cluster=k,
                        weight=min(max(float(model.cluster_weights[k]), 0.0), 1.0),
                        hop=hop + 1,
                    )
                )
                if cause not in nodes:
                    nodes[cause] = PathwayNode(
                        sensor_id=cause.sensor_id, category=cause.category, hop=hop + 1
                    )
                    if hop + 1 < max_hops:
                        queue.append(cause)

    return PathwayGraph(
        root=root.label(),
        max_hops=max_hops,
        nodes=sorted(nodes.values(), key=lambda n: (n.hop, n.key.label())),
        edges=edges,
    )
