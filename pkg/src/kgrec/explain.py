"""Attention-weighted user-to-item paths that justify a recommendation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .graph import INTERACTED, SELF, UnifiedGraph
from .ingest import IdMaps
from .model import LayerState


@dataclass(frozen=True)
class ExplanationPath:
    nodes: tuple[int, ...]
    relations: tuple[int, ...]
    weights: tuple[float, ...]
    score: float

    def sort_key(self):
        return (-self.score, self.nodes, self.relations)


def layer_weights(state: LayerState) -> list[np.ndarray]:
    """Per-edge attention weights of each aggregation layer, first layer first."""
    return [c.alpha for c in state.caches]


def extract_paths(
    graph: UnifiedGraph,
    state: LayerState,
    user: int,
    item: int,
    max_paths: int = 5,
    beam_width: int = 32,
) -> list[ExplanationPath]:
    """Beam search for simple paths from ``user`` to ``item``.

    Hop ``h`` follows the edge weights of aggregation layer ``h`` (which were
    computed from layer ``h-1`` representations). Partial paths are ranked by
    the running product of weights and cut to ``beam_width`` after each hop.
    Self-loops are never traversed. ``graph`` must be the adjacency that
    produced ``state``; ``user`` and ``item`` are user/item indices.
    """
    if beam_width < max_paths:
        raise ValueError("beam_width must be >= max_paths")
    src = graph.user_node(user)
    dst = graph.item_node(item)
    weights = layer_weights(state)
    self_rel = graph.self_relation
    offsets, nbrs, rels = graph.offsets, graph.neighbors, graph.relations

    beam = [ExplanationPath((src,), (), (), 1.0)]
    done: list[ExplanationPath] = []
    for alpha in weights:
        grown = []
        for path in beam:
            tail = path.nodes[-1]
            for e in range(offsets[tail], offsets[tail + 1]):
                j, r = int(nbrs[e]), int(rels[e])
                if r == self_rel or j in path.nodes:
                    continue
                w = float(alpha[e])
                nxt = ExplanationPath(
                    path.nodes + (j,), path.relations + (r,), path.weights + (w,), path.score * w
                )
                (done if j == dst else grown).append(nxt)
        grown.sort(key=ExplanationPath.sort_key)
        beam = grown[:beam_width]
        if not beam:
            break
    done.sort(key=ExplanationPath.sort_key)
    return done[:max_paths]


def node_key(graph: UnifiedGraph, idmaps: IdMaps, node: int) -> str:
    role = graph.role(node)
    if role == "user":
        return idmaps.user_keys()[node]
    if role == "item":
        return idmaps.item_keys()[node - graph.item_offset]
    return idmaps.aux_keys()[node - graph.aux_offset]


def relation_name(graph: UnifiedGraph, idmaps: IdMaps, rel: int) -> str:
    if rel == graph.interacted_relation:
        return INTERACTED
    if rel == graph.self_relation:
        return SELF
    keys = idmaps.relation_keys()
    if not 0 <= rel < len(keys):
        raise IndexError(f"unknown relation index {rel}")
    return keys[rel]


def render_explanation(paths: list[ExplanationPath], idmaps: IdMaps, graph: UnifiedGraph) -> str:
    if not paths:
        return "no explanation paths found\n"
    lines = []
    for path in paths:
        parts = [node_key(graph, idmaps, path.nodes[0])]
        for r, n in zip(path.relations, path.nodes[1:]):
            parts.append(f"-[{relation_name(graph, idmaps, r)}]-> {node_key(graph, idmaps, n)}")
        lines.append(" ".join(parts) + f" (score={path.score:.4f})")
    return "\n".join(lines) + "\n"


def paths_to_csv(paths: list[ExplanationPath], idmaps: IdMaps, graph: UnifiedGraph) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "path", "score"])
    for rank, path in enumerate(paths, start=1):
        text = render_explanation([path], idmaps, graph).strip()
        w.writerow([rank, text.rsplit(" (score=", 1)[0], f"{path.score:.6f}"])
    return buf.getvalue()
