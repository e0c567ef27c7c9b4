"""Expansion of genome pairs into an explicit computation graph.

Nodes carry resolved channel counts and spatial sizes so that trainers
and parameter estimates never have to re-derive shapes.  All incoming
edges of a conv unit are concatenated channel-wise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .genome import ArchGenome, ConnGenome, conn_edges, conn_offsets

KINDS = ("input", "conv_unit", "transition", "global_pool", "classifier")


class GraphError(ValueError):
    """Raised for inconsistent genome pairs or malformed graph text."""


@dataclass(frozen=True)
class GraphNode:
    id: int
    kind: str
    out_channels: int
    spatial: tuple[int, int]


@dataclass(frozen=True)
class NetworkGraph:
    nodes: tuple[GraphNode, ...]
    edges: tuple[tuple[int, int], ...]
    input_shape: tuple[int, int, int]
    num_classes: int

    def predecessors(self, node_id: int) -> list[int]:
        return [s for s, t in self.edges if t == node_id]

    def in_channels(self, node_id: int) -> int:
        """Concatenated channel count of all incoming edges."""
        by_id = {n.id: n for n in self.nodes}
        return sum(by_id[s].out_channels for s in self.predecessors(node_id))


def build_graph(arch: ArchGenome, conn: ConnGenome,
                input_shape: tuple[int, int, int] = (3, 32, 32),
                num_classes: int = 10) -> NetworkGraph:
    """Expand a genome pair into a NetworkGraph.

    Within a block, node 0 is the block input and conv unit j receives
    its predecessor j-1 plus every source i whose skip bit (i, j) is
    set.  The block output is the output of its last conv unit; a
    transition (conv to half channels + 2x2/2 pool) follows every block
    except the last, which feeds global pooling and the classifier.
    """
    if conn.block_offsets != conn_offsets(arch):
        raise GraphError("connection genome does not match architecture")
    c, h, w = input_shape
    if c < 1 or h < 1 or w < 1 or num_classes < 1:
        raise GraphError("invalid input shape or class count")

    nodes: list[GraphNode] = [GraphNode(0, "input", c, (h, w))]
    edges: list[tuple[int, int]] = []
    prev_id = 0

    for bi, block in enumerate(arch.blocks):
        L = block.num_layers
        seg = conn.block_bits(bi)
        active = {e for e, bit in zip(conn_edges(L), seg) if bit}
        # block-local node index -> graph node id (0 = block input)
        local = {0: prev_id}
        for j in range(1, L + 1):
            nid = len(nodes)
            nodes.append(GraphNode(nid, "conv_unit", block.growth_rate, (h, w)))
            edges.append((local[j - 1], nid))
            for i in range(j - 1):
                if (i, j) in active:
                    edges.append((local[i], nid))
            local[j] = nid
        prev_id = local[L]
        if bi < len(arch.blocks) - 1:
            if min(h, w) < 2:
                raise GraphError(f"spatial size {h}x{w} too small before transition {bi}")
            if block.growth_rate < 2:
                raise GraphError(f"block {bi} too narrow to halve at the transition")
            nid = len(nodes)
            h, w = h // 2, w // 2
            nodes.append(GraphNode(nid, "transition",
                                   block.growth_rate // 2, (h, w)))
            edges.append((prev_id, nid))
            prev_id = nid

    pool_id = len(nodes)
    nodes.append(GraphNode(pool_id, "global_pool", nodes[prev_id].out_channels, (1, 1)))
    edges.append((prev_id, pool_id))
    cls_id = len(nodes)
    nodes.append(GraphNode(cls_id, "classifier", num_classes, (1, 1)))
    edges.append((pool_id, cls_id))

    return NetworkGraph(tuple(nodes), tuple(edges), (c, input_shape[1], input_shape[2]),
                        num_classes)


def param_count(graph: NetworkGraph) -> int:
    """Trainable parameter estimate.

    Conv-type nodes cost in*out*9 + out (3x3 kernel + bias); conv units
    additionally carry 2*in batch-norm parameters; the classifier is a
    single linear layer over the pooled features.
    """
    total = 0
    for node in graph.nodes:
        if node.kind in ("conv_unit", "transition"):
            cin = graph.in_channels(node.id)
            total += cin * node.out_channels * 9 + node.out_channels
            if node.kind == "conv_unit":
                total += 2 * cin
        elif node.kind == "classifier":
            cin = graph.in_channels(node.id)
            total += cin * graph.num_classes + graph.num_classes
    return total


def graph_to_dict(graph: NetworkGraph) -> dict:
    return {
        "nodes": [{"id": n.id, "kind": n.kind, "out_channels": n.out_channels,
                   "spatial": list(n.spatial)} for n in graph.nodes],
        "edges": [list(e) for e in graph.edges],
        "input_shape": list(graph.input_shape),
        "num_classes": graph.num_classes,
    }


def graph_from_dict(data: dict) -> NetworkGraph:
    try:
        nodes = tuple(GraphNode(int(n["id"]), str(n["kind"]),
                                int(n["out_channels"]),
                                (int(n["spatial"][0]), int(n["spatial"][1])))
                      for n in data["nodes"])
        edges = tuple((int(s), int(t)) for s, t in data["edges"])
        input_shape = tuple(int(v) for v in data["input_shape"])
        num_classes = int(data["num_classes"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise GraphError(f"malformed graph object: {exc}") from exc
    for n in nodes:
        if n.kind not in KINDS:
            raise GraphError(f"unknown node kind {n.kind!r}")
    if len(input_shape) != 3:
        raise GraphError("input_shape must have 3 entries")
    return NetworkGraph(nodes, edges, input_shape, num_classes)


def export_graph(graph: NetworkGraph, format: str = "canonical-text") -> bytes:
    """Serialize a graph as canonical JSON or Graphviz DOT."""
    if format == "canonical-text":
        return json.dumps(graph_to_dict(graph), sort_keys=True,
                          separators=(",", ":")).encode()
    if format == "dot":
        lines = ["digraph network {"]
        for n in graph.nodes:
            label = f"{n.kind}\\nch={n.out_channels} {n.spatial[0]}x{n.spatial[1]}"
            lines.append(f'  n{n.id} [label="{label}", kind="{n.kind}"];')
        for s, t in graph.edges:
            lines.append(f"  n{s} -> n{t};")
        lines.append("}")
        return ("\n".join(lines) + "\n").encode()
    raise GraphError(f"unknown export format {format!r}")


def parse_graph(text: bytes | str) -> NetworkGraph:
    """Inverse of the canonical-text export."""
    if isinstance(text, bytes):
        text = text.decode()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid graph JSON: {exc}") from exc
    return graph_from_dict(data)
