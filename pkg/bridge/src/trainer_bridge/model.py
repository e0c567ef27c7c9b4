"""Torch model construction from the canonical graph description.

The graph arrives as a JSON object with an ordered node list ({id,
kind, out_channels, spatial}), an edge list, input_shape and
num_classes.  Incoming edges of a node are concatenated channel-wise
in edge-list order.  Every node's output is checked against its
annotated channel count and spatial size during the forward pass.
"""

from __future__ import annotations

import torch
from torch import nn

KINDS = ("input", "conv_unit", "transition", "global_pool", "classifier")


class BridgeError(ValueError):
    """Raised for graphs that cannot be built or executed."""


def _validate(graph: dict) -> tuple[list[dict], list[tuple[int, int]]]:
    try:
        nodes = [dict(id=int(n["id"]), kind=str(n["kind"]),
                      out_channels=int(n["out_channels"]),
                      spatial=(int(n["spatial"][0]), int(n["spatial"][1])))
                 for n in graph["nodes"]]
        edges = [(int(s), int(t)) for s, t in graph["edges"]]
        input_shape = tuple(int(v) for v in graph["input_shape"])
        num_classes = int(graph["num_classes"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise BridgeError(f"malformed graph object: {exc}") from exc
    if len(input_shape) != 3:
        raise BridgeError("input_shape must have 3 entries")
    if num_classes < 1:
        raise BridgeError("num_classes must be >= 1")
    ids = [n["id"] for n in nodes]
    if ids != sorted(set(ids)):
        raise BridgeError("node ids must be unique and ascending")
    known = set(ids)
    for s, t in edges:
        if s not in known or t not in known:
            raise BridgeError(f"edge ({s}, {t}) references unknown node")
        if s >= t:
            raise BridgeError(f"edge ({s}, {t}) is not forward")
    for n in nodes:
        if n["kind"] not in KINDS:
            raise BridgeError(f"node {n['id']}: unknown kind {n['kind']!r}")
    return nodes, edges


class GraphNet(nn.Module):
    """Executable form of a canonical graph description."""

    def __init__(self, graph: dict):
        super().__init__()
        nodes, edges = _validate(graph)
        self.nodes = nodes
        self.preds = {n["id"]: [s for s, t in edges if t == n["id"]]
                      for n in nodes}
        by_id = {n["id"]: n for n in nodes}
        self.layers = nn.ModuleDict()
        for n in nodes:
            nid, kind = n["id"], n["kind"]
            cin = sum(by_id[s]["out_channels"] for s in self.preds[nid])
            if kind == "input":
                if self.preds[nid]:
                    raise BridgeError(f"node {nid}: input node has predecessors")
                continue
            if not self.preds[nid]:
                raise BridgeError(f"node {nid}: {kind} node has no inputs")
            if kind == "conv_unit":
                layer = nn.Sequential(
                    nn.BatchNorm2d(cin),
                    nn.ReLU(),
                    nn.Conv2d(cin, n["out_channels"], 3, padding=1, bias=True),
                )
            elif kind == "transition":
                layer = nn.Sequential(
                    nn.Conv2d(cin, n["out_channels"], 3, padding=1, bias=True),
                    nn.AvgPool2d(2, 2),
                )
            elif kind == "global_pool":
                layer = nn.AdaptiveAvgPool2d(1)
            else:  # classifier
                layer = nn.Sequential(
                    nn.Flatten(),
                    nn.Linear(cin, n["out_channels"], bias=True),
                )
            self.layers[str(nid)] = layer

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        outputs: dict[int, torch.Tensor] = {}
        result = None
        for n in self.nodes:
            nid, kind = n["id"], n["kind"]
            if kind == "input":
                out = x
            else:
                parts = [outputs[s] for s in self.preds[nid]]
                out = parts[0] if len(parts) == 1 else torch.cat(parts, dim=1)
                out = self.layers[str(nid)](out)
            if kind == "classifier":
                if out.shape[1] != n["out_channels"]:
                    raise BridgeError(
                        f"node {nid}: classifier produced {out.shape[1]} "
                        f"logits, annotation says {n['out_channels']}")
                result = out
            else:
                expected = (n["out_channels"], *n["spatial"])
                if tuple(out.shape[1:]) != expected:
                    raise BridgeError(
                        f"node {nid}: shape {tuple(out.shape[1:])} does not "
                        f"match annotation {expected}")
                outputs[nid] = out
        if result is None:
            raise BridgeError("graph has no classifier node")
        return result


def build_model(graph: dict) -> GraphNet:
    """Instantiate a trainable model for a canonical graph object."""
    return GraphNet(graph)
