import json

import pytest

from skipnas.genome import ArchGenome, BlockGene, full_conn
from skipnas.netgraph import build_graph, graph_to_dict
from trainer_bridge.data import (DatasetSpec, make_random_labels,
                                 make_separable, save_dataset)
from trainer_bridge.server import Bridge


def one_block_graph(num_classes, spatial=16):
    """All-ones 1-block (L=4, k=8) genome as a canonical graph object."""
    arch = ArchGenome((BlockGene(4, 8),))
    g = build_graph(arch, full_conn(arch), (3, spatial, spatial), num_classes)
    return graph_to_dict(g)


def request_line(graph, request_id, **overrides):
    payload = {"protocol_version": 1, "request_id": request_id,
               "graph": graph, "epochs": 1,
               "lr_candidates": [0.9, 0.1, 0.01], "chosen_lr": 0.01,
               "data_fraction": 1.0, "seed": 0,
               "dataset": {"name": "t", "path": "", "num_classes": 2}}
    payload.update(overrides)
    return (json.dumps(payload, sort_keys=True) + "\n").encode()


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny")
    images, labels = make_separable(200, 2, seed=5, spatial=8)
    save_dataset(str(path), images, labels)
    return str(path)


@pytest.fixture(scope="session")
def separable_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("separable")
    images, labels = make_separable(2000, 2, seed=5)
    save_dataset(str(path), images, labels)
    return str(path)


@pytest.fixture(scope="session")
def random_labels_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("randomlabels")
    images, labels = make_random_labels(2000, 10, seed=5)
    save_dataset(str(path), images, labels)
    return str(path)


@pytest.fixture
def tiny_bridge(tiny_dataset_dir):
    return Bridge(DatasetSpec("tiny", tiny_dataset_dir, 2))
