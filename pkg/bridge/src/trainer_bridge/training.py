"""Training and scoring of graph models with Adam.

One call trains a fresh model for a given learning rate and returns
test-part accuracy.  When no learning rate was chosen yet the probe
trains one model per candidate and keeps the best run (ties prefer the
smaller rate), so probing costs exactly one run per candidate.
"""

from __future__ import annotations

import hashlib

import torch
from torch import nn

from .data import LoadedDataset, subsample
from .model import build_model


def _run_seed(seed: int, lr: float) -> int:
    digest = hashlib.sha256(f"train|{seed}|{lr!r}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def train_once(graph: dict, dataset: LoadedDataset, epochs: int, lr: float,
               data_fraction: float, seed: int,
               batch_size: int = 64) -> float:
    """Train a fresh model and return its test-part accuracy."""
    torch.manual_seed(_run_seed(seed, lr))
    model = build_model(graph)
    train_idx = subsample(dataset.train_indices, data_fraction, seed)
    images, labels = dataset.images, dataset.labels
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    order = torch.tensor(train_idx)
    generator = torch.Generator().manual_seed(_run_seed(seed, lr) ^ 1)

    model.train()
    for _ in range(epochs):
        perm = order[torch.randperm(len(order), generator=generator)]
        for start in range(0, len(perm), batch_size):
            batch = perm[start:start + batch_size]
            optimizer.zero_grad()
            logits = model(images[batch])
            loss = loss_fn(logits, labels[batch])
            loss.backward()
            optimizer.step()

    model.eval()
    correct = 0
    test = torch.tensor(dataset.test_indices)
    with torch.no_grad():
        for start in range(0, len(test), batch_size):
            batch = test[start:start + batch_size]
            predicted = model(images[batch]).argmax(dim=1)
            correct += int((predicted == labels[batch]).sum())
    return correct / len(test)


def train_request(graph: dict, dataset: LoadedDataset, epochs: int,
                  lr_candidates: list[float], chosen_lr: float | None,
                  data_fraction: float, seed: int,
                  batch_size: int = 64) -> tuple[float, float, int]:
    """Serve one evaluation.

    Returns (test-part accuracy, chosen lr, number of training runs).
    """
    candidates = [chosen_lr] if chosen_lr is not None else list(lr_candidates)
    if not candidates:
        raise ValueError("no learning-rate candidates and no chosen_lr")
    best_acc, best_lr = None, None
    for lr in candidates:
        acc = train_once(graph, dataset, epochs, float(lr), data_fraction,
                         seed, batch_size)
        if (best_acc is None or acc > best_acc
                or (acc == best_acc and lr < best_lr)):
            best_acc, best_lr = acc, float(lr)
    return best_acc, best_lr, len(candidates)
