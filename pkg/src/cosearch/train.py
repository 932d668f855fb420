"""Training, evaluation and gradient checking for the link model."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .gat import LinkModel, ModelConfig, loss_and_grads, pair_probabilities


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-2
    epochs: int = 300
    neg_ratio: int = 1
    seed: int = 0
    train_fraction: float = 0.8
    weight_decay: float = 0.0
    edge_dropout: float = 0.0

    def validate(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if self.neg_ratio < 1:
            raise ValueError("negative-sample ratio must be ≥ 1")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train/validation split must lie in (0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be ≥ 0")
        if not 0 <= self.edge_dropout < 1:
            raise ValueError("edge dropout must lie in [0, 1)")


@dataclass
class PairSplit:
    names: list
    train_pos: np.ndarray
    train_neg: np.ndarray
    val_pairs: np.ndarray
    val_labels: np.ndarray

    def train_adjacency(self):
        n = len(self.names)
        adj = np.zeros((n, n), dtype=bool)
        if len(self.train_pos):
            adj[self.train_pos[:, 0], self.train_pos[:, 1]] = True
            adj[self.train_pos[:, 1], self.train_pos[:, 0]] = True
        return adj

    def val_triples(self):
        return [(self.names[i], self.names[j], int(y))
                for (i, j), y in zip(self.val_pairs, self.val_labels)]


def _all_pairs(graph):
    names = graph.nodes
    adj = graph.adjacency(names)
    pairs = np.array(list(itertools.combinations(range(len(names)), 2)), dtype=int).reshape(-1, 2)
    labels = adj[pairs[:, 0], pairs[:, 1]].astype(int)
    return names, pairs, labels


def split_pairs(graph, train_fraction, seed):
    """Hold out a random ``1 - train_fraction`` share of all node pairs.

    Message passing during training only sees the training positives.
    """
    names, pairs, labels = _all_pairs(graph)
    if labels.sum() == 0:
        raise TrainingError("no positive edges")
    if labels.sum() == len(labels):
        raise TrainingError("graph has no absent pairs to sample negatives from")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(pairs))
    n_train = int(round(train_fraction * len(pairs)))
    tr, va = perm[:n_train], perm[n_train:]
    tr_pairs, tr_labels = pairs[tr], labels[tr]
    if tr_labels.sum() == 0:
        raise TrainingError("no positive edges in the training split")
    if tr_labels.sum() == len(tr_labels):
        raise TrainingError("no absent pairs in the training split")
    return PairSplit(names, tr_pairs[tr_labels == 1], tr_pairs[tr_labels == 0],
                     pairs[va], labels[va])


def full_split(graph):
    """Every pair goes to training; the validation set is empty."""
    names, pairs, labels = _all_pairs(graph)
    if labels.sum() == 0:
        raise TrainingError("no positive edges")
    if labels.sum() == len(labels):
        raise TrainingError("graph has no absent pairs to sample negatives from")
    empty = np.zeros((0, 2), dtype=int)
    return PairSplit(names, pairs[labels == 1], pairs[labels == 0], empty, np.zeros(0, dtype=int))


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def fit(split, config, model_config=None):
    """Train on a prepared split.

    ``model.history`` receives ``(epoch, loss, batch_accuracy)`` per epoch,
    measured on the forward pass that produced that epoch's gradient.
    """
    config.validate()
    model_config = model_config or ModelConfig(init_seed=config.seed)
    model = LinkModel(model_config, split.names)
    rng = np.random.default_rng(config.seed + 1)
    opt = Adam(model.params, config.lr)
    full_adj = split.train_adjacency()
    pos = split.train_pos
    n_neg = min(len(split.train_neg), config.neg_ratio * len(pos))
    labels = np.concatenate([np.ones(len(pos)), np.zeros(n_neg)])
    for epoch in range(config.epochs):
        neg = split.train_neg[rng.choice(len(split.train_neg), size=n_neg, replace=False)]
        batch = np.concatenate([pos, neg])
        adj = full_adj
        if config.edge_dropout > 0:
            kept = pos[rng.random(len(pos)) >= config.edge_dropout]
            adj = np.zeros_like(full_adj)
            adj[kept[:, 0], kept[:, 1]] = True
            adj[kept[:, 1], kept[:, 0]] = True
        loss, grads, probs = loss_and_grads(model, split.names, adj, batch, labels,
                                            config.weight_decay, return_probs=True)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise TrainingError(f"training diverged at epoch {epoch}: loss={loss}")
        acc = float(np.mean((probs > 0.5) == (labels > 0.5)))
        model.history.append((epoch, loss, acc))
        opt.step(model.params, grads)
    return model


def train(graph, config, model_config=None):
    """Split ``graph``'s pairs, train, and return ``(model, split)``."""
    config.validate()
    split = split_pairs(graph, config.train_fraction, config.seed)
    return fit(split, config, model_config), split


def eval_link_accuracy(model, graph, test_pairs):
    """Fraction of ``(u, v, label)`` pairs where ``p > 0.5`` equals the label.

    Message passing runs over ``graph``; names outside it are added as
    isolated nodes.
    """
    test_pairs = list(test_pairs)
    if not test_pairs:
        raise ValueError("test_pairs must be non-empty")
    names = graph.nodes
    extra = sorted({n for u, v, _ in test_pairs for n in (u, v)} - set(names))
    names = names + extra
    idx = {n: i for i, n in enumerate(names)}
    adj = graph.adjacency(names)
    pairs = np.array([(idx[u], idx[v]) for u, v, _ in test_pairs])
    labels = np.array([int(y) for _, _, y in test_pairs])
    probs = pair_probabilities(model, names, adj, pairs)
    return float(np.mean((probs > 0.5).astype(int) == labels))


def accuracy_from_probs(probs, labels):
    return float(np.mean((np.asarray(probs) > 0.5).astype(int) == np.asarray(labels)))


def validation_accuracy(model, split):
    if len(split.val_pairs) == 0:
        return float("nan")
    probs = pair_probabilities(model, split.names, split.train_adjacency(), split.val_pairs)
    return accuracy_from_probs(probs, split.val_labels)


def training_accuracy(model, split):
    pairs = np.concatenate([split.train_pos, split.train_neg])
    labels = np.concatenate([np.ones(len(split.train_pos)), np.zeros(len(split.train_neg))])
    probs = pair_probabilities(model, split.names, split.train_adjacency(), pairs)
    return accuracy_from_probs(probs, labels)


def gradient_check(model, graph, sample, eps=1e-5, floor=1e-6, grad_fn=None):
    """Largest relative gap between analytic and central-difference gradients.

    ``sample`` is ``(pairs, labels)`` with pairs as node-name tuples of
    ``graph``.  Relative error is ``|a - n| / max(|a|, |n|, floor)``.  The
    floor sits above the round-off of a step-1e-5 difference (about
    1e-11 absolute for a loss near 1), which cannot resolve smaller
    components to 1e-4 relative.
    ``grad_fn(model, names, adj, pairs, labels)`` replaces the analytic
    gradient (used to test the checker itself).
    """
    pairs, labels = sample
    if len(pairs) == 0:
        raise ValueError("sample must be non-empty")
    names = graph.nodes
    idx = {n: i for i, n in enumerate(names)}
    pairs = np.array([(idx[u], idx[v]) for u, v in pairs])
    labels = np.asarray(labels, dtype=float)
    adj = graph.adjacency(names)
    if grad_fn is None:
        _, analytic = loss_and_grads(model, names, adj, pairs, labels)
    else:
        analytic = grad_fn(model, names, adj, pairs, labels)
    worst = 0.0
    for key, param in model.params.items():
        a_grad = analytic[key]
        for i in np.ndindex(param.shape):
            old = param[i]
            param[i] = old + eps
            lp, _ = loss_and_grads(model, names, adj, pairs, labels)
            param[i] = old - eps
            lm, _ = loss_and_grads(model, names, adj, pairs, labels)
            param[i] = old
            num = (lp - lm) / (2 * eps)
            a = a_grad[i]
            rel = abs(a - num) / max(abs(a), abs(num), floor)
            worst = max(worst, rel)
    return worst


def write_loss_csv(model, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "accuracy"])
        for epoch, loss, acc in model.history:
            w.writerow([epoch, repr(float(loss)), repr(float(acc))])
