"""Graph-attention link model with hand-written backpropagation.

Everything runs in float64 numpy.  Node inputs are hashed character
trigrams of the category name (unit L2 norm) concatenated with a learned
per-category embedding.  A stack of multi-head GAT layers produces node
embeddings; a feed-forward head scores ``h_u * h_v`` and ends in a sigmoid.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = "cosearch-linkmodel"
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


@dataclass
class ModelConfig:
    feature_dim: int = 64
    embed_dim: int = 16
    layers: int = 2
    heads: int = 4
    hidden: int = 32
    predictor_hidden: int = 32
    negative_slope: float = 0.2
    hash_seed: int = 0
    init_seed: int = 0

    @property
    def input_dim(self):
        return self.feature_dim + self.embed_dim

    @property
    def output_dim(self):
        return self.hidden


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def trigram_vector(name, dim, seed=0):
    """Hashed character-trigram counts of ``#name#``, L2-normalised."""
    padded = f"#{name}#"
    key = str(seed).encode()
    vec = np.zeros(dim)
    for i in range(len(padded) - 2):
        digest = hashlib.blake2b(padded[i:i + 3].encode(), digest_size=8, key=key).digest()
        vec[int.from_bytes(digest, "little") % dim] += 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


class LinkModel:
    def __init__(self, config, vocab):
        self.config = config
        self.vocab = list(vocab)
        self._vocab_index = {n: i for i, n in enumerate(self.vocab)}
        self.params = {}
        self.history = []
        self._hash_cache = {}
        self._init_params()

    def _init_params(self):
        c = self.config
        rng = np.random.default_rng(c.init_seed)

        def glorot(*shape, fan_in, fan_out):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-lim, lim, size=shape)

        self.params["embedding"] = rng.normal(0.0, 0.1, size=(len(self.vocab), c.embed_dim))
        in_dim = c.input_dim
        for layer in range(c.layers):
            self.params[f"gat{layer}.W"] = glorot(c.heads, in_dim, c.hidden, fan_in=in_dim, fan_out=c.hidden)
            self.params[f"gat{layer}.a_self"] = glorot(c.heads, c.hidden, fan_in=c.hidden, fan_out=1)
            self.params[f"gat{layer}.a_nbr"] = glorot(c.heads, c.hidden, fan_in=c.hidden, fan_out=1)
            in_dim = c.heads * c.hidden
        d, p = c.output_dim, c.predictor_hidden
        self.params["pred.W1"] = glorot(d, p, fan_in=d, fan_out=p)
        self.params["pred.b1"] = np.zeros(p)
        self.params["pred.w2"] = glorot(p, fan_in=p, fan_out=1)
        self.params["pred.b2"] = np.zeros(())

    def layer_input_dim(self, layer):
        return self.config.input_dim if layer == 0 else self.config.heads * self.config.hidden

    def copy(self):
        m = LinkModel.__new__(LinkModel)
        m.config = self.config
        m.vocab = list(self.vocab)
        m._vocab_index = dict(self._vocab_index)
        m.params = {k: v.copy() for k, v in self.params.items()}
        m.history = list(self.history)
        m._hash_cache = self._hash_cache
        return m

    def hashed(self, name):
        vec = self._hash_cache.get(name)
        if vec is None:
            vec = trigram_vector(name, self.config.feature_dim, self.config.hash_seed)
            self._hash_cache[name] = vec
        return vec

    def embedding_rows(self, names):
        """Vocabulary row per name, -1 for names the model never saw."""
        return np.array([self._vocab_index.get(n, -1) for n in names], dtype=int)

    def num_parameters(self):
        return int(sum(v.size for v in self.params.values()))


def node_features(names, model):
    names = [getattr(n, "name", n) for n in names]
    if not names:
        raise ValueError("ontology must be non-empty")
    hashed = np.stack([model.hashed(n) for n in names])
    rows = model.embedding_rows(names)
    emb = np.zeros((len(names), model.config.embed_dim))
    seen = rows >= 0
    emb[seen] = model.params["embedding"][rows[seen]]
    return np.concatenate([hashed, emb], axis=1)


def _attention_mask(adj):
    mask = np.asarray(adj, dtype=bool).copy()
    np.fill_diagonal(mask, True)
    return mask


def _layer_forward(X, W, a_self, a_nbr, mask, slope, final):
    Z = np.einsum("ni,hid->hnd", X, W)
    f = np.einsum("hnd,hd->hn", Z, a_self)
    g = np.einsum("hnd,hd->hn", Z, a_nbr)
    # S[h, i, j]: logit of node i attending to neighbour j
    S = f[:, :, None] + g[:, None, :]
    E = np.where(S > 0, S, slope * S)
    E = np.where(mask, E, -np.inf)
    E = E - E.max(axis=2, keepdims=True)
    P = np.exp(E)
    P /= P.sum(axis=2, keepdims=True)
    O = P @ Z
    Y = elu(O)
    n = X.shape[0]
    out = Y.mean(axis=0) if final else Y.transpose(1, 0, 2).reshape(n, -1)
    cache = (X, Z, S, P, O, final)
    return out, cache


def _layer_backward(dout, cache, W, a_self, a_nbr, slope):
    X, Z, S, P, O, final = cache
    heads, n, d = Z.shape
    if final:
        dY = np.broadcast_to(dout / heads, (heads, n, d))
    else:
        dY = dout.reshape(n, heads, d).transpose(1, 0, 2)
    dO = dY * elu_grad(O)
    dP = dO @ Z.transpose(0, 2, 1)
    dZ = P.transpose(0, 2, 1) @ dO
    dE = P * (dP - (P * dP).sum(axis=2, keepdims=True))
    dS = dE * np.where(S > 0, 1.0, slope)
    df = dS.sum(axis=2)
    dg = dS.sum(axis=1)
    dZ = dZ + df[:, :, None] * a_self[:, None, :] + dg[:, :, None] * a_nbr[:, None, :]
    grads = {
        "a_self": np.einsum("hn,hnd->hd", df, Z),
        "a_nbr": np.einsum("hn,hnd->hd", dg, Z),
        "W": np.einsum("ni,hnd->hid", X, dZ),
    }
    dX = np.einsum("hnd,hid->ni", dZ, W)
    return dX, grads


def gat_forward(model, adj, X, return_cache=False):
    """Node embeddings for feature rows ``X`` under adjacency ``adj``.

    ``adj`` may also be a RelationGraph, in which case its node order must
    match the rows of ``X``.
    """
    if hasattr(adj, "adjacency"):
        adj = adj.adjacency()
    adj = np.asarray(adj)
    X = np.asarray(X, dtype=float)
    c = model.config
    if X.ndim != 2 or X.shape[1] != c.input_dim:
        raise ShapeError(f"features must be (n, {c.input_dim}), got {X.shape}")
    if adj.shape != (X.shape[0], X.shape[0]):
        raise ShapeError(f"adjacency {adj.shape} does not match {X.shape[0]} feature rows")
    mask = _attention_mask(adj)
    h = X
    caches = []
    for layer in range(c.layers):
        p = model.params
        h, cache = _layer_forward(h, p[f"gat{layer}.W"], p[f"gat{layer}.a_self"],
                                  p[f"gat{layer}.a_nbr"], mask, c.negative_slope,
                                  final=layer == c.layers - 1)
        caches.append(cache)
    if return_cache:
        return h, caches
    return h


def attention_weights(model, adj, X, layer=0):
    """Per-head attention matrices (heads, n, n) of one layer."""
    mask = _attention_mask(np.asarray(adj))
    h = np.asarray(X, dtype=float)
    c = model.config
    for i in range(layer + 1):
        p = model.params
        h, cache = _layer_forward(h, p[f"gat{i}.W"], p[f"gat{i}.a_self"], p[f"gat{i}.a_nbr"],
                                  mask, c.negative_slope, final=i == c.layers - 1)
    return cache[3]


def _predictor_forward(params, Hu, Hv):
    Q = Hu * Hv
    A = Q @ params["pred.W1"] + params["pred.b1"]
    Hd = elu(A)
    logits = Hd @ params["pred.w2"] + params["pred.b2"]
    return logits, (Q, A, Hd)


def predict_link(model, h_u, h_v):
    h_u = np.asarray(h_u, dtype=float)
    h_v = np.asarray(h_v, dtype=float)
    d = model.config.output_dim
    if h_u.shape[-1] != d or h_v.shape[-1] != d or h_u.shape != h_v.shape:
        raise ShapeError(f"embeddings must have final dimension {d}, got {h_u.shape} and {h_v.shape}")
    logits, _ = _predictor_forward(model.params, h_u, h_v)
    return sigmoid(logits)


def encode(model, names, adj):
    X = node_features(names, model)
    return gat_forward(model, adj, X)


def pair_probabilities(model, names, adj, pairs):
    """Probabilities for index pairs ``pairs`` (k, 2) over nodes ``names``."""
    H = encode(model, names, adj)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    return predict_link(model, H[pairs[:, 0]], H[pairs[:, 1]])


def loss_and_grads(model, names, adj, pairs, labels, weight_decay=0.0, return_probs=False):
    """Mean binary cross-entropy over ``pairs`` and its exact gradient.

    ``labels`` may be soft targets in [0, 1].
    """
    p = model.params
    c = model.config
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    labels = np.asarray(labels, dtype=float)
    X = node_features(names, model)
    H, caches = gat_forward(model, adj, X, return_cache=True)
    u, v = pairs[:, 0], pairs[:, 1]
    logits, (Q, A, Hd) = _predictor_forward(p, H[u], H[v])
    b = len(labels)
    loss = float(np.mean(np.logaddexp(0.0, logits) - labels * logits))

    grads = {}
    dlogit = (sigmoid(logits) - labels) / b
    grads["pred.w2"] = Hd.T @ dlogit
    grads["pred.b2"] = np.asarray(dlogit.sum())
    dA = np.outer(dlogit, p["pred.w2"]) * elu_grad(A)
    grads["pred.W1"] = Q.T @ dA
    grads["pred.b1"] = dA.sum(axis=0)
    dQ = dA @ p["pred.W1"].T
    dH = np.zeros_like(H)
    np.add.at(dH, u, dQ * H[v])
    np.add.at(dH, v, dQ * H[u])

    dh = dH
    for layer in reversed(range(c.layers)):
        dh, g = _layer_backward(dh, caches[layer], p[f"gat{layer}.W"], p[f"gat{layer}.a_self"],
                                p[f"gat{layer}.a_nbr"], c.negative_slope)
        for k, val in g.items():
            grads[f"gat{layer}.{k}"] = val

    demb = np.zeros_like(p["embedding"])
    rows = model.embedding_rows(names)
    seen = rows >= 0
    np.add.at(demb, rows[seen], dh[seen, c.feature_dim:])
    grads["embedding"] = demb

    if weight_decay:
        for k, val in p.items():
            if k != "pred.b1" and k != "pred.b2":
                loss += 0.5 * weight_decay * float(np.sum(val * val))
                grads[k] = grads[k] + weight_decay * val
    if return_probs:
        return loss, grads, sigmoid(logits)
    return loss, grads


def save_checkpoint(model, path):
    """Line-based text checkpoint: header, config, vocab, then each
    parameter as ``name shape`` followed by row-major values."""
    lines = [f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}",
             "config " + json.dumps(asdict(model.config), sort_keys=True),
             "vocab " + " ".join(model.vocab)]
    for name, arr in model.params.items():
        lines.append(f"param {name} {' '.join(str(s) for s in arr.shape) or '-'}")
        lines.append(" ".join(repr(float(x)) for x in arr.ravel()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a link-model checkpoint")
    version = lines[0].split()[-1]
    if version != f"v{CHECKPOINT_VERSION}":
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    config = ModelConfig(**json.loads(lines[1].split(" ", 1)[1]))
    vocab = lines[2].split()[1:]
    model = LinkModel.__new__(LinkModel)
    model.config = config
    model.vocab = vocab
    model._vocab_index = {n: i for i, n in enumerate(vocab)}
    model.history = []
    model._hash_cache = {}
    model.params = {}
    i = 3
    while i < len(lines):
        head = lines[i].split()
        if head[0] != "param":
            raise ValueError(f"{path}:{i + 1}: expected parameter header")
        shape = () if head[2] == "-" else tuple(int(s) for s in head[2:])
        values = np.array([float(x) for x in lines[i + 1].split()]) if lines[i + 1] else np.zeros(0)
        model.params[head[1]] = values.reshape(shape)
        i += 2
    return model
