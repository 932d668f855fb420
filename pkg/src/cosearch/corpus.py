"""Relationship-triple corpora and object co-occurrence graphs.

Corpus files hold one tab-separated record per line::

    subject<TAB>predicate<TAB>object<TAB>count

Lines starting with ``#`` and blank lines are skipped.  Ontology files hold
one category name per line with an optional second column giving the
category kind (``stationary``, ``receptacle`` or ``movable``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EDGE_COUNT_THRESHOLD = 3
NEAR_THRESHOLD_M = 1.0

KINDS = ("stationary", "receptacle", "movable")


class CorpusError(ValueError):
    pass


class UnknownCategoryError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown category"


@dataclass(frozen=True)
class CategoryId:
    name: str
    index: int


def _check_name(name):
    if not name or not name.isascii() or any(ch.isspace() for ch in name):
        raise CorpusError(f"invalid category name {name!r}")
    if name != name.lower():
        raise CorpusError(f"category names must be lowercase: {name!r}")


class Ontology:
    """Ordered set of category names with dense indices and kinds."""

    def __init__(self, names=(), kinds=None):
        self._names = []
        self._index = {}
        self._kinds = {}
        kinds = kinds or {}
        for name in names:
            self.add(name, kinds.get(name, "movable"))

    def add(self, name, kind="movable"):
        if name in self._index:
            return self.category(name)
        _check_name(name)
        if kind not in KINDS:
            raise CorpusError(f"unknown category kind {kind!r} for {name!r}")
        self._index[name] = len(self._names)
        self._names.append(name)
        self._kinds[name] = kind
        return CategoryId(name, self._index[name])

    def category(self, name):
        try:
            return CategoryId(name, self._index[name])
        except KeyError:
            raise UnknownCategoryError(f"unknown category {name!r}") from None

    def index(self, name):
        return self.category(name).index

    def kind(self, name):
        return self._kinds[self.category(name).name]

    def is_stationary(self, name):
        return self.kind(name) in ("stationary", "receptacle")

    def is_receptacle(self, name):
        return self.kind(name) == "receptacle"

    @property
    def names(self):
        return list(self._names)

    def categories(self):
        return [CategoryId(n, i) for i, n in enumerate(self._names)]

    def of_kind(self, *kinds):
        return [n for n in self._names if self._kinds[n] in kinds]

    def __contains__(self, name):
        return name in self._index

    def __len__(self):
        return len(self._names)

    def __iter__(self):
        return iter(self._names)


def load_ontology(path):
    path = Path(path)
    names, kinds = [], {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) > 2:
            raise CorpusError(f"{path}:{lineno}: expected 'name [kind]'")
        names.append(fields[0])
        if len(fields) == 2:
            kinds[fields[0]] = fields[1]
    try:
        return Ontology(names, kinds)
    except CorpusError as exc:
        raise CorpusError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class RelationTriple:
    subject: str
    predicate: str
    object: str
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise CorpusError("count must be ≥ 1")
        if self.subject == self.object:
            raise CorpusError(f"self relation on {self.subject!r}")


def parse_triple(line):
    fields = line.split("\t")
    if len(fields) != 4:
        raise CorpusError(f"expected 4 tab-separated fields, got {len(fields)}")
    subject, predicate, obj, count = (f.strip() for f in fields)
    try:
        count = int(count)
    except ValueError:
        raise CorpusError(f"count is not an integer: {count!r}") from None
    for name in (subject, obj):
        _check_name(name)
    if not predicate:
        raise CorpusError("empty predicate")
    return RelationTriple(subject, predicate, obj, count)


def load_corpus(path, ontology=None):
    """Read triples in file order.

    When ``ontology`` is given, categories it does not know yet are appended
    to it (as movables).
    """
    triples = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\n\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            triple = parse_triple(line)
        except CorpusError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None
        triples.append(triple)
        if ontology is not None:
            ontology.add(triple.subject)
            ontology.add(triple.object)
    return triples


def _key(u, v):
    return (u, v) if u < v else (v, u)


class RelationGraph:
    """Undirected category graph; only label-1 edges are stored.

    Absent pairs read as label 0.  ``count`` keeps the aggregate
    occurrence count (or 1 for geometrically labelled edges).
    """

    def __init__(self, nodes=()):
        self._nodes = []
        self._node_set = set()
        self._edges = {}
        for n in nodes:
            self.add_node(n)

    def add_node(self, name):
        if name not in self._node_set:
            self._node_set.add(name)
            self._nodes.append(name)

    @property
    def nodes(self):
        return list(self._nodes)

    def has_node(self, name):
        return name in self._node_set

    def set_edge(self, u, v, count=1):
        if u == v:
            raise ValueError(f"self-loop on {u!r}")
        for n in (u, v):
            if n not in self._node_set:
                raise UnknownCategoryError(f"unknown category {n!r}")
        self._edges[_key(u, v)] = count

    def remove_edge(self, u, v):
        self._edges.pop(_key(u, v), None)

    def label(self, u, v):
        return int(_key(u, v) in self._edges)

    def count(self, u, v):
        return self._edges.get(_key(u, v), 0)

    def edges(self):
        """Sorted list of (u, v, count) with u < v."""
        return [(u, v, c) for (u, v), c in sorted(self._edges.items())]

    def edge_set(self):
        return set(self._edges)

    def neighbors(self, name):
        out = []
        for u, v in self._edges:
            if u == name:
                out.append(v)
            elif v == name:
                out.append(u)
        return sorted(out)

    def num_edges(self):
        return len(self._edges)

    def adjacency(self, order=None):
        """Boolean adjacency matrix over ``order`` (defaults to node order).

        Names in ``order`` missing from the graph get empty rows.
        """
        order = self._nodes if order is None else list(order)
        pos = {n: i for i, n in enumerate(order)}
        adj = np.zeros((len(order), len(order)), dtype=bool)
        for u, v in self._edges:
            if u in pos and v in pos:
                adj[pos[u], pos[v]] = adj[pos[v], pos[u]] = True
        return adj

    def copy(self):
        g = RelationGraph(self._nodes)
        g._edges = dict(self._edges)
        return g

    def subgraph(self, names):
        keep = [n for n in self._nodes if n in set(names)]
        g = RelationGraph(keep)
        ks = set(keep)
        g._edges = {k: c for k, c in self._edges.items() if k[0] in ks and k[1] in ks}
        return g

    def __eq__(self, other):
        if not isinstance(other, RelationGraph):
            return NotImplemented
        return set(self._nodes) == set(other._nodes) and set(self._edges) == set(other._edges)

    def __repr__(self):
        return f"RelationGraph({len(self._nodes)} nodes, {len(self._edges)} edges)"

    def export_lines(self):
        return [f"{u}\t{v}\t1\t{c}" for u, v, c in self.edges()]


def save_graph(graph, path):
    lines = ["# u\tv\tlabel\tcount"] + [f"#node\t{n}" for n in graph.nodes] + graph.export_lines()
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_graph(path):
    g = RelationGraph()
    pending = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if raw.startswith("#node\t"):
            g.add_node(raw.split("\t", 1)[1].strip())
            continue
        if not raw.strip() or raw.startswith("#"):
            continue
        fields = raw.split("\t")
        if len(fields) != 4:
            raise CorpusError(f"line {lineno}: expected 'u v label count'")
        u, v, label, count = fields
        pending.append((u, v, int(label), int(count)))
    for u, v, label, count in pending:
        g.add_node(u)
        g.add_node(v)
        if label == 1:
            g.set_edge(u, v, count)
    return g


def pair_counts(triples):
    """Sum counts over predicates and both orderings, keyed by sorted pair."""
    totals = {}
    for t in triples:
        k = _key(t.subject, t.object)
        totals[k] = totals.get(k, 0) + t.count
    return totals


def build_graph(triples, ontology, threshold=EDGE_COUNT_THRESHOLD):
    names = ontology.names if isinstance(ontology, Ontology) else [
        c.name if isinstance(c, CategoryId) else c for c in ontology]
    known = set(names)
    for t in triples:
        for n in (t.subject, t.object):
            if n not in known:
                raise UnknownCategoryError(f"unknown category {n!r} in triple {t}")
    g = RelationGraph(names)
    for (u, v), total in sorted(pair_counts(triples).items()):
        if total > threshold:
            g.set_edge(u, v, total)
    return g


def label_edge(pos_i, pos_j, receptacle, threshold=NEAR_THRESHOLD_M):
    if receptacle:
        return 1
    d = math.hypot(pos_i[0] - pos_j[0], pos_i[1] - pos_j[1])
    return 1 if d < threshold else 0


def ground_truth_graph(world):
    """Label every object pair of a placed world with ``label_edge``."""
    objects = world.objects()
    g = RelationGraph([o.name for o in objects])
    for i, a in enumerate(objects):
        for b in objects[i + 1:]:
            rec = a.parent == b.name or b.parent == a.name
            if label_edge(a.position, b.position, rec):
                g.set_edge(a.name, b.name, 1)
    return g
