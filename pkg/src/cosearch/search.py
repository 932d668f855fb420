"""Correlational object search.

The robot knows where the stationary objects are.  Each round it scores
every known, unvisited object against the target with a link predictor,
drives to the best one, sweeps the area, and folds every detection back
into its working relationship graph.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import NEAR_THRESHOLD_M, RelationGraph, ground_truth_graph, label_edge
from .gat import encode, predict_link
from .world import (ACTIONS, MOVE_AHEAD, ROTATE_LEFT, DetectorConfig, RobotState, detect, distance,
                    plan_path, shortest_path_length, step, visible_cells)

DEFAULT_STEP_LIMIT = 400
SCAN_ACTIONS = (ROTATE_LEFT,) * 8
POLICIES = ("gnn", "oracle", "random", "frontier_greedy")


class SearchExhausted(RuntimeError):
    pass


class ConsistencyError(ValueError):
    pass


@dataclass
class SearchState:
    graph: RelationGraph
    known: dict
    parents: dict = field(default_factory=dict)
    visited: list = field(default_factory=list)
    steps: int = 0

    def copy(self):
        return SearchState(self.graph.copy(), dict(self.known), dict(self.parents),
                           list(self.visited), self.steps)


def initial_state(world, exclude=()):
    """Stationary objects (and movables flagged as known) with their
    pairwise relations labelled from the known positions."""
    known = {s.name: s.position for s in world.stationary}
    parents = {}
    for m in world.movable:
        if m.known and m.name not in exclude:
            known[m.name] = m.position
            if m.parent is not None:
                parents[m.name] = m.parent
    state = SearchState(RelationGraph(list(known)), known, parents)
    _relabel(state, list(known))
    return state


def _relabel(state, touched):
    added = []
    names = list(state.known)
    for a in touched:
        for b in names:
            if a == b:
                continue
            rec = state.parents.get(a) == b or state.parents.get(b) == a
            # label-1 edges are never withdrawn by a later, noisier estimate
            if label_edge(state.known[a], state.known[b], rec) and not state.graph.label(a, b):
                state.graph.set_edge(a, b, 1)
                added.append(tuple(sorted((a, b))))
    return added


def update_graph(state, detections):
    """Insert newly seen movables and their Eq.-1-style relations.

    Mutates and returns ``state``; the edges added by this call are left in
    ``state.last_added``.
    """
    touched = []
    for d in detections:
        if d.stationary:
            continue
        state.graph.add_node(d.category)
        state.known[d.category] = tuple(d.position)
        if d.receptacle_of is not None:
            state.parents[d.category] = d.receptacle_of
        touched.append(d.category)
    state.last_added = _relabel(state, touched) if touched else []
    return state


def _candidates(state, target):
    cands = [n for n in state.known if n not in state.visited and n != target]
    if not cands:
        raise SearchExhausted(f"every known object has been searched for {target!r}")
    return cands


class GNNRanker:
    name = "gnn"

    def __init__(self, model):
        self.model = model

    def scores(self, state, target, candidates):
        names = state.graph.nodes
        if target not in names:
            names = names + [target]
        adj = state.graph.adjacency(names)
        H = encode(self.model, names, adj)
        pos = {n: i for i, n in enumerate(names)}
        hc = H[[pos[c] for c in candidates]]
        ht = np.broadcast_to(H[pos[target]], hc.shape)
        return predict_link(self.model, ht, hc)


class OracleRanker:
    name = "oracle"

    def __init__(self, gt_graph):
        self.gt = gt_graph

    def scores(self, state, target, candidates):
        return np.array([float(self.gt.has_node(c) and self.gt.has_node(target) and self.gt.label(target, c))
                         for c in candidates])


def rank_candidates(model_or_ranker, state, target):
    """Known, unvisited objects ordered by link probability with ``target``
    (descending), ties broken by name."""
    ranker = model_or_ranker if hasattr(model_or_ranker, "scores") else GNNRanker(model_or_ranker)
    cands = _candidates(state, target)
    probs = ranker.scores(state, target, cands)
    return sorted(((c, float(p)) for c, p in zip(cands, probs)), key=lambda cp: (-cp[1], cp[0]))


@dataclass
class StepRecord:
    t: int
    action: str | None
    cell: tuple
    heading: int
    blocked: bool
    detections: list
    added: list

    def to_dict(self):
        return {"t": self.t, "action": self.action, "cell": list(self.cell), "heading": self.heading,
                "blocked": self.blocked,
                "detections": [[d.category, d.position[0], d.position[1], d.receptacle_of, d.stationary]
                               for d in self.detections],
                "added": [list(e) for e in self.added]}


@dataclass
class EpisodeResult:
    policy: str
    target: str
    success: bool
    p: int
    l: int | None
    trace: list
    candidates: list
    seed: int | None = None
    reason: str = ""
    final_cell: tuple = None

    @property
    def spl_term(self):
        return spl_term(self)

    def trace_lines(self):
        head = {"policy": self.policy, "target": self.target, "seed": self.seed, "success": self.success,
                "p": self.p, "l": self.l, "candidates": self.candidates, "reason": self.reason}
        return [json.dumps(head, sort_keys=True)] + [json.dumps(r.to_dict(), sort_keys=True) for r in self.trace]


class _Episode:
    def __init__(self, world, limit, detector, state=None, start=None):
        self.world = world
        self.limit = limit
        self.detector = detector
        self.state = state
        self.start = start or world.start
        self.robot = self.start
        self.t = 0
        self.trace = []
        self.target_est = None
        self.observers = []

    @property
    def found(self):
        return self.target_est is not None

    def observe(self, action=None, blocked=False):
        dets = detect(self.world, self.robot, self.detector, tick=self.t)
        added = []
        if self.state is not None:
            update_graph(self.state, dets)
            added = self.state.last_added
            self.state.steps = self.t
        for d in dets:
            if d.category == self.world.target:
                self.target_est = d.position
        for fn in self.observers:
            fn(self.robot)
        self.trace.append(StepRecord(self.t, action, self.robot.cell, self.robot.heading, blocked, dets, added))

    def act(self, action):
        if self.t >= self.limit:
            return False
        self.robot, blocked = step(self.world, self.robot, action)
        self.t += 1
        self.observe(action, blocked)
        return True

    def follow(self, actions, stop_on_target=True):
        """Run ``actions``; returns 'done', 'target' or 'budget'."""
        for a in actions:
            if not self.act(a):
                return "budget"
            if stop_on_target and self.found:
                return "target"
        return "done"

    def approach(self):
        """Drive to within reach of the estimated target position."""
        radius = NEAR_THRESHOLD_M - self.detector.noise * math.sqrt(2.0) - 1e-6
        region = (self.world.cells_within(self.target_est, radius, same_side=True)
                  or self.world.cells_within(self.target_est, radius)
                  or self.world.cells_within(self.target_est))
        if self.robot.cell in region:
            return "done"
        path = plan_path(self.world, self.robot, region)
        if path is None:
            return "unreachable"
        return self.follow(path, stop_on_target=False)

    def result(self, policy, candidates=(), reason=""):
        true_pos = self.world.position(self.world.target)
        success = self.found and distance(self.robot.position, true_pos) < NEAR_THRESHOLD_M
        region = self.world.cells_within(true_pos)
        l = shortest_path_length(self.world, self.start, region) if region else None
        return EpisodeResult(policy, self.world.target, bool(success), self.t, l, self.trace,
                             list(candidates), self.world.seed, reason if not success else "",
                             self.robot.cell)


def correlational_search(world, ranker, limit=DEFAULT_STEP_LIMIT, detector=DetectorConfig(),
                         start=None, state=None):
    """Shared loop of the GNN and oracle policies."""
    state = state if state is not None else initial_state(world, exclude=(world.target,))
    ep = _Episode(world, limit, detector, state, start)
    ep.observe()
    tried = []
    reason = ""
    while not ep.found:
        try:
            ranked = rank_candidates(ranker, state, world.target)
        except SearchExhausted:
            reason = "exhausted"
            break
        cand = ranked[0][0]
        state.visited.append(cand)
        tried.append(cand)
        region = world.cells_within(state.known[cand], same_side=True) or world.cells_within(state.known[cand])
        path = plan_path(world, ep.robot, region)
        if path is None:
            continue
        status = ep.follow(path)
        if status == "done":
            status = ep.follow(SCAN_ACTIONS)
        if status == "budget":
            reason = "step limit"
            break
    if ep.found:
        status = ep.approach()
        if status != "done":
            reason = "step limit" if status == "budget" else "target unreachable"
    return ep.result(ranker.name, tried, reason)


def gnn_search(world, model, limit=DEFAULT_STEP_LIMIT, detector=DetectorConfig(), start=None, state=None):
    return correlational_search(world, GNNRanker(model), limit, detector, start, state)


def _random_walk(world, limit, detector, rng):
    ep = _Episode(world, limit, detector)
    ep.observe()
    while not ep.found and ep.t < limit:
        options = [a for a in ACTIONS if a != MOVE_AHEAD or not step(world, ep.robot, a)[1]]
        ep.act(options[int(rng.integers(len(options)))])
    reason = "step limit"
    if ep.found:
        status = ep.approach()
        reason = "" if status == "done" else "step limit"
    return ep.result("random", (), reason)


def _frontier_greedy(world, limit, detector):
    ep = _Episode(world, limit, detector)
    observed = set()
    ep.observers.append(lambda robot: observed.update(visible_cells(world, robot, detector)))
    ep.observe()
    reachable = world.lattice.reachable_cells(world.start)
    reason = ""
    while not ep.found:
        frontier = [c for c in reachable if c not in observed]
        path = plan_path(world, ep.robot, frontier) if frontier else None
        if path is None:
            reason = "no frontier"
            break
        if not path:
            observed.add(ep.robot.cell)
            continue
        if ep.follow(path) == "budget":
            reason = "step limit"
            break
    if ep.found:
        status = ep.approach()
        if status != "done":
            reason = "step limit" if status == "budget" else "target unreachable"
    return ep.result("frontier_greedy", (), reason)


def baseline_search(world, policy, limit=DEFAULT_STEP_LIMIT, detector=DetectorConfig(), seed=None,
                    gt_graph=None):
    if policy == "random":
        s = world.seed if seed is None else seed
        rng = np.random.default_rng([0 if s is None else s, 7919])
        return _random_walk(world, limit, detector, rng)
    if policy == "frontier_greedy":
        return _frontier_greedy(world, limit, detector)
    if policy == "oracle":
        gt = gt_graph if gt_graph is not None else ground_truth_graph(world)
        return correlational_search(world, OracleRanker(gt), limit, detector)
    raise ValueError(f"unknown policy {policy!r}; expected one of {', '.join(POLICIES)}")


def run_policy(world, policy, model=None, limit=DEFAULT_STEP_LIMIT, detector=DetectorConfig()):
    if policy == "gnn":
        if model is None:
            raise ValueError("the gnn policy needs a trained model")
        return gnn_search(world, model, limit, detector)
    return baseline_search(world, policy, limit, detector)


# metrics ---------------------------------------------------------------------

def success_rate(results):
    results = list(results)
    if not results:
        raise ValueError("success rate of an empty result list")
    return sum(bool(r.success) for r in results) / len(results)


def spl_term(r):
    if not r.success:
        return 0.0
    if r.l is None:
        raise ConsistencyError(f"successful episode ({r.policy}, {r.target}) has an unreachable shortest path")
    if r.l < 1 or r.p < 1:
        raise ConsistencyError(f"successful episode needs p >= 1 and l >= 1, got p={r.p}, l={r.l}")
    return r.l / max(r.p, r.l)


def spl(results):
    results = list(results)
    if not results:
        raise ValueError("SPL of an empty result list")
    return sum(spl_term(r) for r in results) / len(results)


def check_update_fidelity(result, world, radius=NEAR_THRESHOLD_M):
    """Replay a trace and list every step where a movable seen within
    ``radius`` (estimated) of a known object lacks that edge in the
    cumulative working graph.  Empty list means the trace is faithful."""
    known = {s.name: s.position for s in world.stationary}
    known.update({m.name: m.position for m in world.movable if m.known and m.name != result.target})
    edges = set()
    pending = []
    problems = []
    for rec in result.trace:
        edges.update(tuple(e) for e in rec.added)
        for d in rec.detections:
            if not d.stationary:
                known[d.category] = tuple(d.position)
        for d in rec.detections:
            if d.stationary:
                continue
            for name, pos in known.items():
                if name != d.category and distance(known[d.category], pos) < radius:
                    pending.append(tuple(sorted((d.category, name))))
        missing = [e for e in pending if e not in edges]
        problems.extend((rec.t, e) for e in missing)
    return problems
