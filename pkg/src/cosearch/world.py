"""Grid-world households: layout, placement, kinematics and perception.

Cells are 0.25 m squares indexed ``(col, row)``; cell ``(c, r)`` has its
centre at ``((c + .5) * 0.25, (r + .5) * 0.25)`` metres.  Headings are
degrees on a 45 degree lattice, 0 along +x, counter-clockwise positive.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .corpus import NEAR_THRESHOLD_M, label_edge

CELL_SIZE = 0.25
HEADINGS = (0, 45, 90, 135, 180, 225, 270, 315)
DIRECTIONS = {0: (1, 0), 45: (1, 1), 90: (0, 1), 135: (-1, 1),
              180: (-1, 0), 225: (-1, -1), 270: (0, -1), 315: (1, -1)}
MOVE_AHEAD, ROTATE_LEFT, ROTATE_RIGHT = "MoveAhead", "RotateLeft", "RotateRight"
ACTIONS = (MOVE_AHEAD, ROTATE_LEFT, ROTATE_RIGHT)
WORLD_FORMAT = "cosearch-world/1"


class GenerationError(RuntimeError):
    pass


def cell_center(cell):
    return ((cell[0] + 0.5) * CELL_SIZE, (cell[1] + 0.5) * CELL_SIZE)


def distance(p, q):
    return math.hypot(p[0] - q[0], p[1] - q[1])


@dataclass(frozen=True)
class RobotState:
    cell: tuple
    heading: int = 0

    def __post_init__(self):
        if self.heading not in DIRECTIONS:
            raise ValueError(f"heading {self.heading} is not on the 45 degree lattice")
        object.__setattr__(self, "cell", tuple(int(v) for v in self.cell))

    @property
    def position(self):
        return cell_center(self.cell)


@dataclass(frozen=True)
class StationaryObject:
    name: str
    footprint: tuple
    receptacle: bool = False
    parent = None

    def __post_init__(self):
        object.__setattr__(self, "footprint", tuple(sorted(tuple(int(v) for v in c) for c in self.footprint)))
        if not self.footprint:
            raise ValueError(f"{self.name}: empty footprint")

    @property
    def position(self):
        xs = [cell_center(c) for c in self.footprint]
        return (sum(p[0] for p in xs) / len(xs), sum(p[1] for p in xs) / len(xs))

    stationary = True


@dataclass(frozen=True)
class MovableObject:
    name: str
    cell: tuple
    parent: str | None = None
    known: bool = False
    position: tuple = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "cell", tuple(int(v) for v in self.cell))

    stationary = False


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    walls: frozenset
    stationary: tuple
    movable: tuple
    target: str
    start: RobotState
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "walls", frozenset(tuple(c) for c in self.walls))
        parents = {s.name: s for s in self.stationary}
        fixed = []
        for m in self.movable:
            if m.parent is not None:
                if m.parent not in parents:
                    raise ValueError(f"{m.name}: unknown receptacle {m.parent!r}")
                pos = parents[m.parent].position
            else:
                pos = cell_center(m.cell)
            fixed.append(replace(m, position=pos))
        object.__setattr__(self, "movable", tuple(fixed))
        object.__setattr__(self, "stationary", tuple(self.stationary))
        names = [o.name for o in self.objects()]
        if len(set(names)) != len(names):
            raise ValueError("object categories must be unique within a world")
        if sum(m.name == self.target for m in self.movable) != 1:
            raise ValueError(f"target {self.target!r} must appear exactly once among movables")
        for cell in self.occupied_cells():
            if not self.in_bounds(cell):
                raise ValueError(f"cell {cell} out of bounds")
        if not self.is_free(self.start.cell):
            raise ValueError(f"robot start {self.start.cell} is not free")

    # geometry ---------------------------------------------------------
    def in_bounds(self, cell):
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def occupied_cells(self):
        cells = set(self.walls)
        for s in self.stationary:
            cells.update(s.footprint)
        return cells

    @cached_property
    def occupancy(self):
        """Boolean array indexed ``[row, col]``; True means blocked."""
        occ = np.zeros((self.height, self.width), dtype=bool)
        for c, r in self.occupied_cells():
            occ[r, c] = True
        return occ

    @cached_property
    def wall_mask(self):
        mask = np.zeros((self.height, self.width), dtype=bool)
        for c, r in self.walls:
            mask[r, c] = True
        return mask

    @cached_property
    def footprint_owner(self):
        return {cell: s.name for s in self.stationary for cell in s.footprint}

    def is_free(self, cell):
        return self.in_bounds(cell) and not self.occupancy[cell[1], cell[0]]

    def free_cells(self):
        rows, cols = np.nonzero(~self.occupancy)
        return [(int(c), int(r)) for r, c in zip(rows, cols)]

    # objects ------------------------------------------------------------
    def objects(self):
        return list(self.stationary) + list(self.movable)

    @cached_property
    def _by_name(self):
        return {o.name: o for o in self.objects()}

    def get(self, name):
        return self._by_name[name]

    def position(self, name):
        return self._by_name[name].position

    def object_cells(self, name):
        """Cells that belong to an object (its own or its receptacle's footprint)."""
        obj = self._by_name[name]
        if obj.stationary:
            return set(obj.footprint)
        if obj.parent is not None:
            return set(self._by_name[obj.parent].footprint)
        return set()

    def with_target(self, name):
        return replace(self, target=name)

    def with_start(self, robot):
        return replace(self, start=robot)

    def cells_within(self, point, radius=NEAR_THRESHOLD_M, same_side=False):
        """Free cells whose centres lie strictly within ``radius`` of ``point``.

        ``same_side`` drops cells cut off from ``point`` by a wall.
        """
        cells = []
        reach = int(math.ceil(radius / CELL_SIZE)) + 1
        c0, r0 = int(point[0] // CELL_SIZE), int(point[1] // CELL_SIZE)
        for r in range(r0 - reach, r0 + reach + 1):
            for c in range(c0 - reach, c0 + reach + 1):
                if self.is_free((c, r)) and distance(cell_center((c, r)), point) < radius:
                    if same_side and not line_of_sight(self, cell_center((c, r)), point, furniture=False):
                        continue
                    cells.append((c, r))
        return cells

    @cached_property
    def lattice(self):
        return Lattice(self)

    @cached_property
    def _view_cache(self):
        return {}


# kinematics ---------------------------------------------------------------

def step(world, robot, action):
    """Apply one primitive action; returns ``(new_state, blocked)``."""
    if action == ROTATE_LEFT:
        return RobotState(robot.cell, (robot.heading + 45) % 360), False
    if action == ROTATE_RIGHT:
        return RobotState(robot.cell, (robot.heading - 45) % 360), False
    if action != MOVE_AHEAD:
        raise ValueError(f"unknown action {action!r}")
    dc, dr = DIRECTIONS[robot.heading]
    nxt = (robot.cell[0] + dc, robot.cell[1] + dr)
    if not world.is_free(nxt):
        return robot, True
    return RobotState(nxt, robot.heading), False


class Lattice:
    """Breadth-first search over (cell, heading) poses.

    State index is ``(row * width + col) * 8 + heading_index``.  Successors
    are expanded in the order MoveAhead, RotateLeft, RotateRight, which makes
    the returned path canonical among equal-length ones.
    """

    def __init__(self, world):
        self.world = world
        w, h = world.width, world.height
        n = w * h * 8
        self.n = n
        idx = np.arange(n)
        hi = idx % 8
        cell = idx // 8
        col, row = cell % w, cell // w
        dc = np.array([DIRECTIONS[HEADINGS[k]][0] for k in range(8)])
        dr = np.array([DIRECTIONS[HEADINGS[k]][1] for k in range(8)])
        nc, nr = col + dc[hi], row + dr[hi]
        ok = (nc >= 0) & (nc < w) & (nr >= 0) & (nr < h)
        free = ~world.occupancy
        ok[ok] &= free[nr[ok], nc[ok]]
        move = np.where(ok, (nr * w + nc) * 8 + hi, -1)
        left = cell * 8 + (hi + 1) % 8
        right = cell * 8 + (hi - 1) % 8
        self.succ = np.stack([move, left, right], axis=1)
        self.cell_free = free.ravel()

    def state(self, robot):
        c, r = robot.cell
        return (r * self.world.width + c) * 8 + HEADINGS.index(robot.heading)

    def robot(self, s):
        cell, hi = divmod(int(s), 8)
        r, c = divmod(cell, self.world.width)
        return RobotState((c, r), HEADINGS[hi])

    def _goal_mask(self, goal_cells):
        mask = np.zeros(self.n // 8, dtype=bool)
        for c, r in goal_cells:
            if 0 <= c < self.world.width and 0 <= r < self.world.height:
                mask[r * self.world.width + c] = True
        return mask

    def search(self, start, goal_cells):
        """Return ``(goal_state, parent, action)`` arrays or None."""
        goal = self._goal_mask(goal_cells)
        s0 = self.state(start)
        parent = np.full(self.n, -1, dtype=np.int64)
        action = np.full(self.n, -1, dtype=np.int8)
        seen = np.zeros(self.n, dtype=bool)
        seen[s0] = True
        if goal[s0 // 8]:
            return s0, parent, action
        frontier = np.array([s0], dtype=np.int64)
        while frontier.size:
            nb = self.succ[frontier]                      # (k, 3) in action order
            flat = nb.ravel()
            par = np.repeat(frontier, 3)
            act = np.tile(np.arange(3, dtype=np.int8), frontier.size)
            keep = flat >= 0
            flat, par, act = flat[keep], par[keep], act[keep]
            keep = ~seen[flat]
            flat, par, act = flat[keep], par[keep], act[keep]
            if not flat.size:
                return None
            # first discovery wins, preserving FIFO order
            uniq, first = np.unique(flat, return_index=True)
            order = np.sort(first)
            flat, par, act = flat[order], par[order], act[order]
            seen[flat] = True
            parent[flat] = par
            action[flat] = act
            hits = np.nonzero(goal[flat // 8])[0]
            if hits.size:
                return int(flat[hits[0]]), parent, action
            frontier = flat
        return None

    def path(self, start, goal_cells):
        found = self.search(start, goal_cells)
        if found is None:
            return None
        s, parent, action = found
        out = []
        while parent[s] >= 0:
            out.append(ACTIONS[action[s]])
            s = parent[s]
        out.reverse()
        return out

    def distances(self, start):
        """Action distance from ``start`` to every state (-1 if unreachable)."""
        dist = np.full(self.n, -1, dtype=np.int64)
        s0 = self.state(start)
        dist[s0] = 0
        frontier = np.array([s0])
        d = 0
        while frontier.size:
            d += 1
            nb = self.succ[frontier].ravel()
            nb = np.unique(nb[nb >= 0])
            nb = nb[dist[nb] < 0]
            dist[nb] = d
            frontier = nb
        return dist

    def reachable_cells(self, start):
        dist = self.distances(start).reshape(-1, 8)
        reach = (dist >= 0).any(axis=1)
        w = self.world.width
        return {(int(i % w), int(i // w)) for i in np.nonzero(reach)[0]}


def plan_path(world, start, goal_cells):
    """Canonical shortest action sequence to any goal cell, or None."""
    goal_cells = list(goal_cells)
    if not goal_cells:
        return None
    return world.lattice.path(start, goal_cells)


def shortest_path_length(world, start, goal_cells):
    """Minimum number of primitive actions to reach the region; None if unreachable."""
    goal_cells = list(goal_cells)
    if not goal_cells:
        raise ValueError("goal region must be non-empty")
    p = plan_path(world, start, goal_cells)
    return None if p is None else len(p)


# perception ----------------------------------------------------------------

@dataclass(frozen=True)
class DetectorConfig:
    range: float = 2.0
    fov: float = 90.0
    noise: float = 0.1
    p_fn: float = 0.0
    seed: int = 0
    occlude_furniture: bool = False


@dataclass(frozen=True)
class Detection:
    category: str
    position: tuple
    receptacle_of: str | None = None
    stationary: bool = False

    @property
    def receptacle(self):
        return self.receptacle_of is not None


def _in_cone(robot, point, config):
    rx, ry = robot.position
    dx, dy = point[0] - rx, point[1] - ry
    d = math.hypot(dx, dy)
    if d > config.range:
        return False
    if d < 1e-9:
        return True
    diff = (math.degrees(math.atan2(dy, dx)) - robot.heading + 180.0) % 360.0 - 180.0
    return abs(diff) <= config.fov / 2 + 1e-9


def line_of_sight(world, start, point, ignore=frozenset(), step_m=0.05, furniture=True):
    """True when no blocked cell other than ``ignore`` lies on the segment.

    With ``furniture=False`` only walls block the view.
    """
    d = distance(start, point)
    n = max(2, int(math.ceil(d / step_m)) + 1)
    occ = world.occupancy if furniture else world.wall_mask
    for t in np.linspace(0.0, 1.0, n):
        x = start[0] + t * (point[0] - start[0])
        y = start[1] + t * (point[1] - start[1])
        c, r = int(x // CELL_SIZE), int(y // CELL_SIZE)
        if (c, r) in ignore or not world.in_bounds((c, r)):
            continue
        if occ[r, c]:
            return False
    return True


def visible(world, robot, point, ignore=frozenset(), config=DetectorConfig()):
    return _in_cone(robot, point, config) and line_of_sight(world, robot.position, point, ignore,
                                                            furniture=config.occlude_furniture)


def detect(world, robot, config=DetectorConfig(), tick=0):
    """Objects whose centre is in range, inside the view cone and unoccluded.

    Noise and drop-outs come from a generator seeded by ``(config.seed,
    tick)``; three draws are consumed per object in world order whether or
    not it is visible, so results do not depend on which objects are seen.
    """
    rng = np.random.default_rng([config.seed, tick])
    out = []
    for obj in world.objects():
        nx, ny, drop = rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.random()
        if not visible(world, robot, obj.position, world.object_cells(obj.name), config):
            continue
        if config.p_fn > 0 and drop < config.p_fn:
            continue
        est = (obj.position[0] + config.noise * nx, obj.position[1] + config.noise * ny)
        out.append(Detection(obj.name, est, obj.parent, obj.stationary))
    return out


def visible_cells(world, robot, config=DetectorConfig()):
    """Free cells whose centres the detector can see from ``robot``."""
    key = (robot.cell, robot.heading, config.range, config.fov, config.occlude_furniture)
    cache = world._view_cache
    hit = cache.get(key)
    if hit is not None:
        return hit
    reach = int(math.ceil(config.range / CELL_SIZE))
    c0, r0 = robot.cell
    cells = []
    for r in range(r0 - reach, r0 + reach + 1):
        for c in range(c0 - reach, c0 + reach + 1):
            if world.is_free((c, r)) and visible(world, robot, cell_center((c, r)), config=config):
                cells.append((c, r))
    hit = frozenset(cells)
    cache[key] = hit
    return hit


# generation ----------------------------------------------------------------

def _partition_walls(rng, width, height):
    walls = set()
    if width < 16 or height < 16:
        return walls
    door = 4
    x = width // 2 + int(rng.integers(-2, 3))
    gaps = set()
    for _ in range(2):
        y0 = int(rng.integers(1, height - door - 1))
        gaps.update(range(y0, y0 + door))
    walls.update((x, y) for y in range(height) if y not in gaps)
    y = height // 2 + int(rng.integers(-2, 3))
    x0 = int(rng.integers(1, x - door - 1))
    walls.update((c, y) for c in range(x) if not x0 <= c < x0 + door)
    return walls


def _footprint_size(rng, receptacle):
    if receptacle:
        return int(rng.integers(2, 5)), int(rng.integers(2, 4))
    return (1, 1) if rng.random() < 0.5 else (1, 2)


def _place_stationary(rng, width, height, blocked, padded, name, receptacle):
    w, h = _footprint_size(rng, receptacle)
    if rng.random() < 0.5:
        w, h = h, w
    for _ in range(200):
        c0 = int(rng.integers(0, width - w + 1))
        r0 = int(rng.integers(0, height - h + 1))
        cells = [(c, r) for c in range(c0, c0 + w) for r in range(r0, r0 + h)]
        if any(cell in blocked or cell in padded for cell in cells):
            continue
        return StationaryObject(name, tuple(cells), receptacle)
    return None


def generate_world(seed, ontology, gt_graph, n_stationary=10, n_movable=8, width=32, height=32,
                   target=None, receptacle_prob=0.5, partitions=True, max_retries=1000, min_start_distance=2.0):
    """Synthesise a household consistent with ``gt_graph``.

    Every movable sharing a ``gt_graph`` edge with a placed stationary object
    is put on it (receptacles, with probability ``receptacle_prob``) or on a
    free cell strictly within 1.0 m of it.
    """
    stationary_pool = ontology.of_kind("stationary", "receptacle")
    movable_pool = ontology.of_kind("movable")
    if n_stationary > len(stationary_pool) or n_movable > len(movable_pool):
        raise ValueError(f"requested {n_stationary} stationary / {n_movable} movable objects but the "
                         f"ontology has {len(stationary_pool)} / {len(movable_pool)}")
    if n_movable < 1:
        raise ValueError("at least one movable object (the target) is required")
    if target is not None and target not in movable_pool:
        raise ValueError(f"target {target!r} is not a movable category")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        world = _attempt(rng, seed, ontology, gt_graph, stationary_pool, movable_pool,
                         n_stationary, n_movable, width, height, target, receptacle_prob, partitions,
                         min_start_distance)
        if world is not None:
            return world
    raise GenerationError(f"could not place objects after {max_retries} attempts "
                          f"({width}x{height} grid, {n_stationary} stationary, {n_movable} movable)")


def _attempt(rng, seed, ontology, gt, stationary_pool, movable_pool, n_stat, n_mov,
             width, height, target, receptacle_prob, partitions, min_start_distance):
    walls = _partition_walls(rng, width, height) if partitions else set()
    tgt = target if target is not None else str(rng.choice(movable_pool))
    chosen = []
    related = [s for s in stationary_pool if gt.has_node(tgt) and gt.has_node(s) and gt.label(tgt, s)]
    if related and n_stat > 0:
        chosen.append(str(rng.choice(related)))
    rest = [s for s in stationary_pool if s not in chosen]
    chosen += [str(s) for s in rng.choice(rest, size=n_stat - len(chosen), replace=False)]

    blocked = set(walls)
    padded = set()
    stationary = []
    for name in chosen:
        obj = _place_stationary(rng, width, height, blocked, padded, name, ontology.is_receptacle(name))
        if obj is None:
            return None
        stationary.append(obj)
        blocked.update(obj.footprint)
        for c, r in obj.footprint:
            padded.update((c + dc, r + dr) for dc in (-1, 0, 1) for dr in (-1, 0, 1))

    free = [(c, r) for r in range(height) for c in range(width) if (c, r) not in blocked]
    if not free:
        return None
    start_cell = free[int(rng.integers(len(free)))]
    start = RobotState(start_cell, HEADINGS[int(rng.integers(8))])
    probe = GridWorld(width, height, frozenset(walls), tuple(stationary),
                      (MovableObject("__probe__", start_cell),), "__probe__", start)
    reach = probe.lattice.reachable_cells(start)
    for s in stationary:
        if not any(c in reach for c in probe.cells_within(s.position, same_side=True)):
            return None

    others = [m for m in movable_pool if m != tgt]
    names = [tgt] + [str(m) for m in rng.choice(others, size=n_mov - 1, replace=False)]
    movable = []
    for name in names:
        near = [s for s in stationary if gt.has_node(name) and gt.has_node(s.name) and gt.label(name, s.name)]
        if near:
            s = near[int(rng.integers(len(near)))]
            if s.receptacle and rng.random() < receptacle_prob:
                movable.append(MovableObject(name, s.footprint[0], parent=s.name))
                continue
            cells = [c for c in probe.cells_within(s.position, same_side=True) if c in reach]
            if not cells:
                if s.receptacle:
                    movable.append(MovableObject(name, s.footprint[0], parent=s.name))
                    continue
                return None
            movable.append(MovableObject(name, cells[int(rng.integers(len(cells)))]))
        else:
            cells = sorted(reach)
            movable.append(MovableObject(name, cells[int(rng.integers(len(cells)))]))
    world = GridWorld(width, height, frozenset(walls), tuple(stationary), tuple(movable), tgt, start, seed)
    # keep the target out of detector range at the start so no episode is trivial
    if distance(start.position, world.position(tgt)) <= min_start_distance:
        return None
    return world


def placement_violations(world, gt_graph):
    """Movables with a gt edge to some placed stationary object that satisfy
    the proximity rule against none of them."""
    bad = []
    for m in world.movable:
        related = [s for s in world.stationary
                   if gt_graph.has_node(m.name) and gt_graph.has_node(s.name) and gt_graph.label(m.name, s.name)]
        if not related:
            continue
        if not any(label_edge(m.position, s.position, m.parent == s.name) for s in related):
            bad.append(m.name)
    return bad


# persistence ---------------------------------------------------------------

def world_to_dict(world):
    return {
        "format": WORLD_FORMAT,
        "width": world.width,
        "height": world.height,
        "seed": world.seed,
        "target": world.target,
        "start": {"cell": list(world.start.cell), "heading": world.start.heading},
        "walls": sorted([list(c) for c in world.walls]),
        "stationary": [{"name": s.name, "receptacle": s.receptacle,
                        "footprint": [list(c) for c in s.footprint]} for s in world.stationary],
        "movable": [{"name": m.name, "cell": list(m.cell), "parent": m.parent, "known": m.known}
                    for m in world.movable],
    }


def world_from_dict(data):
    if data.get("format") != WORLD_FORMAT:
        raise ValueError(f"unsupported world format {data.get('format')!r}")
    return GridWorld(
        width=int(data["width"]),
        height=int(data["height"]),
        walls=frozenset(tuple(c) for c in data["walls"]),
        stationary=tuple(StationaryObject(s["name"], tuple(tuple(c) for c in s["footprint"]),
                                          bool(s.get("receptacle", False))) for s in data["stationary"]),
        movable=tuple(MovableObject(m["name"], tuple(m["cell"]), m.get("parent"), bool(m.get("known", False)))
                      for m in data["movable"]),
        target=data["target"],
        start=RobotState(tuple(data["start"]["cell"]), int(data["start"]["heading"])),
        seed=data.get("seed"),
    )


def save_world(world, path):
    Path(path).write_text(json.dumps(world_to_dict(world), indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_world(path):
    return world_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
