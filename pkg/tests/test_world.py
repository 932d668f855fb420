from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cosearch.corpus import Ontology, RelationGraph, label_edge
from cosearch.world import (HEADINGS, MOVE_AHEAD, ROTATE_LEFT, ROTATE_RIGHT, DetectorConfig, GenerationError,
                            GridWorld, MovableObject, RobotState, StationaryObject, detect, generate_world,
                            load_world, placement_violations, plan_path, save_world, shortest_path_length, step)


def open_world(width=5, height=5, walls=(), movable=None, start=RobotState((0, 0), 0)):
    movable = movable or (MovableObject("apple", (width - 1, height - 1)),)
    return GridWorld(width, height, frozenset(walls), (), tuple(movable), movable[0].name, start)


def test_step_examples():
    w = open_world(walls=[(4, 2)])
    r = RobotState((2, 2), 0)
    assert step(w, r, MOVE_AHEAD) == (RobotState((3, 2), 0), False)
    assert step(w, r, ROTATE_LEFT)[0].heading == 45
    assert step(w, r, ROTATE_RIGHT)[0].heading == 315
    blocked = RobotState((3, 2), 0)
    assert step(w, blocked, MOVE_AHEAD) == (blocked, True)
    assert step(w, RobotState((2, 2), 45), MOVE_AHEAD)[0].cell == (3, 3)
    assert step(w, RobotState((0, 0), 180), MOVE_AHEAD) == (RobotState((0, 0), 180), True)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([MOVE_AHEAD, ROTATE_LEFT, ROTATE_RIGHT]), max_size=60),
       st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=10))
def test_step_never_leaves_free_space(actions, walls):
    walls = walls - {(0, 0), (5, 5)}
    w = open_world(6, 6, walls)
    r = w.start
    for a in actions:
        r, _ = step(w, r, a)
        assert w.is_free(r.cell)


# exhaustive BFS oracle with its own kinematics table
_DIR = {0: (1, 0), 45: (1, 1), 90: (0, 1), 135: (-1, 1), 180: (-1, 0), 225: (-1, -1), 270: (0, -1), 315: (1, -1)}


def bfs_oracle(width, height, walls, start, goals):
    src = (start.cell, start.heading)
    dist = {src: 0}
    q = deque([src])
    while q:
        (c, h) = q.popleft()
        if c in goals:
            return dist[(c, h)]
        nxt = [(c, (h + 45) % 360), (c, (h - 45) % 360)]
        dc, dr = _DIR[h]
        m = (c[0] + dc, c[1] + dr)
        if 0 <= m[0] < width and 0 <= m[1] < height and m not in walls:
            nxt.append((m, h))
        for s in nxt:
            if s not in dist:
                dist[s] = dist[(c, h)] + 1
                q.append(s)
    return None


def test_path_length_examples():
    w = open_world()
    r = RobotState((2, 2), 0)
    assert shortest_path_length(w, r, [(2, 2)]) == 0
    assert shortest_path_length(w, r, [(4, 2)]) == 2
    assert shortest_path_length(w, r, [(2, 3)]) == bfs_oracle(5, 5, set(), r, {(2, 3)})
    with pytest.raises(ValueError):
        shortest_path_length(w, r, [])


def test_unreachable_region():
    walls = [(1, r) for r in range(5)]
    w = open_world(walls=walls)
    assert shortest_path_length(w, RobotState((0, 0), 0), [(3, 3)]) is None


def test_bfs_matches_oracle_on_every_pose_and_goal():
    walls = {(2, 1), (2, 2), (2, 3)}
    w = open_world(walls=walls, movable=(MovableObject("apple", (4, 4)),))
    free = [(c, r) for r in range(5) for c in range(5) if (c, r) not in walls]
    for cell in free[::3]:
        for h in HEADINGS:
            start = RobotState(cell, h)
            for goal in free:
                assert shortest_path_length(w, start, [goal]) == bfs_oracle(5, 5, walls, start, {goal})


def test_plan_path_replays_to_goal():
    w = open_world(7, 7, walls={(3, r) for r in range(6)})
    start = RobotState((0, 0), 90)
    path = plan_path(w, start, [(6, 0)])
    r = start
    for a in path:
        r, blocked = step(w, r, a)
        assert not blocked
    assert r.cell == (6, 0)
    assert path == plan_path(w, start, [(6, 0)])


def detector_world(obj_cell):
    box = StationaryObject("shelf", [(18, 18)], receptacle=True)
    return GridWorld(20, 20, frozenset(), (box,), (MovableObject("apple", obj_cell),), "apple",
                     RobotState((2, 2), 0))


def test_detect_examples():
    r = RobotState((2, 2), 0)
    assert [d.category for d in detect(detector_world((6, 2)), r)] == ["apple"]
    assert detect(detector_world((0, 2)), r) == []
    assert detect(detector_world((14, 2)), r) == []


def test_walls_block_view():
    w = GridWorld(20, 20, frozenset({(4, 1), (4, 2), (4, 3)}), (), (MovableObject("apple", (6, 2)),), "apple",
                  RobotState((2, 2), 0))
    assert detect(w, w.start) == []


def test_detection_noise_bounded_and_seeded():
    w = detector_world((5, 3))
    for tick in range(50):
        (d,) = detect(w, w.start, tick=tick)
        true = w.position("apple")
        assert abs(d.position[0] - true[0]) <= 0.1 and abs(d.position[1] - true[1]) <= 0.1
        assert detect(w, w.start, tick=tick) == [d]


def test_false_negative_rate():
    w = detector_world((5, 3))
    cfg = DetectorConfig(p_fn=0.5)
    hits = sum(bool(detect(w, w.start, cfg, tick=t)) for t in range(400))
    assert 150 < hits < 250


def test_receptacle_flag_reported():
    shelf = StationaryObject("shelf", [(6, 2)], receptacle=True)
    w = GridWorld(20, 20, frozenset(), (shelf,), (MovableObject("book", (6, 2), parent="shelf"),), "book",
                  RobotState((2, 2), 0))
    dets = {d.category: d for d in detect(w, w.start)}
    assert dets["book"].receptacle and dets["book"].receptacle_of == "shelf"
    assert dets["shelf"].stationary


@pytest.fixture(scope="module")
def knife_counter():
    onto = Ontology(["knife", "countertop", "apple", "fork", "sofa"],
                    {"countertop": "receptacle", "sofa": "receptacle"})
    g = RelationGraph(onto.names)
    g.set_edge("knife", "countertop")
    return onto, g


def test_generation_respects_gt_edge(knife_counter):
    onto, g = knife_counter
    for seed in range(10):
        w = generate_world(seed, onto, g, n_stationary=2, n_movable=3, width=20, height=20, target="knife")
        assert label_edge(w.position("knife"), w.position("countertop"), w.get("knife").parent == "countertop")
        assert placement_violations(w, g) == []


def test_generation_deterministic_and_roundtrip(knife_counter, tmp_path):
    onto, g = knife_counter
    a = generate_world(7, onto, g, n_stationary=2, n_movable=3, width=20, height=20)
    b = generate_world(7, onto, g, n_stationary=2, n_movable=3, width=20, height=20)
    assert a == b
    save_world(a, tmp_path / "w.json")
    assert load_world(tmp_path / "w.json") == a
    save_world(load_world(tmp_path / "w.json"), tmp_path / "w2.json")
    assert (tmp_path / "w.json").read_bytes() == (tmp_path / "w2.json").read_bytes()


def test_generation_errors(knife_counter):
    onto, g = knife_counter
    with pytest.raises(ValueError):
        generate_world(0, onto, g, n_stationary=5, n_movable=3)
    with pytest.raises(GenerationError):
        generate_world(0, onto, g, n_stationary=2, n_movable=3, width=4, height=4, max_retries=5)


def test_bundled_worlds_pass_validator(household):
    onto, g = household
    for seed in range(8):
        w = generate_world(seed, onto, g, n_stationary=14, n_movable=12, width=40, height=40)
        assert placement_violations(w, g) == []
        cells = w.occupied_cells()
        assert all(w.in_bounds(c) for c in cells) and w.is_free(w.start.cell)


def test_world_invariants():
    with pytest.raises(ValueError):
        open_world(movable=(MovableObject("apple", (1, 1)), MovableObject("apple", (2, 2))))
    with pytest.raises(ValueError):
        RobotState((0, 0), 30)
    with pytest.raises(ValueError):
        GridWorld(5, 5, frozenset(), (), (MovableObject("apple", (1, 1)),), "pear", RobotState((0, 0)))
    occ = open_world(walls=[(1, 0)]).occupancy
    assert occ[0, 1] and not np.delete(occ.ravel(), 1).any()
