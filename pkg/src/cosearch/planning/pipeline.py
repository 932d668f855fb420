"""Goal compilation, search augmentation and plan execution in the grid world."""

from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import dataclass, field, replace

from ..corpus import NEAR_THRESHOLD_M
from ..search import DEFAULT_STEP_LIMIT, gnn_search, initial_state
from ..world import DetectorConfig, MovableObject, RobotState, cell_center, distance, load_world, plan_path, step
from .instructions import COOKING_APPLIANCES, TASKS, parse_instruction
from .pddl import Problem, load_domain
from .planner import PlanningError, plan_task
from .validate import ValidationError, apply_step, goal_holds

CUTTERS = {"knife", "butterknife"}
SLICEABLE = {"apple", "bread", "lettuce", "potato", "tomato"}
COOKABLE = set(TASKS["cook"][0])
WASHABLE = set(TASKS["clean"][0]) | {"fork", "spoon", "knife", "ladle", "kettle", "apple", "tomato", "potato", "lettuce"}
CONTAINERS = {"sink", "bowl", "microwave", "toaster", "fridge", "pot", "pan", "cup", "mug", "garbagecan",
              "bathtub", "laundryhamper", "box"}
# fixtures that come with a receptacle
COLOCATED = {"faucet": ("sink",)}
NAV_OPS = ("search", "goto")


def augment_with_search(goal, known, extra=()):
    """Objects of the goal (subject first) whose location is not known.

    Leaving ``known_location`` out of the initial state for these is what
    makes the planner add a Search step for each.
    """
    names = [goal.subject, goal.object] + [x for x in extra if x not in (goal.subject, goal.object)]
    return [n for n in names if n not in known]


def problem_objects(goal):
    objs = [goal.subject, goal.object]
    for fixture, partners in COLOCATED.items():
        if any(p in objs for p in partners) and goal.action == "clean":
            objs.append(fixture)
    return objs


def goal_literals(goal):
    if goal.action == "pick_place":
        rel = "in" if goal.subject in CONTAINERS else "on"
        return ((rel, goal.object, goal.subject),)
    if goal.action == "cook":
        return (("cooked", goal.object),)
    if goal.action == "clean":
        return (("clean", goal.object),)
    return (("sliced", goal.object),)


def compile_problem(goal, known, ontology):
    """Initial facts and goal literals for ``goal``.

    ``known`` is any container of category names whose location the robot
    knows; ``ontology`` supplies movable vs stationary.
    """
    objs = problem_objects(goal)
    types = {o: ("movable" if ontology.kind(o) == "movable" else "stationary") for o in objs}
    missing = set(augment_with_search(goal, known, objs))
    init = {("handempty",)}
    for o in objs:
        if o not in missing:
            init.add(("known_location", o))
        if types[o] == "movable":
            init.add(("graspable", o))
        for prop, members in (("cutter", CUTTERS), ("sliceable", SLICEABLE), ("cookable", COOKABLE),
                              ("washable", WASHABLE), ("container", CONTAINERS)):
            if o in members and (prop == "container" or types[o] == "movable"):
                init.add((prop, o))
        if o in COOKING_APPLIANCES and types[o] == "stationary":
            init.add(("appliance", o))
        if o in COLOCATED and types[o] == "stationary":
            init.add(("faucet", o))
            for p in COLOCATED[o]:
                if p in objs:
                    init.add(("colocated", p, o))
    return Problem(f"{goal.action}-{goal.object}-{goal.subject}", "household", types,
                   frozenset(init), goal_literals(goal))


@dataclass
class StepOutcome:
    index: int
    step: str
    stage: str
    ok: bool
    actions: int
    message: str = ""


@dataclass
class ExecutionOutcome:
    steps: list
    nav_success: bool
    exe_success: bool
    actions: int
    failure: str | None = None
    path: list = field(default_factory=list)


class _Executor:
    def __init__(self, world, model, problem, domain, limit, detector):
        self.world = world
        self.model = model
        self.problem = problem
        self.domain = domain
        self.limit = limit
        self.detector = detector
        self.robot = world.start
        self.used = 0
        self.state = initial_state(world)
        self.facts = frozenset(problem.init)
        self.held = None
        self.path = [self.robot.cell]

    @property
    def remaining(self):
        return self.limit - self.used

    def true_position(self, name):
        if name == self.held:
            return self.robot.position
        return self.world.position(name)

    def move_object(self, name, target):
        """Rebuild the world with ``name`` resting on or in ``target``."""
        tgt = self.world.get(target)
        if tgt.stationary:
            new = MovableObject(name, tgt.footprint[0], parent=target, known=True)
        else:
            new = MovableObject(name, tgt.cell, parent=tgt.parent, known=True)
        movable = tuple(new if m.name == name else m for m in self.world.movable)
        self.world = replace(self.world, movable=movable)
        self.state.known[name] = self.world.position(name)

    def search(self, name):
        if name in self.state.known:
            return 0, ""
        try:
            obj = self.world.get(name)
        except KeyError:
            return 0, f"{name} is not in this world"
        if obj.stationary:
            return 0, f"{name} is stationary but its location is unknown"
        st = self.state.copy()
        st.visited = []
        res = gnn_search(self.world.with_target(name), self.model, self.remaining, self.detector,
                         start=self.robot, state=st)
        last = res.trace[-1]
        self.robot = RobotState(last.cell, last.heading)
        self.path += [r.cell for r in res.trace[1:]]
        st.visited = []
        self.state = st
        if not res.success:
            return res.p, f"search for {name} failed ({res.reason or 'not found'}) after {res.p} actions"
        est = [d.position for r in res.trace for d in r.detections if d.category == name][-1]
        self.state.known[name] = tuple(est)
        return res.p, ""

    def goto(self, name):
        est = self.state.known.get(name)
        if est is None:
            return 0, f"location of {name} is unknown"
        radius = NEAR_THRESHOLD_M - self.detector.noise * math.sqrt(2.0) - 1e-6
        region = (self.world.cells_within(est, radius, same_side=True) or self.world.cells_within(est, radius)
                  or self.world.cells_within(est))
        # stand where the fixtures that come with ``name`` are reachable too
        partners = [f[2] for f in self.problem.init if f[0] == "colocated" and f[1] == name]
        both = [c for c in region
                if all(distance(cell_center(c), self.world.position(p)) < NEAR_THRESHOLD_M for p in partners)]
        region = both or region
        path = plan_path(self.world, self.robot, region)
        if path is None:
            return 0, f"no path to {name}"
        n = 0
        for a in path:
            if self.used + n >= self.limit:
                return n, f"step budget exhausted on the way to {name}"
            self.robot, _ = step(self.world, self.robot, a)
            self.path.append(self.robot.cell)
            n += 1
        return n, ""

    def near(self, name):
        d = distance(self.robot.position, self.true_position(name))
        if d < NEAR_THRESHOLD_M:
            return ""
        return f"precondition (near robot {name}) violated: {d:.2f} m >= {NEAR_THRESHOLD_M} m"

    def manipulate(self, st):
        name, args = st.name, st.args
        anchor = {"pick": args[0], "put": args[-1], "slice": args[0], "cook": args[-1],
                  "toggle": args[0], "clean": args[1] if len(args) > 1 else args[0]}.get(name)
        if anchor is not None:
            msg = self.near(anchor)
            if msg:
                return msg
        if name == "pick":
            self.held = args[0]
        elif name == "put":
            self.held = None
            self.move_object(args[0], args[1])
        return ""

    def run(self, plan):
        outcomes = []
        failure = None
        nav_ok = True
        for i, st in enumerate(plan):
            stage = "navigation" if st.name in NAV_OPS else "execution"
            if st.name == "search":
                n, msg = self.search(st.args[0])
            elif st.name == "goto":
                n, msg = self.goto(st.args[0])
            else:
                n, msg = 0, self.manipulate(st)
            self.used += n
            if not msg:
                try:
                    self.facts = apply_step(self.domain, self.problem, self.facts, st.name, st.args)
                except ValidationError as e:
                    msg = str(e)
            outcomes.append(StepOutcome(i, str(st), stage, not msg, n, msg))
            if msg:
                failure = f"step {i + 1} {st}: {msg}"
                nav_ok = nav_ok and stage != "navigation"
                break
        exe_ok = failure is None and goal_holds(self.domain, self.problem, self.facts)
        if failure is None and not exe_ok:
            failure = "plan finished but the goal does not hold"
        return ExecutionOutcome(outcomes, nav_ok, exe_ok, self.used, failure, self.path)


def execute_plan(world, plan, model, problem, domain=None, limit=DEFAULT_STEP_LIMIT,
                 detector=DetectorConfig()):
    """Run ``plan`` in ``world``; Search steps use the GNN policy and every
    primitive action draws on the one shared ``limit``."""
    domain = domain or load_domain()
    return _Executor(world, model, problem, domain, limit, detector).run(plan)


FIXTURE_NAMES = ("cut", "cook", "clean", "pick_place")


def load_fixture(name):
    """Bundled instruction fixture: ``(world, instruction)``."""
    if name not in FIXTURE_NAMES:
        raise ValueError(f"unknown fixture {name!r}; expected one of {', '.join(FIXTURE_NAMES)}")
    path = resources.files("cosearch.data").joinpath("fixtures", f"{name}.json")
    with resources.as_file(path) as p:
        world = load_world(p)
        text = json.loads(p.read_text(encoding="utf-8"))["instruction"]
    return world, text


@dataclass
class InstructionReport:
    text: str
    goal: object = None
    problem: object = None
    plan: list = None
    outcome: ExecutionOutcome = None
    stage: str | None = None
    error: str | None = None

    @property
    def nav(self):
        return self.outcome is not None and self.outcome.nav_success

    @property
    def exe(self):
        return self.outcome is not None and self.outcome.exe_success

    @property
    def ok(self):
        return self.error is None and self.exe


def run_instruction(text, world, model, ontology, domain=None, limit=DEFAULT_STEP_LIMIT,
                    detector=DetectorConfig()):
    """Parse, plan and execute one instruction, labelling the failing stage."""
    report = InstructionReport(text)
    domain = domain or load_domain()
    try:
        report.goal = parse_instruction(text, ontology, world)
    except (ValueError, KeyError) as e:
        report.stage, report.error = "parse", e.args[0] if e.args else str(e)
        return report
    known = {s.name for s in world.stationary} | {m.name for m in world.movable if m.known}
    report.problem = compile_problem(report.goal, known, ontology)
    try:
        report.plan = plan_task(domain, report.problem)
    except PlanningError as e:
        report.stage, report.error = "plan", str(e)
        return report
    report.outcome = execute_plan(world, report.plan, model, report.problem, domain, limit, detector)
    if report.outcome.failure is not None:
        failed = report.outcome.steps[-1] if report.outcome.steps else None
        report.stage = failed.stage if failed is not None and not failed.ok else "execution"
        report.error = report.outcome.failure
    return report
