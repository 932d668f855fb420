from collections import deque

import pytest

from cosearch.planning.instructions import GoalSpec
from cosearch.planning.pddl import (PDDLError, effect_literals, load_domain, parse_domain, parse_problem,
                                   parse_sexpr, render_problem)
from cosearch.planning.pipeline import compile_problem
from cosearch.planning.planner import PlanningError, Step, format_plan, ground, parse_plan, plan_task
from cosearch.planning.validate import ValidationError, goal_holds, successors, validate_plan

DOMAIN = load_domain()


def problem(onto, action, subject, obj, known=None):
    goal = GoalSpec(action, subject, obj)
    known = {subject, obj, "faucet"} if known is None else known
    return compile_problem(goal, known, onto)


def bfs_optimum(domain, prob, cap=12):
    """Plan length by exhaustive BFS over the validator's own successor relation."""
    start = frozenset(prob.init)
    if goal_holds(domain, prob, start):
        return 0
    dist = {start: 0}
    q = deque([start])
    while q:
        s = q.popleft()
        if dist[s] >= cap:
            continue
        for _, t in successors(domain, prob, s):
            if t in dist:
                continue
            dist[t] = dist[s] + 1
            if goal_holds(domain, prob, t):
                return dist[t]
            q.append(t)
    return None


def test_domain_declares_everything():
    preds = DOMAIN.predicates
    for act in DOMAIN.actions.values():
        for _, atom in effect_literals(act.effect):
            assert atom[0] in preds
    assert set(DOMAIN.actions) == {"search", "goto", "pick", "put", "slice", "cook", "toggle", "clean"}
    assert ("holding_cutter",) in {a[:1] for a in _conjuncts(DOMAIN.actions["slice"].precondition)}
    assert "appliance" in {a[0] for a in _conjuncts(DOMAIN.actions["cook"].precondition)}
    clean_pre = {a[0] for a in _conjuncts(DOMAIN.actions["clean"].precondition)}
    assert {"in", "toggled", "faucet"} <= clean_pre


def _conjuncts(f):
    return [x for x in f[1:] if x[0] != "not"] if f[0] == "and" else [f]


@pytest.mark.parametrize("text, msg", [
    ("(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :effect (q ?x)))", "undeclared"),
    ("(define (domain d) (:predicates (p ?x)) (:action a :parameters (?x) :effect (p ?x ?x)))", "arguments"),
    ("(define (domain d) (:predicates (p ?x)) (:action a :parameters () :effect (p ?y)))", "unbound"),
    ("(define (domain d) (:predicates (p ?x))", "unbalanced"),
    ("(define (problem p))", "expected"),
])
def test_domain_errors(text, msg):
    with pytest.raises(PDDLError, match=msg):
        parse_domain(text)


def test_sexpr_comments_and_case():
    assert parse_sexpr("(AND (at ?x) ; trailing\n (not (holding ?x)))") == \
        ("and", ("at", "?x"), ("not", ("holding", "?x")))


def test_problem_render_roundtrip(household):
    onto, _ = household
    prob = problem(onto, "cut", "knife", "bread", known={"bread"})
    back = parse_problem(render_problem(prob), DOMAIN)
    assert back.objects == prob.objects and back.init == prob.init and back.goal == prob.goal


def test_empty_plan_when_goal_holds(household):
    onto, _ = household
    prob = problem(onto, "cut", "knife", "bread")
    done = type(prob)(prob.name, prob.domain, prob.objects, prob.init | {("sliced", "bread")}, prob.goal)
    assert plan_task(DOMAIN, done) == []


def test_cut_plan(household):
    onto, _ = household
    plan = plan_task(DOMAIN, problem(onto, "cut", "knife", "bread"))
    assert [str(s) for s in plan] == ["Goto(knife)", "Pick(knife)", "Goto(bread)", "Slice(bread)"]


def test_clean_plan(household):
    onto, _ = household
    prob = problem(onto, "clean", "sink", "mug")
    plan = plan_task(DOMAIN, prob)
    assert [str(s) for s in plan] == ["Goto(mug)", "Pick(mug)", "Goto(sink)", "Put(mug, sink)", "Toggle(faucet)"]
    assert ("clean", "mug") in validate_plan(DOMAIN, prob, plan)


def test_pick_place_and_cook_plans(household):
    onto, _ = household
    prob = problem(onto, "pick_place", "plate", "apple")
    assert prob.goal == (("on", "apple", "plate"),)
    assert [str(s) for s in plan_task(DOMAIN, prob)] == ["Goto(apple)", "Pick(apple)", "Goto(plate)",
                                                        "Put(apple, plate)"]
    assert problem(onto, "pick_place", "bowl", "apple").goal == (("in", "apple", "bowl"),)
    cook = plan_task(DOMAIN, problem(onto, "cook", "microwave", "egg"))
    assert [str(s) for s in cook] == ["Goto(egg)", "Pick(egg)", "Goto(microwave)", "Cook(egg, microwave)"]


def test_search_steps_inserted(household):
    onto, _ = household
    plan = plan_task(DOMAIN, problem(onto, "cut", "knife", "bread", known={"bread"}))
    assert [str(s) for s in plan[:2]] == ["Search(knife)", "Goto(knife)"]
    both = plan_task(DOMAIN, problem(onto, "cut", "knife", "bread", known=set()))
    searches = [s for s in both if s.name == "search"]
    assert sorted(s.args[0] for s in searches) == ["bread", "knife"]
    for s in searches:
        x = s.args[0]
        first_use = next(i for i, t in enumerate(both) if t.name != "search" and x in t.args)
        assert both.index(s) < first_use
    assert not [s for s in plan_task(DOMAIN, problem(onto, "cut", "knife", "bread")) if s.name == "search"]


def test_plans_are_bfs_optimal(household):
    onto, _ = household
    for args in [("cut", "knife", "tomato"), ("clean", "sink", "pan"), ("cook", "toaster", "bread"),
                 ("pick_place", "sink", "fork")]:
        for known in (None, set()):
            prob = problem(onto, *args, known=known)
            plan = plan_task(DOMAIN, prob)
            validate_plan(DOMAIN, prob, plan)
            assert len(plan) == bfs_optimum(DOMAIN, prob)


def test_unreachable_goal_names_literal(household):
    onto, _ = household
    # a bowl cannot cut, so holding_cutter never becomes true
    prob = problem(onto, "cut", "bowl", "bread")
    with pytest.raises(PlanningError, match="holding_cutter") as exc:
        plan_task(DOMAIN, prob)
    assert exc.value.literal == ("holding_cutter",)


def test_undeclared_goal_predicate(household):
    onto, _ = household
    prob = problem(onto, "cut", "knife", "bread")
    bad = type(prob)(prob.name, prob.domain, prob.objects, prob.init, (("levitating", "bread"),))
    with pytest.raises(PlanningError, match="undeclared"):
        plan_task(DOMAIN, bad)


def test_validator_rejects_bad_plans(household):
    onto, _ = household
    prob = problem(onto, "cut", "knife", "bread")
    with pytest.raises(ValidationError, match="step 1") as exc:
        validate_plan(DOMAIN, prob, [Step("slice", ("bread",))])
    assert exc.value.index == 0
    with pytest.raises(ValidationError, match="goal"):
        validate_plan(DOMAIN, prob, [Step("goto", ("knife",))])


def test_grounding_canonical_order(household):
    onto, _ = household
    acts = ground(DOMAIN, problem(onto, "clean", "sink", "mug"))
    keys = [(a.name, a.args) for a in acts]
    assert keys == sorted(keys)


def test_plan_text_roundtrip(household):
    onto, _ = household
    plan = plan_task(DOMAIN, problem(onto, "clean", "sink", "cup", known={"sink", "faucet"}))
    text = format_plan(plan)
    assert text.splitlines()[0] == "(search cup)"
    assert parse_plan(text) == plan
