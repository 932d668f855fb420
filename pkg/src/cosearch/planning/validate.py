"""Plan validation by direct interpretation of the lifted action schemas.

Deliberately independent of ``planner``: formulas are evaluated
recursively against the full fact set (static and fluent alike), with
quantifiers expanded on the fly.
"""

from __future__ import annotations

import itertools

from .pddl import parse_typed_list, render


class ValidationError(RuntimeError):
    def __init__(self, message, index=None, literal=None):
        super().__init__(message)
        self.index = index
        self.literal = literal


def _bind(atom, env):
    return tuple(env.get(t, t) for t in atom)


def _domain_of(domain, problem, typ):
    return sorted(o for o, t in problem.objects.items() if domain.is_subtype(t, typ))


def first_violation(domain, problem, formula, facts, env):
    """None if ``formula`` holds, else the first failing literal as a string."""
    head = formula[0]
    if head == "and":
        for f in formula[1:]:
            bad = first_violation(domain, problem, f, facts, env)
            if bad is not None:
                return bad
        return None
    if head == "or":
        fails = [first_violation(domain, problem, f, facts, env) for f in formula[1:]]
        return None if any(b is None for b in fails) else (fails[0] if fails else "(or)")
    if head == "not":
        inner = formula[1]
        if inner[0] in ("and", "or", "not"):
            ok = first_violation(domain, problem, inner, facts, env) is not None
            return None if ok else render(formula)
        atom = _bind(inner, env)
        holds = atom[1] == atom[2] if atom[0] == "=" else atom in facts
        return None if not holds else render(("not", atom))
    atom = _bind(formula, env)
    holds = atom[1] == atom[2] if atom[0] == "=" else atom in facts
    return None if holds else render(atom)


def _collect(domain, problem, effect, facts, env, add, dele):
    head = effect[0] if effect else "and"
    if head == "and":
        for e in effect[1:]:
            _collect(domain, problem, e, facts, env, add, dele)
    elif head == "forall":
        variables = parse_typed_list(effect[1])
        pools = [_domain_of(domain, problem, t) for _, t in variables]
        for combo in itertools.product(*pools):
            inner = dict(env, **{v: o for (v, _), o in zip(variables, combo)})
            _collect(domain, problem, effect[2], facts, inner, add, dele)
    elif head == "when":
        if first_violation(domain, problem, effect[1], facts, env) is None:
            _collect(domain, problem, effect[2], facts, env, add, dele)
    elif head == "not":
        dele.add(_bind(effect[1], env))
    else:
        add.add(_bind(effect, env))


def apply_step(domain, problem, facts, name, args):
    """Successor fact set, or raise ValidationError naming the failed literal."""
    if name not in domain.actions:
        raise ValidationError(f"unknown action {name!r}")
    act = domain.actions[name]
    if len(args) != len(act.params):
        raise ValidationError(f"{name} takes {len(act.params)} arguments, got {len(args)}")
    env = {}
    for (var, typ), obj in zip(act.params, args):
        if obj not in problem.objects:
            raise ValidationError(f"{name}: unknown object {obj!r}")
        if not domain.is_subtype(problem.objects[obj], typ):
            raise ValidationError(f"{name}: {obj} is not a {typ}")
        env[var] = obj
    bad = first_violation(domain, problem, act.precondition, facts, env)
    if bad is not None:
        raise ValidationError(f"{name}({', '.join(args)}): precondition {bad} does not hold", literal=bad)
    add, dele = set(), set()
    _collect(domain, problem, act.effect, facts, env, add, dele)
    return frozenset((facts - dele) | add)


def goal_holds(domain, problem, facts):
    return first_violation(domain, problem, ("and",) + tuple(problem.goal), facts, {}) is None


def validate_plan(domain, problem, plan):
    """Replay ``plan`` (steps with ``.name`` and ``.args``) from the initial
    state; returns the final fact set or raises ValidationError."""
    facts = frozenset(problem.init)
    for i, st in enumerate(plan):
        try:
            facts = apply_step(domain, problem, facts, st.name, tuple(st.args))
        except ValidationError as e:
            raise ValidationError(f"step {i + 1}: {e}", i, e.literal) from None
    bad = first_violation(domain, problem, ("and",) + tuple(problem.goal), facts, {})
    if bad is not None:
        raise ValidationError(f"goal literal {bad} does not hold after the plan", len(plan), bad)
    return facts


def successors(domain, problem, facts):
    """Every ``((name, args), next_facts)`` applicable in ``facts``."""
    out = []
    for name in sorted(domain.actions):
        act = domain.actions[name]
        pools = [_domain_of(domain, problem, t) for _, t in act.params]
        for combo in itertools.product(*pools):
            env = dict(zip((v for v, _ in act.params), combo))
            if first_violation(domain, problem, act.precondition, facts, env) is not None:
                continue
            add, dele = set(), set()
            _collect(domain, problem, act.effect, facts, env, add, dele)
            out.append(((name, combo), frozenset((facts - dele) | add)))
    return out
