"""Grounding and breadth-first forward search.

Static predicates (never changed by any action) and equality are decided
while grounding, so each ground action carries only fluent preconditions,
plain add/delete lists and the conditional effects whose conditions
mention fluents.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

from .pddl import PDDLError, parse_sexpr, parse_typed_list, render


class PlanningError(RuntimeError):
    def __init__(self, message, literal=None):
        super().__init__(message)
        self.literal = literal


@dataclass(frozen=True)
class Step:
    name: str
    args: tuple

    def __str__(self):
        return f"{self.name.capitalize()}({', '.join(self.args)})"

    def sexpr(self):
        return "(" + " ".join((self.name,) + self.args) + ")"


@dataclass(frozen=True)
class Conditional:
    pos: frozenset
    neg: frozenset
    add: frozenset
    delete: frozenset


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple
    pre_pos: frozenset
    pre_neg: frozenset
    add: frozenset
    delete: frozenset
    conditional: tuple

    @property
    def step(self):
        return Step(self.name, self.args)

    def applicable(self, state):
        return self.pre_pos <= state and not (self.pre_neg & state)

    def apply(self, state):
        add, dele = set(self.add), set(self.delete)
        for c in self.conditional:
            if c.pos <= state and not (c.neg & state):
                add |= c.add
                dele |= c.delete
        return frozenset((state - dele) | add)


def _subst(atom, binding):
    return tuple(binding.get(a, a) for a in atom)


class _Grounder:
    def __init__(self, domain, problem):
        self.domain = domain
        self.problem = problem
        self.fluents = domain.fluents()
        self.static = {f for f in problem.init if f[0] not in self.fluents}

    def objects(self, typ):
        return self.problem.objects_of(self.domain, typ)

    def literals(self, formula, binding):
        """Conjunction -> list of (positive, atom); raises on disjunction."""
        head = formula[0]
        if head == "and":
            return [x for f in formula[1:] for x in self.literals(f, binding)]
        if head == "not":
            return [(not p, a) for p, a in self.literals(formula[1], binding)]
        if head in ("or", "forall", "when"):
            raise PDDLError(f"{head} is not supported in conditions")
        return [(True, _subst(formula, binding))]

    def split(self, lits):
        """Decide static literals; returns None if one is false, else the
        fluent (pos, neg) sets."""
        pos, neg = set(), set()
        for positive, atom in lits:
            if atom[0] == "=":
                val = atom[1] == atom[2]
            elif atom[0] not in self.fluents:
                val = atom in self.static
            else:
                (pos if positive else neg).add(atom)
                continue
            if val != positive:
                return None
        return frozenset(pos), frozenset(neg)

    def effects(self, effect, binding, cond):
        """Yield (cond_pos, cond_neg, positive, atom)."""
        head = effect[0] if effect else "and"
        if head == "and":
            for e in effect[1:]:
                yield from self.effects(e, binding, cond)
        elif head == "forall":
            variables = parse_typed_list(effect[1])
            for combo in itertools.product(*(self.objects(t) for _, t in variables)):
                inner = dict(binding)
                inner.update(zip((v for v, _ in variables), combo))
                yield from self.effects(effect[2], inner, cond)
        elif head == "when":
            lits = cond + self.literals(effect[1], binding)
            yield from self.effects(effect[2], binding, lits)
        else:
            positive, atom = (False, effect[1]) if head == "not" else (True, effect)
            decided = self.split(cond)
            if decided is not None:
                yield decided[0], decided[1], positive, _subst(atom, binding)

    def ground(self, action):
        out = []
        names = [v for v, _ in action.params]
        for combo in itertools.product(*(self.objects(t) for _, t in action.params)):
            binding = dict(zip(names, combo))
            pre = self.split(self.literals(action.precondition, binding))
            if pre is None:
                continue
            add, dele, cond = set(), set(), {}
            for cpos, cneg, positive, atom in self.effects(action.effect, binding, []):
                if atom[0] not in self.fluents:
                    continue
                if not cpos and not cneg:
                    (add if positive else dele).add(atom)
                else:
                    a, d = cond.setdefault((cpos, cneg), (set(), set()))
                    (a if positive else d).add(atom)
            conditional = tuple(Conditional(p, n, frozenset(a), frozenset(d))
                                for (p, n), (a, d) in sorted(cond.items(), key=lambda kv: (sorted(kv[0][0]), sorted(kv[0][1]))))
            out.append(GroundAction(action.name, tuple(combo), pre[0], pre[1],
                                    frozenset(add), frozenset(dele), conditional))
        return out


def ground(domain, problem):
    """All statically applicable ground actions in canonical (name, args) order."""
    g = _Grounder(domain, problem)
    acts = [ga for a in domain.actions.values() for ga in g.ground(a)]
    return sorted(acts, key=lambda a: (a.name, a.args))


def _goal_test(domain, problem):
    g = _Grounder(domain, problem)
    lits = [x for f in problem.goal for x in g.literals(f, {})]
    decided = g.split(lits)
    if decided is None:
        bad = next(a for p, a in lits if a[0] not in g.fluents and ((a in g.static) != p))
        raise PlanningError(f"goal literal {render(bad)} is static and false", bad)
    return decided


def fluent_state(domain, problem):
    fl = domain.fluents()
    return frozenset(f for f in problem.init if f[0] in fl)


def plan_task(domain, problem, max_states=500_000):
    """Shortest plan by breadth-first search; ties go to the plan whose
    actions come first in (name, args) order."""
    for lit in problem.goal:
        atom = lit[1] if lit[0] == "not" else lit
        if atom[0] != "=" and atom[0] not in domain.predicates:
            raise PlanningError(f"goal uses undeclared predicate {atom[0]!r}", atom)
    gpos, gneg = _goal_test(domain, problem)
    actions = ground(domain, problem)
    start = fluent_state(domain, problem)
    if gpos <= start and not (gneg & start):
        return []
    parent = {start: None}
    frontier = deque([start])
    while frontier:
        s = frontier.popleft()
        for a in actions:
            if not a.applicable(s):
                continue
            t = a.apply(s)
            if t in parent:
                continue
            parent[t] = (s, a)
            if gpos <= t and not (gneg & t):
                plan = []
                while parent[t] is not None:
                    t, act = parent[t]
                    plan.append(act.step)
                return plan[::-1]
            if len(parent) > max_states:
                raise PlanningError(f"search gave up after {max_states} states")
            frontier.append(t)
    raise _explain_failure(actions, start, gpos, gneg, len(parent))


def relaxed_reachable(actions, start):
    """Facts reachable when delete effects and negative conditions are ignored."""
    reach = set(start)
    changed = True
    while changed:
        changed = False
        for a in actions:
            if not a.pre_pos <= reach:
                continue
            new = set(a.add)
            for c in a.conditional:
                if c.pos <= reach:
                    new |= c.add
            if not new <= reach:
                reach |= new
                changed = True
    return reach


def _explain_failure(actions, start, gpos, gneg, n_states):
    reach = relaxed_reachable(actions, start)

    def achievers(atom):
        out = []
        for a in actions:
            if atom in a.add:
                out.append((a, a.pre_pos))
            for c in a.conditional:
                if atom in c.add:
                    out.append((a, a.pre_pos | c.pos))
        return out

    def culprit(atom, needed_by, seen):
        if atom in seen:
            return atom, needed_by
        seen.add(atom)
        ach = achievers(atom)
        if not ach:
            return atom, needed_by
        act, pre = ach[0]
        missing = sorted(p for p in pre if p not in reach)
        if not missing:
            return atom, needed_by
        return culprit(missing[0], act.step, seen)

    for atom in sorted(gpos):
        if atom not in reach:
            lit, by = culprit(atom, None, set())
            where = f" (needed by {by})" if by is not None else ""
            return PlanningError(f"goal {render(atom)} is unreachable: no way to satisfy "
                                 f"{render(lit)}{where}", lit)
    lit = sorted(gpos)[0] if gpos else sorted(gneg)[0]
    return PlanningError(f"goal literals cannot hold together; explored {n_states} states "
                         f"without reaching {render(lit)}", lit)


def format_plan(plan):
    return "\n".join(s.sexpr() for s in plan) + ("\n" if plan else "")


def parse_plan(text):
    steps = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(";"):
            continue
        e = parse_sexpr(line)
        steps.append(Step(e[0], tuple(e[1:])))
    return steps
