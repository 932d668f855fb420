"""A small PDDL reader for the STRIPS subset used by the household domain.

Supported: typed parameters and objects, conjunctive preconditions with
negative literals and equality, add/delete effects, ``forall`` and
``when`` in effects.  Formulas are kept as nested tuples, e.g.
``("and", ("at", "?x"), ("not", ("holding", "?x")))``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources


class PDDLError(ValueError):
    pass


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def tokenize(text):
    text = "\n".join(line.split(";", 1)[0] for line in text.splitlines())
    return _TOKEN.findall(text.lower())


def parse_sexpr(text):
    """Parse one s-expression into nested tuples of strings."""
    tokens = tokenize(text)
    if not tokens:
        raise PDDLError("empty input")
    stack = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise PDDLError("unbalanced ')'")
            done = tuple(stack.pop())
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise PDDLError("unbalanced '('")
    if len(stack[0]) != 1:
        raise PDDLError(f"expected one top-level expression, found {len(stack[0])}")
    return stack[0][0]


def parse_typed_list(items):
    """``?x ?y - movable ?z`` -> [("?x", "movable"), ("?y", "movable"), ("?z", "object")]."""
    out, pending = [], []
    it = iter(items)
    for tok in it:
        if tok == "-":
            try:
                typ = next(it)
            except StopIteration:
                raise PDDLError("dangling '-' in typed list") from None
            out += [(p, typ) for p in pending]
            pending = []
        else:
            pending.append(tok)
    return out + [(p, "object") for p in pending]


@dataclass(frozen=True)
class Action:
    name: str
    params: tuple
    precondition: tuple
    effect: tuple

    @property
    def arity(self):
        return len(self.params)


@dataclass
class Domain:
    name: str
    types: dict
    predicates: dict
    actions: dict

    def is_subtype(self, typ, parent):
        while typ is not None:
            if typ == parent:
                return True
            typ = self.types.get(typ)
        return False

    def fluents(self):
        """Predicates some action changes; the rest are static."""
        out = set()
        for a in self.actions.values():
            for _, lit in effect_literals(a.effect):
                out.add(lit[0])
        return out


@dataclass
class Problem:
    name: str
    domain: str
    objects: dict
    init: frozenset
    goal: tuple = field(default=())

    def objects_of(self, domain, typ):
        return sorted(o for o, t in self.objects.items() if domain.is_subtype(t, typ))


def _section(expr, key):
    for item in expr[2:]:
        if isinstance(item, tuple) and item and item[0] == key:
            return item
    return None


def _as_conj(formula):
    if formula == ():
        return ("and",)
    return formula


def effect_literals(effect):
    """Every ``(positive, atom)`` an effect can produce, ignoring conditions."""
    if not effect:
        return []
    head = effect[0]
    if head == "and":
        return [x for e in effect[1:] for x in effect_literals(e)]
    if head == "forall":
        return effect_literals(effect[2])
    if head == "when":
        return effect_literals(effect[2])
    if head == "not":
        return [(False, effect[1])]
    return [(True, effect)]


def _check_formula(formula, predicates, variables, where):
    if not formula:
        return
    head = formula[0]
    if head in ("and", "or"):
        for f in formula[1:]:
            _check_formula(f, predicates, variables, where)
    elif head == "not":
        _check_formula(formula[1], predicates, variables, where)
    elif head == "forall":
        inner = variables | {v for v, _ in parse_typed_list(formula[1])}
        _check_formula(formula[2], predicates, inner, where)
    elif head == "when":
        _check_formula(formula[1], predicates, variables, where)
        _check_formula(formula[2], predicates, variables, where)
    elif head == "=":
        pass
    else:
        if head not in predicates:
            raise PDDLError(f"{where}: undeclared predicate {head!r}")
        if len(formula) - 1 != len(predicates[head]):
            raise PDDLError(f"{where}: {head} takes {len(predicates[head])} arguments, got {len(formula) - 1}")
        for arg in formula[1:]:
            if arg.startswith("?") and arg not in variables:
                raise PDDLError(f"{where}: unbound variable {arg} in ({head} ...)")


def parse_domain(text):
    expr = parse_sexpr(text)
    if not (isinstance(expr, tuple) and len(expr) >= 2 and expr[0] == "define"
            and isinstance(expr[1], tuple) and expr[1][0] == "domain"):
        raise PDDLError("expected (define (domain NAME) ...)")
    name = expr[1][1]
    types = {"object": None}
    sec = _section(expr, ":types")
    if sec:
        for t, parent in parse_typed_list(sec[1:]):
            types[t] = parent
    predicates = {}
    sec = _section(expr, ":predicates")
    for p in (sec[1:] if sec else ()):
        predicates[p[0]] = tuple(parse_typed_list(p[1:]))
    actions = {}
    for item in expr[2:]:
        if not (isinstance(item, tuple) and item and item[0] == ":action"):
            continue
        aname = item[1]
        fields = dict(zip(item[2::2], item[3::2]))
        params = tuple(parse_typed_list(fields.get(":parameters", ())))
        for _, t in params:
            if t not in types:
                raise PDDLError(f"action {aname}: unknown type {t!r}")
        pre = _as_conj(fields.get(":precondition", ()))
        eff = _as_conj(fields.get(":effect", ()))
        variables = {v for v, _ in params}
        _check_formula(pre, predicates, variables, f"action {aname} precondition")
        _check_formula(eff, predicates, variables, f"action {aname} effect")
        actions[aname] = Action(aname, params, pre, eff)
    return Domain(name, types, predicates, actions)


def parse_problem(text, domain=None):
    expr = parse_sexpr(text)
    if not (isinstance(expr, tuple) and len(expr) >= 2 and expr[0] == "define"
            and isinstance(expr[1], tuple) and expr[1][0] == "problem"):
        raise PDDLError("expected (define (problem NAME) ...)")
    dom = _section(expr, ":domain")
    objs = _section(expr, ":objects")
    objects = dict(parse_typed_list(objs[1:])) if objs else {}
    init = _section(expr, ":init")
    facts = frozenset(tuple(f) for f in (init[1:] if init else ()))
    goal = _section(expr, ":goal")
    goal = _as_conj(goal[1]) if goal else ("and",)
    lits = goal[1:] if goal[0] == "and" else (goal,)
    prob = Problem(expr[1][1], dom[1] if dom else "", objects, facts, tuple(lits))
    if domain is not None:
        for t in objects.values():
            if t not in domain.types:
                raise PDDLError(f"problem {prob.name}: unknown type {t!r}")
        for f in facts:
            if f[0] not in domain.predicates:
                raise PDDLError(f"problem {prob.name}: undeclared predicate {f[0]!r} in :init")
    return prob


def render(expr):
    if isinstance(expr, tuple):
        return "(" + " ".join(render(e) for e in expr) + ")"
    return expr


def render_problem(problem):
    by_type = {}
    for o, t in sorted(problem.objects.items()):
        by_type.setdefault(t, []).append(o)
    objs = " ".join(" ".join(v) + f" - {t}" for t, v in sorted(by_type.items()))
    lines = [f"(define (problem {problem.name})",
             f"  (:domain {problem.domain})",
             f"  (:objects {objs})",
             "  (:init"]
    lines += [f"    {render(f)}" for f in sorted(problem.init)]
    lines.append("  )")
    lines.append(f"  (:goal {render(('and',) + tuple(problem.goal))})")
    lines.append(")")
    return "\n".join(lines) + "\n"


def load_domain(path=None):
    """Parse a domain file; defaults to the bundled household domain."""
    if path is None:
        text = resources.files("cosearch.data").joinpath("household.pddl").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_domain(text)
