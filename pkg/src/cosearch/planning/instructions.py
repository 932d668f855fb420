"""Explicit instructions -> (action, subject, object).

A head-verb lexicon picks the action.  The direct object is the noun
phrase after the verb; the subject is the noun phrase after the first
instrument or location preposition, or the action's default.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass

from ..corpus import UnknownCategoryError
from ..world import distance

ACTIONS = ("pick_place", "cook", "clean", "cut")

# task family -> (targets, subjects)
TASKS = {
    "pick_place": (["apple", "bread", "fork", "lettuce", "potato", "tomato"], ["plate", "bowl", "sink"]),
    "cook": (["bread", "egg", "lettuce", "potato", "tomato"], ["microwave", "toaster", "stoveburner"]),
    "clean": (["mug", "spatula", "cup", "butterknife", "pan", "bowl", "plate", "pot"], ["sink"]),
    "cut": (["bread", "lettuce", "potato", "tomato"], ["knife"]),
}

COOKING_APPLIANCES = ("microwave", "toaster", "stoveburner")

VERBS = {
    "pick": "pick_place", "place": "pick_place", "put": "pick_place", "move": "pick_place",
    "grab": "pick_place", "set": "pick_place",
    "cook": "cook", "heat": "cook", "warm": "cook", "fry": "cook", "bake": "cook",
    "clean": "clean", "wash": "clean", "rinse": "clean", "scrub": "clean",
    "cut": "cut", "slice": "cut", "chop": "cut", "dice": "cut",
}

SYNONYMS = {
    "counter": "countertop", "counter top": "countertop", "kitchen counter": "countertop",
    "stove": "stoveburner", "burner": "stoveburner", "stove burner": "stoveburner", "stovetop": "stoveburner",
    "butter knife": "butterknife", "coffee machine": "coffeemachine", "coffee maker": "coffeemachine",
    "sponge": "dishsponge", "dish sponge": "dishsponge", "phone": "cellphone", "cell phone": "cellphone",
    "tv": "television", "refrigerator": "fridge", "table": "diningtable", "dining table": "diningtable",
    "kitchen table": "diningtable", "paper towel": "papertowelroll", "paper towels": "papertowelroll",
    "salt shaker": "saltshaker", "pepper shaker": "peppershaker", "trash can": "garbagecan",
    "garbage can": "garbagecan", "bin": "garbagecan", "remote": "remotecontrol", "microwave oven": "microwave",
    "frying pan": "pan", "kitchen sink": "sink", "coffee mug": "mug", "wine bottle": "winebottle",
}

DEFAULT_SUBJECT = {"cut": "knife", "clean": "sink"}

PREPOSITIONS = {"with", "using", "in", "inside", "into", "on", "onto", "at", "to"}
BOUNDARIES = PREPOSITIONS | {"and", "then"}
DETERMINERS = {"the", "a", "an", "some", "my", "this", "that", "your", "it", "up"}
FILLERS = {"please", "robot", "can", "could", "would", "will", "you", "kindly", "go", "and"}

TEMPLATES = {
    "pick_place": ["pick the {o} and place it on the {s}", "pick up the {o} and put it on the {s}",
                   "place the {o} on the {s}", "put the {o} in the {s}", "please move the {o} onto the {s}",
                   "grab the {o} and place it in the {s}"],
    "cook": ["cook the {o} with the {s}", "cook the {o} in the {s}", "heat the {o} using the {s}",
             "please cook the {o} on the {s}"],
    "clean": ["clean the {o} inside the {s}", "wash the {o} in the {s}", "rinse the {o} inside the {s}",
              "clean the {o}"],
    "cut": ["cut the {o} with the {s}", "cut the {o} with a {s}", "slice the {o} using the {s}",
            "chop the {o} with the {s}", "cut the {o}"],
}

# how categories may be written in an instruction
SPELLINGS = {
    "stoveburner": ["stoveburner", "stove burner", "stove"],
    "butterknife": ["butterknife", "butter knife"],
    "countertop": ["countertop", "counter"],
}


class UnsupportedActionError(ValueError):
    pass


class InstructionError(ValueError):
    pass


@dataclass(frozen=True)
class GoalSpec:
    action: str
    subject: str
    object: str

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise UnsupportedActionError(f"unsupported action {self.action!r}")
        if self.subject == self.object:
            raise InstructionError(f"subject and object are both {self.subject!r}")


def _resolve(words, ontology):
    if not words:
        raise UnknownCategoryError("no noun phrase found")
    phrase = " ".join(words)
    options = [SYNONYMS.get(phrase), "".join(words)]
    if phrase.endswith("es"):
        options += [SYNONYMS.get(phrase[:-2]), "".join(words)[:-2]]
    if phrase.endswith("s"):
        options += [SYNONYMS.get(phrase[:-1]), "".join(words)[:-1]]
    options += [SYNONYMS.get(words[-1]), words[-1]]
    for name in options:
        if name and name in ontology:
            return name
    close = difflib.get_close_matches("".join(words), list(ontology.names), n=3, cutoff=0.6)
    hint = f"; did you mean {', '.join(close)}?" if close else ""
    raise UnknownCategoryError(f"unknown category {phrase!r}{hint}")


def _noun_phrase(tokens, i):
    words = []
    while i < len(tokens) and tokens[i] not in BOUNDARIES:
        if tokens[i] not in DETERMINERS:
            words.append(tokens[i])
        i += 1
    return words, i


def nearest_appliance(world, origin=None):
    """Closest cooking appliance present in ``world`` (ties by name)."""
    origin = origin if origin is not None else world.start.position
    present = [(distance(s.position, origin), s.name) for s in world.stationary if s.name in COOKING_APPLIANCES]
    return min(present)[1] if present else "microwave"


def parse_instruction(text, ontology, world=None):
    tokens = re.findall(r"[a-z]+", text.lower())
    if not tokens:
        raise InstructionError("instruction is empty")
    i = 0
    while i < len(tokens) and tokens[i] in FILLERS:
        i += 1
    if i == len(tokens) or tokens[i] not in VERBS:
        word = tokens[min(i, len(tokens) - 1)]
        raise UnsupportedActionError(f"unsupported action {word!r}; known verbs: {', '.join(sorted(VERBS))}")
    action = VERBS[tokens[i]]
    obj_words, i = _noun_phrase(tokens, i + 1)
    obj = _resolve(obj_words, ontology)
    subj = None
    while i < len(tokens):
        if tokens[i] in PREPOSITIONS:
            words, i = _noun_phrase(tokens, i + 1)
            if words:
                subj = _resolve(words, ontology)
                break
        i += 1
    if subj is None:
        if action == "cook":
            subj = nearest_appliance(world) if world is not None else "microwave"
        elif action in DEFAULT_SUBJECT:
            subj = DEFAULT_SUBJECT[action]
        else:
            raise InstructionError(f"{action} needs a destination, e.g. 'place the apple on the plate'")
        if subj not in ontology:
            raise UnknownCategoryError(f"default subject {subj!r} is not in the ontology")
    return GoalSpec(action, subj, obj)


def render_instruction(goal, template):
    return template.format(o=goal.object, s=goal.subject)


def instruction_set():
    """(text, GoalSpec) for every task family, target, subject, template and spelling."""
    out = []
    for action, (targets, subjects) in TASKS.items():
        for s in subjects:
            for o in targets:
                goal = GoalSpec(action, s, o)
                for tpl in TEMPLATES[action]:
                    if "{s}" not in tpl and s != DEFAULT_SUBJECT.get(action):
                        continue
                    for so in SPELLINGS.get(o, [o]):
                        for ss in SPELLINGS.get(s, [s]):
                            out.append((tpl.format(o=so, s=ss), goal))
    return out
