"""Synthetic relationship corpora.

``household_corpus`` emits Visual-Genome-like triples over the bundled
94-category household ontology from a hand-written affinity table plus
sub-threshold noise.  ``planted_partition_corpus`` produces a community
graph used to check link-prediction generalisation.
"""

import itertools

import numpy as np

from .corpus import Ontology, RelationTriple

RECEPTACLES = [
    "armchair", "bathtub", "bed", "cabinet", "coffeemachine", "coffeetable",
    "countertop", "desk", "diningtable", "dresser", "fridge", "garbagecan",
    "laundryhamper", "microwave", "nightstand", "ottoman", "shelf", "sidetable",
    "sink", "sofa", "stoveburner", "toaster", "toilet", "tvstand",
]

FIXTURES = [
    "faucet", "floorlamp", "lightswitch", "mirror", "painting", "showerhead",
    "television", "toiletpaperhanger", "towelholder", "window",
]

MOVABLES = [
    "alarmclock", "apple", "banana", "baseballbat", "basketball", "book",
    "bottle", "bowl", "box", "bread", "butterknife", "candle", "cd",
    "cellphone", "cloth", "creditcard", "cup", "desklamp", "dishsponge", "egg",
    "fork", "handtowel", "houseplant", "kettle", "keychain", "knife", "ladle",
    "laptop", "lettuce", "mug", "newspaper", "orange", "pan", "papertowelroll",
    "pen", "pencil", "peppershaker", "pillow", "plate", "plunger", "pot",
    "potato", "remotecontrol", "saltshaker", "scrubbrush", "soapbar",
    "soapbottle", "spatula", "spoon", "spraybottle", "statue", "teddybear",
    "tennisracket", "tissuebox", "toiletpaper", "tomato", "towel", "vase",
    "watch", "winebottle",
]

# category -> categories it is commonly found on, in or next to
AFFINITY = {
    "apple": ["countertop", "diningtable", "fridge", "bowl"],
    "banana": ["countertop", "diningtable", "bowl"],
    "orange": ["countertop", "diningtable", "fridge", "bowl"],
    "bread": ["countertop", "diningtable", "plate", "toaster", "knife"],
    "lettuce": ["countertop", "fridge", "knife"],
    "potato": ["countertop", "stoveburner", "pot"],
    "tomato": ["countertop", "fridge", "diningtable", "knife"],
    "egg": ["fridge", "countertop", "pan", "bowl"],
    "fork": ["diningtable", "plate", "countertop"],
    "spoon": ["diningtable", "bowl", "countertop"],
    "butterknife": ["diningtable", "plate", "countertop"],
    "knife": ["countertop", "bread", "tomato"],
    "spatula": ["stoveburner", "pan", "countertop"],
    "ladle": ["stoveburner", "pot"],
    "mug": ["coffeemachine", "countertop", "sink"],
    "cup": ["countertop", "sink", "diningtable"],
    "bowl": ["countertop", "diningtable", "sink"],
    "plate": ["diningtable", "sink", "countertop"],
    "pan": ["stoveburner", "sink"],
    "pot": ["stoveburner", "sink"],
    "kettle": ["stoveburner", "countertop"],
    "saltshaker": ["countertop", "diningtable", "peppershaker"],
    "peppershaker": ["countertop", "diningtable"],
    "soapbottle": ["sink", "countertop", "bathtub"],
    "dishsponge": ["sink", "countertop"],
    "winebottle": ["diningtable", "countertop", "fridge"],
    "bottle": ["countertop", "fridge", "diningtable"],
    "papertowelroll": ["countertop"],
    "book": ["shelf", "desk", "coffeetable", "nightstand"],
    "pen": ["desk", "pencil", "sidetable"],
    "pencil": ["desk", "sidetable"],
    "laptop": ["desk", "sofa", "bed"],
    "cellphone": ["desk", "nightstand", "sofa"],
    "keychain": ["sidetable", "dresser", "coffeetable"],
    "creditcard": ["desk", "dresser", "coffeetable"],
    "remotecontrol": ["sofa", "coffeetable", "tvstand"],
    "pillow": ["bed", "sofa", "armchair"],
    "alarmclock": ["nightstand", "desk"],
    "cd": ["shelf", "tvstand", "desk"],
    "teddybear": ["bed", "armchair"],
    "basketball": ["bed", "dresser"],
    "baseballbat": ["dresser", "bed"],
    "tennisracket": ["dresser", "bed"],
    "candle": ["diningtable", "coffeetable", "shelf"],
    "toiletpaper": ["toilet", "toiletpaperhanger", "cabinet"],
    "towel": ["towelholder", "bathtub"],
    "handtowel": ["towelholder", "sink"],
    "soapbar": ["bathtub", "sink"],
    "spraybottle": ["toilet", "cabinet"],
    "plunger": ["toilet"],
    "scrubbrush": ["toilet"],
    "tissuebox": ["nightstand", "sidetable", "dresser"],
    "watch": ["dresser", "nightstand"],
    "statue": ["shelf", "tvstand", "sidetable"],
    "vase": ["shelf", "coffeetable", "diningtable"],
    "newspaper": ["sofa", "coffeetable", "diningtable"],
    "box": ["shelf", "sofa", "ottoman"],
    "houseplant": ["sidetable", "shelf", "diningtable"],
    "desklamp": ["desk", "nightstand", "sidetable"],
    "cloth": ["bathtub", "laundryhamper"],
    # fixed furniture groupings
    "faucet": ["sink", "bathtub"],
    "stoveburner": ["countertop"],
    "microwave": ["countertop"],
    "toaster": ["countertop"],
    "coffeemachine": ["countertop"],
    "sink": ["countertop"],
    "television": ["tvstand"],
    "mirror": ["sink", "dresser"],
    "floorlamp": ["sofa", "armchair"],
    "nightstand": ["bed"],
    "showerhead": ["bathtub"],
    "toiletpaperhanger": ["toilet"],
    "towelholder": ["bathtub"],
    "painting": ["sofa"],
    "ottoman": ["sofa", "armchair"],
    "garbagecan": ["countertop", "desk"],
    "laundryhamper": ["dresser"],
    "window": ["sofa", "desk"],
    "lightswitch": ["cabinet"],
}

PREDICATES = ["on", "in", "near", "next_to", "beside", "on_top_of"]


def household_ontology():
    kinds = {n: "receptacle" for n in RECEPTACLES}
    kinds.update({n: "stationary" for n in FIXTURES})
    kinds.update({n: "movable" for n in MOVABLES})
    return Ontology(sorted(kinds), kinds)


def household_corpus(seed=0, noise_pairs=900):
    """Triples for the household ontology.

    Each affinity pair gets 1-3 records whose counts sum to 5..40; noise
    pairs get a single record of count 1 or 2, so on their own they stay at
    or under the edge threshold.
    """
    rng = np.random.default_rng(seed)
    names = household_ontology().names
    triples = []
    seen = set()
    for subj in sorted(AFFINITY):
        for obj in AFFINITY[subj]:
            seen.add(frozenset((subj, obj)))
            total = int(rng.integers(5, 41))
            k = int(rng.integers(1, 4))
            cuts = np.sort(rng.choice(np.arange(1, total), size=k - 1, replace=False)) if k > 1 else []
            parts = np.diff(np.concatenate([[0], cuts, [total]])).astype(int)
            preds = rng.choice(PREDICATES, size=k, replace=False)
            for p, c in zip(preds, parts):
                a, b = (subj, obj) if rng.random() < 0.7 else (obj, subj)
                triples.append(RelationTriple(a, str(p), b, int(c)))
    added = 0
    while added < noise_pairs:
        i, j = rng.choice(len(names), size=2, replace=False)
        a, b = names[i], names[j]
        if frozenset((a, b)) in seen:
            continue
        seen.add(frozenset((a, b)))
        triples.append(RelationTriple(a, str(rng.choice(PREDICATES)), b, int(rng.integers(1, 3))))
        added += 1
    return triples


def planted_partition_corpus(n_nodes=40, n_communities=4, p_in=0.9, p_out=0.02, seed=0):
    """Community graph as a triple list; returns (ontology, triples, membership)."""
    rng = np.random.default_rng(seed)
    names = [f"cat{i:03d}" for i in range(n_nodes)]
    membership = np.arange(n_nodes) % n_communities
    triples = []
    for i, j in itertools.combinations(range(n_nodes), 2):
        p = p_in if membership[i] == membership[j] else p_out
        if rng.random() < p:
            triples.append(RelationTriple(names[i], "near", names[j], int(rng.integers(4, 20))))
    return Ontology(names), triples, membership


def write_corpus(triples, path, header=None):
    lines = []
    if header:
        lines.append(f"# {header}")
    lines += [f"{t.subject}\t{t.predicate}\t{t.object}\t{t.count}" for t in triples]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ontology(ontology, path):
    with open(path, "w", encoding="utf-8") as fh:
        for name in ontology:
            fh.write(f"{name}\t{ontology.kind(name)}\n")
