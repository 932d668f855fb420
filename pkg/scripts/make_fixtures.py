"""Regenerate the instruction-following fixture worlds in cosearch/data/fixtures."""

import json
from pathlib import Path

from cosearch.world import GridWorld, MovableObject, RobotState, StationaryObject, world_to_dict

OUT = Path(__file__).resolve().parents[1] / "src" / "cosearch" / "data" / "fixtures"


def rect(c0, c1, r0, r1):
    return tuple((c, r) for c in range(c0, c1 + 1) for r in range(r0, r1 + 1))


KITCHEN = (
    StationaryObject("countertop", rect(2, 9, 0, 1), True),
    StationaryObject("sink", rect(11, 13, 0, 1), True),
    StationaryObject("faucet", rect(14, 14, 0, 0)),
    StationaryObject("stoveburner", rect(17, 19, 0, 1), True),
    StationaryObject("microwave", rect(21, 22, 0, 1), True),
    StationaryObject("toaster", rect(24, 24, 0, 0), True),
    StationaryObject("coffeemachine", rect(26, 27, 0, 0), True),
    StationaryObject("fridge", rect(0, 1, 8, 11), True),
    StationaryObject("diningtable", rect(12, 17, 11, 14), True),
    StationaryObject("shelf", rect(26, 27, 14, 18), True),
    StationaryObject("garbagecan", rect(0, 0, 18, 18), True),
)

FIXTURES = {
    "cut": ("cut the bread with a knife", "knife",
            [MovableObject("knife", (2, 0), "countertop"), MovableObject("bread", (12, 11), "diningtable", True)]),
    "cook": ("cook the egg with the stoveburner", "egg",
             [MovableObject("egg", (0, 8), "fridge"), MovableObject("tomato", (2, 0), "countertop", True)]),
    "clean": ("clean the mug inside the sink", "mug",
              [MovableObject("mug", (26, 0), "coffeemachine"), MovableObject("plate", (12, 11), "diningtable", True)]),
    "pick_place": ("pick the apple and place it on the plate", "apple",
                   [MovableObject("apple", (12, 11), "diningtable"), MovableObject("plate", (2, 0), "countertop", True)]),
}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, (text, hidden, movable) in FIXTURES.items():
        world = GridWorld(28, 20, frozenset(), KITCHEN, tuple(movable), hidden, RobotState((23, 8), 180), 0)
        data = world_to_dict(world)
        data["instruction"] = text
        (OUT / f"{name}.json").write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
