"""Built-in experiment configs, one per reproduced number."""

from __future__ import annotations

import copy
import math

K_FLAT = 2 * math.pi / 3

RECIPES: dict[str, dict] = {
    "kagome-flat-band": {
        "command": "floquet",
        "params": {"grid": 64},
    },
    "comb-jump-one-third": {
        "command": "comb-ids",
        "params": {"sizes": [8, 16, 32], "target": 1 / 3},
    },
    "metric-jump-sixth": {
        "command": "jump",
        "graph": {"lattice": "kagome", "n": 4},
        "params": {"lam": K_FLAT ** 2, "target": 1 / 6},
    },
    "metric-jump-half": {
        "command": "jump",
        "graph": {"lattice": "kagome", "n": 4},
        "params": {"lam": math.pi ** 2, "target": 0.5},
    },
    "contrast-kagome": {
        "command": "jump",
        "graph": {"lattice": "kagome", "n": 10},
        "model": {"l_min": 0.8, "l_max": 1.25, "family": "cos2"},
        "params": {"lam": K_FLAT ** 2, "target": 1 / 6, "eps": [0.4, 0.2, 0.1, 0.05],
                   "random_n": 4, "samples": 50},
    },
    "line-ids": {
        "command": "ids",
        "graph": {"lattice": "chain", "n": 200},
        "params": {"energies": {"start": 1.0, "stop": 30.0, "num": 2901}},
    },
    "exhaustion-kagome": {
        "command": "exhaustion",
        "graph": {"lattice": "kagome"},
        "params": {"sizes": [2, 4, 8],
                   "energies": [1.0, 2.0, 3.0, 6.0, 7.0, 8.0, 12.0, 14.0, 16.0, 20.0]},
    },
    "wegner-kagome": {
        "command": "wegner",
        "graph": {"lattice": "kagome", "n": 3, "box": "induced"},
        "model": {"l_min": 0.8, "l_max": 1.25, "family": "cos2"},
        "params": {"u": 30.0, "centers": [4.386], "widths": [0.4, 0.2, 0.1, 0.05],
                   "samples": 200, "contrast": True},
    },
}


def list_recipes() -> list[str]:
    return sorted(RECIPES)


def get_recipe(name: str) -> dict:
    try:
        return copy.deepcopy(RECIPES[name])
    except KeyError:
        raise KeyError(f"unknown recipe {name!r}; available: {', '.join(list_recipes())}") from None
