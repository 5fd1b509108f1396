"""Shared fixtures: canonical facade documents and a random tree generator."""

from __future__ import annotations

import json

import numpy as np
import pytest

from prodg.grammar import DEFAULT_CATEGORY_TABLE, ProcNode, Procedure, parse_procedure

TERMINALS = ["wall", "window", "door", "balcony", "roof", "shop", "sky"]
NONTERMINALS = ["floor", "column"]


def floor_node(n_windows: int = 1) -> dict:
    children = [{"weight": 1, "category": "wall"}]
    for _ in range(n_windows):
        children.append({"weight": 1, "category": "window"})
        children.append({"weight": 1, "category": "wall"})
    return {"category": "floor", "split": "h", "children": children}


def facade_doc(n_floors: int = 3, n_windows: int = 1, image_size=(512, 512)) -> str:
    """The canonical toy facade: a vertical stack of window floors."""
    floors = [dict(floor_node(n_windows), weight=1) for _ in range(n_floors)]
    return json.dumps(
        {
            "image_size": list(image_size),
            "categories": "default",
            "root": {"category": "facade", "split": "v", "children": floors},
        }
    )


@pytest.fixture
def facade3() -> Procedure:
    return parse_procedure(facade_doc(3))


def random_procedure(
    rng: np.random.Generator,
    max_symbols: int = 50,
    max_depth: int = 3,
    image_size=(64, 64),
) -> Procedure:
    """A random valid procedure with at most ``max_symbols`` nodes."""
    budget = [max_symbols - 1]

    def make_node(depth: int) -> ProcNode:
        make_leaf = depth >= max_depth or budget[0] < 2 or rng.random() < 0.25 * depth
        if make_leaf and depth > 0:
            return ProcNode(str(rng.choice(TERMINALS)))
        n_children = int(rng.integers(1, 5))
        n_children = min(n_children, max(1, budget[0]))
        budget[0] -= n_children
        split = "v" if rng.random() < 0.5 else "h"
        children = []
        for _ in range(n_children):
            weight = float(np.round(rng.uniform(0.5, 3.0), 3))
            children.append((weight, make_node(depth + 1)))
        category = "facade" if depth == 0 else str(rng.choice(NONTERMINALS))
        return ProcNode(category, split, children)

    return Procedure(image_size, make_node(0), DEFAULT_CATEGORY_TABLE)
