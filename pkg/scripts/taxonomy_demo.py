"""Classify the built-in model families and run the structural check suite.

Usage::

    python3 scripts/taxonomy_demo.py
"""
from __future__ import annotations

import numpy as np

from irtax import (AdjacentItem, CumulativeItem, HierarchicalPartition, NominalItem, SequentialItem,
                   check_symmetry, classify)
from irtax.checks import run_suite
from irtax.trees import agree_extremity_tree, neutral_first_tree, sequential_as_tree

D = (-1.0, 0.0, 1.0)
MODELS = {
    "graded (cumulative)": CumulativeItem(D),
    "partial credit (adjacent)": AdjacentItem(D),
    "sequential": SequentialItem(D),
    "sequential as a tree": sequential_as_tree(SequentialItem(D)),
    "nominal": NominalItem((1.0, 2.0, 3.0), (0.2, -0.1, 0.4)),
    "agree/extremity tree": agree_extremity_tree(),
    "neutral-first tree": neutral_first_tree(),
    "two-level partition": HierarchicalPartition(6, 3, 0.0, (-1.0, 1.0), (-1.0, 1.0)),
}


def main():
    width = max(map(len, MODELS))
    print(f"{'model':{width}}  conditioning  hierarchy         symmetry    ordinality")
    for name, model in MODELS.items():
        c = classify(model)
        print(f"{name:{width}}  {c['conditioning']:12}  {c['hierarchy']:16}  {c['symmetry']:10}"
              f"  {c['ordinality']}")
        sym = check_symmetry(model)
        if sym.witness is not None:
            print(f"{'':{width}}  asymmetry witness: {sym.witness.describe()}")

    print("\ncategory probabilities at theta = 0.5")
    for name, model in MODELS.items():
        p = np.asarray(model.probs(0.5))
        print(f"{name:{width}}  " + " ".join(f"{v:.4f}" for v in p))

    print("\nstructural checks")
    for rep in run_suite():
        print(rep.text())


if __name__ == "__main__":
    main()
