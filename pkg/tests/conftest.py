"""Shared scenario builders for the pipeline and acceptance suites."""

import numpy as np
import pytest

from camsel.scenario import ClassSpec, PartSpec, SyntheticScenario


def two_block_scenario(images_per_class=2, layers=1):
    """Six classes in two confusion blocks of three; every object splits into
    an "own-block" part and a "cross-block" part, so any selection with one
    representative per block covers the whole object."""
    n = 6
    blocks = [(0, 1, 2), (3, 4, 5)]
    classes = []
    for i in range(n):
        own = next(b for b in blocks if i in b)
        other = next(b for b in blocks if i not in b)
        siblings = tuple(j for j in own if j != i)
        # Left third of the object vs in-block classes, right two thirds vs
        # the other block: single-pair IoUs are 1/3 and 2/3, fused is 1.0.
        classes.append(
            ClassSpec(
                name=f"c{i}",
                object_rects=((8, 6, 20, 24),),
                parts=(
                    PartSpec(rect=(8, 6, 20, 12), against=siblings),
                    PartSpec(rect=(8, 12, 20, 24), against=tuple(other)),
                ),
                confusion={j: 0.2 for j in siblings},
            )
        )
    return SyntheticScenario(
        image_height=32,
        image_width=32,
        images_per_class=images_per_class,
        layers=layers,
        classes=tuple(classes),
    )


@pytest.fixture
def scenario_six():
    return two_block_scenario()


def run_config_doc(out_root, scenario_dir, results_dir, **overrides):
    doc = {
        "class_names": [f"c{i}" for i in range(6)],
        "num_clusters": 2,
        "min_cluster_size": 2,
        "cluster_k": 1,
        "selection_mode": "cluster",
        "threshold": 0.15,
        "seed": 7,
        "probability_log": str(scenario_dir / "probs.csv"),
        "dump_dir": str(scenario_dir / "dumps"),
        "groundtruth_dir": str(scenario_dir / "gt"),
        "output_dir": str(results_dir),
        "layer_mode": "multi",
    }
    doc.update(overrides)
    return doc
