import os

import numpy as np
import pytest

from src.case.model import Branch, Bus, Case, Contingency, Generator
from src.case.parser import load_case

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "data")
CASE14_PATH = os.path.join(DATA_DIR, "case14.json")


def make_case(buses, generators, branches, contingencies=()):
    """builds a per-unit case (base 1 MVA) from plain tuples."""
    return Case(
        base_mva=1.0,
        buses=tuple(Bus(id=i, load=d) for i, d in buses),
        generators=tuple(
            Generator(id=g, bus=b, a=a, b=lin, c=c, p_min=lo, p_max=hi)
            for g, b, a, lin, c, lo, hi in generators
        ),
        branches=tuple(
            Branch(id=br, from_bus=f, to_bus=t, capacity=cap, reactance=x)
            for br, f, t, cap, x in branches
        ),
        contingencies=tuple(Contingency(id=c, outaged_branch=b) for c, b in contingencies),
    )


def two_bus(capacity):
    """g^2 at bus 1, 2g^2 at bus 2, 1.0 pu load at bus 2."""
    return make_case(
        buses=[(1, 0.0), (2, 1.0)],
        generators=[("G1", 1, 1.0, 0.0, 0.0, 0.0, 2.0), ("G2", 2, 2.0, 0.0, 0.0, 0.0, 2.0)],
        branches=[("br1-2", 1, 2, capacity, 0.1)],
    )


@pytest.fixture
def single_bus_case():
    """one bus, one unit, no branches."""
    return make_case(
        buses=[(1, 1.0)],
        generators=[("G1", 1, 1.0, 0.0, 5.0, 0.0, 10.0)],
        branches=[],
    )


@pytest.fixture
def two_bus_case():
    return two_bus(10.0)


@pytest.fixture
def two_bus_congested_case():
    return two_bus(0.3)


@pytest.fixture
def three_bus_case():
    """
    load 1.0 pu at bus 3 fed from units at buses 1 and 2.
    contingencies take out branch 1-3 and branch 1-2.
    """
    return make_case(
        buses=[(1, 0.0), (2, 0.0), (3, 1.0)],
        generators=[("G1", 1, 1.0, 0.0, 0.0, 0.0, 2.0), ("G2", 2, 2.0, 0.0, 0.0, 0.0, 2.0)],
        branches=[
            ("br1-2", 1, 2, 0.4, 0.1),
            ("br1-3", 1, 3, 0.5, 0.1),
            ("br2-3", 2, 3, 1.2, 0.1),
        ],
        contingencies=[("out-1-3", "br1-3"), ("out-1-2", "br1-2")],
    )


@pytest.fixture
def case14():
    return load_case(CASE14_PATH)


def random_case(rng, n_buses, n_generators):
    """
    a random connected case: a chain 1-2-...-n closed by a branch 1-n.
    capacities are random, so callers check feasibility with the oracle.
    """
    loads = np.round(rng.uniform(0.0, 1.0, n_buses), 3)
    total = float(np.sum(loads))
    gen_buses = rng.choice(np.arange(1, n_buses + 1), size=n_generators, replace=False)
    generators = []
    for k, bus in enumerate(sorted(int(b) for b in gen_buses)):
        generators.append((
            f"G{k + 1}", bus,
            float(np.round(rng.uniform(0.2, 2.0), 3)),
            float(np.round(rng.uniform(0.0, 2.0), 3)),
            0.0,
            0.0,
            float(np.round(total, 3)) + 0.5,
        ))
    branches = [
        (f"br{i}-{i + 1}", i, i + 1, float(np.round(rng.uniform(0.2, total + 0.5), 3)), 0.1)
        for i in range(1, n_buses)
    ]
    if n_buses >= 3:
        branches.append((f"br1-{n_buses}", 1, n_buses, float(np.round(rng.uniform(0.1, 0.8), 3)), 0.1))
    return make_case(
        buses=[(i + 1, float(loads[i])) for i in range(n_buses)],
        generators=generators,
        branches=branches,
    )
