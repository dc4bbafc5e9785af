"""
synthetic networks for scaling runs.
"""

from src.case.model import Branch, Bus, Case, Generator

GENERATOR_SPACING = 7


def chain_case(n_buses: int, load: float = 0.1, capacity: float = 2.0) -> Case:
    """
    a chain 1-2-...-n with a unit load on every bus and a generator every
    few buses (per-unit values, 100 MVA base).
    """
    if n_buses < 2:
        raise ValueError("a chain needs at least two buses")
    buses = tuple(Bus(id=i, load=load) for i in range(1, n_buses + 1))
    generators = tuple(
        Generator(
            id=f"G{i}",
            bus=i,
            a=10.0 + (i % 5),
            b=100.0 + 3.0 * (i % 11),
            c=0.0,
            p_min=0.0,
            p_max=load * GENERATOR_SPACING * 2.0,
        )
        for i in range(1, n_buses + 1, GENERATOR_SPACING)
    )
    branches = tuple(
        Branch(id=f"br{i:06d}", from_bus=i, to_bus=i + 1, capacity=capacity, reactance=0.1)
        for i in range(1, n_buses)
    )
    return Case(base_mva=100.0, buses=buses, generators=generators, branches=branches)
