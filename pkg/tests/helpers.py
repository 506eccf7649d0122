"""Shared test utilities: random sequences and randomized-weight models."""

from __future__ import annotations

import numpy as np

from jointfold.energy import EnergyModel

BASES = "ACGU"


def random_seq(rng: np.random.Generator, length: int) -> str:
    return "".join(rng.choice(list(BASES)) for _ in range(length))


def au_rich_seq(rng: np.random.Generator, length: int) -> str:
    return "".join(rng.choice(["A", "U"]) for _ in range(length))


def random_model(rng: np.random.Generator, min_hairpin: int = 3,
                 **overrides) -> EnergyModel:
    """Positive randomized feature weights (energies in a tame range)."""

    def e() -> float:
        return float(rng.uniform(-1.2, 1.8))

    fields = dict(
        rt=1.0,
        min_hairpin=min_hairpin,
        hairpin_init=e(),
        hairpin_slope=float(rng.uniform(0.0, 0.6)),
        interior_init=e(),
        interior_slope=float(rng.uniform(0.0, 0.6)),
        stack_default=e(),
        multi_init=e(),
        multi_branch=e(),
        multi_unpaired=float(rng.uniform(0.0, 0.8)),
        kiss_init=e(),
        kiss_branch=e(),
        kiss_unpaired=float(rng.uniform(0.0, 0.8)),
        sigma0=e(),
        sigma=float(rng.uniform(0.2, 1.5)),
        beta3=float(rng.uniform(0.0, 0.9)),
        g_int_init=e(),
        g_int_slope=float(rng.uniform(0.0, 0.5)),
        ext_default=e(),
        stack_overrides={("GC", "CG"): e(), ("AU", "UA"): e()},
        ext_overrides={("G", "C"): e()},
    )
    fields.update(overrides)
    return EnergyModel(**fields)
