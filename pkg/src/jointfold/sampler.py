"""Stochastic traceback: exact Boltzmann samples of joint structures.

Two-stack scheme: stack A holds pending components (sub-joint structures
with their grammar kind), stack B collects the arcs fixed so far.  At each
component the case distribution is the partition-function ratio of the
mutually exclusive decomposition cases, drawn with a single uniform against
prefix sums.  The next component is taken from the *bottom* of stack A
(FIFO); the traversal order does not affect the sampled distribution.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._cases import case_value, component_cases, component_value
from .grammar_inside import InsideResult
from .seq_model import JointStructure

__all__ = [
    "NumericalUnderflow",
    "SampleBatch",
    "sample_one",
    "sample_batch",
]


class NumericalUnderflow(RuntimeError):
    """A case distribution failed to normalise (inside tables corrupt)."""


@dataclass(frozen=True)
class SampleBatch:
    """Reproducible batch of sampled structures."""

    structures: tuple[JointStructure, ...]
    seed: int
    model_fingerprint: str
    draw_count: int


def sample_one(res: InsideResult, rng: np.random.Generator) -> JointStructure:
    """Draw one joint structure with probability weight/Q_total.

    Raises:
        NumericalUnderflow: if a visited component's cases do not sum to its
            stored value within 1e-6 relative.
    """
    if res.q_total <= 0.0:
        raise NumericalUnderflow("empty ensemble")
    stack_a: deque[tuple] = deque([("top",)])
    interior_r: list[tuple[int, int]] = []
    interior_s: list[tuple[int, int]] = []
    exterior: list[tuple[int, int]] = []

    while stack_a:
        comp = stack_a.popleft()  # bottom of stack A
        kind = comp[0]
        if kind == "unp":
            continue
        if kind == "sec":
            _, sid, table, i, j = comp
            if j < i:
                continue
            arcs: list[tuple[int, int]] = []
            eng = (res.sec_r if sid == "R" else res.sec_s).engine
            eng.sample(table, i, j, rng, arcs)
            (interior_r if sid == "R" else interior_s).extend(arcs)
            continue

        total = component_value(res, comp)
        cases = component_cases(res, comp)
        values = [case_value(res, case) for case in cases]
        acc = float(sum(values))
        if not np.isfinite(acc) or abs(acc - total) > 1e-6 * max(abs(total), 1e-300):
            raise NumericalUnderflow(
                f"component {comp}: cases sum to {acc!r}, table holds {total!r}"
            )
        u = rng.random() * acc
        running = 0.0
        chosen = None
        for case, v in zip(cases, values):
            if v <= 0.0:
                continue
            running += v
            chosen = case
            if u <= running:
                break
        if chosen is None:
            raise NumericalUnderflow(f"component {comp}: no positive case")
        _w, children, emissions = chosen
        for em in emissions:
            if em[0] == "ext":
                exterior.append((em[1], em[2]))
            elif em[0] == "arc_r":
                interior_r.append((em[1], em[2]))
            else:
                interior_s.append((em[1], em[2]))
        stack_a.extend(children)

    return JointStructure(
        n=res.ctx.n,
        m=res.ctx.m,
        interior_r=frozenset(interior_r),
        interior_s=frozenset(interior_s),
        exterior=tuple(sorted(exterior)),
    )


def sample_batch(res: InsideResult, n: int, seed: int) -> SampleBatch:
    """Draw ``n`` independent structures, reproducibly for a fixed seed.

    Each draw runs on its own generator spawned from the seed, so draws are
    independent and could execute concurrently without changing the batch.

    Raises:
        ValueError: n < 1.
        NumericalUnderflow: from any draw, annotated with the draw index.
    """
    if n < 1:
        raise ValueError("sample count must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(n)
    out = []
    for idx, ss in enumerate(streams):
        rng = np.random.Generator(np.random.PCG64(ss))
        try:
            out.append(sample_one(res, rng))
        except NumericalUnderflow as exc:
            raise NumericalUnderflow(f"draw {idx}: {exc}") from exc
    return SampleBatch(
        structures=tuple(out),
        seed=seed,
        model_fingerprint=res.model.fingerprint(),
        draw_count=n,
    )
