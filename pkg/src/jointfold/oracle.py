"""Brute-force reference: exhaustive enumeration with exact weighted sums.

This module is the arbiter for every correctness claim about the dynamic
programming engine.  It never touches the decomposition grammar: structures
are generated by backtracking (interior arcs of each strand, then monotone
exterior matchings), validity is enforced with :mod:`jointfold.seq_model`
predicates, and weights are computed geometrically from the structure's
feature multiset via :func:`score_structure`, using only energy-model
primitives.  Any pricing divergence between the engine's parse-factored
weights and this scorer fails the weighted-equivalence tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .energy import EnergyModel, weight_hybrid_step
from .seq_model import (
    Hybrid,
    JointStructure,
    Strand,
    extract_hybrids,
    is_zigzag_free,
)

__all__ = [
    "OracleLimits",
    "LimitExceeded",
    "EnsembleReport",
    "enumerate_interactions",
    "exact_probabilities",
    "score_structure",
    "enumerate_secondary",
    "score_secondary",
]


class LimitExceeded(RuntimeError):
    """Enumeration hit the configured structure budget."""

    def __init__(self, count_so_far: int, limit: int):
        self.count_so_far = count_so_far
        self.limit = limit
        super().__init__(
            f"more than {limit} structures (at least {count_so_far} found)"
        )


@dataclass(frozen=True)
class OracleLimits:
    max_structures: int = 10_000_000


@dataclass
class EnsembleReport:
    """Exhaustive ensemble summary.

    Attributes:
        count: Number of valid joint structures (>= 1; the empty one).
        weighted_sum: Exact partition function under the model.
        structures: (structure, weight) pairs when retained.
        bpp_r / bpp_s / bpp_ext: Summed weights of structures containing
            each arc (divide by ``weighted_sum`` for probabilities).
        hybrid_mass: Summed weights by exact maximal-hybrid footprint
            (i, j, h, l).
        target_mass_r / target_mass_s: Footprint masses aggregated over the
            partner strand.
    """

    n: int
    m: int
    count: int = 0
    weighted_sum: float = 0.0
    structures: list = field(default_factory=list)
    bpp_r: dict = field(default_factory=dict)
    bpp_s: dict = field(default_factory=dict)
    bpp_ext: dict = field(default_factory=dict)
    hybrid_mass: dict = field(default_factory=dict)
    target_mass_r: dict = field(default_factory=dict)
    target_mass_s: dict = field(default_factory=dict)


# -- structure scoring (the shared pricing semantics) -----------------------


def _direct_content(arcs: list[tuple[int, int]], span: tuple[int, int]):
    """Branches directly inside ``span`` and the directly-unpaired positions."""
    a, b = span
    inner = [arc for arc in arcs if a < arc[0] and arc[1] < b]
    branches = [
        arc
        for arc in inner
        if not any(o[0] < arc[0] and arc[1] < o[1] for o in inner)
    ]
    covered = set()
    for (p, q) in branches:
        covered.update(range(p, q + 1))
    direct = [p for p in range(a + 1, b) if p not in covered]
    return branches, direct


def _strand_loops(
    model: EnergyModel,
    seq: str,
    arcs: list[tuple[int, int]],
    ext_positions: set[int],
    gap_positions: set[int],
) -> float:
    """Product of loop weights over one strand's interior arcs."""
    w = 1.0
    for (a, b) in arcs:
        branches, direct = _direct_content(arcs, (a, b))
        kissing = any(a < p < b for p in ext_positions)
        if kissing:
            w *= model.w_kiss_init
            w *= model.w_kiss_branch ** len(branches)
            plain = [
                p for p in direct if p not in ext_positions and p not in gap_positions
            ]
            w *= model.w_kiss_unpaired ** len(plain)
        elif not branches:
            w *= model.w_hairpin(b - a - 1)
        elif len(branches) == 1:
            (p, q) = branches[0]
            if p == a + 1 and q == b - 1:
                w *= model.w_stack(seq[a - 1] + seq[b - 1], seq[p - 1] + seq[q - 1])
            else:
                w *= model.w_interior(p - a - 1, b - q - 1)
        else:
            w *= model.w_multi_init
            w *= model.w_multi_branch ** len(branches)
            w *= model.w_multi_unpaired ** len(direct)
    return w


def _hybrid_context(
    hyb: Hybrid,
    interior_r: list[tuple[int, int]],
    interior_s: list[tuple[int, int]],
) -> str:
    i1 = hyb.footprint_r[0]
    h1 = hyb.footprint_s[0]
    side_r = "K" if any(a < i1 < b for (a, b) in interior_r) else "E"
    side_s = "K" if any(a < h1 < b for (a, b) in interior_s) else "E"
    return side_r + side_s


def score_structure(
    R: Strand, S: Strand, js: JointStructure, model: EnergyModel
) -> float:
    """Boltzmann weight of one structure from its feature multiset.

    Decomposition-independent: loops are classified geometrically (kissing
    when the closing arc spans an exterior endpoint, standard hairpin /
    stack / interior / multi otherwise), exterior arcs and hybrid extension
    steps are priced per arc and per step.
    """
    arcs_r = sorted(js.interior_r)
    arcs_s = sorted(js.interior_s)
    hybrids = extract_hybrids(js)
    gap_r: set[int] = set()
    gap_s: set[int] = set()
    for hyb in hybrids:
        for (a1, b1), (a2, b2) in zip(hyb.arcs, hyb.arcs[1:]):
            gap_r.update(range(a1 + 1, a2))
            gap_s.update(range(b1 + 1, b2))
    ext_r = {i for i, _ in js.exterior}
    ext_s = {h for _, h in js.exterior}

    w = _strand_loops(model, R.residues, arcs_r, ext_r, gap_r)
    w *= _strand_loops(model, S.residues, arcs_s, ext_s, gap_s)
    for (i, h) in js.exterior:
        w *= model.w_ext(R.base(i), S.base(h))
    for hyb in hybrids:
        ctx = _hybrid_context(hyb, arcs_r, arcs_s)
        for (i1, h1), (j, l) in zip(hyb.arcs, hyb.arcs[1:]):
            w *= weight_hybrid_step(model, i1, h1, j, l, ctx)
    return w


# -- generators --------------------------------------------------------------


def _interior_sets(seq: str, model: EnergyModel) -> list[tuple[tuple[int, int], ...]]:
    """All non-crossing admissible interior-arc sets of one strand."""
    n = len(seq)

    def adm(i: int, j: int) -> bool:
        return j - i - 1 >= model.min_hairpin and model.pairable(
            seq[i - 1], seq[j - 1]
        )

    memo: dict[tuple[int, int], list] = {}

    def rec(i: int, j: int):
        if i >= j:
            return [()]
        key = (i, j)
        if key in memo:
            return memo[key]
        out = [s for s in rec(i + 1, j)]
        for k in range(i + 1, j + 1):
            if adm(i, k):
                for inside in rec(i + 1, k - 1):
                    for outside in rec(k + 1, j):
                        out.append(((i, k),) + inside + outside)
        memo[key] = out
        return out

    return rec(1, n)


def _lone_helix_free(arcs: tuple[tuple[int, int], ...], ext_positions: set[int]) -> bool:
    """Lone-pair rule: maximal helices of non-covering arcs have length >= 2.

    Covering status is constant along a stacked helix, so checking the arcs
    individually is sound.
    """
    arc_set = set(arcs)
    for (a, b) in arcs:
        if any(a < p < b for p in ext_positions):
            continue
        if (a + 1, b - 1) not in arc_set and (a - 1, b + 1) not in arc_set:
            return False
    return True


def _ext_matchings(
    free_r: list[int], free_s: list[int], pairable
) -> list[tuple[tuple[int, int], ...]]:
    """All monotone exterior matchings over free positions (incl. empty)."""
    out: list[tuple[tuple[int, int], ...]] = []
    cur: list[tuple[int, int]] = []

    def rec(a: int, b: int) -> None:
        out.append(tuple(cur))
        for x in range(a, len(free_r)):
            for y in range(b, len(free_s)):
                if pairable(free_r[x], free_s[y]):
                    cur.append((free_r[x], free_s[y]))
                    rec(x + 1, y + 1)
                    cur.pop()

    rec(0, 0)
    return out


def enumerate_interactions(
    R: Strand,
    S: Strand,
    model: EnergyModel,
    limits: OracleLimits | None = None,
    keep_structures: bool = True,
) -> EnsembleReport:
    """Enumerate every valid joint structure exactly once, with marginals.

    Backtracks over interior arcs of R, interior arcs of S and non-crossing
    exterior matchings, pruning by validity (only the zig-zag rule can still
    fail for generated candidates).  Weights come from
    :func:`score_structure` so the scorer is shared with nothing in the
    engine except the energy model itself.

    Raises:
        LimitExceeded: when the count passes ``limits.max_structures``.
    """
    limits = limits or OracleLimits()
    n, m = len(R), len(S)
    report = EnsembleReport(n=n, m=m)
    sets_r = _interior_sets(R.residues, model)
    sets_s = _interior_sets(S.residues, model)
    seen: set = set()

    def pairable(i: int, h: int) -> bool:
        return model.pairable(R.base(i), S.base(h))

    for ir in sets_r:
        paired_r = {p for arc in ir for p in arc}
        free_r = [p for p in range(1, n + 1) if p not in paired_r]
        for is_ in sets_s:
            paired_s = {p for arc in is_ for p in arc}
            free_s = [p for p in range(1, m + 1) if p not in paired_s]
            for ext in _ext_matchings(free_r, free_s, pairable):
                js = JointStructure(
                    n=n, m=m, interior_r=frozenset(ir), interior_s=frozenset(is_),
                    exterior=ext,
                )
                if not is_zigzag_free(js):
                    continue
                ext_r = {i for i, _ in ext}
                ext_s = {h for _, h in ext}
                if model.forbid_lone_pairs and not (
                    _lone_helix_free(ir, ext_r) and _lone_helix_free(is_, ext_s)
                ):
                    continue
                key = js.key()
                assert key not in seen, "duplicate structure generated"
                seen.add(key)
                w = score_structure(R, S, js, model)
                report.count += 1
                if report.count > limits.max_structures:
                    raise LimitExceeded(report.count, limits.max_structures)
                report.weighted_sum += w
                if keep_structures:
                    report.structures.append((js, w))
                for arc in js.interior_r:
                    report.bpp_r[arc] = report.bpp_r.get(arc, 0.0) + w
                for arc in js.interior_s:
                    report.bpp_s[arc] = report.bpp_s.get(arc, 0.0) + w
                for arc in ext:
                    report.bpp_ext[arc] = report.bpp_ext.get(arc, 0.0) + w
                for hyb in extract_hybrids(js):
                    cell = hyb.footprint_r + hyb.footprint_s
                    report.hybrid_mass[cell] = report.hybrid_mass.get(cell, 0.0) + w
                    fr = hyb.footprint_r
                    fs = hyb.footprint_s
                    report.target_mass_r[fr] = report.target_mass_r.get(fr, 0.0) + w
                    report.target_mass_s[fs] = report.target_mass_s.get(fs, 0.0) + w
    return report


def exact_probabilities(report: EnsembleReport) -> dict:
    """Normalise the report's masses into exact probability tables."""
    z = report.weighted_sum
    return {
        "structures": [(js, w / z) for js, w in report.structures],
        "bpp_r": {k: v / z for k, v in report.bpp_r.items()},
        "bpp_s": {k: v / z for k, v in report.bpp_s.items()},
        "bpp_ext": {k: v / z for k, v in report.bpp_ext.items()},
        "p_hy": {k: v / z for k, v in report.hybrid_mass.items()},
        "p_tar_r": {k: v / z for k, v in report.target_mass_r.items()},
        "p_tar_s": {k: v / z for k, v in report.target_mass_s.items()},
    }


# -- single-strand reference -------------------------------------------------


def score_secondary(seq: str, arcs: tuple[tuple[int, int], ...], model: EnergyModel) -> float:
    """Weight of a plain secondary structure (no exterior arcs)."""
    return _strand_loops(model, seq, sorted(arcs), set(), set())


def enumerate_secondary(strand: Strand, model: EnergyModel):
    """All secondary structures of one strand with exact weights."""
    out = []
    total = 0.0
    for arcs in _interior_sets(strand.residues, model):
        if model.forbid_lone_pairs and not _lone_helix_free(arcs, set()):
            continue
        w = score_secondary(strand.residues, arcs, model)
        out.append((arcs, w))
        total += w
    return len(out), total, out
