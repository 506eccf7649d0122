from __future__ import annotations

import math

import numpy as np
import pytest

from jointfold.energy import unit_model
from jointfold.oracle import (
    LimitExceeded,
    OracleLimits,
    enumerate_interactions,
    exact_probabilities,
    score_structure,
)
from jointfold.seq_model import JointStructure, Strand, extract_hybrids, validate

from helpers import random_model, random_seq


def strands(r: str, s_internal: str):
    return Strand.query(r), Strand.target_internal(s_internal)


class TestCounts:
    def test_single_pairable_position(self):
        R, S = strands("A", "U")
        report = enumerate_interactions(R, S, unit_model())
        assert report.count == 2  # empty + one arc

    def test_triple_a_u(self):
        R, S = strands("AAA", "UUU")
        report = enumerate_interactions(R, S, unit_model())
        # no intramolecular pairs possible: monotone matchings = C(6,3)
        assert report.count == 20

    def test_every_structure_is_valid(self):
        R, S = strands("GACU", "AGUC")
        report = enumerate_interactions(R, S, unit_model(min_hairpin=0))
        assert report.count == len(report.structures)
        for js, _w in report.structures:
            assert validate(js, min_hairpin=0).valid

    def test_limit_exceeded(self):
        R, S = strands("AAA", "UUU")
        with pytest.raises(LimitExceeded) as err:
            enumerate_interactions(R, S, unit_model(), OracleLimits(max_structures=5))
        assert err.value.count_so_far == 6

    def test_weighted_sum_counts_under_unit_model(self):
        R, S = strands("GAC", "GUC")
        report = enumerate_interactions(R, S, unit_model(min_hairpin=0))
        assert report.weighted_sum == pytest.approx(report.count)


class TestMarginals:
    def test_bpp_ext_corner(self):
        R, S = strands("AAA", "UUU")
        probs = exact_probabilities(enumerate_interactions(R, S, unit_model()))
        # structures containing arc (1,1): matchings of the remaining 2x2 grid
        assert probs["bpp_ext"][(1, 1)] == pytest.approx(6 / 20)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(2)
        R, S = strands(random_seq(rng, 4), random_seq(rng, 4))
        report = enumerate_interactions(R, S, random_model(rng, min_hairpin=0))
        probs = exact_probabilities(report)
        assert math.fsum(p for _js, p in probs["structures"]) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_hybrid_footprint_mass(self):
        R, S = strands("AAA", "UUU")
        probs = exact_probabilities(enumerate_interactions(R, S, unit_model()))
        # anchored at (1,1) and (3,3): {(1,1),(3,3)} and {(1,1),(2,2),(3,3)}
        assert probs["p_hy"][(1, 3, 1, 3)] == pytest.approx(2 / 20)
        # single-arc footprints
        assert probs["p_hy"][(1, 1, 1, 1)] == pytest.approx(1 / 20)

    def test_target_site_mass(self):
        R, S = strands("AAA", "UUU")
        probs = exact_probabilities(enumerate_interactions(R, S, unit_model()))
        # hybrids {(1,1)}, {(1,2)}, {(1,3)}: each occurs in exactly one structure
        assert probs["p_tar_r"][(1, 1)] == pytest.approx(3 / 20)

    def test_target_is_hybrid_aggregate(self):
        rng = np.random.default_rng(9)
        R, S = strands(random_seq(rng, 5), random_seq(rng, 4))
        probs = exact_probabilities(
            enumerate_interactions(R, S, random_model(rng, min_hairpin=1))
        )
        agg: dict = {}
        for (i, j, _h, _l), p in probs["p_hy"].items():
            agg[(i, j)] = agg.get((i, j), 0.0) + p
        for key, val in probs["p_tar_r"].items():
            assert val == pytest.approx(agg[key], abs=1e-12)


class TestScoring:
    def test_single_hybrid_weight(self):
        R, S = strands("AA", "UU")
        model = random_model(np.random.default_rng(4), min_hairpin=0)
        js = JointStructure(n=2, m=2, exterior=((1, 1), (2, 2)))
        w = score_structure(R, S, js, model)
        expected = (
            model.w_ext("A", "U") ** 2 * model.w_step_base(0, 0)
        )
        assert w == pytest.approx(expected, rel=1e-12)

    def test_kissing_loop_weight(self):
        # R arc (1,5) covers the exterior arc at R3: kissing loop with two
        # plain unpaired bases (R2, R4); S side exposed at top level.
        R, S = strands("GAAAC", "U")
        model = random_model(np.random.default_rng(6), min_hairpin=1)
        js = JointStructure(n=5, m=1, interior_r=frozenset({(1, 5)}),
                            exterior=((3, 1),))
        w = score_structure(R, S, js, model)
        expected = (
            model.w_kiss_init
            * model.w_kiss_unpaired ** 2
            * model.w_ext("A", "U")
        )
        assert w == pytest.approx(expected, rel=1e-12)

    def test_hybrid_gap_bases_priced_beta3_not_kiss(self):
        # hybrid (2,1),(4,2) under R arc (1,5): R3 is a gap base -> beta3
        R, S = strands("GAUAC", "UU")
        model = random_model(np.random.default_rng(8), min_hairpin=1)
        js = JointStructure(n=5, m=2, interior_r=frozenset({(1, 5)}),
                            exterior=((2, 1), (4, 2)))
        w = score_structure(R, S, js, model)
        expected = (
            model.w_kiss_init
            * model.w_ext("A", "U") ** 2
            * model.w_step_base(1, 0)
            * model.w_beta3  # one R-side gap base, R side covered
        )
        assert w == pytest.approx(expected, rel=1e-12)

    def test_duplicate_free_enumeration(self):
        R, S = strands("GAAC", "GUUC")
        report = enumerate_interactions(R, S, unit_model(min_hairpin=0))
        keys = {js.key() for js, _ in report.structures}
        assert len(keys) == report.count

    def test_hybrid_partition_property(self):
        R, S = strands("GAAC", "GUUC")
        report = enumerate_interactions(R, S, unit_model(min_hairpin=0))
        for js, _ in report.structures:
            hybs = extract_hybrids(js)
            flat = tuple(arc for hyb in hybs for arc in hyb.arcs)
            assert flat == js.exterior
