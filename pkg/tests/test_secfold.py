from __future__ import annotations

import numpy as np
import pytest

from jointfold.oracle import enumerate_secondary
from jointfold.secfold import fold, secondary_bpp
from jointfold.seq_model import Strand

from helpers import random_model, random_seq
from jointfold.energy import unit_model


def count(seq: str, min_hairpin: int = 3, **kw) -> float:
    tables = fold(Strand.query(seq), unit_model(min_hairpin=min_hairpin, **kw))
    return tables.q_total()


class TestCounts:
    def test_no_pairable_bases(self):
        assert count("AAAA") == 1.0

    def test_single_admissible_arc(self):
        assert count("GAAAC") == 2.0

    def test_nested_helix(self):
        # empty, (1,7), (2,6), (1,6), (2,7), (1,7)+(2,6)
        assert count("GGAAACC") == 6.0

    def test_empty_interval_convention(self):
        tables = fold(Strand.query("GAAAC"), unit_model())
        assert tables.q[3, 2] == 1.0

    def test_matches_exhaustive_counts(self):
        rng = np.random.default_rng(7)
        for trial in range(12):
            seq = random_seq(rng, int(rng.integers(1, 11)))
            theta = int(rng.integers(0, 4))
            model = unit_model(min_hairpin=theta)
            n_structs, _, _ = enumerate_secondary(Strand.query(seq), model)
            assert count(seq, min_hairpin=theta) == float(n_structs), seq

    def test_unit_entries_are_integers(self):
        tables = fold(Strand.query("GGACGUCAAC"), unit_model(min_hairpin=0))
        sub = tables.q[1:11, 1:11]
        assert np.allclose(sub, np.round(sub))


class TestWeighted:
    def test_matches_exhaustive_weights(self):
        rng = np.random.default_rng(11)
        for trial in range(10):
            seq = random_seq(rng, int(rng.integers(2, 11)))
            model = random_model(rng, min_hairpin=int(rng.integers(0, 4)))
            _, weighted, _ = enumerate_secondary(Strand.query(seq), model)
            got = fold(Strand.query(seq), model).q_total()
            assert got == pytest.approx(weighted, rel=1e-9), seq

    def test_monotone_in_pair_set(self):
        rng = np.random.default_rng(3)
        for _ in range(6):
            seq = random_seq(rng, 9)
            small = unit_model(pairs=("AU", "UA", "GC", "CG"))
            big = unit_model()
            assert (
                fold(Strand.query(seq), big).q_total()
                >= fold(Strand.query(seq), small).q_total()
            )


class TestLonePairMode:
    def test_counts_match_exhaustive(self):
        rng = np.random.default_rng(23)
        for _ in range(8):
            seq = random_seq(rng, int(rng.integers(4, 11)))
            model = unit_model(min_hairpin=int(rng.integers(0, 4)),
                               forbid_lone_pairs=True)
            n_structs, _, _ = enumerate_secondary(Strand.query(seq), model)
            got = fold(Strand.query(seq), model).q_total()
            assert got == float(n_structs), seq

    def test_weights_match_exhaustive(self):
        rng = np.random.default_rng(29)
        for _ in range(6):
            seq = random_seq(rng, int(rng.integers(4, 10)))
            model = random_model(rng, min_hairpin=0, forbid_lone_pairs=True)
            _, weighted, _ = enumerate_secondary(Strand.query(seq), model)
            got = fold(Strand.query(seq), model).q_total()
            assert got == pytest.approx(weighted, rel=1e-9), seq


class TestSecondaryBpp:
    def test_matches_exhaustive_marginals(self):
        rng = np.random.default_rng(41)
        for _ in range(6):
            seq = random_seq(rng, int(rng.integers(3, 10)))
            model = random_model(rng, min_hairpin=int(rng.integers(0, 3)))
            strand = Strand.query(seq)
            _, z, structures = enumerate_secondary(strand, model)
            bpp = secondary_bpp(strand, model)
            exact: dict = {}
            for arcs, w in structures:
                for arc in arcs:
                    exact[arc] = exact.get(arc, 0.0) + w / z
            for i in range(1, len(seq) + 1):
                for j in range(i + 1, len(seq) + 1):
                    assert bpp[i, j] == pytest.approx(
                        exact.get((i, j), 0.0), abs=1e-9
                    ), (seq, i, j)

    def test_position_sum_bounded(self):
        seq = "GGGAAACCCAUGC"
        bpp = secondary_bpp(Strand.query(seq), random_model(np.random.default_rng(5)))
        n = len(seq)
        for i in range(1, n + 1):
            total = bpp[i, :].sum() + bpp[:, i].sum()
            assert total <= 1.0 + 1e-9
