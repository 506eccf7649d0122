from __future__ import annotations

import pytest

from jointfold.seq_model import (
    Hybrid,
    JointStructure,
    Strand,
    Violation,
    extract_hybrids,
    is_zigzag_free,
    validate,
)


def js(n, m, ir=(), is_=(), ext=()):
    return JointStructure(
        n=n, m=m, interior_r=frozenset(ir), interior_s=frozenset(is_),
        exterior=tuple(ext),
    )


class TestStrand:
    def test_t_normalised_and_reversal(self):
        s = Strand.target_from_5to3("GAUUC", id="s")
        assert s.residues == "CUUAG"
        assert Strand.query("gattc").residues == "GAUUC"

    def test_rejects_bad_residue(self):
        with pytest.raises(ValueError, match="position 2"):
            Strand.query("AXG")

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Strand.query("")


class TestValidate:
    def test_empty_structure_valid(self):
        assert validate(js(3, 3)).valid

    def test_figure_zigzag_pattern(self):
        # interior arcs cover overlapping, non-nested runs of the three
        # exterior arcs -> the forbidden alternating pattern
        bad = js(5, 5, ir={(1, 4)}, is_={(2, 5)},
                 ext=[(2, 1), (3, 3), (5, 4)])
        report = validate(bad, min_hairpin=2)
        assert not report.valid
        assert report.rule is Violation.ZIG_ZAG

    def test_crossing_exterior(self):
        report = validate(js(2, 2, ext=[(1, 2), (2, 1)]))
        assert report.rule is Violation.CROSSING_ARCS

    def test_double_paired_position(self):
        report = validate(js(6, 6, ir={(1, 5)}, ext=[(1, 2)]), min_hairpin=3)
        assert report.rule is Violation.DOUBLE_PAIRED_POSITION

    def test_hairpin_too_small(self):
        report = validate(js(4, 4, ir={(1, 3)}), min_hairpin=3)
        assert report.rule is Violation.HAIRPIN_TOO_SMALL
        assert validate(js(4, 4, ir={(1, 3)}), min_hairpin=1).valid

    def test_crossing_interior(self):
        report = validate(js(8, 4, ir={(1, 5), (3, 7)}), min_hairpin=3)
        assert report.rule is Violation.CROSSING_ARCS

    def test_pure_function(self):
        bad = js(5, 5, ir={(1, 4)}, is_={(2, 5)}, ext=[(2, 1), (3, 3), (5, 4)])
        assert validate(bad, 0) == validate(bad, 0)


class TestZigzagFree:
    def test_no_interior_arcs(self):
        assert is_zigzag_free(js(5, 5, ext=[(1, 1), (3, 3), (5, 5)]))

    def test_figure_pattern_false(self):
        assert not is_zigzag_free(
            js(5, 5, ir={(1, 4)}, is_={(2, 5)}, ext=[(2, 1), (3, 3), (5, 4)])
        )

    def test_nested_coverage_true(self):
        # one covered run subsumes the other: allowed
        assert is_zigzag_free(
            js(6, 6, ir={(1, 6)}, is_={(1, 6)}, ext=[(2, 2), (3, 3)])
        )

    def test_mirror_pattern_also_excluded(self):
        # same pattern with the strand roles swapped
        assert not is_zigzag_free(
            js(5, 5, ir={(2, 5)}, is_={(1, 4)}, ext=[(1, 2), (3, 3), (4, 5)])
        )


class TestExtractHybrids:
    def test_no_exterior(self):
        assert extract_hybrids(js(4, 4, ir={(1, 4)})) == []

    def test_single_run_with_bare_gaps(self):
        out = extract_hybrids(js(3, 3, ext=[(1, 1), (3, 3)]))
        assert len(out) == 1
        assert out[0].footprint_r == (1, 3)
        assert out[0].footprint_s == (1, 3)

    def test_interior_arc_splits_run(self):
        out = extract_hybrids(js(5, 3, ir={(2, 4)}, ext=[(1, 1), (5, 3)]))
        assert [h.footprint_r for h in out] == [(1, 1), (5, 5)]

    def test_partition_covers_exterior_in_order(self):
        structure = js(
            6, 6, ir={(2, 5)}, ext=[(1, 1), (3, 2), (4, 4), (6, 6)]
        )
        out = extract_hybrids(structure)
        flattened = tuple(arc for hyb in out for arc in hyb.arcs)
        assert flattened == structure.exterior

    def test_hybrid_requires_arcs(self):
        with pytest.raises(ValueError):
            Hybrid.from_arcs(())
