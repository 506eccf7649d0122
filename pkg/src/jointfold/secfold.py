"""Single-strand partition functions with class-priced exposure tables.

The joint-structure grammar consumes secondary structure through a handful
of 2D tables per strand:

* ``qb``   - structures closed by an arc (standard hairpin / interior /
             stack / multiloop decomposition; with ``forbid_lone_pairs``
             the closed table requires helices of length >= 2),
* ``q``    - any structure, exposure-free pricing (exterior class),
* ``q1``   - like ``q`` but at least one top-level branch,
* ``qk``   - any structure, kissing-class pricing for exposed branches and
             unpaired bases,
* ``q1k``  - kissing-class with at least one branch,
* ``qm``/``qm1`` - multi-class helpers used inside ``qb``.

The multi- and kissing-class tables are one recursion instantiated with two
affine weight classes.  Every recursion is written once as a per-cell case
enumeration (:meth:`SecEngine.cases`) shared by the fill, the outside sweep
and the stochastic traceback, so the three can never drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import EnergyModel
from .seq_model import Strand

__all__ = ["SecTables", "SecEngine", "fold", "secondary_bpp"]

# Case record: (weight, children, own_arc) where children are (kind, i, j).
Case = tuple[float, tuple, tuple | None]

_EMPTY_ONE = ("q", "qk")  # tables whose empty interval has value 1


@dataclass
class SecTables:
    """Filled single-strand tables (immutable after fill).

    ``q``/``qb``/``qm``/``qk`` are (L+2)x(L+2) arrays indexed 1-based with
    ``q[i, i-1] == 1`` by convention.  Under a unit model all entries are
    ensemble counts.
    """

    strand: Strand
    model: EnergyModel
    q: np.ndarray
    qb: np.ndarray
    qm: np.ndarray
    qk: np.ndarray
    engine: "SecEngine"

    def q_total(self) -> float:
        return float(self.q[1, len(self.strand)])


class SecEngine:
    """Recursion definitions and storage for one strand under one model."""

    def __init__(self, strand: Strand, model: EnergyModel):
        self.strand = strand
        self.model = model
        self.n = len(strand)
        self.seq = strand.residues
        self.nolp = model.forbid_lone_pairs
        self.branch_kind = "qbh" if self.nolp else "qb"
        # Same-cell dependencies pin the order: closed tables fill before the
        # chains that place them; the outside sweep runs the reverse.
        kinds = ["qend", "qbh"] if self.nolp else []
        kinds += ["qb", "qm1", "qm", "q", "q1", "qk", "q1k"]
        self.kinds = kinds
        size = self.n + 2
        self.tables: dict[str, np.ndarray] = {
            k: np.zeros((size, size)) for k in kinds
        }
        for k in _EMPTY_ONE:
            for i in range(1, size):
                self.tables[k][i, i - 1] = 1.0
        self._filled = False

    # -- admissibility ----------------------------------------------------

    def adm(self, i: int, j: int) -> bool:
        """Interior-arc admissibility: pair type plus hairpin size."""
        if j - i - 1 < self.model.min_hairpin:
            return False
        return self.model.pairable(self.seq[i - 1], self.seq[j - 1])

    def _ilw(self, i: int, j: int, p: int, q: int) -> float:
        """Interior-loop step weight from closing (i,j) to inner (p,q)."""
        if p == i + 1 and q == j - 1:
            return self.model.w_stack(
                self.seq[i - 1] + self.seq[j - 1], self.seq[p - 1] + self.seq[q - 1]
            )
        return self.model.w_interior(p - i - 1, j - q - 1)

    # -- recursion cases ----------------------------------------------------

    def cases(self, kind: str, i: int, j: int) -> list[Case]:
        """All production cases of one cell; mutually exclusive and complete.

        Each case is (weight, children, own_arc); the cell value is the sum
        over cases of weight times the product of child values.
        """
        m = self.model
        bk = self.branch_kind
        out: list[Case] = []
        if kind == "qb":
            if not self.adm(i, j):
                return out
            out.append((m.w_hairpin(j - i - 1), (), (i, j)))
            for p in range(i + 1, j):
                for q in range(p + 1, j):
                    out.append((self._ilw(i, j, p, q), (("qb", p, q),), (i, j)))
            for k in range(i + 2, j - 1):
                out.append(
                    (m.w_multi_init, (("qm", i + 1, k - 1), ("qm1", k, j - 1)), (i, j))
                )
        elif kind == "qbh":
            # Helix of length >= 2 starting at (i,j).
            if not (self.adm(i, j) and self.adm(i + 1, j - 1)):
                return out
            w = m.w_stack(
                self.seq[i - 1] + self.seq[j - 1], self.seq[i] + self.seq[j - 2]
            )
            out.append((w, (("qend", i + 1, j - 1),), (i, j)))
            out.append((w, (("qbh", i + 1, j - 1),), (i, j)))
        elif kind == "qend":
            # Last pair of a helix; its loop must not be a stack.
            if not self.adm(i, j):
                return out
            out.append((m.w_hairpin(j - i - 1), (), (i, j)))
            for p in range(i + 1, j):
                for q in range(p + 1, j):
                    if p == i + 1 and q == j - 1:
                        continue
                    out.append(
                        (m.w_interior(p - i - 1, j - q - 1), (("qbh", p, q),), (i, j))
                    )
            for k in range(i + 2, j - 1):
                out.append(
                    (m.w_multi_init, (("qm", i + 1, k - 1), ("qm1", k, j - 1)), (i, j))
                )
        elif kind == "qm1":
            # Exactly one branch starting at i, trailing unpaired bases.
            for l in range(i + 1, j + 1):
                out.append(
                    (
                        m.w_multi_branch * m.w_multi_unpaired ** (j - l),
                        ((bk, i, l),),
                        None,
                    )
                )
        elif kind == "qm":
            # Split at the last branch; prefix all-unpaired or >= 1 branch.
            for k in range(i, j + 1):
                out.append((m.w_multi_unpaired ** (k - i), (("qm1", k, j),), None))
                if k > i:
                    out.append((1.0, (("qm", i, k - 1), ("qm1", k, j)), None))
        elif kind in ("q", "q1", "qk", "q1k"):
            if j < i:
                return out
            kiss = kind in ("qk", "q1k")
            wu = m.w_kiss_unpaired if kiss else 1.0
            wb = m.w_kiss_branch if kiss else 1.0
            base = "qk" if kiss else "q"
            out.append((wu, ((kind, i, j - 1),), None))
            # last branch (k, j); empty prefix is the base value q(i, i-1) = 1
            for k in range(i, j):
                out.append((wb, ((base, i, k - 1), (bk, k, j)), None))
        else:
            raise KeyError(f"unknown table kind {kind!r}")
        return out

    # -- fill ---------------------------------------------------------------

    def value(self, kind: str, i: int, j: int) -> float:
        if j == i - 1:
            return 1.0 if kind in _EMPTY_ONE else 0.0
        if j < i - 1:
            return 1.0 if kind in _EMPTY_ONE else 0.0
        return float(self.tables[kind][i, j])

    def fill(self) -> None:
        if self._filled:
            return
        for span in range(1, self.n + 1):
            for i in range(1, self.n - span + 2):
                j = i + span - 1
                for kind in self.kinds:
                    total = 0.0
                    for w, children, _arc in self.cases(kind, i, j):
                        prod = w
                        for ck, ci, cj in children:
                            prod *= self.value(ck, ci, cj)
                            if prod == 0.0:
                                break
                        total += prod
                    self.tables[kind][i, j] = total
        self._filled = True

    # -- outside ------------------------------------------------------------

    def outside(self, seeds: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Propagate outside weights down to every table.

        ``seeds[kind][i, j]`` is the outside weight of cell (kind, i, j)
        accumulated by external users (the 4D engine, or the top level for
        plain single-strand folding).  Returns per-kind outside arrays; the
        base-pair weight of arc (i,j) is ``out['qb'][i,j] * qb[i,j]`` (plus
        the helix tables in lone-pair-free mode).
        """
        size = self.n + 2
        out = {k: np.zeros((size, size)) for k in self.kinds}
        for k, arr in seeds.items():
            out[k] += arr
        for span in range(self.n, 0, -1):
            for i in range(1, self.n - span + 2):
                j = i + span - 1
                for kind in reversed(self.kinds):
                    o = out[kind][i, j]
                    if o == 0.0:
                        continue
                    for w, children, _arc in self.cases(kind, i, j):
                        vals = [self.value(*c) for c in children]
                        for t, (ck, ci, cj) in enumerate(children):
                            if cj < ci:  # empty interval, no table cell
                                continue
                            contrib = o * w
                            for s, v in enumerate(vals):
                                if s != t:
                                    contrib *= v
                            out[ck][ci, cj] += contrib
        return out

    def arc_probabilities(self, out: dict[str, np.ndarray], q_total: float) -> np.ndarray:
        """Base-pair probabilities implied by outside weights."""
        size = self.n + 2
        bpp = np.zeros((size, size))
        closed = ["qb", "qbh", "qend"] if self.nolp else ["qb"]
        for kind in closed:
            bpp += out[kind] * self.tables[kind]
        return bpp / q_total

    # -- sampling -----------------------------------------------------------

    def sample(self, kind: str, i: int, j: int, rng, arcs: list) -> None:
        """Draw one substructure of cell (kind,i,j); append arcs."""
        stack = [(kind, i, j)]
        while stack:
            k, a, b = stack.pop()
            if b <= a - 1:
                continue
            total = self.value(k, a, b)
            if total <= 0.0:
                raise RuntimeError(f"sampling empty cell ({k},{a},{b})")
            u = rng.random() * total
            acc = 0.0
            chosen = None
            for w, children, arc in self.cases(k, a, b):
                prod = w
                for c in children:
                    prod *= self.value(*c)
                acc += prod
                if u <= acc:
                    chosen = (children, arc)
                    break
            if chosen is None:  # numerical slack: take the last nonzero case
                for w, children, arc in reversed(self.cases(k, a, b)):
                    prod = w
                    for c in children:
                        prod *= self.value(*c)
                    if prod > 0.0:
                        chosen = (children, arc)
                        break
            if chosen is None:
                raise RuntimeError(f"no case to sample in ({k},{a},{b})")
            children, arc = chosen
            if arc is not None:
                arcs.append(arc)
            stack.extend(children)


def fold(strand: Strand, model: EnergyModel) -> SecTables:
    """Fill all single-strand tables in O(L^3) time, O(L^2) space."""
    eng = SecEngine(strand, model)
    eng.fill()
    qb = eng.tables["qbh"] if eng.nolp else eng.tables["qb"]
    return SecTables(
        strand=strand,
        model=model,
        q=eng.tables["q"],
        qb=qb,
        qm=eng.tables["qm"],
        qk=eng.tables["qk"],
        engine=eng,
    )


def secondary_bpp(strand: Strand, model: EnergyModel) -> np.ndarray:
    """Standalone base-pair probabilities of one strand (McCaskill-style)."""
    tables = fold(strand, model)
    eng = tables.engine
    n = len(strand)
    seeds = {k: np.zeros((n + 2, n + 2)) for k in eng.kinds}
    seeds["q"][1, n] = 1.0
    out = eng.outside(seeds)
    return eng.arc_probabilities(out, tables.q_total())
