"""Inside algorithm: 4D partition-function tables over the block grammar.

The production system is frozen in ``docs/grammar.md``.  Cells are pairs of
subsequences ``(i,j;h,l)``; tensors are stored per family as one dense 4D
array indexed ``[span_r, span_s, anchor_r, anchor_s]`` where the anchor is
the cell *start* for item tensors (hybrids and tight blocks) and the cell
*end* for chain/gap tensors.  The end-anchored layout makes every recursion
a contraction over aligned span axes with constant position offsets, so each
wave (fixed span pair) fills with a handful of einsum calls.

Under a unit model every entry is an ensemble count; the brute-force oracle
checks both the counts and the weighted sums cell for cell (via the
per-cell case enumeration in ``_cases.py``, shared with the sampler).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyModel
from .secfold import SecTables, fold
from .seq_model import Strand

__all__ = [
    "ChainLabel",
    "LABELS",
    "HY_CLASSES",
    "ComponentKind",
    "CapacityExceeded",
    "TensorStore",
    "InsideResult",
    "inside",
    "estimate_memory_bytes",
    "hybrid_tables",
    "tight_recursions",
    "rt_dt_recursions",
]

HY_CLASSES = ("EE", "EK", "KE", "KK")


@dataclass(frozen=True)
class ChainLabel:
    """Per-strand exposure class and tail mode of a chain tensor."""

    name: str
    class_r: str  # "E" | "K"
    class_s: str
    tail_r: str  # "free" | "flush"
    tail_s: str

    @property
    def hy_class(self) -> str:
        return self.class_r + self.class_s

    @property
    def has_nb(self) -> bool:
        return self.tail_r == "flush" or self.tail_s == "flush"


LABELS: dict[str, ChainLabel] = {
    lab.name: lab
    for lab in (
        ChainLabel("top", "E", "E", "free", "free"),
        ChainLabel("vee_E", "K", "E", "free", "flush"),
        ChainLabel("vee_K", "K", "K", "free", "flush"),
        ChainLabel("tri_E", "E", "K", "flush", "free"),
        ChainLabel("tri_K", "K", "K", "flush", "free"),
        ChainLabel("box", "K", "K", "free", "free"),
    )
}

# Tensor families: key -> anchoring.  "start": [p,q,i,h]; "end": [p,q,j,l].
_ITEM_KEYS = tuple(
    [("hy", c) for c in HY_CLASSES]
    + [("vee", "E"), ("vee", "K"), ("tri", "E"), ("tri", "K"), ("box",)]
)


def _chain_keys() -> list[tuple]:
    keys: list[tuple] = []
    for name, lab in LABELS.items():
        keys += [("chy", name), ("cna", name), ("ghy", name), ("gna", name)]
        keys += [("aft_hy", name), ("aft_na", name)]
        if lab.has_nb:
            keys.append(("cnb", name))
    return keys


_CHAIN_KEYS = tuple(_chain_keys())
_ALL_KEYS = _ITEM_KEYS + _CHAIN_KEYS


@dataclass(frozen=True)
class ComponentKind:
    """Public vocabulary for grammar components.

    ``kind`` names the structural family; ``y1``/``y2`` are the R- and
    S-side exposure classes actually emitted by the grammar ({E, K}; the
    multi class never labels a 4D component, see docs/grammar.md §3), and
    ``y3`` distinguishes the continuation flavour after a hybrid ("A") from
    the blocked hybrid-after-bare-gap shape ("B").
    """

    kind: str
    y1: str = ""
    y2: str = ""
    y3: str = ""

    _KINDS = (
        "arbitrary", "chain", "gap", "double_tight",
        "tight_r", "tight_s", "tight_rs", "tight_arc",
        "hybrid", "hybrid_part", "secondary", "isolated",
    )

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}")
        for y in (self.y1, self.y2):
            if y not in ("", "E", "K"):
                raise ValueError(f"unreachable exposure class {y!r}")
        if self.y3 not in ("", "A", "B"):
            raise ValueError(f"unknown maximality flag {self.y3!r}")


class CapacityExceeded(RuntimeError):
    """The configured memory budget cannot hold the DP tables."""

    def __init__(self, required_bytes: int, budget_bytes: int):
        self.required_bytes = required_bytes
        self.budget_bytes = budget_bytes
        super().__init__(
            f"tables require {required_bytes} bytes, budget is {budget_bytes}"
        )


def _array_count() -> int:
    return len(_ALL_KEYS)


def estimate_memory_bytes(n: int, m: int, include_outside: bool = True) -> int:
    """Bytes of table storage the engine will allocate for lengths (n, m)."""
    cell = (n + 2) * (m + 2) * (n + 2) * (m + 2) * 8
    count = _array_count()
    if include_outside:
        # outside accumulators: one per non-derived tensor plus the
        # block-placement accumulators for the four hybrid classes
        count += (_array_count() - 2 * len(LABELS)) + 4
    twod = 2 * 16 * (max(n, m) + 2) ** 2 * 8  # per-strand tables and diagonals
    return count * cell + twod


class TensorStore:
    """Dense 4D arrays with byte accounting."""

    def __init__(self, n: int, m: int):
        self.n = n
        self.m = m
        self.shape = (n + 2, m + 2, n + 2, m + 2)
        self.arrays: dict[tuple, np.ndarray] = {}
        self.allocated_bytes = 0
        self.peak_bytes = 0

    def alloc(self, key: tuple) -> np.ndarray:
        arr = np.zeros(self.shape)
        self.arrays[key] = arr
        self.allocated_bytes += arr.nbytes
        self.peak_bytes = max(self.peak_bytes, self.allocated_bytes)
        return arr

    def __getitem__(self, key: tuple) -> np.ndarray:
        return self.arrays[key]

    def __contains__(self, key: tuple) -> bool:
        return key in self.arrays


class _Ctx:
    """Precomputed per-run grids: admissibility, weights, segment diagonals."""

    def __init__(self, R: Strand, S: Strand, model: EnergyModel,
                 sec_r: SecTables, sec_s: SecTables):
        self.R, self.S, self.model = R, S, model
        self.sec_r, self.sec_s = sec_r, sec_s
        n, m = len(R), len(S)
        self.n, self.m = n, m
        self.ki = model.w_kiss_init
        self.kb = model.w_kiss_branch
        self.ku = model.w_kiss_unpaired

        self.wext = np.zeros((n + 2, m + 2))
        for i in range(1, n + 1):
            for h in range(1, m + 1):
                self.wext[i, h] = model.w_ext(R.base(i), S.base(h))

        # adm[p, i] = interior-arc admissibility of (i, i+p-1)
        self.adm_r = self._adm_grid(R)
        self.adm_s = self._adm_grid(S)

        # STEP[cls][gr, gs]: hybrid extension weight by gap sizes
        self.step = {}
        base = np.zeros((n + 1, m + 1))
        for gr in range(n + 1):
            for gs in range(m + 1):
                base[gr, gs] = model.w_step_base(gr, gs)
        b3 = model.w_beta3
        br = b3 ** np.arange(n + 1)
        bs = b3 ** np.arange(m + 1)
        self.step["EE"] = base
        self.step["EK"] = base * bs[None, :]
        self.step["KE"] = base * br[:, None]
        self.step["KK"] = base * br[:, None] * bs[None, :]

        # Segment diagonals, start anchored: sq_*[strand][cls][g, x] is the
        # weight of a segment of length g starting at x; end anchored tq_*.
        self.sq_any, self.sq_ge1, self.sq_unp = {}, {}, {}
        self.tq_any = {}
        for sid, sec, ln in (("R", sec_r, n), ("S", sec_s, m)):
            eng = sec.engine
            self.sq_any[sid] = {}
            self.sq_ge1[sid] = {}
            self.sq_unp[sid] = {}
            self.tq_any[sid] = {}
            for cls, anyk, ge1k in (("E", "q", "q1"), ("K", "qk", "q1k")):
                sq = np.zeros((ln + 2, ln + 2))
                s1 = np.zeros((ln + 2, ln + 2))
                su = np.zeros((ln + 2, ln + 2))
                tq = np.zeros((ln + 2, ln + 2))
                uw = self.ku if cls == "K" else 1.0
                for g in range(0, ln + 1):
                    for x in range(1, ln + 2 - g):
                        sq[g, x] = eng.value(anyk, x, x + g - 1)
                        s1[g, x] = eng.value(ge1k, x, x + g - 1)
                        su[g, x] = uw ** g
                    for j in range(g, ln + 1):
                        if g == 0:
                            tq[g, j] = 1.0
                        else:
                            tq[g, j] = eng.value(anyk, j - g + 1, j)
                # tails of length 0 anchored anywhere are weight 1
                tq[0, :] = 1.0
                sq[0, :] = 1.0
                su[0, :] = 1.0
                self.sq_any[sid][cls] = sq
                self.sq_ge1[sid][cls] = s1
                self.sq_unp[sid][cls] = su
                self.tq_any[sid][cls] = tq
        self.tq_flush_r = np.zeros((n + 2, n + 2))
        self.tq_flush_r[0, :] = 1.0
        self.tq_flush_s = np.zeros((m + 2, m + 2))
        self.tq_flush_s[0, :] = 1.0

    def _adm_grid(self, strand: Strand) -> np.ndarray:
        ln = len(strand)
        arr = np.zeros((ln + 2, ln + 2))
        for p in range(2, ln + 1):
            for i in range(1, ln - p + 2):
                j = i + p - 1
                if j - i - 1 >= self.model.min_hairpin and self.model.pairable(
                    strand.base(i), strand.base(j)
                ):
                    arr[p, i] = 1.0
        return arr

    def tq_r(self, label: ChainLabel) -> np.ndarray:
        if label.tail_r == "flush":
            return self.tq_flush_r
        return self.tq_any["R"][label.class_r]

    def tq_s(self, label: ChainLabel) -> np.ndarray:
        if label.tail_s == "flush":
            return self.tq_flush_s
        return self.tq_any["S"][label.class_s]


@dataclass
class InsideResult:
    """Filled inside tables plus the total joint partition function."""

    R: Strand
    S: Strand
    model: EnergyModel
    sec_r: SecTables
    sec_s: SecTables
    store: TensorStore
    ctx: _Ctx
    q_total: float
    q_no_interaction: float
    memory_estimate_bytes: int
    memory_actual_bytes: int

    @property
    def q_r(self) -> float:
        return self.sec_r.q_total()

    @property
    def q_s(self) -> float:
        return self.sec_s.q_total()

    def value(self, key: tuple, i: int, j: int, h: int, l: int) -> float:
        """Scalar tensor read for cell (i,j;h,l), any anchoring."""
        if j < i or l < h:
            return 0.0
        p, q = j - i + 1, l - h + 1
        arr = self.store[key]
        if key[0] in ("hy", "vee", "tri", "box"):
            return float(arr[p, q, i, h])
        return float(arr[p, q, j, l])

    def chain_value(self, parts, name: str, a: int, b: int, c: int, d: int) -> float:
        lab = LABELS[name]
        total = 0.0
        for part in parts:
            if part == "nb" and not lab.has_nb:
                continue
            total += self.value((
                {"hy": "chy", "na": "cna", "nb": "cnb"}[part], name), a, b, c, d)
        return total


def inside(
    R: Strand,
    S: Strand,
    model: EnergyModel,
    memory_budget_bytes: int | None = None,
) -> InsideResult:
    """Fill all tensors bottom-up and return the joint partition function.

    ``q_total`` is the Boltzmann-weighted sum over exactly the validate-
    admissible joint structures; every structure contributes through exactly
    one parse tree.  Asymptotics: O(N^3 M^3) time, O(N^2 M^2) space.

    Raises:
        CapacityExceeded: the estimate exceeds ``memory_budget_bytes``.
    """
    est = estimate_memory_bytes(len(R), len(S), include_outside=False)
    if memory_budget_bytes is not None and est > memory_budget_bytes:
        raise CapacityExceeded(est, memory_budget_bytes)

    sec_r = fold(R, model)
    sec_s = fold(S, model)
    ctx = _Ctx(R, S, model, sec_r, sec_s)
    n, m = ctx.n, ctx.m
    store = TensorStore(n, m)
    for key in _ALL_KEYS:
        store.alloc(key)

    _init_aft_edges(store, ctx)
    for t in range(2, n + m + 1):
        for p in range(max(1, t - m), min(n, t - 1) + 1):
            q = t - p
            _fill_items(store, ctx, p, q)
            for name in LABELS:
                _fill_chains(store, ctx, LABELS[name], p, q)
            for name in LABELS:
                _fill_gaps(store, ctx, LABELS[name], p, q)

    q_ni = sec_r.q_total() * sec_s.q_total()
    q_int = _top_interaction_sum(store, ctx)
    return InsideResult(
        R=R, S=S, model=model, sec_r=sec_r, sec_s=sec_s, store=store, ctx=ctx,
        q_total=q_ni + q_int, q_no_interaction=q_ni,
        memory_estimate_bytes=est, memory_actual_bytes=store.peak_bytes,
    )


def _top_interaction_sum(store: TensorStore, ctx: _Ctx) -> float:
    n, m = ctx.n, ctx.m
    qr = ctx.sec_r.engine
    qs = ctx.sec_s.engine
    total = 0.0
    chy = store[("chy", "top")]
    cna = store[("cna", "top")]
    for p in range(1, n + 1):
        wr = qr.value("q", 1, n - p)
        if wr == 0.0:
            continue
        for q in range(1, m + 1):
            v = chy[p, q, n, m] + cna[p, q, n, m]
            if v != 0.0:
                total += wr * qs.value("q", 1, m - q) * v
    return total


def _init_aft_edges(store: TensorStore, ctx: _Ctx) -> None:
    """Continuation rows with an empty remainder on one or both strands."""
    n, m = ctx.n, ctx.m
    for name, lab in LABELS.items():
        tq_r = ctx.tq_r(lab)
        tq_s = ctx.tq_s(lab)
        for fam in ("aft_hy", "aft_na"):
            arr = store[(fam, name)]
            arr[0, 0, :, :] = 1.0
            for rq in range(1, m + 1):
                arr[0, rq, :, :] = tq_s[rq, :][None, :]
            for rp in range(1, n + 1):
                arr[rp, 0, :, :] = tq_r[rp, :][:, None]


def _fill_items(store: TensorStore, ctx: _Ctx, p: int, q: int) -> None:
    n, m = ctx.n, ctx.m
    nI, nH = n - p + 1, m - q + 1
    isl = slice(1, nI + 1)
    hsl = slice(1, nH + 1)
    jsl = slice(p, p + nI)
    lsl = slice(q, q + nH)

    # hybrids
    if p == 1 and q == 1:
        for cls in HY_CLASSES:
            store[("hy", cls)][1, 1, 1 : n + 1, 1 : m + 1] = ctx.wext[
                1 : n + 1, 1 : m + 1
            ]
    elif p >= 2 and q >= 2:
        for cls in HY_CLASSES:
            arr = store[("hy", cls)]
            block = arr[1:p, 1:q, isl, hsl]
            # step for prefix spans (dp,dq): gaps (p-dp-1, q-dq-1)
            kern = ctx.step[cls][p - 2 :: -1, q - 2 :: -1][: p - 1, : q - 1]
            vals = np.einsum("abih,ab->ih", block, kern)
            arr[p, q, isl, hsl] = vals * ctx.wext[jsl, lsl]

    # tight_r (closed by an R arc): content chain is S-flush with span q
    if p >= 3:
        lead = ctx.sq_any["R"]["K"][0 : p - 2, 2 : 2 + nI]
        adm = ctx.adm_r[p, isl]
        for ys in ("E", "K"):
            name = f"vee_{ys}"
            chain = (
                store[("chy", name)][1 : p - 1, q, p - 1 : p - 1 + nI, lsl]
                + store[("cna", name)][1 : p - 1, q, p - 1 : p - 1 + nI, lsl]
            )
            vals = np.einsum("gih,gi->ih", chain[::-1], lead)
            store[("vee", ys)][p, q, isl, hsl] = ctx.ki * adm[:, None] * vals

    # tight_s (closed by an S arc)
    if q >= 3:
        lead = ctx.sq_any["S"]["K"][0 : q - 2, 2 : 2 + nH]
        adm = ctx.adm_s[q, hsl]
        for yr in ("E", "K"):
            name = f"tri_{yr}"
            chain = (
                store[("chy", name)][p, 1 : q - 1, jsl, q - 1 : q - 1 + nH]
                + store[("cna", name)][p, 1 : q - 1, jsl, q - 1 : q - 1 + nH]
            )
            vals = np.einsum("gih,gh->ih", chain[::-1], lead)
            store[("tri", yr)][p, q, isl, hsl] = ctx.ki * adm[None, :] * vals

    # tight_rs (closed on both strands)
    if p >= 3 and q >= 3:
        lead_r = ctx.sq_any["R"]["K"][0 : p - 2, 2 : 2 + nI]
        lead_s = ctx.sq_any["S"]["K"][0 : q - 2, 2 : 2 + nH]
        chain = (
            store[("chy", "box")][
                1 : p - 1, 1 : q - 1, p - 1 : p - 1 + nI, q - 1 : q - 1 + nH
            ]
            + store[("cna", "box")][
                1 : p - 1, 1 : q - 1, p - 1 : p - 1 + nI, q - 1 : q - 1 + nH
            ]
        )
        vals = np.einsum("abih,ai,bh->ih", chain[::-1, ::-1], lead_r, lead_s)
        adm = ctx.adm_r[p, isl][:, None] * ctx.adm_s[q, hsl][None, :]
        store[("box",)][p, q, isl, hsl] = ctx.ki * ctx.ki * adm * vals


def _item_block(store: TensorStore, ctx: _Ctx, lab: ChainLabel, kind: str,
                p: int, q: int) -> tuple[np.ndarray, float]:
    """Start-anchored item block for chain fills, plus its branch factor."""
    n, m = ctx.n, ctx.m
    nI, nH = n - p + 1, m - q + 1
    sl = (slice(1, p + 1), slice(1, q + 1), slice(1, nI + 1), slice(1, nH + 1))
    wbr_r = ctx.kb if lab.class_r == "K" else 1.0
    wbr_s = ctx.kb if lab.class_s == "K" else 1.0
    if kind == "hy":
        return store[("hy", lab.hy_class)][sl], 1.0
    if kind == "vee":
        return store[("vee", lab.class_s)][sl], wbr_r
    if kind == "tri":
        return store[("tri", lab.class_r)][sl], wbr_s
    return store[("box",)][sl], wbr_r * wbr_s


def _fill_chains(store: TensorStore, ctx: _Ctx, lab: ChainLabel, p: int, q: int) -> None:
    n, m = ctx.n, ctx.m
    nI, nH = n - p + 1, m - q + 1
    jsl = slice(p, p + nI)
    lsl = slice(q, q + nH)

    aft_hy = store[("aft_hy", lab.name)][0:p, 0:q, jsl, lsl][::-1, ::-1]
    aft_na = store[("aft_na", lab.name)][0:p, 0:q, jsl, lsl][::-1, ::-1]
    gna = store[("gna", lab.name)][0:p, 0:q, jsl, lsl][::-1, ::-1]
    tq_r = ctx.tq_r(lab)[0:p, jsl][::-1]
    tq_s = ctx.tq_s(lab)[0:q, lsl][::-1]

    item, wbr = _item_block(store, ctx, lab, "hy", p, q)
    store[("chy", lab.name)][p, q, jsl, lsl] = np.einsum(
        "abih,abih->ih", item, aft_hy
    )

    cna = np.zeros((nI, nH))
    cnb = np.zeros((nI, nH)) if lab.has_nb else None
    for kind in ("vee", "tri", "box"):
        item, wbr = _item_block(store, ctx, lab, kind, p, q)
        if lab.tail_s == "flush":
            excluded = kind in ("tri", "box")
        elif lab.tail_r == "flush":
            excluded = kind in ("vee", "box")
        else:
            excluded = False
        if not excluded:
            cna += wbr * np.einsum("abih,abih->ih", item, aft_na)
        else:
            cna += wbr * np.einsum("abih,abih->ih", item, gna)
            cnb += wbr * np.einsum("abih,ai,bh->ih", item, tq_r, tq_s)
    store[("cna", lab.name)][p, q, jsl, lsl] = cna
    if cnb is not None:
        store[("cnb", lab.name)][p, q, jsl, lsl] = cnb


def _fill_gaps(store: TensorStore, ctx: _Ctx, lab: ChainLabel, p: int, q: int) -> None:
    n, m = ctx.n, ctx.m
    nI, nH = n - p + 1, m - q + 1
    jsl = slice(p, p + nI)
    lsl = slice(q, q + nH)
    xsl = slice(1, nI + 1)
    ysl = slice(1, nH + 1)

    def chain_block(parts):
        block = np.zeros((p, q, nI, nH))
        for part in parts:
            if part == "nb" and not lab.has_nb:
                continue
            key = {"hy": "chy", "na": "cna", "nb": "cnb"}[part]
            block += store[(key, lab.name)][1 : p + 1, 1 : q + 1, jsl, lsl]
        return block[::-1, ::-1]  # align axis g = p - rp with ascending g

    all_block = chain_block(("hy", "na", "nb"))
    nohy_block = chain_block(("na", "nb"))

    sq_any_r = ctx.sq_any["R"][lab.class_r][0:p, xsl]
    sq_any_s = ctx.sq_any["S"][lab.class_s][0:q, ysl]
    sq_ge1_r = ctx.sq_ge1["R"][lab.class_r][0:p, xsl]
    sq_ge1_s = ctx.sq_ge1["S"][lab.class_s][0:q, ysl]
    sq_unp_r = ctx.sq_unp["R"][lab.class_r][0:p, xsl]
    sq_unp_s = ctx.sq_unp["S"][lab.class_s][0:q, ysl]

    gna_vals = np.einsum("abih,ai,bh->ih", all_block, sq_any_r, sq_any_s)
    store[("gna", lab.name)][p, q, jsl, lsl] = gna_vals
    ghy_vals = (
        np.einsum("abih,ai,bh->ih", all_block, sq_ge1_r, sq_any_s)
        + np.einsum("abih,ai,bh->ih", all_block, sq_unp_r, sq_ge1_s)
        + np.einsum("abih,ai,bh->ih", nohy_block, sq_unp_r, sq_unp_s)
    )
    store[("ghy", lab.name)][p, q, jsl, lsl] = ghy_vals

    tail = np.outer(ctx.tq_r(lab)[p, jsl], ctx.tq_s(lab)[q, lsl])
    store[("aft_hy", lab.name)][p, q, jsl, lsl] = ghy_vals + tail
    store[("aft_na", lab.name)][p, q, jsl, lsl] = gna_vals + tail


# -- public table views (one full inside run backs all three) ---------------


def hybrid_tables(R: Strand, S: Strand, model: EnergyModel) -> dict[str, np.ndarray]:
    """The four anchored hybrid tensors (EE/EK/KE/KK)."""
    res = inside(R, S, model)
    return {cls: res.store[("hy", cls)] for cls in HY_CLASSES}


def tight_recursions(R: Strand, S: Strand, model: EnergyModel) -> dict[tuple, np.ndarray]:
    """Tensors of the four tight-structure kinds (the single-arc kind is the
    hybrid base diagonal)."""
    res = inside(R, S, model)
    out = {k: res.store[k] for k in _ITEM_KEYS if k[0] in ("vee", "tri", "box")}
    out[("arc",)] = res.store[("hy", "EE")][1, 1].copy()
    return out


def rt_dt_recursions(R: Strand, S: Strand, model: EnergyModel) -> dict[tuple, np.ndarray]:
    """Chain and gap tensors (the right-tight / double-tight block machinery)."""
    res = inside(R, S, model)
    return {k: res.store[k] for k in _CHAIN_KEYS if k[0] in ("chy", "cna", "cnb", "ghy", "gna")}
