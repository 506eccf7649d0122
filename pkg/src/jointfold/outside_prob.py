"""Outside pass: component, base-pair, hybrid and target-site probabilities.

The sweep visits waves in the reverse of the inside order and applies the
transpose of every inside production: for a term ``C += A * B * k`` it
accumulates ``out_A += out_C * B * k`` and ``out_B += out_C * A * k``.  The
outside value of a cell times its inside value, divided by the total
partition function, is the probability that a parse contains the component
at that cell; the top-level placements seed the sweep.

Base-pair probabilities combine three sources: tight-block closing arcs
(read off the block tensors directly), arcs inside secondary segments
(propagated into the per-strand tables and swept by the 2D outside), and
exterior arcs (each arc is the last arc of exactly one anchored hybrid
prefix).  Hybrid probabilities come from the block-placement accumulator
only, which is exactly the maximal-hybrid placement mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._cases import verify_reconstruction
from .grammar_inside import HY_CLASSES, LABELS, ChainLabel, InsideResult

__all__ = [
    "ProbTables",
    "HybridProbMatrix",
    "TargetRow",
    "TargetTable",
    "outside",
    "hybrid_probabilities",
    "target_sites",
]


@dataclass
class ProbTables:
    """Probability tables produced by the outside pass.

    ``bpp_r``/``bpp_s`` are (L+2)x(L+2) arrays over interior arcs,
    ``bpp_ext`` is (N+2)x(M+2) over exterior arcs; all entries in [0,1].
    Component probabilities are available through
    :meth:`component_probability` for every tensor key of the inside store.
    """

    res: InsideResult
    z: float
    bpp_r: np.ndarray
    bpp_s: np.ndarray
    bpp_ext: np.ndarray
    out_keys: tuple = ()
    tpf_max_deviation: float | None = None

    def component_probability(self, key: tuple) -> np.ndarray:
        """P(component at cell) in the inside store's [p,q,anchor] layout."""
        return self.res.store[("out",) + key] * self.res.store[key] / self.z


@dataclass
class HybridProbMatrix:
    """Maximal-hybrid footprint probabilities, per class and total."""

    n: int
    m: int
    per_class: dict[str, np.ndarray]  # start-anchored [p, q, i, h]
    total: np.ndarray

    def p_hy(self, i: int, j: int, h: int, l: int) -> float:
        if j < i or l < h:
            return 0.0
        return float(self.total[j - i + 1, l - h + 1, i, h])

    def entries(self, threshold: float = 0.0):
        """Yield (i, j, h, l, probability) for cells above the threshold."""
        idx = np.argwhere(self.total > threshold)
        rows = []
        for p, q, i, h in idx:
            if 1 <= i and i + p - 1 <= self.n and 1 <= h and h + q - 1 <= self.m:
                rows.append((int(i), int(i + p - 1), int(h), int(h + q - 1),
                             float(self.total[p, q, i, h])))
        rows.sort(key=lambda r: (-r[4], r[0], r[1], r[2], r[3]))
        return rows


@dataclass(frozen=True)
class TargetRow:
    strand: str  # "R" | "S"
    start: int
    end: int
    probability: float


@dataclass
class TargetTable:
    """Per-region interaction probabilities, sorted descending."""

    rows: list[TargetRow] = field(default_factory=list)
    threshold: float = 0.1

    @property
    def p_opt(self) -> TargetRow | None:
        return self.rows[0] if self.rows else None


def _alloc_out(res: InsideResult):
    store = res.store
    keys = [k for k in store.arrays.keys() if k[0] not in ("aft_hy", "aft_na")]
    for key in list(keys):
        store.alloc(("out",) + key)
    for cls in HY_CLASSES:
        store.alloc(("out", "hyb", cls))
    return keys


class _OutSweep:
    def __init__(self, res: InsideResult):
        self.res = res
        self.ctx = res.ctx
        self.store = res.store
        n, m = self.ctx.n, self.ctx.m
        self.n, self.m = n, m
        # diagonal accumulators [g,x] / [g,j] for segment and tail factors
        self.out_sq = {
            sid: {k: np.zeros((ln + 2, ln + 2)) for k in ("q", "q1", "qk", "q1k")}
            for sid, ln in (("R", n), ("S", m))
        }
        self.out_tq = {
            sid: {k: np.zeros((ln + 2, ln + 2)) for k in ("q", "qk")}
            for sid, ln in (("R", n), ("S", m))
        }
        # interval accumulators (i,j) for top-level segments
        self.out_iv = {
            sid: {k: np.zeros((ln + 2, ln + 2)) for k in ("q",)}
            for sid, ln in (("R", n), ("S", m))
        }
        self.bpp_ext_mass = np.zeros((n + 2, m + 2))
        self.bpr_diag = np.zeros((n + 2, n + 2))  # [p, i]: R tight closers
        self.bps_diag = np.zeros((m + 2, m + 2))

    # -- seeds ---------------------------------------------------------------

    def seed_top(self) -> None:
        ctx, store = self.ctx, self.store
        n, m = self.n, self.m
        qr, qs = ctx.sec_r.engine, ctx.sec_s.engine
        self.out_iv["R"]["q"][1, n] += qs.value("q", 1, m)
        self.out_iv["S"]["q"][1, m] += qr.value("q", 1, n)
        for p in range(1, n + 1):
            wr = qr.value("q", 1, n - p)
            for q in range(1, m + 1):
                ws = qs.value("q", 1, m - q)
                w = wr * ws
                if w == 0.0:
                    continue
                store[("out", "chy", "top")][p, q, n, m] += w
                store[("out", "cna", "top")][p, q, n, m] += w
                chain_val = (
                    store[("chy", "top")][p, q, n, m]
                    + store[("cna", "top")][p, q, n, m]
                )
                if chain_val != 0.0:
                    if n - p >= 1:
                        self.out_iv["R"]["q"][1, n - p] += ws * chain_val
                    if m - q >= 1:
                        self.out_iv["S"]["q"][1, m - q] += wr * chain_val

    # -- per-wave transposes ---------------------------------------------------

    def gaps(self, lab: ChainLabel, p: int, q: int) -> None:
        ctx, store = self.ctx, self.store
        n, m = self.n, self.m
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
            return block[::-1, ::-1]

        def scatter_chain(parts, contrib):
            # contrib aligned with ascending g; chain rows rp = p - g
            rev = contrib[::-1, ::-1]
            for part in parts:
                if part == "nb" and not lab.has_nb:
                    continue
                key = {"hy": "chy", "na": "cna", "nb": "cnb"}[part]
                store[("out", key, lab.name)][1 : p + 1, 1 : q + 1, jsl, lsl] += rev

        sq_any_r = ctx.sq_any["R"][lab.class_r][0:p, xsl]
        sq_any_s = ctx.sq_any["S"][lab.class_s][0:q, ysl]
        sq_ge1_r = ctx.sq_ge1["R"][lab.class_r][0:p, xsl]
        sq_ge1_s = ctx.sq_ge1["S"][lab.class_s][0:q, ysl]
        sq_unp_r = ctx.sq_unp["R"][lab.class_r][0:p, xsl]
        sq_unp_s = ctx.sq_unp["S"][lab.class_s][0:q, ysl]
        all_block = chain_block(("hy", "na", "nb"))
        nohy_block = chain_block(("na", "nb"))
        anyk_r = "qk" if lab.class_r == "K" else "q"
        anyk_s = "qk" if lab.class_s == "K" else "q"
        ge1k_r = "q1k" if lab.class_r == "K" else "q1"
        ge1k_s = "q1k" if lab.class_s == "K" else "q1"

        o_gna = store[("out", "gna", lab.name)][p, q, jsl, lsl]
        if o_gna.any():
            scatter_chain(
                ("hy", "na", "nb"),
                np.einsum("ih,ai,bh->abih", o_gna, sq_any_r, sq_any_s),
            )
            self.out_sq["R"][anyk_r][0:p, xsl] += np.einsum(
                "ih,abih,bh->ai", o_gna, all_block, sq_any_s
            )
            self.out_sq["S"][anyk_s][0:q, ysl] += np.einsum(
                "ih,abih,ai->bh", o_gna, all_block, sq_any_r
            )

        o_ghy = store[("out", "ghy", lab.name)][p, q, jsl, lsl]
        if o_ghy.any():
            scatter_chain(
                ("hy", "na", "nb"),
                np.einsum("ih,ai,bh->abih", o_ghy, sq_ge1_r, sq_any_s)
                + np.einsum("ih,ai,bh->abih", o_ghy, sq_unp_r, sq_ge1_s),
            )
            scatter_chain(
                ("na", "nb"),
                np.einsum("ih,ai,bh->abih", o_ghy, sq_unp_r, sq_unp_s),
            )
            self.out_sq["R"][ge1k_r][0:p, xsl] += np.einsum(
                "ih,abih,bh->ai", o_ghy, all_block, sq_any_s
            )
            self.out_sq["S"][anyk_s][0:q, ysl] += np.einsum(
                "ih,abih,ai->bh", o_ghy, all_block, sq_ge1_r
            )
            self.out_sq["S"][ge1k_s][0:q, ysl] += np.einsum(
                "ih,abih,ai->bh", o_ghy, all_block, sq_unp_r
            )

    def chains(self, lab: ChainLabel, p: int, q: int) -> None:
        ctx, store = self.ctx, self.store
        n, m = self.n, self.m
        nI, nH = n - p + 1, m - q + 1
        isl = slice(1, nI + 1)
        hsl = slice(1, nH + 1)
        jsl = slice(p, p + nI)
        lsl = slice(q, q + nH)
        item_sl = (slice(1, p + 1), slice(1, q + 1), isl, hsl)

        aft_hy = store[("aft_hy", lab.name)][0:p, 0:q, jsl, lsl][::-1, ::-1]
        aft_na = store[("aft_na", lab.name)][0:p, 0:q, jsl, lsl][::-1, ::-1]
        gna = store[("gna", lab.name)][0:p, 0:q, jsl, lsl][::-1, ::-1]
        tq_r = ctx.tq_r(lab)[0:p, jsl][::-1]
        tq_s = ctx.tq_s(lab)[0:q, lsl][::-1]
        free_r = lab.tail_r == "free"
        free_s = lab.tail_s == "free"
        anyk_r = "qk" if lab.class_r == "K" else "q"
        anyk_s = "qk" if lab.class_s == "K" else "q"
        wbr_r = ctx.kb if lab.class_r == "K" else 1.0
        wbr_s = ctx.kb if lab.class_s == "K" else 1.0

        def item_key(kind):
            if kind == "hy":
                return ("hy", lab.hy_class), 1.0
            if kind == "vee":
                return ("vee", lab.class_s), wbr_r
            if kind == "tri":
                return ("tri", lab.class_r), wbr_s
            return ("box",), wbr_r * wbr_s

        def push_tail_and_gap(o, kind, gap_fam):
            """Transpose of item x (gap + tail) for outside weight grid o."""
            key, wbr = item_key(kind)
            item = store[key][item_sl]
            gap_block = gna if gap_fam == "gna" else store[
                ("ghy", lab.name)
            ][0:p, 0:q, jsl, lsl][::-1, ::-1]
            # into the item
            aft = gap_block + tq_r[:, None, :, None] * tq_s[None, :, None, :]
            contrib = wbr * o[None, None, :, :] * aft
            store[("out", key[0]) + key[1:]][item_sl] += contrib
            if kind == "hy":
                store[("out", "hyb", lab.hy_class)][item_sl] += contrib
            # into the gap tensor (valid rows only: dp <= p-1, dq <= q-1)
            if p > 1 and q > 1:
                gap_contrib = (wbr * o[None, None, :, :] * item)[: p - 1, : q - 1]
                store[("out", gap_fam, lab.name)][1:p, 1:q, jsl, lsl] += (
                    gap_contrib[::-1, ::-1]
                )
            # into the tail tables
            if free_r:
                red = np.einsum("ih,abih,bh->ai", wbr * o, item, tq_s)
                self.out_tq["R"][anyk_r][0:p, jsl] += red[::-1]
            if free_s:
                red = np.einsum("ih,abih,ai->bh", wbr * o, item, tq_r)
                self.out_tq["S"][anyk_s][0:q, lsl] += red[::-1]

        def push_gap_only(o, kind):
            key, wbr = item_key(kind)
            item = store[key][item_sl]
            contrib = wbr * o[None, None, :, :] * gna
            store[("out", key[0]) + key[1:]][item_sl] += contrib
            if p > 1 and q > 1:
                gap_contrib = (wbr * o[None, None, :, :] * item)[: p - 1, : q - 1]
                store[("out", "gna", lab.name)][1:p, 1:q, jsl, lsl] += (
                    gap_contrib[::-1, ::-1]
                )

        def push_tail_only(o, kind):
            key, wbr = item_key(kind)
            item = store[key][item_sl]
            contrib = wbr * o[None, None, :, :] * (
                tq_r[:, None, :, None] * tq_s[None, :, None, :]
            )
            store[("out", key[0]) + key[1:]][item_sl] += contrib
            if free_r:
                red = np.einsum("ih,abih,bh->ai", wbr * o, item, tq_s)
                self.out_tq["R"][anyk_r][0:p, jsl] += red[::-1]
            if free_s:
                red = np.einsum("ih,abih,ai->bh", wbr * o, item, tq_r)
                self.out_tq["S"][anyk_s][0:q, lsl] += red[::-1]

        o_chy = store[("out", "chy", lab.name)][p, q, jsl, lsl]
        if o_chy.any():
            push_tail_and_gap(o_chy, "hy", "ghy")

        o_cna = store[("out", "cna", lab.name)][p, q, jsl, lsl]
        o_cnb = (
            store[("out", "cnb", lab.name)][p, q, jsl, lsl] if lab.has_nb else None
        )
        for kind in ("vee", "tri", "box"):
            if lab.tail_s == "flush":
                excluded = kind in ("tri", "box")
            elif lab.tail_r == "flush":
                excluded = kind in ("vee", "box")
            else:
                excluded = False
            if not excluded:
                if o_cna.any():
                    push_tail_and_gap(o_cna, kind, "gna")
            else:
                if o_cna.any():
                    push_gap_only(o_cna, kind)
                if o_cnb is not None and o_cnb.any():
                    push_tail_only(o_cnb, kind)

    def items(self, p: int, q: int) -> None:
        ctx, store = self.ctx, self.store
        n, m = self.n, self.m
        nI, nH = n - p + 1, m - q + 1
        isl = slice(1, nI + 1)
        hsl = slice(1, nH + 1)
        jsl = slice(p, p + nI)
        lsl = slice(q, q + nH)

        # hybrids: exterior-arc mass plus prefix peeling
        for cls in HY_CLASSES:
            o = store[("out", "hy", cls)][p, q, isl, hsl]
            if not o.any():
                continue
            inside_vals = store[("hy", cls)][p, q, isl, hsl]
            self.bpp_ext_mass[jsl, lsl] += o * inside_vals
            if p >= 2 and q >= 2:
                kern = ctx.step[cls][p - 2 :: -1, q - 2 :: -1][: p - 1, : q - 1]
                owext = o * ctx.wext[jsl, lsl]
                store[("out", "hy", cls)][1:p, 1:q, isl, hsl] += np.einsum(
                    "ih,ab->abih", owext, kern
                )

        # tight_r
        if p >= 3:
            lead = ctx.sq_any["R"]["K"][0 : p - 2, 2 : 2 + nI]
            adm = ctx.adm_r[p, isl]
            for ys in ("E", "K"):
                name = f"vee_{ys}"
                o = store[("out", "vee", ys)][p, q, isl, hsl]
                if not o.any():
                    continue
                self.bpr_diag[p, isl] += (
                    o * store[("vee", ys)][p, q, isl, hsl]
                ).sum(axis=1)
                oa = ctx.ki * adm[:, None] * o
                contrib = oa[None, :, :] * lead[:, :, None]
                for key in (("chy", name), ("cna", name)):
                    store[("out",) + key][
                        1 : p - 1, q, p - 1 : p - 1 + nI, lsl
                    ] += contrib[::-1]
                chain = (
                    store[("chy", name)][1 : p - 1, q, p - 1 : p - 1 + nI, lsl]
                    + store[("cna", name)][1 : p - 1, q, p - 1 : p - 1 + nI, lsl]
                )[::-1]
                self.out_sq["R"]["qk"][0 : p - 2, 2 : 2 + nI] += np.einsum(
                    "ih,gih->gi", oa, chain
                )

        # tight_s
        if q >= 3:
            lead = ctx.sq_any["S"]["K"][0 : q - 2, 2 : 2 + nH]
            adm = ctx.adm_s[q, hsl]
            for yr in ("E", "K"):
                name = f"tri_{yr}"
                o = store[("out", "tri", yr)][p, q, isl, hsl]
                if not o.any():
                    continue
                self.bps_diag[q, hsl] += (
                    o * store[("tri", yr)][p, q, isl, hsl]
                ).sum(axis=0)
                oa = ctx.ki * adm[None, :] * o
                contrib = oa[None, :, :] * lead[:, None, :]
                for key in (("chy", name), ("cna", name)):
                    store[("out",) + key][
                        p, 1 : q - 1, jsl, q - 1 : q - 1 + nH
                    ] += contrib[::-1]
                chain = (
                    store[("chy", name)][p, 1 : q - 1, jsl, q - 1 : q - 1 + nH]
                    + store[("cna", name)][p, 1 : q - 1, jsl, q - 1 : q - 1 + nH]
                )[::-1]
                self.out_sq["S"]["qk"][0 : q - 2, 2 : 2 + nH] += np.einsum(
                    "ih,gih->gh", oa, chain
                )

        # tight_rs
        if p >= 3 and q >= 3:
            o = store[("out", "box")][p, q, isl, hsl]
            if o.any():
                in_box = store[("box",)][p, q, isl, hsl]
                self.bpr_diag[p, isl] += (o * in_box).sum(axis=1)
                self.bps_diag[q, hsl] += (o * in_box).sum(axis=0)
                lead_r = ctx.sq_any["R"]["K"][0 : p - 2, 2 : 2 + nI]
                lead_s = ctx.sq_any["S"]["K"][0 : q - 2, 2 : 2 + nH]
                adm = ctx.adm_r[p, isl][:, None] * ctx.adm_s[q, hsl][None, :]
                oa = ctx.ki * ctx.ki * adm * o
                contrib = (
                    oa[None, None, :, :]
                    * lead_r[:, None, :, None]
                    * lead_s[None, :, None, :]
                )
                for key in (("chy", "box"), ("cna", "box")):
                    store[("out",) + key][
                        1 : p - 1, 1 : q - 1, p - 1 : p - 1 + nI, q - 1 : q - 1 + nH
                    ] += contrib[::-1, ::-1]
                chain = (
                    store[("chy", "box")][
                        1 : p - 1, 1 : q - 1, p - 1 : p - 1 + nI, q - 1 : q - 1 + nH
                    ]
                    + store[("cna", "box")][
                        1 : p - 1, 1 : q - 1, p - 1 : p - 1 + nI, q - 1 : q - 1 + nH
                    ]
                )[::-1, ::-1]
                self.out_sq["R"]["qk"][0 : p - 2, 2 : 2 + nI] += np.einsum(
                    "ih,abih,bh->ai", oa, chain, lead_s
                )
                self.out_sq["S"]["qk"][0 : q - 2, 2 : 2 + nH] += np.einsum(
                    "ih,abih,ai->bh", oa, chain, lead_r
                )

    # -- finalisation --------------------------------------------------------

    def sec_seeds(self, sid: str) -> dict[str, np.ndarray]:
        ln = self.n if sid == "R" else self.m
        eng = (self.ctx.sec_r if sid == "R" else self.ctx.sec_s).engine
        seeds = {k: np.zeros((ln + 2, ln + 2)) for k in eng.kinds}
        for kind, diag in self.out_sq[sid].items():
            for g in range(1, ln + 1):
                for x in range(1, ln - g + 2):
                    w = diag[g, x]
                    if w != 0.0:
                        seeds[kind][x, x + g - 1] += w
        for kind, diag in self.out_tq[sid].items():
            for g in range(1, ln + 1):
                for j in range(g, ln + 1):
                    w = diag[g, j]
                    if w != 0.0:
                        seeds[kind][j - g + 1, j] += w
        for kind, iv in self.out_iv[sid].items():
            seeds[kind] += iv
        return seeds


def outside(res: InsideResult, verify_conservation: bool = False) -> ProbTables:
    """Run the outside sweep and assemble all probability tables.

    With ``verify_conservation`` every component cell is recomputed from its
    production cases (conditional probabilities summing to one); the worst
    relative deviation lands in ``ProbTables.tpf_max_deviation``.  Intended
    for small instances.
    """
    keys = _alloc_out(res)
    sweep = _OutSweep(res)
    sweep.seed_top()
    n, m = res.ctx.n, res.ctx.m
    for t in range(n + m, 1, -1):
        for p in range(max(1, t - m), min(n, t - 1) + 1):
            q = t - p
            for name in LABELS:
                sweep.gaps(LABELS[name], p, q)
            for name in LABELS:
                sweep.chains(LABELS[name], p, q)
            sweep.items(p, q)

    z = res.q_total
    bpp_r = np.zeros((n + 2, n + 2))
    bpp_s = np.zeros((m + 2, m + 2))
    for p in range(2, n + 1):
        for i in range(1, n - p + 2):
            bpp_r[i, i + p - 1] += sweep.bpr_diag[p, i]
    for q in range(2, m + 1):
        for h in range(1, m - q + 2):
            bpp_s[h, h + q - 1] += sweep.bps_diag[q, h]

    eng_r = res.sec_r.engine
    eng_s = res.sec_s.engine
    out2d_r = eng_r.outside(sweep.sec_seeds("R"))
    out2d_s = eng_s.outside(sweep.sec_seeds("S"))
    bpp_r += eng_r.arc_probabilities(out2d_r, 1.0)
    bpp_s += eng_s.arc_probabilities(out2d_s, 1.0)
    bpp_r /= z
    bpp_s /= z
    bpp_ext = sweep.bpp_ext_mass / z

    tpf = None
    if verify_conservation:
        tpf = verify_reconstruction(res, rel_tol=1e-9)

    return ProbTables(
        res=res, z=z, bpp_r=bpp_r, bpp_s=bpp_s, bpp_ext=bpp_ext,
        out_keys=tuple(keys), tpf_max_deviation=tpf,
    )


def hybrid_probabilities(res: InsideResult, prob: ProbTables) -> HybridProbMatrix:
    """P(a maximal hybrid occupies exactly footprint (i..j, h..l)).

    The four class tensors are independent contributions; the total is their
    sum per cell.
    """
    store = res.store
    per_class = {}
    total = None
    for cls in HY_CLASSES:
        arr = store[("out", "hyb", cls)] * store[("hy", cls)] / prob.z
        per_class[cls] = arr
        total = arr.copy() if total is None else total + arr
    return HybridProbMatrix(n=res.ctx.n, m=res.ctx.m, per_class=per_class, total=total)


def target_sites(hyb: HybridProbMatrix, threshold: float = 0.1) -> TargetTable:
    """Aggregate hybrid probabilities into per-region target probabilities.

    A region's probability is the sum of ``p_hy`` over all partner-strand
    footprints.  Rows above the threshold are sorted by descending
    probability; ``p_opt`` is the top row.
    """
    mass_r: dict[tuple[int, int], float] = {}
    mass_s: dict[tuple[int, int], float] = {}
    for (i, j, h, l, w) in hyb.entries(0.0):
        mass_r[(i, j)] = mass_r.get((i, j), 0.0) + w
        mass_s[(h, l)] = mass_s.get((h, l), 0.0) + w
    rows = [
        TargetRow("R", i, j, w) for (i, j), w in mass_r.items() if w > threshold
    ] + [
        TargetRow("S", h, l, w) for (h, l), w in mass_s.items() if w > threshold
    ]
    rows.sort(key=lambda r: (-r.probability, r.strand, r.start, r.end))
    return TargetTable(rows=rows, threshold=threshold)
