"""Per-cell production cases of the inside grammar.

This is the scalar, readable transcription of exactly the productions the
vectorised wave fills in :mod:`jointfold.grammar_inside` implement.  The
stochastic sampler draws from these cases, and the consistency checks
recompute every tensor cell from them; any drift between the two
formulations fails the reconstruction and conservation tests.

Components are tuples:

* ``("top",)``                                 - the full joint ensemble
* ``("hy", cls, i, j, h, l)``                  - anchored hybrid run
* ``("vee", ys, i, j, h, l)``                  - tight block closed on R
* ``("tri", yr, i, j, h, l)``                  - tight block closed on S
* ``("box", i, j, h, l)``                      - tight block closed on both
* ``("chain", parts, name, a, b, c, d)``       - block chain, first item at (a,c)
* ``("gap", after, name, x, b, y, d)``         - inter-item segments + rest
* ``("sec", sid, kind, i, j)``                 - secondary segment table cell
* ``("unp", sid, cls, i, j)``                  - forced all-unpaired segment

A case is ``(weight, children, emissions)``; the component value is the sum
over cases of the weight times the product of child values.  ``emissions``
are the arcs fixed by choosing the case: ``("ext", i, h)``, ``("arc_r", i,
j)`` or ``("arc_s", h, l)``.
"""

from __future__ import annotations

from .grammar_inside import HY_CLASSES, LABELS, InsideResult

ALL_PARTS = ("hy", "na", "nb")

_SEG_ANY = {"E": "q", "K": "qk"}
_SEG_GE1 = {"E": "q1", "K": "q1k"}


def _sec_engine(res: InsideResult, sid: str):
    return (res.sec_r if sid == "R" else res.sec_s).engine


def component_value(res: InsideResult, comp: tuple) -> float:
    kind = comp[0]
    if kind == "top":
        return res.q_total
    if kind in ("hy", "vee", "tri"):
        return res.value((kind, comp[1]), *comp[2:])
    if kind == "box":
        return res.value(("box",), *comp[1:])
    if kind == "chain":
        _, parts, name, a, b, c, d = comp
        return res.chain_value(parts, name, a, b, c, d)
    if kind == "gap":
        _, after, name, x, b, y, d = comp
        return res.value(("ghy" if after == "hy" else "gna", name), x, b, y, d)
    if kind == "sec":
        _, sid, table, i, j = comp
        return _sec_engine(res, sid).value(table, i, j)
    if kind == "unp":
        _, sid, cls, i, j = comp
        if j < i:
            return 1.0
        u = res.ctx.ku if cls == "K" else 1.0
        return u ** (j - i + 1)
    raise KeyError(f"unknown component {comp!r}")


def _chain_item(res, lab, kind, a, x, c, y):
    """Item component, branch-weight factor and arc emissions for one kind."""
    ctx = res.ctx
    wbr_r = ctx.kb if lab.class_r == "K" else 1.0
    wbr_s = ctx.kb if lab.class_s == "K" else 1.0
    if kind == "hy":
        return ("hy", lab.hy_class, a, x, c, y), 1.0
    if kind == "vee":
        return ("vee", lab.class_s, a, x, c, y), wbr_r
    if kind == "tri":
        return ("tri", lab.class_r, a, x, c, y), wbr_s
    return ("box", a, x, c, y), wbr_r * wbr_s


def _part_of(lab, kind: str, terminal: bool) -> str:
    if kind == "hy":
        return "hy"
    if terminal:
        if lab.tail_s == "flush" and kind in ("tri", "box"):
            return "nb"
        if lab.tail_r == "flush" and kind in ("vee", "box"):
            return "nb"
    return "na"


def component_cases(res: InsideResult, comp: tuple) -> list[tuple]:
    """All mutually exclusive cases of one component cell."""
    ctx = res.ctx
    kind = comp[0]
    out: list[tuple] = []

    if kind == "top":
        n, m = ctx.n, ctx.m
        out.append((1.0, [("sec", "R", "q", 1, n), ("sec", "S", "q", 1, m)], []))
        for a in range(1, n + 1):
            for c in range(1, m + 1):
                out.append(
                    (
                        1.0,
                        [
                            ("sec", "R", "q", 1, a - 1),
                            ("sec", "S", "q", 1, c - 1),
                            ("chain", ALL_PARTS, "top", a, n, c, m),
                        ],
                        [],
                    )
                )
        return out

    if kind == "hy":
        _, cls, i, j, h, l = comp
        if i == j and h == l:
            w = ctx.wext[i, h]
            if w != 0.0:
                out.append((w, [], [("ext", i, h)]))
            return out
        if i == j or h == l:
            return out
        wlast = ctx.wext[j, l]
        if wlast == 0.0:
            return out
        for i1 in range(i, j):
            for h1 in range(h, l):
                step = ctx.step[cls][j - i1 - 1, l - h1 - 1]
                out.append(
                    (wlast * step, [("hy", cls, i, i1, h, h1)], [("ext", j, l)])
                )
        return out

    if kind == "vee":
        _, ys, i, j, h, l = comp
        if ctx.adm_r[j - i + 1, i] == 0.0:
            return out
        name = f"vee_{ys}"
        for a in range(i + 1, j):
            out.append(
                (
                    ctx.ki,
                    [
                        ("sec", "R", "qk", i + 1, a - 1),
                        ("chain", ("hy", "na"), name, a, j - 1, h, l),
                    ],
                    [("arc_r", i, j)],
                )
            )
        return out

    if kind == "tri":
        _, yr, i, j, h, l = comp
        if ctx.adm_s[l - h + 1, h] == 0.0:
            return out
        name = f"tri_{yr}"
        for c in range(h + 1, l):
            out.append(
                (
                    ctx.ki,
                    [
                        ("sec", "S", "qk", h + 1, c - 1),
                        ("chain", ("hy", "na"), name, i, j, c, l - 1),
                    ],
                    [("arc_s", h, l)],
                )
            )
        return out

    if kind == "box":
        _, i, j, h, l = comp
        if ctx.adm_r[j - i + 1, i] == 0.0 or ctx.adm_s[l - h + 1, h] == 0.0:
            return out
        for a in range(i + 1, j):
            for c in range(h + 1, l):
                out.append(
                    (
                        ctx.ki * ctx.ki,
                        [
                            ("sec", "R", "qk", i + 1, a - 1),
                            ("sec", "S", "qk", h + 1, c - 1),
                            ("chain", ALL_PARTS, "box", a, j - 1, c, l - 1),
                        ],
                        [("arc_r", i, j), ("arc_s", h, l)],
                    )
                )
        return out

    if kind == "chain":
        _, parts, name, a, b, c, d = comp
        lab = LABELS[name]
        for item_kind in ("hy", "vee", "tri", "box"):
            for x in range(a, b + 1):
                for y in range(c, d + 1):
                    item, wbr = _chain_item(res, lab, item_kind, a, x, c, y)
                    # terminal: no further items
                    if (lab.tail_r == "free" or x == b) and (
                        lab.tail_s == "free" or y == d
                    ):
                        if _part_of(lab, item_kind, True) in parts:
                            children = [item]
                            if lab.tail_r == "free":
                                children.append(
                                    ("sec", "R", _SEG_ANY[lab.class_r], x + 1, b)
                                )
                            if lab.tail_s == "free":
                                children.append(
                                    ("sec", "S", _SEG_ANY[lab.class_s], y + 1, d)
                                )
                            out.append((wbr, children, []))
                    # another item follows
                    if x < b and y < d and _part_of(lab, item_kind, False) in parts:
                        after = "hy" if item_kind == "hy" else "na"
                        out.append(
                            (wbr, [item, ("gap", after, name, x + 1, b, y + 1, d)], [])
                        )
        return out

    if kind == "gap":
        _, after, name, x, b, y, d = comp
        lab = LABELS[name]
        any_r = _SEG_ANY[lab.class_r]
        any_s = _SEG_ANY[lab.class_s]
        for x1 in range(x, b + 1):
            for y1 in range(y, d + 1):
                rest_all = ("chain", ALL_PARTS, name, x1, b, y1, d)
                if after == "na":
                    out.append(
                        (
                            1.0,
                            [
                                ("sec", "R", any_r, x, x1 - 1),
                                ("sec", "S", any_s, y, y1 - 1),
                                rest_all,
                            ],
                            [],
                        )
                    )
                else:
                    out.append(
                        (
                            1.0,
                            [
                                ("sec", "R", _SEG_GE1[lab.class_r], x, x1 - 1),
                                ("sec", "S", any_s, y, y1 - 1),
                                rest_all,
                            ],
                            [],
                        )
                    )
                    out.append(
                        (
                            1.0,
                            [
                                ("unp", "R", lab.class_r, x, x1 - 1),
                                ("sec", "S", _SEG_GE1[lab.class_s], y, y1 - 1),
                                rest_all,
                            ],
                            [],
                        )
                    )
                    out.append(
                        (
                            1.0,
                            [
                                ("unp", "R", lab.class_r, x, x1 - 1),
                                ("unp", "S", lab.class_s, y, y1 - 1),
                                ("chain", ("na", "nb"), name, x1, b, y1, d),
                            ],
                            [],
                        )
                    )
        return out

    raise KeyError(f"no cases for component {comp!r}")


def case_value(res: InsideResult, case: tuple) -> float:
    w, children, _em = case
    for child in children:
        w *= component_value(res, child)
        if w == 0.0:
            return 0.0
    return w


def recompute_value(res: InsideResult, comp: tuple) -> float:
    return sum(case_value(res, case) for case in component_cases(res, comp))


def iter_all_components(res: InsideResult):
    """Every 4D component cell, for reconstruction/conservation sweeps."""
    n, m = res.ctx.n, res.ctx.m
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            for h in range(1, m + 1):
                for l in range(h, m + 1):
                    cell = (i, j, h, l)
                    for cls in HY_CLASSES:
                        yield ("hy", cls, *cell)
                    for ys in ("E", "K"):
                        yield ("vee", ys, *cell)
                        yield ("tri", ys, *cell)
                    yield ("box", *cell)
                    for name in LABELS:
                        for part in ALL_PARTS:
                            if part == "nb" and not LABELS[name].has_nb:
                                continue
                            yield ("chain", (part,), name, *cell)
                        for after in ("hy", "na"):
                            yield ("gap", after, name, *cell)


def verify_reconstruction(res: InsideResult, rel_tol: float = 1e-12) -> float:
    """Recompute every cell from its cases; return the worst relative error.

    This is the per-cell check that the mutually exclusive right-hand-side
    cases of every recursion sum to the stored left-hand side.
    """
    worst = 0.0
    for comp in iter_all_components(res):
        stored = component_value(res, comp)
        recomputed = recompute_value(res, comp)
        scale = max(abs(stored), abs(recomputed), 1e-300)
        err = abs(stored - recomputed) / scale
        if stored == 0.0 and recomputed == 0.0:
            err = 0.0
        worst = max(worst, err)
        if err > rel_tol:
            raise AssertionError(
                f"cell {comp} reconstructs to {recomputed!r}, stored {stored!r}"
            )
    top = recompute_value(res, ("top",))
    scale = max(abs(top), abs(res.q_total))
    worst = max(worst, abs(top - res.q_total) / scale)
    return worst
