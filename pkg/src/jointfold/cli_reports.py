"""Command-line surface: ingestion, subcommands and serialized reports.

Subcommands: ``pf`` (partition functions), ``bpp`` (base-pair probability
matrices), ``hybrids`` (4D hybrid matrix + R projection), ``targets``
(ranked target sites), ``sample`` (Boltzmann samples in extended
dot-bracket), ``dotplot`` (SVG contact-region plot) and ``oracle`` (the
developer cross-check).

All internal math indexes the target strand S from its 3' end; every report
translates S coordinates back to 5'->3' and says so in its header.  Output
formatting is locale-independent and deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .energy import EnergyModel, ParamError, default_model, load_params
from .grammar_inside import InsideResult, estimate_memory_bytes, inside
from .oracle import OracleLimits, enumerate_interactions
from .outside_prob import (
    HybridProbMatrix,
    ProbTables,
    hybrid_probabilities,
    outside,
    target_sites,
)
from .sampler import sample_batch
from .seq_model import Strand, StrandRole, extract_hybrids

__all__ = ["CliError", "RunConfig", "ingest_fasta", "run", "main"]

PARAMS_ENV = "JOINTFOLD_PARAMS"
DEFAULT_BUDGET_BYTES = 2 * 1024**3


class CliError(Exception):
    """Machine-parsable CLI failure: one-line ``<Class>: <message>``."""

    def __init__(self, error_class: str, message: str):
        self.error_class = error_class
        super().__init__(message)

    def oneline(self) -> str:
        return f"{self.error_class}: {self}"


@dataclass
class RunConfig:
    command: str
    inputs: list[str]
    params_path: str | None = None
    outdir: str = "."
    threshold: float = 0.1
    num: int = 10
    seed: int = 1
    threads: int = 1
    memory_budget_bytes: int = DEFAULT_BUDGET_BYTES
    as_json: bool = False
    no_interaction: bool = False
    max_structures: int = 2_000_000


# -- FASTA ---------------------------------------------------------------


def _parse_fasta_text(text: str, path: str) -> list[tuple[str, str]]:
    records: list[tuple[str, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            records.append((line[1:].split()[0] if line[1:].split() else "", []))
        else:
            if not records:
                raise CliError("BadFasta", f"{path}: line {lineno}: sequence before header")
            records[-1][1].append(line.replace(" ", ""))
    return [(rid, "".join(chunks)) for rid, chunks in records]


def ingest_fasta(paths: list[str]) -> tuple[Strand, Strand]:
    """Read exactly two records: first is R (kept 5'->3'), second is S
    (reversed internally so position 1 is its 3' end).  T is normalised to U.
    """
    records: list[tuple[str, str]] = []
    for path in paths:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except FileNotFoundError:
            raise CliError("MissingFile", f"no such file: {path}") from None
        records.extend(_parse_fasta_text(text, path))
    if len(records) != 2:
        raise CliError(
            "WrongRecordCount", f"need exactly 2 records, found {len(records)}"
        )
    out = []
    for (rid, seq), role in zip(records, (StrandRole.QUERY, StrandRole.TARGET)):
        cleaned = seq.upper().replace("T", "U")
        for pos, base in enumerate(cleaned, start=1):
            if base not in "ACGU":
                raise CliError(
                    "BadAlphabet",
                    f"record {rid!r}: invalid residue {base!r} at position {pos}",
                )
        if not cleaned:
            raise CliError("BadFasta", f"record {rid!r}: empty sequence")
        if role is StrandRole.QUERY:
            out.append(Strand.query(cleaned, id=rid or "R"))
        else:
            out.append(Strand.target_from_5to3(cleaned, id=rid or "S"))
    return out[0], out[1]


# -- report helpers -------------------------------------------------------


def _s_user(pos: int, m: int) -> int:
    """Translate an internal S position (3'->5' indexing) to 5'->3'."""
    return m - pos + 1


def _header(cfg: RunConfig, model: EnergyModel, extra: str = "") -> str:
    lines = [
        f"# jointfold {__version__} {cfg.command}",
        f"# model={model.fingerprint()} seed={cfg.seed} threads={cfg.threads}",
        "# coordinates: R positions 5'->3'; S reported 5'->3'"
        " (internally indexed from its 3' end)",
    ]
    if extra:
        lines.append(f"# {extra}")
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    # 17 significant digits: floats round-trip exactly and deterministically
    return f"{x:.17g}"


def write_matrix_tsv(path: str, header: str, mat: np.ndarray,
                     row_lo: int, row_hi: int, col_lo: int, col_hi: int) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header)
        fh.write("#\t" + "\t".join(str(c) for c in range(col_lo, col_hi + 1)) + "\n")
        for r in range(row_lo, row_hi + 1):
            cells = "\t".join(_fmt(mat[r, c]) for c in range(col_lo, col_hi + 1))
            fh.write(f"{r}\t{cells}\n")


def read_matrix_tsv(path: str) -> np.ndarray:
    """Round-trip reader for the tool's own matrix TSV files."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            rows.append([float(v) for v in parts[1:]])
    return np.array(rows)


def format_target_line(start: int, end: int, probability: float) -> str:
    """One ranked-target line: ``i,j: pp.p%``."""
    return f"{start},{end}: {probability * 100:.1f}%"


def _structure_lines(res: InsideResult, js, idx: int) -> list[str]:
    n, m = res.ctx.n, res.ctx.m
    row_r = ["."] * n
    for (i, j) in sorted(js.interior_r):
        row_r[i - 1] = "("
        row_r[j - 1] = ")"
    for (i, _h) in js.exterior:
        row_r[i - 1] = "["
    # S printed 5'->3': internal position p sits at user column m-p+1
    seq_s_user = res.S.residues[::-1]
    row_s = ["."] * m
    for (h, l) in sorted(js.interior_s):
        row_s[_s_user(l, m) - 1] = "("
        row_s[_s_user(h, m) - 1] = ")"
    for (_i, h) in js.exterior:
        row_s[_s_user(h, m) - 1] = "]"
    ext = " ".join(f"{i}:{_s_user(h, m)}" for i, h in js.exterior) or "-"
    return [
        f"structure {idx}",
        f"R {res.R.residues}",
        f"R {''.join(row_r)}",
        f"S {seq_s_user}",
        f"S {''.join(row_s)}",
        f"E {ext}",
    ]


# -- subcommand implementations -------------------------------------------


def _load_model(cfg: RunConfig) -> EnergyModel:
    path = cfg.params_path or os.environ.get(PARAMS_ENV)
    if path:
        try:
            model = load_params(path)
        except FileNotFoundError:
            raise CliError("MissingFile", f"no such params file: {path}") from None
        except ParamError as exc:
            raise CliError("ParseError", f"{path}: {exc}") from None
    else:
        model = default_model()
    if cfg.no_interaction:
        model = model.without_interaction()
    return model


def _run_inside(cfg: RunConfig, R: Strand, S: Strand, model: EnergyModel,
                stream) -> InsideResult:
    est = estimate_memory_bytes(len(R), len(S), include_outside=True)
    stream.write(f"# estimated table bytes: {est}\n")
    if est > cfg.memory_budget_bytes:
        raise CliError(
            "CapacityExceeded",
            f"tables need {est} bytes, budget {cfg.memory_budget_bytes}",
        )
    return inside(R, S, model, memory_budget_bytes=cfg.memory_budget_bytes)


def _cmd_pf(cfg: RunConfig, stream) -> None:
    R, S = ingest_fasta(cfg.inputs)
    model = _load_model(cfg)
    stream.write(_header(cfg, model))
    res = _run_inside(cfg, R, S, model, stream)
    if cfg.as_json:
        import json

        stream.write(
            json.dumps(
                {
                    "q_total": res.q_total,
                    "q_r": res.q_r,
                    "q_s": res.q_s,
                    "q_no_interaction": res.q_no_interaction,
                    "model": model.fingerprint(),
                },
                sort_keys=True,
            )
            + "\n"
        )
    else:
        stream.write(f"Q_I\t{_fmt(res.q_total)}\n")
        stream.write(f"Q_R\t{_fmt(res.q_r)}\n")
        stream.write(f"Q_S\t{_fmt(res.q_s)}\n")
    stream.write(f"# actual table bytes: {res.store.peak_bytes}\n")


def _prob_pipeline(cfg: RunConfig, stream):
    R, S = ingest_fasta(cfg.inputs)
    model = _load_model(cfg)
    stream.write(_header(cfg, model))
    res = _run_inside(cfg, R, S, model, stream)
    prob = outside(res)
    return R, S, model, res, prob


def _cmd_bpp(cfg: RunConfig, stream) -> None:
    R, S, model, res, prob = _prob_pipeline(cfg, stream)
    n, m = len(R), len(S)
    os.makedirs(cfg.outdir, exist_ok=True)
    hdr = _header(cfg, model, "rows/cols are 1-based sequence positions")
    write_matrix_tsv(os.path.join(cfg.outdir, "bpp_r.tsv"), hdr, prob.bpp_r, 1, n, 1, n)
    # S matrices in user coordinates: arc (h,l) -> (m-l+1, m-h+1)
    bpp_s_user = np.zeros((m + 2, m + 2))
    for h in range(1, m + 1):
        for l in range(h, m + 1):
            bpp_s_user[_s_user(l, m), _s_user(h, m)] = prob.bpp_s[h, l]
    write_matrix_tsv(os.path.join(cfg.outdir, "bpp_s.tsv"), hdr, bpp_s_user, 1, m, 1, m)
    bpp_ext_user = np.zeros((n + 2, m + 2))
    for i in range(1, n + 1):
        for h in range(1, m + 1):
            bpp_ext_user[i, _s_user(h, m)] = prob.bpp_ext[i, h]
    write_matrix_tsv(
        os.path.join(cfg.outdir, "bpp_ext.tsv"), hdr, bpp_ext_user, 1, n, 1, m
    )
    stream.write("wrote bpp_r.tsv bpp_s.tsv bpp_ext.tsv\n")


def _cmd_hybrids(cfg: RunConfig, stream) -> None:
    R, S, model, res, prob = _prob_pipeline(cfg, stream)
    n, m = len(R), len(S)
    hyb = hybrid_probabilities(res, prob)
    os.makedirs(cfg.outdir, exist_ok=True)
    path = os.path.join(cfg.outdir, "hybrids.tsv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(cfg, model, "columns: r_start r_end s_start s_end p"))
        fh.write("# s coordinates 5'->3'\n")
        for (i, j, h, l, w) in hyb.entries(0.0):
            fh.write(
                f"{i}\t{j}\t{_s_user(l, m)}\t{_s_user(h, m)}\t{_fmt(w)}\n"
            )
    proj = np.zeros((n + 2, n + 2))
    for (i, j, _h, _l, w) in hyb.entries(0.0):
        proj[i, j] += w
    write_matrix_tsv(
        os.path.join(cfg.outdir, "hybrids_r_projection.tsv"),
        _header(cfg, model, "P(target region R[i,j]) summed over partner footprints"),
        proj, 1, n, 1, n,
    )
    stream.write("wrote hybrids.tsv hybrids_r_projection.tsv\n")


def _cmd_targets(cfg: RunConfig, stream) -> None:
    R, S, model, res, prob = _prob_pipeline(cfg, stream)
    m = len(S)
    hyb = hybrid_probabilities(res, prob)
    table = target_sites(hyb, threshold=cfg.threshold)
    stream.write(f"# target sites with probability > {_fmt(cfg.threshold)}\n")
    stream.write("# R regions\n")
    for row in table.rows:
        if row.strand == "R":
            stream.write(format_target_line(row.start, row.end, row.probability) + "\n")
    stream.write("# S regions (5'->3')\n")
    for row in table.rows:
        if row.strand == "S":
            stream.write(
                format_target_line(
                    _s_user(row.end, m), _s_user(row.start, m), row.probability
                )
                + "\n"
            )
    if table.p_opt is not None:
        r = table.p_opt
        if r.strand == "R":
            span = f"R[{r.start},{r.end}]"
        else:
            span = f"S[{_s_user(r.end, m)},{_s_user(r.start, m)}]"
        stream.write(f"# optimal region {span} p={_fmt(r.probability)}\n")


def _cmd_sample(cfg: RunConfig, stream) -> None:
    R, S = ingest_fasta(cfg.inputs)
    model = _load_model(cfg)
    stream.write(_header(cfg, model))
    res = _run_inside(cfg, R, S, model, stream)
    batch = sample_batch(res, cfg.num, cfg.seed)
    counts: dict = {}
    for k, js in enumerate(batch.structures, start=1):
        for line in _structure_lines(res, js, k):
            stream.write(line + "\n")
        counts[js.key()] = counts.get(js.key(), 0) + 1
    stream.write("# frequency summary (count structure-key)\n")
    for key, cnt in sorted(counts.items(), key=lambda kv: (-kv[1], str(kv[0]))):
        stream.write(f"# {cnt}\t{key}\n")


def _cmd_dotplot(cfg: RunConfig, stream) -> None:
    R, S, model, res, prob = _prob_pipeline(cfg, stream)
    n, m = len(R), len(S)
    hyb = hybrid_probabilities(res, prob)
    os.makedirs(cfg.outdir, exist_ok=True)
    path = os.path.join(cfg.outdir, "dotplot.svg")
    cell = 12
    width = (n + 3) * cell
    height = (m + 3) * cell
    buf = io.StringIO()
    buf.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
    )
    buf.write(
        f"<!-- jointfold {__version__} dotplot; model={model.fingerprint()};"
        " squares: contact regions, area proportional to probability;"
        " x: R 5'->3', y: S 5'->3' (S internally indexed from its 3' end) -->\n"
    )
    buf.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    for (i, j, h, l, w) in hyb.entries(cfg.threshold / 100.0):
        cx = (1 + (i + j) / 2.0) * cell
        cy = (1 + (_s_user(h, m) + _s_user(l, m)) / 2.0) * cell
        side = max(1.0, np.sqrt(w) * cell * 2)
        buf.write(
            f'<rect x="{cx - side / 2:.2f}" y="{cy - side / 2:.2f}" '
            f'width="{side:.2f}" height="{side:.2f}" fill="black" '
            f'fill-opacity="0.8"><title>R[{i},{j}] x S[{_s_user(l, m)},'
            f"{_s_user(h, m)}] p={_fmt(w)}</title></rect>\n"
        )
    buf.write("</svg>\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())
    stream.write("wrote dotplot.svg\n")


def _cmd_oracle(cfg: RunConfig, stream) -> None:
    R, S = ingest_fasta(cfg.inputs)
    model = _load_model(cfg)
    stream.write(_header(cfg, model))
    report = enumerate_interactions(
        R, S, model, OracleLimits(max_structures=cfg.max_structures),
        keep_structures=False,
    )
    stream.write(f"count\t{report.count}\n")
    stream.write(f"weighted_sum\t{_fmt(report.weighted_sum)}\n")
    for name, table in (
        ("bpp_ext", report.bpp_ext),
        ("p_hy", report.hybrid_mass),
        ("p_tar_r", report.target_mass_r),
    ):
        for key, w in sorted(table.items()):
            stream.write(
                f"{name}\t{','.join(str(k) for k in key)}\t{_fmt(w / report.weighted_sum)}\n"
            )


_COMMANDS = {
    "pf": _cmd_pf,
    "bpp": _cmd_bpp,
    "hybrids": _cmd_hybrids,
    "targets": _cmd_targets,
    "sample": _cmd_sample,
    "dotplot": _cmd_dotplot,
    "oracle": _cmd_oracle,
}


def run(cfg: RunConfig, stream=None) -> int:
    """Execute one subcommand; returns the process exit status."""
    stream = stream if stream is not None else sys.stdout
    try:
        _COMMANDS[cfg.command](cfg, stream)
    except CliError as exc:
        print(f"error: {exc.oneline()}", file=sys.stderr)
        return 1
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jointfold",
        description="Partition functions, pairing probabilities and Boltzmann"
        " samples for RNA-RNA interaction structures.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("pf", "total and per-strand partition functions"),
        ("bpp", "base-pair probability matrices (TSV)"),
        ("hybrids", "hybrid (contact-region) probability tables"),
        ("targets", "ranked target sites"),
        ("sample", "Boltzmann-distributed structure samples"),
        ("dotplot", "SVG contact-region dot plot"),
        ("oracle", "brute-force cross-check (small inputs only)"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("inputs", nargs="+", help="FASTA file(s) with the two records")
        p.add_argument("--params", dest="params_path", default=None,
                       help=f"energy parameter file (default ${PARAMS_ENV})")
        p.add_argument("--outdir", default=".", help="artifact directory")
        p.add_argument("--threshold", type=float, default=0.1,
                       help="report regions with probability above this")
        p.add_argument("--num", type=int, default=10, help="number of samples")
        p.add_argument("--seed", type=int, default=1, help="random seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads (results are thread-count independent)")
        p.add_argument("--mem-budget-gib", type=float, default=2.0,
                       help="memory budget for DP tables")
        p.add_argument("--json", dest="as_json", action="store_true",
                       help="machine-readable scalar output")
        p.add_argument("--no-interaction", action="store_true",
                       help="set every exterior-arc weight to zero")
        p.add_argument("--max-structures", type=int, default=2_000_000,
                       help="oracle enumeration budget")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        inputs=args.inputs,
        params_path=args.params_path,
        outdir=args.outdir,
        threshold=args.threshold,
        num=args.num,
        seed=args.seed,
        threads=args.threads,
        memory_budget_bytes=int(args.mem_budget_gib * 1024**3),
        as_json=args.as_json,
        no_interaction=args.no_interaction,
        max_structures=args.max_structures,
    )
    if cfg.threshold < 0.0 or cfg.threshold > 1.0:
        print("error: BadConfig: threshold must be in [0,1]", file=sys.stderr)
        return 1
    if cfg.command == "sample" and cfg.num < 1:
        print("error: BadConfig: --num must be >= 1", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
