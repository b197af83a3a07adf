"""Gap to the Gaussian multiple-access capacity, user sweeps and threshold tables."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from ..code_construction import Protograph, couple, coupling_parts, make_regular_protograph
from .density_evolution import threshold


def shannon_limit(r_sum: float) -> float:
    """Smallest multi-user SNR (dB) supporting sum rate ``r_sum`` bits per channel use."""
    if r_sum <= 0:
        raise ValueError("sum rate must be positive")
    return 10.0 * math.log10(2.0 ** r_sum - 1.0)


def capacity_gap(r_sum: float, gamma_db: float) -> float:
    return gamma_db - shannon_limit(r_sum)


def sum_rate(code_rate: float, n_users: int, d_r: int) -> float:
    return n_users * code_rate / d_r


@dataclass
class GapRow:
    d_r: int
    n_users: int
    r_sum: float
    threshold_db: float | None
    gap_db: float | None


def sweep_users(parts: list[Protograph], d_r_list, n_list, L: int = 100,
                lo_db: float = -15.0, hi_db: float = 20.0, **kw) -> list[GapRow]:
    """Threshold and capacity gap for every ``(d_r, N)`` pair with the code held fixed.

    The sum rate uses the design rate without termination loss.
    """
    cp = couple(parts, L)
    rows = []
    for d_r in d_r_list:
        for n in n_list:
            r = sum_rate(cp.asymptotic_rate, n, d_r)
            lo = min(lo_db, shannon_limit(r) - 3.0)
            th = threshold(cp, n, d_r, lo_db=lo, hi_db=hi_db, **kw)
            rows.append(GapRow(d_r, n, r, th, None if th is None else capacity_gap(r, th)))
    return rows


# rows of the reference threshold table: (d_r, d_v, d_c)
TABLE_ROWS = [(4, 3, 6), (4, 4, 8), (4, 5, 10), (4, 6, 12), (2, 3, 4), (2, 6, 8), (2, 9, 12)]


@dataclass
class ThresholdRow:
    d_r: int
    d_v: int
    d_c: int
    W: int
    uncoupled_db: float | None
    coupled_db: float | None


def threshold_table(n_users: int = 8, L: int = 100, rows=TABLE_ROWS, lo_db: float = -5.0,
                    hi_db: float = 20.0, **kw) -> list[ThresholdRow]:
    """Uncoupled and coupled DE thresholds for each ``(d_r, d_v, d_c)``."""
    out = []
    for d_r, d_v, d_c in rows:
        base = make_regular_protograph(d_v, d_c)
        parts = coupling_parts(d_v, d_c)
        un = threshold(base, n_users, d_r, lo_db=lo_db, hi_db=hi_db, **kw)
        sc = threshold(couple(parts, L), n_users, d_r, lo_db=lo_db, hi_db=hi_db, **kw)
        out.append(ThresholdRow(d_r, d_v, d_c, len(parts), un, sc))
    return out


def _fmt(x):
    return "" if x is None else f"{x:.4f}"


def rows_to_csv(rows, path=None, header_comment: str | None = None) -> str:
    """CSV of :class:`ThresholdRow` or :class:`GapRow` records; unbounded thresholds are blank."""
    buf = io.StringIO()
    if header_comment:
        for line in header_comment.splitlines():
            buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    if rows and isinstance(rows[0], ThresholdRow):
        w.writerow(["d_r", "d_v", "d_c", "W", "uncoupled_db", "coupled_db"])
        for r in rows:
            w.writerow([r.d_r, r.d_v, r.d_c, r.W, _fmt(r.uncoupled_db), _fmt(r.coupled_db)])
    else:
        w.writerow(["d_r", "N", "R_sum", "threshold_db", "gap_db"])
        for r in rows:
            w.writerow([r.d_r, r.n_users, f"{r.r_sum:.4f}", _fmt(r.threshold_db), _fmt(r.gap_db)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
