"""CSV ingestion in row chunks, CSV output, and glm-style summary text."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .exceptions import EmptyDataset, MissingColumn, ParseError
from .inference import SummaryTable
from .model import DEFAULT_CHUNK_SIZE, Dataset, RowChunk

__all__ = [
    "DatasetSource",
    "read_csv_chunks",
    "load_csv",
    "write_csv",
    "format_number",
    "significance_code",
    "render_summary",
    "summary_records",
]


@dataclass(frozen=True)
class DatasetSource:
    """Where and how to read a dataset.

    ``feature_columns=None`` selects every column except the response, in
    file order.
    """

    path: str | os.PathLike
    response_column: str = "y"
    feature_columns: Sequence[str] | None = None
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")


def _resolve(header: list[str], src: DatasetSource) -> tuple[int, list[int], tuple[str, ...]]:
    index = {name: j for j, name in enumerate(header)}
    if src.response_column not in index:
        raise MissingColumn(f"response column {src.response_column!r} not in header")
    if src.feature_columns is None:
        feats = [h for h in header if h != src.response_column]
    else:
        feats = list(src.feature_columns)
        missing = [f for f in feats if f not in index]
        if missing:
            raise MissingColumn(f"feature column(s) {missing} not in header")
    return index[src.response_column], [index[f] for f in feats], tuple(feats)


def _parse_response(token: str, line: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise ParseError(line, token, "response is not a number") from None
    if v != 0.0 and v != 1.0:
        raise ParseError(line, token, "response must be 0 or 1")
    return v


def _parse_feature(token: str, line: int) -> float:
    try:
        v = float(token)
    except ValueError:
        raise ParseError(line, token, "feature is not a number") from None
    if not math.isfinite(v):
        raise ParseError(line, token, "feature is not finite")
    return v


def read_csv_chunks(src: DatasetSource) -> Iterator[RowChunk]:
    """Yield chunks of at most ``src.chunk_size`` rows, in file order."""
    with open(src.path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{src.path}: file is empty") from None
        yi, xi, names = _resolve(header, src)
        width = len(header)
        ys: list[float] = []
        rows: list[list[float]] = []
        seen = 0
        for record in reader:
            line = reader.line_num
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != width:
                raise ParseError(line, ",".join(record), f"expected {width} fields, found {len(record)}")
            ys.append(_parse_response(record[yi].strip(), line))
            rows.append([_parse_feature(record[j].strip(), line) for j in xi])
            if len(ys) == src.chunk_size:
                yield RowChunk(np.array(ys), np.array(rows).reshape(len(ys), len(xi)), names)
                seen += len(ys)
                ys, rows = [], []
        if ys:
            yield RowChunk(np.array(ys), np.array(rows).reshape(len(ys), len(xi)), names)
            seen += len(ys)
        if seen == 0:
            raise EmptyDataset(f"{src.path}: no data rows")


def load_csv(src: DatasetSource, in_memory: bool = True) -> Dataset:
    """Dataset backed by a CSV file.

    With ``in_memory=False`` the file is re-read on every pass over the
    data, so memory use is bounded by one chunk.
    """
    if not os.path.exists(src.path):
        raise FileNotFoundError(f"no such file: {src.path}")
    if in_memory:
        chunks = list(read_csv_chunks(src))
        return Dataset(chunks, chunks[0].column_names, src.response_column)
    ds = Dataset(lambda: read_csv_chunks(src), None, src.response_column)
    ds.n_rows  # validates the file once up front
    return ds


def write_csv(path, data: Dataset, response_name: str | None = None) -> int:
    """Write ``data`` with a header row; floats use shortest round-trip repr."""
    name = response_name or data.response_name
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name, *data.column_names])
        for chunk in data.chunks():
            ys = chunk.y.astype(int).tolist()
            for yv, row in zip(ys, chunk.X.tolist()):
                w.writerow([yv, *map(repr, row)])
            n += chunk.n_rows
    return n


# -- summary rendering --------------------------------------------------------

SIGNIF_LEGEND = "Signif. codes:  0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"
_P_FLOOR = 2.2e-16


def format_number(v: float) -> str:
    """Fixed six decimals, switching to 6-significant-digit scientific
    notation for magnitudes below 1e-3 or at/above 1e5."""
    if v == 0.0 or not math.isfinite(v):
        return "0.000000" if v == 0.0 else str(v)
    a = abs(v)
    if 1e-3 <= a < 1e5:
        return f"{v:.6f}"
    return f"{v:.5e}"


def format_pvalue(p: float) -> str:
    return "< 2e-16" if p < _P_FLOOR else format_number(p)


def significance_code(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


def render_summary(table: SummaryTable) -> str:
    lvl = table.confidence_level
    lo_hdr = f"{100 * (1 - lvl) / 2:g} %"
    hi_hdr = f"{100 * (1 + lvl) / 2:g} %"
    header = ["", "Estimate", "Std. Error", "z value", "Pr(>|z|)", "", lo_hdr, hi_hdr]
    body = [
        [
            r.name,
            format_number(r.estimate),
            format_number(r.std_error),
            format_number(r.z_value),
            format_pvalue(r.p_value),
            significance_code(r.p_value),
            format_number(r.ci_low),
            format_number(r.ci_high),
        ]
        for r in table.coefficients
    ]
    widths = [max(len(row[j]) for row in [header, *body]) for j in range(len(header))]

    def line(cells):
        parts = [cells[0].ljust(widths[0])]
        for j in range(1, len(cells)):
            cell = cells[j].ljust(widths[j]) if j == 5 else cells[j].rjust(widths[j])
            parts.append(cell)
        return "  ".join(parts).rstrip()

    features = [r.name for r in table.coefficients if r.name != "(Intercept)"]
    rhs = " + ".join(features) if features else "1"
    has_icpt = any(r.name == "(Intercept)" for r in table.coefficients)
    if not has_icpt:
        rhs = f"{rhs} - 1" if features else "0"
    cov_label = "sandwich (robust)" if table.covariance_kind.value == "sandwich" else "MLE (inverse Hessian)"
    status = "converged" if table.converged else "NOT converged"

    out = [
        "Call:",
        f"logit(formula = {table.response_name} ~ {rhs})",
        "",
        f"Observations: {table.n}    Parameters: {table.k}",
        f"Solver: {table.solver} ({status}, {table.iterations} iterations)",
        f"Covariance: {cov_label}",
        "",
        "Coefficients:",
        line(header),
        *(line(row) for row in body),
        "---",
        SIGNIF_LEGEND,
        "",
        f"Log-likelihood: {format_number(table.log_likelihood)} on {table.k} Df",
        f"Null log-likelihood: {format_number(table.null_log_likelihood)}",
        f"AIC: {format_number(table.aic)}",
        f"McFadden R2: {format_number(table.mcfadden_r2)}",
        f"LR test: {format_number(table.lr_statistic)} on {table.lr_df} Df, "
        f"p-value: {format_pvalue(table.lr_p_value)}",
        f"AUC: {format_number(table.auc)}",
    ]
    return "\n".join(out) + "\n"


def summary_records(table: SummaryTable) -> list[tuple[str, str]]:
    """Flat ``(key, value)`` pairs with full-precision numbers."""
    recs: list[tuple[str, str]] = [
        ("n", str(table.n)),
        ("k", str(table.k)),
        ("solver", table.solver),
        ("converged", str(table.converged).lower()),
        ("iterations", str(table.iterations)),
        ("covariance_kind", table.covariance_kind.value),
        ("confidence_level", repr(table.confidence_level)),
        ("log_likelihood", repr(table.log_likelihood)),
        ("null_log_likelihood", repr(table.null_log_likelihood)),
        ("aic", repr(table.aic)),
        ("mcfadden_r2", repr(table.mcfadden_r2)),
        ("lr_statistic", repr(table.lr_statistic)),
        ("lr_df", str(table.lr_df)),
        ("lr_p_value", repr(table.lr_p_value)),
        ("auc", repr(table.auc)),
    ]
    for r in table.coefficients:
        for attr in ("estimate", "std_error", "z_value", "p_value", "ci_low", "ci_high"):
            recs.append((f"coef.{r.name}.{attr}", repr(float(getattr(r, attr)))))
    return recs
