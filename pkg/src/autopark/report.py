"""Run reports: one row per arrival plus whole-run aggregates.

Three renderings share the same underlying data: a human table, CSV with a
fixed header, and JSON lines. The structured forms parse back losslessly
(timestamps are kept as integer milliseconds in JSON; CSV carries seconds at
millisecond precision), so reports can be diffed, hashed, and re-read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from decimal import Decimal

from .model import AutoparkError

CSV_HEADER = (
    "vehicle_id,status,entry_s,parked_s,request_s,ready_s,exit_s,"
    "parking_latency_s,retrieval_latency_s,amount"
)

FORMATS = ("table", "csv", "json-lines")


class ReportFormatError(AutoparkError):
    """Text being parsed is not a report in the named format."""


@dataclass(frozen=True)
class ReportRow:
    """Milestones for one arrival; rejected cars only carry entry and status."""

    vehicle_id: str
    status: str  # rejected:<Reason> or the ticket phase
    entry_ms: int | None = None
    parked_ms: int | None = None
    request_ms: int | None = None
    ready_ms: int | None = None
    exit_ms: int | None = None
    parking_latency_ms: int | None = None
    retrieval_latency_ms: int | None = None
    amount: Decimal | None = None


@dataclass(frozen=True)
class Aggregates:
    max_parking_latency_ms: int | None
    max_retrieval_latency_ms: int | None
    occupancy_peak: int
    pv_wh: float
    grid_wh: float
    load_wh: float
    min_soc: float
    max_concurrent_motors: int


@dataclass(frozen=True)
class RunReport:
    rows: tuple[ReportRow, ...]
    aggregates: Aggregates


_ROW_MS_FIELDS = (
    "entry_ms",
    "parked_ms",
    "request_ms",
    "ready_ms",
    "exit_ms",
    "parking_latency_ms",
    "retrieval_latency_ms",
)


def _seconds(t_ms: int | None) -> str:
    return "" if t_ms is None else f"{t_ms / 1000:.3f}"


def _parse_seconds(text: str) -> int | None:
    return None if text == "" else round(float(text) * 1000)


def format_report(report: RunReport, fmt: str = "table") -> str:
    if fmt == "csv":
        return _format_csv(report)
    if fmt == "json-lines":
        return _format_json_lines(report)
    if fmt == "table":
        return _format_table(report)
    raise ValueError(f"unknown report format: {fmt!r}")


def parse_report(text: str, fmt: str) -> RunReport:
    if fmt == "csv":
        return _parse_csv(text)
    if fmt == "json-lines":
        return _parse_json_lines(text)
    raise ValueError(f"unparseable report format: {fmt!r}")


# -- csv -------------------------------------------------------------------


def _row_cells(row: ReportRow) -> list[str]:
    return [
        row.vehicle_id,
        row.status,
        _seconds(row.entry_ms),
        _seconds(row.parked_ms),
        _seconds(row.request_ms),
        _seconds(row.ready_ms),
        _seconds(row.exit_ms),
        _seconds(row.parking_latency_ms),
        _seconds(row.retrieval_latency_ms),
        "" if row.amount is None else str(row.amount),
    ]


def _aggregate_pairs(agg: Aggregates) -> list[tuple[str, str]]:
    def opt(value: int | None) -> str:
        return "-" if value is None else str(value)

    return [
        ("max_parking_latency_ms", opt(agg.max_parking_latency_ms)),
        ("max_retrieval_latency_ms", opt(agg.max_retrieval_latency_ms)),
        ("occupancy_peak", str(agg.occupancy_peak)),
        ("pv_wh", repr(agg.pv_wh)),
        ("grid_wh", repr(agg.grid_wh)),
        ("load_wh", repr(agg.load_wh)),
        ("min_soc", repr(agg.min_soc)),
        ("max_concurrent_motors", str(agg.max_concurrent_motors)),
    ]


def _format_csv(report: RunReport) -> str:
    lines = [CSV_HEADER]
    lines.extend(",".join(_row_cells(row)) for row in report.rows)
    lines.append("#aggregates " + " ".join(f"{k}={v}" for k, v in _aggregate_pairs(report.aggregates)))
    return "\n".join(lines) + "\n"


def _parse_csv(text: str) -> RunReport:
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0] != CSV_HEADER:
        raise ReportFormatError("missing or wrong CSV header")
    if not lines[-1].startswith("#aggregates "):
        raise ReportFormatError("missing aggregates trailer")
    rows = []
    for line in lines[1:-1]:
        cells = line.split(",")
        if len(cells) != 10:
            raise ReportFormatError(f"expected 10 fields, got {len(cells)}: {line!r}")
        rows.append(
            ReportRow(
                vehicle_id=cells[0],
                status=cells[1],
                entry_ms=_parse_seconds(cells[2]),
                parked_ms=_parse_seconds(cells[3]),
                request_ms=_parse_seconds(cells[4]),
                ready_ms=_parse_seconds(cells[5]),
                exit_ms=_parse_seconds(cells[6]),
                parking_latency_ms=_parse_seconds(cells[7]),
                retrieval_latency_ms=_parse_seconds(cells[8]),
                amount=Decimal(cells[9]) if cells[9] else None,
            )
        )
    pairs = dict(
        item.split("=", 1) for item in lines[-1].removeprefix("#aggregates ").split()
    )
    try:
        aggregates = Aggregates(
            max_parking_latency_ms=None
            if pairs["max_parking_latency_ms"] == "-"
            else int(pairs["max_parking_latency_ms"]),
            max_retrieval_latency_ms=None
            if pairs["max_retrieval_latency_ms"] == "-"
            else int(pairs["max_retrieval_latency_ms"]),
            occupancy_peak=int(pairs["occupancy_peak"]),
            pv_wh=float(pairs["pv_wh"]),
            grid_wh=float(pairs["grid_wh"]),
            load_wh=float(pairs["load_wh"]),
            min_soc=float(pairs["min_soc"]),
            max_concurrent_motors=int(pairs["max_concurrent_motors"]),
        )
    except KeyError as exc:
        raise ReportFormatError(f"aggregates trailer missing {exc}") from exc
    return RunReport(tuple(rows), aggregates)


# -- json lines ---------------------------------------------------------------


def _format_json_lines(report: RunReport) -> str:
    lines = []
    for row in report.rows:
        obj = {
            "vehicle_id": row.vehicle_id,
            "status": row.status,
            **{name: getattr(row, name) for name in _ROW_MS_FIELDS},
            "amount": None if row.amount is None else str(row.amount),
        }
        lines.append(json.dumps(obj, separators=(",", ":")))
    agg = report.aggregates
    lines.append(
        json.dumps(
            {"aggregates": {f.name: getattr(agg, f.name) for f in fields(Aggregates)}},
            separators=(",", ":"),
        )
    )
    return "\n".join(lines) + "\n"


def _parse_json_lines(text: str) -> RunReport:
    rows = []
    aggregates = None
    for line in text.splitlines():
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ReportFormatError(f"bad JSON line: {line!r}") from exc
        if "aggregates" in obj:
            if aggregates is not None:
                raise ReportFormatError("duplicate aggregates line")
            aggregates = Aggregates(**obj["aggregates"])
        else:
            amount = obj.pop("amount", None)
            rows.append(
                ReportRow(amount=None if amount is None else Decimal(amount), **obj)
            )
    if aggregates is None:
        raise ReportFormatError("missing aggregates line")
    return RunReport(tuple(rows), aggregates)


# -- table ---------------------------------------------------------------------


def _format_table(report: RunReport) -> str:
    headers = CSV_HEADER.split(",")
    grid = [headers] + [_row_cells(row) for row in report.rows]
    widths = [max(len(line[col]) for line in grid) for col in range(len(headers))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
        for line in grid
    ]
    lines.append("")
    for key, value in _aggregate_pairs(report.aggregates):
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"
