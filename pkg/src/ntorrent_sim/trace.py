"""Trace records, CSV writers, and the metrics reduction.

The trace is the single source of truth for a run: metrics are recomputed
from it, and positions.csv is a projection of its POSITION rows. Files are
UTF-8 with LF line endings and stable column order, so equal runs produce
byte-identical output.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

# wire-level events
INTEREST_TX = "INTEREST_TX"
INTEREST_RX = "INTEREST_RX"
DATA_TX = "DATA_TX"
DATA_RX = "DATA_RX"
DECISION = "DECISION"
DROP = "DROP"
SATISFY = "SATISFY"

# application-level events
BEACON_TX = "BEACON_TX"
BITMAP_TX = "BITMAP_TX"
PIECE_REQ = "PIECE_REQ"
PIECE_RX = "PIECE_RX"
COMPLETED = "COMPLETED"

# world bookkeeping
POSITION = "POSITION"
WALK_EPOCH = "WALK_EPOCH"
END = "END"

APP_EVENTS = frozenset({BEACON_TX, BITMAP_TX, PIECE_REQ, PIECE_RX, COMPLETED})

# strategy reason codes
REASON_PROB_FWD = "PROB_FWD"
REASON_PROB_DROP = "PROB_DROP"
REASON_FOREIGN_LEARN = "FOREIGN_LEARN"
REASON_FOREIGN_FWD = "FOREIGN_FWD"
REASON_OWN_APP = "OWN_APP"
REASON_UNKNOWN_DROP = "UNKNOWN_DROP"

# forwarding drop reasons
REASON_PIT_DUP = "PIT_DUP"
REASON_UNSOLICITED = "UNSOLICITED_DATA"
REASON_HOP_CAP = "HOP_CAP"
REASON_EMIT_STALE = "EMIT_STALE"
REASON_COLLISION = "COLLISION"

DROP_DECISIONS = frozenset({REASON_PROB_DROP, REASON_FOREIGN_LEARN, REASON_UNKNOWN_DROP})

TRACE_COLUMNS = ("time_us", "node", "event", "name", "detail")


class TraceRecord(NamedTuple):
    time_us: int
    node: str
    event: str
    name: str
    detail: str


def write_trace_csv(path: str, records: Iterable[TraceRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in records:
            writer.writerow((rec.time_us, rec.node, rec.event, rec.name, rec.detail))


def read_trace_csv(path: str) -> list[TraceRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header!r}")
        return [TraceRecord(int(t), node, event, name, detail)
                for t, node, event, name, detail in reader]


def detail_fields(detail: str) -> dict[str, str]:
    """Parse a 'k=v;k=v' detail string."""
    fields: dict[str, str] = {}
    for part in detail.split(";"):
        if "=" in part:
            key, value = part.split("=", 1)
            fields[key] = value
    return fields


def write_positions_csv(path: str, records: Iterable[TraceRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("time_us", "node", "x", "y"))
        for rec in records:
            if rec.event != POSITION:
                continue
            fields = detail_fields(rec.detail)
            writer.writerow((rec.time_us, rec.node, fields["x"], fields["y"]))


# ---------------------------------------------------------------------------
# metrics

@dataclass
class LeecherMetrics:
    torrent: str
    completed: bool = False
    completion_time_us: int | None = None


@dataclass
class NodeCounters:
    interests_tx: int = 0
    data_tx: int = 0
    drops: dict[str, int] = field(default_factory=dict)


@dataclass
class MetricsSummary:
    per_leecher: dict[str, LeecherMetrics]
    per_node: dict[str, NodeCounters]
    total_tx: int = 0
    pieces_delivered: int = 0
    overhead_ratio: float | None = None


def metrics_from_trace(records: Iterable[TraceRecord],
                       leechers: dict[str, str],
                       nodes: Iterable[str]) -> MetricsSummary:
    """Reduce a trace to the run summary.

    leechers maps leecher node id to its torrent (so never-completed leechers
    still get a row); nodes lists every node for zero-filled counters.
    """
    summary = MetricsSummary(
        per_leecher={nid: LeecherMetrics(torrent) for nid, torrent in sorted(leechers.items())},
        per_node={nid: NodeCounters() for nid in sorted(nodes)},
    )
    for rec in records:
        counters = summary.per_node.get(rec.node)
        if rec.event == INTEREST_TX:
            counters.interests_tx += 1
            summary.total_tx += 1
        elif rec.event == DATA_TX:
            counters.data_tx += 1
            summary.total_tx += 1
        elif rec.event == PIECE_RX:
            summary.pieces_delivered += 1
        elif rec.event == COMPLETED:
            metrics = summary.per_leecher[rec.node]
            metrics.completed = True
            metrics.completion_time_us = rec.time_us
        elif rec.event == DROP:
            counters.drops[rec.detail] = counters.drops.get(rec.detail, 0) + 1
        elif rec.event == DECISION and rec.detail in DROP_DECISIONS:
            counters.drops[rec.detail] = counters.drops.get(rec.detail, 0) + 1
    if summary.pieces_delivered > 0:
        summary.overhead_ratio = summary.total_tx / summary.pieces_delivered
    return summary


def write_metrics_csv(path: str, summary: MetricsSummary) -> None:
    """Key-value rendering with one row per metric entry, sorted for stability."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("metric", "node", "detail", "value"))
        for node_id, lm in summary.per_leecher.items():
            writer.writerow(("completed", node_id, lm.torrent, int(lm.completed)))
            writer.writerow(("completion_time_us", node_id, lm.torrent,
                             "" if lm.completion_time_us is None else lm.completion_time_us))
        for node_id, counters in summary.per_node.items():
            writer.writerow(("interests_tx", node_id, "", counters.interests_tx))
            writer.writerow(("data_tx", node_id, "", counters.data_tx))
            for reason in sorted(counters.drops):
                writer.writerow(("drops", node_id, reason, counters.drops[reason]))
        writer.writerow(("total_tx", "", "", summary.total_tx))
        writer.writerow(("pieces_delivered", "", "", summary.pieces_delivered))
        writer.writerow(("overhead_ratio", "", "",
                         "" if summary.overhead_ratio is None else repr(summary.overhead_ratio)))
