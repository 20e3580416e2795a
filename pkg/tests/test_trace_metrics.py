"""Trace CSV round trips and the metrics reduction over traces."""
import csv

import pytest

from ntorrent_sim import trace as tc
from ntorrent_sim.trace import (
    TraceRecord,
    detail_fields,
    metrics_from_trace,
    read_trace_csv,
    write_metrics_csv,
    write_positions_csv,
    write_trace_csv,
)


def sample_trace():
    return [
        TraceRecord(0, "n0", tc.BEACON_TX, "/ntorrent/beacon/n0", ""),
        TraceRecord(0, "n0", tc.INTEREST_TX, "/ntorrent/beacon/n0",
                    "nonce=00000000000000ff;hop=0;origin=n0"),
        TraceRecord(500, "n1", tc.INTEREST_RX, "/ntorrent/beacon/n0",
                    "nonce=00000000000000ff;hop=0;origin=n0"),
        TraceRecord(500, "n1", tc.DECISION, "/ntorrent/movie1/data/0",
                    tc.REASON_FOREIGN_LEARN),
        TraceRecord(700, "n1", tc.DROP, "/ntorrent/movie1/data/0",
                    tc.REASON_PIT_DUP),
        TraceRecord(900, "n2", tc.DATA_TX, "/ntorrent/movie1/data/0",
                    "hop=0;origin=n2;bytes=1024"),
        TraceRecord(1_400, "n1", tc.PIECE_RX, "/ntorrent/movie1/data/0", "piece=0"),
        TraceRecord(1_400, "n1", tc.COMPLETED, "", "torrent=movie1;pieces=1"),
        TraceRecord(2_000, "n1", tc.POSITION, "", "x=12.5;y=40.25"),
        TraceRecord(2_000, "", tc.END, "", ""),
    ]


def test_trace_csv_round_trip(tmp_path):
    path = tmp_path / "trace.csv"
    records = sample_trace()
    write_trace_csv(str(path), records)
    assert read_trace_csv(str(path)) == records


def test_trace_csv_is_lf_and_utf8(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv(str(path), sample_trace())
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").splitlines()[0] == "time_us,node,event,name,detail"


def test_empty_trace_writes_header_only(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv(str(path), [])
    assert path.read_bytes() == b"time_us,node,event,name,detail\n"
    assert read_trace_csv(str(path)) == []


def test_reader_rejects_foreign_headers(tmp_path):
    path = tmp_path / "other.csv"
    path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="unexpected trace header"):
        read_trace_csv(str(path))


def test_detail_fields():
    assert detail_fields("nonce=ff;hop=2;origin=n0") == {
        "nonce": "ff", "hop": "2", "origin": "n0"}
    assert detail_fields("") == {}
    assert detail_fields("PIT_DUP") == {}
    assert detail_fields("x=1=2") == {"x": "1=2"}


def test_positions_csv_projects_position_records(tmp_path):
    path = tmp_path / "positions.csv"
    write_positions_csv(str(path), sample_trace())
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows == [
        ["time_us", "node", "x", "y"],
        ["2000", "n1", "12.5", "40.25"],
    ]


# -- metrics ---------------------------------------------------------------------

def test_metrics_reduction_from_a_hand_built_trace():
    summary = metrics_from_trace(sample_trace(),
                                 leechers={"n1": "movie1", "n3": "movie2"},
                                 nodes=["n0", "n1", "n2", "n3"])
    assert summary.per_leecher["n1"].completed is True
    assert summary.per_leecher["n1"].completion_time_us == 1_400
    assert summary.per_leecher["n1"].torrent == "movie1"
    # n3 never completed but still gets a row
    assert summary.per_leecher["n3"].completed is False
    assert summary.per_leecher["n3"].completion_time_us is None
    assert summary.per_node["n0"].interests_tx == 1
    assert summary.per_node["n2"].data_tx == 1
    assert summary.per_node["n1"].drops == {
        tc.REASON_FOREIGN_LEARN: 1, tc.REASON_PIT_DUP: 1}
    assert summary.total_tx == 2
    assert summary.pieces_delivered == 1
    assert summary.overhead_ratio == 2.0


def test_no_deliveries_leaves_overhead_undefined():
    records = [TraceRecord(0, "n0", tc.INTEREST_TX, "/x", "")]
    summary = metrics_from_trace(records, leechers={}, nodes=["n0"])
    assert summary.pieces_delivered == 0
    assert summary.overhead_ratio is None


def test_forwarding_decisions_count_only_drop_reasons():
    records = [
        TraceRecord(0, "n0", tc.DECISION, "/x", tc.REASON_PROB_FWD),
        TraceRecord(1, "n0", tc.DECISION, "/x", tc.REASON_PROB_DROP),
        TraceRecord(2, "n0", tc.DECISION, "/x", tc.REASON_OWN_APP),
        TraceRecord(3, "n0", tc.DECISION, "/x", tc.REASON_UNKNOWN_DROP),
    ]
    summary = metrics_from_trace(records, leechers={}, nodes=["n0"])
    assert summary.per_node["n0"].drops == {
        tc.REASON_PROB_DROP: 1, tc.REASON_UNKNOWN_DROP: 1}


def test_metrics_are_a_pure_function_of_the_trace(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv(str(path), sample_trace())
    direct = metrics_from_trace(sample_trace(), {"n1": "movie1"}, ["n0", "n1", "n2"])
    reread = metrics_from_trace(read_trace_csv(str(path)),
                                {"n1": "movie1"}, ["n0", "n1", "n2"])
    assert direct == reread


def test_metrics_csv_layout(tmp_path):
    path = tmp_path / "metrics.csv"
    summary = metrics_from_trace(sample_trace(), {"n1": "movie1"}, ["n0", "n1", "n2"])
    summary.total_tx = 3
    summary.overhead_ratio = 3 / 7
    write_metrics_csv(str(path), summary)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["metric", "node", "detail", "value"]
    assert ["completed", "n1", "movie1", "1"] in rows
    assert ["completion_time_us", "n1", "movie1", "1400"] in rows
    assert ["interests_tx", "n0", "", "1"] in rows
    # the float is written with repr so rereading it loses nothing
    overhead_row = [r for r in rows if r[0] == "overhead_ratio"][0]
    assert float(overhead_row[3]) == 3 / 7
