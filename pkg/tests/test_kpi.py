import csv
import json
import statistics

import pytest

from iabsim.engine import run
from iabsim.kpi import aggregate, kpi_document, p95_nearest_rank, summarize, write_traces
from iabsim.model import Packet, SimConfig

from helpers import chain


def _pkt(i, delay_ms=None, status="delivered"):
    p = Packet(i, 1000, 0, 0, 0, 0.0)
    p.status = status
    if delay_ms is not None:
        p.arrival_time_s = delay_ms / 1000
    return p


def test_arithmetic_example():
    pkts = [_pkt(i, i + 1) for i in range(8)] + [_pkt(8, status="dropped_overflow"),
                                                 _pkt(9, status="dropped_noroute")]
    rep = summarize(pkts, 1.0)
    assert rep["drop_rate"] == pytest.approx(0.2)
    assert rep["delay_mean_s"] == pytest.approx(4.5e-3)
    assert rep["delay_p95_s"] == pytest.approx(8e-3)
    assert rep["throughput_bps"] == 8000


def test_empty_report():
    rep = summarize([], 1.0)
    assert all(v == 0 for v in rep.values())


def test_p95_nearest_rank():
    assert p95_nearest_rank(list(range(1, 21))) == 19
    assert p95_nearest_rank([3.0]) == 3.0
    assert p95_nearest_rank([]) == 0.0


@pytest.fixture(scope="module")
def output():
    cfg = SimConfig(run_time_s=0.02, source_rate_bps=300e6, buffer_capacity_bytes=30_000, seed=2)
    topo, ch = chain(3, ues_on=[0, 1, 2, 2], config=cfg)
    return run(cfg, topo, ch)


def test_scopes_are_consistent(output):
    net = aggregate(output, "network")
    per_ue = aggregate(output, "per_ue")
    per_node = aggregate(output, "per_node")
    assert net["throughput_bps"] == sum(r["throughput_bps"] for r in per_ue.values())
    assert net["generated"] == sum(r["generated"] for r in per_node.values())
    assert net["dropped"] > 0 and net["delivered"] > 0
    for r in per_ue.values():
        assert r["throughput_bps"] <= r["offered_bps"] + 12000 / output.run_time_s


def test_trace_files(output, tmp_path):
    paths = write_traces(output, tmp_path / "r")
    assert sorted(p.name for p in paths) == ["kpi.json", "load.csv", "packets.csv"]
    rows = list(csv.DictReader((tmp_path / "r" / "packets.csv").open()))
    assert len(rows) == len(output.packets)
    donors = {str(d) for d in output.topology.donor_ids}
    delays = []
    for r in rows:
        if r["status"] == "delivered":
            assert r["path"].split(">")[-1] in donors
            delays.append(float(r["delay_s"]))
        else:
            assert r["arrival_time_s"] == "" and r["delay_s"] == ""
    doc = json.loads((tmp_path / "r" / "kpi.json").read_text())
    assert doc["network"]["delay_mean_s"] == pytest.approx(statistics.fmean(delays), rel=1e-12)
    assert set(doc) == {"metadata", "network", "per_node", "per_ue"}
    load = list(csv.DictReader((tmp_path / "r" / "load.csv").open()))
    assert len(load) == output.n_slots * len(output.topology.nodes)
    total = sum(float(r["access_bits_served"]) + float(r["backhaul_bits_served"]) for r in load)
    assert total >= sum(int(r["size_bits"]) for r in rows if r["status"] == "delivered")


def test_unwritable_directory_leaves_nothing(output, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        write_traces(output, blocker / "r")
    assert list(tmp_path.iterdir()) == [blocker]


def test_failure_midway_leaves_no_partial_files(output, tmp_path, monkeypatch):
    import iabsim.kpi as kpi

    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(kpi, "_write_load", boom)
    with pytest.raises(OSError):
        write_traces(output, tmp_path / "r")
    assert list(tmp_path.iterdir()) == []


def test_metadata_echo(output):
    doc = kpi_document(output, {"run_id": "x"})
    expected = output.config.to_dict()
    expected.pop("simulation_mode")
    assert doc["metadata"]["config"] == expected
    assert doc["metadata"]["run_id"] == "x"
