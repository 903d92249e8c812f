import json

import pytest

import mpquic_sim as mq

ONE_PATH = [{"bandwidth_mbps": 20, "rtt_ms": 40}]


def test_varint_round_trip():
    for v in (0, 37, 15293, 494878333, 151288809941952652):
        data = mq.varint_encode(v)
        assert mq.varint_decode(data) == (v, len(data))
    assert mq.varint_encode(151288809941952652) == bytes.fromhex("c2197c5eff14e88c")


def test_varint_errors():
    with pytest.raises(ValueError):
        mq.varint_encode(1 << 62)
    with pytest.raises(ValueError):
        mq.varint_decode(b"\x40")


def test_select_ranges():
    ranges = [(0, 3), (5, 5), (7, 7)]
    assert mq.select_ranges(ranges, 32) == [(7, 7), (5, 5), (0, 3)]
    # One first range plus ab_limit blocks.
    assert mq.select_ranges(ranges, 1) == [(7, 7), (5, 5)]
    with pytest.raises(ValueError):
        mq.select_ranges([(3, 1)], 4)
    with pytest.raises(ValueError):
        mq.select_ranges(ranges, 4, strategy="random")


def test_range_set():
    rs = mq.RangeSet()
    for v in (1, 2, 3, 7):
        rs.insert(v)
    assert rs.intervals() == [(1, 3), (7, 7)]
    assert 2 in rs and 5 not in rs
    assert len(rs) == 2 and rs.cardinality() == 4


def test_run_and_trace_metrics_agree():
    size = 1 << 20
    r = mq.run(paths=ONE_PATH * 2, transfer_size=size, with_trace=True)
    m = r["metrics"]
    assert m["completed"]
    assert m["transfer_time_s"] >= size * 8 / 40e6
    assert m["mean_ranges_per_ack_frame"] == 1.0
    assert mq.extract_metrics(r["trace"], size) == m
    first = json.loads(r["trace"].splitlines()[0])
    assert first["event"] == "transfer_started"


def test_run_is_deterministic():
    cfg = mq.config(paths=mq.hetero2_paths(0.7, 0.3), design="spns", ab_limit=8,
                    transfer_size=1 << 20)
    assert mq.run(cfg) == mq.run(cfg)


def test_config_from_design_point():
    point = mq.wsp_design("hetero3", 4, 42)[2]
    cfg = mq.config(family="hetero3", point=point)
    assert len(cfg["paths"]) == 3
    assert sum(p["bandwidth_mbps"] for p in cfg["paths"]) == pytest.approx(100)
    assert mq.config_hash(cfg) == mq.config_hash(mq.config(**cfg))
    assert mq.config_hash(cfg) != mq.config_hash(mq.config(**{**cfg, "cc": "bbr"}))


def test_config_errors():
    with pytest.raises(ValueError):
        mq.config()
    with pytest.raises(ValueError):
        mq.config(paths=ONE_PATH, design="xyz")
    with pytest.raises(ValueError):
        mq.hetero2_paths(0.95, 0.5)
    with pytest.raises(ValueError):
        mq.wsp_design("hetero2", 0)


def test_reordering_replay():
    r = mq.reordering_replay("spns")
    assert r["snapshot"] == [(0, 3), (5, 5), (7, 7)]
    assert r["prior_ack"] == [(5, 5), (0, 3)]
    mp = mq.reordering_replay("mpns")
    assert mp["acks"] and all(a["multipath"] and len(a["ranges"]) == 1 for a in mp["acks"])
