"""Deterministic multipath QUIC acknowledgment simulator."""

import json

from ._core import (
    UNLIMITED_ACK_BLOCKS,
    ConfigError,
    RangeSet,
    SimError,
    WireError,
    extract_metrics,
    hetero2_paths,
    hetero3_paths,
    homo2_paths,
    reordering_replay,
    select_ranges,
    varint_decode,
    varint_encode,
    wsp_design,
)
from . import _core

__all__ = [
    "UNLIMITED_ACK_BLOCKS",
    "ConfigError",
    "RangeSet",
    "SimError",
    "WireError",
    "config",
    "config_hash",
    "extract_metrics",
    "hetero2_paths",
    "hetero3_paths",
    "homo2_paths",
    "reordering_replay",
    "run",
    "select_ranges",
    "varint_decode",
    "varint_encode",
    "wsp_design",
]


def config(**overrides):
    """Complete run configuration as a dict, defaults filled in.

    Needs either ``paths`` or a design ``point`` for the ``family``.
    """
    base = json.loads(_core.default_run_config())
    base.update(overrides)
    if "paths" in overrides:
        # Accept the (bandwidth_mbps, rtt_ms) pairs the path helpers return.
        base["paths"] = [
            p if isinstance(p, dict) else {"bandwidth_mbps": p[0], "rtt_ms": p[1]}
            for p in overrides["paths"]
        ]
    if "paths" not in overrides and "point" in overrides:
        base.pop("paths")
    return json.loads(_core.normalize_run_config(json.dumps(base)))


def config_hash(cfg):
    return _core.config_hash(json.dumps(cfg))


def run(cfg=None, with_trace=False, **overrides):
    """Runs one transfer; returns metrics (and the JSONL trace if asked)."""
    cfg = dict(cfg or {})
    cfg.update(overrides)
    return _core.run(json.dumps(config(**cfg)), with_trace)
