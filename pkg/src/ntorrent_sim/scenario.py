"""Scenario configuration: JSON schema, validation, and canned builders.

A scenario file is one JSON object. Unknown keys are rejected anywhere in the
document so typos fail loudly instead of silently running defaults. All
durations and delays are integer microseconds.

Top-level keys (all optional except nodes and torrents):

    grid        {width, height}                       metres
    radio       {range_m, one_hop_delay_us, loss_prob}
    duration_us integer run length
    torrents    [{id, n_pieces, piece_bytes}]
    nodes       [{id, kind, torrent, position, mobility}]
    strategy    {p_forward, jitter_min_us, jitter_max_us, t_mem_us}
    app         {beacon_interval_us, pipeline_window, interest_retry_timeout_us,
                 max_retries, bitmap_min_gap_us, keep_seeding}
    forwarding  {pit_lifetime_us, data_response_delay_us, cache_overheard_data}
    max_hops    integer safety cap on retransmission chains
    collision_mode               bool
    position_sample_interval_us  integer

node.kind is one of seeder, leecher, pure_forwarder; seeders and leechers
name a declared torrent, pure forwarders must not. node.position is [x, y]
or "random"; node.mobility is static or random_walk.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum

from .app import AppConfig
from .forwarding import ForwardingParams
from .mobility import GridBounds, Position, RadioConfig


class ScenarioError(Exception):
    """Base for configuration problems; the CLI maps these to exit code 2."""


class ParseError(ScenarioError):
    """Unreadable JSON."""


class ValidationError(ScenarioError):
    """Well-formed JSON violating the schema or an invariant."""


class TooFewNodes(ScenarioError):
    """Random field needs at least five nodes."""


class NodeKind(Enum):
    SEEDER = "seeder"
    LEECHER = "leecher"
    PURE_FORWARDER = "pure_forwarder"


class MobilityKind(Enum):
    STATIC = "static"
    RANDOM_WALK = "random_walk"


DEFAULT_N_PIECES = 32
DEFAULT_PIECE_BYTES = 1024
DEFAULT_DURATION_US = 120_000_000
RANDOM_FIELD_DURATION_US = 600_000_000


@dataclass(frozen=True)
class TorrentSpec:
    torrent_id: str
    n_pieces: int = DEFAULT_N_PIECES
    piece_bytes: int = DEFAULT_PIECE_BYTES


@dataclass(frozen=True)
class NodeSpec:
    node_id: str
    kind: NodeKind
    torrent: str | None = None
    position: tuple[float, float] | None = None  # None means uniform random
    mobility: MobilityKind = MobilityKind.STATIC


@dataclass(frozen=True)
class StrategyParams:
    p_forward: float = 1.0
    jitter_min_us: int = 2_000
    jitter_max_us: int = 10_000
    t_mem_us: int = 30_000_000


@dataclass
class ScenarioConfig:
    nodes: list[NodeSpec]
    torrents: list[TorrentSpec]
    grid: GridBounds = field(default_factory=lambda: GridBounds(300.0, 300.0))
    radio: RadioConfig = field(default_factory=lambda: RadioConfig(60.0, 500, 0.0))
    duration_us: int = DEFAULT_DURATION_US
    strategy: StrategyParams = field(default_factory=StrategyParams)
    app: AppConfig = field(default_factory=AppConfig)
    forwarding: ForwardingParams = field(default_factory=ForwardingParams)
    collision_mode: bool = False
    position_sample_interval_us: int = 1_000_000

    def torrent_spec(self, torrent_id: str) -> TorrentSpec:
        for spec in self.torrents:
            if spec.torrent_id == torrent_id:
                return spec
        raise KeyError(torrent_id)

    def leechers(self) -> dict[str, str]:
        return {n.node_id: n.torrent for n in self.nodes if n.kind is NodeKind.LEECHER}

    def seeders_of(self, torrent_id: str) -> list[str]:
        return [n.node_id for n in self.nodes
                if n.kind is NodeKind.SEEDER and n.torrent == torrent_id]


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check cross-field invariants; raises ValidationError naming the violation."""
    if cfg.duration_us < 0:
        raise ValidationError("duration_us must be non-negative")
    if cfg.position_sample_interval_us <= 0:
        raise ValidationError("position_sample_interval_us must be positive")
    if cfg.forwarding.pit_lifetime_us <= 0:
        raise ValidationError("pit_lifetime_us must be positive")
    if cfg.forwarding.data_response_delay_us < 0:
        raise ValidationError("data_response_delay_us must be non-negative")
    if cfg.forwarding.max_hops < 1:
        raise ValidationError("max_hops must be at least 1")
    if not 0.0 <= cfg.strategy.p_forward <= 1.0:
        raise ValidationError("p_forward must be within [0, 1]")
    if not 0 <= cfg.strategy.jitter_min_us <= cfg.strategy.jitter_max_us:
        raise ValidationError("jitter bounds must satisfy 0 <= min <= max")
    if cfg.strategy.t_mem_us <= 0:
        raise ValidationError("t_mem_us must be positive")
    if cfg.app.beacon_interval_us <= 0:
        raise ValidationError("beacon_interval_us must be positive")
    if cfg.app.pipeline_window < 1:
        raise ValidationError("pipeline_window must be at least 1")
    if cfg.app.interest_retry_timeout_us <= 0:
        raise ValidationError("interest_retry_timeout_us must be positive")
    if cfg.app.max_retries is not None and cfg.app.max_retries < 0:
        raise ValidationError("max_retries must be non-negative or null")
    if cfg.app.bitmap_min_gap_us < 0:
        raise ValidationError("bitmap_min_gap_us must be non-negative")

    torrent_ids = [t.torrent_id for t in cfg.torrents]
    if len(set(torrent_ids)) != len(torrent_ids):
        raise ValidationError("torrent ids must be unique")
    for torrent in cfg.torrents:
        if not torrent.torrent_id or "/" in torrent.torrent_id:
            raise ValidationError(f"bad torrent id {torrent.torrent_id!r}")
        if torrent.torrent_id == "beacon":
            raise ValidationError("'beacon' is a reserved name component")
        if torrent.n_pieces < 1:
            raise ValidationError("n_pieces must be at least 1")
        if torrent.piece_bytes < 0:
            raise ValidationError("piece_bytes must be non-negative")

    node_ids = [n.node_id for n in cfg.nodes]
    if len(set(node_ids)) != len(node_ids):
        raise ValidationError("node ids must be unique")
    declared = set(torrent_ids)
    for node in cfg.nodes:
        if not node.node_id or "/" in node.node_id:
            raise ValidationError(f"bad node id {node.node_id!r}")
        if node.kind is NodeKind.PURE_FORWARDER:
            if node.torrent is not None:
                raise ValidationError(f"pure forwarder {node.node_id} must not name a torrent")
        else:
            if node.torrent is None:
                raise ValidationError(f"{node.kind.value} {node.node_id} must name a torrent")
            if node.torrent not in declared:
                raise ValidationError(
                    f"node {node.node_id} references undeclared torrent {node.torrent!r}")
        if node.position is not None:
            x, y = node.position
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValidationError(f"node {node.node_id} position must be finite")
            if not (0.0 <= x <= cfg.grid.width and 0.0 <= y <= cfg.grid.height):
                raise ValidationError(f"node {node.node_id} position outside the grid")
    return cfg


# ---------------------------------------------------------------------------
# JSON loading

def _take(obj: dict, context: str, allowed: dict[str, object]) -> dict:
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown key {sorted(unknown)[0]!r} in {context}")
    merged = dict(allowed)
    merged.update(obj)
    return merged


def _require(obj: dict, context: str, key: str) -> object:
    if key not in obj or obj[key] is None:
        raise ValidationError(f"missing required key {key!r} in {context}")
    return obj[key]


def _int_field(value: object, context: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{context} must be an integer")
    return value


def _num_field(value: object, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{context} must be a number")
    return float(value)


def _node_from_json(obj: object, index: int) -> NodeSpec:
    context = f"nodes[{index}]"
    if not isinstance(obj, dict):
        raise ValidationError(f"{context} must be an object")
    merged = _take(obj, context, {
        "id": None, "kind": None, "torrent": None, "position": "random",
        "mobility": "static",
    })
    node_id = _require(merged, context, "id")
    if not isinstance(node_id, str):
        raise ValidationError(f"{context}.id must be a string")
    kind_text = _require(merged, context, "kind")
    try:
        kind = NodeKind(kind_text)
    except ValueError:
        raise ValidationError(f"{context}.kind must be one of "
                              f"{[k.value for k in NodeKind]}") from None
    try:
        mobility = MobilityKind(merged["mobility"])
    except ValueError:
        raise ValidationError(f"{context}.mobility must be one of "
                              f"{[m.value for m in MobilityKind]}") from None
    position = merged["position"]
    if position == "random":
        parsed_position = None
    elif (isinstance(position, list) and len(position) == 2):
        parsed_position = (_num_field(position[0], f"{context}.position[0]"),
                           _num_field(position[1], f"{context}.position[1]"))
    else:
        raise ValidationError(f"{context}.position must be [x, y] or \"random\"")
    torrent = merged["torrent"]
    if torrent is not None and not isinstance(torrent, str):
        raise ValidationError(f"{context}.torrent must be a string")
    return NodeSpec(node_id=node_id, kind=kind, torrent=torrent,
                    position=parsed_position, mobility=mobility)


def scenario_from_json(obj: object) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a decoded JSON object."""
    if not isinstance(obj, dict):
        raise ValidationError("scenario document must be a JSON object")
    defaults = ScenarioConfig(nodes=[], torrents=[])
    merged = _take(obj, "scenario", {
        "grid": {}, "radio": {}, "duration_us": defaults.duration_us,
        "torrents": None, "nodes": None, "strategy": {}, "app": {},
        "forwarding": {}, "max_hops": defaults.forwarding.max_hops,
        "collision_mode": False,
        "position_sample_interval_us": defaults.position_sample_interval_us,
    })

    grid_obj = _take(merged["grid"], "grid", {"width": 300.0, "height": 300.0})
    grid = GridBounds(_num_field(grid_obj["width"], "grid.width"),
                      _num_field(grid_obj["height"], "grid.height"))

    radio_obj = _take(merged["radio"], "radio", {
        "range_m": 60.0, "one_hop_delay_us": 500, "loss_prob": 0.0})
    radio = RadioConfig(_num_field(radio_obj["range_m"], "radio.range_m"),
                        _int_field(radio_obj["one_hop_delay_us"], "radio.one_hop_delay_us"),
                        _num_field(radio_obj["loss_prob"], "radio.loss_prob"))

    strategy_defaults = StrategyParams()
    strategy_obj = _take(merged["strategy"], "strategy", {
        "p_forward": strategy_defaults.p_forward,
        "jitter_min_us": strategy_defaults.jitter_min_us,
        "jitter_max_us": strategy_defaults.jitter_max_us,
        "t_mem_us": strategy_defaults.t_mem_us,
    })
    strategy = StrategyParams(
        p_forward=_num_field(strategy_obj["p_forward"], "strategy.p_forward"),
        jitter_min_us=_int_field(strategy_obj["jitter_min_us"], "strategy.jitter_min_us"),
        jitter_max_us=_int_field(strategy_obj["jitter_max_us"], "strategy.jitter_max_us"),
        t_mem_us=_int_field(strategy_obj["t_mem_us"], "strategy.t_mem_us"),
    )

    app_defaults = AppConfig()
    app_obj = _take(merged["app"], "app", {
        "beacon_interval_us": app_defaults.beacon_interval_us,
        "pipeline_window": app_defaults.pipeline_window,
        "interest_retry_timeout_us": app_defaults.interest_retry_timeout_us,
        "max_retries": app_defaults.max_retries,
        "bitmap_min_gap_us": app_defaults.bitmap_min_gap_us,
        "keep_seeding": app_defaults.keep_seeding,
    })
    max_retries = app_obj["max_retries"]
    app_cfg = AppConfig(
        beacon_interval_us=_int_field(app_obj["beacon_interval_us"], "app.beacon_interval_us"),
        pipeline_window=_int_field(app_obj["pipeline_window"], "app.pipeline_window"),
        interest_retry_timeout_us=_int_field(app_obj["interest_retry_timeout_us"],
                                             "app.interest_retry_timeout_us"),
        max_retries=None if max_retries is None else _int_field(max_retries, "app.max_retries"),
        bitmap_min_gap_us=_int_field(app_obj["bitmap_min_gap_us"], "app.bitmap_min_gap_us"),
        keep_seeding=bool(app_obj["keep_seeding"]),
    )

    fwd_defaults = ForwardingParams()
    fwd_obj = _take(merged["forwarding"], "forwarding", {
        "pit_lifetime_us": fwd_defaults.pit_lifetime_us,
        "data_response_delay_us": fwd_defaults.data_response_delay_us,
        "cache_overheard_data": fwd_defaults.cache_overheard_data,
    })
    forwarding = ForwardingParams(
        pit_lifetime_us=_int_field(fwd_obj["pit_lifetime_us"], "forwarding.pit_lifetime_us"),
        data_response_delay_us=_int_field(fwd_obj["data_response_delay_us"],
                                          "forwarding.data_response_delay_us"),
        cache_overheard_data=bool(fwd_obj["cache_overheard_data"]),
        max_hops=_int_field(merged["max_hops"], "max_hops"),
    )

    torrents_obj = _require(merged, "scenario", "torrents")
    if not isinstance(torrents_obj, list):
        raise ValidationError("torrents must be a list")
    torrents = []
    for i, item in enumerate(torrents_obj):
        context = f"torrents[{i}]"
        if not isinstance(item, dict):
            raise ValidationError(f"{context} must be an object")
        titem = _take(item, context, {
            "id": None, "n_pieces": DEFAULT_N_PIECES, "piece_bytes": DEFAULT_PIECE_BYTES})
        torrent_id = _require(titem, context, "id")
        if not isinstance(torrent_id, str):
            raise ValidationError(f"{context}.id must be a string")
        torrents.append(TorrentSpec(
            torrent_id=torrent_id,
            n_pieces=_int_field(titem["n_pieces"], f"{context}.n_pieces"),
            piece_bytes=_int_field(titem["piece_bytes"], f"{context}.piece_bytes"),
        ))

    nodes_obj = _require(merged, "scenario", "nodes")
    if not isinstance(nodes_obj, list):
        raise ValidationError("nodes must be a list")
    nodes = [_node_from_json(item, i) for i, item in enumerate(nodes_obj)]

    cfg = ScenarioConfig(
        nodes=nodes,
        torrents=torrents,
        grid=grid,
        radio=radio,
        duration_us=_int_field(merged["duration_us"], "duration_us"),
        strategy=strategy,
        app=app_cfg,
        forwarding=forwarding,
        collision_mode=bool(merged["collision_mode"]),
        position_sample_interval_us=_int_field(merged["position_sample_interval_us"],
                                               "position_sample_interval_us"),
    )
    return validate(cfg)


def load_scenario(path: str) -> ScenarioConfig:
    """Load and validate a scenario file; ParseError/ValidationError on bad input."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return scenario_from_json(obj)


# ---------------------------------------------------------------------------
# canned builders

def build_five_node(p_forward: float = 1.0) -> ScenarioConfig:
    """Static five-node line, 50 m spacing, two torrents crossing in the middle.

    n0 seeds movie1 wanted by n2; n4 seeds movie2 wanted by n1; n3 is a pure
    forwarder sitting on the only n1-to-n4 path.
    """
    kinds = [
        (NodeKind.SEEDER, "movie1"),
        (NodeKind.LEECHER, "movie2"),
        (NodeKind.LEECHER, "movie1"),
        (NodeKind.PURE_FORWARDER, None),
        (NodeKind.SEEDER, "movie2"),
    ]
    nodes = [
        NodeSpec(node_id=f"n{i}", kind=kind, torrent=torrent,
                 position=(50.0 + 50.0 * i, 150.0), mobility=MobilityKind.STATIC)
        for i, (kind, torrent) in enumerate(kinds)
    ]
    cfg = ScenarioConfig(
        nodes=nodes,
        torrents=[TorrentSpec("movie1"), TorrentSpec("movie2")],
        strategy=StrategyParams(p_forward=p_forward),
    )
    return validate(cfg)


def build_random_field(n_nodes: int, seed: int) -> ScenarioConfig:
    """Mobile field: one seeder per torrent, a third leeching each, rest forwarders.

    The seed shuffles which node index gets which role; placement and motion
    come from the run's master seed.
    """
    if n_nodes < 5:
        raise TooFewNodes(f"random field needs at least 5 nodes, got {n_nodes}")
    per_torrent = n_nodes // 3
    roles: list[tuple[NodeKind, str | None]] = [
        (NodeKind.SEEDER, "movie1"),
        (NodeKind.SEEDER, "movie2"),
    ]
    roles += [(NodeKind.LEECHER, "movie1")] * per_torrent
    roles += [(NodeKind.LEECHER, "movie2")] * per_torrent
    roles += [(NodeKind.PURE_FORWARDER, None)] * (n_nodes - len(roles))
    random.Random(seed).shuffle(roles)
    nodes = [
        NodeSpec(node_id=f"n{i}", kind=kind, torrent=torrent,
                 position=None, mobility=MobilityKind.RANDOM_WALK)
        for i, (kind, torrent) in enumerate(roles)
    ]
    cfg = ScenarioConfig(
        nodes=nodes,
        torrents=[TorrentSpec("movie1"), TorrentSpec("movie2")],
        duration_us=RANDOM_FIELD_DURATION_US,
    )
    return validate(cfg)


def with_p_forward(cfg: ScenarioConfig, p_forward: float) -> ScenarioConfig:
    """Copy of cfg with the pure-forwarding probability replaced."""
    new_cfg = ScenarioConfig(
        nodes=list(cfg.nodes),
        torrents=list(cfg.torrents),
        grid=cfg.grid,
        radio=cfg.radio,
        duration_us=cfg.duration_us,
        strategy=replace(cfg.strategy, p_forward=p_forward),
        app=cfg.app,
        forwarding=cfg.forwarding,
        collision_mode=cfg.collision_mode,
        position_sample_interval_us=cfg.position_sample_interval_us,
    )
    return validate(new_cfg)
