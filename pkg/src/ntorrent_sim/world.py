"""Run loop: wires nodes, radio medium, mobility, and timers to the engine.

One World owns the event loop and all per-node state for a single run. Every
observable action lands in the trace, and the trace plus the metrics reduced
from it are the run's result.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import forwarding as fw
from . import trace as tc
from .app import PeerApp, TIMER_BEACON, TIMER_RETRY
from .engine import Event, EventLoop, RngStreams, RunReport
from .mobility import (
    EPOCH_INTERVAL_US,
    Position,
    WalkState,
    broadcast_receivers,
    position_at,
    walk_epoch,
)
from .names import (
    Beacon,
    BitmapAnnounce,
    Data,
    Interest,
    PieceInterest,
    render_name,
)
from .scenario import MobilityKind, NodeKind, ScenarioConfig
from .strategies import (
    PeerRelayStrategy,
    PeerStrategyConfig,
    PureForwarderConfig,
    PureForwarderStrategy,
)
from .trace import MetricsSummary, TraceRecord, metrics_from_trace

GC_INTERVAL_US = 1_000_000

EV_DELIVERY = "PacketDelivery"
EV_TIMER = "Timer"
EV_MOBILITY = "MobilityEpoch"
EV_GC = "GcTick"


@dataclass
class _Motion:
    anchor: Position
    epoch_start_us: int
    walk: WalkState | None  # None for static nodes


class _DeliveryMark:
    """Mutable collision flag shared between overlapping deliveries."""

    __slots__ = ("time_us", "collided")

    def __init__(self, time_us: int) -> None:
        self.time_us = time_us
        self.collided = False


class World:
    def __init__(self, cfg: ScenarioConfig, master_seed: int) -> None:
        self.cfg = cfg
        self.loop = EventLoop()
        self.rngs = RngStreams(master_seed)
        self.trace: list[TraceRecord] = []
        self.nodes: dict[str, fw.NodeState] = {}
        self._motion: dict[str, _Motion] = {}
        self._inflight: dict[str, list[_DeliveryMark]] = {}
        self._build_nodes()
        self._schedule_initial()

    # -- construction -------------------------------------------------------

    def _build_nodes(self) -> None:
        cfg = self.cfg
        for spec in cfg.nodes:
            store = fw.PieceStore()
            app = None
            if spec.kind is NodeKind.PURE_FORWARDER:
                strategy = PureForwarderStrategy(PureForwarderConfig(
                    p_forward=cfg.strategy.p_forward,
                    jitter_min_us=cfg.strategy.jitter_min_us,
                    jitter_max_us=cfg.strategy.jitter_max_us,
                ))
            else:
                strategy = PeerRelayStrategy(PeerStrategyConfig(
                    own_torrent=spec.torrent,
                    t_mem_us=cfg.strategy.t_mem_us,
                    jitter_min_us=cfg.strategy.jitter_min_us,
                    jitter_max_us=cfg.strategy.jitter_max_us,
                ))
                torrent = cfg.torrent_spec(spec.torrent)
                have = store.ensure(torrent.torrent_id, torrent.n_pieces, torrent.piece_bytes)
                app = PeerApp(
                    node_id=spec.node_id,
                    torrent=torrent.torrent_id,
                    n_pieces=torrent.n_pieces,
                    seeder=spec.kind is NodeKind.SEEDER,
                    cfg=cfg.app,
                    have=have,
                    data_response_delay_us=cfg.forwarding.data_response_delay_us,
                )
            if cfg.forwarding.cache_overheard_data:
                # cache needs a bitmap per declared torrent to store into
                for torrent in cfg.torrents:
                    store.ensure(torrent.torrent_id, torrent.n_pieces, torrent.piece_bytes)
            self.nodes[spec.node_id] = fw.NodeState(
                node_id=spec.node_id,
                strategy=strategy,
                store=store,
                params=cfg.forwarding,
                app=app,
            )
            mob_rng = self.rngs.stream("mobility", spec.node_id)
            if spec.position is not None:
                anchor = Position(*spec.position)
            else:
                anchor = Position(mob_rng.uniform(0.0, cfg.grid.width),
                                  mob_rng.uniform(0.0, cfg.grid.height))
            walk = None
            if spec.mobility is MobilityKind.RANDOM_WALK:
                walk = walk_epoch(mob_rng, 0)
                self._note(spec.node_id, tc.WALK_EPOCH, "",
                           f"heading={walk.heading_rad!r};speed={walk.speed_ms!r}")
            self._motion[spec.node_id] = _Motion(anchor=anchor, epoch_start_us=0, walk=walk)

    def _schedule_initial(self) -> None:
        cfg = self.cfg
        self.loop.schedule(0, EV_TIMER, None, ("sample",))
        if cfg.duration_us > 0:
            self.loop.schedule(min(GC_INTERVAL_US, cfg.duration_us), EV_GC)
            if any(m.walk is not None for m in self._motion.values()):
                self.loop.schedule(min(EPOCH_INTERVAL_US, cfg.duration_us), EV_MOBILITY)
        for node in self.nodes.values():
            if node.app is not None:
                self._apply(node.node_id, node.app.start(self._app_rng(node.node_id)))

    # -- helpers --------------------------------------------------------------

    def _note(self, node_id: str, code: str, name_text: str, detail: str = "") -> None:
        self.trace.append(TraceRecord(self.loop.now_us, node_id, code, name_text, detail))

    def _app_rng(self, node_id: str):
        return self.rngs.stream("app", node_id)

    def _strategy_rng(self, node_id: str):
        return self.rngs.stream("strategy", node_id)

    def position_of(self, node_id: str, t_us: int) -> Position:
        motion = self._motion[node_id]
        if motion.walk is None:
            return motion.anchor
        return position_at(motion.anchor, motion.walk, motion.epoch_start_us,
                           t_us, self.cfg.grid)

    # -- effect application ------------------------------------------------------

    def _apply(self, node_id: str, effects: list[fw.Effect]) -> None:
        now = self.loop.now_us
        node = self.nodes[node_id]
        for effect in effects:
            if isinstance(effect, fw.Note):
                self._note(node_id, effect.code, effect.name_text, effect.detail)
            elif isinstance(effect, fw.OriginateInterest):
                self._apply(node_id, fw.on_incoming_interest(
                    node, effect.packet, fw.FaceId.APP, now, self._strategy_rng(node_id)))
            elif isinstance(effect, fw.SendInterest):
                if effect.delay_us > 0:
                    self.loop.schedule(now + effect.delay_us, EV_TIMER, node_id,
                                       ("tx_interest", effect.packet))
                else:
                    self._transmit_interest(node_id, effect.packet)
            elif isinstance(effect, fw.SendData):
                if effect.delay_us > 0:
                    self.loop.schedule(now + effect.delay_us, EV_TIMER, node_id,
                                       ("tx_data", effect.packet))
                else:
                    self._transmit_data(node_id, effect.packet)
            elif isinstance(effect, fw.EmitData):
                self.loop.schedule(now + effect.delay_us, EV_TIMER, node_id,
                                   ("emit", effect.name))
            elif isinstance(effect, fw.AppInterest):
                self._deliver_to_app(node_id, effect)
            elif isinstance(effect, fw.AppPiece):
                self._apply(node_id, node.app.on_receive_piece(
                    effect.piece, now, self._app_rng(node_id)))
            elif isinstance(effect, fw.StartTimer):
                self.loop.schedule(now + effect.delay_us, EV_TIMER, node_id,
                                   (effect.tag,))
            else:  # pragma: no cover
                raise TypeError(f"unhandled effect {effect!r}")

    def _deliver_to_app(self, node_id: str, effect: fw.AppInterest) -> None:
        node = self.nodes[node_id]
        app = node.app
        if app is None:
            return
        now = self.loop.now_us
        rng = self._app_rng(node_id)
        cls = effect.cls
        if isinstance(cls, Beacon):
            self._apply(node_id, app.on_receive_beacon(cls.node, now, rng))
        elif isinstance(cls, BitmapAnnounce):
            self._apply(node_id, app.on_receive_bitmap(cls, now, rng))
        elif isinstance(cls, PieceInterest):
            self._apply(node_id, app.on_receive_piece_interest(cls, now, rng))

    # -- radio ---------------------------------------------------------------------

    def _transmit_interest(self, node_id: str, pkt: Interest) -> None:
        self._note(node_id, tc.INTEREST_TX, render_name(pkt.name),
                   f"nonce={pkt.nonce:016x};hop={pkt.hop_count};origin={pkt.origin}")
        self._broadcast(node_id, pkt)

    def _transmit_data(self, node_id: str, pkt: Data) -> None:
        self._note(node_id, tc.DATA_TX, render_name(pkt.name),
                   f"hop={pkt.hop_count};origin={pkt.origin};bytes={pkt.payload_bytes}")
        self._broadcast(node_id, pkt)

    def _broadcast(self, sender: str, pkt: Interest | Data) -> None:
        now = self.loop.now_us
        positions = {nid: self.position_of(nid, now) for nid in self.nodes}
        receivers = broadcast_receivers(sender, positions, self.cfg.radio,
                                        self.rngs.stream("medium", sender))
        arrival = now + self.cfg.radio.one_hop_delay_us
        for receiver in receivers:
            mark = None
            if self.cfg.collision_mode:
                mark = _DeliveryMark(arrival)
                pending = self._inflight.setdefault(receiver, [])
                pending[:] = [m for m in pending if m.time_us > now]
                for other in pending:
                    if abs(other.time_us - arrival) < self.cfg.radio.one_hop_delay_us:
                        other.collided = True
                        mark.collided = True
                pending.append(mark)
            self.loop.schedule(arrival, EV_DELIVERY, receiver, (pkt, mark))

    # -- event dispatch ---------------------------------------------------------------

    def _dispatch(self, event: Event) -> None:
        if event.kind == EV_DELIVERY:
            self._on_delivery(event)
        elif event.kind == EV_TIMER:
            self._on_timer(event)
        elif event.kind == EV_MOBILITY:
            self._on_mobility_epoch()
        elif event.kind == EV_GC:
            self._on_gc()

    def _on_delivery(self, event: Event) -> None:
        node_id = event.target
        pkt, mark = event.payload
        if mark is not None and mark.collided:
            self._note(node_id, tc.DROP, render_name(pkt.name), tc.REASON_COLLISION)
            return
        node = self.nodes[node_id]
        now = self.loop.now_us
        if isinstance(pkt, Interest):
            self._note(node_id, tc.INTEREST_RX, render_name(pkt.name),
                       f"nonce={pkt.nonce:016x};hop={pkt.hop_count};origin={pkt.origin}")
            effects = fw.on_incoming_interest(node, pkt, fw.FaceId.BROADCAST, now,
                                              self._strategy_rng(node_id))
        else:
            self._note(node_id, tc.DATA_RX, render_name(pkt.name),
                       f"hop={pkt.hop_count};origin={pkt.origin}")
            effects = fw.on_incoming_data(node, pkt, now, self._strategy_rng(node_id))
        self._apply(node_id, effects)

    def _on_timer(self, event: Event) -> None:
        payload = event.payload
        tag = payload[0]
        now = self.loop.now_us
        if tag == "sample":
            for node_id in self.nodes:
                pos = self.position_of(node_id, now)
                self._note(node_id, tc.POSITION, "", f"x={pos.x!r};y={pos.y!r}")
            nxt = now + self.cfg.position_sample_interval_us
            if nxt <= self.cfg.duration_us:
                self.loop.schedule(nxt, EV_TIMER, None, ("sample",))
            return
        node_id = event.target
        node = self.nodes[node_id]
        if tag == "tx_interest":
            self._transmit_interest(node_id, payload[1])
        elif tag == "tx_data":
            self._transmit_data(node_id, payload[1])
        elif tag == "emit":
            self._apply(node_id, fw.on_data_emission(node, payload[1], now))
        elif tag == TIMER_BEACON:
            self._apply(node_id, node.app.on_beacon_timer(now, self._app_rng(node_id)))
        elif tag == TIMER_RETRY:
            self._apply(node_id, node.app.on_retry_timer(now, self._app_rng(node_id)))
        else:  # pragma: no cover
            raise ValueError(f"unknown timer tag {tag!r}")

    def _on_mobility_epoch(self) -> None:
        now = self.loop.now_us
        for node_id, motion in self._motion.items():
            if motion.walk is None:
                continue
            motion.anchor = position_at(motion.anchor, motion.walk,
                                        motion.epoch_start_us, now, self.cfg.grid)
            motion.epoch_start_us = now
            motion.walk = walk_epoch(self.rngs.stream("mobility", node_id), now)
            self._note(node_id, tc.WALK_EPOCH, "",
                       f"heading={motion.walk.heading_rad!r};speed={motion.walk.speed_ms!r}")
        nxt = now + EPOCH_INTERVAL_US
        if nxt <= self.cfg.duration_us:
            self.loop.schedule(nxt, EV_MOBILITY)

    def _on_gc(self) -> None:
        now = self.loop.now_us
        for node in self.nodes.values():
            fw.pit_gc(node, now)
            node.strategy.gc(now)
        nxt = now + GC_INTERVAL_US
        if nxt <= self.cfg.duration_us:
            self.loop.schedule(nxt, EV_GC)

    # -- run -------------------------------------------------------------------------

    def run(self) -> RunReport:
        report = self.loop.run_until(self.cfg.duration_us, self._dispatch)
        # the boundary marker always closes the trace, after anything that
        # fired exactly at the horizon
        self._note("", tc.END, "", "")
        return report

    def metrics(self) -> MetricsSummary:
        return metrics_from_trace(self.trace, self.cfg.leechers(), list(self.nodes))


def run_scenario(cfg: ScenarioConfig, master_seed: int) -> tuple[list[TraceRecord], MetricsSummary]:
    """Run one scenario to its horizon; returns the trace and its metrics."""
    world = World(cfg, master_seed)
    world.run()
    return world.trace, world.metrics()
