"""The torrent peer application.

Peers announce presence with periodic beacons. Hearing a beacon triggers a
rate-limited bitmap announcement of the pieces held, hearing a bitmap widens
the map of pieces known to exist remotely, and missing pieces are requested
through a fixed-size pipeline with periodic retransmission of stale requests.
Seeders start complete and only answer; leechers record completion the moment
the last piece arrives.

Handlers mutate only the application state and return effects; all sends go
back through the forwarding plane so the PIT records the app as in-face.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .forwarding import EmitData, Effect, Note, OriginateInterest, StartTimer
from .names import (
    Bitmap,
    BitmapAnnounce,
    Interest,
    PieceInterest,
    beacon_name,
    bitmap_announce_name,
    piece_name,
    render_name,
)
from . import trace as tc

TIMER_BEACON = "beacon"
TIMER_RETRY = "retry"


class LengthMismatch(ValueError):
    """Bitmaps with different piece counts cannot be compared."""


def compute_missing(mine: Bitmap, theirs: Bitmap) -> list[int]:
    """Ascending indices of pieces they hold and we lack."""
    if mine.n_pieces != theirs.n_pieces:
        raise LengthMismatch(f"{mine.n_pieces} != {theirs.n_pieces}")
    want = theirs.bits & ~mine.bits
    return [i for i in range(mine.n_pieces) if want >> i & 1]


@dataclass
class AppConfig:
    beacon_interval_us: int = 2_000_000
    pipeline_window: int = 4
    interest_retry_timeout_us: int = 1_000_000
    max_retries: int | None = None
    bitmap_min_gap_us: int = 500_000
    keep_seeding: bool = False


@dataclass
class PendingRequest:
    last_sent_us: int
    retries: int = 0


@dataclass
class DownloadState:
    have: Bitmap
    known_remote: Bitmap
    pending: dict[int, PendingRequest] = field(default_factory=dict)
    completed_at_us: int | None = None


class PeerApp:
    """One torrent peer bound to a node's piece store."""

    def __init__(self, node_id: str, torrent: str, n_pieces: int, seeder: bool,
                 cfg: AppConfig, have: Bitmap, data_response_delay_us: int) -> None:
        if have.n_pieces != n_pieces:
            raise LengthMismatch(f"store bitmap has {have.n_pieces} pieces, app wants {n_pieces}")
        self.node_id = node_id
        self.torrent = torrent
        self.n_pieces = n_pieces
        self.seeder = seeder
        self.cfg = cfg
        self.data_response_delay_us = data_response_delay_us
        if seeder:
            have.bits = (1 << n_pieces) - 1
        self.state = DownloadState(have=have, known_remote=Bitmap(n_pieces))
        if seeder:
            self.state.completed_at_us = 0
        self._last_bitmap_us: dict[str, int] = {}
        self.demanded: set[int] = set()

    @property
    def completed(self) -> bool:
        return self.state.have.complete

    def start(self, rng: random.Random) -> list[Effect]:
        """Initial timers: a desynchronising beacon offset, retries for leechers."""
        offset = rng.randint(1, max(1, self.cfg.beacon_interval_us // 10))
        effects: list[Effect] = [StartTimer(TIMER_BEACON, offset)]
        if not self.seeder:
            effects.append(StartTimer(TIMER_RETRY, self.cfg.interest_retry_timeout_us))
        return effects

    # -- timers --------------------------------------------------------------

    def on_beacon_timer(self, now_us: int, rng: random.Random) -> list[Effect]:
        if self.completed and not self.seeder and not self.cfg.keep_seeding:
            return []  # done downloading; stop announcing, keep answering
        name = beacon_name(self.node_id)
        pkt = Interest(name, nonce=rng.getrandbits(64), origin=self.node_id)
        spread = self.cfg.beacon_interval_us // 10
        next_in = self.cfg.beacon_interval_us + (rng.randint(-spread, spread) if spread else 0)
        return [
            Note(tc.BEACON_TX, render_name(name)),
            OriginateInterest(pkt),
            StartTimer(TIMER_BEACON, next_in),
        ]

    def on_retry_timer(self, now_us: int, rng: random.Random) -> list[Effect]:
        if self.completed:
            return []
        effects: list[Effect] = []
        abandoned: list[int] = []
        for piece, req in sorted(self.state.pending.items()):
            if now_us - req.last_sent_us < self.cfg.interest_retry_timeout_us:
                continue
            if self.cfg.max_retries is not None and req.retries >= self.cfg.max_retries:
                abandoned.append(piece)
                continue
            req.last_sent_us = now_us
            req.retries += 1
            effects.extend(self._request_piece(piece, req.retries, rng))
        for piece in abandoned:
            del self.state.pending[piece]
        # abandoned pieces rejoin the unrequested pool, but not within this tick
        effects.extend(self._fill_pipeline(now_us, rng, exclude=frozenset(abandoned)))
        effects.append(StartTimer(TIMER_RETRY, self.cfg.interest_retry_timeout_us))
        return effects

    # -- receive paths ---------------------------------------------------------

    def _announce_bitmap(self, remote: str, now_us: int,
                         rng: random.Random) -> list[Effect]:
        """Broadcast our bitmap, at most once per bitmap_min_gap per remote node."""
        last = self._last_bitmap_us.get(remote)
        if last is not None and now_us - last < self.cfg.bitmap_min_gap_us:
            return []
        self._last_bitmap_us[remote] = now_us
        name = bitmap_announce_name(self.torrent, self.node_id, self.state.have)
        pkt = Interest(name, nonce=rng.getrandbits(64), origin=self.node_id)
        return [
            Note(tc.BITMAP_TX, render_name(name), f"have={self.state.have.popcount()}"),
            OriginateInterest(pkt),
        ]

    def on_receive_beacon(self, sender: str, now_us: int,
                          rng: random.Random) -> list[Effect]:
        if sender == self.node_id:
            return []
        return self._announce_bitmap(sender, now_us, rng)

    def on_receive_bitmap(self, announce: BitmapAnnounce, now_us: int,
                          rng: random.Random) -> list[Effect]:
        if announce.node == self.node_id:
            return []
        if announce.bits.n_pieces != self.n_pieces:
            return []
        self.state.known_remote.bits |= announce.bits.bits
        effects = self._fill_pipeline(now_us, rng)
        # The exchange is two-way: if the announcer lacks pieces we hold, reply
        # with our own bitmap so it can start requesting them.
        if self.state.have.bits & ~announce.bits.bits:
            effects.extend(self._announce_bitmap(announce.node, now_us, rng))
        return effects

    def on_receive_piece(self, piece: int, now_us: int,
                         rng: random.Random) -> list[Effect]:
        self.state.pending.pop(piece, None)
        if self.state.have.has(piece):
            return []  # duplicate delivery, idempotent
        self.state.have.set(piece)
        effects: list[Effect] = [
            Note(tc.PIECE_RX, render_name(piece_name(self.torrent, piece)), f"piece={piece}"),
        ]
        if self.completed and self.state.completed_at_us is None:
            self.state.completed_at_us = now_us
            effects.append(Note(tc.COMPLETED, "", f"torrent={self.torrent};pieces={self.n_pieces}"))
        effects.extend(self._fill_pipeline(now_us, rng))
        return effects

    def on_receive_piece_interest(self, request: PieceInterest, now_us: int,
                                  rng: random.Random) -> list[Effect]:
        """Serve a held piece through the PIT return path, else note the demand."""
        if self.state.have.has(request.piece):
            base = self.data_response_delay_us
            spread = base // 10
            delay = base + (rng.randint(-spread, spread) if spread else 0)
            return [EmitData(piece_name(self.torrent, request.piece), delay)]
        self.demanded.add(request.piece)
        return []

    # -- pipeline ----------------------------------------------------------------

    def _request_piece(self, piece: int, retries: int,
                       rng: random.Random) -> list[Effect]:
        name = piece_name(self.torrent, piece)
        pkt = Interest(name, nonce=rng.getrandbits(64), origin=self.node_id)
        return [
            Note(tc.PIECE_REQ, render_name(name), f"piece={piece};retry={retries}"),
            OriginateInterest(pkt),
        ]

    def _fill_pipeline(self, now_us: int, rng: random.Random,
                       exclude: frozenset[int] = frozenset()) -> list[Effect]:
        if self.completed:
            return []
        effects: list[Effect] = []
        for piece in compute_missing(self.state.have, self.state.known_remote):
            if len(self.state.pending) >= self.cfg.pipeline_window:
                break
            if piece in self.state.pending or piece in exclude:
                continue
            self.state.pending[piece] = PendingRequest(last_sent_us=now_us)
            effects.extend(self._request_piece(piece, 0, rng))
        return effects
