"""Forwarding strategies: probabilistic pure forwarding and peer relaying.

A pure forwarder relays any interest it hears with a configured probability,
after a short random wait. A peer relays interests for torrents other than
its own only while the torrent's name is fresh in its overheard-name table:
the first hearing within the memory window learns the name and drops the
interest, later hearings forward it and refresh the window.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .forwarding import DeliverToApp, Drop, ForwardAction, ForwardInterest
from .names import Beacon, Interest, Unknown, classify, torrent_of
from . import trace as tc


@dataclass(frozen=True)
class PureForwarderConfig:
    p_forward: float
    jitter_min_us: int
    jitter_max_us: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_forward <= 1.0:
            raise ValueError("p_forward must be within [0, 1]")
        if not 0 <= self.jitter_min_us <= self.jitter_max_us:
            raise ValueError("jitter bounds must satisfy 0 <= min <= max")


@dataclass(frozen=True)
class PeerStrategyConfig:
    own_torrent: str
    t_mem_us: int
    jitter_min_us: int
    jitter_max_us: int

    def __post_init__(self) -> None:
        if self.t_mem_us <= 0:
            raise ValueError("t_mem_us must be positive")
        if not 0 <= self.jitter_min_us <= self.jitter_max_us:
            raise ValueError("jitter bounds must satisfy 0 <= min <= max")


class OverheardNameTable:
    """Torrent names heard recently, each with an expiry timestamp."""

    def __init__(self) -> None:
        self._expiry: dict[str, int] = {}

    def live(self, torrent: str, now_us: int) -> bool:
        expiry = self._expiry.get(torrent)
        return expiry is not None and expiry > now_us

    def touch(self, torrent: str, now_us: int, t_mem_us: int) -> None:
        self._expiry[torrent] = now_us + t_mem_us

    def expiry_of(self, torrent: str) -> int | None:
        return self._expiry.get(torrent)

    def gc(self, now_us: int) -> int:
        stale = [t for t, expiry in self._expiry.items() if expiry <= now_us]
        for torrent in stale:
            del self._expiry[torrent]
        return len(stale)

    def __len__(self) -> int:
        return len(self._expiry)


def _jitter(jitter_min_us: int, jitter_max_us: int, rng: random.Random) -> int:
    return rng.randint(jitter_min_us, jitter_max_us)


def pure_decide(cfg: PureForwarderConfig, interest: Interest,
                rng: random.Random) -> tuple[ForwardAction, str]:
    """One forward-or-not draw; forwards wait a uniform jitter first."""
    if rng.random() < cfg.p_forward:
        return ForwardInterest(_jitter(cfg.jitter_min_us, cfg.jitter_max_us, rng)), \
            tc.REASON_PROB_FWD
    return Drop(), tc.REASON_PROB_DROP


def peer_decide(cfg: PeerStrategyConfig, table: OverheardNameTable,
                interest: Interest, now_us: int,
                rng: random.Random) -> tuple[ForwardAction, str]:
    """Own traffic to the app; foreign torrents gated by the overheard table."""
    cls = classify(interest.name)
    if isinstance(cls, Beacon):
        return DeliverToApp(), tc.REASON_OWN_APP
    if isinstance(cls, Unknown):
        return Drop(), tc.REASON_UNKNOWN_DROP
    torrent = torrent_of(interest.name)
    if torrent == cfg.own_torrent:
        return DeliverToApp(), tc.REASON_OWN_APP
    if table.live(torrent, now_us):
        table.touch(torrent, now_us, cfg.t_mem_us)
        return ForwardInterest(_jitter(cfg.jitter_min_us, cfg.jitter_max_us, rng)), \
            tc.REASON_FOREIGN_FWD
    table.touch(torrent, now_us, cfg.t_mem_us)
    return Drop(), tc.REASON_FOREIGN_LEARN


def table_gc(table: OverheardNameTable, now_us: int) -> int:
    """Drop expired names; expiry exactly at now counts as expired."""
    return table.gc(now_us)


@dataclass
class PureForwarderStrategy:
    cfg: PureForwarderConfig

    def decide(self, interest: Interest, now_us: int,
               rng: random.Random) -> tuple[ForwardAction, str]:
        return pure_decide(self.cfg, interest, rng)

    def gc(self, now_us: int) -> int:
        return 0


@dataclass
class PeerRelayStrategy:
    cfg: PeerStrategyConfig
    table: OverheardNameTable = field(default_factory=OverheardNameTable)

    def decide(self, interest: Interest, now_us: int,
               rng: random.Random) -> tuple[ForwardAction, str]:
        return peer_decide(self.cfg, self.table, interest, now_us, rng)

    def gc(self, now_us: int) -> int:
        return table_gc(self.table, now_us)
