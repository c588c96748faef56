"""Deterministic discrete-event network: links with shifted-lognormal
one-way delays, optional loss, and a time-ordered event queue."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np


@dataclass(frozen=True)
class LinkModel:
    name: str
    min_delay_ms: float
    mu_log: float
    sigma_log: float
    loss_rate: float = 0.0

    def __post_init__(self):
        if self.min_delay_ms < 0:
            raise ValueError("min delay must be non-negative")
        if self.sigma_log < 0:
            raise ValueError("sigma must be non-negative")
        if not 0 <= self.loss_rate < 1:
            raise ValueError("loss rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "min": self.min_delay_ms,
            "mu_log": self.mu_log,
            "sigma_log": self.sigma_log,
            "loss": self.loss_rate,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinkModel":
        if "mu_log" in doc:
            return cls(doc["name"], doc["min"], doc["mu_log"], doc["sigma_log"],
                       doc.get("loss", 0.0))
        return fit_link_model(doc["name"], doc["min"], doc["mean"], doc["sd"],
                              doc.get("loss", 0.0))


def fit_link_model(
    name: str, min_ms: float, mean_ms: float, sd_ms: float, loss_rate: float = 0.0
) -> LinkModel:
    """Method-of-moments lognormal fit of the delay excess above the floor."""
    if mean_ms <= min_ms:
        raise ValueError("mean must exceed the minimum delay")
    if sd_ms <= 0:
        raise ValueError("sd must be positive")
    excess = mean_ms - min_ms
    sigma_sq = math.log(1.0 + (sd_ms / excess) ** 2)
    mu = math.log(excess) - sigma_sq / 2.0
    return LinkModel(name, min_ms, mu, math.sqrt(sigma_sq), loss_rate)


def constant_link(name: str, delay_ms: float) -> LinkModel:
    """Zero-variance link with the given one-way delay."""
    if delay_ms <= 0:
        return LinkModel(name, delay_ms, -math.inf, 0.0)
    return LinkModel(name, 0.0, math.log(delay_ms), 0.0)


def sample_delay(link: LinkModel, rng: np.random.Generator) -> float:
    if link.sigma_log == 0.0:
        excess = 0.0 if link.mu_log == -math.inf else math.exp(link.mu_log)
        return link.min_delay_ms + excess
    return link.min_delay_ms + float(rng.lognormal(link.mu_log, link.sigma_log))


def link_rng(seed: int, link_name: str) -> np.random.Generator:
    """Per-link substream so adding a link does not perturb the others."""
    ss = np.random.SeedSequence(
        entropy=seed, spawn_key=tuple(link_name.encode("utf-8"))
    )
    return np.random.default_rng(ss)


@dataclass(order=True)
class _Event:
    deliver_at: float
    sequence: int
    destination: str = field(compare=False)
    datagram: Any = field(compare=False)


@dataclass(frozen=True)
class Topology:
    links: dict[tuple[str, str], LinkModel]

    def link(self, src: str, dst: str) -> LinkModel:
        try:
            return self.links[(src, dst)]
        except KeyError:
            raise KeyError(f"no link {src} -> {dst}") from None

    def to_json(self) -> str:
        rows = [
            {"from": a, "to": b, **m.to_dict()} for (a, b), m in self.links.items()
        ]
        return json.dumps({"links": rows}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        doc = json.loads(text)
        links = {
            (row["from"], row["to"]): LinkModel.from_dict(row)
            for row in doc["links"]
        }
        return cls(links)


class EventQueue:
    """Time-ordered delivery queue; FIFO tie-break at equal times."""

    def __init__(self, topology: Topology, seed: int):
        self.topology = topology
        self.now = 0.0
        self.dropped: list[tuple[str, str, Any]] = []
        self._heap: list[_Event] = []
        self._seq = 0
        self._rngs = {
            (a, b): link_rng(seed, f"{a}->{b}:{m.name}")
            for (a, b), m in topology.links.items()
        }

    def schedule(self, at: float, destination: str, datagram: Any) -> None:
        heapq.heappush(self._heap, _Event(at, self._seq, destination, datagram))
        self._seq += 1

    def send(
        self, src: str, dst: str, datagram: Any, extra_delay_ms: float = 0.0
    ) -> Optional[float]:
        """Send over the (src, dst) link; returns delivery time or None if lost."""
        link = self.topology.link(src, dst)
        rng = self._rngs[(src, dst)]
        if link.loss_rate > 0.0 and rng.random() < link.loss_rate:
            self.dropped.append((src, dst, datagram))
            return None
        at = self.now + extra_delay_ms + sample_delay(link, rng)
        self.schedule(at, dst, datagram)
        return at

    def step(self) -> Optional[tuple[float, str, Any]]:
        if not self._heap:
            return None
        ev = heapq.heappop(self._heap)
        self.now = max(self.now, ev.deliver_at)
        return ev.deliver_at, ev.destination, ev.datagram

    def peek_time(self) -> Optional[float]:
        return self._heap[0].deliver_at if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)
