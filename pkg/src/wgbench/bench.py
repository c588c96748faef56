"""Scenario runner: drives the simulated network, tunnel, hub and cloud
through the eleven remote-control scenarios and collects delay samples."""

from __future__ import annotations

import csv
import io
import ipaddress
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from . import netplan
from .hub import CloudRelay, Command, Hub, LightEvent, Transport
from .simnet import EventQueue, LinkModel, Topology, constant_link, fit_link_model
from .tables import BY_LABEL
from .tunnel import IpPacket, PeerConfig, RekeyPolicy, TunnelDevice, generate_identity


class ScenarioId(str, Enum):
    LAN_LOCAL = "lan-local"
    CLOUD_GUESTWIFI = "cloud-guestwifi"
    WG_HTTP_4G = "wg-http-4g"
    WG_HTTPS_4G = "wg-https-4g"
    CLOUD_4G = "cloud-4g"
    WG_HTTP_OFFICE = "wg-http-office"
    WG_HTTPS_OFFICE = "wg-https-office"
    CLOUD_OFFICE = "cloud-office"
    WG_HTTP_PUBLIC = "wg-http-public"
    WG_HTTPS_PUBLIC = "wg-https-public"
    CLOUD_PUBLIC = "cloud-public"

    @property
    def transport(self) -> Transport:
        if self.value.startswith("cloud"):
            return Transport.CLOUD_HTTPS
        if self.value.startswith("wg-https"):
            return Transport.WG_HTTPS
        if self.value.startswith("wg-http"):
            return Transport.WG_HTTP
        return Transport.LAN_HTTP

    @property
    def family(self) -> str:
        return {"lan-http": "lan", "wg-http": "wg", "wg-https": "wg",
                "cloud-https": "cloud"}[self.transport.value]


# Fixed per-request TLS compute cost; the access link fit absorbs the rest
# of each scenario's published delay budget.
HTTPS_CRYPTO_MS = {
    ScenarioId.WG_HTTPS_4G: 300.0,
    ScenarioId.WG_HTTPS_OFFICE: 150.0,
    ScenarioId.WG_HTTPS_PUBLIC: 150.0,
}
CLOUD_CRYPTO_MS = 80.0
CLOUD_PROCESSING_MS = 120.0
HUB_PROCESSING_MS = 28.0


@dataclass(frozen=True)
class ScenarioConfig:
    id: ScenarioId
    access_link: LinkModel
    home_uplink: LinkModel
    command_count: int = 1000
    seed: int = 42
    hub_processing_ms: float = HUB_PROCESSING_MS
    cloud_processing_ms: float = CLOUD_PROCESSING_MS
    https_crypto_ms: float = 0.0
    https_session_cache: bool = True
    timeout_ms: float = 10_000.0
    ntp_offset_bound_ms: float = 10.0

    def __post_init__(self):
        if self.command_count <= 0:
            raise ValueError("command count must be positive")

    def to_json(self) -> str:
        doc = {
            "id": self.id.value,
            "access_link": self.access_link.to_dict(),
            "home_uplink": self.home_uplink.to_dict(),
            "command_count": self.command_count,
            "seed": self.seed,
            "hub_processing_ms": self.hub_processing_ms,
            "cloud_processing_ms": self.cloud_processing_ms,
            "https_crypto_ms": self.https_crypto_ms,
            "https_session_cache": self.https_session_cache,
            "timeout_ms": self.timeout_ms,
            "ntp_offset_bound_ms": self.ntp_offset_bound_ms,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        doc = json.loads(text)
        doc["id"] = ScenarioId(doc["id"])
        doc["access_link"] = LinkModel.from_dict(doc["access_link"])
        doc["home_uplink"] = LinkModel.from_dict(doc["home_uplink"])
        return cls(**doc)


def default_calibration(
    id: ScenarioId, seed: int = 42, command_count: int = 1000
) -> ScenarioConfig:
    """Link models fitted so the composed end-to-end delay hits the
    published (minimum, mean, standard deviation) for the scenario.

    Round trips take two independent one-way access draws, so the one-way
    excess model gets half the min/mean and sd scaled by 1/sqrt(2).
    """
    target = BY_LABEL[id.value]
    fixed = HUB_PROCESSING_MS
    https_crypto = 0.0
    if id in HTTPS_CRYPTO_MS:
        https_crypto = HTTPS_CRYPTO_MS[id]
        fixed += https_crypto
    if id.family == "cloud":
        https_crypto = CLOUD_CRYPTO_MS
        fixed = CLOUD_PROCESSING_MS + https_crypto  # cloud acks before actuation
    exc_min = target.minimum - fixed
    exc_mean = target.mean - fixed
    if exc_min < 0 or exc_mean <= exc_min:
        raise ValueError(f"fixed path components exceed the target for {id}")
    access = fit_link_model(
        f"{id.value}-access",
        exc_min / 2.0,
        exc_mean / 2.0,
        target.standard_deviation / math.sqrt(2.0),
    )
    return ScenarioConfig(
        id=id,
        access_link=access,
        home_uplink=constant_link(f"{id.value}-uplink", 0.0),
        command_count=command_count,
        seed=seed,
        https_crypto_ms=https_crypto,
    )


@dataclass(frozen=True)
class DelaySample:
    sequence: int
    issued_at_ms: float
    replied_at_ms: Optional[float]
    delay_ms: Optional[float]
    status: str  # "ok" | "failed"


@dataclass
class ScenarioRun:
    config: ScenarioConfig
    samples: list[DelaySample]
    events: list[LightEvent]
    handshake_count: int
    monitor_offset_ms: float

    def ok_delays(self) -> list[float]:
        return [s.delay_ms for s in self.samples if s.status == "ok"]


class _Engine:
    """Single-run event machinery shared by all transports."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.id = config.id
        self.family = config.id.family
        self.transport = config.id.transport
        links: dict[tuple[str, str], LinkModel] = {}
        if self.family == "cloud":
            links[("client", "cloud")] = config.access_link
            links[("cloud", "client")] = config.access_link
            links[("cloud", "hub")] = config.home_uplink
        else:
            links[("client", "router")] = config.access_link
            links[("router", "client")] = config.access_link
            links[("router", "hub")] = config.home_uplink
            links[("hub", "router")] = config.home_uplink
        self.queue = EventQueue(Topology(links), config.seed)

        offset_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=config.seed, spawn_key=(0x6D6F6E,))
        )
        bound = config.ntp_offset_bound_ms
        self.monitor_offset = float(offset_rng.uniform(-bound, bound))

        self.hub = Hub(
            processing_time_ms=config.hub_processing_ms,
            tls_enabled=self.transport == Transport.WG_HTTPS,
            tls_crypto_cost_ms=config.https_crypto_ms,
            monitor_clock_offset_ms=self.monitor_offset,
        )
        self.api_key = self.hub.create_api_key(0.0, button_pressed=True)
        self.cloud = CloudRelay(processing_time_ms=config.cloud_processing_ms)
        self.cloud.establish_channel()
        # Pairing the hub with its vendor cloud authorizes the relay channel.
        self.cloud.access_token = self.hub.create_api_key(0.0, button_pressed=True)

        self.hub_ip = ipaddress.IPv4Address("192.168.32.10")
        self.client_ip = ipaddress.IPv4Address("192.168.32.200")
        self.replies: dict[int, float] = {}
        self.tls_acks = 0
        self.session_ready = False
        self.handshake_count = 0

        if self.family == "wg":
            plan = netplan.default_plan()
            scope = tuple(sorted(netplan.tunnel_scope(plan), key=str))
            client_id = generate_identity(config.seed * 2 + 1)
            router_id = generate_identity(config.seed * 2 + 2)
            self.client_dev = TunnelDevice(client_id, rekey_policy=RekeyPolicy())
            self.router_dev = TunnelDevice(router_id, rekey_policy=RekeyPolicy())
            self.client_dev.add_peer(
                PeerConfig(router_id.public_key, scope, endpoint=("router", 51820))
            )
            self.router_dev.add_peer(
                PeerConfig(
                    client_id.public_key,
                    (ipaddress.IPv4Network(f"{self.client_ip}/32"),),
                )
            )
            self.router_pub = router_id.public_key

    # -- event dispatch ---------------------------------------------------

    def dispatch(self, at: float, dest: str, datagram) -> None:
        kind = datagram[0]
        if dest == "router" and kind == "udp":
            self._router_udp(at, datagram[1])
        elif dest == "router" and kind == "inner-reply":
            sealed, _ = self.router_dev.seal(datagram[1], at)
            self.queue.send("router", "client", ("udp", sealed))
        elif dest == "router" and kind == "plain":
            self.queue.send("router", "hub", ("request", datagram[1]))
        elif dest == "router" and kind == "plain-reply":
            self.queue.send("router", "client", ("reply", datagram[1]))
        elif dest == "hub" and kind == "request":
            self._hub_request(at, datagram[1], tunneled=False)
        elif dest == "hub" and kind == "inner":
            self._hub_request(at, datagram[1], tunneled=True)
        elif dest == "hub" and kind == "hub-exec":
            self.hub.set_light(datagram[1], at)
        elif dest == "cloud" and kind == "cloud-req":
            self._cloud_request(at, datagram[1])
        elif dest == "client":
            self._client_receive(at, kind, datagram[1])

    def _router_udp(self, at: float, data: bytes) -> None:
        kind, value = self.router_dev.receive(data, ("client", 51820), at)
        if kind == "response":
            self.queue.send("router", "client", ("udp", value))
        elif kind == "packet":
            self.queue.send("router", "hub", ("inner", value))

    def _hub_request(self, at: float, packet: IpPacket, tunneled: bool) -> None:
        reply_kind = "inner-reply" if tunneled else "plain-reply"
        if packet.payload == b"tls-hello":
            reply = IpPacket(self.hub_ip, packet.src, b"tls-ack")
            self.queue.send("hub", "router", (reply_kind, reply))
            return
        doc = json.loads(packet.payload)
        command = Command(doc["key"], doc["on"], doc["issued"],
                          self.transport, doc["seq"])
        result = self.hub.set_light(command, at)
        payload = json.dumps({"seq": command.sequence, "success": result.success}).encode()
        reply = IpPacket(self.hub_ip, packet.src, payload)
        self.queue.send(
            "hub", "router", (reply_kind, reply),
            extra_delay_ms=result.completed_at_ms - at,
        )

    def _cloud_request(self, at: float, command: Command) -> None:
        if not self.cloud.channel_up:
            return  # no ack; the caller times out
        ack_delay = self.config.cloud_processing_ms + self.config.https_crypto_ms
        self.queue.send("cloud", "hub", ("hub-exec", command),
                        extra_delay_ms=self.config.cloud_processing_ms)
        self.queue.send("cloud", "client", ("cloud-ack", command.sequence),
                        extra_delay_ms=ack_delay)

    def _client_receive(self, at: float, kind: str, value) -> None:
        if kind == "udp":
            what, inner = self.client_dev.receive(value, ("router", 51820), at)
            if what == "session":
                self.session_ready = True
                self.handshake_count += 1
            elif what == "packet":
                self._client_payload(at, inner.payload)
        elif kind == "reply":
            self._client_payload(at, value.payload)
        elif kind == "cloud-ack":
            self.replies[value] = at

    def _client_payload(self, at: float, payload: bytes) -> None:
        if payload == b"tls-ack":
            self.tls_acks += 1
            return
        doc = json.loads(payload)
        if doc.get("success"):
            self.replies[doc["seq"]] = at

    # -- pumping ----------------------------------------------------------

    def pump_until(self, predicate, deadline: Optional[float] = None) -> bool:
        while not predicate():
            nxt = self.queue.peek_time()
            if nxt is None or (deadline is not None and nxt > deadline):
                return False
            at, dest, datagram = self.queue.step()
            self.dispatch(at, dest, datagram)
        return True

    # -- phases -----------------------------------------------------------

    def tunnel_handshake(self) -> None:
        self.session_ready = False
        msg, _ = self.client_dev.initiate(self.router_pub, self.queue.now)
        self.queue.send("client", "router", ("udp", msg))
        if not self.pump_until(lambda: self.session_ready):
            raise RuntimeError("tunnel handshake failed to complete")

    def _send_tunneled(self, payload: bytes) -> None:
        packet = IpPacket(self.client_ip, self.hub_ip, payload)
        sealed, _ = self.client_dev.seal(packet, self.queue.now)
        self.queue.send("client", "router", ("udp", sealed))

    def tls_setup(self) -> bool:
        """Two blocking round trips standing in for the TLS handshake."""
        for _ in range(2):
            want = self.tls_acks + 1
            self._send_tunneled(b"tls-hello")
            if not self.pump_until(lambda: self.tls_acks >= want,
                                   deadline=self.queue.now + self.config.timeout_ms):
                return False
        return True

    def issue_command(self, sequence: int, target_on: bool) -> DelaySample:
        issued = self.queue.now
        deadline = issued + self.config.timeout_ms
        if self.family == "wg" and self.transport == Transport.WG_HTTPS:
            if self._needs_tls:
                if not self.tls_setup():
                    self.queue.now = deadline
                    return DelaySample(sequence, issued, None, None, "failed")
                self._needs_tls = not self.config.https_session_cache
        payload = json.dumps({
            "key": self.api_key, "on": target_on,
            "seq": sequence, "issued": issued,
        }).encode()
        if self.family == "cloud":
            command = Command(self.cloud.access_token, target_on, issued,
                              self.transport, sequence)
            self.queue.send("client", "cloud", ("cloud-req", command))
        elif self.family == "wg":
            self._send_tunneled(payload)
        else:
            packet = IpPacket(self.client_ip, self.hub_ip, payload)
            self.queue.send("client", "router", ("plain", packet))
        if self.pump_until(lambda: sequence in self.replies, deadline=deadline):
            replied = self.replies[sequence]
            return DelaySample(sequence, issued, replied, replied - issued, "ok")
        self.queue.now = deadline
        return DelaySample(sequence, issued, None, None, "failed")

    def run(self) -> ScenarioRun:
        if self.family == "wg":
            self.tunnel_handshake()
        self._needs_tls = self.transport == Transport.WG_HTTPS
        samples = []
        for seq in range(self.config.command_count):
            if self.family == "wg":
                for _, msg in self.client_dev.tick(self.queue.now):
                    self.session_ready = False
                    self.queue.send("client", "router", ("udp", msg))
                    self.pump_until(lambda: self.session_ready,
                                    deadline=self.queue.now + self.config.timeout_ms)
            samples.append(self.issue_command(seq, target_on=(seq % 2 == 0)))
        return ScenarioRun(
            config=self.config,
            samples=samples,
            events=list(self.hub.events),
            handshake_count=self.handshake_count,
            monitor_offset_ms=self.monitor_offset,
        )


def run_scenario(config: ScenarioConfig) -> ScenarioRun:
    return _Engine(config).run()


# -- command/event matching ----------------------------------------------


@dataclass(frozen=True)
class CommandRecord:
    sequence: int
    issued_at_ms: float
    turns_on: bool


@dataclass
class MatchReport:
    matched: list[tuple[int, float]]
    unmatched_commands: list[int]
    orphan_events: list[float]

    def to_json(self) -> str:
        return json.dumps({
            "matched": [{"sequence": s, "actuation_delay_ms": d} for s, d in self.matched],
            "unmatched_commands": self.unmatched_commands,
            "orphan_events": self.orphan_events,
        }, indent=2)


def match_events(
    commands: list[CommandRecord],
    events: list[LightEvent],
    clock_offset_bound_ms: float = 10.0,
    window_ms: float = 5000.0,
) -> MatchReport:
    """Greedy in-order matching of state-changing commands to light events.

    An event matches when some clock offset within the bound places its
    monitor timestamp inside [issue, issue + window]; the reported actuation
    delay uses the mid-offset (zero-shift) estimate.
    """
    if window_ms <= 0:
        raise ValueError("window must be positive")
    for a, b in zip(events, events[1:]):
        if a.turned_on == b.turned_on:
            raise ValueError("event log does not alternate")
    taken = [False] * len(events)
    matched: list[tuple[int, float]] = []
    unmatched: list[int] = []
    for cmd in sorted(commands, key=lambda c: c.issued_at_ms):
        hit = None
        for i, ev in enumerate(events):
            if taken[i] or ev.turned_on != cmd.turns_on:
                continue
            lo = cmd.issued_at_ms - clock_offset_bound_ms
            hi = cmd.issued_at_ms + window_ms + clock_offset_bound_ms
            if lo <= ev.monitor_timestamp_ms <= hi:
                hit = i
                break
            if ev.monitor_timestamp_ms > hi:
                break
        if hit is None:
            unmatched.append(cmd.sequence)
        else:
            taken[hit] = True
            matched.append((cmd.sequence, events[hit].monitor_timestamp_ms - cmd.issued_at_ms))
    orphans = [ev.monitor_timestamp_ms for i, ev in enumerate(events) if not taken[i]]
    return MatchReport(matched, unmatched, orphans)


# -- CSV I/O --------------------------------------------------------------


def samples_to_csv(scenario: str, samples: list[DelaySample]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["scenario", "seq", "issued_ms", "replied_ms", "delay_ms", "status"])
    for s in samples:
        writer.writerow([
            scenario,
            s.sequence,
            repr(s.issued_at_ms),
            "" if s.replied_at_ms is None else repr(s.replied_at_ms),
            "" if s.delay_ms is None else repr(s.delay_ms),
            s.status,
        ])
    return out.getvalue()


def samples_from_csv(text: str) -> tuple[str, list[DelaySample]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["scenario", "seq", "issued_ms", "replied_ms",
                               "delay_ms", "status"]:
        raise ValueError("unrecognized sample CSV header")
    scenario = rows[1][0] if len(rows) > 1 else ""
    samples = [
        DelaySample(
            sequence=int(seq),
            issued_at_ms=float(issued),
            replied_at_ms=float(replied) if replied else None,
            delay_ms=float(delay) if delay else None,
            status=status,
        )
        for _, seq, issued, replied, delay, status in rows[1:]
    ]
    return scenario, samples


def export_samples(scenario: str, samples: list[DelaySample], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(samples_to_csv(scenario, samples))
