"""Layer-3 tunnel state machine: identities, 1.5-RTT handshake, cryptokey
routing, timestamp anti-replay, rekeying and endpoint roaming.

Datagram framing (big-endian):

  initiation  type=1 | reserved(3) | sender(4) | eph_pub(32) | enc_static(48) | enc_ts(28)
  response    type=2 | reserved(3) | sender(4) | receiver(4) | eph_pub(32) | enc_empty(16)
  transport   type=4 | reserved(3) | receiver(4) | counter(8) | ciphertext
"""

from __future__ import annotations

import ipaddress
import json
import base64
import struct
from dataclasses import dataclass, field
from typing import Optional, Union

from .crypto import AuthenticationFailure, CryptoSuite, DEFAULT_SUITE, derive_private_key

MSG_INITIATION = 1
MSG_RESPONSE = 2
MSG_TRANSPORT = 4

TAI64_EPOCH = 1 << 62  # label for seconds since 1970 in the TAI64 encoding

Endpoint = tuple[str, int]


class TunnelError(Exception):
    pass


class RoutingError(TunnelError):
    """No peer's allowed-ips cover the packet destination."""


class NoSessionError(TunnelError):
    """A matching peer exists but no established session."""


class NotConfirmedError(TunnelError):
    """Responder may not send transport data before receiving any."""


class HandshakeError(TunnelError):
    pass


@dataclass(frozen=True, order=True)
class Tai64n:
    seconds: int
    nanoseconds: int

    def __post_init__(self):
        if not 0 <= self.seconds < 1 << 64 or not 0 <= self.nanoseconds < 10 ** 9:
            raise ValueError("timestamp out of range")

    def encode(self) -> bytes:
        return struct.pack(">QI", self.seconds, self.nanoseconds)

    @classmethod
    def decode(cls, data: bytes) -> "Tai64n":
        s, n = struct.unpack(">QI", data)
        return cls(s, n)

    @classmethod
    def from_ms(cls, ms: float) -> "Tai64n":
        total_ns = round(ms * 1e6)
        return cls(TAI64_EPOCH + total_ns // 10 ** 9, total_ns % 10 ** 9)


@dataclass(frozen=True)
class PeerIdentity:
    private_key: bytes
    public_key: bytes


def generate_identity(seed: int, suite: Optional[CryptoSuite] = None) -> PeerIdentity:
    suite = suite or DEFAULT_SUITE
    priv = derive_private_key(seed, suite)
    return PeerIdentity(priv, suite.public_key(priv))


@dataclass
class PeerConfig:
    public_key: bytes
    allowed_ips: tuple[ipaddress.IPv4Network, ...]
    endpoint: Optional[Endpoint] = None
    last_seen_timestamp: Optional[Tai64n] = None

    def to_dict(self) -> dict:
        return {
            "public_key": base64.b64encode(self.public_key).decode(),
            "allowed_ips": [str(n) for n in self.allowed_ips],
            "endpoint": list(self.endpoint) if self.endpoint else None,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PeerConfig":
        ep = doc.get("endpoint")
        return cls(
            public_key=base64.b64decode(doc["public_key"]),
            allowed_ips=tuple(ipaddress.IPv4Network(s) for s in doc["allowed_ips"]),
            endpoint=(ep[0], ep[1]) if ep else None,
        )


@dataclass(frozen=True)
class IpPacket:
    """Minimal inner packet: src, dst and an opaque payload."""

    src: ipaddress.IPv4Address
    dst: ipaddress.IPv4Address
    payload: bytes

    def encode(self) -> bytes:
        return self.src.packed + self.dst.packed + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "IpPacket":
        if len(data) < 8:
            raise ValueError("short packet")
        return cls(
            ipaddress.IPv4Address(data[:4]),
            ipaddress.IPv4Address(data[4:8]),
            data[8:],
        )


@dataclass
class HandshakeState:
    role: str  # "initiator" | "responder"
    local_index: int
    local_ephemeral_private: bytes
    local_ephemeral_public: bytes
    chaining_key: bytes
    remote_public: bytes
    stage: str  # "sent-initiation" | "sent-response" | "confirmed"


class ReplayWindow:
    """64-entry sliding bitmap over transport counters."""

    SIZE = 64

    def __init__(self):
        self.max_counter = -1
        self.bitmap = 0

    def check_and_update(self, counter: int) -> bool:
        if counter > self.max_counter:
            shift = counter - self.max_counter
            self.bitmap = ((self.bitmap << shift) | 1) & ((1 << self.SIZE) - 1)
            self.max_counter = counter
            return True
        offset = self.max_counter - counter
        if offset >= self.SIZE or (self.bitmap >> offset) & 1:
            return False
        self.bitmap |= 1 << offset
        return True


@dataclass
class PeerSession:
    peer_public: bytes
    local_index: int
    remote_index: int
    send_key: bytes
    receive_key: bytes
    role: str
    established_at: float
    send_counter: int = 0
    messages_since_handshake: int = 0
    confirmed: bool = False
    receive_window: ReplayWindow = field(default_factory=ReplayWindow)


@dataclass
class RekeyPolicy:
    max_messages: int = 1 << 16
    max_session_age_ms: float = 120_000.0


class TunnelDevice:
    """Message-driven tunnel endpoint; feed it one event at a time."""

    def __init__(
        self,
        identity: PeerIdentity,
        listen_port: int = 51820,
        rekey_policy: Optional[RekeyPolicy] = None,
        suite: Optional[CryptoSuite] = None,
    ):
        self.identity = identity
        self.listen_port = listen_port
        self.rekey_policy = rekey_policy or RekeyPolicy()
        self.suite = suite or DEFAULT_SUITE
        self.peers: dict[bytes, PeerConfig] = {}
        self.handshakes: dict[int, HandshakeState] = {}
        self.sessions_by_index: dict[int, PeerSession] = {}
        self.current_session: dict[bytes, int] = {}
        self._next_index = 1
        self._eph_counter = 0

    # -- configuration ----------------------------------------------------

    def add_peer(self, peer: PeerConfig) -> None:
        for existing in self.peers.values():
            for a in existing.allowed_ips:
                for b in peer.allowed_ips:
                    if a.overlaps(b):
                        raise ValueError(f"allowed-ips overlap: {a} vs {b}")
        self.peers[peer.public_key] = peer

    def load_peer_config(self, text: str) -> None:
        for doc in json.loads(text)["peers"]:
            self.add_peer(PeerConfig.from_dict(doc))

    def dump_peer_config(self) -> str:
        return json.dumps({"peers": [p.to_dict() for p in self.peers.values()]}, indent=2)

    # -- internals --------------------------------------------------------

    def _alloc_index(self) -> int:
        idx = self._next_index
        self._next_index += 1
        return idx

    def _ephemeral(self) -> tuple[bytes, bytes]:
        # Deterministic per device; uniqueness is what matters here.
        self._eph_counter += 1
        seed = self.suite.hash(
            b"eph", self.identity.private_key, self._eph_counter.to_bytes(8, "big")
        )
        priv = self.suite.clamp(seed)
        return priv, self.suite.public_key(priv)

    def _session_keys(self, ck: bytes, role: str) -> tuple[bytes, bytes]:
        t_init = self.suite.hash(ck, b"initiator")
        t_resp = self.suite.hash(ck, b"responder")
        if role == "initiator":
            return t_init, t_resp
        return t_resp, t_init

    def _install_session(self, session: PeerSession) -> None:
        self.sessions_by_index[session.local_index] = session
        if session.confirmed:
            self._promote(session)

    def _promote(self, session: PeerSession) -> None:
        old = self.current_session.get(session.peer_public)
        self.current_session[session.peer_public] = session.local_index
        if old is not None and old != session.local_index:
            self.sessions_by_index.pop(old, None)

    # -- handshake --------------------------------------------------------

    def initiate(self, peer_public: bytes, now_ms: float) -> tuple[bytes, HandshakeState]:
        peer = self.peers.get(peer_public)
        if peer is None:
            raise TunnelError("unknown peer")
        if peer.endpoint is None:
            raise TunnelError("peer endpoint unknown")
        eph_priv, eph_pub = self._ephemeral()
        suite = self.suite
        ck = suite.hash(b"wgbench-handshake")
        ck = suite.hash(ck, eph_pub)
        dh1 = suite.dh(eph_priv, peer_public)
        k1 = suite.hash(ck, dh1, b"key")
        enc_static = suite.seal(k1, 0, self.identity.public_key, eph_pub)
        ck = suite.hash(ck, dh1)
        dh2 = suite.dh(self.identity.private_key, peer_public)
        k2 = suite.hash(ck, dh2, b"key")
        enc_ts = suite.seal(k2, 0, Tai64n.from_ms(now_ms).encode(), enc_static)
        ck = suite.hash(ck, dh2)
        idx = self._alloc_index()
        state = HandshakeState(
            role="initiator",
            local_index=idx,
            local_ephemeral_private=eph_priv,
            local_ephemeral_public=eph_pub,
            chaining_key=ck,
            remote_public=peer_public,
            stage="sent-initiation",
        )
        self.handshakes[idx] = state
        msg = (
            struct.pack(">B3xI", MSG_INITIATION, idx) + eph_pub + enc_static + enc_ts
        )
        return msg, state

    def respond(
        self, message: bytes, source_endpoint: Endpoint, now_ms: float
    ) -> Optional[bytes]:
        """Handle a handshake initiation; all failures are silent."""
        if len(message) != 8 + 32 + 48 + 28 or message[0] != MSG_INITIATION:
            return None
        (sender_index,) = struct.unpack(">I", message[4:8])
        eph_pub = message[8:40]
        enc_static = message[40:88]
        enc_ts = message[88:116]
        suite = self.suite
        ck = suite.hash(b"wgbench-handshake")
        ck = suite.hash(ck, eph_pub)
        try:
            dh1 = suite.dh(self.identity.private_key, eph_pub)
        except Exception:
            return None
        k1 = suite.hash(ck, dh1, b"key")
        try:
            initiator_static = suite.open(k1, 0, enc_static, eph_pub)
        except AuthenticationFailure:
            return None
        peer = self.peers.get(initiator_static)
        if peer is None:
            return None
        ck = suite.hash(ck, dh1)
        dh2 = suite.dh(self.identity.private_key, initiator_static)
        k2 = suite.hash(ck, dh2, b"key")
        try:
            ts = Tai64n.decode(suite.open(k2, 0, enc_ts, enc_static))
        except (AuthenticationFailure, ValueError):
            return None
        if peer.last_seen_timestamp is not None and ts <= peer.last_seen_timestamp:
            return None
        ck = suite.hash(ck, dh2)
        peer.last_seen_timestamp = ts
        peer.endpoint = source_endpoint

        r_priv, r_pub = self._ephemeral()
        ck = suite.hash(ck, r_pub)
        ck = suite.hash(ck, suite.dh(r_priv, eph_pub))
        ck = suite.hash(ck, suite.dh(r_priv, initiator_static))
        k3 = suite.hash(ck, b"key")
        enc_empty = suite.seal(k3, 0, b"", r_pub)
        idx = self._alloc_index()
        send_key, receive_key = self._session_keys(ck, "responder")
        session = PeerSession(
            peer_public=initiator_static,
            local_index=idx,
            remote_index=sender_index,
            send_key=send_key,
            receive_key=receive_key,
            role="responder",
            established_at=now_ms,
            confirmed=False,
        )
        self._install_session(session)
        return struct.pack(">B3xII", MSG_RESPONSE, idx, sender_index) + r_pub + enc_empty

    def finalize_initiator(self, message: bytes, now_ms: float) -> PeerSession:
        if len(message) != 12 + 32 + 16 or message[0] != MSG_RESPONSE:
            raise HandshakeError("malformed response")
        sender_index, receiver_index = struct.unpack(">II", message[4:12])
        r_pub = message[12:44]
        enc_empty = message[44:60]
        state = self.handshakes.get(receiver_index)
        if state is None or state.role != "initiator" or state.stage != "sent-initiation":
            raise HandshakeError("no matching handshake")
        suite = self.suite
        ck = state.chaining_key
        ck = suite.hash(ck, r_pub)
        ck = suite.hash(ck, suite.dh(state.local_ephemeral_private, r_pub))
        ck = suite.hash(ck, suite.dh(self.identity.private_key, r_pub))
        k3 = suite.hash(ck, b"key")
        try:
            suite.open(k3, 0, enc_empty, r_pub)
        except AuthenticationFailure:
            del self.handshakes[receiver_index]
            raise HandshakeError("response failed to authenticate")
        del self.handshakes[receiver_index]
        send_key, receive_key = self._session_keys(ck, "initiator")
        session = PeerSession(
            peer_public=state.remote_public,
            local_index=state.local_index,
            remote_index=sender_index,
            send_key=send_key,
            receive_key=receive_key,
            role="initiator",
            established_at=now_ms,
            confirmed=True,  # initiator may send transport data immediately
        )
        self._install_session(session)
        return session

    # -- transport --------------------------------------------------------

    def route(self, dst: ipaddress.IPv4Address) -> Optional[PeerConfig]:
        best: Optional[tuple[int, PeerConfig]] = None
        for peer in self.peers.values():
            for net in peer.allowed_ips:
                if dst in net and (best is None or net.prefixlen > best[0]):
                    best = (net.prefixlen, peer)
        return best[1] if best else None

    def seal(self, packet: IpPacket, now_ms: float) -> tuple[bytes, Endpoint]:
        peer = self.route(packet.dst)
        if peer is None:
            raise RoutingError(f"no allowed-ips match for {packet.dst}")
        idx = self.current_session.get(peer.public_key)
        session = self.sessions_by_index.get(idx) if idx is not None else None
        if session is None:
            pending = [
                s for s in self.sessions_by_index.values()
                if s.peer_public == peer.public_key
            ]
            if pending:
                raise NotConfirmedError("responder must receive transport data first")
            raise NoSessionError(peer.public_key.hex())
        if session.role == "responder" and not session.confirmed:
            raise NotConfirmedError("responder must receive transport data first")
        if peer.endpoint is None:
            raise TunnelError("peer endpoint unknown")
        counter = session.send_counter
        session.send_counter += 1
        session.messages_since_handshake += 1
        header = struct.pack(">B3xIQ", MSG_TRANSPORT, session.remote_index, counter)
        ct = self.suite.seal(session.send_key, counter, packet.encode(), header)
        return header + ct, peer.endpoint

    def open(self, datagram: bytes, source_endpoint: Endpoint) -> Optional[IpPacket]:
        """Authenticate and decapsulate a transport datagram; silent on failure."""
        if len(datagram) < 16 or datagram[0] != MSG_TRANSPORT:
            return None
        receiver_index, counter = struct.unpack(">IQ", datagram[4:16])
        session = self.sessions_by_index.get(receiver_index)
        if session is None:
            return None
        header = datagram[:16]
        try:
            plain = self.suite.open(session.receive_key, counter, datagram[16:], header)
        except AuthenticationFailure:
            return None
        if not session.receive_window.check_and_update(counter):
            return None
        try:
            packet = IpPacket.decode(plain)
        except ValueError:
            return None
        peer = self.peers.get(session.peer_public)
        if peer is None:
            return None
        if not any(packet.src in net for net in peer.allowed_ips):
            return None  # inner source spoof filter
        if not session.confirmed:
            session.confirmed = True
        self._promote(session)
        session.messages_since_handshake += 1
        peer.endpoint = source_endpoint  # roaming
        return packet

    def receive(
        self, datagram: bytes, source_endpoint: Endpoint, now_ms: float
    ) -> tuple[str, Optional[object]]:
        """Dispatch one inbound datagram by type tag.

        Returns (kind, value): ("response", bytes) for a handshake reply to
        send back, ("packet", IpPacket) for decapsulated data, ("session",
        PeerSession) when an initiation we sent completes, or ("silence",
        None) for everything else.
        """
        if not datagram:
            return ("silence", None)
        kind = datagram[0]
        if kind == MSG_INITIATION:
            reply = self.respond(datagram, source_endpoint, now_ms)
            return ("response", reply) if reply is not None else ("silence", None)
        if kind == MSG_RESPONSE:
            try:
                return ("session", self.finalize_initiator(datagram, now_ms))
            except HandshakeError:
                return ("silence", None)
        if kind == MSG_TRANSPORT:
            packet = self.open(datagram, source_endpoint)
            return ("packet", packet) if packet is not None else ("silence", None)
        return ("silence", None)

    # -- rekeying ---------------------------------------------------------

    def tick(self, now_ms: float) -> list[tuple[bytes, bytes]]:
        """Emit rekey initiations as (peer_public, datagram) pairs."""
        actions: list[tuple[bytes, bytes]] = []
        pending_peers = {h.remote_public for h in self.handshakes.values()}
        for pub, idx in list(self.current_session.items()):
            session = self.sessions_by_index.get(idx)
            if session is None or session.role != "initiator":
                continue
            if pub in pending_peers:
                continue  # rekey already in flight; old session stays valid
            aged = now_ms - session.established_at >= self.rekey_policy.max_session_age_ms
            chatty = session.messages_since_handshake >= self.rekey_policy.max_messages
            if aged or chatty:
                msg, _ = self.initiate(pub, now_ms)
                actions.append((pub, msg))
        return actions
