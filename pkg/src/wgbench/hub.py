"""Simulated smart-light hub, cloud relay, and light-state monitor."""

from __future__ import annotations

import csv
import io
import secrets
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Transport(str, Enum):
    LAN_HTTP = "lan-http"
    WG_HTTP = "wg-http"
    WG_HTTPS = "wg-https"
    CLOUD_HTTPS = "cloud-https"


@dataclass(frozen=True)
class Command:
    key: str
    target_on: bool
    issued_at_ms: float
    transport: Transport
    sequence: int


@dataclass(frozen=True)
class LightEvent:
    monitor_timestamp_ms: float
    turned_on: bool  # off->on if True, on->off otherwise

    @property
    def transition(self) -> str:
        return "off->on" if self.turned_on else "on->off"


@dataclass(frozen=True)
class CommandResult:
    success: bool
    completed_at_ms: float
    error: Optional[str] = None


class AuthorizationError(Exception):
    pass


BUTTON_WINDOW_MS = 30_000.0


@dataclass
class Hub:
    processing_time_ms: float = 28.0
    tls_enabled: bool = False
    tls_crypto_cost_ms: float = 0.0
    monitor_clock_offset_ms: float = 0.0
    api_keys: set[str] = field(default_factory=set)
    light_on: bool = False
    events: list[LightEvent] = field(default_factory=list)
    _button_pressed_until: float = -1.0
    _key_counter: int = 0

    def __post_init__(self):
        if self.processing_time_ms <= 0:
            raise ValueError("processing time must be positive")

    def press_button(self, now_ms: float) -> None:
        self._button_pressed_until = now_ms + BUTTON_WINDOW_MS

    def create_api_key(self, now_ms: float, button_pressed: bool = False) -> str:
        """Issue a fresh API key; requires the physical button press."""
        if button_pressed:
            self.press_button(now_ms)
        if now_ms > self._button_pressed_until:
            raise AuthorizationError("press the hub button to authorize key creation")
        self._key_counter += 1
        token = f"hubkey-{self._key_counter:04d}-{secrets.token_hex(8)}"
        self.api_keys.add(token)
        return token

    def set_light(self, command: Command, now_ms: float) -> CommandResult:
        """Synchronous command execution; reply lands after processing."""
        if command.key not in self.api_keys:
            return CommandResult(False, now_ms, error="unauthorized")
        cost = self.processing_time_ms + (self.tls_crypto_cost_ms if self.tls_enabled else 0.0)
        done = now_ms + cost
        if command.target_on != self.light_on:
            self.light_on = command.target_on
            self.events.append(
                LightEvent(done + self.monitor_clock_offset_ms, command.target_on)
            )
        return CommandResult(True, done)


@dataclass
class CloudRelay:
    """Vendor cloud: reachable only over the hub's persistent outbound channel."""

    processing_time_ms: float = 120.0
    access_token: str = "cloud-token"
    channel_up: bool = False

    def establish_channel(self) -> None:
        self.channel_up = True

    def drop_channel(self) -> None:
        self.channel_up = False

    def relay_command(
        self, hub: Hub, command: Command, now_ms: float, channel_delay_ms: float = 0.0
    ) -> CommandResult:
        """Forward over the persistent channel; the cloud acknowledges the
        caller once it has queued the command, which may precede actuation."""
        if not self.channel_up:
            return CommandResult(False, now_ms, error="channel-down")
        ack_at = now_ms + self.processing_time_ms
        hub.set_light(command, now_ms + self.processing_time_ms + channel_delay_ms)
        return CommandResult(True, ack_at)


@dataclass(frozen=True)
class HttpsSchedule:
    """Extra cost of application-layer TLS on top of a transport."""

    handshake_round_trips: int
    per_request_crypto_ms: float


def https_overhead(transport: Transport, session_cached: bool,
                   crypto_cost_ms: float = 0.0) -> HttpsSchedule:
    """Handshake round trips due on the next request, plus per-request cost."""
    if transport in (Transport.LAN_HTTP, Transport.WG_HTTP):
        return HttpsSchedule(0, 0.0)
    return HttpsSchedule(0 if session_cached else 2, crypto_cost_ms)


def events_to_csv(events: list[LightEvent]) -> str:
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["monitor_timestamp_ms", "transition"])
    for ev in events:
        writer.writerow([f"{ev.monitor_timestamp_ms:.6f}", ev.transition])
    return out.getvalue()


def events_from_csv(text: str) -> list[LightEvent]:
    rows = list(csv.reader(io.StringIO(text)))
    return [
        LightEvent(float(ts), transition == "off->on")
        for ts, transition in rows[1:]
    ]
