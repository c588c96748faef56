"""Pluggable crypto primitives for the tunnel: Curve25519 key agreement,
ChaCha20-Poly1305 AEAD and BLAKE2s hashing."""

from __future__ import annotations

import hashlib
from typing import Optional, Protocol

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.serialization import (
    Encoding,
    NoEncryption,
    PrivateFormat,
    PublicFormat,
)


class AuthenticationFailure(Exception):
    """AEAD tag did not verify."""


class CryptoSuite(Protocol):
    def clamp(self, scalar: bytes) -> bytes: ...
    def public_key(self, private: bytes) -> bytes: ...
    def dh(self, private: bytes, public: bytes) -> bytes: ...
    def seal(self, key: bytes, counter: int, plaintext: bytes, ad: bytes) -> bytes: ...
    def open(self, key: bytes, counter: int, ciphertext: bytes, ad: bytes) -> bytes: ...
    def hash(self, *parts: bytes) -> bytes: ...


class X25519Suite:
    """Default suite: X25519 + ChaCha20-Poly1305 + BLAKE2s."""

    TAG_LEN = 16

    def clamp(self, scalar: bytes) -> bytes:
        b = bytearray(scalar)
        b[0] &= 248
        b[31] &= 127
        b[31] |= 64
        return bytes(b)

    def public_key(self, private: bytes) -> bytes:
        priv = X25519PrivateKey.from_private_bytes(private)
        return priv.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def dh(self, private: bytes, public: bytes) -> bytes:
        priv = X25519PrivateKey.from_private_bytes(private)
        return priv.exchange(X25519PublicKey.from_public_bytes(public))

    def _nonce(self, counter: int) -> bytes:
        return b"\x00" * 4 + counter.to_bytes(8, "little")

    def seal(self, key: bytes, counter: int, plaintext: bytes, ad: bytes) -> bytes:
        return ChaCha20Poly1305(key).encrypt(self._nonce(counter), plaintext, ad)

    def open(self, key: bytes, counter: int, ciphertext: bytes, ad: bytes) -> bytes:
        try:
            return ChaCha20Poly1305(key).decrypt(self._nonce(counter), ciphertext, ad)
        except InvalidTag as exc:
            raise AuthenticationFailure() from exc

    def hash(self, *parts: bytes) -> bytes:
        h = hashlib.blake2s()
        for p in parts:
            h.update(p)
        return h.digest()


DEFAULT_SUITE = X25519Suite()


def derive_private_key(seed: int, suite: Optional[CryptoSuite] = None) -> bytes:
    """Deterministic, clamped private key for a 64-bit seed."""
    suite = suite or DEFAULT_SUITE
    raw = hashlib.blake2s(
        seed.to_bytes(8, "big", signed=False), person=b"wgb-id"
    ).digest()
    return suite.clamp(raw)
