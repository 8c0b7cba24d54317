"""Layer 2 key management: predistributed pool, two banks, permuted orderings.

A pool of K symmetric keys is split into two banks.  The AF bank covers
source <-> aggregator-forwarder traffic; the SS bank covers source <->
source traffic relayed through the AF, and the AF never holds those keys.

Because every source holds the same banks, a raw index would let any
source decrypt any other's traffic.  Each pair therefore fixes its own
secret permutation of the bank, and the session key for a message is
announced as a plaintext index R_c into that permuted ordering: useless to
anyone who does not know the permutation.

Wire formats (simulated, documented for log parsing):

  key-index announcement : {sender: u32, r_c: u32}  (plaintext, 1-based)
  sealed frame           : {sender: u32, receiver: u32, nonce: 16 bytes,
                            body: ciphertext || 16-byte tag}

The default cipher is a keyed SHA-256 counter stream plus an HMAC tag —
adequate for the simulation, deliberately not production cryptography, and
pluggable behind the CipherSuite interface.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass, field

from .netsim import NodeId
from .rng import SimRng

__all__ = [
    "AuthenticationError",
    "UnknownSourceError",
    "KeyIndexRangeError",
    "ProtocolError",
    "KeyPool",
    "KeyIndexAnnouncement",
    "SealedFrame",
    "CipherSuite",
    "StreamMacCipher",
    "SourceNode",
    "AggregatorNode",
    "SsSchedule",
    "generate_pool",
    "permute_bank_for_pair",
    "select_session_key",
    "af_resolve_key",
    "source_resolve_key",
    "establish_ss_channel",
    "seal",
    "open_frame",
    "ss_send",
    "ss_receive",
]

KEY_LEN = 16  # 128-bit keys
NONCE_LEN = 16
TAG_LEN = 16


class AuthenticationError(Exception):
    """Ciphertext failed authentication (wrong key or tampered)."""


class UnknownSourceError(KeyError):
    """AF has no registered permutation for this source."""


class KeyIndexRangeError(IndexError):
    """Announced key index outside the bank."""


class ProtocolError(RuntimeError):
    """A required protocol message is missing or malformed."""


@dataclass(frozen=True)
class KeyPool:
    bank_af: tuple[bytes, ...]
    bank_ss: tuple[bytes, ...]

    @property
    def total(self) -> int:
        return len(self.bank_af) + len(self.bank_ss)

    @property
    def key_ids(self) -> tuple[int, ...]:
        # AF bank takes ids [0, k_af); SS bank the rest.
        return tuple(range(self.total))


@dataclass(frozen=True)
class KeyIndexAnnouncement:
    sender: NodeId
    r_c: int  # 1-based index into the pair's permuted bank


@dataclass(frozen=True)
class SealedFrame:
    sender: NodeId
    receiver: NodeId
    nonce: bytes
    body: bytes  # ciphertext || tag


class CipherSuite:
    """Symmetric seal/open with associated data; implementations pluggable."""

    def seal(self, key: bytes, nonce: bytes, plaintext: bytes, aad: bytes = b"") -> bytes:
        raise NotImplementedError

    def open(self, key: bytes, nonce: bytes, body: bytes, aad: bytes = b"") -> bytes:
        raise NotImplementedError


def _xor(data: bytes, stream: bytes) -> bytes:
    n = len(data)
    return (int.from_bytes(data, "big") ^ int.from_bytes(stream[:n], "big")).to_bytes(
        n, "big"
    )


class StreamMacCipher(CipherSuite):
    """SHA-256 counter keystream + truncated HMAC-SHA-256 tag."""

    def _keystream(self, key: bytes, nonce: bytes, length: int) -> bytes:
        blocks = []
        have = 0
        counter = 0
        while have < length:
            block = hashlib.sha256(
                key + nonce + counter.to_bytes(8, "big")
            ).digest()
            blocks.append(block)
            have += len(block)
            counter += 1
        return b"".join(blocks)[:length]

    def seal(self, key, nonce, plaintext, aad=b""):
        ct = _xor(plaintext, self._keystream(key, nonce, len(plaintext)))
        tag = hmac.new(key, nonce + aad + ct, hashlib.sha256).digest()[:TAG_LEN]
        return ct + tag

    def open(self, key, nonce, body, aad=b""):
        if len(body) < TAG_LEN:
            raise AuthenticationError("body shorter than tag")
        ct, tag = body[:-TAG_LEN], body[-TAG_LEN:]
        expect = hmac.new(key, nonce + aad + ct, hashlib.sha256).digest()[:TAG_LEN]
        if not hmac.compare_digest(tag, expect):
            raise AuthenticationError("authentication failed")
        return _xor(ct, self._keystream(key, nonce, len(ct)))


DEFAULT_CIPHER = StreamMacCipher()


def seal(
    key: bytes,
    plaintext: bytes,
    aad: bytes = b"",
    *,
    nonce: bytes,
    cipher: CipherSuite = DEFAULT_CIPHER,
) -> tuple[bytes, bytes]:
    """Returns (nonce, body).  Nonce must be caller-supplied (drawn from a
    SimRng stream) so runs stay deterministic."""
    return nonce, cipher.seal(key, nonce, plaintext, aad)


def open_frame(
    key: bytes,
    nonce: bytes,
    body: bytes,
    aad: bytes = b"",
    cipher: CipherSuite = DEFAULT_CIPHER,
) -> bytes:
    return cipher.open(key, nonce, body, aad)


def generate_pool(total: int, af_count: int, rng: SimRng) -> KeyPool:
    """total distinct random keys; first af_count form the AF bank."""
    if not 1 <= af_count < total:
        raise ValueError(
            f"invalid bank split: af_count={af_count} must satisfy 1 <= af_count < total={total}"
        )
    keys: list[bytes] = []
    seen: set[bytes] = set()
    while len(keys) < total:
        k = rng.randbytes(KEY_LEN)
        if k not in seen:
            seen.add(k)
            keys.append(k)
    return KeyPool(bank_af=tuple(keys[:af_count]), bank_ss=tuple(keys[af_count:]))


def permute_bank_for_pair(bank_size: int, rng: SimRng) -> tuple[int, ...]:
    """Uniform random permutation of bank indices for one pair."""
    if bank_size < 1:
        raise ValueError("bank must be non-empty")
    order = list(range(bank_size))
    rng.shuffle(order)
    return tuple(order)


@dataclass
class SsSchedule:
    """Shared source<->source key ordering for one pair.

    Messages addressed to a peer are keyed through that peer's own
    permutation of the SS bank, with the slot index announced in plaintext
    by the sender.
    """

    perm_by_owner: dict[NodeId, tuple[int, ...]]

    def key_for(self, receiver: NodeId, bank_ss: tuple[bytes, ...], index: int) -> bytes:
        perm = self.perm_by_owner[receiver]
        if not 1 <= index <= len(perm):
            raise KeyIndexRangeError(f"index {index} outside [1, {len(perm)}]")
        return bank_ss[perm[index - 1]]


@dataclass
class SourceNode:
    """Per-source key state: both banks, its AF-pair permutation, and any
    established SS schedules."""

    node_id: NodeId
    bank_af: tuple[bytes, ...]
    bank_ss: tuple[bytes, ...]
    af_perm: tuple[int, ...] | None = None
    ss_schedules: dict[NodeId, SsSchedule] = field(default_factory=dict)


@dataclass
class AggregatorNode:
    """AF key state: the AF bank plus each source pair's permutation.
    Holds no SS-bank key by construction."""

    node_id: NodeId
    bank_af: tuple[bytes, ...]
    pair_perms: dict[NodeId, tuple[int, ...]] = field(default_factory=dict)

    def held_keys(self) -> set[bytes]:
        return set(self.bank_af)


def register_pair(source: SourceNode, af: AggregatorNode, rng: SimRng) -> tuple[int, ...]:
    """Fix the pair's secret ordering of the AF bank, stored at both ends."""
    perm = permute_bank_for_pair(len(af.bank_af), rng)
    source.af_perm = perm
    af.pair_perms[source.node_id] = perm
    return perm


def select_session_key(
    source: SourceNode, rng: SimRng
) -> tuple[KeyIndexAnnouncement, bytes]:
    """Source-side pick: uniform R_c in [1, bank size], key through the
    pair permutation."""
    if source.af_perm is None:
        raise ProtocolError(f"source {source.node_id} has no registered AF pair")
    r_c = rng.randint(1, len(source.bank_af))
    key = source.bank_af[source.af_perm[r_c - 1]]
    return KeyIndexAnnouncement(sender=source.node_id, r_c=r_c), key


def af_resolve_key(af: AggregatorNode, announcement: KeyIndexAnnouncement) -> bytes:
    """AF-side lookup of the session key a source announced."""
    if announcement.sender not in af.pair_perms:
        raise UnknownSourceError(f"no pair registered for source {announcement.sender}")
    perm = af.pair_perms[announcement.sender]
    if not 1 <= announcement.r_c <= len(perm):
        raise KeyIndexRangeError(
            f"R_c={announcement.r_c} outside [1, {len(perm)}]"
        )
    return af.bank_af[perm[announcement.r_c - 1]]


def source_resolve_key(source: SourceNode, r_c: int) -> bytes:
    """Source-side lookup for AF-initiated frames (same permuted ordering)."""
    if source.af_perm is None:
        raise ProtocolError(f"source {source.node_id} has no registered AF pair")
    if not 1 <= r_c <= len(source.af_perm):
        raise KeyIndexRangeError(f"R_c={r_c} outside [1, {len(source.af_perm)}]")
    return source.bank_af[source.af_perm[r_c - 1]]


def _encode_perm(perm: tuple[int, ...]) -> bytes:
    # u16 big-endian per entry; bank sizes stay well under 2^16.
    return struct.pack(f">{len(perm)}H", *perm)


def _decode_perm(blob: bytes) -> tuple[int, ...]:
    if len(blob) % 2 != 0:
        raise ProtocolError("malformed permutation message: odd length")
    return struct.unpack(f">{len(blob) // 2}H", blob)


def _wrap_perm_message(
    sender: SourceNode,
    receiver_id: NodeId,
    perm: tuple[int, ...],
    rng: SimRng,
    cipher: CipherSuite,
) -> tuple[KeyIndexAnnouncement, int, SealedFrame]:
    """Double-wrap the sender's SS-bank permutation.

    Inner layer: sealed under an SS-bank key (raw bank order, slot announced
    in plaintext) so the relaying AF cannot read it.  Outer layer: sealed
    under the sender's AF session key, per the pairwise-key relay rule.
    Returns (af announcement, ss slot, outer frame).
    """
    ss_index = rng.randint(1, len(sender.bank_ss))
    inner_nonce = rng.randbytes(NONCE_LEN)
    inner_aad = f"ss-perm:{sender.node_id}->{receiver_id}".encode()
    inner_body = cipher.seal(
        sender.bank_ss[ss_index - 1], inner_nonce, _encode_perm(perm), inner_aad
    )
    # Binary relay payload: ss slot (u32) || inner nonce || inner sealed body.
    payload = struct.pack(">I", ss_index) + inner_nonce + inner_body

    announcement, af_key = select_session_key(sender, rng)
    outer_nonce = rng.randbytes(NONCE_LEN)
    outer_aad = f"relay:{sender.node_id}->{receiver_id}".encode()
    outer_body = cipher.seal(af_key, outer_nonce, payload, outer_aad)
    frame = SealedFrame(
        sender=sender.node_id, receiver=receiver_id, nonce=outer_nonce, body=outer_body
    )
    return announcement, ss_index, frame


def _unwrap_perm_message(
    receiver: SourceNode,
    sender_id: NodeId,
    relayed_r_c: int,
    frame: SealedFrame,
    cipher: CipherSuite,
) -> tuple[int, ...]:
    outer_aad = f"relay:{sender_id}->{receiver.node_id}".encode()
    af_key = source_resolve_key(receiver, relayed_r_c)
    payload = cipher.open(af_key, frame.nonce, frame.body, outer_aad)
    if len(payload) < 4 + NONCE_LEN + TAG_LEN:
        raise ProtocolError("malformed relay payload: too short")
    ss_index = struct.unpack(">I", payload[:4])[0]
    inner_nonce = payload[4:4 + NONCE_LEN]
    inner_body = payload[4 + NONCE_LEN:]
    if not 1 <= ss_index <= len(receiver.bank_ss):
        raise KeyIndexRangeError(f"ss index {ss_index} outside bank")
    inner_aad = f"ss-perm:{sender_id}->{receiver.node_id}".encode()
    blob = cipher.open(
        receiver.bank_ss[ss_index - 1], inner_nonce, inner_body, inner_aad
    )
    return _decode_perm(blob)


def establish_ss_channel(
    s1: SourceNode,
    s2: SourceNode,
    af: AggregatorNode,
    rng: SimRng,
    cipher: CipherSuite = DEFAULT_CIPHER,
    tamper=None,
) -> SsSchedule:
    """Bootstrap the source<->source schedule through the AF relay.

    Each source draws its own permutation of the SS bank and ships it to
    the peer, double-wrapped (see _wrap_perm_message).  The AF re-wraps the
    outer layer for the receiving pair but never sees inside the inner one.
    Both ends install the identical schedule.  `tamper`, if given, is
    applied to each relayed frame (test hook for fault injection).
    """
    perms: dict[NodeId, tuple[int, ...]] = {}
    for sender, receiver in ((s1, s2), (s2, s1)):
        perm = permute_bank_for_pair(len(sender.bank_ss), rng)
        announcement, _, frame = _wrap_perm_message(
            sender, receiver.node_id, perm, rng, cipher
        )

        # AF relay: unwrap the sender-side outer layer, re-wrap toward the
        # receiver under the receiver's AF pairing.  The payload it handles
        # is still sealed under an SS-bank key it does not hold.
        af_key_in = af_resolve_key(af, announcement)
        in_aad = f"relay:{sender.node_id}->{receiver.node_id}".encode()
        payload = cipher.open(af_key_in, frame.nonce, frame.body, in_aad)
        out_r_c = rng.randint(1, len(af.bank_af))
        if receiver.node_id not in af.pair_perms:
            raise UnknownSourceError(
                f"no pair registered for source {receiver.node_id}"
            )
        af_key_out = af.bank_af[af.pair_perms[receiver.node_id][out_r_c - 1]]
        out_nonce = rng.randbytes(NONCE_LEN)
        out_body = cipher.seal(af_key_out, out_nonce, payload, in_aad)
        relayed = SealedFrame(
            sender=sender.node_id, receiver=receiver.node_id,
            nonce=out_nonce, body=out_body,
        )
        if tamper is not None:
            relayed = tamper(relayed)

        perms[sender.node_id] = _unwrap_perm_message(
            receiver, sender.node_id, out_r_c, relayed, cipher
        )
        if perms[sender.node_id] != perm:
            raise ProtocolError("relayed permutation does not match the original")

    schedule = SsSchedule(perm_by_owner=dict(perms))
    s1.ss_schedules[s2.node_id] = schedule
    s2.ss_schedules[s1.node_id] = SsSchedule(perm_by_owner=dict(perms))
    return schedule


def ss_send(
    sender: SourceNode,
    receiver_id: NodeId,
    plaintext: bytes,
    rng: SimRng,
    cipher: CipherSuite = DEFAULT_CIPHER,
) -> tuple[int, SealedFrame]:
    """Seal a source->source message under the peer's permuted SS ordering.

    Returns (announced slot index, frame).  The frame is relayed verbatim
    by the AF, which cannot open it.
    """
    if receiver_id not in sender.ss_schedules:
        raise ProtocolError(
            f"no SS schedule between {sender.node_id} and {receiver_id}"
        )
    schedule = sender.ss_schedules[receiver_id]
    index = rng.randint(1, len(sender.bank_ss))
    key = schedule.key_for(receiver_id, sender.bank_ss, index)
    nonce = rng.randbytes(NONCE_LEN)
    aad = f"ss:{sender.node_id}->{receiver_id}".encode()
    body = cipher.seal(key, nonce, plaintext, aad)
    return index, SealedFrame(
        sender=sender.node_id, receiver=receiver_id, nonce=nonce, body=body
    )


def ss_receive(
    receiver: SourceNode,
    index: int,
    frame: SealedFrame,
    cipher: CipherSuite = DEFAULT_CIPHER,
) -> bytes:
    if frame.sender not in receiver.ss_schedules:
        raise ProtocolError(
            f"no SS schedule between {receiver.node_id} and {frame.sender}"
        )
    schedule = receiver.ss_schedules[frame.sender]
    key = schedule.key_for(receiver.node_id, receiver.bank_ss, index)
    aad = f"ss:{frame.sender}->{receiver.node_id}".encode()
    return cipher.open(key, frame.nonce, frame.body, aad)
