"""
XOR fountain coding of the two packet streams.

Each coded packet combines the most recently recovered source packet with
the highest-priority unrecovered one, so the destination resolves it with a
single XOR against a payload it already holds. Until something has been
recovered, packets go out uncoded.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional

import numpy as np

from core.errors import ContractError, DomainError

logger = logging.getLogger(__name__)


class Stream(str, Enum):
    CONFIDENTIAL = "s"
    PUBLIC = "p"


@dataclass(frozen=True)
class CodedPacket:
    """c = pi_rec XOR pi_src; `rec` is None for an uncoded packet."""
    rec: Optional[int]
    src: int
    payload: Optional[np.ndarray] = field(default=None, compare=False)

    def as_pair(self) -> tuple:
        return (self.rec, self.src)


@dataclass
class PacketLedger:
    """
    Recovered and unrecovered source packets per stream, in priority order.

    Confidential packets are indexed 1..N_roi and public packets
    N_roi+1..N_roi+N_bg, so the two streams never share an index.
    """
    recovered_s: List[int] = field(default_factory=list)
    unrecovered_s: List[int] = field(default_factory=list)
    recovered_p: List[int] = field(default_factory=list)
    unrecovered_p: List[int] = field(default_factory=list)
    decoded: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        streams = (self.recovered_s + self.unrecovered_s, self.recovered_p + self.unrecovered_p)
        for members in streams:
            if len(set(members)) != len(members):
                raise ContractError("a packet index appears twice within a stream")
        if set(streams[0]) & set(streams[1]):
            raise ContractError("confidential and public streams share a packet index")

    @classmethod
    def for_image(cls, N_roi: int, N_bg: int) -> "PacketLedger":
        return cls(
            unrecovered_s=list(range(1, N_roi + 1)),
            unrecovered_p=list(range(N_roi + 1, N_roi + N_bg + 1)),
        )

    def recovered(self, stream: Stream) -> List[int]:
        return self.recovered_s if Stream(stream) == Stream.CONFIDENTIAL else self.recovered_p

    def unrecovered(self, stream: Stream) -> List[int]:
        return self.unrecovered_s if Stream(stream) == Stream.CONFIDENTIAL else self.unrecovered_p

    def is_complete(self, stream: Stream) -> bool:
        return not self.unrecovered(stream)

    @property
    def delivered(self) -> bool:
        return not self.unrecovered_s and not self.unrecovered_p


class FountainCodec:
    """Synthetic byte payloads for every source packet, used to check XOR decoding bit-exactly."""

    def __init__(self, payloads: Mapping[int, np.ndarray]):
        self.payloads = {index: np.asarray(data, dtype=np.uint8) for index, data in payloads.items()}

    @classmethod
    def random(cls, N_roi: int, N_bg: int, size: int, rng: np.random.Generator) -> "FountainCodec":
        if size < 1:
            raise DomainError(f"payload size must be at least 1 byte, got {size}")
        indices = range(1, N_roi + N_bg + 1)
        return cls({index: rng.integers(0, 256, size=size, dtype=np.uint8) for index in indices})

    def matches(self, ledger: PacketLedger) -> bool:
        """True when every source payload was decoded to its original bytes."""
        if set(ledger.decoded) != set(self.payloads):
            return False
        return all(np.array_equal(ledger.decoded[i], self.payloads[i]) for i in self.payloads)


def fountain_encode(ledger: PacketLedger, stream: Stream, L: int,
                    codec: Optional[FountainCodec] = None) -> List[CodedPacket]:
    """
    Build a frame of up to L coded packets for one stream.

    Returns an empty frame when the stream is already complete.
    """
    if L < 1:
        raise DomainError(f"frame size must be at least 1, got {L}")
    pending = ledger.unrecovered(stream)
    if not pending:
        return []
    recovered = ledger.recovered(stream)
    rec = recovered[-1] if recovered else None

    frame = []
    for src in pending[:L]:
        payload = None
        if codec is not None:
            payload = codec.payloads[src].copy()
            if rec is not None:
                payload ^= codec.payloads[rec]
        frame.append(CodedPacket(rec, src, payload))
    return frame


def fountain_decode_frame(ledger: PacketLedger, frame: List[CodedPacket], success: bool) -> PacketLedger:
    """Acknowledge a frame: on success every packet moves to the recovered set."""
    if not success or not frame:
        return ledger
    stream = Stream.CONFIDENTIAL if frame[0].src in ledger.unrecovered_s or \
        frame[0].src in ledger.recovered_s else Stream.PUBLIC
    pending = ledger.unrecovered(stream)
    recovered = ledger.recovered(stream)

    for packet in frame:
        if packet.src not in pending:
            continue
        if packet.payload is not None:
            if packet.rec is None:
                ledger.decoded[packet.src] = packet.payload.copy()
            else:
                ledger.decoded[packet.src] = packet.payload ^ ledger.decoded[packet.rec]
        pending.remove(packet.src)
        recovered.append(packet.src)
    return ledger
