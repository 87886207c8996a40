"""Bit-exact wire protocol: framing, payload codecs, channels, sessions.

Frame layout: 4-byte big-endian payload length, 1-byte tag, payload.
Tags: 0x01 commitment, 0x02 challenge, 0x03 final response, 0x04 decision,
0x10 instance, 0x11 public parameters.

Payload conventions are big-endian throughout; bit fields are packed MSB
first with the final partial byte zero-padded. The final-response payload
is the bit-exact realization of the communication formula: for each round,
the queried positions at ceil(log2 l_i) bits each (0-based, ascending),
the answers at the symbol width, then the opening digests. No counts are
transmitted: the query count comes from the protocol shape and the digest
count is forced by the canonical multi-proof, so the semantic payload
carries exactly the bits the accounting formula charges. Frame headers and
the final byte-alignment padding are transport overhead, counted
separately from protocol bits.

Sessions drive the mandated message order (commit, challenge, repeated,
then one batched response) over any reliable ordered channel; in-memory
queues and TCP sockets are provided and produce identical frame bytes
under identical seeds.
"""

from __future__ import annotations

import queue
import socket
from dataclasses import dataclass
from typing import Any

from .errors import DecodeError, ProtocolViolation, TransportError
from .ibcs import (
    COMMITMENT_WIRE_BITS,
    ArgParams,
    Transcript,
    arg_verify,
    position_bits,
)
from .iop import IopProtocol
from .prng import Bits, Prng
from .toys import (
    GraphColoringInstance,
    SumcheckInstance,
    gc_pcp,
    sumcheck_iop,
)
from .vc import DIGEST_BYTES, Commitment, Opening, VcParams, params_from_bytes, proof_digest_count

TAG_COMMIT = 0x01
TAG_CHALLENGE = 0x02
TAG_FINAL = 0x03
TAG_DECISION = 0x04
TAG_INSTANCE = 0x10
TAG_PARAMS = 0x11

_KNOWN_TAGS = {TAG_COMMIT, TAG_CHALLENGE, TAG_FINAL, TAG_DECISION, TAG_INSTANCE, TAG_PARAMS}

FRAME_HEADER_BYTES = 5

TRANSCRIPT_MAGIC = b"IBCSTR01"


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


def encode_frame(tag: int, payload: bytes) -> bytes:
    if tag not in _KNOWN_TAGS:
        raise ProtocolViolation(f"unknown frame tag {tag:#x}")
    return len(payload).to_bytes(4, "big") + bytes([tag]) + payload


def decode_frame(data: bytes, offset: int = 0) -> tuple[int, bytes, int]:
    """Decode one frame at `offset`; returns (tag, payload, next offset)."""
    if len(data) - offset < FRAME_HEADER_BYTES:
        raise DecodeError("truncated frame header", offset=offset)
    length = int.from_bytes(data[offset : offset + 4], "big")
    tag = data[offset + 4]
    if tag not in _KNOWN_TAGS:
        raise DecodeError(f"unknown frame tag {tag:#x}", offset=offset + 4)
    start = offset + FRAME_HEADER_BYTES
    if len(data) - start < length:
        raise DecodeError("truncated frame payload", offset=start)
    return tag, data[start : start + length], start + length


# ---------------------------------------------------------------------------
# bit packing
# ---------------------------------------------------------------------------


class _BitWriter:
    def __init__(self):
        self._acc = 0
        self._nbits = 0

    def put(self, value: int, nbits: int):
        if value < 0 or value >> nbits:
            raise ProtocolViolation("bit field value exceeds its declared width")
        self._acc = (self._acc << nbits) | value
        self._nbits += nbits

    def put_bytes(self, data: bytes):
        self.put(int.from_bytes(data, "big"), 8 * len(data))

    @property
    def bit_length(self) -> int:
        return self._nbits

    def to_bytes(self) -> bytes:
        pad = (-self._nbits) % 8
        total = self._nbits + pad
        return (self._acc << pad).to_bytes(total // 8, "big")


class _BitReader:
    def __init__(self, data: bytes):
        self._value = int.from_bytes(data, "big")
        self._remaining = 8 * len(data)

    def take(self, nbits: int) -> int:
        if nbits > self._remaining:
            raise DecodeError("bit field extends past the payload end")
        self._remaining -= nbits
        out = self._value >> self._remaining
        self._value &= (1 << self._remaining) - 1
        return out

    def take_bytes(self, nbytes: int) -> bytes:
        return self.take(8 * nbytes).to_bytes(nbytes, "big")

    def finish(self):
        if self._remaining >= 8:
            raise DecodeError(f"{self._remaining} trailing bits after payload")
        if self._value:
            raise DecodeError("nonzero padding bits at payload end")


# ---------------------------------------------------------------------------
# payload codecs
# ---------------------------------------------------------------------------


def encode_commitment(cm: Commitment) -> bytes:
    return cm.root + cm.length.to_bytes(4, "big")


def decode_commitment(payload: bytes) -> Commitment:
    if len(payload) != DIGEST_BYTES + 4:
        raise DecodeError(f"commitment payload must be {DIGEST_BYTES + 4} bytes")
    return Commitment(root=payload[:DIGEST_BYTES], length=int.from_bytes(payload[DIGEST_BYTES:], "big"))


def encode_challenge(bits: Bits) -> bytes:
    return bits.to_bytes()


def decode_challenge(payload: bytes, nbits: int) -> Bits:
    return Bits.from_bytes(payload, nbits)


def final_response_bits(params: ArgParams, response) -> int:
    """Semantic bit length of the batched response payload."""
    spec = params.iop_spec
    total = 0
    for i, opening in enumerate(response):
        width = position_bits(spec.proof_lengths[i])
        total += len(opening.positions) * (width + spec.symbol_bits)
        total += 8 * DIGEST_BYTES * len(opening.proof)
    return total


def encode_final_response(params: ArgParams, response) -> bytes:
    spec = params.iop_spec
    writer = _BitWriter()
    for i, opening in enumerate(response):
        width = position_bits(spec.proof_lengths[i])
        for q in opening.positions:
            writer.put(q - 1, width)
        for a in opening.answers:
            writer.put(a, spec.symbol_bits)
        for digest in opening.proof:
            writer.put_bytes(digest)
    return writer.to_bytes()


def decode_final_response(
    params: ArgParams, committed_lengths, payload: bytes
) -> tuple[Opening, ...]:
    spec = params.iop_spec
    reader = _BitReader(payload)
    openings = []
    for i in range(spec.rounds):
        width = position_bits(spec.proof_lengths[i])
        q = spec.query_counts[i]
        positions = tuple(reader.take(width) + 1 for _ in range(q))
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise DecodeError(f"round {i + 1} positions not strictly increasing")
        if positions[-1] > spec.proof_lengths[i]:
            raise DecodeError(f"round {i + 1} position outside the proof string")
        answers = tuple(reader.take(spec.symbol_bits) for _ in range(q))
        count = proof_digest_count(params.vc, committed_lengths[i], positions)
        proof = tuple(reader.take_bytes(DIGEST_BYTES) for _ in range(count))
        openings.append(Opening(positions=positions, answers=answers, proof=proof))
    reader.finish()
    return tuple(openings)


def encode_opening(opening: Opening, symbol_bytes: int = 8) -> bytes:
    """Self-contained opening layout: 4-byte query and digest counts, then
    positions as 4-byte big-endian, fixed-width big-endian symbols, and raw
    32-byte digests. With an empty proof the payload is just the count
    fields, the query set, and the answers."""
    parts = [
        len(opening.positions).to_bytes(4, "big"),
        len(opening.proof).to_bytes(4, "big"),
    ]
    parts += [q.to_bytes(4, "big") for q in opening.positions]
    parts += [a.to_bytes(symbol_bytes, "big") for a in opening.answers]
    parts += list(opening.proof)
    return b"".join(parts)


def decode_opening(payload: bytes, symbol_bytes: int = 8) -> Opening:
    if len(payload) < 8:
        raise DecodeError("truncated opening payload")
    q = int.from_bytes(payload[0:4], "big")
    pf = int.from_bytes(payload[4:8], "big")
    want = 8 + q * (4 + symbol_bytes) + pf * DIGEST_BYTES
    if len(payload) != want:
        raise DecodeError(
            f"opening payload must be {want} bytes, got {len(payload)}", offset=8
        )
    offset = 8
    positions = tuple(
        int.from_bytes(payload[offset + 4 * i : offset + 4 * (i + 1)], "big")
        for i in range(q)
    )
    offset += 4 * q
    answers = tuple(
        int.from_bytes(payload[offset + symbol_bytes * i : offset + symbol_bytes * (i + 1)], "big")
        for i in range(q)
    )
    offset += symbol_bytes * q
    proof = tuple(
        payload[offset + DIGEST_BYTES * i : offset + DIGEST_BYTES * (i + 1)]
        for i in range(pf)
    )
    return Opening(positions=positions, answers=answers, proof=proof)


_GC_KIND = 0x01
_SC_KIND = 0x02


def encode_instance(instance) -> bytes:
    if isinstance(instance, GraphColoringInstance):
        body = [instance.vertex_count.to_bytes(4, "big"), len(instance.edges).to_bytes(4, "big")]
        body += [u.to_bytes(4, "big") + v.to_bytes(4, "big") for u, v in instance.edges]
        return bytes([_GC_KIND]) + b"".join(body)
    if isinstance(instance, SumcheckInstance):
        body = [
            instance.prime.to_bytes(8, "big"),
            instance.variables.to_bytes(2, "big"),
            instance.degree.to_bytes(2, "big"),
            instance.claimed_sum.to_bytes(8, "big"),
        ]
        body += [c.to_bytes(8, "big") for c in instance.coefficients]
        return bytes([_SC_KIND]) + b"".join(body)
    raise ProtocolViolation(f"cannot encode instance of type {type(instance)!r}")


def decode_instance(payload: bytes):
    if not payload:
        raise DecodeError("empty instance payload")
    kind, body = payload[0], payload[1:]
    if kind == _GC_KIND:
        if len(body) < 8:
            raise DecodeError("truncated graph instance")
        n = int.from_bytes(body[0:4], "big")
        m = int.from_bytes(body[4:8], "big")
        if len(body) != 8 + 8 * m:
            raise DecodeError("graph instance length mismatch", offset=len(body))
        edges = tuple(
            (
                int.from_bytes(body[8 + 8 * j : 12 + 8 * j], "big"),
                int.from_bytes(body[12 + 8 * j : 16 + 8 * j], "big"),
            )
            for j in range(m)
        )
        return GraphColoringInstance(n, edges)
    if kind == _SC_KIND:
        if len(body) < 20:
            raise DecodeError("truncated sumcheck instance")
        p = int.from_bytes(body[0:8], "big")
        n = int.from_bytes(body[8:10], "big")
        d = int.from_bytes(body[10:12], "big")
        s = int.from_bytes(body[12:20], "big")
        count = (d + 1) ** n
        if len(body) != 20 + 8 * count:
            raise DecodeError("sumcheck instance length mismatch", offset=len(body))
        coeffs = tuple(
            int.from_bytes(body[20 + 8 * j : 28 + 8 * j], "big") for j in range(count)
        )
        return SumcheckInstance(p, n, d, coeffs, s)
    raise DecodeError(f"unknown instance kind {kind:#x}")


def protocol_for_instance(instance) -> IopProtocol:
    if isinstance(instance, GraphColoringInstance):
        return gc_pcp(instance)
    if isinstance(instance, SumcheckInstance):
        return sumcheck_iop(instance)
    raise ProtocolViolation(f"no protocol registered for {type(instance)!r}")


def encode_params(params: ArgParams) -> bytes:
    blob = params.vc.to_bytes()
    return params.instance_bound.to_bytes(4, "big") + len(blob).to_bytes(2, "big") + blob


def decode_params_fields(payload: bytes) -> tuple[int, VcParams]:
    if len(payload) < 6:
        raise DecodeError("truncated parameter payload")
    bound = int.from_bytes(payload[0:4], "big")
    blob_len = int.from_bytes(payload[4:6], "big")
    if len(payload) != 6 + blob_len:
        raise DecodeError("parameter payload length mismatch", offset=len(payload))
    return bound, params_from_bytes(payload[6:])


# ---------------------------------------------------------------------------
# channels
# ---------------------------------------------------------------------------


class MemoryChannel:
    """One endpoint of an in-process duplex byte stream."""

    def __init__(self, inbox: "queue.Queue[bytes]", outbox: "queue.Queue[bytes]"):
        self._inbox = inbox
        self._outbox = outbox
        self._buffer = b""

    def send_bytes(self, data: bytes):
        self._outbox.put(data)

    def recv_exact(self, n: int) -> bytes:
        while len(self._buffer) < n:
            try:
                self._buffer += self._inbox.get(timeout=30)
            except queue.Empty as exc:
                raise TransportError("peer sent nothing for 30 s") from exc
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def close(self):
        pass


def memory_channel_pair() -> tuple[MemoryChannel, MemoryChannel]:
    a_to_b: queue.Queue[bytes] = queue.Queue()
    b_to_a: queue.Queue[bytes] = queue.Queue()
    return MemoryChannel(b_to_a, a_to_b), MemoryChannel(a_to_b, b_to_a)


class TcpChannel:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._sock.settimeout(30.0)

    def send_bytes(self, data: bytes):
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_exact(self, n: int) -> bytes:
        chunks = []
        got = 0
        while got < n:
            try:
                chunk = self._sock.recv(n - got)
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                raise TransportError("connection closed mid-frame")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass


def tcp_listen(host: str, port: int) -> socket.socket:
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(1)
    return listener


def tcp_accept(listener: socket.socket) -> TcpChannel:
    listener.settimeout(30.0)
    try:
        conn, _ = listener.accept()
    except OSError as exc:
        raise TransportError(f"accept failed: {exc}") from exc
    return TcpChannel(conn)


def tcp_connect(host: str, port: int) -> TcpChannel:
    try:
        return TcpChannel(socket.create_connection((host, port), timeout=30.0))
    except OSError as exc:
        raise TransportError(f"connect to {host}:{port} failed: {exc}") from exc


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------


@dataclass
class SessionCounters:
    """Exact wire accounting for one session, split by direction.

    `*_protocol_bits` count the semantic content of the 2k+1 protocol
    messages (the quantities the communication formula charges); frame
    headers, byte-alignment padding, and the decision echo are overhead.
    """

    sent_frames: int = 0
    recv_frames: int = 0
    sent_protocol_bits: int = 0
    recv_protocol_bits: int = 0
    sent_payload_bytes: int = 0
    recv_payload_bytes: int = 0
    overhead_bytes: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SessionResult:
    decision: int
    transcript: Transcript
    counters: SessionCounters
    frame_bytes: bytes


class _FrameLink:
    """Orders frames over a channel and keeps the running byte tallies."""

    def __init__(self, channel, counters: SessionCounters):
        self.channel = channel
        self.counters = counters
        self.log = bytearray()

    def send(self, tag: int, payload: bytes, protocol_bits: int | None):
        frame = encode_frame(tag, payload)
        self.channel.send_bytes(frame)
        self.log += frame
        self.counters.sent_frames += 1
        if protocol_bits is None:
            self.counters.overhead_bytes += len(frame)
        else:
            self.counters.sent_protocol_bits += protocol_bits
            self.counters.sent_payload_bytes += len(payload)
            self.counters.overhead_bytes += FRAME_HEADER_BYTES

    def recv(self, expected_tag: int, is_protocol: bool = False) -> bytes:
        header = self.channel.recv_exact(FRAME_HEADER_BYTES)
        length = int.from_bytes(header[:4], "big")
        tag = header[4]
        payload = self.channel.recv_exact(length) if length else b""
        self.log += header + payload
        self.counters.recv_frames += 1
        if tag != expected_tag:
            raise ProtocolViolation(
                f"expected frame tag {expected_tag:#x}, received {tag:#x}"
            )
        if is_protocol:
            self.counters.recv_payload_bytes += len(payload)
            self.counters.overhead_bytes += FRAME_HEADER_BYTES
        else:
            self.counters.overhead_bytes += len(header) + len(payload)
        return payload


def run_session(
    role: str,
    channel,
    params: ArgParams,
    protocol: IopProtocol,
    *,
    prover=None,
    prng: Prng | None = None,
) -> SessionResult:
    """Drive one argument session end to end over `channel`.

    The prover role needs a session prover (honest or scripted); the
    verifier role needs the challenge stream. Both ends return the
    decision, their transcript view, and exact wire counters. Any
    unexpected frame aborts with ProtocolViolation before a decision is
    reached: a reordered or malformed session can never accept.
    """
    spec = protocol.spec
    counters = SessionCounters()
    link = _FrameLink(channel, counters)
    k = spec.rounds

    if role == "prover":
        if prover is None:
            raise ProtocolViolation("prover role requires a session prover")
        state = prover.start()
        commitments = []
        challenges: list[Bits] = []
        prev: Bits | None = None
        for i in range(1, k + 1):
            cm, state = prover.next_commitment(state, prev)
            commitments.append(cm)
            link.send(TAG_COMMIT, encode_commitment(cm), COMMITMENT_WIRE_BITS)
            nbits = spec.randomness_bits[i - 1]
            payload = link.recv(TAG_CHALLENGE, is_protocol=True)
            r_i = decode_challenge(payload, nbits)
            counters.recv_protocol_bits += nbits
            challenges.append(r_i)
            prev = r_i
        response = prover.final_response(state, challenges[-1])
        if response is None:
            raise ProtocolViolation("prover aborted instead of opening")
        link.send(
            TAG_FINAL,
            encode_final_response(params, response),
            final_response_bits(params, response),
        )
        decision_payload = link.recv(TAG_DECISION)
        decision = int(decision_payload[0]) if decision_payload else 0
    elif role == "verifier":
        if prng is None:
            raise ProtocolViolation("verifier role requires a challenge stream")
        commitments = []
        challenges = []
        for i in range(1, k + 1):
            payload = link.recv(TAG_COMMIT, is_protocol=True)
            commitments.append(decode_commitment(payload))
            counters.recv_protocol_bits += COMMITMENT_WIRE_BITS
            # Public coin: the challenge is read straight off the stream,
            # before anything of the commitment is interpreted.
            r_i = prng.take_bits(spec.randomness_bits[i - 1])
            challenges.append(r_i)
            link.send(TAG_CHALLENGE, encode_challenge(r_i), r_i.nbits)
        payload = link.recv(TAG_FINAL, is_protocol=True)
        try:
            response = decode_final_response(
                params, [cm.length for cm in commitments], payload
            )
        except DecodeError as exc:
            raise ProtocolViolation(f"undecodable final response: {exc}") from exc
        counters.recv_protocol_bits += final_response_bits(params, response)
        transcript = Transcript(
            instance=protocol.instance,
            commitments=tuple(commitments),
            challenges=tuple(challenges),
            response=response,
        )
        decision = arg_verify(params, protocol, transcript)
        link.send(TAG_DECISION, bytes([decision]), None)
        return SessionResult(decision, transcript, counters, bytes(link.log))
    else:
        raise ProtocolViolation(f"unknown session role {role!r}")

    transcript = Transcript(
        instance=protocol.instance,
        commitments=tuple(commitments),
        challenges=tuple(challenges),
        response=tuple(response),
    )
    return SessionResult(decision, transcript, counters, bytes(link.log))


# ---------------------------------------------------------------------------
# setup handshake and transcript files
# ---------------------------------------------------------------------------


def send_public_setup(channel, params: ArgParams, instance):
    for tag, payload in (
        (TAG_PARAMS, encode_params(params)),
        (TAG_INSTANCE, encode_instance(instance)),
    ):
        channel.send_bytes(encode_frame(tag, payload))


def recv_public_setup(channel) -> tuple[int, VcParams, Any]:
    fields = {}
    for expected in (TAG_PARAMS, TAG_INSTANCE):
        header = channel.recv_exact(FRAME_HEADER_BYTES)
        length = int.from_bytes(header[:4], "big")
        tag = header[4]
        payload = channel.recv_exact(length) if length else b""
        if tag != expected:
            raise ProtocolViolation(f"setup expected tag {expected:#x}, got {tag:#x}")
        fields[tag] = payload
    bound, vc_params = decode_params_fields(fields[TAG_PARAMS])
    instance = decode_instance(fields[TAG_INSTANCE])
    return bound, vc_params, instance


def protocol_frames(params: ArgParams, transcript: Transcript) -> bytes:
    """The 2k+1 protocol frames of a transcript, in the mandated order."""
    out = bytearray()
    for cm, r in zip(transcript.commitments, transcript.challenges):
        out += encode_frame(TAG_COMMIT, encode_commitment(cm))
        out += encode_frame(TAG_CHALLENGE, encode_challenge(r))
    out += encode_frame(TAG_FINAL, encode_final_response(params, transcript.response))
    return bytes(out)


def serialize_transcript(params: ArgParams, transcript: Transcript) -> bytes:
    return (
        TRANSCRIPT_MAGIC
        + encode_frame(TAG_PARAMS, encode_params(params))
        + encode_frame(TAG_INSTANCE, encode_instance(transcript.instance))
        + protocol_frames(params, transcript)
    )


def parse_transcript(data: bytes) -> tuple[ArgParams, IopProtocol, Transcript]:
    if not data.startswith(TRANSCRIPT_MAGIC):
        raise DecodeError("not a transcript file (bad magic)", offset=0)
    offset = len(TRANSCRIPT_MAGIC)
    tag, payload, offset = decode_frame(data, offset)
    if tag != TAG_PARAMS:
        raise DecodeError("transcript must start with a parameter frame")
    bound, vc_params = decode_params_fields(payload)
    tag, payload, offset = decode_frame(data, offset)
    if tag != TAG_INSTANCE:
        raise DecodeError("transcript must carry the instance after parameters")
    instance = decode_instance(payload)
    protocol = protocol_for_instance(instance)
    params = ArgParams(vc=vc_params, instance_bound=bound, iop_spec=protocol.spec)

    spec = protocol.spec
    commitments = []
    challenges = []
    for i in range(spec.rounds):
        tag, payload, offset = decode_frame(data, offset)
        if tag != TAG_COMMIT:
            raise DecodeError(f"expected commitment frame for round {i + 1}")
        commitments.append(decode_commitment(payload))
        tag, payload, offset = decode_frame(data, offset)
        if tag != TAG_CHALLENGE:
            raise DecodeError(f"expected challenge frame for round {i + 1}")
        challenges.append(decode_challenge(payload, spec.randomness_bits[i]))
    tag, payload, offset = decode_frame(data, offset)
    if tag != TAG_FINAL:
        raise DecodeError("expected the batched final response frame")
    response = decode_final_response(params, [cm.length for cm in commitments], payload)
    if offset != len(data):
        raise DecodeError("trailing bytes after transcript", offset=offset)
    transcript = Transcript(
        instance=instance,
        commitments=tuple(commitments),
        challenges=tuple(challenges),
        response=response,
    )
    return params, protocol, transcript
