"""Merkle-tree vector commitment with batched, deduplicated multi-openings.

The scheme commits to a sequence of alphabet symbols and later opens any
set of positions with a single proof. Hash inputs are domain separated:

    data leaf j   : H(tag || 0x00 || BE64(j) || symbol block)
    internal node : H(tag || 0x01 || left || right)
    padding leaf j: H(tag || 0x02 || BE64(j) || zero block)

Positions are 1-based. The tree width is the least power of two at or
above the capacity; leaves past the committed length hash a reserved
all-zero block so the tree shape is independent of the message length.
Padding leaves are recomputable by the verifier, so they never appear in
proofs, and a padding position opens to the reserved symbol 0.

Multi-proofs list the sibling digests that cannot be derived from the
opened leaves (or from padding), in bottom-up, left-to-right order with
duplicates removed. The proof length is therefore forced: verification
fails on any extra or missing digest.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

from .errors import DecodeError, MessageError, ParameterError, QueryError

DIGEST_BYTES = 32
DEFAULT_DOMAIN_TAG = b"ibcslab/vc/1"

_LEAF_MARK = b"\x00"
_NODE_MARK = b"\x01"
_PAD_MARK = b"\x02"

_SUPPORTED_SECURITY = (128, 256)
_SUPPORTED_HASHES = ("sha256",)


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class VcParams:
    security_bits: int
    capacity: int
    symbol_bits: int
    hash_name: str = "sha256"
    domain_tag: bytes = DEFAULT_DOMAIN_TAG

    def __post_init__(self):
        if self.security_bits not in _SUPPORTED_SECURITY:
            raise ParameterError(f"security level must be one of {_SUPPORTED_SECURITY}")
        if self.capacity < 1:
            raise ParameterError("capacity must be at least 1")
        if self.symbol_bits < 1:
            raise ParameterError("symbol width must be at least 1 bit")
        if self.hash_name not in _SUPPORTED_HASHES:
            raise ParameterError(f"unknown hash identifier {self.hash_name!r}")
        if not self.domain_tag or len(self.domain_tag) > 255:
            raise ParameterError("domain tag must be 1..255 bytes")

    @property
    def width(self) -> int:
        return _next_pow2(self.capacity)

    @property
    def symbol_bytes(self) -> int:
        return (self.symbol_bits + 7) // 8

    @property
    def levels(self) -> int:
        """Number of tree layers above the leaves."""
        return (self.width - 1).bit_length()

    def to_bytes(self) -> bytes:
        """Canonical serialization; `params_from_bytes` inverts it."""
        return b"".join(
            [
                self.security_bits.to_bytes(2, "big"),
                self.capacity.to_bytes(8, "big"),
                self.symbol_bits.to_bytes(2, "big"),
                len(self.hash_name).to_bytes(1, "big"),
                self.hash_name.encode("ascii"),
                len(self.domain_tag).to_bytes(1, "big"),
                self.domain_tag,
            ]
        )


def params_from_bytes(data: bytes) -> VcParams:
    try:
        sec = int.from_bytes(data[0:2], "big")
        cap = int.from_bytes(data[2:10], "big")
        sym = int.from_bytes(data[10:12], "big")
        off = 12
        hlen = data[off]
        name = data[off + 1 : off + 1 + hlen].decode("ascii")
        off += 1 + hlen
        tlen = data[off]
        tag = data[off + 1 : off + 1 + tlen]
        off += 1 + tlen
    except (IndexError, UnicodeDecodeError) as exc:
        raise DecodeError(f"truncated parameter encoding: {exc}") from exc
    if off != len(data):
        raise DecodeError("trailing bytes after parameter encoding", offset=off)
    return VcParams(sec, cap, sym, name, tag)


@dataclass(frozen=True)
class Commitment:
    root: bytes
    length: int

    def __post_init__(self):
        if len(self.root) != DIGEST_BYTES:
            raise ParameterError("root digest must be 32 bytes")
        if self.length < 0:
            raise ParameterError("negative committed length")


@dataclass(frozen=True)
class CommitAux:
    layers: tuple[tuple[bytes, ...], ...]
    message: tuple[int, ...]


@dataclass(frozen=True)
class Opening:
    positions: tuple[int, ...]
    answers: tuple[int, ...]
    proof: tuple[bytes, ...]

    def __post_init__(self):
        if len(self.positions) != len(self.answers):
            raise ParameterError("one answer required per opened position")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ParameterError("positions must be strictly increasing")


def vc_gen(
    security_bits: int,
    capacity: int,
    symbol_bits: int = 8,
    domain_tag: bytes = DEFAULT_DOMAIN_TAG,
) -> VcParams:
    """Deterministic parameter generation for the given capacity."""
    return VcParams(security_bits, capacity, symbol_bits, "sha256", domain_tag)


def _leaf_digest(params: VcParams, position: int, symbol: int) -> bytes:
    block = symbol.to_bytes(params.symbol_bytes, "big")
    return hashlib.sha256(
        params.domain_tag + _LEAF_MARK + position.to_bytes(8, "big") + block
    ).digest()


def _pad_digest(params: VcParams, position: int) -> bytes:
    return hashlib.sha256(
        params.domain_tag + _PAD_MARK + position.to_bytes(8, "big") + bytes(params.symbol_bytes)
    ).digest()


def _node_digest(params: VcParams, left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(params.domain_tag + _NODE_MARK + left + right).digest()


def vc_commit(params: VcParams, message: Sequence[int]) -> tuple[Commitment, CommitAux]:
    if len(message) > params.capacity:
        raise MessageError(
            f"message length {len(message)} exceeds capacity {params.capacity}"
        )
    if len(message) < 1:
        raise MessageError("cannot commit to an empty message")
    bound = 1 << params.symbol_bits
    for j, symbol in enumerate(message, start=1):
        if not 0 <= symbol < bound:
            raise MessageError(f"symbol at position {j} outside alphabet range")

    leaves = [_leaf_digest(params, j, s) for j, s in enumerate(message, start=1)]
    leaves += [_pad_digest(params, j) for j in range(len(message) + 1, params.width + 1)]
    layers = [tuple(leaves)]
    while len(layers[-1]) > 1:
        prev = layers[-1]
        layers.append(
            tuple(
                _node_digest(params, prev[2 * i], prev[2 * i + 1])
                for i in range(len(prev) // 2)
            )
        )
    aux = CommitAux(layers=tuple(layers), message=tuple(message))
    return Commitment(root=layers[-1][0], length=len(message)), aux


def _canonical_positions(params: VcParams, positions: Sequence[int]) -> tuple[int, ...]:
    pos = tuple(positions)
    if not pos:
        raise QueryError("query set must be nonempty")
    if len(set(pos)) != len(pos):
        raise QueryError("query set contains duplicate positions")
    for q in pos:
        if not 1 <= q <= params.capacity:
            raise QueryError(f"position {q} outside [1, {params.capacity}]")
    return tuple(sorted(pos))


def _known_leaf_indices(params: VcParams, length: int, positions: Sequence[int]) -> set[int]:
    # 0-based leaf indices the verifier can reconstruct unaided: the opened
    # positions plus every padding leaf (message-independent).
    return {q - 1 for q in positions} | set(range(length, params.width))


def _proof_slots(params: VcParams, known: set[int]) -> list[tuple[int, int]]:
    """(level, index) of each supplied sibling, bottom-up and left-to-right."""
    slots: list[tuple[int, int]] = []
    frontier = known
    for level in range(params.levels):
        parents = {i // 2 for i in frontier}
        for parent in sorted(parents):
            for child in (2 * parent, 2 * parent + 1):
                if child not in frontier:
                    slots.append((level, child))
        frontier = parents
    return slots


def proof_digest_count(params: VcParams, length: int, positions: Sequence[int]) -> int:
    """Canonical multi-proof length for a query set; used by codecs and accounting."""
    known = _known_leaf_indices(params, length, positions)
    return len(_proof_slots(params, known))


def vc_open(params: VcParams, aux: CommitAux, positions: Sequence[int]) -> Opening:
    pos = _canonical_positions(params, positions)
    length = len(aux.message)
    answers = tuple(aux.message[q - 1] if q <= length else 0 for q in pos)
    known = _known_leaf_indices(params, length, pos)
    proof = tuple(aux.layers[level][index] for level, index in _proof_slots(params, known))
    return Opening(positions=pos, answers=answers, proof=proof)


def vc_check(
    params: VcParams,
    cm: Commitment,
    positions: Sequence[int],
    answers: Sequence[int],
    proof: Sequence[bytes],
) -> int:
    """1 iff (positions, answers, proof) reconstructs exactly cm's root.

    Malformed inputs yield 0 rather than raising: a bad proof is a
    verification failure, not a fault.
    """
    pos = tuple(positions)
    ans = tuple(answers)
    pf = tuple(proof)
    if not pos or len(pos) != len(ans):
        return 0
    if len(set(pos)) != len(pos) or list(pos) != sorted(pos):
        return 0
    if not 1 <= cm.length <= params.capacity:
        return 0
    bound = 1 << params.symbol_bits
    values: dict[int, bytes] = {}
    for q, a in zip(pos, ans):
        if not 1 <= q <= params.capacity or not 0 <= a < bound:
            return 0
        if q > cm.length:
            # Padding position: only the reserved symbol is openable.
            if a != 0:
                return 0
            values[q - 1] = _pad_digest(params, q)
        else:
            values[q - 1] = _leaf_digest(params, q, a)
    for j in range(cm.length, params.width):
        values.setdefault(j, _pad_digest(params, j + 1))

    known = _known_leaf_indices(params, cm.length, pos)
    slots = _proof_slots(params, known)
    if len(pf) != len(slots):
        return 0
    if any(len(d) != DIGEST_BYTES for d in pf):
        return 0

    supplied: dict[tuple[int, int], bytes] = {
        slot: digest for slot, digest in zip(slots, pf)
    }
    level_values = values
    frontier = known
    for level in range(params.levels):
        parents = sorted({i // 2 for i in frontier})
        next_values: dict[int, bytes] = {}
        for parent in parents:
            children = []
            for child in (2 * parent, 2 * parent + 1):
                if child in frontier:
                    children.append(level_values[child])
                else:
                    children.append(supplied[(level, child)])
            next_values[parent] = _node_digest(params, children[0], children[1])
        level_values = next_values
        frontier = set(parents)
    return 1 if level_values.get(0) == cm.root else 0
