"""Blocks, periods, synthetic p-congested chains and JSON-Lines ingestion.

Randomness
----------
Every random draw comes from a Philox4x64 counter-based generator. The key is
derived from ``(seed, purpose, stream)`` through :class:`numpy.random.SeedSequence`
and the counter from the trial index, so trial ``i`` of a run sees the same
numbers whether it is generated alone, in a batch, or on another worker.
``purpose`` separates congestion draws from adversary-control draws so equal
seeds never produce correlated vectors.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import DataError, ParameterError, ParseError, StructuralError

PURPOSE_TAGS = {"congestion": 1, "control": 2}


# --------------------------------------------------------------------------
# Random streams


def _stream_key(seed: int, purpose: str, stream: int) -> np.ndarray:
    if seed < 0:
        raise ParameterError(f"seed must be non-negative, got {seed}")
    if purpose not in PURPOSE_TAGS:
        raise ParameterError(f"unknown stream purpose {purpose!r}")
    ss = np.random.SeedSequence(seed, spawn_key=(PURPOSE_TAGS[purpose], stream))
    return ss.generate_state(2, np.uint64)


def trial_uniforms(seed: int, purpose: str, first_trial: int, count: int, n: int,
                   stream: int = 0) -> np.ndarray:
    """Uniform [0, 1) draws for trials ``first_trial .. first_trial+count-1``.

    Returns a ``(count, n)`` array; row ``j`` depends only on
    ``(seed, purpose, stream, first_trial + j)``.
    """
    blocks = (n + 3) // 4  # Philox emits four doubles per counter step
    counter = np.array([first_trial * blocks, 0, 0, 0], dtype=np.uint64)
    bitgen = np.random.Philox(key=_stream_key(seed, purpose, stream), counter=counter)
    draws = np.random.Generator(bitgen).random((count, 4 * blocks))
    return draws[:, :n]


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ParameterError(f"{name} must be in [0, 1], got {value}")


def _check_length(n: int) -> None:
    if n < 1:
        raise ParameterError(f"period length must be >= 1, got {n}")


# --------------------------------------------------------------------------
# Vectors


class _BitVector(tuple):
    """Immutable 0/1 tuple; position ``i`` (1-based) is ``vec.bit(i)``."""

    __slots__ = ()

    def __new__(cls, bits: Iterable[int] = ()):
        values = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in values):
            raise ParameterError(f"{cls.__name__} entries must be 0 or 1")
        return super().__new__(cls, values)

    def bit(self, i: int) -> int:
        if not 1 <= i <= len(self):
            raise IndexError(f"position {i} outside 1..{len(self)}")
        return self[i - 1]

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self)!r})"


class CongestionVector(_BitVector):
    """Per-block congestion signals of a period; 1 = congested."""

    __slots__ = ()

    def __new__(cls, bits: Iterable[int] = ()):
        vec = super().__new__(cls, bits)
        if len(vec) == 0:
            raise ParameterError("a congestion vector needs at least one block")
        return vec


class ControlVector(_BitVector):
    """Marks the blocks of a period mined by the adversary; 1 = adversary."""

    __slots__ = ()


def generate_congestion_vector(n: int, p: float, seed: int, *, trial: int = 0,
                               stream: int = 0) -> CongestionVector:
    """Sample a period of a p-congested chain: each bit is 1 independently w.p. ``p``."""
    _check_length(n)
    _check_probability("p", p)
    draws = trial_uniforms(seed, "congestion", trial, 1, n, stream)[0]
    return CongestionVector((draws < p).astype(np.int8))


def sample_control_vector(n: int, alpha: float, seed: int, *, trial: int = 0,
                          stream: int = 0) -> ControlVector:
    """Sample which blocks the adversary mines, each independently w.p. ``alpha``."""
    _check_length(n)
    _check_probability("alpha", alpha)
    draws = trial_uniforms(seed, "control", trial, 1, n, stream)[0]
    return ControlVector((draws < alpha).astype(np.int8))


# --------------------------------------------------------------------------
# Blocks


@dataclass(frozen=True, slots=True)
class Transaction:
    size: float
    fee_density: float
    synthetic: bool = False

    def __post_init__(self):
        if not self.size > 0:
            raise ParameterError(f"transaction size must be positive, got {self.size}")
        if not self.fee_density >= 0:
            raise ParameterError(f"fee density must be non-negative, got {self.fee_density}")

    @property
    def fee(self) -> float:
        return self.size * self.fee_density


@dataclass(frozen=True, slots=True)
class Block:
    """A full block: if the given transactions leave room, a zero-fee synthetic
    padding transaction fills the remaining capacity."""

    capacity: float
    txs: tuple[Transaction, ...] = ()
    base_fee: float | None = None

    def __post_init__(self):
        if not self.capacity > 0:
            raise ParameterError(f"block capacity must be positive, got {self.capacity}")
        txs = tuple(self.txs)
        used = math.fsum(tx.size for tx in txs)
        slack = self.capacity - used
        if slack < -1e-9 * self.capacity:
            raise ParameterError(f"transactions ({used}) exceed block capacity ({self.capacity})")
        if slack > 1e-12 * self.capacity:
            txs = txs + (Transaction(slack, 0.0, synthetic=True),)
        object.__setattr__(self, "txs", txs)

    @property
    def real_txs(self) -> tuple[Transaction, ...]:
        return tuple(tx for tx in self.txs if not tx.synthetic)

    @property
    def revenue(self) -> float:
        return math.fsum(tx.fee for tx in self.txs)


# --------------------------------------------------------------------------
# Chains


@dataclass(frozen=True)
class ChainView:
    """Consecutive heights ``h0 .. h0+len-1`` with per-height data.

    At least one of ``blocks``, ``base_fees`` or ``signals`` is present; all
    present sequences have the same length.
    """

    h0: int
    blocks: tuple[Block, ...] | None = None
    base_fees: tuple[float | None, ...] | None = None
    signals: CongestionVector | None = None
    _signal_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        lengths = {len(s) for s in (self.blocks, self.base_fees, self.signals) if s is not None}
        if not lengths:
            raise StructuralError("chain has no per-height data")
        if len(lengths) > 1:
            raise StructuralError("per-height sequences differ in length")
        if lengths.pop() == 0:
            raise StructuralError("chain needs at least one block")

    @classmethod
    def from_bits(cls, h0: int, bits: Sequence[int]) -> ChainView:
        return cls(h0, signals=CongestionVector(bits))

    @classmethod
    def from_blocks(cls, h0: int, blocks: Sequence[Block]) -> ChainView:
        blocks = tuple(blocks)
        fees = tuple(b.base_fee for b in blocks)
        return cls(h0, blocks=blocks, base_fees=fees if any(f is not None for f in fees) else None)

    @classmethod
    def from_base_fees(cls, h0: int, fees: Sequence[float]) -> ChainView:
        return cls(h0, base_fees=tuple(float(f) for f in fees))

    def __len__(self) -> int:
        for seq in (self.blocks, self.base_fees, self.signals):
            if seq is not None:
                return len(seq)
        raise AssertionError("unreachable")

    @property
    def last_height(self) -> int:
        return self.h0 + len(self) - 1

    def covers(self, height: int) -> bool:
        return self.h0 <= height <= self.last_height

    def _offset(self, height: int) -> int:
        if not self.covers(height):
            raise DataError(f"height {height} outside chain {self.h0}..{self.last_height}")
        return height - self.h0

    def block(self, height: int) -> Block:
        if self.blocks is None:
            raise DataError("chain carries no block contents")
        return self.blocks[self._offset(height)]

    def base_fee(self, height: int) -> float:
        fee = None if self.base_fees is None else self.base_fees[self._offset(height)]
        if fee is None:
            raise DataError(f"no base fee recorded at height {height}")
        return fee

    def signal(self, height: int) -> int:
        if self.signals is None:
            raise DataError("chain carries no precomputed congestion signals")
        return self.signals[self._offset(height)]


# --------------------------------------------------------------------------
# JSON-Lines ingestion

FORMATS = ("tx-list", "base-fee")

Source = Union[str, bytes, IO[str], IO[bytes], Iterable[str]]


def _lines(source: Source) -> Iterator[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    for line in source:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def _number(record: dict, key: str, lineno: int) -> float:
    value = record.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(lineno, f"field {key!r} must be a number")
    return float(value)


def _parse_record(record: object, fmt: str, lineno: int) -> tuple[int, Block | None, float | None]:
    if not isinstance(record, dict):
        raise ParseError(lineno, "expected a JSON object")
    height = record.get("height")
    if isinstance(height, bool) or not isinstance(height, int):
        raise ParseError(lineno, "field 'height' must be an integer")
    if fmt == "base-fee":
        return height, None, _number(record, "base_fee", lineno)

    capacity = _number(record, "capacity", lineno)
    raw_txs = record.get("txs")
    if not isinstance(raw_txs, list):
        raise ParseError(lineno, "field 'txs' must be a list")
    base_fee = _number(record, "base_fee", lineno) if "base_fee" in record else None
    try:
        txs = tuple(Transaction(_number(tx, "size", lineno), _number(tx, "fee_density", lineno))
                    if isinstance(tx, dict) else _bad_tx(lineno) for tx in raw_txs)
        block = Block(capacity, txs, base_fee)
    except ParameterError as exc:
        raise ParseError(lineno, str(exc)) from None
    return height, block, base_fee


def _bad_tx(lineno: int):
    raise ParseError(lineno, "transactions must be JSON objects")


def ingest_chain(source: Source, fmt: str = "tx-list") -> ChainView:
    """Parse a JSON-Lines chain; heights must ascend by exactly one."""
    if fmt not in FORMATS:
        raise ParameterError(f"unknown chain format {fmt!r}; expected one of {FORMATS}")
    h0 = None
    prev = None
    blocks: list[Block] = []
    fees: list[float | None] = []
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from None
        height, block, fee = _parse_record(record, fmt, lineno)
        if prev is not None and height != prev + 1:
            kind = "duplicate" if height == prev else "non-consecutive"
            raise StructuralError(f"line {lineno}: {kind} height {height} after {prev}")
        if h0 is None:
            h0 = height
        prev = height
        if block is not None:
            blocks.append(block)
        fees.append(fee)
    if h0 is None:
        raise StructuralError("chain file contains no records")
    if fmt == "base-fee":
        return ChainView(h0, base_fees=tuple(fees))
    return ChainView.from_blocks(h0, blocks)


def _num_out(x: float):
    return int(x) if float(x).is_integer() else x


def serialize_chain(chain: ChainView, fmt: str = "tx-list") -> str:
    """Canonical JSON-Lines form; synthetic padding is omitted."""
    if fmt not in FORMATS:
        raise ParameterError(f"unknown chain format {fmt!r}")
    out = []
    for offset in range(len(chain)):
        height = chain.h0 + offset
        if fmt == "base-fee":
            record = {"height": height, "base_fee": chain.base_fee(height)}
        else:
            block = chain.block(height)
            record = {
                "height": height,
                "capacity": _num_out(block.capacity),
                "txs": [{"size": _num_out(tx.size), "fee_density": _num_out(tx.fee_density)}
                        for tx in block.real_txs],
            }
            if block.base_fee is not None:
                record["base_fee"] = block.base_fee
        out.append(json.dumps(record, separators=(",", ":")) + "\n")
    return "".join(out)
