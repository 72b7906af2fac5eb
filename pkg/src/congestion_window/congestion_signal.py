"""Block-level congestion predicates and manipulation-cost bounds.

A block's fee profile is the step function obtained by sorting its
transactions by descending fee density and accumulating their weight.  All
threshold functions and both cost bounds are evaluated exactly on that step
function (no quadrature).  Weights are handled in capacity units; fractions
are only formed at the comparison boundary.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

from .chain_model import Block, ChainView, CongestionVector
from .errors import ContractError, DataError, ParameterError

INF = math.inf  # fee_threshold(block, 0): every density qualifies


@dataclass(frozen=True, slots=True)
class SignalParams:
    """``(theta, gamma)``: density floor and capacity fraction."""

    theta: float
    gamma: float

    def __post_init__(self):
        if not self.theta >= 0:
            raise ParameterError(f"theta must be >= 0, got {self.theta}")
        if not 0 <= self.gamma <= 1:
            raise ParameterError(f"gamma must be in [0, 1], got {self.gamma}")


# --------------------------------------------------------------------------
# Alternative (manipulable) signals


@dataclass(frozen=True, slots=True)
class LowestFeeDensity:
    theta: float


@dataclass(frozen=True, slots=True)
class HighestFeeDensity:
    theta: float


@dataclass(frozen=True, slots=True)
class NonzeroOccupancy:
    gamma: float


@dataclass(frozen=True, slots=True)
class FeeNotDensity:
    fee: float
    gamma: float


@dataclass(frozen=True, slots=True)
class BaseFee:
    max_base_fee: float


AltSignalKind = Union[LowestFeeDensity, HighestFeeDensity, NonzeroOccupancy, FeeNotDensity, BaseFee]
Signal = Union[SignalParams, LowestFeeDensity, HighestFeeDensity, NonzeroOccupancy,
               FeeNotDensity, BaseFee, None]


def _validate_alt(kind: AltSignalKind) -> None:
    for name in ("theta", "fee", "max_base_fee"):
        value = getattr(kind, name, 0.0)
        if not value >= 0:
            raise ParameterError(f"{name} must be non-negative, got {value}")
    gamma = getattr(kind, "gamma", 0.0)
    if not 0 <= gamma <= 1:
        raise ParameterError(f"gamma must be in [0, 1], got {gamma}")


# --------------------------------------------------------------------------
# Fee profile


@dataclass(frozen=True, slots=True)
class _Profile:
    # ascending densities and, per density, the weight of txs at or above it
    densities: tuple[float, ...]
    weight_at_or_above: tuple[float, ...]
    capacity: float


@lru_cache(maxsize=4096)
def _profile(block: Block) -> _Profile:
    by_density: dict[float, list[float]] = {}
    for tx in block.txs:
        by_density.setdefault(tx.fee_density, []).append(tx.size)
    desc = sorted(by_density, reverse=True)
    weights, running = [], []
    for d in desc:
        running.extend(by_density[d])
        weights.append(math.fsum(running))
    # the lowest segment covers the whole (full) block
    weights[-1] = block.capacity
    return _Profile(tuple(reversed(desc)), tuple(reversed(weights)), block.capacity)


def weight_above(block: Block, theta: float) -> float:
    """Total size of transactions whose fee density is at least ``theta``."""
    prof = _profile(block)
    i = bisect.bisect_left(prof.densities, theta)
    return prof.weight_at_or_above[i] if i < len(prof.densities) else 0.0


def weight_threshold(block: Block, theta: float) -> float:
    """Largest gamma for which the block is (theta, gamma)-congested."""
    return weight_above(block, theta) / block.capacity


def is_congested(block: Block, params: SignalParams) -> bool:
    return params.gamma <= weight_threshold(block, params.theta)


def fee_threshold(block: Block, gamma: float) -> float:
    """Largest theta for which the block is (theta, gamma)-congested.

    Returns :data:`INF` for ``gamma == 0``.
    """
    if not 0 <= gamma <= 1:
        raise ParameterError(f"gamma must be in [0, 1], got {gamma}")
    if gamma == 0:
        return INF
    prof = _profile(block)
    # weights decrease with density: scan from the top density down
    for d, w in zip(reversed(prof.densities), reversed(prof.weight_at_or_above)):
        if gamma <= w / prof.capacity:
            return d
    return prof.densities[0]


def _integrate(prof: _Profile, lo: float, hi: float, offset: float = 0.0) -> float:
    """Integral of ``(density_at(w) - offset)`` over weight ``w`` in ``[lo, hi]``.

    ``density_at(w)`` is the fee density of the w-th weight unit when the
    block is read from its highest density downwards.
    """
    if hi <= lo:
        return 0.0
    terms = []
    upper_prev = 0.0
    for d, upper in zip(reversed(prof.densities), reversed(prof.weight_at_or_above)):
        a, b = max(lo, upper_prev), min(hi, upper)
        if b > a:
            terms.append((d - offset) * (b - a))
        upper_prev = upper
    return math.fsum(terms)


def cost_to_congest(block: Block, params: SignalParams) -> float:
    """Lower bound on fees forgone to make an uncongested block congested.

    The miner must displace at least ``gamma*capacity - W_theta`` weight; the
    cheapest weight to displace is the lowest-density tail of the block.
    """
    if is_congested(block, params):
        raise ContractError("block is already congested under these parameters")
    prof = _profile(block)
    deficit = params.gamma * block.capacity - weight_above(block, params.theta)
    return _integrate(prof, block.capacity - deficit, block.capacity)


def cost_to_uncongest(block: Block, params: SignalParams) -> float:
    """Lower bound on fees forgone to make a congested block look uncongested.

    Transactions at density >= theta beyond the ``gamma`` mark are swapped for
    substitutes just below theta; each weight unit costs its density minus theta.
    """
    if not is_congested(block, params):
        raise ContractError("block is not congested under these parameters")
    prof = _profile(block)
    return _integrate(prof, params.gamma * block.capacity, weight_above(block, params.theta),
                      offset=params.theta)


def alt_is_congested(block: Block | None, kind: AltSignalKind, *, base_fee: float | None = None) -> bool:
    """Evaluate one of the alternative block signals.

    Density extremes ignore synthetic padding unless the block holds nothing else.
    """
    _validate_alt(kind)
    if isinstance(kind, BaseFee):
        fee = base_fee if base_fee is not None else getattr(block, "base_fee", None)
        if fee is None:
            raise DataError("base-fee signal needs a base fee")
        return fee > kind.max_base_fee
    if block is None:
        raise DataError(f"{type(kind).__name__} signal needs block contents")
    if isinstance(kind, (LowestFeeDensity, HighestFeeDensity)):
        txs = block.real_txs or block.txs
        densities = [tx.fee_density for tx in txs]
        extreme = min(densities) if isinstance(kind, LowestFeeDensity) else max(densities)
        return extreme >= kind.theta
    if isinstance(kind, NonzeroOccupancy):
        filled = math.fsum(tx.size for tx in block.txs if tx.fee_density > 0)
        return filled / block.capacity >= kind.gamma
    if isinstance(kind, FeeNotDensity):
        filled = math.fsum(tx.size for tx in block.txs if tx.fee >= kind.fee)
        return filled / block.capacity >= kind.gamma
    raise ParameterError(f"unknown signal kind {kind!r}")


def block_signal(chain: ChainView, height: int, signal: Signal) -> int:
    """Congestion bit of ``height`` under ``signal`` (``None`` = precomputed)."""
    if signal is None:
        return chain.signal(height)
    if isinstance(signal, SignalParams):
        return int(is_congested(chain.block(height), signal))
    if isinstance(signal, BaseFee):
        return int(alt_is_congested(None, signal, base_fee=chain.base_fee(height)))
    return int(alt_is_congested(chain.block(height), signal))


def congestion_bits(chain: ChainView, signal: Signal, start: int, stop: int) -> CongestionVector:
    """Signals for heights ``start..stop`` inclusive, memoized per chain."""
    cache = chain._signal_cache.setdefault(signal, {})
    bits = []
    for h in range(start, stop + 1):
        if h not in cache:
            cache[h] = block_signal(chain, h, signal)
        bits.append(cache[h])
    return CongestionVector(bits)
