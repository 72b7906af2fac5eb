"""Congestion-aware response deadlines.

The challenge window ``t_c .. t_rd`` is checked with a period protocol; while
it is congested the deadline moves one block later, up to ``t_c + m_hat``.
Deadlines are inclusive: a response in block ``t_rd`` is on time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Optional

from .chain_model import ChainView
from .congestion_signal import (BaseFee, FeeNotDensity, HighestFeeDensity, LowestFeeDensity,
                                NonzeroOccupancy, Signal, SignalParams, congestion_bits)
from .errors import DataError, ParameterError
from .period_protocols import (ProtocolSpec, Status, format_spec, init_refresh, is_monotone,
                               parse_spec, refresh_evaluate)


@dataclass(frozen=True, slots=True)
class Challenge:
    t_c: int
    t_rd_init: int
    m_hat: int
    spec: ProtocolSpec

    def __post_init__(self):
        if self.m_hat < 0:
            raise ParameterError(f"m_hat must be >= 0, got {self.m_hat}")
        if not self.t_c <= self.t_rd_init <= self.t_c + self.m_hat:
            raise ParameterError("need t_c <= t_rd_init <= t_c + m_hat")

    @property
    def cap(self) -> int:
        return self.t_c + self.m_hat


@dataclass(frozen=True, slots=True)
class Step:
    deadline: int
    status: Status


@dataclass(frozen=True, slots=True)
class DeadlineResolution:
    final_deadline: int
    capped: bool
    transcript: tuple[Step, ...]
    witness: Optional[int] = None
    provisional: bool = False  # chain ended before the loop could finish
    non_monotone: bool = False  # minimality is not guaranteed for this spec

    def to_json(self) -> dict[str, Any]:
        return {
            "final_deadline": self.final_deadline,
            "capped": self.capped,
            "provisional": self.provisional,
            "non_monotone": self.non_monotone,
            "witness": self.witness,
            "transcript": [{"deadline": s.deadline, "status": s.status.value} for s in self.transcript],
        }


def resolve_deadline(chain: ChainView, ch: Challenge, signal: Signal = None) -> DeadlineResolution:
    """Extend the deadline one block at a time while the window stays congested."""
    if not (chain.covers(ch.t_c) and chain.covers(ch.t_rd_init)):
        raise DataError(f"chain {chain.h0}..{chain.last_height} does not cover the initial "
                        f"window {ch.t_c}..{ch.t_rd_init}")
    t_rd = ch.t_rd_init
    result = init_refresh(ch.spec, congestion_bits(chain, signal, ch.t_c, t_rd))
    transcript = [Step(t_rd, result.status)]
    provisional = False
    while result.status is Status.CONGESTED and t_rd < ch.cap:
        if not chain.covers(t_rd + 1):
            provisional = True
            break
        t_rd += 1
        bit = congestion_bits(chain, signal, t_rd, t_rd)
        result = refresh_evaluate(ch.spec, result.state, bit)
        transcript.append(Step(t_rd, result.status))
    return DeadlineResolution(
        final_deadline=t_rd,
        capped=result.status is Status.CONGESTED and t_rd == ch.cap,
        transcript=tuple(transcript),
        witness=result.witness,
        provisional=provisional,
        non_monotone=not is_monotone(ch.spec),
    )


@dataclass(frozen=True, slots=True)
class Adjudication:
    accepted: bool
    resolution: DeadlineResolution


def adjudicate_response(chain: ChainView, ch: Challenge, response_height: int,
                        signal: Signal = None) -> Adjudication:
    """Accept a response included at ``response_height`` iff it is not after the deadline."""
    if response_height < ch.t_c:
        raise ParameterError(f"response height {response_height} precedes challenge {ch.t_c}")
    res = resolve_deadline(chain, ch, signal)
    if res.provisional and response_height > res.final_deadline:
        raise DataError(f"chain ends at {chain.last_height}; cannot decide a response at "
                        f"{response_height}")
    return Adjudication(response_height <= res.final_deadline, res)


# --------------------------------------------------------------------------
# JSON surface

_ALT_KINDS = {
    "lowest-fee-density": (LowestFeeDensity, ("theta",)),
    "highest-fee-density": (HighestFeeDensity, ("theta",)),
    "nonzero-occupancy": (NonzeroOccupancy, ("gamma",)),
    "fee-not-density": (FeeNotDensity, ("fee", "gamma")),
    "base-fee": (BaseFee, ("max_base_fee",)),
    "theta-gamma": (SignalParams, ("theta", "gamma")),
}


def parse_signal(obj: Optional[dict]) -> Signal:
    """``None`` or ``{"kind": "precomputed"}`` means the chain's own signals."""
    if obj is None:
        return None
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ParameterError("signal must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "precomputed":
        return None
    if kind not in _ALT_KINDS:
        raise ParameterError(f"unknown signal kind {kind!r}")
    cls, names = _ALT_KINDS[kind]
    try:
        values = {name: float(obj[name]) for name in names}
    except (KeyError, TypeError, ValueError):
        raise ParameterError(f"signal {kind!r} needs numeric {', '.join(names)}") from None
    return cls(**values)


def signal_to_json(signal: Signal) -> dict:
    if signal is None:
        return {"kind": "precomputed"}
    for kind, (cls, names) in _ALT_KINDS.items():
        if isinstance(signal, cls):
            return {"kind": kind, **{name: getattr(signal, name) for name in names}}
    raise ParameterError(f"unknown signal {signal!r}")


def parse_challenge(obj: dict) -> tuple[Challenge, Signal]:
    """Read ``{"t_c", "t_rd", "m_hat", "spec", "signal"}``."""
    if not isinstance(obj, dict):
        raise ParameterError("challenge must be a JSON object")
    try:
        t_c, t_rd, m_hat = (obj[k] for k in ("t_c", "t_rd", "m_hat"))
        spec_text = obj["spec"]
    except KeyError as exc:
        raise ParameterError(f"challenge is missing {exc.args[0]!r}") from None
    for name, v in (("t_c", t_c), ("t_rd", t_rd), ("m_hat", m_hat)):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ParameterError(f"challenge field {name!r} must be an integer")
    return Challenge(t_c, t_rd, m_hat, parse_spec(spec_text)), parse_signal(obj.get("signal"))


def challenge_to_json(ch: Challenge, signal: Signal = None) -> dict:
    return {"t_c": ch.t_c, "t_rd": ch.t_rd_init, "m_hat": ch.m_hat,
            "spec": format_spec(ch.spec), "signal": signal_to_json(signal)}


def load_challenge(text: str) -> tuple[Challenge, Signal]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"challenge is not valid JSON: {exc.msg}") from None
    return parse_challenge(obj)
