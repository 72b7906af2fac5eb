"""Uncongested-period protocols: evaluation, witnesses and incremental refresh.

A congestion vector holds 1 for a congested block and 0 for an uncongested
one.  Witness indices are 1-based positions into the period.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence, Union

from .errors import ParameterError


class Status(enum.Enum):
    CONGESTED = "congested"
    UNCONGESTED = "uncongested"


class Direction(enum.Enum):
    """Which verdict the adversary is trying to force."""

    CONGESTION = "congestion"
    UNCONGESTION = "uncongestion"

    @property
    def target(self) -> Status:
        return Status.CONGESTED if self is Direction.CONGESTION else Status.UNCONGESTED

    @property
    def forced_bit(self) -> int:
        return 1 if self is Direction.CONGESTION else 0


@dataclass(frozen=True, slots=True)
class CumulativeM:
    M: int

    def __post_init__(self):
        if self.M < 0:
            raise ParameterError(f"M must be >= 0, got {self.M}")


@dataclass(frozen=True, slots=True)
class Percentage:
    x: Union[int, float, Fraction]

    def __post_init__(self):
        if not 0 <= self.x <= 100:
            raise ParameterError(f"x must be in [0, 100], got {self.x}")


@dataclass(frozen=True, slots=True)
class LConsecutive:
    L: int

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError(f"L must be >= 1, got {self.L}")


@dataclass(frozen=True, slots=True)
class SlidingWindow:
    N: int
    K: int

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError(f"N must be >= 1, got {self.N}")
        if not 1 <= self.K <= self.N:
            raise ParameterError(f"K must be in [1, N={self.N}], got {self.K}")


ProtocolSpec = Union[CumulativeM, Percentage, LConsecutive, SlidingWindow]

_SPEC_RE = re.compile(r"^(sw|lconsec|cum|pct):(.*)$")
_SPEC_FIELDS = {
    "sw": (SlidingWindow, ("N", "K")),
    "lconsec": (LConsecutive, ("L",)),
    "cum": (CumulativeM, ("M",)),
    "pct": (Percentage, ("x",)),
}


def parse_spec(text: str) -> ProtocolSpec:
    """Parse ``sw:N=144,K=89``, ``lconsec:L=50``, ``cum:M=10`` or ``pct:x=75``."""
    m = _SPEC_RE.match(text.strip())
    if not m:
        raise ParameterError(f"invalid protocol spec {text!r}")
    cls, names = _SPEC_FIELDS[m.group(1)]
    values = {}
    for part in filter(None, m.group(2).split(",")):
        key, sep, raw = part.partition("=")
        key = key.strip()
        if not sep or key not in names or key in values:
            raise ParameterError(f"invalid protocol spec {text!r}")
        try:
            values[key] = Fraction(raw.strip()) if key == "x" else int(raw.strip())
        except ValueError:
            raise ParameterError(f"invalid value for {key} in {text!r}") from None
    if set(values) != set(names):
        raise ParameterError(f"protocol spec {text!r} needs {', '.join(names)}")
    if "x" in values and values["x"].denominator == 1:
        values["x"] = int(values["x"])
    return cls(**values)


def format_spec(spec: ProtocolSpec) -> str:
    if isinstance(spec, SlidingWindow):
        return f"sw:N={spec.N},K={spec.K}"
    if isinstance(spec, LConsecutive):
        return f"lconsec:L={spec.L}"
    if isinstance(spec, CumulativeM):
        return f"cum:M={spec.M}"
    x = Fraction(spec.x)
    return f"pct:x={x.numerator if x.denominator == 1 else float(x)}"


def is_monotone(spec: ProtocolSpec) -> bool:
    """Whether uncongestion of a sub-period implies it for every enclosing period."""
    return not isinstance(spec, Percentage)


@dataclass(frozen=True, slots=True)
class Evaluation:
    status: Status
    witness: Optional[int] = None

    @property
    def uncongested(self) -> bool:
        return self.status is Status.UNCONGESTED


def _percentage_holds(x, zeros: int, n: int) -> bool:
    x = Fraction(x)
    return 100 * x.denominator * zeros >= x.numerator * n


def evaluate(spec: ProtocolSpec, pe: Sequence[int]) -> Evaluation:
    """Decide whether the period is uncongested; LConsecutive and SlidingWindow
    also return the smallest witness index."""
    pe = [int(b) for b in pe]  # plain ints: narrow numpy dtypes would overflow the counts
    n = len(pe)
    if n == 0:
        raise ParameterError("cannot evaluate an empty period")
    if isinstance(spec, CumulativeM):
        ok = n - sum(pe) >= spec.M
        return Evaluation(Status.UNCONGESTED if ok else Status.CONGESTED)
    if isinstance(spec, Percentage):
        ok = _percentage_holds(spec.x, n - sum(pe), n)
        return Evaluation(Status.UNCONGESTED if ok else Status.CONGESTED)
    if isinstance(spec, LConsecutive):
        run = 0
        for i, bit in enumerate(pe, start=1):
            run = 0 if bit else run + 1
            if run == spec.L:
                return Evaluation(Status.UNCONGESTED, i - spec.L + 1)
        return Evaluation(Status.CONGESTED)
    if isinstance(spec, SlidingWindow):
        N, K = spec.N, spec.K
        if n < N:
            return Evaluation(Status.CONGESTED)
        zeros = N - sum(pe[:N])
        if zeros >= K:
            return Evaluation(Status.UNCONGESTED, 1)
        for start in range(2, n - N + 2):
            zeros += pe[start - 2] - pe[start + N - 2]
            if zeros >= K:
                return Evaluation(Status.UNCONGESTED, start)
        return Evaluation(Status.CONGESTED)
    raise ParameterError(f"unknown protocol spec {spec!r}")


def verify_witness(spec: ProtocolSpec, pe: Sequence[int], w: int) -> bool:
    """Check a witness by inspecting only the window it points at."""
    if isinstance(spec, SlidingWindow):
        width, need = spec.N, spec.K
    elif isinstance(spec, LConsecutive):
        width, need = spec.L, spec.L
    else:
        raise ParameterError(f"{type(spec).__name__} has no window witness")
    if not isinstance(w, int) or not 1 <= w <= len(pe) - width + 1:
        return False
    window = pe[w - 1:w - 1 + width]
    return width - sum(int(b) for b in window) >= need


# --------------------------------------------------------------------------
# Refresh


@dataclass(frozen=True, slots=True)
class RefreshState:
    """Carry needed to extend a period without rescanning it.

    ``count`` is the trailing uncongested run (LConsecutive), the zeros in the
    last ``N`` bits (SlidingWindow) or the total zeros (CumulativeM, Percentage).
    ``tail`` keeps the last ``N-1`` bits for SlidingWindow only.  Once a witness
    is found it is kept: both windowed protocols are monotone.
    """

    spec: ProtocolSpec
    length: int = 0
    count: int = 0
    tail: tuple[int, ...] = ()
    witness: Optional[int] = None
    found: bool = False


@dataclass(frozen=True, slots=True)
class RefreshResult:
    status: Status
    witness: Optional[int]
    state: RefreshState


def _status_of(state: RefreshState) -> Status:
    spec = state.spec
    if state.length == 0:
        return Status.CONGESTED
    if isinstance(spec, CumulativeM):
        ok = state.count >= spec.M
    elif isinstance(spec, Percentage):
        ok = _percentage_holds(spec.x, state.count, state.length)
    else:
        ok = state.found
    return Status.UNCONGESTED if ok else Status.CONGESTED


def init_refresh(spec: ProtocolSpec, pe: Sequence[int] = ()) -> RefreshResult:
    """Start incremental evaluation, optionally feeding an initial period."""
    return refresh_evaluate(spec, RefreshState(spec), pe)


def refresh_evaluate(spec: ProtocolSpec, state: RefreshState, new_bits: Sequence[int]) -> RefreshResult:
    """Extend the period summarized by ``state`` with ``new_bits``."""
    if state.spec != spec:
        raise ParameterError("refresh state belongs to a different protocol spec")
    length, count, found, witness = state.length, state.count, state.found, state.witness
    tail = deque(state.tail)
    for bit in new_bits:
        if bit not in (0, 1):
            raise ParameterError("congestion bits must be 0 or 1")
        length += 1
        if isinstance(spec, (CumulativeM, Percentage)):
            count += 1 - bit
        elif isinstance(spec, LConsecutive):
            if found:
                continue
            count = 0 if bit else count + 1
            if count >= spec.L:
                found, witness = True, length - spec.L + 1
        else:
            if found:
                continue
            count += 1 - bit
            tail.append(bit)
            if len(tail) == spec.N:
                if count >= spec.K:
                    found, witness = True, length - spec.N + 1
                    tail.clear()
                    count = 0
                else:
                    count -= 1 - tail.popleft()
    new_state = replace(state, length=length, count=count, tail=tuple(tail), found=found, witness=witness)
    status = _status_of(new_state)
    return RefreshResult(status, witness if status is Status.UNCONGESTED else None, new_state)
