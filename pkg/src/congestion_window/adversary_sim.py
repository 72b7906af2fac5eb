"""Monte Carlo attack estimates and an exhaustive small-period oracle.

The simulated adversary sets every block it mines to the bit that helps its
attack.  All four protocols only get "more uncongested" when a 1 turns into
a 0, so this is the best element of the manipulation set.  The exhaustive
oracle does not assume that: it checks the whole manipulation set.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .chain_model import CongestionVector, trial_uniforms
from .errors import ParameterError
from .period_protocols import (CumulativeM, Direction, LConsecutive, Percentage,
                               ProtocolSpec, SlidingWindow, evaluate)

BRUTE_FORCE_MAX_N = 14
_BATCH_CELLS = 1 << 22


def apply_adversary(pe: Sequence[int], ctrl: Sequence[int], direction: Direction) -> CongestionVector:
    """Overwrite every adversary-mined block with the attack's preferred bit."""
    if len(pe) != len(ctrl):
        raise ParameterError(f"length mismatch: period {len(pe)}, control {len(ctrl)}")
    forced = direction.forced_bit
    return CongestionVector(forced if c else b for b, c in zip(pe, ctrl))


@dataclass(frozen=True, slots=True)
class AttackScenario:
    spec: ProtocolSpec
    direction: Direction
    n: int
    alpha: float
    p: float
    trials: int
    seed: int = 0
    stream: int = 0  # sub-stream id, set per point by sweep()

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        for name in ("alpha", "p"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1]")


@dataclass(frozen=True, slots=True)
class AttackEstimate:
    successes: int
    trials: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def std_error(self) -> float:
        r = self.success_rate
        return math.sqrt(r * (1 - r) / self.trials)

    @property
    def rule_of_three(self) -> Optional[float]:
        """One-sided 95% upper bound on the rate when nothing succeeded."""
        return min(1.0, 3.0 / self.trials) if self.successes == 0 else None


# --------------------------------------------------------------------------
# Batched predicate evaluation over rows of 0/1 "uncongested" indicators


def _window_max(zeros: np.ndarray, width: int) -> np.ndarray:
    csum = np.zeros((zeros.shape[0], zeros.shape[1] + 1), dtype=np.int32)
    np.cumsum(zeros, axis=1, out=csum[:, 1:])
    return (csum[:, width:] - csum[:, :-width]).max(axis=1)


def uncongested_rows(spec: ProtocolSpec, zeros: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate`; ``zeros[i, j]`` is 1 when block j of row i is uncongested."""
    n = zeros.shape[1]
    if isinstance(spec, CumulativeM):
        return zeros.sum(axis=1) >= spec.M
    if isinstance(spec, Percentage):
        x = Fraction(spec.x)
        return 100 * x.denominator * zeros.sum(axis=1, dtype=np.int64) >= x.numerator * n
    if isinstance(spec, LConsecutive):
        width, need = spec.L, spec.L
    elif isinstance(spec, SlidingWindow):
        width, need = spec.N, spec.K
    else:
        raise ParameterError(f"unknown protocol spec {spec!r}")
    if n < width:
        return np.zeros(zeros.shape[0], dtype=bool)
    return _window_max(zeros, width) >= need


def _count_successes(sc: AttackScenario, first: int, count: int) -> int:
    congested = trial_uniforms(sc.seed, "congestion", first, count, sc.n, sc.stream) < sc.p
    controlled = trial_uniforms(sc.seed, "control", first, count, sc.n, sc.stream) < sc.alpha
    if sc.direction is Direction.UNCONGESTION:
        zeros = ~congested | controlled
    else:
        zeros = ~congested & ~controlled
    unc = uncongested_rows(sc.spec, zeros.astype(np.int8))
    hits = unc if sc.direction is Direction.UNCONGESTION else ~unc
    return int(hits.sum())


def _chunks(trials: int, n: int) -> list[tuple[int, int]]:
    size = max(1, _BATCH_CELLS // n)
    return [(s, min(size, trials - s)) for s in range(0, trials, size)]


def _run_chunk(args):
    sc, first, count = args
    return _count_successes(sc, first, count)


def simulate_attack(sc: AttackScenario, workers: int = 1) -> AttackEstimate:
    """Estimate attack success.  Trial ``i`` draws from streams keyed on
    ``(seed, stream, i)``, so the result does not depend on ``workers``."""
    jobs = [(sc, first, count) for first, count in _chunks(sc.trials, sc.n)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            successes = sum(pool.map(_run_chunk, jobs))
    else:
        successes = sum(map(_run_chunk, jobs))
    return AttackEstimate(successes, sc.trials)


# --------------------------------------------------------------------------
# Sweeps

AXES = ("n", "K", "L", "alpha")


@dataclass(frozen=True, slots=True)
class SweepRow:
    axis_value: float
    estimate: AttackEstimate


def _with_axis(sc: AttackScenario, axis: str, value, index: int) -> AttackScenario:
    if axis == "n":
        sc = replace(sc, n=int(value))
    elif axis == "alpha":
        sc = replace(sc, alpha=float(value))
    elif axis == "K":
        if not isinstance(sc.spec, SlidingWindow):
            raise ParameterError("axis K needs a sliding-window spec")
        sc = replace(sc, spec=SlidingWindow(sc.spec.N, int(value)))
    elif axis == "L":
        if not isinstance(sc.spec, LConsecutive):
            raise ParameterError("axis L needs an L-consecutive spec")
        sc = replace(sc, spec=LConsecutive(int(value)))
    else:
        raise ParameterError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
    return replace(sc, stream=index)


def sweep(template: AttackScenario, axis: str, values: Iterable, workers: int = 1) -> list[SweepRow]:
    """One estimate per axis value; point ``i`` uses sub-stream ``i`` of the base seed."""
    rows = []
    for i, value in enumerate(values):
        sc = _with_axis(template, axis, value, i)
        rows.append(SweepRow(value, simulate_attack(sc, workers)))
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["axis_value", "success_rate", "std_error", "trials"])
    for row in rows:
        est = row.estimate
        out.writerow([row.axis_value, repr(est.success_rate), repr(est.std_error), est.trials])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Exhaustive oracle


def _popcounts(n: int) -> np.ndarray:
    codes = np.arange(1 << n, dtype=np.int64)
    counts = np.zeros_like(codes)
    for b in range(n):
        counts += (codes >> b) & 1
    return counts


@lru_cache(maxsize=256)
def _reachable_histogram(spec: ProtocolSpec, direction: Direction, n: int) -> np.ndarray:
    """``H[a, c]``: over all control masks with ``a`` adversary blocks, the number
    of honest-bit patterns with ``c`` congested honest blocks from which some
    manipulation reaches the attack's target verdict."""
    size = 1 << n
    target = direction.target
    good = np.array([
        evaluate(spec, [(code >> b) & 1 for b in range(n)]).status is target
        for code in range(size)
    ])
    targets = np.flatnonzero(good).astype(np.int64)
    pop = _popcounts(n)
    H = np.zeros((n + 1, n + 1), dtype=np.int64)
    if targets.size == 0:
        return H
    masks_per_chunk = max(1, (1 << 22) // targets.size)
    for m0 in range(0, size, masks_per_chunk):
        masks = np.arange(m0, min(size, m0 + masks_per_chunk), dtype=np.int64)
        # honest bits of each target vector, adversary positions cleared
        proj = np.sort(targets[None, :] & ~masks[:, None], axis=1)
        first = np.ones_like(proj, dtype=bool)
        first[:, 1:] = proj[:, 1:] != proj[:, :-1]
        rows, cols = np.nonzero(first)
        flat = pop[masks[rows]] * (n + 1) + pop[proj[rows, cols]]
        H += np.bincount(flat, minlength=(n + 1) ** 2).reshape(n + 1, n + 1)
    return H


def brute_force_attack_prob(spec: ProtocolSpec, direction: Direction, n: int,
                            alpha: float, p: float) -> float:
    """Exact attack success by enumerating every adversary/honest outcome.

    An outcome succeeds when *some* vector in the adversary's manipulation set
    has the target verdict.
    """
    if not 1 <= n <= BRUTE_FORCE_MAX_N:
        raise ParameterError(f"brute force supports 1 <= n <= {BRUTE_FORCE_MAX_N}, got {n}")
    for name, v in (("alpha", alpha), ("p", p)):
        if not 0.0 <= v <= 1.0:
            raise ParameterError(f"{name} must be in [0, 1]")
    H = _reachable_histogram(spec, direction, n)
    total = []
    for a in range(n + 1):
        free = n - a
        for c in range(free + 1):
            if H[a, c]:
                total.append(int(H[a, c]) * alpha ** a * (1 - alpha) ** free
                             * p ** c * (1 - p) ** (free - c))
    return math.fsum(total)


def is_best_manipulation(spec: ProtocolSpec, direction: Direction, pe: Sequence[int],
                         ctrl: Sequence[int]) -> bool:
    """True unless some manipulation reaches the target verdict while
    :func:`apply_adversary` does not (exhaustive over controlled positions)."""
    target = direction.target
    if evaluate(spec, apply_adversary(pe, ctrl, direction)).status is target:
        return True
    positions = [i for i, c in enumerate(ctrl) if c]
    base = list(pe)
    for choice in range(1 << len(positions)):
        for j, i in enumerate(positions):
            base[i] = (choice >> j) & 1
        if evaluate(spec, base).status is target:
            return False
    return True

