"""Closed-form attack probabilities.

L-Consecutive attacks are absorption probabilities of a run-length Markov
chain; Sliding Window attacks are bounded with binomial tails (a union bound
over windows for uncongestion, disjoint windows for congestion).  Results are
:class:`ExtendedProb` so values below the double range survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError
from .extended import ONE, ZERO, ExtendedProb
from .period_protocols import Direction

REPORT_FLOOR = 1e-300

_RESCALE_BELOW = 2.0 ** -600
_RESCALE_BY = 600


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must be in [0, 1], got {value}")


def _check_count(name: str, value: int, low: int = 1) -> None:
    if int(value) != value or value < low:
        raise ParameterError(f"{name} must be an integer >= {low}, got {value}")


@dataclass(frozen=True, slots=True)
class MarkovSpec:
    L: int
    alpha: float
    p: float
    direction: Direction

    def __post_init__(self):
        _check_count("L", self.L)
        _check_prob("alpha", self.alpha)
        _check_prob("p", self.p)

    def transitions(self) -> tuple[float, float]:
        """``(reset, advance)``: probabilities of returning to state 0 and of
        extending the uncongested run by one block."""
        a, p = self.alpha, self.p
        if self.direction is Direction.UNCONGESTION:
            return (1 - a) * p, a + (1 - a) * (1 - p)
        return a + (1 - a) * p, (1 - a) * (1 - p)


def build_matrix(spec: MarkovSpec) -> np.ndarray:
    """Dense ``(L+1) x (L+1)`` transition matrix; state ``L`` is absorbing."""
    reset, advance = spec.transitions()
    L = spec.L
    T = np.zeros((L + 1, L + 1))
    T[:L, 0] = reset
    T[np.arange(L), np.arange(1, L + 1)] += advance
    T[L, L] = 1.0
    return T


def _absorb(L: int, n: int, reset: float, advance: float) -> tuple[ExtendedProb, ExtendedProb]:
    """Run the chain from state 0 for ``n`` steps.

    Returns ``(absorbed, transient)`` mass.  The transient vector is iterated
    directly (two nonzeros per row) and rescaled when it gets small.  Absorbed
    mass is ``advance**L * sum(mass entering state 0 at steps 0..n-L)``, which
    never needs a subtraction.
    """
    v = np.zeros(L)
    v[0] = 1.0
    scale = 0
    last_entry = n - L
    epoch_sum = 1.0 if last_entry >= 0 else 0.0
    entered = ZERO
    for t in range(1, n + 1):
        mass = float(v.sum())
        if mass == 0.0:
            break
        if mass < _RESCALE_BELOW:
            entered = entered + ExtendedProb.of(epoch_sum) * ExtendedProb(1.0, scale)
            epoch_sum = 0.0
            v *= 2.0 ** _RESCALE_BY
            mass *= 2.0 ** _RESCALE_BY
            scale -= _RESCALE_BY
        head = reset * mass
        v[1:] = v[:-1] * advance
        v[0] = head
        if t <= last_entry:
            epoch_sum += head
    entered = entered + ExtendedProb.of(epoch_sum) * ExtendedProb(1.0, scale)
    absorbed = (ExtendedProb.of(advance) ** L) * entered if last_entry >= 0 else ZERO
    transient = ExtendedProb.of(float(v.sum())) * ExtendedProb(1.0, scale)
    return absorbed, transient


def uncongestion_attack_prob_consec(L: int, n: int, alpha: float, p: float) -> ExtendedProb:
    """Probability that an adversary forces an L-consecutive-uncongested run into ``n`` blocks."""
    _check_count("n", n)
    spec = MarkovSpec(L, alpha, p, Direction.UNCONGESTION)
    absorbed, _ = _absorb(L, n, *spec.transitions())
    return absorbed.clamp()


def congestion_attack_prob_consec(L: int, n: int, alpha: float, p: float) -> ExtendedProb:
    """Probability that no honest uncongested run of length L appears in ``n`` blocks."""
    _check_count("n", n)
    spec = MarkovSpec(L, alpha, p, Direction.CONGESTION)
    _, transient = _absorb(L, n, *spec.transitions())
    return transient.clamp()


def attack_prob_consec(direction: Direction, L: int, n: int, alpha: float, p: float) -> ExtendedProb:
    if direction is Direction.UNCONGESTION:
        return uncongestion_attack_prob_consec(L, n, alpha, p)
    return congestion_attack_prob_consec(L, n, alpha, p)


# --------------------------------------------------------------------------
# Binomial tails and Sliding Window bounds


def _log_terms(n: int, p: float, js: np.ndarray, complement: float) -> np.ndarray:
    return (gammaln(n + 1) - gammaln(js + 1) - gammaln(n - js + 1)
            + js * math.log(p) + (n - js) * math.log(complement))


def binomial_tail(n: int, p: float, k: int, side: str = "ge", *,
                  complement: float | None = None) -> ExtendedProb:
    """``P[X >= k]`` (``side="ge"``) or ``P[X < k]`` (``side="lt"``) for ``X ~ Bin(n, p)``.

    Sums the requested side directly in log space, so small tails keep full
    relative precision.  ``complement`` is ``1 - p`` when the caller can form
    it more accurately than the subtraction would.
    """
    _check_count("n", n, 0)
    _check_prob("p", p)
    if complement is None:
        complement = 1.0 - p
    _check_prob("complement", complement)
    if not 0 <= k <= n + 1:
        raise ParameterError(f"k must be in [0, n+1], got {k}")
    if side not in ("ge", "lt"):
        raise ParameterError(f"side must be 'ge' or 'lt', got {side!r}")
    lo, hi = (k, n) if side == "ge" else (0, k - 1)
    if lo > hi:
        return ZERO
    if p == 0.0 or complement == 0.0:
        certain = 0 if p == 0.0 else n
        return ONE if lo <= certain <= hi else ZERO
    logs = _log_terms(n, p, np.arange(lo, hi + 1, dtype=np.float64), complement)
    peak = float(logs.max())
    total = math.fsum(np.exp(logs - peak).tolist())
    return (ExtendedProb.from_log(peak) * total).clamp()


def _check_window(N: int, K: int, n: int) -> None:
    _check_count("N", N)
    _check_count("n", n)
    if not 1 <= K <= N:
        raise ParameterError(f"K must be in [1, N], got {K}")
    if N > n:
        raise ParameterError(f"period shorter than window (n={n} < N={N})")


def uncongestion_block_prob(alpha: float, p: float) -> float:
    """Chance a block ends up uncongested when the adversary pushes toward uncongestion."""
    return alpha + (1 - p) * (1 - alpha)


def congestion_block_prob(alpha: float, p: float) -> float:
    """Chance a block ends up uncongested when the adversary pushes toward congestion."""
    return (1 - p) * (1 - alpha)


def _block_probs(direction: Direction, alpha: float, p: float) -> tuple[float, float]:
    """``(q, 1 - q)`` with the complement formed without cancellation."""
    if direction is Direction.UNCONGESTION:
        return uncongestion_block_prob(alpha, p), (1 - alpha) * p
    return congestion_block_prob(alpha, p), alpha + (1 - alpha) * p


def uncongestion_bound_sw(N: int, K: int, n: int, alpha: float, p: float) -> ExtendedProb:
    """Union bound over the ``n-N+1`` windows; may exceed 1."""
    _check_window(N, K, n)
    _check_prob("alpha", alpha)
    _check_prob("p", p)
    q, c = _block_probs(Direction.UNCONGESTION, alpha, p)
    return (n - N + 1) * binomial_tail(N, q, K, "ge", complement=c)


def congestion_bound_sw(N: int, K: int, n: int, alpha: float, p: float) -> ExtendedProb:
    """All ``floor(n/N)`` disjoint windows congested."""
    _check_window(N, K, n)
    _check_prob("alpha", alpha)
    _check_prob("p", p)
    q, c = _block_probs(Direction.CONGESTION, alpha, p)
    return binomial_tail(N, q, K, "lt", complement=c) ** (n // N)


def bound_sw(direction: Direction, N: int, K: int, n: int, alpha: float, p: float) -> ExtendedProb:
    if direction is Direction.UNCONGESTION:
        return uncongestion_bound_sw(N, K, n, alpha, p)
    return congestion_bound_sw(N, K, n, alpha, p)


# --------------------------------------------------------------------------
# Choosing K


@dataclass(frozen=True, slots=True)
class KSearchResult:
    K: int
    uncongestion: ExtendedProb
    congestion: ExtendedProb
    target: float

    @property
    def worst(self) -> ExtendedProb:
        return max(self.uncongestion.clamp(), self.congestion.clamp())

    @property
    def meets_target(self) -> bool:
        return self.worst <= self.target


def _log_cumulative(logs: np.ndarray) -> np.ndarray:
    return np.logaddexp.accumulate(logs)


def search_k(N: int, alpha: float, p_uncongestion: float, p_congestion: float,
             m_hat: int, target: float) -> KSearchResult:
    """Pick the K in ``1..N`` minimizing the worse of both window bounds.

    The uncongestion bound is taken at ``n = m_hat`` (it grows with n) and the
    congestion bound at a single window ``n = N`` (it shrinks with n).
    """
    _check_count("N", N)
    _check_count("m_hat", m_hat, N)
    _check_prob("alpha", alpha)
    js = np.arange(N + 1, dtype=np.float64)

    def logs_for(q: float, c: float) -> np.ndarray:
        if q == 0.0 or c == 0.0:
            out = np.full(N + 1, -np.inf)
            out[0 if q == 0.0 else N] = 0.0
            return out
        return _log_terms(N, q, js, c)

    up = logs_for(*_block_probs(Direction.UNCONGESTION, alpha, p_uncongestion))
    down = logs_for(*_block_probs(Direction.CONGESTION, alpha, p_congestion))
    ge = _log_cumulative(up[::-1])[::-1]    # ge[K] = log P[X >= K]
    lt = _log_cumulative(down)              # lt[K-1] = log P[X < K]
    windows = m_hat - N + 1
    best = None
    for K in range(1, N + 1):
        cand = KSearchResult(K, windows * ExtendedProb.from_log(float(ge[K])),
                             ExtendedProb.from_log(float(lt[K - 1])).clamp(), target)
        if best is None or cand.worst < best.worst:
            best = cand
    return best


# --------------------------------------------------------------------------
# Published Ethereum window table

ETH_M_HAT = 90300


@dataclass(frozen=True, slots=True)
class PublishedRow:
    N: int
    K: int
    label: str
    uncongestion: float | None  # None: reported only as below the float range
    congestion: float


PUBLISHED_WINDOW_TABLE = (
    PublishedRow(6450, 3225, "1 day", None, 1.44e-29),
    PublishedRow(3225, 1612, "12 hours", 1.26e-10, 8.06e-16),
    PublishedRow(1612, 815, "6 hours", 7.14e-5, 1.08e-7),
    PublishedRow(806, 421, "3 hours", 8.87e-3, 3.16e-3),
)


def agrees_to_sig_figs(value: ExtendedProb | float, reported: float | None, digits: int = 2) -> bool:
    """Whether ``value`` matches ``reported`` to ``digits`` significant figures,
    i.e. differs by at most half a unit in the last kept place.

    ``reported=None`` stands for a value published only as underflowing; it
    matches anything below :data:`REPORT_FLOOR`.
    """
    value = ExtendedProb.of(value)
    if reported is None:
        return value < REPORT_FLOOR
    if reported == 0:
        return value.is_zero()
    unit = 10.0 ** (math.floor(math.log10(reported)) - digits + 1)
    return abs(float(value) - reported) <= 0.5 * unit * (1 + 1e-9)


@dataclass(frozen=True, slots=True)
class TableRow:
    published: PublishedRow
    uncongestion: ExtendedProb
    congestion: ExtendedProb

    @property
    def uncongestion_match(self) -> bool:
        return agrees_to_sig_figs(self.uncongestion, self.published.uncongestion)

    @property
    def congestion_match(self) -> bool:
        return agrees_to_sig_figs(self.congestion, self.published.congestion)


def reproduce_window_table(alpha: float = 0.33, p_uncongestion: float = 0.85,
                           p_congestion: float = 0.15, m_hat: int = ETH_M_HAT) -> list[TableRow]:
    """Recompute every published row: uncongestion at ``n = m_hat``, congestion
    at a single window ``n = N``."""
    rows = []
    for pub in PUBLISHED_WINDOW_TABLE:
        rows.append(TableRow(
            pub,
            uncongestion_bound_sw(pub.N, pub.K, m_hat, alpha, p_uncongestion),
            congestion_bound_sw(pub.N, pub.K, pub.N, alpha, p_congestion),
        ))
    return rows
