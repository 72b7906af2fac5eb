"""Command-line entry point.

Exit codes: 0 success, 1 data error, 2 usage or parameter error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from contextlib import contextmanager
from pathlib import Path

from . import __version__
from .adversary_sim import AXES, AttackScenario, sweep, sweep_csv
from .chain_model import FORMATS, ingest_chain
from .challenge_engine import adjudicate_response, load_challenge, resolve_deadline
from .congestion_signal import (BaseFee, FeeNotDensity, HighestFeeDensity, LowestFeeDensity,
                                NonzeroOccupancy, SignalParams, block_signal)
from .errors import DataError, ParameterError
from .exact_analysis import (REPORT_FLOOR, attack_prob_consec, bound_sw, reproduce_window_table,
                             search_k)
from .extended import ExtendedProb
from .period_protocols import Direction, parse_spec

DEFAULT_P = {Direction.UNCONGESTION: 0.85, Direction.CONGESTION: 0.15}


def format_prob(value) -> str:
    value = ExtendedProb.of(value)
    if value.is_zero():
        return "0"
    if value < REPORT_FLOOR:
        return f"<{REPORT_FLOOR:.0e}"
    return value.format(6)


def parse_int_range(text: str) -> list[int]:
    """``"5"``, ``"1,2,8"`` or inclusive ``"start:stop[:step]"``."""
    out: list[int] = []
    try:
        for part in text.split(","):
            if ":" in part:
                bits = [int(b) for b in part.split(":")]
                if len(bits) not in (2, 3) or (len(bits) == 3 and bits[2] < 1):
                    raise ValueError
                start, stop, step = bits[0], bits[1], bits[2] if len(bits) == 3 else 1
                out.extend(range(start, stop + 1, step))
            else:
                out.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer range {text!r}") from None
    return out


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}") from None


def _directions(choice: str) -> list[Direction]:
    if choice == "both":
        return [Direction.UNCONGESTION, Direction.CONGESTION]
    return [Direction(choice)]


@contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(header)
    out.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------------------
# Subcommands


def cmd_bounds(args) -> str:
    rows = []
    for direction in _directions(args.direction):
        p = args.p if args.p is not None else DEFAULT_P[direction]
        for n in args.n:
            value = bound_sw(direction, args.N, args.K, n, args.alpha, p)
            rows.append([args.N, args.K, n, args.alpha, p, direction.value, format_prob(value)])
    return _csv_text(["N", "K", "n", "alpha", "p", "direction", "bound"], rows)


def cmd_markov(args) -> str:
    rows = []
    for direction in _directions(args.direction):
        p = args.p if args.p is not None else DEFAULT_P[direction]
        for L in args.L:
            value = attack_prob_consec(direction, L, args.n, args.alpha, p)
            rows.append([L, args.n, args.alpha, p, direction.value, format_prob(value)])
    return _csv_text(["L", "n", "alpha", "p", "direction", "probability"], rows)


def cmd_simulate(args) -> str:
    direction = Direction(args.direction)
    p = args.p if args.p is not None else DEFAULT_P[direction]
    spec = parse_spec(args.spec)
    if args.axis == "n":
        values = args.n
    else:
        if args.values is None:
            raise ParameterError(f"--values is required with --axis {args.axis}")
        values = args.values if args.axis == "alpha" else [int(v) for v in args.values]
    template = AttackScenario(spec, direction, args.n[0], args.alpha, p, args.trials, args.seed)
    rows = sweep(template, args.axis, values, workers=args.workers)
    for row in rows:
        est = row.estimate
        if est.successes in (0, est.trials):
            bound = 3.0 / est.trials
            side = "upper" if est.successes == 0 else "lower"
            limit = min(1.0, bound) if est.successes == 0 else max(0.0, 1 - bound)
            print(f"note: {args.axis}={row.axis_value}: {est.successes}/{est.trials} successes; "
                  f"rule-of-three 95% {side} bound {limit:.6g}", file=sys.stderr)
    return sweep_csv(rows)


def cmd_reproduce_table(args) -> str:
    rows = []
    for row in reproduce_window_table(args.alpha, args.p_uncongestion, args.p_congestion, args.m_hat):
        pub = row.published
        rows.append([
            pub.N, pub.K, pub.label,
            format_prob(row.uncongestion),
            "<1e-323" if pub.uncongestion is None else f"{pub.uncongestion:.3g}",
            "match" if row.uncongestion_match else "MISMATCH",
            format_prob(row.congestion), f"{pub.congestion:.3g}",
            "match" if row.congestion_match else "MISMATCH",
        ])
    return _csv_text(["N", "K", "window", "uncongestion", "published_uncongestion", "uncongestion_check",
                      "congestion", "published_congestion", "congestion_check"], rows)


def _read_chain(path: str, fmt: str):
    try:
        with open(path, "rb") as fh:
            return ingest_chain(fh, fmt)
    except OSError as exc:
        raise DataError(f"cannot read chain file: {exc}") from None


def cmd_deadline(args) -> str:
    chain = _read_chain(args.chain, args.format)
    try:
        text = Path(args.challenge).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read challenge file: {exc}") from None
    ch, signal = load_challenge(text)
    if args.response is not None:
        adj = adjudicate_response(chain, ch, args.response, signal)
        payload = {"accepted": adj.accepted, "response_height": args.response,
                   "resolution": adj.resolution.to_json()}
    else:
        payload = resolve_deadline(chain, ch, signal).to_json()
    return json.dumps(payload, indent=2) + "\n"


def cmd_search_k(args) -> str:
    res = search_k(args.N, args.alpha, args.p_uncongestion, args.p_congestion, args.m_hat, args.target)
    return _csv_text(
        ["N", "K", "alpha", "uncongestion", "congestion", "worst", "target", "meets_target"],
        [[args.N, res.K, args.alpha, format_prob(res.uncongestion), format_prob(res.congestion),
          format_prob(res.worst), args.target, str(res.meets_target).lower()]],
    )


def _signal_from_args(args):
    kind = args.kind
    need = {"theta-gamma": ("theta", "gamma"), "lowest-fee-density": ("theta",),
            "highest-fee-density": ("theta",), "nonzero-occupancy": ("gamma",),
            "fee-not-density": ("fee", "gamma"), "base-fee": ("max_base_fee",)}[kind]
    missing = [n for n in need if getattr(args, n) is None]
    if missing:
        raise ParameterError(f"--kind {kind} needs " + ", ".join("--" + m.replace("_", "-") for m in missing))
    if kind == "theta-gamma":
        return SignalParams(args.theta, args.gamma)
    if kind == "lowest-fee-density":
        return LowestFeeDensity(args.theta)
    if kind == "highest-fee-density":
        return HighestFeeDensity(args.theta)
    if kind == "nonzero-occupancy":
        return NonzeroOccupancy(args.gamma)
    if kind == "fee-not-density":
        return FeeNotDensity(args.fee, args.gamma)
    return BaseFee(args.max_base_fee)


def cmd_signal(args) -> str:
    chain = _read_chain(args.chain, args.format)
    signal = _signal_from_args(args)
    rows = [[h, block_signal(chain, h, signal)] for h in range(chain.h0, chain.last_height + 1)]
    return _csv_text(["height", "congested"], rows)


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="congestion-window",
                                     description="Congestion-aware challenge deadlines: bounds, "
                                                 "simulations and deadline resolution.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        if out:
            p.add_argument("--out", help="write output here instead of stdout")
        return p

    b = common(sub.add_parser("bounds", help="sliding-window attack bounds"))
    b.add_argument("--N", type=int, required=True)
    b.add_argument("--K", type=int, required=True)
    b.add_argument("--n", type=parse_int_range, required=True, help="period length(s)")
    b.add_argument("--alpha", type=float, default=0.33)
    b.add_argument("--p", type=float, help="default 0.85 (uncongestion) / 0.15 (congestion)")
    b.add_argument("--direction", choices=["uncongestion", "congestion", "both"], default="both")
    b.set_defaults(func=cmd_bounds)

    m = common(sub.add_parser("markov", help="exact L-consecutive attack probabilities"))
    m.add_argument("--L", type=parse_int_range, required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--alpha", type=float, default=0.33)
    m.add_argument("--p", type=float)
    m.add_argument("--direction", choices=["uncongestion", "congestion", "both"], default="both")
    m.set_defaults(func=cmd_markov)

    s = common(sub.add_parser("simulate", help="Monte Carlo attack success"))
    s.add_argument("--spec", required=True, help="e.g. sw:N=144,K=89")
    s.add_argument("--direction", choices=["uncongestion", "congestion"], required=True)
    s.add_argument("--n", type=parse_int_range, required=True)
    s.add_argument("--alpha", type=float, default=0.33)
    s.add_argument("--p", type=float)
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--axis", choices=AXES, default="n")
    s.add_argument("--values", type=parse_float_list, help="axis values when --axis is not n")
    s.set_defaults(func=cmd_simulate)

    t = common(sub.add_parser("reproduce-table", help="recompute the Ethereum window table"))
    t.add_argument("--alpha", type=float, default=0.33)
    t.add_argument("--p-uncongestion", type=float, default=0.85)
    t.add_argument("--p-congestion", type=float, default=0.15)
    t.add_argument("--m-hat", type=int, default=90300)
    t.set_defaults(func=cmd_reproduce_table)

    d = common(sub.add_parser("deadline", help="resolve a challenge deadline on a recorded chain"))
    d.add_argument("--chain", required=True)
    d.add_argument("--format", choices=FORMATS, default="base-fee")
    d.add_argument("--challenge", required=True)
    d.add_argument("--response", type=int, help="adjudicate a response included at this height")
    d.set_defaults(func=cmd_deadline)

    k = common(sub.add_parser("search-k", help="choose K for a window size"))
    k.add_argument("--N", type=int, required=True)
    k.add_argument("--alpha", type=float, default=0.33)
    k.add_argument("--p-uncongestion", type=float, default=0.85)
    k.add_argument("--p-congestion", type=float, default=0.15)
    k.add_argument("--m-hat", type=int, default=90300)
    k.add_argument("--target", type=float, default=0.01)
    k.set_defaults(func=cmd_search_k)

    g = common(sub.add_parser("signal", help="per-block congestion report"))
    g.add_argument("--chain", required=True)
    g.add_argument("--format", choices=FORMATS, default="tx-list")
    g.add_argument("--kind", default="theta-gamma",
                   choices=["theta-gamma", "lowest-fee-density", "highest-fee-density",
                            "nonzero-occupancy", "fee-not-density", "base-fee"])
    g.add_argument("--theta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--fee", type=float)
    g.add_argument("--max-base-fee", type=float)
    g.set_defaults(func=cmd_signal)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    with _output(args.out) as fh:
        fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
