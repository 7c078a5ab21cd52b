"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 input parse error,
3 regret-bound verification failure.

    ergodic-predict --mode predict --input bits.txt --seed 7
    ergodic-predict --mode simulate --spec source.json --length 10000 --seed 1 --output bits.txt
    ergodic-predict --mode bench --spec source.json --length 10000 --seeds 10 --seed 0
    ergodic-predict --mode report --procedure hoeffding --input bits.txt --seeds 200 --epsilon 0.02 --seed 0
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .context_stats import ESTIMATORS, MalformedInputError
from .evaluation import (
    VerificationError,
    bench,
    hoeffding_check,
    minimax_experiment,
    report_from_ledger,
)
from .fileio import InputParseError, read_bits, read_side, write_bits, write_records, write_side
from .mixer import SideInfoPredictor, UniversalPredictor
from .processes import (
    MarkovSource,
    SideInfoSource,
    SpecError,
    bayes_loss,
    generate,
    load_spec,
    side_info_bayes_loss,
    side_info_generate,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_VERIFY = 3

PLAIN_ORDER_CAP = 24
SIDE_ORDER_CAP = 8
RESOLUTION_CAP = 8


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ergodic-predict", description="Sequential binary prediction with Markov-expert mixtures.")
    p.add_argument("--mode", required=True, choices=["predict", "simulate", "bench", "report"])
    p.add_argument("--input", help="bit file: '0'/'1' characters, whitespace ignored")
    p.add_argument("--side-input", help="side vectors for --input (default: <input>.side.csv)")
    p.add_argument("--spec", help="JSON source description")
    p.add_argument("--length", type=int, help="sequence length (simulate, bench)")
    p.add_argument("--lengths", help="comma-separated lengths (report --procedure minimax)")
    p.add_argument("--seed", type=int, help="random seed; required for every mode")
    p.add_argument("--seeds", type=int, help="number of seeds (bench, hoeffding)")
    p.add_argument("--estimator", default="empirical", choices=sorted(ESTIMATORS))
    p.add_argument("--side-info", action="store_true", help="predict with side information")
    p.add_argument("--order-cap", type=int, help="orders tallied eagerly (exactness does not depend on it)")
    p.add_argument("--resolution-cap", type=int, help="partition levels tallied eagerly")
    p.add_argument("--epsilon", type=float, default=0.02, help="deviation threshold (hoeffding)")
    p.add_argument("--procedure", choices=["regret", "hoeffding", "minimax"], default="regret")
    p.add_argument("--replicates", type=int, default=10_000, help="Monte Carlo replicates (minimax)")
    p.add_argument("--theta-scale", type=float, default=0.5, help="theta = scale / sqrt(n) (minimax)")
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--output", help="output file (simulate: the bit file; otherwise records, default stdout)")
    p.add_argument("--side-output", help="side vectors written by simulate (default: <output>.side.csv)")
    return p


def _fingerprint(args) -> dict:
    side = bool(args.side_info)
    order_cap = args.order_cap or (SIDE_ORDER_CAP if side else PLAIN_ORDER_CAP)
    resolution_cap = args.resolution_cap or RESOLUTION_CAP
    config = {
        "mode": args.mode,
        "seed": args.seed,
        "estimator": args.estimator,
        "order_cap": order_cap,
        "resolution_cap": resolution_cap,
        "side_info": side,
    }
    digest = hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:12]
    return {f"cfg_{k}": v for k, v in config.items() if k != "mode"} | {"cfg_hash": digest}


def _validate(args) -> None:
    if args.seed is None:
        raise UsageError("--seed is required")
    for name in ("order_cap", "resolution_cap", "length", "seeds", "replicates"):
        value = getattr(args, name)
        if value is not None and value < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    needs = {
        "predict": ["input"],
        "simulate": ["spec", "length", "output"],
        "bench": ["spec", "length"],
    }.get(args.mode, [])
    if args.mode == "report" and args.procedure in ("regret", "hoeffding"):
        needs = ["input"] + (["seeds"] if args.procedure == "hoeffding" else [])
    if args.mode == "report" and args.procedure == "minimax":
        needs = ["lengths"]
    missing = [f"--{n}" for n in needs if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--mode {args.mode} needs {', '.join(missing)}")


def _predictor_config(args) -> dict:
    fp = _fingerprint(args)
    config = {"estimator": args.estimator, "seed": args.seed, "order_cap": fp["cfg_order_cap"]}
    if args.side_info:
        config["resolution_cap"] = fp["cfg_resolution_cap"]
    return config


def _load_input(args):
    bits = read_bits(args.input)
    side = None
    if args.side_info:
        side = read_side(args.side_input or f"{args.input}.side.csv")
        if len(side) != len(bits):
            raise InputParseError(f"{len(bits)} bits but {len(side)} side vectors")
    return bits, side


def _steps(args, bits, side, predictor_box: list | None = None):
    """Yield ``(StepResult, y)`` for each step, revealing ``y`` after the caller sees the step."""
    config = _predictor_config(args)
    if side is None:
        predictor = UniversalPredictor(record_experts=False, **config)
        xs = [None] * len(bits)
    else:
        predictor = SideInfoPredictor(dimension=side.shape[1], record_experts=False, **config)
        xs = side
    if predictor_box is not None:
        predictor_box.append(predictor)
    for x, y in zip(xs, bits.tolist()):
        yield (predictor.step() if x is None else predictor.step(x)), y
        predictor.reveal(y)


def cmd_predict(args) -> list[dict]:
    bits, side = _load_input(args)
    fp = _fingerprint(args)
    records = []
    mistakes = 0
    expected = 0.0
    for step, y in _steps(args, bits, side):
        mistakes += step.prediction != y
        expected += abs(y - step.threshold)
        records.append(
            {
                "n": step.n,
                "threshold": step.threshold,
                "draw": step.draw,
                "prediction": step.prediction,
                "outcome": y,
                "running_loss": mistakes / step.n,
                "running_expected_loss": expected / step.n,
                **fp,
            }
        )
    return records


def cmd_simulate(args) -> list[dict]:
    source = _load_source(args)
    output = Path(args.output)
    record = {"length": args.length, "output": str(output)}
    if isinstance(source, SideInfoSource):
        args.side_info = True
        x, y = side_info_generate(source, args.length, args.seed)
        side_path = Path(args.side_output or f"{output}.side.csv")
        write_bits(output, y)
        write_side(side_path, x)
        record |= {"side_output": str(side_path), "oracle": "R_star", "bayes_loss": side_info_bayes_loss(source)}
    else:
        y = generate(source, args.length, args.seed)
        write_bits(output, y)
        record |= {"oracle": "L_star", "bayes_loss": bayes_loss(source)}
    record["ones"] = int(np.sum(y))
    return [record | _fingerprint(args)]


def cmd_bench(args) -> list[dict]:
    source = _load_source(args)
    if isinstance(source, SideInfoSource):
        args.side_info = True
    fp = _fingerprint(args)
    seeds = range(args.seed, args.seed + (args.seeds or 1))
    rows = bench(
        source,
        args.length,
        seeds,
        estimator=args.estimator,
        order_cap=fp["cfg_order_cap"],
        resolution_cap=fp["cfg_resolution_cap"],
        workers=os.cpu_count() or 1,
    )
    return [r | fp for r in rows]


def cmd_report(args) -> list[dict]:
    fp = _fingerprint(args)
    if args.procedure == "minimax":
        try:
            lengths = [int(v) for v in args.lengths.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"--lengths must be comma-separated integers, got {args.lengths!r}") from None
        if not lengths or min(lengths) < 1:
            raise UsageError("--lengths must list positive integers")
        rows = minimax_experiment(lengths, args.theta_scale, args.replicates, args.seed)
        return [r.record() | fp for r in rows]
    bits, side = _load_input(args)
    config = _predictor_config(args)
    if side is not None:
        config["dimension"] = side.shape[1]
    if args.procedure == "hoeffding":
        config.pop("seed")
        result = hoeffding_check(bits.tolist(), args.seeds, args.epsilon, side, first_seed=args.seed, **config)
        return [result.record() | fp]
    box: list = []
    for _ in _steps(args, bits, side, box):
        pass
    report = report_from_ledger(box[0].ledger, check=False)
    record = report.record() | fp
    if not report.holds:
        raise VerificationError(json.dumps(record))
    return [record]


def _load_source(args) -> MarkovSource | SideInfoSource:
    try:
        return load_spec(args.spec)
    except OSError as exc:
        raise UsageError(f"cannot read source description {args.spec}: {exc.strerror}") from None


COMMANDS = {"predict": cmd_predict, "simulate": cmd_simulate, "bench": cmd_bench, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        records = COMMANDS[args.mode](args)
    except UsageError as exc:
        print(f"ergodic-predict: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputParseError, MalformedInputError) as exc:
        print(f"ergodic-predict: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"ergodic-predict: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"ergodic-predict: bad source spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"ergodic-predict: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ValueError as exc:
        print(f"ergodic-predict: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.mode != "simulate" and args.output:
        with open(args.output, "w", newline="") as fh:
            write_records(records, args.format, fh)
        return EXIT_OK
    try:
        write_records(records, args.format, sys.stdout)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error of ours
        devnull = open(os.devnull, "w")
        os.dup2(devnull.fileno(), sys.stdout.fileno())
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
