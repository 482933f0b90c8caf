"""Command line entry point: simulate, bounds, ingest, replay, corpus."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import bounds, harness
from .errors import ScqError
from .model import Params, read_truth, write_truth


def _num_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__} values, got {text!r}")

    return parse


def _s_list(text):
    return [x if x == "auto" else int(x) for x in text.split(",")]


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run a seeded sweep and write per-trial results")
    p.add_argument("--config", help="yaml or json file with sweep keys; flags override it")
    p.add_argument("--scenario", choices=bounds.SCENARIOS)
    p.add_argument("--n", type=_num_list(int))
    p.add_argument("--k", type=_num_list(int))
    p.add_argument("--delta", type=_num_list(int))
    p.add_argument("--p", type=_num_list(float))
    p.add_argument("--q", type=_num_list(float))
    p.add_argument("--sigma", type=_num_list(float))
    p.add_argument("--s-size", dest="s_size", type=_s_list)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha-override", dest="alpha_override", type=float)
    p.add_argument("--dataset", help="element_id,label file used as a fixed ground truth")
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="result file (stdout when omitted)")
    p.add_argument("--timing", action="store_true", help="include wall-clock time per trial")
    p.add_argument("--log-dir", help="write each trial's response log here")
    p.add_argument("--svg", help="plot mean of --y against --x to this SVG file")
    p.add_argument("--x", default="s_size")
    p.add_argument("--y", default="gram_error")


def _add_bounds(sub):
    p = sub.add_parser("bounds", help="print thresholds and lower bounds as JSON")
    p.add_argument("--scenario", choices=bounds.SCENARIOS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=int, default=1)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--delta-err", dest="delta_err", type=float, default=0.01)


def _add_ingest(sub):
    p = sub.add_parser("ingest", help="load an element_id,label file and report cluster statistics")
    p.add_argument("path")
    p.add_argument("--delta-max", dest="delta_max", type=int, default=2)
    p.add_argument("--labels", help="comma-separated subset of labels to keep")
    p.add_argument("--truth-out", dest="truth_out", help="write the membership matrix here")


def _add_replay(sub):
    p = sub.add_parser("replay", help="rerun recovery on a response log")
    p.add_argument("--log", required=True)
    p.add_argument("--scenario", choices=bounds.SCENARIOS, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--delta", type=int, default=1)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--s-size", dest="s_size", default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--point", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--truth", help="membership file for scoring")


def _add_corpus(sub):
    p = sub.add_parser("corpus", help="write a synthetic element_id,label file with planted exclusive mass")
    p.add_argument("path")
    p.add_argument("--n", type=int, default=3470)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--delta", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.015)
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="scquery", description="Same-cluster query recovery experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_bounds(sub)
    _add_ingest(sub)
    _add_replay(sub)
    _add_corpus(sub)
    return parser


def _simulate(args):
    data = {}
    if args.config:
        data = harness.ExperimentConfig.from_file(args.config).__dict__.copy()
    for key in harness.CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            data[key] = v
    if "scenario" not in data:
        raise ScqError("a scenario is required (flag or config)")
    config = harness.ExperimentConfig.from_mapping(data)
    if args.log_dir:
        os.makedirs(args.log_dir, exist_ok=True)
    results = list(harness.run_sweep(config, log_dir=args.log_dir))
    text = harness.emit_results(results, config.out, config.format, args.timing)
    if not config.out:
        sys.stdout.write(text)
    if args.svg:
        harness.plot_sweep(results, args.x, args.y, args.svg)
    print(json.dumps(harness.summarize(results)), file=sys.stderr)


def _bounds(args):
    params = Params(n=args.n, k=args.k, delta=args.delta, p=args.p, q=args.q, sigma=args.sigma,
                    epsilon=args.epsilon, ensemble="iid" if args.scenario.endswith("iid") else "uniform")
    report = bounds.bound_report(args.scenario, params, args.delta_err, args.alpha, args.n_min)
    print(json.dumps(report.to_dict(), indent=2))


def _ingest(args):
    labels = args.labels.split(",") if args.labels else None
    truth, stats = harness.ingest_labels(args.path, args.delta_max, labels)
    if args.truth_out:
        write_truth(truth, args.truth_out)
    stats = dict(stats)
    stats.pop("elements")
    print(json.dumps(stats, indent=2))


def _replay(args):
    s = args.s_size if args.s_size == "auto" else int(args.s_size)
    point = dict(n=args.n, k=args.k, delta=args.delta, p=args.p, q=args.q, sigma=args.sigma, s_size=s)
    truth = read_truth(args.truth) if args.truth else None
    summary, _, _ = harness.replay(args.log, args.scenario, point, args.seed, args.point, args.trial,
                                   args.epsilon, args.alpha, truth)
    print(json.dumps(summary, indent=2))


def _corpus(args):
    harness.write_genre_corpus(args.path, args.n, args.k, args.delta, args.alpha, args.seed)


COMMANDS = {"simulate": _simulate, "bounds": _bounds, "ingest": _ingest, "replay": _replay, "corpus": _corpus}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except ScqError as exc:
        print(f"error [{exc.tag}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
