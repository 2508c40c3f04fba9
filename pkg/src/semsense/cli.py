"""Command-line entry point: ``semsense <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import codec as cd
from . import contest as ct
from . import experiments as ex
from . import io as sio
from . import space as sp
from .signal_model import DatasetConfig, InvalidConfigError, make_activity_dataset, trace_seed

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
log = logging.getLogger("semsense")


def _cmd_run(args) -> int:
    cfg = ex.load_config(args.config, seed=args.seed, output_dir=args.out)
    report = ex.run(cfg)
    print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_synth(args) -> int:
    cfg = DatasetConfig(classes=tuple(args.classes), traces_per_class=args.traces_per_class,
                        duration_s=args.duration, sample_rate_hz=args.sample_rate,
                        n_subcarriers=args.subcarriers, rng_seed=args.seed)
    traces = make_activity_dataset(cfg, link=args.link)
    seeds = []
    for ci in range(len(cfg.classes)):
        for ti in range(cfg.traces_per_class):
            seeds.append(int(trace_seed(cfg.rng_seed, ci, ti, args.link).generate_state(1, dtype=np.uint64)[0]))
    manifest = sio.write_dataset(args.out, traces, seeds)
    print(f"wrote {len(traces)} traces, manifest {manifest}")
    return EXIT_OK


def _codec_config(args) -> cd.CodecConfig:
    return cd.CodecConfig(fit_error_threshold=args.threshold, feature_bits_per_value=args.bits)


def _cmd_encode(args) -> int:
    ccfg = _codec_config(args)
    traces = sio.ingest_csv(args.trace)
    out = []
    for tr in traces:
        code = cd.encode(tr, ccfg)
        d = code.to_json()
        d["payload_bits"] = cd.payload_bits(code, ccfg)
        d["label"] = tr.label
        out.append(d)
    text = json.dumps(out[0] if len(out) == 1 else out, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def _cmd_classify(args) -> int:
    ccfg = _codec_config(args)
    train = sio.ingest_csv(args.train)
    test = sio.ingest_csv(args.test)
    if any(t.label is None for t in train):
        raise InvalidConfigError("every training trace needs a label")
    ts = sp.build_training_set((cd.encode(t, ccfg), t.label) for t in train)
    knn = sp.KnnConfig(args.k, tie_break_seed=args.seed)
    rows, hits = [], 0
    for i, tr in enumerate(test):
        pred = sp.classify(sp.to_point(cd.encode(tr, ccfg)), ts, knn)
        hits += pred == tr.label
        rows.append({"trace_id": i, "true_label": tr.label, "predicted_label": pred, "link_count": 1})
    if args.out:
        sp.write_classification_report(args.out, rows)
    if args.save_training:
        ts.save(args.save_training)
    labelled = sum(t.label is not None for t in test)
    summary = {"n_test": len(test), "accuracy": hits / labelled if labelled else None}
    print(json.dumps(summary))
    return EXIT_OK


def _cmd_contest(args) -> int:
    profiles = ct.reference_profiles(args.rates)
    cfg = ct.MarketConfig(len(profiles), args.n_awards, args.total_award, args.delta, args.risk,
                          use_semantic=not args.raw)
    if args.prizes:
        scheme = ct.AwardScheme(tuple(args.prizes))
    elif args.scheme == "optimal":
        scheme = ct.optimal_awards(profiles, cfg)
    elif args.scheme == "wta":
        scheme = ct.AwardScheme.winner_take_all(cfg.total_award, cfg.n_awards)
    else:
        scheme = ct.AwardScheme.uniform(cfg.total_award, cfg.n_awards)
    result = ct.market_summary(profiles, cfg, scheme)
    if args.out:
        ct.write_market_json(args.out, result, scheme)
    print(json.dumps(result.to_json(scheme), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semsense", description="Semantic WiFi-sensing pipeline and sensing-data market.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides config)")
    r.add_argument("--seed", type=int, default=None, help="rng seed (overrides config)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("synth", help="generate a labelled synthetic dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--classes", nargs="+", default=["falling", "walking", "sitting", "standing"])
    s.add_argument("--traces-per-class", type=int, default=10)
    s.add_argument("--duration", type=float, default=2.0)
    s.add_argument("--sample-rate", type=float, default=600.0)
    s.add_argument("--subcarriers", type=int, default=1)
    s.add_argument("--link", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_synth)

    for name, helptext in (("encode", "encode a trace CSV or manifest"), ("classify", "kNN-classify test traces")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--threshold", type=float, default=0.10, help="fit-error threshold")
        c.add_argument("--bits", type=int, default=32, choices=(16, 32, 64), help="bits per feature value")
        c.add_argument("--out", default=None)
        if name == "encode":
            c.add_argument("trace")
            c.set_defaults(func=_cmd_encode)
        else:
            c.add_argument("--train", required=True, help="training manifest or CSV")
            c.add_argument("--test", required=True, help="test manifest or CSV")
            c.add_argument("-k", type=int, default=3)
            c.add_argument("--seed", type=int, default=0)
            c.add_argument("--save-training", default=None)
            c.set_defaults(func=_cmd_classify)

    m = sub.add_parser("contest", help="equilibrium efforts for a sensing-data market")
    m.add_argument("--rates", type=float, nargs="+", default=[7e6, 6e6, 5e6])
    m.add_argument("--n-awards", type=int, default=2)
    m.add_argument("--total-award", type=float, default=10.0)
    m.add_argument("--delta", type=float, default=8e6)
    m.add_argument("--risk", choices=("neutral", "averse"), default="neutral")
    m.add_argument("--raw", action="store_true", help="raw uploads instead of semantic codes")
    m.add_argument("--scheme", choices=("optimal", "wta", "uniform"), default="optimal")
    m.add_argument("--prizes", type=float, nargs="+", default=None)
    m.add_argument("--out", default=None)
    m.set_defaults(func=_cmd_contest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ex.ConfigError, InvalidConfigError, ct.InvalidMarketError, sio.SchemaMismatchError,
            FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure past config is a runtime error
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
