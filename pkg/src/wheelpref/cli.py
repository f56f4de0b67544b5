"""Command-line driver for the full pipeline.

Every subcommand reads an optional flat key=value config file, applies
--set overrides, and operates on one store directory. Exit codes: 0 on
success, 2 for config/usage errors, 3 when a prerequisite artifact is
missing (the message names its path), 1 for anything else. Errors are a
single `error: <category>: <detail>` line on stderr.
"""

import argparse
import json
import sys

from . import pipeline
from .choice_model import DataError
from .cluster import ParameterError
from .config import ConfigError, load_config
from .ensemble import PopulationError, StateError
from .mmvae import TrainingError
from .pca import RankError
from .store import Store, StoreError


def _common(parser):
    parser.add_argument("--store", default="store", help="store directory (default: store)")
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    parser.add_argument("--seed", type=int, default=None, help="override the seed key")


def build_parser():
    parser = argparse.ArgumentParser(prog="wheelpref")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="procedurally generate the design pool")
    _common(p)
    p.add_argument("--n", type=int, default=None, help="number of designs")

    _common(sub.add_parser("featurize", help="morphology + performance features"))
    _common(sub.add_parser("pca-fit", help="fit the label pipeline, write labels"))
    _common(sub.add_parser("vae-train", help="train the multi-modal VAE"))

    p = sub.add_parser("survey-sim", help="simulate a survey population")
    _common(p)
    p.add_argument("--respondents", type=int, default=None)
    p.add_argument("--groups", type=int, default=None)

    p = sub.add_parser("train-individual", help="per-respondent choice models")
    _common(p)
    p.add_argument("--respondent", default=None, help="train one respondent only")

    _common(sub.add_parser("train-population", help="pooled population model"))

    p = sub.add_parser("train-ensemble", help="similarity-weighted ensembles")
    _common(p)
    p.add_argument("--respondent", default=None, help="train one owner only")

    p = sub.add_parser("recommend", help="top-n designs for a respondent")
    _common(p)
    p.add_argument("--respondent", required=True)
    p.add_argument("--n", type=int, default=10)

    _common(sub.add_parser("report", help="clustering, variance, demographics"))
    _common(sub.add_parser("eval", help="method comparison on test questions"))

    p = sub.add_parser("serve", help="run the HTTP service")
    _common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def run(args):
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = args.seed
    store = Store(args.store)

    if args.command == "generate":
        n = pipeline.generate(store, cfg, n=args.n)
        print(f"generated {n} designs under {store.designs_dir}")
    elif args.command == "featurize":
        n = pipeline.featurize(store, cfg)
        print(f"featurized {n} designs -> {store.features_path}")
    elif args.command == "pca-fit":
        n = pipeline.pca_fit(store, cfg)
        print(f"labeled {n} designs -> {store.labels_path}")
    elif args.command == "vae-train":
        epochs = pipeline.vae_train(store, cfg)
        print(f"trained VAE for {epochs} epochs -> {store.vae_path}")
    elif args.command == "survey-sim":
        n = pipeline.survey_sim(store, cfg, r=args.respondents, g=args.groups)
        print(f"simulated {n} respondents -> {store.responses_path}")
    elif args.command == "train-individual":
        metrics = pipeline.train_individual_cmd(store, cfg, args.respondent)
        for rid, m in sorted(metrics.items()):
            print(f"{rid} train={m['train_acc']:.3f} val={m['val_acc']:.3f} "
                  f"test={m['test_acc']:.3f}")
    elif args.command == "train-population":
        m = pipeline.train_population_cmd(store, cfg)
        print(f"population train={m['train_acc']:.3f} val={m['val_acc']:.3f} "
              f"test={m['test_acc']:.3f}")
    elif args.command == "train-ensemble":
        metrics = pipeline.train_ensemble_cmd(store, cfg, args.respondent)
        for rid, m in sorted(metrics.items()):
            print(f"{rid} train={m['train_acc']:.3f} val={m['val_acc']:.3f}")
    elif args.command == "recommend":
        doc = pipeline.recommend_cmd(store, cfg, args.respondent, args.n)
        print(json.dumps(doc, sort_keys=True))
    elif args.command == "report":
        report = pipeline.report_cmd(store, cfg)
        print(f"k={report.k} -> {store.reports_dir}")
    elif args.command == "eval":
        pipeline.eval_cmd(store, cfg)
        print(f"wrote {store.eval_path}")
    elif args.command == "serve":
        import uvicorn
        from .service import make_app
        uvicorn.run(make_app(store, cfg), host=args.host, port=args.port)
    return 0


_ERROR_KINDS = [
    (ConfigError, "config", 2),
    (pipeline.MissingArtifactError, "missing-artifact", 3),
    (DataError, "data", 1),
    (ParameterError, "parameter", 1),
    (PopulationError, "population", 1),
    (StateError, "state", 1),
    (StoreError, "store", 1),
    (RankError, "rank", 1),
    (TrainingError, "training", 1),
    (OSError, "io", 1),
    (KeyError, "data", 1),
    (ValueError, "value", 1),
    (RuntimeError, "runtime", 1),
]


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except tuple(kind for kind, _, _ in _ERROR_KINDS) as exc:
        for kind, label, code in _ERROR_KINDS:
            if isinstance(exc, kind):
                if isinstance(exc, pipeline.MissingArtifactError):
                    detail = exc.path
                else:
                    detail = " ".join(str(exc).split())
                print(f"error: {label}: {detail}", file=sys.stderr)
                return code
    return 1


if __name__ == "__main__":
    sys.exit(main())
