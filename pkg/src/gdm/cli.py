"""Command-line entry point: ``gdm <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver non-convergence.
Diagnostics go to stderr; data goes to stdout or the requested files.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile

from .bench import COLUMNS, SweepSpec, run_sweep, run_synthetic_sweep, summarize
from .corr import pairwise_correlations, redundancy_rate
from .data import load_libsvm, write_libsvm
from .errors import DataError, GdmError, NonConvergenceError
from .machine import MODEL_VERSION, GdmConfig, SelectionModel, decision_function, final_classifier, fit
from .synth import GroundTruth, SynthConfig, generate, recovery_score

log = logging.getLogger("gdm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temp file and rename; ``-`` means stdout."""
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".gdm-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_config_file(path):
    """Parse a ``key = value`` file (TOML-like subset; ``[sections]`` ignored)."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or (line.startswith("[") and line.endswith("]")):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            out[key.strip().replace("-", "_")] = _parse_value(value.strip())
    return out


def _parse_value(text):
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _index_list(text):
    text = text.strip()
    if text.startswith("["):
        vals = json.loads(text)
    else:
        vals = [t for t in text.replace(" ", "").split(",") if t]
    try:
        return [int(v) for v in vals]
    except (TypeError, ValueError):
        raise UsageError(f"cannot parse index list {text!r}") from None


def _add_gdm_flags(p):
    p.add_argument("--budget", type=int, default=10, help="support features per CRM call (B)")
    p.add_argument("--iterations", type=int, default=10, help="max outer iterations (T)")
    p.add_argument("--tau", type=float, default=0.25, help="correlation slack; |rho| >= 1-tau is 'correlated'")
    p.add_argument("--C", dest="C", type=float, default=1.0, help="SVM trade-off")
    p.add_argument("--tol-sub", type=float, default=1e-6, help="subproblem tolerance")
    p.add_argument("--tol-cut", type=float, default=1e-3, help="relative violation tolerance")
    p.add_argument("--max-inner", type=int, default=10_000, help="inner iteration cap")
    p.add_argument("--seed", type=int, default=0)


def _add_synth_flags(p):
    d = SynthConfig()
    p.add_argument("--samples", type=int, default=d.n_samples)
    p.add_argument("--features", type=int, default=d.n_features)
    p.add_argument("--groups", type=int, default=d.n_groups)
    p.add_argument("--correlated-groups", type=int, default=d.n_correlated_groups)
    p.add_argument("--group-size", default=f"{d.group_size_range[0]},{d.group_size_range[1]}",
                   help="min,max size of correlated groups")
    p.add_argument("--within-corr", type=float, default=d.within_group_corr)
    p.add_argument("--noise-level", type=float, default=d.noise_level)
    p.add_argument("--min-abs-weight", type=float, default=d.min_abs_weight)
    p.add_argument("--test-samples", type=int, default=None)


def build_parser():
    parser = _Parser(prog="gdm", description="Group Discovery Machine feature selection")
    parser.add_argument("--version", action="version", version=MODEL_VERSION)
    parser.add_argument("--config", help="key = value file mirroring the flags; flags win")
    parser.add_argument("--threads", type=int, default=1, help="worker cap for sweeps")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("select", help="fit a model and write it as JSON")
    p.add_argument("--data", help="training data (LIBSVM, optionally gzipped)")
    p.add_argument("--dimensions", type=int, default=None, help="override feature count")
    _add_gdm_flags(p)
    p.add_argument("--target-features", type=int, default=None,
                   help="stop once this many supports are selected (sets the budget)")
    p.add_argument("--with-affiliated", action="store_true",
                   help="train the stored classifier on supports plus affiliated features")
    p.add_argument("--trace-crm", default=None, help="write per-call CRM traces to this JSON file")
    p.add_argument("--out", default="-")

    p = sub.add_parser("predict", help="predict labels with a saved model")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--out", default="-")

    p = sub.add_parser("synth", help="generate a synthetic train/test pair with ground truth")
    _add_synth_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-out")
    p.add_argument("--test-out")
    p.add_argument("--truth-out")

    p = sub.add_parser("eval-recovery", help="score a model against synthetic ground truth")
    p.add_argument("--model")
    p.add_argument("--truth")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default="-")

    p = sub.add_parser("redundancy", help="redundancy rate of a feature set")
    p.add_argument("--data")
    p.add_argument("--dimensions", type=int, default=None)
    p.add_argument("--features", help="0-based indices, comma-separated or a JSON list")
    p.add_argument("--model", help="take the feature set from this model instead")
    p.add_argument("--selected", action="store_true",
                   help="with --model: use supports plus affiliated features")
    p.add_argument("--red-mean-pairs", action="store_true",
                   help="divide by the number of unordered pairs instead of k(k-1)")
    p.add_argument("--pairs-csv", default=None, help="also write per-pair correlations here")
    p.add_argument("--out", default="-")

    p = sub.add_parser("sweep", help="accuracy / redundancy / time over feature counts")
    p.add_argument("--data")
    p.add_argument("--test")
    p.add_argument("--dimensions", type=int, default=None)
    p.add_argument("--synth", action="store_true", help="generate data per seed instead")
    _add_synth_flags(p)
    _add_gdm_flags(p)
    p.add_argument("--counts", default="10,20,30,40,50")
    p.add_argument("--seeds", default="0")
    p.add_argument("--metrics", default="accuracy,red,time")
    p.add_argument("--red-mean-pairs", action="store_true")
    p.add_argument("--time-prep", action="store_true")
    p.add_argument("--out", default="-")
    p.add_argument("--summary", default=None, help="write a JSON summary here")
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): "
                         + ", ".join("--" + n.replace("_", "-") for n in missing))


def _gdm_config(args, **extra):
    return GdmConfig(budget=args.budget, iterations=args.iterations, tau=args.tau, C=args.C,
                     tol_cut=args.tol_cut, tol_sub=args.tol_sub, max_inner=args.max_inner,
                     seed=args.seed, **extra)


def _synth_config(args):
    try:
        lo, hi = (int(v) for v in args.group_size.split(","))
    except ValueError:
        raise UsageError(f"--group-size expects 'min,max', got {args.group_size!r}") from None
    return SynthConfig(n_samples=args.samples, n_features=args.features, n_groups=args.groups,
                       n_correlated_groups=args.correlated_groups, group_size_range=(lo, hi),
                       within_group_corr=args.within_corr, noise_level=args.noise_level,
                       min_abs_weight=args.min_abs_weight, n_test=args.test_samples,
                       seed=args.seed)


def _load_model(path):
    try:
        with open(path) as fh:
            return SelectionModel.from_dict(json.load(fh))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a valid model file ({exc})") from None


def cmd_select(args):
    _require(args, "data")
    config = _gdm_config(args, target_features=args.target_features,
                         with_affiliated=args.with_affiliated)
    data = load_libsvm(args.data, n_features=args.dimensions)
    log.info("loaded %d samples x %d features", data.n_samples, data.n_features)
    model, state = fit(data, config, trace_crm=bool(args.trace_crm))
    log.info("stopped after %d iterations (%s); %d supports",
             len(state.trace), state.stop_reason, len(model.support))
    model.classifier = final_classifier(data, model, config)
    if args.trace_crm:
        atomic_write(args.trace_crm, json.dumps(state.crm_traces, indent=1) + "\n")
    atomic_write(args.out, model.to_json())


def cmd_predict(args):
    _require(args, "model", "data")
    model = _load_model(args.model)
    if model.classifier is None:
        raise DataError(f"{args.model}: model has no trained classifier")
    data = load_libsvm(args.data, n_features=model.n_features)
    scores = decision_function(model.classifier, data)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample", "label", "prediction", "decision"])
    correct = 0
    for i, s in enumerate(scores):
        pred = 1 if s >= 0 else -1
        correct += pred == data.labels[i]
        w.writerow([i, int(data.labels[i]), pred, repr(float(s))])
    print(f"accuracy {correct / data.n_samples:.6f} on {data.n_samples} samples", file=sys.stderr)
    atomic_write(args.out, buf.getvalue())


def cmd_synth(args):
    _require(args, "train_out", "test_out", "truth_out")
    config = _synth_config(args)
    train, test, truth = generate(config)
    for path, ds in ((args.train_out, train), (args.test_out, test)):
        buf = io.StringIO()
        write_libsvm(ds, buf)
        atomic_write(path, buf.getvalue())
    atomic_write(args.truth_out, truth.to_json(config))


def cmd_eval_recovery(args):
    _require(args, "model", "truth")
    model = _load_model(args.model)
    with open(args.truth) as fh:
        truth = GroundTruth.from_dict(json.load(fh))
    rep = recovery_score(model, truth).to_dict()
    if args.format == "json":
        atomic_write(args.out, json.dumps(rep, indent=1) + "\n")
    else:
        keys = [k for k in rep if k != "coverage_per_group"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        w.writerow([rep[k] for k in keys])
        atomic_write(args.out, buf.getvalue())


def cmd_redundancy(args):
    _require(args, "data")
    if bool(args.features) == bool(args.model):
        raise UsageError("give exactly one of --features or --model")
    if args.model:
        model = _load_model(args.model)
        feats = model.selected() if args.selected else model.support
        dims = args.dimensions or model.n_features
    else:
        feats = _index_list(args.features)
        dims = args.dimensions
    data = load_libsvm(args.data, n_features=dims)
    bad = [f for f in feats if not 0 <= f < data.n_features]
    if bad:
        raise DataError(f"feature indices out of range: {bad[:5]}")
    red = redundancy_rate(data, feats, mean_pairs=args.red_mean_pairs)
    if args.pairs_csv:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature_i", "feature_j", "rho"])
        for i, j, rho in pairwise_correlations(data, feats):
            w.writerow([i, j, repr(rho)])
        atomic_write(args.pairs_csv, buf.getvalue())
    atomic_write(args.out, f"{red!r}\n")


def cmd_sweep(args):
    try:
        spec = SweepSpec(feature_counts=_index_list(args.counts), repeats=_index_list(args.seeds),
                         metrics=tuple(m for m in args.metrics.split(",") if m),
                         mean_pairs=args.red_mean_pairs, time_prep=args.time_prep)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    base = _gdm_config(args)
    workers = max(1, args.threads)
    if args.synth:
        rows = run_synthetic_sweep(_synth_config(args), spec, base, workers=workers)
    else:
        _require(args, "data", "test")
        train = load_libsvm(args.data, n_features=args.dimensions)
        test = load_libsvm(args.test, n_features=train.n_features)
        rows = run_sweep(train, test, spec, base, workers=workers)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.summary:
        atomic_write(args.summary, json.dumps(summarize(rows), indent=1) + "\n")
    atomic_write(args.out, buf.getvalue())


COMMANDS = {
    "select": cmd_select,
    "predict": cmd_predict,
    "synth": cmd_synth,
    "eval-recovery": cmd_eval_recovery,
    "redundancy": cmd_redundancy,
    "sweep": cmd_sweep,
}


def _apply_config_file(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = read_config_file(known.config)
    args = parser.parse_args(argv)
    if args.command is None:
        return
    sp = _subparser(parser, args.command)
    dests = {a.dest for a in sp._actions} - {"help"}
    unknown = sorted(set(values) - dests)
    if unknown:
        raise UsageError(f"{known.config}: unknown option(s) for {args.command}: {unknown}")
    sp.set_defaults(**values)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gdm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"gdm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s",
                        level=logging.WARNING - 10 * min(args.verbose, 2))
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("gdm: error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        _subparser(parser, args.command).print_usage(sys.stderr)
        print(f"gdm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonConvergenceError as exc:
        print(f"gdm {args.command}: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DataError, OSError) as exc:
        print(f"gdm {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GdmError as exc:
        print(f"gdm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
