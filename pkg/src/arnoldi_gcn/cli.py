"""Command-line entry point: ``arnoldi-gcn <subcommand> --flag value ...``."""
from __future__ import annotations

import argparse
import contextlib
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .approx import (
    arnoldi_basis,
    arnoldi_fit,
    basis_orthonormality_condition,
    build_vandermonde,
    condition_number,
    evaluate_approximant,
    solve_vandermonde_qr,
    vandermonde_kappa_bound,
)
from .filters import BUILTIN_NAMES, builtin_filter, eval_filter
from .gcn import (
    GraphData,
    PropagationMode,
    SplitSpec,
    TrainConfig,
    build_plan,
    load_model,
    make_split,
    predict,
    save_model,
    score,
    train,
)
from .graph import (
    load_edge_list,
    read_features,
    read_labels,
    sbm_generate,
    save_edge_list,
    write_features,
    write_labels,
)
from .sampling import Interval, Scheme, sample

SCHEMES = [s.value for s in Scheme]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _bool(text):
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _csv_ints(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arnoldi-gcn", description="Explicit spectral filters via Arnoldi polynomial fits.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", default="-", help="output path (default: stdout)")
        return sp

    s = add("sample", "print sample points for a scheme")
    s.add_argument("--scheme", choices=SCHEMES, required=True)
    s.add_argument("--lower", type=float, required=True)
    s.add_argument("--upper", type=float, required=True)
    s.add_argument("--r", type=int, required=True)

    s = add("filter-eval", "tabulate a built-in filter over its domain")
    s.add_argument("--filter", choices=BUILTIN_NAMES, required=True)
    s.add_argument("--alpha", type=float)
    s.add_argument("--grid", type=int, default=1000)

    s = add("approx", "fit a filter polynomial and report its error")
    s.add_argument("--filter", choices=BUILTIN_NAMES, required=True)
    s.add_argument("--alpha", type=float)
    s.add_argument("--scheme", choices=SCHEMES, default="chebyshev")
    s.add_argument("--r", type=int, default=40)
    s.add_argument("--K", type=int, default=40)
    s.add_argument("--method", choices=["arnoldi", "vandermonde"], default="arnoldi")
    s.add_argument("--grid", type=int, default=1000)
    s.add_argument("--emit-monomial", action="store_true")
    s.add_argument("--curve-out", help="write the error curve table here")

    s = add("condition", "Vandermonde vs Arnoldi conditioning sweep (r = K)")
    s.add_argument("--scheme", choices=SCHEMES, required=True)
    s.add_argument("--lower", type=float, required=True)
    s.add_argument("--upper", type=float, required=True)
    s.add_argument("--r-list", type=_csv_ints, default=[40])

    s = add("synth", "generate a stochastic block model dataset")
    s.add_argument("--blocks", type=_csv_ints, required=True)
    s.add_argument("--p-in", type=float, required=True)
    s.add_argument("--p-out", type=float, required=True)
    s.add_argument("--feature-dim", type=int, required=True)
    s.add_argument("--feature-shift", type=float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out-prefix", required=True)

    s = add("train", "train Arnoldi-GCN / G-Arnoldi-GCN")
    s.add_argument("--edges", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--filter", choices=BUILTIN_NAMES, required=True)
    s.add_argument("--alpha", type=float)
    s.add_argument("--scheme", choices=SCHEMES, default="chebyshev")
    s.add_argument("--K", type=int, default=10)
    s.add_argument("--r", type=int, help="sample count (default K + 1)")
    s.add_argument("--mode", choices=[m.value for m in PropagationMode], default="recurrence")
    s.add_argument("--learn-gamma", type=_bool, default=False)
    s.add_argument("--train-frac", type=float, default=0.6)
    s.add_argument("--val-frac", type=float, default=0.2)
    s.add_argument("--lr", type=float, default=0.01)
    s.add_argument("--prop-lr", type=float)
    s.add_argument("--weight-decay", type=float, default=5e-4)
    s.add_argument("--dropout", type=float, default=0.5)
    s.add_argument("--prop-dropout", type=float, default=0.0)
    s.add_argument("--epochs", type=int, default=1000)
    s.add_argument("--patience", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--model-out")

    s = add("evaluate", "score a saved model")
    s.add_argument("--model", required=True)
    s.add_argument("--edges", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--mask", choices=["test", "all"], default="test")
    s.add_argument("--split-seed", type=int)
    return p


@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _header(args):
    flags = {k: v for k, v in vars(args).items() if k != "command"}
    seed = flags.get("seed", None)
    text = " ".join(f"--{k.replace('_', '-')}={v}" for k, v in sorted(flags.items()))
    return f"# arnoldi-gcn {__version__} {args.command} seed={seed} {text}\n"


def _load_data(args):
    with open(args.edges) as fh:
        graph = load_edge_list(fh)
    with open(args.features) as fh:
        X = read_features(fh)
    with open(args.labels) as fh:
        y = read_labels(fh, X.shape[0])
    if graph.node_count < X.shape[0]:
        with open(args.edges) as fh:
            graph = load_edge_list(fh, X.shape[0])
    if graph.node_count != X.shape[0]:
        raise ValueError(f"edge list covers {graph.node_count} nodes, features cover {X.shape[0]}")
    return GraphData(graph, X, y)


def _filter(args):
    return builtin_filter(args.filter, args.alpha)


def cmd_sample(args, out):
    pts = sample(args.scheme, Interval(args.lower, args.upper), args.r).points
    out.write("omega\n")
    for x in pts:
        out.write(_fmt(x) + "\n")


def cmd_filter_eval(args, out):
    spec = _filter(args)
    if spec.alpha is not None:
        out.write(f"# alpha={spec.alpha}\n")
    x = np.linspace(spec.domain.lower, spec.domain.upper, args.grid)
    y = eval_filter(spec, x)
    out.write("omega,value\n")
    for a, b in zip(x, y):
        out.write(f"{_fmt(a)},{_fmt(b)}\n")


def fit_filter(spec, scheme, r, K, method, emit_monomial=False):
    samples = sample(scheme, spec.domain, r)
    g = eval_filter(spec, samples)
    if method == "vandermonde":
        return solve_vandermonde_qr(build_vandermonde(samples, K), g, spec.name)
    return arnoldi_fit(samples, g, K, spec.name, emit_monomial=emit_monomial)


def cmd_approx(args, out):
    spec = _filter(args)
    approx = fit_filter(spec, args.scheme, args.r, args.K, args.method, args.emit_monomial)
    x = np.linspace(spec.domain.lower, spec.domain.upper, args.grid)
    truth = spec(x)
    with np.errstate(all="ignore"):
        est = evaluate_approximant(approx, x)
    err = np.abs(est - truth)
    max_err = float(np.max(err)) if np.all(np.isfinite(err)) else math.inf
    out.write(f"# max_abs_error={_fmt(max_err)}\n")
    out.write(f"# degree={approx.degree} monomial_trusted={str(approx.monomial_trusted).lower()}\n")
    out.write("index,basis_coefficient,monomial_coefficient\n")
    basis = approx.basis_coefficients
    mono = approx.monomial_coefficients
    for k in range(approx.degree + 1):
        b = basis[k] if basis is not None else None
        m = mono[k] if mono is not None else None
        out.write(f"{k},{_fmt(b)},{_fmt(m)}\n")
    if args.curve_out:
        with _open_out(args.curve_out) as fh:
            fh.write(_header(args))
            fh.write("omega,true_value,approx_value,abs_error\n")
            for row in zip(x, truth, est, err):
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def cmd_condition(args, out):
    iv = Interval(args.lower, args.upper)
    out.write("r,kappa_vandermonde,theorem1_bound,kappa_arnoldi_gram\n")
    for r in args.r_list:
        s = sample(args.scheme, iv, r)
        kv = condition_number(build_vandermonde(s, r).entries).condition_number
        kq = basis_orthonormality_condition(arnoldi_basis(s, r)).condition_number
        bound = vandermonde_kappa_bound(r, iv)
        out.write(f"{r},{_fmt(kv)},{_fmt(bound)},{_fmt(kq)}\n")


def cmd_synth(args, out):
    graph, X, y = sbm_generate(args.blocks, args.p_in, args.p_out, args.feature_dim,
                               args.feature_shift, args.seed)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    paths = {k: Path(f"{prefix}.{k}") for k in ("edges", "features", "labels")}
    with open(paths["edges"], "w") as fh:
        fh.write(_header(args))
        save_edge_list(graph, fh)
    with open(paths["features"], "w") as fh:
        write_features(X, fh)
    with open(paths["labels"], "w") as fh:
        write_labels(y, fh)
    out.write("file,rows\n")
    out.write(f"{paths['edges']},{graph.edge_count}\n")
    out.write(f"{paths['features']},{X.shape[0]}\n")
    out.write(f"{paths['labels']},{len(y)}\n")


def _test_metric(probs, labels, mask):
    s = score(probs, labels, mask)
    if s["auroc"] is not None:
        return "auroc", s["auroc"]
    return "accuracy", s["accuracy"]


def cmd_train(args, out):
    data = _load_data(args)
    spec = _filter(args)
    plan = build_plan(data.graph, spec, args.scheme, args.K, args.r, args.mode)
    test_frac = 1.0 - args.train_frac - args.val_frac
    split = SplitSpec(args.train_frac, args.val_frac, test_frac, args.seed)
    config = TrainConfig(
        learning_rate=args.lr, weight_decay=args.weight_decay, dropout=args.dropout,
        epochs=args.epochs, patience=args.patience, seed=args.seed, learn_gamma=args.learn_gamma,
        propagation_learning_rate=args.prop_lr, propagation_dropout=args.prop_dropout,
    )
    params, trace, (_, _, test_idx) = train(data, plan, config, split)
    metric, value = _test_metric(predict(params, plan, data.features), data.labels, test_idx)
    dataset = Path(args.edges).stem
    out.write(f"# summary dataset,filter,scheme,K,mode,seed,test_{metric}\n")
    out.write(f"# summary {dataset},{spec.name},{args.scheme},{args.K},{plan.mode.value},{args.seed},{_fmt(value)}\n")
    out.write("epoch,train_loss,val_accuracy\n")
    for row in trace:
        out.write(f"{row.epoch},{_fmt(row.train_loss)},{_fmt(row.val_accuracy)}\n")
    if args.model_out:
        meta = {
            "version": __version__, "filter": spec.name, "alpha": spec.alpha if spec.alpha is not None else "none",
            "scheme": args.scheme, "K": args.K, "r": plan.approximant.basis.samples.points.size,
            "mode": plan.mode.value, "train_frac": repr(split.train_fraction),
            "val_frac": repr(split.val_fraction), "test_frac": repr(split.test_fraction),
            "split_seed": args.seed,
        }
        with open(args.model_out, "w") as fh:
            save_model(fh, params, meta)


def cmd_evaluate(args, out):
    with open(args.model) as fh:
        params, meta = load_model(fh)
    data = _load_data(args)
    alpha = None if meta.get("alpha", "none") == "none" else float(meta["alpha"])
    spec = builtin_filter(meta["filter"], alpha)
    plan = build_plan(data.graph, spec, meta["scheme"], int(meta["K"]), int(meta["r"]), meta["mode"])
    probs = predict(params, plan, data.features)
    if args.mask == "all":
        mask = np.arange(data.graph.node_count)
    else:
        seed = int(meta["split_seed"]) if args.split_seed is None else args.split_seed
        split = SplitSpec(float(meta["train_frac"]), float(meta["val_frac"]), float(meta["test_frac"]), seed)
        mask = make_split(data.graph.node_count, data.labels, split)[2]
    s = score(probs, data.labels, mask)
    out.write("mask,accuracy,auroc\n")
    out.write(f"{args.mask},{_fmt(s['accuracy'])},{_fmt(s['auroc'])}\n")


COMMANDS = {
    "sample": cmd_sample,
    "filter-eval": cmd_filter_eval,
    "approx": cmd_approx,
    "condition": cmd_condition,
    "synth": cmd_synth,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
}


def _reject_unknown_flags(parser, argv):
    # argparse reports missing required flags before unknown ones; name the unknown flag first
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    if not argv or argv[0] not in sub.choices:
        return
    sp = sub.choices[argv[0]]
    for tok in argv[1:]:
        if tok.startswith("--"):
            flag = tok.split("=", 1)[0]
            if flag not in sp._option_string_actions:
                raise UsageError(f"unknown flag {flag} for '{argv[0]}'\n{sp.format_usage().rstrip()}")


def run(argv=None) -> int:
    """Run one subcommand; 0 on success, 2 on usage errors, 1 on runtime errors."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        _reject_unknown_flags(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"arnoldi-gcn: error: {exc}\n")
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        with _open_out(args.out) as out:
            out.write(_header(args))
            COMMANDS[args.command](args, out)
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"arnoldi-gcn {args.command}: {exc}\n")
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
