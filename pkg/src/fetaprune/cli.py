"""Command-line entry point: ``fetaprune {train,prune,baseline,bounds,bench}``.

Every command writes CSV to stdout (or ``--csv PATH``) with a header row.
Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from pathlib import Path

from . import experiments as ex
from .baselines import compression_ratio
from .bounds import ANALYSIS_COLUMNS, ManifoldParams, analysis_rows, analyze_pruning
from .data import IdxError, load_idx, synth_blobs, train_test_split
from .feta import PruneConfig
from .network import (
    ModelFormatError, accuracy, capture_layer_io, folded_weights, load_model, save_model)
from .numerics import DimensionError, DivergenceError, ValidationError
from .objective import layer_mse
from .regularizers import Regularizer
from .solver import SolverParams

log = logging.getLogger("fetaprune")

PRUNE_COLUMNS = ("method", "layer", "lambda", "sparsity", "cr", "layer_mse",
                 "acc_before", "acc_after", "seconds")
TRAIN_COLUMNS = ("train_acc", "test_acc", "n_train", "n_test", "seconds")
BENCH_COLUMNS = ("d1", "d2", "n", "reps", "median_seconds", "slope")

EPILOG = f"""\
CSV schemas (header row always written):
  train            {','.join(TRAIN_COLUMNS)}
  prune, baseline  {','.join(PRUNE_COLUMNS)}
  bounds           {','.join(ANALYSIS_COLUMNS)}
  bench            {','.join(BENCH_COLUMNS)}

For prune/baseline, sparsity is the fraction of zero weights (bias excluded)
and cr is the stored fraction of the layer: 1 - sparsity for sparse methods,
(k*d1 + k + k*d2)/(d1*d2) for rank-k factorizations. Baseline rows put their
knob (--sparsity or --rank) in the lambda column. Only the seconds and
median_seconds columns depend on the clock; everything else is determined by
the flags and seeds. Bounds that are vacuous are written as VACUOUS.

Exit codes: 0 success, 1 numerical failure (divergence, or only vacuous
bounds under --require-finite), 2 usage error.
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def _add_dataset_flags(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--dataset", choices=("blobs", "idx"), default="blobs")
    g.add_argument("--data-seed", type=int, default=0,
                   help="seed of the blob generator and of the train/test split")
    g.add_argument("--classes", type=int, default=ex.REFERENCE_BLOBS["classes"])
    g.add_argument("--dim", type=int, default=ex.REFERENCE_BLOBS["dim"])
    g.add_argument("--per-class", type=int, default=ex.REFERENCE_BLOBS["per_class"])
    g.add_argument("--spread", type=float, default=ex.REFERENCE_BLOBS["spread"])
    g.add_argument("--latent-dim", type=int, default=ex.REFERENCE_BLOBS["latent_dim"],
                   help="0 draws blobs directly in feature space")
    g.add_argument("--noise", type=float, default=ex.REFERENCE_BLOBS["noise"])
    g.add_argument("--test-fraction", type=float, default=0.25)
    g.add_argument("--train-images", type=Path)
    g.add_argument("--train-labels", type=Path)
    g.add_argument("--test-images", type=Path)
    g.add_argument("--test-labels", type=Path)
    g.add_argument("--limit", type=int, help="use only the first N IDX items")


def _add_solver_flags(p):
    d = SolverParams()
    g = p.add_argument_group("solver")
    g.add_argument("--outer-iters", type=int, default=PruneConfig().outer_iters)
    g.add_argument("--epochs", type=int, default=d.epochs)
    g.add_argument("--eta", type=float, default=d.step_eta)
    g.add_argument("--minibatch", type=int, default=d.minibatch)
    g.add_argument("--momentum", type=float, default=d.momentum_beta)
    g.add_argument("--tol", type=float, default=PruneConfig().convergence_tol)


def _add_output_flag(p):
    p.add_argument("--csv", type=Path, help="write CSV here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="fetaprune", description="Layerwise DC pruning of dense networks.",
                     epilog=EPILOG, formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train an MLP and save it", epilog=EPILOG,
                       formatter_class=fmt)
    _add_dataset_flags(p)
    p.add_argument("--hidden", type=_int_list,
                   default=list(ex.REFERENCE_HIDDEN), help="hidden widths, e.g. 128,64")
    p.add_argument("--epochs", type=int, default=ex.TRAIN_EPOCHS)
    p.add_argument("--lr", type=float, default=ex.TRAIN_LR)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    _add_output_flag(p)

    p = sub.add_parser("prune", help="prune one layer with FeTa", epilog=EPILOG,
                       formatter_class=fmt)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--reg", choices=("l1", "nuclear"), default="l1")
    p.add_argument("--lambda", dest="lambdas", type=_float_list, action="append",
                   help="regularization weight; repeat or comma-separate for a sweep")
    p.add_argument("--sparsity-target", type=float,
                   help="bisect lambda to reach this sparsity (within 0.01)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="pruned model path (last run of a sweep)")
    _add_dataset_flags(p)
    _add_solver_flags(p)
    _add_output_flag(p)

    p = sub.add_parser("baseline", help="threshold or truncated-SVD baseline",
                       epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--method", choices=("threshold", "svd"), required=True)
    p.add_argument("--sparsity", type=float)
    p.add_argument("--rank", type=int)
    p.add_argument("--out", type=Path)
    _add_dataset_flags(p)
    _add_output_flag(p)

    p = sub.add_parser("bounds", help="generalization bounds for a pruned model",
                       epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--pruned-model", type=Path, required=True)
    p.add_argument("--k", type=float, required=True, help="intrinsic dimension of the data")
    p.add_argument("--Cm", type=float, default=1.0, help="covering constant of the manifold")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--base-ge", type=float,
                   help="GE of the unpruned net (default: measured train/test gap)")
    p.add_argument("--format", choices=("csv", "table"), default="csv")
    p.add_argument("--require-finite", action="store_true",
                   help="exit 1 when every bound is vacuous")
    _add_dataset_flags(p)
    _add_output_flag(p)

    p = sub.add_parser("bench", help="runtime scaling in the input dimension",
                       epilog=EPILOG, formatter_class=fmt)
    p.add_argument("--d1-list", type=_int_list, default=[500, 1000, 2000])
    p.add_argument("--d2", type=int, default=10)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=3)
    _add_output_flag(p)
    return parser


# -- helpers -----------------------------------------------------------------

def _check_readable(*paths):
    for path in paths:
        if path is not None and not path.is_file():
            raise UsageError(f"no such file: {path}")


def load_dataset(args):
    """``(train, test)`` according to the dataset flags; test may be None."""
    if args.dataset == "idx":
        if args.train_images is None or args.train_labels is None:
            raise UsageError("--dataset idx needs --train-images and --train-labels")
        if (args.test_images is None) != (args.test_labels is None):
            raise UsageError("give both --test-images and --test-labels, or neither")
        _check_readable(args.train_images, args.train_labels,
                        args.test_images, args.test_labels)
        if args.limit is not None and args.limit < 1:
            raise UsageError("--limit must be >= 1")
        train = load_idx(args.train_images, args.train_labels, limit=args.limit)
        test = None
        if args.test_images is not None:
            test = load_idx(args.test_images, args.test_labels, train.n_classes,
                            limit=args.limit)
        return train, test
    full = synth_blobs(args.classes, args.dim, args.per_class, args.spread,
                       seed=args.data_seed, latent_dim=args.latent_dim or None,
                       noise=args.noise)
    return train_test_split(full, args.test_fraction, seed=args.data_seed)


def _load_model(path):
    _check_readable(path)
    return load_model(path)


def _check_layer(net, layer):
    if not 0 <= layer < net.depth:
        raise UsageError(f"layer {layer} out of range for a {net.depth}-layer model")
    if layer == net.depth - 1:
        raise UsageError(f"layer {layer} is the linear output layer and cannot be pruned")


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "NA"
        return repr(x)
    return x


def write_csv(args, columns, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", restval="")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    text = buf.getvalue()
    if getattr(args, "csv", None) is not None:
        args.csv.write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _prune_row(method, layer, lam, sparsity, cr, mse, before, after, seconds):
    return dict(method=method, layer=layer, **{"lambda": lam}, sparsity=sparsity, cr=cr,
                layer_mse=mse, acc_before=before, acc_after=after, seconds=seconds)


# -- commands ----------------------------------------------------------------

def cmd_train(args):
    if args.epochs < 0 or args.batch_size < 1:
        raise UsageError("--epochs must be >= 0 and --batch-size >= 1")
    if any(h < 1 for h in args.hidden):
        raise UsageError("hidden widths must be >= 1")
    train, test = load_dataset(args)
    t0 = time.perf_counter()
    net = ex.train_reference(train, args.seed, hidden=tuple(args.hidden),
                             epochs=args.epochs, lr=args.lr)
    seconds = time.perf_counter() - t0
    save_model(net, args.out)
    row = dict(train_acc=accuracy(net, train),
               test_acc=accuracy(net, test) if test is not None else math.nan,
               n_train=len(train), n_test=len(test) if test is not None else 0,
               seconds=seconds)
    write_csv(args, TRAIN_COLUMNS, [row])
    return 0


def _prune_config(args, lam):
    solver = SolverParams(epochs=args.epochs, step_eta=args.eta, minibatch=args.minibatch,
                          momentum_beta=args.momentum, seed=args.seed)
    return PruneConfig(reg=Regularizer(args.reg, lam), outer_iters=args.outer_iters,
                       solver=solver, convergence_tol=args.tol)


def cmd_prune(args):
    if args.lambdas is None and args.sparsity_target is None:
        raise UsageError("give --lambda or --sparsity-target")
    if args.lambdas is not None and args.sparsity_target is not None:
        raise UsageError("--lambda and --sparsity-target are exclusive")
    if args.sparsity_target is not None and not 0 <= args.sparsity_target <= 1:
        raise UsageError("--sparsity-target must lie in [0, 1]")
    lambdas = [lam for group in (args.lambdas or []) for lam in group]
    if any(not lam >= 0 for lam in lambdas):
        raise UsageError("--lambda must be nonnegative")
    net = _load_model(args.model)
    _check_layer(net, args.layer)
    train, test = load_dataset(args)
    if train.inputs.shape[1] != net.layers[0].d_in:
        raise UsageError("dataset dimension does not match the model input")
    evalset = test if test is not None else train
    before = accuracy(net, evalset)
    runs = [(lam, None) for lam in lambdas] if lambdas else [(0.0, args.sparsity_target)]
    rows, pruned = [], net
    for lam, target in runs:
        cfg = _prune_config(args, lam)
        t0 = time.perf_counter()
        pruned, lam_used, res = ex.feta_layer(net, train, args.layer, cfg, target)
        seconds = time.perf_counter() - t0
        w = pruned.layers[args.layer].weights
        if args.reg == "nuclear":
            d1, d2 = w.shape
            cr = compression_ratio(d1, d2, res.rank)
            sp = float((w == 0).mean())
        else:
            sp = res.achieved_sparsity
            cr = 1.0 - sp
        rows.append(_prune_row(f"feta-{args.reg}", args.layer, lam_used, sp, cr,
                               res.layer_mse, before, accuracy(pruned, evalset), seconds))
    if args.out is not None:
        save_model(pruned, args.out)
    write_csv(args, PRUNE_COLUMNS, rows)
    return 0


def cmd_baseline(args):
    if args.method == "threshold":
        if args.sparsity is None or args.rank is not None:
            raise UsageError("--method threshold takes --sparsity")
        if not 0 <= args.sparsity <= 1:
            raise UsageError("--sparsity must lie in [0, 1]")
    else:
        if args.rank is None or args.sparsity is not None:
            raise UsageError("--method svd takes --rank")
    net = _load_model(args.model)
    _check_layer(net, args.layer)
    layer = net.layers[args.layer]
    if args.method == "svd" and not 1 <= args.rank <= min(layer.d_in, layer.d_out):
        raise UsageError(f"--rank must lie in [1, {min(layer.d_in, layer.d_out)}]")
    train, test = load_dataset(args)
    evalset = test if test is not None else train
    t0 = time.perf_counter()
    if args.method == "threshold":
        pruned, rep = ex.threshold_layer(net, args.layer, args.sparsity)
        cr, knob = 1.0 - rep.sparsity, rep.knob
    else:
        pruned, rep = ex.svd_layer(net, args.layer, args.rank)
        cr, knob = rep.cr, rep.knob
    seconds = time.perf_counter() - t0
    ld = capture_layer_io(net, train, args.layer).with_bias_column()
    mse = layer_mse(folded_weights(pruned.layers[args.layer]), ld)
    sp = float((pruned.layers[args.layer].weights == 0).mean())
    row = _prune_row(args.method, args.layer, float(knob), sp, cr, mse,
                     accuracy(net, evalset), accuracy(pruned, evalset), seconds)
    if args.out is not None:
        save_model(pruned, args.out)
    write_csv(args, PRUNE_COLUMNS, [row])
    return 0


def _table(an, rows) -> str:
    lines = [f"spectral norms: {', '.join(f'{n:.4g}' for n in an.norms)}",
             f"score min/mean: {an.score_min:.4g} / {an.score_mean:.4g}",
             f"flipped predictions: {an.flipped_fraction:.4f}",
             f"{'bound':<12}{'layer':>6}{'C_emp':>12}{'penalty':>12}{'value':>14}"]
    def num(text, spec):
        return f"{float(text):{spec}}" if text else ""

    for r in rows:
        value = r["value"]
        shown = "VACUOUS" if value == "VACUOUS" else num(value, ".6g")
        lines.append(f"{r['kind']:<12}{str(r.get('layer', '')):>6}"
                     f"{num(r.get('C_emp', ''), '.4g'):>12}"
                     f"{num(r.get('penalty', ''), '.4g'):>12}{shown:>14}")
    return "\n".join(lines) + "\n"


def cmd_bounds(args):
    if not args.k > 0:
        raise UsageError("--k must be positive")
    if not args.Cm > 0:
        raise UsageError("--Cm must be positive")
    if not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    net = _load_model(args.model)
    pruned = _load_model(args.pruned_model)
    if [(l.d_in, l.d_out) for l in net.layers] != [(l.d_in, l.d_out) for l in pruned.layers]:
        raise UsageError("model and pruned model have different architectures")
    train, test = load_dataset(args)
    mp = ManifoldParams(C_M=args.Cm, k=args.k, N_y=train.n_classes, m=len(train),
                        delta=args.delta)
    an = analyze_pruning(net, pruned, train, mp, test=test, base_ge=args.base_ge)
    rows = analysis_rows(an)
    if args.format == "table":
        text = _table(an, rows)
        if args.csv is not None:
            args.csv.write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    else:
        write_csv(args, ANALYSIS_COLUMNS, rows)
    bounds = [an.base, *an.single, an.multi]
    if args.require_finite and all(b.vacuous for b in bounds):
        log.error("every bound is vacuous")
        return 1
    return 0


def cmd_bench(args):
    if args.reps < 1:
        raise UsageError("--reps must be >= 1")
    if not args.d1_list or min(args.d1_list) < 1 or args.d2 < 1 or args.n < 1:
        raise UsageError("--d1-list, --d2 and --n must be positive")
    rows = ex.bench_scaling(args.d1_list, args.d2, args.n, args.seed, args.reps)
    write_csv(args, BENCH_COLUMNS, [vars(r) for r in rows])
    return 0


COMMANDS = dict(train=cmd_train, prune=cmd_prune, baseline=cmd_baseline,
                bounds=cmd_bounds, bench=cmd_bench)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 2
    except SystemExit as err:  # --help
        return int(err.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValidationError, DimensionError, ModelFormatError, IdxError,
            OSError) as err:
        print(f"fetaprune {args.command}: error: {err}", file=sys.stderr)
        return 2
    except DivergenceError as err:
        print(f"fetaprune {args.command}: numerical failure: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
