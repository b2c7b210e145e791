"""Command line front end: ``fppshape <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace
from pathlib import Path


from . import dataset as ds
from . import evaluation as ev
from . import export, linreg
from .distributions import DistributionSpec, Regime, featurize
from .errors import DataFormatError, FPPError, UsageError
from .geometry import convex_hull, fold_to_octant, reflect_arc
from .neuralnet import InputTransform, Loss, Model, TrainConfig
from .predictor import DEFAULT_STEP, predict_shape
from .simulator import BACKEND, hull_input, run_fpp, write_cloud_csv

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DATASET_SCHEMA = """\
dataset CSV (one row per octant-arc vertex; .gz is gzip):
  family,params,seed,budget,variant,mu,sigma,q01,...,q99,x,y
  family   normal | gamma | beta | pareto
  params   quoted comma list: normal mu,sigma; gamma n,rate;
           beta a,alpha,beta; pareto alpha,xm
  variant  raw (B(t)/t coordinates) or mean_transformed (scaled by mu)"""

SPEC_HELP = "edge-weight law, e.g. gamma:10,1  normal:5,2  beta:2,2,3  pareto:3,1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _progress(args, label):
    return None if args.quiet else ds.stderr_progress(label)


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr, flush=True)


def _spec(text) -> DistributionSpec:
    return DistributionSpec.parse(text)


def _int_list(text):
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def _check_out(path):
    if path is None:
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise UsageError(f"output directory {parent} does not exist")


def _check_in(path):
    if path is not None and not Path(path).is_file():
        raise UsageError(f"{path}: no such file")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        layers=args.layers,
        hidden_units=args.units,
        loss=Loss.parse(args.loss),
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        validation_split=args.validation_split,
        seed=args.seed,
        input_transform=InputTransform.parse(args.input_transform),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    for p in (args.cloud, args.arc, args.hull, args.svg):
        _check_out(p)
    spec = _spec(args.spec)
    weights = args.constant_weight
    cloud = run_fpp(spec, args.budget, seed=args.seed, weights=weights)
    hull = convex_hull(hull_input(cloud))
    arc = fold_to_octant(hull)
    if args.cloud:
        write_cloud_csv(cloud, args.cloud)
    if args.hull:
        export.write_points_csv(hull, args.hull)
    if args.svg:
        export.write_svg([("hull", hull, "polygon"), ("octant", reflect_arc(arc), "polygon")],
                         args.svg, title=f"{spec} seed {args.seed}")
    if args.arc:
        export.write_points_csv(arc.vertices, args.arc)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in arc.vertices.tolist():
            w.writerow([repr(x), repr(y)])
    _log(args, f"{spec}: {len(cloud)} sites, final time {cloud.final_time:.6g}, "
               f"{cloud.edges_traversed} events, kernel {BACKEND}")


def cmd_build_dataset(args):
    _check_out(args.out)
    if args.clouds and not Path(args.clouds).is_dir():
        raise UsageError(f"cloud directory {args.clouds} does not exist")
    data = ds.build_dataset(args.n, Regime.parse(args.regime), args.budget,
                            ds.Variant.parse(args.variant), args.seed, jobs=args.jobs,
                            cloud_dir=args.clouds, progress=_progress(args, "simulations"))
    ds.save(data, args.out)
    _log(args, f"wrote {len(data)} rows from {data.n_simulations} simulations to {args.out}")


def cmd_featurize(args):
    _check_out(args.out)
    spec = _spec(args.spec)
    fh = sys.stdout if args.out is None else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["family", "params", *ds.FEATURE_NAMES])
        w.writerow([spec.family, spec.params_text, *map(repr, featurize(spec).values.tolist())])
    finally:
        if args.out is not None:
            fh.close()


def cmd_train(args):
    _check_in(args.data)
    _check_out(args.model)
    _check_out(args.history)
    data = ds.load(args.data)
    config = _train_config(args)
    trainer = ev.NetworkTrainer(config)
    _log(args, f"training {config.layers}x{config.hidden_units} on {len(data)} rows "
               f"({data.variant.value})")
    model = trainer(data)
    model.save(args.model)
    if args.history:
        with open(args.history, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_loss"])
            for e, tr, va in model.meta["history"]:
                w.writerow([int(e), repr(tr), repr(va)])
    mae, mape = ev.metrics(model.predict(data.inputs()), data.y)
    print(f"mae_train,mape_train\n{mae!r},{mape!r}")


def _load_pair(args):
    _check_in(args.train)
    _check_in(args.test)
    train = ds.load(args.train)
    test = ds.load(args.test) if args.test else None
    if test is not None and test.variant is not train.variant:
        raise DataFormatError(f"{args.test}: variant {test.variant.value} differs from "
                              f"training variant {train.variant.value}")
    return train, test


def cmd_grid(args):
    _check_out(args.out)
    _check_out(args.finalize)
    train, test = _load_pair(args)
    base = _train_config(args)
    reports = ev.run_grid(train, test, layers=_int_list(args.grid_layers),
                          units=_int_list(args.grid_units), epochs=args.epochs, k=args.k,
                          seed=args.seed, base=base, include_regression=args.regression,
                          jobs=args.jobs, progress=_progress(args, "grid cells"))
    ev.write_report(reports, args.out)
    if args.out is not None and not args.quiet:
        print(ev.format_table(reports))
    if args.finalize:
        best = ev.best_network(reports)
        cfg = replace(base, layers=best.layers, hidden_units=best.units)
        _log(args, f"finalizing {best.layers}x{best.units} with {args.final_epochs} epochs")
        ev.finalize(train, cfg, args.finalize, epochs=args.final_epochs)


def cmd_cv(args):
    _check_in(args.data)
    data = ds.load(args.data)
    if args.formula:
        trainer = ev.RegressionTrainer(linreg.Formula.parse(args.formula))
    else:
        trainer = ev.NetworkTrainer(_train_config(args))
    mape = ev.kfold_cv(data, args.k, trainer, args.seed)
    print(f"mape_cv\n{mape!r}")


def cmd_evaluate(args):
    _check_in(args.model)
    _check_in(args.data)
    model = Model.load(args.model)
    data = ds.load(args.data)
    if data.variant.value != model.variant:
        data = data.to_variant(model.variant)
    mae, mape = ev.metrics(model.predict(data.inputs()), data.y)
    print(f"rows,mae,mape\n{len(data)},{mae!r},{mape!r}")


def cmd_predict(args):
    _check_in(args.model)
    _check_out(args.csv)
    _check_out(args.svg)
    model = Model.load(args.model)
    spec = _spec(args.spec)
    shape = predict_shape(model, spec, args.step, hull=args.hull)
    if args.csv:
        export.write_points_csv(shape.full_polygon, args.csv)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in shape.octant.vertices.tolist():
            w.writerow([repr(x), repr(y)])
    if args.svg:
        layers = [("prediction", shape.full_polygon, "polygon")]
        if args.overlay_budget:
            cloud = run_fpp(spec, args.overlay_budget, seed=args.seed)
            layers.append(("simulation", convex_hull(hull_input(cloud)), "polygon"))
        export.write_svg(layers, args.svg, title=f"{spec} ({shape.model_id})")
    _log(args, f"{spec}: {len(shape.octant)} octant points, model {shape.model_id}")


# ---------------------------------------------------------------------------
# parser


def _add_common(p, jobs=False):
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--config", help="TOML file whose keys mirror the long flags; flags win")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr")
    if jobs:
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes (default: logical cores)")


def _add_net(p):
    g = p.add_argument_group("network")
    g.add_argument("--layers", type=int, default=10, help="hidden layers (default 10)")
    g.add_argument("--units", type=int, default=60, help="units per hidden layer (default 60)")
    g.add_argument("--epochs", type=int, default=2, help="training epochs (default 2)")
    g.add_argument("--batch-size", type=int, default=64)
    g.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    g.add_argument("--loss", default="mape", choices=[l.value for l in Loss])
    g.add_argument("--validation-split", type=float, default=0.1)
    g.add_argument("--input-transform", default="relative",
                   choices=[t.value for t in InputTransform],
                   help="input preprocessing (default relative: sigma and percentiles "
                        "divided by mu, log mu, then z-scored)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    parser = _Parser(prog="fppshape", description="Simulate first passage percolation limit "
                     "shapes and learn them from the edge-weight law.", formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("simulate", help="grow one shape", formatter_class=fmt,
                       description="Grow B(t) for one law and print the folded octant arc "
                                   "(x,y CSV) on stdout.\n\ncloud CSV: x,y,time per infected "
                                   "site in infection order; hull CSV: x,y CCW vertices of "
                                   "B(t)/t")
    p.add_argument("--spec", required=True, help=SPEC_HELP)
    p.add_argument("--budget", type=int, default=ds.DEFAULT_BUDGET,
                   help=f"queue events to process (default {ds.DEFAULT_BUDGET})")
    p.add_argument("--constant-weight", type=float, help="inject tau == value instead of sampling")
    p.add_argument("--cloud", help="write the infected-site cloud CSV")
    p.add_argument("--hull", help="write the hull CSV")
    p.add_argument("--arc", help="write the octant arc CSV instead of printing it")
    p.add_argument("--svg", help="write an SVG of the hull and the unfolded arc")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-dataset", help="simulate a regime into a dataset CSV",
                       formatter_class=fmt, description=DATASET_SCHEMA)
    p.add_argument("--regime", default="train", choices=[r.value for r in Regime])
    p.add_argument("--n", type=int, required=True, help="number of simulations")
    p.add_argument("--budget", type=int, default=ds.DEFAULT_BUDGET,
                   help=f"events per simulation (default {ds.DEFAULT_BUDGET})")
    p.add_argument("--variant", default="mean_transformed",
                   choices=[v.value for v in ds.Variant])
    p.add_argument("--out", required=True, help="output CSV (.gz to compress)")
    p.add_argument("--clouds", help="directory for per-simulation cloud CSVs")
    _add_common(p, jobs=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("featurize", help="feature row of a law", formatter_class=fmt,
                       description="Print family,params,mu,sigma,q01..q99 for one law.")
    p.add_argument("--spec", required=True, help=SPEC_HELP)
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a network", formatter_class=fmt,
                       description=DATASET_SCHEMA + "\n\nhistory CSV: epoch,train_loss,val_loss")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--model", required=True, help="output model file (JSON)")
    p.add_argument("--history", help="per-epoch loss CSV")
    _add_net(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid", help="cross-validate the network grid", formatter_class=fmt,
                       description=DATASET_SCHEMA + "\n\nreport CSV: " +
                       ",".join(ev.REPORT_HEADER) + "\nrows sorted by mape_cv; "
                       "mape_pred is the test-set mape")
    p.add_argument("--train", required=True, help="training dataset CSV")
    p.add_argument("--test", help="test dataset CSV (same variant)")
    p.add_argument("--out", help="report CSV (default stdout)")
    p.add_argument("--grid-layers", default="4,6,8,10")
    p.add_argument("--grid-units", default="40,60,80")
    p.add_argument("--k", type=int, default=10, help="cross-validation folds")
    p.add_argument("--regression", action="store_true", help="add the three OLS formulas")
    p.add_argument("--finalize", help="retrain the best network and save it here")
    p.add_argument("--final-epochs", type=int, default=ev.FINAL_EPOCHS)
    _add_net(p)
    _add_common(p, jobs=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("cv", help="k-fold cross-validation of one model", formatter_class=fmt,
                       description=DATASET_SCHEMA)
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--formula", choices=[f.value for f in linreg.Formula],
                   help="cross-validate an OLS formula instead of a network")
    _add_net(p)
    _add_common(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("evaluate", help="metrics of a model on a dataset", formatter_class=fmt,
                       description=DATASET_SCHEMA + "\n\nprints rows,mae,mape")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="predict the shape for a law", formatter_class=fmt,
                       description="Scan the model until it crosses y = x and unfold the arc. "
                                   "Prints the octant arc (x,y) on stdout unless --csv is "
                                   "given, which receives the full polygon.")
    p.add_argument("--model", required=True)
    p.add_argument("--spec", required=True, help=SPEC_HELP)
    p.add_argument("--step", type=float, default=DEFAULT_STEP, help="x step in model space")
    p.add_argument("--hull", action="store_true", help="convex-hull the predicted polygon")
    p.add_argument("--csv", help="full polygon CSV")
    p.add_argument("--svg", help="SVG of the prediction")
    p.add_argument("--overlay-budget", type=int,
                   help="also simulate the law with this many events and overlay its hull")
    _add_common(p)
    p.set_defaults(func=cmd_predict)
    return parser


def _apply_config(parser, argv):
    """Parse ``argv`` with defaults taken from ``--config``; flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    sub = parser._subparsers._group_actions[0].choices.get(known.command)
    if not known.config or sub is None:
        return parser.parse_args(argv)
    path = Path(known.config)
    try:
        table = tomllib.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    settings = {k: v for k, v in table.items() if not isinstance(v, dict)}
    settings.update(table.get(known.command, {}))
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in settings.items():
        dest = key.replace("-", "_")
        if dest not in dests or dest in ("help", "config"):
            raise UsageError(f"{path}: unknown setting {key!r} for {known.command}")
        defaults[dest] = value
        # required options may come from the file
        dests[dest].required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except FPPError as exc:
        print(f"fppshape: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fppshape: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
