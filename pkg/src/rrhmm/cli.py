"""Command-line front end: ``rrhmm <subcommand> [flags]``.

Stages hand off through files (dataset CSV -> moments/model JSON -> CSV
reports); every run writes a ``<out>.manifest.json`` next to its output.
Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""

import argparse
import csv
import datetime
import json
import logging
import sys
import time
from importlib import metadata

import numpy as np

from . import diagnostics as diag
from .estimator import KernelRRHMM
from .exceptions import DegenerateDenominator, RRHMMError, UsageError
from .hmm import BUILTIN_MODELS, load_model, sample_sequence, sample_triples
from .inference import filter_trace, init_belief, predictive, simulate, write_trace
from .kde import KdeConfig, featurize, filter_continuous
from .moments import (MomentEstimates, estimate_moments, estimate_moments_stacked,
                      population_moments_stacked)
from .spectral import DEFAULT_FLOOR, ObservableModel, learn, select_rank

logger = logging.getLogger("rrhmm")

EXPERIMENTS = ("eigen-recovery", "l1-curve")


def _version():
    try:
        return metadata.version("rrhmm")
    except metadata.PackageNotFoundError:
        return "unknown"


# -- dataset files --------------------------------------------------------

def write_triples(path, triples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "x3"])
        w.writerows(np.asarray(triples, dtype=np.int64).tolist())


def write_sequence(path, seq):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"])
        w.writerows([[int(x)] for x in seq])


def read_dataset(path):
    """Return ``(kind, array)`` with kind ``triples``, ``sequence`` or ``points``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UsageError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if header == ["x1", "x2", "x3"]:
        return "triples", np.array(body, dtype=np.int64).reshape(-1, 3)
    if header == ["x"]:
        return "sequence", np.array([int(r[0]) for r in body], dtype=np.int64)
    return "points", np.array(body, dtype=float).reshape(-1, len(header))


def write_points(path, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"d{i}" for i in range(X.shape[1])])
        w.writerows([[repr(float(v)) for v in row] for row in X])


def _load_learned(path):
    with open(path) as fh:
        d = json.load(fh)
    model = ObservableModel.from_dict(d)
    kde = KdeConfig.from_dict(d["kde"]) if d.get("kde") else None
    return model, kde, d


# -- manifest ---------------------------------------------------------------

def _write_manifest(args, outputs, started):
    resolved = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "subcommand": args.command,
        "args": resolved,
        "seed": resolved.get("seed"),
        "inputs": [p for p in (resolved.get("data"), resolved.get("model"),
                               resolved.get("truth")) if p],
        "outputs": outputs,
        "wall_clock_s": time.time() - started,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": _version(),
    }
    path = outputs[0] + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path


# -- subcommands ------------------------------------------------------------

def cmd_gen(args):
    params = load_model(args.model, args.m)
    if args.length is not None:
        seq = sample_sequence(params, args.length, args.seed)
        write_sequence(args.out, seq)
        print(f"wrote {len(seq)} symbols to {args.out}")
    else:
        n = 0 if args.n is None else args.n
        triples = sample_triples(params, n, args.seed, args.mode)
        write_triples(args.out, triples)
        print(f"wrote {len(triples)} triples to {args.out}")
    return [args.out]


def _moments_from_args(args):
    if args.data is None:
        if args.model is None:
            raise UsageError("supply --data or --model")
        return population_moments_stacked(load_model(args.model, args.m), args.window)
    if args.data.endswith(".json"):
        return MomentEstimates.load(args.data)
    kind, arr = read_dataset(args.data)
    if kind == "points":
        raise UsageError("continuous data needs `learn --centers`")
    n = args.n_symbols if args.n_symbols is not None else int(arr.max()) + 1
    if kind == "triples":
        if args.window != 1:
            raise UsageError("--window > 1 needs a sequence dataset")
        return estimate_moments(arr, n)
    return estimate_moments_stacked(arr, n, args.window)


def cmd_estimate(args):
    moments = _moments_from_args(args)
    moments.save(args.out)
    print(f"wrote moments (n={moments.n_base}, window={moments.window}, "
          f"N={moments.sample_count}) to {args.out}")
    return [args.out]


def _print_spectrum(sel):
    print("singular values of P21:", " ".join(f"{s:.6g}" for s in sel.singular_values))


def cmd_learn(args):
    if args.data and not args.data.endswith(".json"):
        kind, arr = read_dataset(args.data)
        if kind == "points":
            return _learn_kde(args, arr)
    moments = _moments_from_args(args)
    sel = select_rank(moments, args.threshold)
    _print_spectrum(sel)
    k = sel.chosen_k if args.k is None else args.k
    model = learn(moments, k, args.floor)
    N = None if moments.is_population else int(moments.sample_count)
    model.save(args.out, {"sample_count": N})
    print(f"learned rank-{model.k} model with {model.n} operators -> {args.out}")
    return [args.out]


def _learn_kde(args, points):
    if args.centers is None:
        raise UsageError("continuous data needs --centers")
    est = KernelRRHMM(k=args.k, threshold=args.threshold, n_centers=args.centers,
                      bandwidth=args.bandwidth, normalizer_floor=args.floor)
    est.fit(points)
    _print_spectrum(est.rank_selection_)
    est.model_.save(args.out, {"sample_count": int(est.moments_.sample_count),
                               "kde": est.config_.to_dict()})
    print(f"learned rank-{est.model_.k} kernel model with "
          f"{est.config_.n_centers} centers -> {args.out}")
    return [args.out]


def cmd_eval(args):
    model, _, raw = _load_learned(args.model)
    truth = load_model(args.truth, args.m)
    if model.n != truth.n:
        raise UsageError(f"model has {model.n} symbols, truth has {truth.n}")
    l1 = diag.l1_error(model, truth, args.t)
    norm = float(model.b_inf @ model.b1)
    true_eigs = diag.true_eigenvalues(truth)
    est = diag.match_eigenvalues(true_eigs[:model.k], np.linalg.eigvals(model.B_sum))
    print(f"L1 joint error (t={args.t}): {l1!r}")
    print(f"b_inf . b1: {norm!r}")
    N = raw.get("sample_count")
    N = "inf" if N is None else N
    rows = [("eval", N, 0, i, diag._real_if_close(tv), diag._real_if_close(ev))
            for i, (tv, ev) in enumerate(zip(true_eigs, est))]
    for row in rows:
        print("eigenvalue", row[3], "true", diag.format_value(row[4]),
              "estimated", diag.format_value(row[5]))
    if args.out:
        diag.write_rows(args.out, diag.RECORD_FIELDS, rows)
        return [args.out]
    return []


def cmd_filter(args):
    model, kde, _ = _load_learned(args.model)
    if args.floor is not None:
        model = model.with_floor(args.floor)
    kind, arr = read_dataset(args.data)
    if kde is not None:
        rows = _filter_points(model, kde, arr)
    else:
        if kind == "triples":
            raise UsageError("filter expects a sequence dataset")
        rows = filter_trace(model, arr)
    write_trace(rows, args.out, model.n)
    print(f"wrote {len(rows)} filtering steps to {args.out}")
    return [args.out]


def _filter_points(model, config, X):
    state = init_belief(model)
    rows = []
    for x in np.atleast_2d(X):
        try:
            probs = predictive(model, state).probs
        except DegenerateDenominator:
            probs = np.full(model.n, np.nan)
        symbol = int(np.argmax(featurize(x, config, scaled=True)))
        state = filter_continuous(model, state, x, config)
        rows.append((state.step - 1, symbol, state.last_normalizer, state.trust, probs))
    return rows


def cmd_simulate(args):
    model, kde, _ = _load_learned(args.model)
    if kde is not None:
        raise UsageError("simulate supports discrete models only")
    sim = simulate(model, args.length, args.seed)
    write_sequence(args.out, sim.symbols)
    if not sim.completed:
        print(f"simulation stopped early after {len(sim.symbols)} symbols "
              "(degenerate predictive distribution)", file=sys.stderr)
    print(f"wrote {len(sim.symbols)} simulated symbols to {args.out}")
    return [args.out]


def _parse_ns(text):
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--ns must be comma separated integers, got {text!r}")


def cmd_experiment(args):
    params = load_model(args.model, args.m)
    ns = _parse_ns(args.ns)
    if args.name == "eigen-recovery":
        result = diag.eigen_recovery_experiment(params, args.k, ns, args.trials,
                                                args.seed, args.window)
    else:
        result = diag.l1_error_experiment(params, args.k, args.t, ns, args.trials,
                                          args.seed, args.window)
    trials_path = args.out + ".trials.csv"
    summary_path = args.out + ".summary.csv"
    diag.write_rows(trials_path, diag.RECORD_FIELDS, result.records(args.name))
    summary = list(result.summary(args.name))
    diag.write_rows(summary_path, diag.SUMMARY_FIELDS, summary)
    for row in summary:
        print(" ".join(diag.format_value(v) for v in row))
    return [trials_path, summary_path]


def cmd_replay(args):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    replayed = argparse.Namespace(**manifest["args"])
    replayed.func = COMMANDS[manifest["subcommand"]]
    return replayed.func(replayed)


COMMANDS = {"gen": cmd_gen, "estimate": cmd_estimate, "learn": cmd_learn,
            "eval": cmd_eval, "filter": cmd_filter, "simulate": cmd_simulate,
            "experiment": cmd_experiment}


def build_parser():
    parser = argparse.ArgumentParser(prog="rrhmm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_flags(p, required=True):
        p.add_argument("--model", required=required,
                       help=f"builtin ({', '.join(BUILTIN_MODELS)}) or model JSON path")
        p.add_argument("--m", type=int, default=None, help="states for --model polygon")

    p = sub.add_parser("gen", help="sample a dataset from a latent model")
    model_flags(p)
    p.add_argument("--n", type=int, default=None, help="number of triples")
    p.add_argument("--length", type=int, default=None, help="sequence length instead of triples")
    p.add_argument("--mode", choices=("restart", "sliding"), default="restart")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    for name, helptext in (("estimate", "estimate moments and cache them as JSON"),
                           ("learn", "learn an observable-operator model")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--data", help="dataset CSV or cached moments JSON")
        model_flags(p, required=False)
        p.add_argument("--window", type=int, default=1)
        p.add_argument("--n-symbols", type=int, default=None)
        p.add_argument("--out", required=True)
        if name == "learn":
            p.add_argument("--k", type=int, default=None)
            p.add_argument("--threshold", type=float, default=1e-6)
            p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
            p.add_argument("--centers", type=int, default=None,
                           help="kernel centers for continuous data")
            p.add_argument("--bandwidth", type=float, default=None)

    p = sub.add_parser("eval", help="compare a learned model with the true one")
    p.add_argument("--model", required=True, help="learned model JSON")
    p.add_argument("--truth", required=True, help="builtin name or latent model JSON")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--t", type=int, default=3)
    p.add_argument("--out", default=None, help="optional eigenvalue comparison CSV")

    p = sub.add_parser("filter", help="filter a sequence and write the trace")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--floor", type=float, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="sample a sequence from a learned model")
    p.add_argument("--model", required=True)
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiment", help="run a synthetic recovery experiment")
    p.add_argument("name", choices=EXPERIMENTS)
    model_flags(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--window", type=int, default=1)
    p.add_argument("--ns", default="10000,100000")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--t", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix")

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    started = time.time()
    try:
        if args.command == "replay":
            outputs = cmd_replay(args)
        else:
            outputs = COMMANDS[args.command](args)
            if outputs:
                _write_manifest(args, outputs, started)
    except UsageError as exc:
        print(f"rrhmm {args.command}: {exc}", file=sys.stderr)
        return 2
    except (RRHMMError, OSError, ValueError) as exc:
        print(f"rrhmm {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
