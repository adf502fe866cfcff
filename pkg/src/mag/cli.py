"""Command-line pipeline: generate, fit, eval, baseline, replay.

Every command writes its outputs plus a flat ``key=value`` manifest into
one output directory; replaying a manifest re-runs the command with the
recorded inputs and reproduces the outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import BaselineConfig, fit_logistic, logistic_prob_matrix
from .errors import ConvergenceError, NumericalError, ParseError
from .magfit import (
    FitConfig,
    fit,
    forward_select,
    posterior_adjacency,
    read_posterior,
    write_posterior,
)
from .graphs import (
    BinaryAttributeMatrix,
    binarize_by_median,
    parse_attribute_table,
    parse_edge_list,
    serialize_edge_list,
)
from .metrics import distance_report, prob_log_likelihood, tpi
from .model import (
    DEFAULT_DENSE_CAP,
    ProbAdjacency,
    parse_params,
    prob_adjacency,
    sample_attributes,
    sample_graph,
    write_params,
)
from .netstats import STAT_NAMES, all_statistics

#: Statistics whose series values are measurements rather than counts.
_VALUE_STATS = ("svec", "ccf")


# ---------------------------------------------------------------------------
# Small I/O helpers
# ---------------------------------------------------------------------------


def _read_text(path):
    return Path(path).read_text(encoding="utf-8")


def _write_series(path, series, label):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", label])
        for x, c in zip(series.xs, series.counts):
            writer.writerow([repr(float(x)), repr(float(c))])


def _write_scores(path, ll_value, tpi_value):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["ll", repr(float(ll_value))])
        writer.writerow(["tpi", repr(float(tpi_value))])


def write_manifest(path, command, inputs, options, seed, out_dir):
    lines = [
        f"command={command}",
        f"version={__version__}",
        f"seed={seed}",
        f"out={out_dir}",
    ]
    lines.extend(f"input.{key}={value}" for key, value in sorted(inputs.items()))
    lines.extend(
        f"opt.{key}={value}"
        for key, value in sorted(options.items())
        if value is not None
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path):
    command = None
    seed = None
    out_dir = None
    inputs = {}
    options = {}
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw!r}", line=lineno)
        key, value = line.split("=", 1)
        if key == "command":
            command = value
        elif key == "seed":
            seed = value
        elif key == "out":
            out_dir = value
        elif key.startswith("input."):
            inputs[key[len("input.") :]] = value
        elif key.startswith("opt."):
            options[key[len("opt.") :]] = value
        elif key == "version":
            pass
        else:
            raise ParseError(f"unknown manifest key {key!r}", line=lineno)
    if command is None:
        raise ParseError("manifest is missing the command entry")
    return command, inputs, options, seed, out_dir


def _select_bits(table, columns):
    """Binary attribute matrix for the named (or indexed) table columns.

    Columns whose non-missing values are already all 0/1 are used directly
    (missing cells become 0); other columns are median-binarized.
    """
    names = []
    for token in columns:
        token = str(token).strip()
        if token in table.column_names:
            names.append(token)
            continue
        try:
            idx = int(token)
        except ValueError:
            raise KeyError(f"no column named '{token}'") from None
        names.append(table.column_names[idx])

    cols = []
    for name in names:
        idx = table.column_index(name)
        values = table.values[:, idx]
        present = ~table.missing[:, idx]
        if present.any() and np.isin(values[present], (0.0, 1.0)).all():
            bits = np.zeros(table.n_nodes, dtype=np.int8)
            bits[present] = values[present].astype(np.int8)
            cols.append(bits)
        else:
            cols.append(binarize_by_median(table, [name]).bits[:, 0])
    return names, BinaryAttributeMatrix(bits=np.stack(cols, axis=1))


def _load_graph(path):
    graph = parse_edge_list(_read_text(path))
    return graph


def _derive_seeds(seed, count):
    return [int(s) for s in np.random.SeedSequence(int(seed)).generate_state(count)]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args):
    params = parse_params(_read_text(args.params))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    attr_seed, graph_seed = _derive_seeds(args.seed, 2)
    attrs = sample_attributes(params, args.n, attr_seed)
    graph = sample_graph(attrs, params.thetas, graph_seed)

    (out / "graph.edges").write_text(serialize_edge_list(graph), encoding="utf-8")
    with open(out / "attributes.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"attr_{l}" for l in range(attrs.n_attrs)])
        for row in attrs.bits:
            writer.writerow([int(b) for b in row])
    write_manifest(
        out / "manifest.txt",
        "generate",
        inputs={"params": args.params},
        options={"n": args.n},
        seed=args.seed,
        out_dir=args.out,
    )
    print(f"generated n={graph.n_nodes} e={graph.n_edges} -> {out}")
    return 0


def _fit_config(args, n_attrs):
    return FitConfig(
        n_attrs=n_attrs,
        lambda_mi=args.lambda_mi,
        batch_size=args.batch,
        estep_rate=args.eta_e,
        mstep_rate=args.eta_m,
        em_rounds=args.rounds,
        tol=args.tol,
        mode=args.mode,
        seed=args.seed,
    )


def cmd_fit(args):
    graph = _load_graph(args.edges)
    if args.mode == "exact" and graph.n_nodes > DEFAULT_DENSE_CAP:
        raise ValueError(
            f"exact mode refused for n_nodes={graph.n_nodes} > cap "
            f"{DEFAULT_DENSE_CAP}; use --mode fast"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    table = None
    if args.attrs:
        table = parse_attribute_table(
            _read_text(args.attrs), expected_nodes=graph.n_nodes
        )

    selected_names = None
    if args.select is not None:
        if table is None:
            raise ValueError("--select requires --attrs")
        candidate_cols = args.fixed.split(",") if args.fixed else table.column_names
        names, candidates = _select_bits(table, candidate_cols)
        config = _fit_config(args, args.select)
        selected, result = forward_select(graph, candidates, args.select, config)
        selected_names = [names[i] for i in selected]
        with open(out / "selected.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rank", "column"])
            for rank, name in enumerate(selected_names):
                writer.writerow([rank, name])
    else:
        fixed_attrs = None
        n_fixed = 0
        if args.fixed:
            if table is None:
                raise ValueError("--fixed requires --attrs")
            _, fixed_attrs = _select_bits(table, args.fixed.split(","))
            n_fixed = fixed_attrs.n_attrs
        n_attrs = args.L if args.L is not None else n_fixed
        if n_attrs < 1:
            raise ValueError("--L is required when no fixed columns are given")
        config = _fit_config(args, n_attrs)
        result = fit(graph, config, fixed_attrs=fixed_attrs)

    write_params(result.params, out / "params.magparams")
    write_posterior(result.posterior, out / "posterior.csv")
    with open(out / "fitlog.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "lq", "delta"])
        prev = None
        for r, lq in enumerate(result.lq_trace, start=1):
            delta = "" if prev is None else repr(float(lq - prev))
            writer.writerow([r, repr(float(lq)), delta])
            prev = lq
    write_manifest(
        out / "manifest.txt",
        "fit",
        inputs={"edges": args.edges, **({"attrs": args.attrs} if args.attrs else {})},
        options={
            "L": args.L,
            "lambda": args.lambda_mi,
            "batch": args.batch,
            "eta_e": args.eta_e,
            "eta_m": args.eta_m,
            "rounds": args.rounds,
            "tol": args.tol,
            "mode": args.mode,
            "fixed": args.fixed,
            "select": args.select,
            "threads": args.threads,
        },
        seed=args.seed,
        out_dir=args.out,
    )
    tail = f" selected={','.join(selected_names)}" if selected_names else ""
    print(
        f"fit rounds={result.rounds_used} converged={result.converged} "
        f"lq={result.lq_trace[-1]:.4f}{tail} -> {out}"
    )
    return 0


def cmd_eval(args):
    graph = _load_graph(args.edges)
    if graph.n_edges == 0:
        raise ValueError("input graph has no edges; nothing to evaluate")
    params_path = Path(args.params)
    if params_path.is_dir():
        # a fit output directory: pick up its params and posterior
        if args.posterior is None:
            candidate = params_path / "posterior.csv"
            if candidate.exists():
                args.posterior = str(candidate)
        args.params = str(params_path / "params.magparams")
    params = parse_params(_read_text(args.params))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    attr_seed, graph_seed = _derive_seeds(args.seed, 2)
    attrs = sample_attributes(params, graph.n_nodes, attr_seed)
    model_graph = sample_graph(attrs, params.thetas, graph_seed)

    if args.posterior:
        posterior = read_posterior(args.posterior)
        if posterior.n_nodes != graph.n_nodes:
            raise ValueError("posterior disagrees with graph on node count")
        prob = posterior_adjacency(posterior, params)
    else:
        prob = prob_adjacency(attrs, params.thetas)

    ll_value = prob_log_likelihood(graph, prob)
    tpi_value = tpi(graph, prob)

    stats_real = all_statistics(graph, k_singular=args.k_singular)
    stats_model = all_statistics(model_graph, k_singular=args.k_singular)
    report = distance_report(stats_real, stats_model)

    for name in STAT_NAMES:
        label = "value" if name in _VALUE_STATS else "count"
        _write_series(out / f"{name}_real.csv", stats_real[name], label)
        _write_series(out / f"{name}_model.csv", stats_model[name], label)
    with open(out / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["statistic", "ks", "l2"])
        for name, ks_value, l2_value in report.rows():
            writer.writerow([name, repr(float(ks_value)), repr(float(l2_value))])
    _write_scores(out / "scores.csv", ll_value, tpi_value)
    write_manifest(
        out / "manifest.txt",
        "eval",
        inputs={
            "edges": args.edges,
            "params": args.params,
            **({"posterior": args.posterior} if args.posterior else {}),
        },
        options={"k_singular": args.k_singular},
        seed=args.seed,
        out_dir=args.out,
    )
    print(
        f"eval ll={ll_value:.2f} tpi={tpi_value:.2f} "
        f"avg_ks={report.avg_ks:.3f} avg_l2={report.avg_l2:.3f} -> {out}"
    )
    return 0


def cmd_baseline(args):
    graph = _load_graph(args.edges)
    if graph.n_edges == 0:
        raise ValueError("input graph has no edges; nothing to fit")
    table = parse_attribute_table(_read_text(args.attrs), expected_nodes=graph.n_nodes)
    names, bits = _select_bits(table, table.column_names)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # larger step and cap than the library defaults: the CLI should reach
    # the optimum on ordinary inputs rather than stop at the iteration cap
    params = fit_logistic(
        graph, bits, BaselineConfig(step=0.8, max_iters=20000, tol=1e-6)
    )
    with open(out / "logistic.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "value"])
        writer.writerow(["c", repr(float(params.intercept))])
        for l, value in enumerate(params.alpha):
            writer.writerow([f"alpha_{l}", repr(float(value))])
        for l, value in enumerate(params.beta):
            writer.writerow([f"beta_{l}", repr(float(value))])

    prob = ProbAdjacency(values=logistic_prob_matrix(params, bits))
    _write_scores(
        out / "scores.csv",
        prob_log_likelihood(graph, prob),
        tpi(graph, prob),
    )
    write_manifest(
        out / "manifest.txt",
        "baseline",
        inputs={"edges": args.edges, "attrs": args.attrs},
        options={"columns": ",".join(names)},
        seed=args.seed,
        out_dir=args.out,
    )
    print(f"baseline fitted {len(names)} columns -> {out}")
    return 0


def cmd_replay(args):
    command, inputs, options, seed, out_dir = read_manifest(args.manifest)
    out = args.out if args.out else out_dir
    argv = [command]
    if command == "generate":
        argv += [inputs["params"], "--n", options["n"]]
    elif command == "fit":
        argv += [inputs["edges"]]
        if "attrs" in inputs:
            argv += ["--attrs", inputs["attrs"]]
        flag_names = {
            "L": "--L",
            "lambda": "--lambda",
            "batch": "--batch",
            "eta_e": "--eta-e",
            "eta_m": "--eta-m",
            "rounds": "--rounds",
            "tol": "--tol",
            "mode": "--mode",
            "fixed": "--fixed",
            "select": "--select",
            "threads": "--threads",
        }
        for key, flag in flag_names.items():
            if key in options:
                argv += [flag, options[key]]
    elif command == "eval":
        argv += [inputs["edges"], inputs["params"]]
        if "posterior" in inputs:
            argv += ["--posterior", inputs["posterior"]]
        argv += ["--k-singular", options["k_singular"]]
    elif command == "baseline":
        argv += [inputs["edges"], inputs["attrs"]]
    else:
        raise ValueError(f"manifest names unknown command {command!r}")
    if seed is not None:
        argv += ["--seed", seed]
    argv += ["--out", out]
    return main(argv)


# ---------------------------------------------------------------------------
# Argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mag",
        description="Multiplicative attribute graph toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample attributes and a graph")
    p.add_argument("params", help="MAGPARAMS file")
    p.add_argument("--n", type=int, required=True, help="number of nodes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="estimate parameters from a graph")
    p.add_argument("edges", help="edge-list file")
    p.add_argument("--L", type=int, default=None, help="attribute count")
    p.add_argument("--lambda", dest="lambda_mi", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--eta-e", type=float, default=0.05)
    p.add_argument("--eta-m", type=float, default=0.01)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--mode", choices=("exact", "fast"), default="fast")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--attrs", default=None, help="attribute table CSV")
    p.add_argument("--fixed", default=None, help="comma-separated fixed columns")
    p.add_argument("--select", type=int, default=None, help="forward-select k columns")
    p.add_argument("--threads", type=int, default=None, help="worker cap (recorded)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="statistics, distances, and scores")
    p.add_argument("edges", help="edge-list file")
    p.add_argument("params", help="MAGPARAMS file")
    p.add_argument("--posterior", default=None, help="posterior CSV from fit")
    p.add_argument("--k-singular", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="logistic-regression edge model")
    p.add_argument("edges", help="edge-list file")
    p.add_argument("attrs", help="attribute table CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the output directory")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (NumericalError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
