"""Command-line interface.

Subcommands:
  spectra     print the spectral profile of a topology
  free-bound  largest variance parameter that costs no extra iterations
  consensus   averaging experiment (synthetic Gaussian targets)
  logistic    regularized logistic regression on a LIBSVM file
  tune        stepsize grid search for either problem

Experiment subcommands write one trace CSV per (quantizer, seed), a
summary CSV, and error-vs-iteration / error-vs-bits figures into --out.
A config file (INI, section [decopt], keys named like the long flags)
supplies defaults; explicit flags win.
"""

import argparse
import configparser
import math
import os
import sys

from . import __version__, datasets, engine, experiments, plots, quantizers, streams, topology
from .errors import DecoptError, InvalidSpecError
from .objectives import ConsensusQuadratic, LogisticObjective


def parse_topology(text: str) -> topology.Graph:
    head, _, tail = text.partition(":")
    if head == "file":
        return topology.read_graph_file(tail)
    try:
        if head == "ring":
            return topology.make_ring(int(tail))
        if head == "star":
            return topology.make_star(int(tail))
        if head == "complete":
            return topology.make_complete(int(tail))
        if head == "kreg":
            n_s, _, k_s = tail.partition(":")
            return topology.make_k_regular(int(n_s), int(k_s))
    except ValueError as exc:
        raise InvalidSpecError(f"bad topology parameter in {text!r}") from exc
    raise InvalidSpecError(f"cannot parse topology {text!r}")


def _parse_grid(text: str):
    lo, _, rest = text.partition(":")
    hi, _, count = rest.partition(":")
    try:
        return experiments.log_grid(float(lo), float(hi), int(count))
    except ValueError as exc:
        raise InvalidSpecError(f"bad grid {text!r}, expected lo:hi:count") from exc


def _add_common(p):
    p.add_argument("--topology", default=None,
                   help="ring:N | star:N | complete:N | kreg:N:K | file:PATH")
    p.add_argument("--graph-file", default=None,
                   help="edge-list file, alternative to --topology")
    p.add_argument("--option", default="B", choices=list(engine.OPTIONS))
    p.add_argument("--quantizer", default="identity",
                   help="comma list: identity | rand:K | dith:S")
    p.add_argument("--theoretical", action="store_true",
                   help="use the stepsizes the convergence theory prescribes")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--eps", type=float, default=None, help="target max-node squared error")
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", default=None, help="comma list of seeds (overrides --seed)")
    p.add_argument("--sharing", default=engine.PER_NODE,
                   choices=[engine.PER_NODE, engine.PER_EDGE])
    p.add_argument("--float-bits", type=int, default=32)
    p.add_argument("--out", default=None, help="directory for CSVs and figures")
    p.add_argument("--no-figures", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="decopt", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", default=None, help="INI file with flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectra", help="print the spectral profile of a topology")
    p.add_argument("--topology", default=None)
    p.add_argument("--graph-file", default=None, help="edge-list file (same as file:PATH)")

    p = sub.add_parser("free-bound", help="compression-for-free variance bound")
    p.add_argument("--topology", required=True)
    p.add_argument("--kappa", type=float, default=1.0, help="condition number L/mu")

    p = sub.add_parser("consensus", help="average-consensus experiment")
    _add_common(p)
    p.add_argument("--d", type=int, default=250, help="vector dimension")
    p.add_argument("--noise-var", type=float, default=0.0,
                   help="stochastic-gradient variance for option C")
    p.add_argument("--problem-seed", type=int, default=0,
                   help="seed for the Gaussian targets (fixed across --seeds)")

    p = sub.add_parser("logistic", help="logistic regression on a LIBSVM file")
    _add_common(p)
    p.add_argument("--data", required=True, help="LIBSVM/SVMlight file")
    p.add_argument("--lam", type=float, default=None,
                   help="ridge parameter (default 1/total samples)")

    p = sub.add_parser("tune", help="stepsize grid search")
    _add_common(p)
    p.add_argument("--d", type=int, default=250)
    p.add_argument("--noise-var", type=float, default=0.0)
    p.add_argument("--problem-seed", type=int, default=0)
    p.add_argument("--data", default=None, help="LIBSVM file (tunes logistic instead of consensus)")
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--theta-grid", required=True, help="lo:hi:count, log-spaced")
    p.add_argument("--eta-grid", default=None, help="lo:hi:count, log-spaced")
    p.add_argument("--metric", default="iterations", choices=["iterations", "error"])
    return parser


def _apply_config(argv, parser):
    """Fold INI defaults under the explicit flags."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config is None:
        return
    ini = configparser.ConfigParser()
    read = ini.read(known.config)
    if not read:
        raise InvalidSpecError(f"cannot read config file {known.config!r}")
    if not ini.has_section("decopt"):
        raise InvalidSpecError("config file needs a [decopt] section")
    defaults = {key.replace("-", "_"): value for key, value in ini.items("decopt")}
    for action in parser._subparsers._group_actions[0].choices.values():
        usable = {}
        for act in action._actions:
            if act.dest in defaults:
                raw = defaults[act.dest]
                if act.type is not None:
                    usable[act.dest] = act.type(raw)
                elif isinstance(act.const, bool) or isinstance(act.default, bool):
                    usable[act.dest] = raw.strip().lower() in ("1", "true", "yes", "on")
                else:
                    usable[act.dest] = raw
        action.set_defaults(**usable)


def _graph(args):
    if getattr(args, "graph_file", None):
        return topology.read_graph_file(args.graph_file)
    if args.topology is None:
        raise InvalidSpecError("give --topology or --graph-file")
    return parse_topology(args.topology)


def _seeds(args):
    if args.seeds:
        return tuple(int(s) for s in str(args.seeds).split(","))
    return (args.seed,)


def _quantizer_specs(args):
    return tuple(quantizers.parse_quantizer(tok, float_bits=args.float_bits)
                 for tok in str(args.quantizer).split(","))


def _consensus_objective(args, graph):
    rng = streams.stream(args.problem_seed, 0xC0)
    targets = rng.standard_normal((args.d, graph.n))
    return ConsensusQuadratic(targets, noise_var=args.noise_var)


def _logistic_objective(args, graph):
    rows, labels, _ = datasets.load_libsvm(args.data)
    node_rows, node_labels = datasets.partition_by_label(rows, labels, graph.n)
    return LogisticObjective(node_rows, node_labels, lam=args.lam)


def _experiment_spec(args, graph, objective, name):
    mode = "theoretical" if args.theoretical else "explicit"
    if mode == "explicit" and args.theta is None:
        raise InvalidSpecError("give --theta (and usually --eta) or pass --theoretical")
    return experiments.ExperimentSpec(
        name=name,
        graph=graph,
        objective=objective,
        option=args.option,
        quantizers=_quantizer_specs(args),
        stepsize_mode=mode,
        theta=args.theta,
        eta=args.eta,
        alpha=args.alpha,
        iters=args.iters,
        eps=args.eps,
        seeds=_seeds(args),
        delta_sharing=args.sharing,
    )


def _print_summary(result):
    print("quantizer      omega     iters_to_eps     bits_to_eps   error_at_budget")
    for row in result.summary:
        print(f"{row.quantizer:<12} {row.omega:>8.3f} {row.iterations_to_eps:>16} "
              f"{row.bits_to_eps:>15} {row.error_at_budget:>17.3e}")
    print("(dith bits use the trivial d*kappa+b upper bound)")


def _write_outputs(result, args):
    if not args.out:
        return
    os.makedirs(args.out, exist_ok=True)
    experiments.write_summary_csv(result, os.path.join(args.out, f"{result.spec.name}-summary.csv"))
    from . import diagnostics
    for cell in result.cells:
        if cell.trace is None:
            continue
        label = cell.quantizer.label().replace(":", "")
        path = os.path.join(args.out, f"{result.spec.name}-{label}-seed{cell.seed}.csv")
        diagnostics.write_trace_csv(cell.trace, path)
    if not args.no_figures:
        for path in plots.render_error_curves(result, args.out):
            print(f"wrote {path}")


def _cmd_spectra(args):
    graph = _graph(args)
    profile = topology.spectral_profile(topology.build_laplacian(graph))
    print(f"nodes = {graph.n}")
    print(f"edges = {graph.num_edges}")
    print(f"lambda_max = {profile.lambda_max!r}")
    print(f"lambda_min_plus = {profile.lambda_min_plus!r}")
    print(f"rho = {profile.rho!r}")
    print(f"rho_inf = {profile.rho_inf!r}")
    print(f"max_edge_weight = {profile.max_edge_weight!r}")
    return 0


def _cmd_free_bound(args):
    graph = parse_topology(args.topology)
    profile = topology.spectral_profile(topology.build_laplacian(graph))
    bound = engine.compression_for_free_bound(profile, args.kappa)
    print(f"omega_max = {bound!r}")
    return 0


def _cmd_consensus(args):
    graph = _graph(args)
    objective = _consensus_objective(args, graph)
    spec = _experiment_spec(args, graph, objective, "consensus")
    result = experiments.run_experiment(spec)
    _print_summary(result)
    _write_outputs(result, args)
    return 0


def _cmd_logistic(args):
    graph = _graph(args)
    objective = _logistic_objective(args, graph)
    spec = _experiment_spec(args, graph, objective, "logistic")
    result = experiments.run_experiment(spec)
    _print_summary(result)
    _write_outputs(result, args)
    return 0


def _cmd_tune(args):
    graph = _graph(args)
    if args.data:
        objective = _logistic_objective(args, graph)
        name = "tune-logistic"
    else:
        objective = _consensus_objective(args, graph)
        name = "tune-consensus"
    spec = experiments.ExperimentSpec(
        name=name,
        graph=graph,
        objective=objective,
        option=args.option,
        quantizers=_quantizer_specs(args),
        stepsize_mode="grid",
        eta=args.eta,
        alpha=args.alpha,
        theta_grid=_parse_grid(args.theta_grid),
        eta_grid=_parse_grid(args.eta_grid) if args.eta_grid else (),
        iters=args.iters,
        eps=args.eps,
        seeds=_seeds(args),
        delta_sharing=args.sharing,
    )
    tuned = experiments.tune(spec, metric=args.metric)
    print("quantizer      theta          eta            metric")
    lines = ["quantizer,theta,eta,metric"]
    for label, cell in tuned.items():
        if cell is None:
            print(f"{label:<12} (all grid points diverged)")
            lines.append(f"{label},nan,nan,inf")
            continue
        eta = cell.eta if cell.eta is not None else math.nan
        print(f"{label:<12} {cell.theta:<14.6g} {eta:<14.6g} {cell.metric}")
        lines.append(f"{label},{cell.theta!r},{eta!r},{cell.metric!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"{name}-tuned.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "spectra": _cmd_spectra,
    "free-bound": _cmd_free_bound,
    "consensus": _cmd_consensus,
    "logistic": _cmd_logistic,
    "tune": _cmd_tune,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(argv, parser)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except DecoptError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: IoError: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
