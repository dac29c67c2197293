"""Command-line surface: generate graphs, diffuse signals, infer topologies,
certify recovery, run baselines, and emit benchmark CSVs."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import certificates, evaluation, experiments, inference, linalg, solver
from .diffusion import (AR_DIFFUSION, EXPONENTIAL, INVERSE_LAPLACIAN_ROOT,
                        diffuse, exact_templates, extract_templates, perturb,
                        polynomial_filter, precision_root_filter,
                        sample_covariance, smooth_signal_model,
                        spectral_filter, ensemble_from_csv, ensemble_to_csv,
                        templates_from_files, templates_from_matrix,
                        templates_to_files, SignalEnsemble)
from .errors import Infeasible, NeverFeasible, SpectempoError
from .graphs import (ADJACENCY, COMBINATORIAL_LAPLACIAN, NORMALIZED_LAPLACIAN,
                     OrderingConstraint, ShiftConstraintSet, generate_ba,
                     generate_er, graph_from_adjacency, graph_from_edge_csv,
                     graph_from_json, graph_to_edge_csv, graph_to_json,
                     gso_for, dense_matrix_from_csv)

EXIT_IO = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3

SET_NAMES = {
    "adjacency": ADJACENCY,
    "normalized-laplacian": NORMALIZED_LAPLACIAN,
    "combinatorial-laplacian": COMBINATORIAL_LAPLACIAN,
}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _fail(message, code):
    raise CliError(message, code)


def load_graph(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        _fail(f"cannot read graph file {path}: {exc}", EXIT_IO)
    if path.endswith(".json"):
        return graph_from_json(text)
    return graph_from_edge_csv(text)


def resolve_set(args) -> ShiftConstraintSet:
    kind = SET_NAMES.get(args.set)
    if kind is None:
        _fail(f"unknown constraint set {args.set!r}", EXIT_CONFIG)
    ordering = None
    if getattr(args, "lag", None) and getattr(args, "gap", None) is not None \
            and args.formulation == "smooth-laplacian":
        ordering = OrderingConstraint(args.lag, args.gap)
    return ShiftConstraintSet(kind, scale_node=getattr(args, "scale_node", 0),
                              ordering=ordering)


def resolve_templates(args, cset=None):
    src = args.templates
    if src == "exact":
        if not getattr(args, "graph", None):
            _fail("--templates exact requires --graph", EXIT_CONFIG)
        g = load_graph(args.graph)
        kind = cset.kind if cset is not None else ADJACENCY
        return exact_templates(gso_for(g, kind))
    if src == "sample":
        if not getattr(args, "signals", None):
            _fail("--templates sample requires --signals", EXIT_CONFIG)
        X = ensemble_from_csv(Path(args.signals).read_text())
        return extract_templates(sample_covariance(X))
    if src == "matrix":
        if not getattr(args, "matrix", None):
            _fail("--templates matrix requires --matrix", EXIT_CONFIG)
        M = dense_matrix_from_csv(Path(args.matrix).read_text())
        return templates_from_matrix(M)
    v_csv = Path(src).read_text()
    sidecar = None
    side_path = Path(src).with_suffix(".json")
    if side_path.exists():
        sidecar = side_path.read_text()
    return templates_from_files(v_csv, sidecar)


def write_output(path: str, text: str):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        _fail(f"cannot write {path}: {exc}", EXIT_IO)


# ---------------------------------------------------------------------------
# subcommands

def cmd_generate(args):
    if args.model == "er":
        g = generate_er(args.n, args.p, args.seed)
    elif args.model == "ba":
        g = generate_ba(args.n, args.m0, args.m, args.seed)
    else:
        _fail(f"unknown model {args.model!r}", EXIT_CONFIG)
    out = args.output or f"{args.model}_{args.n}.json"
    if out.endswith(".csv"):
        write_output(out, graph_to_edge_csv(g))
    else:
        write_output(out, graph_to_json(g))
    return 0


def cmd_diffuse(args):
    g = load_graph(args.graph)
    gso = gso_for(g, SET_NAMES[args.gso])
    fam = args.filter
    if fam == "poly":
        coeffs = [float(c) for c in args.coeffs.split(",")]
        H = polynomial_filter(gso, coeffs)
    elif fam == "spectral":
        rng = np.random.default_rng(args.seed)
        H = spectral_filter(exact_templates(gso), rng.uniform(0.5, 1.5, g.n))
    elif fam == "precision-root":
        H = precision_root_filter(gso, args.margin)
    elif fam in ("inverse-laplacian-root", "ar", "exponential"):
        model = {"inverse-laplacian-root": INVERSE_LAPLACIAN_ROOT,
                 "ar": AR_DIFFUSION, "exponential": EXPONENTIAL}[fam]
        H = smooth_signal_model(gso, model)
    else:
        _fail(f"unknown filter family {fam!r}", EXIT_CONFIG)
    X = diffuse(H, args.samples, args.seed)
    if args.sigma > 0:
        X = perturb(X, args.sigma, args.seed + 1 if args.seed is not None else None)
    write_output(args.output or "signals.csv", ensemble_to_csv(X))
    return 0


def cmd_infer(args):
    if args.replay:
        problem = solver.problem_from_json(Path(args.replay).read_text())
        sol = solver.solve(problem)
        print(solver.solution_to_json(sol))
        return 0
    cset = resolve_set(args)
    templates = resolve_templates(args, cset)
    epsilon = args.epsilon
    if epsilon not in (None, "auto"):
        epsilon = float(epsilon)
    request = inference.InferenceRequest(
        templates=templates, cset=cset,
        formulation=args.formulation.replace("-", "_"),
        epsilon=epsilon, threshold=args.threshold,
        lag=args.lag, gap=args.gap,
        reweight_iters=args.reweight_iters)
    if args.dump_problem:
        if request.formulation == "noiseless":
            problem = inference.noiseless_problem(templates, cset)
        elif request.formulation == "noisy":
            problem = inference.noisy_problem(templates, cset,
                                              epsilon if isinstance(epsilon, float) else 1.0)
        else:
            problem = inference.incomplete_problem(templates, cset)
        write_output(args.dump_problem, solver.problem_to_json(problem))
    est = inference.infer(request)
    out = args.output or "estimate"
    write_output(f"{out}.json", est.to_json())
    g = graph_from_adjacency(est.S, tol=1e-8)
    write_output(f"{out}.edges.csv", graph_to_edge_csv(g))
    return 0


def cmd_certify(args):
    cset = resolve_set(args)
    templates = resolve_templates(args, cset)
    g = load_graph(args.graph)
    S_true = gso_for(g, cset.kind).matrix
    if cset.kind == ADJACENCY:
        S_true = S_true / S_true[:, cset.scale_node].sum()
    if args.mode == "noiseless":
        cert = certificates.certify_noiseless(templates, S_true, cset)
    else:
        cert = certificates.certify_incomplete(templates, S_true, cset)
    fr = None
    if templates.num_templates == templates.n:
        fr = certificates.feasibility_rank(templates, cset)
    payload = cert.to_row(instance_id=args.graph)
    if fr is not None:
        payload["rank"] = fr["rank"]
        payload["singleton"] = fr["singleton"]
    write_output(args.output or "certificate.json", json.dumps(payload, indent=2))
    return 0


def cmd_baseline(args):
    X = ensemble_from_csv(Path(args.signals).read_text())
    R = evaluation.correlation_baseline(X, args.threshold)
    write_output(args.output or "correlation.csv", linalg.matrix_to_csv(R))
    return 0


def cmd_deconvolve(args):
    T = dense_matrix_from_csv(Path(args.input).read_text())
    S_true = None
    if args.truth:
        S_true = dense_matrix_from_csv(Path(args.truth).read_text())
    ks = [int(k) for k in args.top_k.split(",")]
    cfg = experiments.ExperimentConfig(
        experiment="deconvolution-demo", n=T.shape[0], epsilon=args.eps,
        top_k_grid=tuple(ks))
    rows, _ = experiments.deconvolution_demo(cfg, T_obs=T, S_true=S_true)
    write_output(args.output or "deconvolution.csv", experiments.rows_to_csv(rows))
    return 0


def cmd_benchmark(args):
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    if args.experiment:
        base["experiment"] = args.experiment
    if args.jobs is not None:
        base["jobs"] = args.jobs
    if args.output:
        base["output"] = args.output
    try:
        cfg = experiments.config_from_dict(base)
    except TypeError as exc:
        _fail(f"bad config: {exc}", EXIT_CONFIG)
    if args.print_config:
        print(json.dumps({**base, "config_hash": cfg.config_hash()}, indent=2,
                         default=str))
        return 0
    rows, summary = experiments.run_experiment(cfg)
    write_output(cfg.output, experiments.rows_to_csv(rows))
    summary_path = str(Path(cfg.output).with_suffix("")) + ".summary.csv"
    write_output(summary_path, experiments.rows_to_csv(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectempo",
                                 description="Graph topology from spectral templates")
    ap.add_argument("--json", action="store_true",
                    help="machine-readable errors on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a random graph")
    g.add_argument("--model", choices=["er", "ba"], required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=float, default=0.2)
    g.add_argument("--m0", type=int, default=4)
    g.add_argument("--m", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    d = sub.add_parser("diffuse", help="diffuse white signals through a graph filter")
    d.add_argument("--graph", required=True)
    d.add_argument("--gso", choices=list(SET_NAMES), default="adjacency")
    d.add_argument("--filter", default="spectral",
                   choices=["poly", "spectral", "precision-root",
                            "inverse-laplacian-root", "ar", "exponential"])
    d.add_argument("--coeffs", default="0,1", help="comma-separated poly coefficients")
    d.add_argument("--margin", type=float, default=1.0)
    d.add_argument("--samples", type=int, required=True)
    d.add_argument("--sigma", type=float, default=0.0)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_diffuse)

    i = sub.add_parser("infer", help="recover a shift operator from templates")
    i.add_argument("--templates", required=False, default="exact",
                   help="'exact', 'sample', 'matrix', or a templates CSV path")
    i.add_argument("--graph")
    i.add_argument("--signals")
    i.add_argument("--matrix")
    i.add_argument("--set", default="adjacency", choices=list(SET_NAMES))
    i.add_argument("--formulation", default="noiseless",
                   choices=["noiseless", "reweighted", "noisy", "incomplete",
                            "incomplete-noisy", "smooth-laplacian"])
    i.add_argument("--epsilon", default="auto")
    i.add_argument("--threshold", type=float, default=None)
    i.add_argument("--lag", type=int, default=3)
    i.add_argument("--gap", type=float, default=0.1)
    i.add_argument("--reweight-iters", type=int, default=10)
    i.add_argument("--scale-node", type=int, default=0)
    i.add_argument("--dump-problem")
    i.add_argument("--replay")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("-o", "--output")
    i.set_defaults(func=cmd_infer)

    c = sub.add_parser("certify", help="compute recovery certificates")
    c.add_argument("--templates", default="exact")
    c.add_argument("--graph", required=True)
    c.add_argument("--signals")
    c.add_argument("--matrix")
    c.add_argument("--set", default="adjacency", choices=list(SET_NAMES))
    c.add_argument("--mode", default="noiseless", choices=["noiseless", "incomplete"])
    c.add_argument("--scale-node", type=int, default=0)
    c.add_argument("--formulation", default="noiseless")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_certify)

    b = sub.add_parser("baseline", help="thresholded-correlation baseline")
    b.add_argument("--signals", required=True)
    b.add_argument("--threshold", type=float, required=True)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_baseline)

    dv = sub.add_parser("deconvolve", help="direct-edge recovery from a dependency matrix")
    dv.add_argument("--in", dest="input", required=True)
    dv.add_argument("--truth")
    dv.add_argument("--eps", type=float, default=1.0)
    dv.add_argument("--top-k", default="25,50,100,150,200")
    dv.add_argument("-o", "--output")
    dv.set_defaults(func=cmd_deconvolve)

    bm = sub.add_parser("benchmark", help="run a named experiment protocol")
    bm.add_argument("--experiment", choices=list(experiments.EXPERIMENTS))
    bm.add_argument("--config", help="JSON config file; flags override fields")
    bm.add_argument("--jobs", type=int, default=None)
    bm.add_argument("--print-config", action="store_true")
    bm.add_argument("--seed", type=int, default=None)
    bm.add_argument("-o", "--output")
    bm.set_defaults(func=cmd_benchmark)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _report(args, str(exc), exc.code)
        return exc.code
    except (Infeasible, NeverFeasible) as exc:
        _report(args, f"infeasible: {exc}", EXIT_SOLVER)
        return EXIT_SOLVER
    except SpectempoError as exc:
        _report(args, str(exc), EXIT_CONFIG)
        return EXIT_CONFIG
    except OSError as exc:
        _report(args, str(exc), EXIT_IO)
        return EXIT_IO


def _report(args, message, code):
    if getattr(args, "json", False):
        sys.stderr.write(json.dumps({"error": message, "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"error: {message}\n")


if __name__ == "__main__":
    sys.exit(main())
