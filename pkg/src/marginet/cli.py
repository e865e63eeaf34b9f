"""Command-line entry point: reproducible, config-driven runs.

Every subcommand is fully determined by (flags, seed, workers); artifacts
are written atomically and contain no timestamps unless --timings is
passed, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .bn import (
    FIXTURES,
    BayesianNetwork,
    ancestral_samples,
    evidence_state,
    load_network,
    random_bn,
    save_network,
)
from .dataset import EncodingMode
from .errors import MarginetError
from .fileio import atomic_write_text
from .harness import SweepResult, architecture_sweep, beta_sweep, build_test_set, evaluate_model
from .mlp import TrainConfig, load_model, save_model, train
from .proposals import ProposalSpec, estimate


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_arch_csv(result: SweepResult, path) -> None:
    _write_csv(
        path,
        ["config", "encoding", "mae", "max_ae"],
        [[r.label, r.encoding, r.mae, r.max_ae] for r in result.rows],
    )


def write_beta_csv(result: SweepResult, path) -> None:
    _write_csv(
        path,
        ["beta", "samples", "pearson", "ess"],
        [[r.beta, r.n_samples, r.pearson, r.ess] for r in result.rows],
    )


def write_ess_csv(result: SweepResult, path) -> None:
    _write_csv(path, ["beta", "ess"], [[r.beta, r.ess] for r in result.rows])


def _report(path, experiment: str, seed: int, config: dict, wall_ms) -> None:
    digest = hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()
    doc = {
        "experiment": experiment,
        "seed": seed,
        "config": config,
        "config_sha256": digest,
        "version": __version__,
        "wall_time_ms": wall_ms,
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def _load_net(args) -> BayesianNetwork:
    if getattr(args, "network", None):
        return load_network(args.network)
    return random_bn(args.nodes, args.max_parents, args.edge_prob, args.seed)


def _parse_evidence(bn: BayesianNetwork, pairs: list[str]) -> np.ndarray:
    assignments = {}
    for pair in pairs:
        name, _, raw = pair.partition("=")
        val = {"0": 0, "1": 1, "true": 1, "false": 0}.get(raw.lower())
        if not name or val is None:
            raise MarginetError(f"evidence must look like NAME=0 or NAME=1, got {pair!r}")
        assignments[name] = val
    return evidence_state(bn, assignments)


def _hidden(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen_net(args) -> int:
    if args.fixture:
        bn = FIXTURES[args.fixture]()
    else:
        if args.nodes is None:
            raise MarginetError("gen-net needs --fixture or --nodes")
        bn = random_bn(args.nodes, args.max_parents, args.edge_prob, args.seed)
    save_network(bn, args.output)
    print(f"wrote {args.output} ({bn.n_nodes} nodes)")
    return 0


def cmd_sample(args) -> int:
    bn = _load_net(args)
    rng = np.random.default_rng(args.seed)
    xs = ancestral_samples(bn, args.count, rng)
    lines = [",".join(bn.names)]
    lines += [",".join(str(int(v)) for v in row) for row in xs]
    atomic_write_text(args.output, "\n".join(lines) + "\n")
    print(f"wrote {args.output} ({args.count} samples)")
    return 0


def cmd_train(args) -> int:
    bn = _load_net(args)
    cfg = TrainConfig(
        hidden=args.hidden,
        iterations=args.iterations,
        batch_size=args.batch_size,
        encoding=EncodingMode(args.encoding),
        seed=args.seed,
        lr=args.lr,
        dropout_rate=args.dropout,
    )
    eval_cases = None
    if args.eval_cases:
        eval_cases = build_test_set(bn, args.eval_cases, np.random.default_rng(args.seed + 1))
    model, report = train(bn, cfg, eval_cases=eval_cases)
    save_model(model, args.output)
    if args.loss_csv:
        _write_csv(args.loss_csv, ["iteration", "loss"], [[i, l] for i, l in report.loss_curve])
    final_loss = report.loss_curve[-1][1] if report.loss_curve else float("nan")
    print(f"wrote {args.output}; final loss {final_loss:.4f}")
    if report.final_mae is not None:
        print(f"eval MAE {report.final_mae:.4f} max AE {report.final_max_ae:.4f}")
    return 0


def cmd_infer(args) -> int:
    bn = _load_net(args)
    evidence = _parse_evidence(bn, args.evidence)
    spec = ProposalSpec(
        variant=args.proposal,
        beta=args.beta,
        epsilon_clamp=args.epsilon,
        marginal_source=args.marginal_source,
    )
    model = load_model(args.model) if args.model else None
    rng = np.random.default_rng(args.seed)
    start = time.perf_counter()
    result, _, logw = estimate(
        bn, evidence, spec, model, args.samples, rng, workers=args.workers, return_raw=True
    )
    wall_ms = (time.perf_counter() - start) * 1000.0
    doc = {
        "proposal": {
            "variant": spec.variant,
            "beta": spec.beta,
            "epsilon_clamp": spec.epsilon_clamp,
            "marginal_source": spec.marginal_source,
        },
        "n_samples": result.n_samples,
        "seed": args.seed,
        "workers": args.workers,
        "ess": result.ess,
        "max_log_weight": result.max_log_weight,
        "nodes": bn.names,
        "marginals": [float(p) for p in result.marginals],
        "wall_time_ms": wall_ms if args.timings else None,
    }
    text = json.dumps(doc, indent=2) + "\n"
    sys.stdout.write(text)
    if args.report:
        atomic_write_text(args.report, text)
    if args.weights_csv:
        _write_csv(args.weights_csv, ["log_weight"], [[float(lw)] for lw in logw])
    return 0


def cmd_eval(args) -> int:
    bn = _load_net(args)
    model = load_model(args.model)
    cases = build_test_set(bn, args.cases, np.random.default_rng(args.seed))
    m, mx, r = evaluate_model(model, cases)
    doc = {"n_cases": args.cases, "seed": args.seed, "mae": m, "max_ae": mx, "pearson": r}
    text = json.dumps(doc, indent=2) + "\n"
    sys.stdout.write(text)
    if args.output:
        atomic_write_text(args.output, text)
    return 0


def cmd_experiment(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    out = lambda name: os.path.join(args.out_dir, name)
    start = time.perf_counter()
    config = {
        "which": args.which,
        "nodes": args.nodes,
        "iterations": args.iterations,
        "cases": args.cases,
        "samples": args.samples,
        "betas": args.betas,
        "hidden": list(args.hidden),
        "workers": args.workers,
    }

    if args.which == "pathology":
        bn = FIXTURES["pathology"]()
        evidence = evidence_state(bn, {"E": 1})
        rng = np.random.default_rng(args.seed)
        mp = ProposalSpec(variant="marginal-product", marginal_source="exact")
        seq = ProposalSpec(variant="sequential", marginal_source="exact")
        _, _, logw_mp = estimate(bn, evidence, mp, None, args.samples, rng.spawn(1)[0],
                                 workers=args.workers, return_raw=True)
        _, _, logw_seq = estimate(bn, evidence, seq, None, args.samples, rng.spawn(1)[0],
                                  workers=args.workers, return_raw=True)
        w_mp = np.exp(logw_mp)
        w_seq = np.exp(logw_seq)
        var_mp = float(w_mp.var())
        var_seq = float(w_seq.var())
        ratio = var_mp / max(var_seq, 1e-300)
        doc = {
            "samples": args.samples,
            "seed": args.seed,
            "weight_variance_marginal_product": var_mp,
            "weight_variance_sequential_oracle": var_seq,
            "variance_ratio": ratio,
        }
        atomic_write_text(out("pathology.json"), json.dumps(doc, indent=2) + "\n")
        print(f"variance ratio {ratio:.3g} (marginal-product vs sequential-oracle)")
    else:
        bn = _load_net(args)
        rng = np.random.default_rng(args.seed)
        test_set = build_test_set(bn, args.cases, rng.spawn(1)[0])
        if args.which == "arch":
            configs = [(h, enc.value) for h in [(64,), (256,), (128, 128)] for enc in EncodingMode]
            base = TrainConfig(iterations=args.iterations, seed=args.seed)
            result = architecture_sweep(bn, test_set, configs, base)
            write_arch_csv(result, out("arch_sweep.csv"))
            print(f"wrote {out('arch_sweep.csv')} ({len(result.rows)} rows)")
        else:
            cfg = TrainConfig(hidden=args.hidden, iterations=args.iterations, seed=args.seed)
            model, _ = train(bn, cfg)
            if args.which == "beta":
                # two checkpoints: an eighth of the budget and the full budget
                counts = sorted({args.samples // 8, args.samples})
                result = beta_sweep(bn, model, test_set, args.betas, [c for c in counts if c > 0],
                                    rng.spawn(1)[0], workers=args.workers,
                                    include_reference=args.reference)
                write_beta_csv(result, out("beta_sweep.csv"))
                print(f"wrote {out('beta_sweep.csv')} ({len(result.rows)} rows)")
            else:  # ess
                result = beta_sweep(bn, model, test_set, args.betas, [args.samples],
                                    rng.spawn(1)[0], workers=args.workers)
                write_ess_csv(result, out("ess.csv"))
                print(f"wrote {out('ess.csv')} ({len(result.rows)} rows)")

    wall_ms = (time.perf_counter() - start) * 1000.0
    _report(out("report.json"), args.which, args.seed, config,
            wall_ms if args.timings else None)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marginet",
        description="Train a posterior-marginal predictor for a binary Bayesian "
        "network and use it to drive importance sampling.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_net_args(p, required=False):
        p.add_argument("--network", help="network JSON file")
        p.add_argument("--nodes", type=int, default=None if required else 15,
                       help="generate a random network of this size instead")
        p.add_argument("--max-parents", type=int, default=3, dest="max_parents")
        p.add_argument("--edge-prob", type=float, default=0.35, dest="edge_prob")

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--timings", action="store_true",
                       help="include wall-clock times in reports (breaks rerun byte-identity)")

    p = sub.add_parser("gen-net", help="write a network JSON file")
    p.add_argument("--fixture", choices=sorted(FIXTURES))
    p.add_argument("--nodes", type=int)
    p.add_argument("--max-parents", type=int, default=3, dest="max_parents")
    p.add_argument("--edge-prob", type=float, default=0.35, dest="edge_prob")
    p.add_argument("-o", "--output", required=True)
    add_common(p)
    p.set_defaults(func=cmd_gen_net)

    p = sub.add_parser("sample", help="draw joint samples to CSV")
    add_net_args(p)
    p.add_argument("-n", "--count", type=int, default=1000)
    p.add_argument("-o", "--output", required=True)
    add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="train a marginal predictor")
    add_net_args(p)
    p.add_argument("--hidden", type=_hidden, default=(256,),
                   help="hidden layer sizes, comma separated (e.g. 128,128)")
    p.add_argument("--iterations", type=int, default=20_000)
    p.add_argument("--batch-size", type=int, default=128, dest="batch_size")
    p.add_argument("--encoding", choices=[m.value for m in EncodingMode],
                   default=EncodingMode.TWO_BIT.value)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--eval-cases", type=int, default=0, dest="eval_cases",
                   help="evaluate against exact posteriors on this many cases")
    p.add_argument("--loss-csv", dest="loss_csv")
    p.add_argument("-o", "--output", required=True)
    add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="estimate posterior marginals by importance sampling")
    add_net_args(p)
    p.add_argument("--model")
    p.add_argument("--proposal", choices=["prior", "marginal-product", "sequential", "hybrid"],
                   default="prior")
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--marginal-source", choices=["model", "exact"], default="model",
                   dest="marginal_source")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("-e", "--evidence", action="append", default=[],
                   help="NAME=0 or NAME=1, repeatable")
    p.add_argument("--report", help="also write the JSON report to this file")
    p.add_argument("--weights-csv", dest="weights_csv", help="dump raw log weights")
    add_common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score a trained model against exact posteriors")
    add_net_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("-o", "--output")
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run a canned sweep end to end")
    p.add_argument("which", choices=["arch", "beta", "ess", "pathology"])
    add_net_args(p)
    p.add_argument("--iterations", type=int, default=20_000)
    p.add_argument("--hidden", type=_hidden, default=(256,))
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--samples", type=int, default=25_000)
    p.add_argument("--betas", type=lambda s: [float(b) for b in s.split(",")],
                   default=[0.0, 0.1, 0.25, 0.5, 0.75, 1.0])
    p.add_argument("--reference", action="store_true",
                   help="add a sequential-oracle anchor row to the beta sweep")
    p.add_argument("--out-dir", default=".", dest="out_dir")
    add_common(p)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MarginetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
