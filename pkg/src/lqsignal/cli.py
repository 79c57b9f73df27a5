"""Subcommand front end: solve | simulate | dual | verify | export-plots-data.

Every artifact-producing command writes a manifest listing its outputs next
to them.  Exit codes: 0 success (solve: converged), 1 usage or input error,
2 best-effort result (solve stopped on budget), 3 verification failure.

Data artifacts are reproducible byte-for-byte from the same seed, except
for wall-clock fields (manifest `wall_clock_s`, trajectory
`resolve_times_ms`, stats resolve-time columns), which measure the host.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dual import (
    DualTree,
    column_generation,
    fixed_tree_dual_value,
    lambda_lp,
    load_dual_tree,
    typewise_backward_pass,
)
from .game import SpecFormatError, SpecValidationError, load_spec
from .optimize import (
    OptimizerConfig,
    load_policy,
    optimize,
    optimize_multistart,
    random_warm_starts,
    save_policy,
    save_trace,
)
from .riccati import complete_info_solve, evaluate_value
from .sim import (
    batch_experiment,
    load_noise,
    rollout,
    save_deltas_csv,
    save_stats,
    save_trajectories,
    trajectory_document,
)
from .tree import NodeId
from .verify import SUITES, run_suites

MANIFEST_VERSION = 1
DUAL_REPORT_VERSION = 1
PLOTS_DATA_VERSION = 1


class CliError(Exception):
    """Input or usage problem; message goes to stderr, exit code 1."""


def _parse_vector(text: str, n: int, what: str) -> np.ndarray:
    try:
        vec = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise CliError(f"could not parse {what}: {exc}") from None
    if vec.size != n:
        raise CliError(f"{what} has {vec.size} entries, expected {n}")
    return vec


def _load_spec(path: str):
    try:
        return load_spec(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None
    except (SpecFormatError, SpecValidationError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _write_manifest(
    out_dir: Path, command: str, config: dict, outputs: list[Path], t0: float
) -> Path:
    path = out_dir / "manifest.json"
    doc = {
        "version": MANIFEST_VERSION,
        "kind": "run_manifest",
        "command": command,
        "package_version": __version__,
        "config": config,
        "outputs": [p.name for p in outputs],
        "wall_clock_s": round(time.perf_counter() - t0, 3),
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# solve


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    spec = _load_spec(args.spec)
    out = _out_dir(args)
    x0 = (
        _parse_vector(args.x0, spec.n, "--x0")
        if args.x0 is not None
        else np.zeros(spec.n)
    )
    cfg = OptimizerConfig(
        step_size=args.step_size,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        loss_tol=args.loss_tol,
        seed=args.seed,
        # zero budget returns the uniform-mixing baseline, not a jittered init
        init_scale=0.0 if args.max_iters == 0 else args.init_scale,
    )
    sigma = None
    if args.noise_objective is not None:
        try:
            sigma = load_noise(args.noise_objective).Sigma
        except FileNotFoundError:
            raise CliError(f"{args.noise_objective}: no such file") from None

    if args.multistart > 0:
        starts = random_warm_starts(spec, scale=1.0, count=args.multistart, seed=cfg.seed)
        solved = optimize_multistart(spec, x0, cfg, starts=starts, sigma=sigma)
    else:
        solved = optimize(spec, x0, cfg, sigma=sigma)

    policy_path = out / "policy.json"
    trace_path = out / "trace.csv"
    save_policy(solved, spec, policy_path)
    save_trace(solved.trace, trace_path)
    manifest = _write_manifest(
        out,
        "solve",
        {
            "spec": args.spec,
            "x0": x0.tolist(),
            "optimizer": cfg.__dict__,
            "multistart": args.multistart,
            "noise_objective": args.noise_objective,
            "seed": args.seed,
        },
        [policy_path, trace_path],
        t0,
    )
    print(
        f"solve: value={solved.root_value:.6f} iters={solved.iterations} "
        f"grad_norm={solved.grad_norm_final:.3e} converged={solved.converged}"
    )
    print(f"wrote {policy_path}, {trace_path}, {manifest}")
    return 0 if solved.converged else 2


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    spec = _load_spec(args.spec)
    out = _out_dir(args)
    try:
        policy = load_policy(args.policy, spec)
    except FileNotFoundError:
        raise CliError(f"{args.policy}: no such file") from None
    except ValueError as exc:
        if "different spec" in str(exc):
            raise CliError(f"policy/spec mismatch: {exc}") from None
        raise CliError(str(exc)) from None

    noise = None
    if args.noise is not None and args.noise != "none":
        try:
            noise = load_noise(args.noise)
        except FileNotFoundError:
            raise CliError(f"{args.noise}: no such file") from None

    x0 = (
        _parse_vector(args.x0, spec.n, "--x0")
        if args.x0 is not None
        else policy.x0
    )
    config_echo = {
        "policy": args.policy,
        "spec": args.spec,
        "noise": args.noise,
        "resolve": args.resolve,
        "runs": args.runs,
        "seed": args.seed,
        "x0": x0.tolist(),
    }
    traj_path = out / "trajectories.jsonl"

    if args.resolve:
        rcfg = None
        if args.resolver_step is not None or args.resolver_iters is not None:
            rcfg = OptimizerConfig(
                step_size=args.resolver_step if args.resolver_step is not None else 4.0,
                max_iters=args.resolver_iters if args.resolver_iters is not None else 200,
                grad_tol=1e-3,
                loss_tol=1e-8,
            )
        stats, records, trajs = batch_experiment(
            policy,
            spec,
            x0,
            noise,
            n_runs=args.runs,
            base_seed=args.seed,
            resolver_config=rcfg,
            keep_trajectories=args.save_trajectories > 0,
        )
        stats_path = out / "stats.json"
        deltas_path = out / "deltas.csv"
        save_stats(stats, stats_path)
        save_deltas_csv(records, deltas_path)
        outputs = [stats_path, deltas_path]
        if args.save_trajectories > 0:
            save_trajectories(trajs[: 2 * args.save_trajectories], traj_path)
            outputs.append(traj_path)
        ci = "n/a" if stats.ci_low is None else f"[{stats.ci_low:+.4f}, {stats.ci_high:+.4f}]"
        std = "n/a" if stats.std_delta_cost is None else f"{stats.std_delta_cost:.4f}"
        print(
            f"simulate: n={stats.n_runs} mean_delta={stats.mean_delta_cost:+.4f} "
            f"std={std} ci95={ci} "
            f"resolve_ms={stats.mean_resolve_ms:.1f}±{stats.std_resolve_ms:.1f} "
            f"failed={stats.n_failed}"
        )
    else:
        trajs = [
            rollout(policy, spec, x0, noise=noise, resolve=False, seed=args.seed + i)
            for i in range(args.runs)
        ]
        save_trajectories(trajs, traj_path)
        costs = np.array([t.realized_cost for t in trajs])
        summary = {
            "version": 1,
            "kind": "rollout_summary",
            "n_runs": len(trajs),
            "mean_cost": float(np.mean(costs)),
            "std_cost": float(np.std(costs, ddof=1)) if len(trajs) > 1 else None,
        }
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(summary) + "\n")
        outputs = [traj_path, summary_path]
        print(f"simulate: n={len(trajs)} mean_cost={summary['mean_cost']:+.4f}")

    manifest = _write_manifest(out, "simulate", config_echo, outputs, t0)
    print(f"wrote {', '.join(str(p) for p in outputs)}, {manifest}")
    return 0


# ---------------------------------------------------------------------------
# dual


def _dual_probe_report(ct, tree, node: NodeId, x, p_hat, max_cols: int) -> dict:
    I = ct.spec.num_types
    W = fixed_tree_dual_value(ct, node, x, p_hat)
    coeffs = [ct.node_cost(i, node) for i in range(I)]
    entry = {
        "node": {"k": node.k, "omega": list(node.omega)},
        "x": np.asarray(x).tolist(),
        "p_hat": np.asarray(p_hat).tolist(),
        "value": W.value,
        "argmax": W.argmax,
        "active": W.active,
        "typewise": [
            {
                "J": evaluate_value(c, x),
                "P": c.P.tolist(),
                "r": c.r.tolist(),
                "c": c.c,
            }
            for c in coeffs
        ],
    }
    if node.k >= tree.horizon:
        # leaf probe: no children, the label LP and pricing are empty
        entry.update({"lambda_lp": None, "duality_gap": 0.0, "column_generation": None})
        return entry

    branching = tree.branching
    costs = np.array(
        [
            [
                evaluate_value(ct.edge_cost(i, node, a), x)
                for a in range(branching)
            ]
            for i in range(I)
        ]
    )
    lp = lambda_lp(p_hat, costs)
    dual_form = float(lp.q @ p_hat - np.max(lp.q @ costs))
    entry["lambda_lp"] = {
        "lam": lp.lam.tolist(),
        "value": lp.value,
        "q": lp.q.tolist(),
        "costs": costs.tolist(),
    }
    entry["duality_gap"] = abs(lp.value - dual_form)

    # price fresh prototypes against the first child's continuation; on a
    # uniform tree every sibling subtree is identical so this is exact
    j = node.flat(branching)
    prototypes = [tree.v[node.k][j, a] for a in range(branching)]
    continuations = ct.continuations(node.child(0))
    cg = column_generation(
        x, p_hat, continuations, ct.spec,
        initial_candidates=prototypes, max_cols=max_cols,
    )
    entry["column_generation"] = {
        "value": cg.value,
        "n_candidates": int(cg.candidates.shape[0]),
        "added": cg.added,
        "converged": cg.converged,
        "pricing_failed": cg.pricing_failed,
        "history": cg.history,
    }
    return entry


def cmd_dual(args) -> int:
    t0 = time.perf_counter()
    spec = _load_spec(args.spec)
    out = _out_dir(args)
    try:
        probes = json.loads(Path(args.probes).read_text())
    except FileNotFoundError:
        raise CliError(f"{args.probes}: no such file") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.probes}: {exc}") from None
    if not isinstance(probes, list):
        raise CliError(f"{args.probes}: expected a JSON list of probes")

    if args.tree is not None:
        try:
            tree = load_dual_tree(args.tree)
        except FileNotFoundError:
            raise CliError(f"{args.tree}: no such file") from None
    else:
        tree = DualTree.uniform(spec, horizon=args.horizon)
    ct = typewise_backward_pass(tree, spec)

    entries = []
    for idx, probe in enumerate(probes):
        where = f"probe {idx}"
        for key in ("k", "x", "p_hat"):
            if key not in probe:
                raise CliError(f"{where}: missing field {key!r}")
        node = NodeId(k=int(probe["k"]), omega=tuple(int(w) for w in probe.get("omega", [])))
        if len(node.omega) != node.k:
            raise CliError(f"{where}: omega length {len(node.omega)} != k {node.k}")
        x = _parse_vector(",".join(str(v) for v in probe["x"]), spec.n, f"{where} x")
        p_hat = np.asarray(probe["p_hat"], dtype=float).reshape(-1)
        if p_hat.size != spec.num_types:
            raise CliError(f"{where}: p_hat has {p_hat.size} entries, expected {spec.num_types}")
        entries.append(_dual_probe_report(ct, tree, node, x, p_hat, args.max_cols))

    report = {
        "version": DUAL_REPORT_VERSION,
        "kind": "dual_report",
        "horizon": tree.horizon,
        "probes": entries,
    }
    report_path = out / "dual_report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    manifest = _write_manifest(
        out,
        "dual",
        {"spec": args.spec, "tree": args.tree, "probes": args.probes,
         "horizon": args.horizon, "max_cols": args.max_cols, "seed": args.seed},
        [report_path],
        t0,
    )
    worst = max((e["duality_gap"] for e in entries), default=0.0)
    print(f"dual: {len(entries)} probes, worst duality gap {worst:.2e}")
    print(f"wrote {report_path}, {manifest}")
    return 0


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    out = _out_dir(args)
    names = None
    if args.suite:
        names = []
        for chunk in args.suite:
            names.extend(s.strip() for s in chunk.split(",") if s.strip())
    try:
        results = run_suites(names, seed=args.seed, inject_bug=args.inject_grad_bug)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(
            f"suite {r.name}: {status} ({r.cases} cases, "
            f"max_err {r.max_err:.2e} vs tol {r.tol:g}, {r.seconds:.2f}s)"
        )
    report = {
        "version": 1,
        "kind": "verify_report",
        "seed": args.seed,
        "suites": [r.to_document() for r in results],
    }
    report_path = out / "verify_report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(
        out,
        "verify",
        {"suite": names, "seed": args.seed, "inject_grad_bug": args.inject_grad_bug},
        [report_path],
        t0,
    )
    failing = [r for r in results if not r.passed]
    if failing:
        first = failing[0]
        print(
            f"verification failed in suite {first.name}; first failing case: "
            f"{json.dumps(first.detail)}",
            file=sys.stderr,
        )
        return 3
    return 0


# ---------------------------------------------------------------------------
# export-plots-data


def _complete_info_path(spec, type_index: int, x0: np.ndarray) -> dict:
    values, edges = complete_info_solve(spec, type_index)
    dyn = spec.dynamics
    K = spec.horizon
    states = np.zeros((K + 1, dyn.n))
    states[0] = x0
    cost = 0.0
    t = spec.types[type_index]
    for k in range(K):
        x = states[k]
        u = edges[k].K_u @ x + edges[k].kappa_u
        v = edges[k].K_v @ x + edges[k].kappa_v
        cost += 0.5 * dyn.tau * (u @ t.R @ u - v @ t.S @ v)
        states[k + 1] = dyn.A @ x + dyn.B1 @ u + dyn.B2 @ v
    xK = states[K]
    cost += 0.5 * xK @ t.Q @ xK + t.q @ xK + t.c
    return {
        "type": type_index,
        "states": states.tolist(),
        "cost": cost,
        "root_value": evaluate_value(values[0], x0),
    }


def cmd_export_plots_data(args) -> int:
    t0 = time.perf_counter()
    spec = _load_spec(args.spec)
    out = _out_dir(args)
    try:
        policy = load_policy(args.policy, spec)
    except FileNotFoundError:
        raise CliError(f"{args.policy}: no such file") from None
    except ValueError as exc:
        if "different spec" in str(exc):
            raise CliError(f"policy/spec mismatch: {exc}") from None
        raise CliError(str(exc)) from None
    x0 = (
        _parse_vector(args.x0, spec.n, "--x0")
        if args.x0 is not None
        else policy.x0
    )

    incomplete = []
    for i in range(spec.num_types):
        traj = rollout(
            policy, spec, x0, noise=None, resolve=False,
            seed=args.seed + i, force_type=i,
        )
        incomplete.append(trajectory_document(traj))
    complete = [_complete_info_path(spec, i, x0) for i in range(spec.num_types)]

    incomplete_value = evaluate_value(policy.value_tree.root, x0)
    complete_by_type = [c["root_value"] for c in complete]
    complete_weighted = float(np.dot(spec.prior, complete_by_type))
    doc = {
        "version": PLOTS_DATA_VERSION,
        "kind": "plots_data",
        "tau": spec.dynamics.tau,
        "horizon": spec.horizon,
        "x0": x0.tolist(),
        "num_types": spec.num_types,
        "incomplete": incomplete,
        "complete": complete,
        "values": {
            "incomplete_root": incomplete_value,
            "complete_by_type": complete_by_type,
            "complete_weighted": complete_weighted,
            "improvement": complete_weighted - incomplete_value,
        },
    }
    data_path = out / "plots_data.json"
    data_path.write_text(json.dumps(doc) + "\n")
    manifest = _write_manifest(
        out,
        "export-plots-data",
        {"policy": args.policy, "spec": args.spec, "x0": x0.tolist(), "seed": args.seed},
        [data_path],
        t0,
    )
    print(
        f"export-plots-data: incomplete value {incomplete_value:+.4f}, "
        f"type-weighted complete value {complete_weighted:+.4f}"
    )
    print(f"wrote {data_path}, {manifest}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqsignal",
        description=__doc__.splitlines()[0],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="optimize a signaling policy for a game spec")
    p.add_argument("spec", help="game spec JSON")
    p.add_argument("--x0", help="initial state, comma-separated (default zeros)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--loss-tol", type=float, default=1e-10)
    p.add_argument("--init-scale", type=float, default=1e-2)
    p.add_argument("--multistart", type=int, default=0,
                   help="also try N random warm starts (0 = single run)")
    p.add_argument("--noise-objective", metavar="NOISE_JSON",
                   help="optimize the stochastic value under this disturbance")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="roll out a solved policy, optionally paired with re-solving")
    p.add_argument("policy", help="solved policy JSON")
    p.add_argument("spec", help="game spec JSON")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--noise", help="noise model JSON, or 'none'")
    p.add_argument("--resolve", action="store_true",
                   help="paired experiment: re-solving arm vs committed arm")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--x0", help="initial state override (default: policy's x0)")
    p.add_argument("--resolver-step", type=float, help="re-solve step size")
    p.add_argument("--resolver-iters", type=int, help="re-solve iteration cap")
    p.add_argument("--save-trajectories", type=int, default=16, metavar="N",
                   help="keep the first N trajectory pairs (paired mode)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dual", help="evaluate the uninformed player's fixed-tree dual at probe points")
    p.add_argument("spec", help="game spec JSON")
    p.add_argument("--probes", required=True,
                   help="JSON list of {k, omega, x, p_hat} probes")
    p.add_argument("--tree", help="dual tree JSON (default: uniform tree)")
    p.add_argument("--horizon", type=int, default=None,
                   help="horizon for the generated uniform tree")
    p.add_argument("--max-cols", type=int, default=25)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dual)

    p = sub.add_parser("verify", help="run randomized oracle cross-check suites")
    p.add_argument("--suite", action="append",
                   help=f"suite name(s), comma-separable (default: all of {', '.join(SUITES)})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-grad-bug", action="store_true",
                   help="negative control: corrupt one gradient entry")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-plots-data",
                       help="emit per-type trajectory and value data for plotting")
    p.add_argument("policy", help="solved policy JSON")
    p.add_argument("spec", help="game spec JSON")
    p.add_argument("--x0", help="initial state override (default: policy's x0)")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export_plots_data)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv: list[str] | None = None) -> int:
    # kept for direct module use; the console script goes through the
    # thread-cap wrapper instead
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
