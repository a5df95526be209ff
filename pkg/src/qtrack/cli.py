"""qtrack command line: one subcommand per capability.

Exit codes: 0 success, 2 validation/input error, 3 solver failure.  Every
randomized command requires ``--seed`` and is byte-for-byte reproducible for a
fixed seed.  ``QTRACK_THREADS`` caps worker threads for batch commands.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analytic, applications, distances, multistep, serialize, tracking
from .channels import canonical_qubit, check_cptp, check_ppt, random_state
from .linalg import LinalgError
from .sdp import SolverError, SolverOptions
from .serialize import FormatError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3

PLOT_COLUMNS = {
    "stabilize_grid": ("p", "theta", "ddr1", "ddr2", "sdr", "dn", "qc"),
    "bound_scatter": ("d", "D", "one_minus_FN"),
    "multistep_sweep": ("lam1", "lam2", "t3", "class", "f_multi", "f_single"),
    "bench": ("measure", "mean_seconds"),
    "bound_report": ("measure", "value", "slack"),
}


def emit_plotdata(rows, kind):
    """Render sweep results as CSV with a stable column order (%.10e numbers)."""
    columns = PLOT_COLUMNS[kind]
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for col in columns:
            val = row[col]
            cells.append(val if isinstance(val, str) else "%.10e" % val)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _threads():
    try:
        return max(1, int(os.environ.get("QTRACK_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    n = _threads()
    if n == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _write(text, path=None):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_result(obj, args):
    """Scalar result payloads honor --format json|csv (key,value rows)."""
    if getattr(args, "format", "json") == "csv":
        lines = ["key,value"]
        for key in sorted(obj):
            val = obj[key]
            if isinstance(val, (int, float, bool, str)):
                cell = val if isinstance(val, str) else "%.10e" % float(val)
                lines.append(f"{key},{cell}")
        _write("\n".join(lines) + "\n", args.out)
    else:
        _write(serialize.dump_json(obj) + "\n", args.out)


def _cmd_distances(args):
    a = serialize.state_from_json(serialize.load_json(args.a))
    b = serialize.state_from_json(serialize.load_json(args.b))
    if args.bounds:
        report = distances.check_bounds(a, b)
        rows = [
            {"measure": k, "value": report["values"].get(k.split("_")[0], float("nan")), "slack": v}
            for k, v in report.items()
            if k not in ("rank", "values")
        ]
        for key, val in report["values"].items():
            rows.append({"measure": key, "value": val, "slack": float("nan")})
        _write(emit_plotdata(rows, "bound_report"), args.out)
        return EXIT_OK
    value = distances.measure(args.measure, a, b)
    _emit_result({"measure": args.measure, "value": value}, args)
    return EXIT_OK


def _cmd_scatter(args):
    rng = np.random.default_rng(args.seed)
    rows = []
    for _ in range(args.n):
        a = random_state(args.d, rng, pure=False)
        b = random_state(args.d, rng, pure=False)
        rows.append(
            {
                "d": float(args.d),
                "D": distances.trace_distance(a, b),
                "one_minus_FN": 1.0 - distances.super_fidelity(a, b),
            }
        )
    _write(emit_plotdata(rows, "bound_scatter"), args.out)
    return EXIT_OK


def _cmd_channel(args):
    choi = serialize.channel_from_json(serialize.load_json(args.infile))
    out = {
        "d": choi.d,
        "cptp": check_cptp(choi),
        "ppt": check_ppt(choi),
    }
    if choi.d == 2 and out["cptp"]["cp"] and out["cptp"]["tp"]:
        q = canonical_qubit(choi)
        out["canonical"] = {
            "mu": q.mu.tolist(),
            "s": q.s.tolist(),
            "V": serialize.matrix_to_json(q.V),
            "U": serialize.matrix_to_json(q.U),
        }
    _write(serialize.dump_json(out) + "\n", args.out)
    return EXIT_OK


def _cmd_solve(args):
    src, tgt = serialize.problem_from_json(serialize.load_json(args.problem))
    tp = tracking.TrackingProblem(src, tgt, args.objective, args.feasible)
    if args.dump_problem:
        serialize.dump_json(
            serialize.sdp_problem_to_json(tracking.assemble(tp)), args.dump_problem
        )
    res = tracking.solve_tracking(tp, SolverOptions(gap_tol=args.gap_tol))
    out = {
        "objective": args.objective,
        "feasible": args.feasible,
        "value": res.value,
        "controller": serialize.channel_to_json(res.controller),
        "cptp": res.cptp_report,
        "ppt": res.ppt_report,
        "certificate": {
            "gap": res.solution.gap if res.solution else 0.0,
            "residuals": res.solution.residuals if res.solution else {},
        },
    }
    if tp.d == 2:
        from .channels import apply_choi

        out["output_bloch"] = [
            apply_choi(res.controller, s).bloch.tolist() for s in src.states
        ]
    _write(serialize.dump_json(out) + "\n", args.out)
    return EXIT_OK


def _cmd_analytic(args):
    srcs = [serialize.state_from_json(serialize.load_json(p)) for p in args.src]
    tgts = [serialize.state_from_json(serialize.load_json(p)) for p in args.tgt]
    if len(srcs) != 2 or len(tgts) != 2:
        raise FormatError("analytic tracking needs exactly two sources and two targets")
    pi1 = args.pi[0]
    if abs(sum(args.pi) - 1.0) > 1e-12:
        raise FormatError("priorities must sum to one")
    res = analytic.track_pair(srcs[0], srcs[1], tgts[0], tgts[1], pi1)
    out = {
        "omega": res.omega,
        "procedure": res.procedure,
        "fidelity": res.fidelity,
        "unique": res.unique,
        "canonical": {
            "mu": res.canonical.mu.tolist(),
            "s": res.canonical.s.tolist(),
            "V": serialize.matrix_to_json(res.canonical.V),
            "U": serialize.matrix_to_json(res.canonical.U),
        },
        "certificate": {
            "coefficients": res.certificate.coefficients.tolist(),
            "min_eig": res.certificate.min_eig,
            "weak_duality_residual": res.certificate.weak_duality_residual,
            "slackness_residual": res.certificate.slackness_residual,
        },
        "controller": serialize.channel_to_json(res.choi),
    }
    _write(serialize.dump_json(out) + "\n", args.out)
    return EXIT_OK


def _cmd_stabilize(args):
    if args.grid:
        ps = np.linspace(0.5 / args.grid, 0.5, args.grid)
        thetas = np.linspace(np.pi / 2 / args.grid, np.pi / 2, args.grid)
        rows = []
        for p in ps:
            for th in thetas:
                f = applications.stabilization_fidelities(
                    applications.DephasingTask(p, th)
                )
                rows.append(
                    {
                        "p": p,
                        "theta": th,
                        "ddr1": f["ddr1"],
                        "ddr2": f["ddr2"],
                        "sdr": f["sdr"],
                        "dn": f["dn"],
                        "qc": f["qc_opt"],
                    }
                )
        _write(emit_plotdata(rows, "stabilize_grid"), args.out)
        return EXIT_OK
    task = applications.DephasingTask(args.p, args.theta)
    out = applications.stabilization_fidelities(task)
    out["quantum_certificate"] = applications.quantum_optimality_certificate(task)
    out["classical_certificate"] = applications.classical_optimality_certificate(task)
    _emit_result(out, args)
    return EXIT_OK


def _cmd_discriminate(args):
    a = serialize.state_from_json(serialize.load_json(args.a))
    b = serialize.state_from_json(serialize.load_json(args.b))
    out = applications.discriminate(a, b, args.p1)
    _emit_result(out, args)
    return EXIT_OK


def _cmd_clone(args):
    out = {
        "phi": args.phi,
        "pi1": args.pi1,
        "fidelity": applications.clone_fidelity(args.phi, args.pi1),
    }
    _emit_result(out, args)
    return EXIT_OK


def _cmd_au_check(args):
    srcs = [serialize.state_from_json(serialize.load_json(p)) for p in args.src]
    tgts = [serialize.state_from_json(serialize.load_json(p)) for p in args.tgt]
    out = applications.alberti_uhlmann(srcs[0], srcs[1], tgts[0], tgts[1])
    _write(serialize.dump_json(out) + "\n", args.out)
    return EXIT_OK


def _load_noise(obj):
    if "lam" in obj:
        return multistep.diagonal_noise(obj["lam"], obj.get("t", [0.0, 0.0, 0.0]))
    choi = serialize.channel_from_json(obj)
    return canonical_qubit(choi)


def _cmd_multistep(args):
    task_obj = serialize.load_json(args.task)
    src, tgt = serialize.problem_from_json(task_obj)
    if len(src) != 2:
        raise FormatError("multistep tracking supports pairs (I = 2)")
    if args.sweep:
        grid = np.linspace(args.sweep_min, args.sweep_max, args.sweep)

        def factory(noise):
            return multistep.ChainTask(
                list(src.states), list(tgt.states), src.priorities, [noise]
            )

        records = multistep.sweep_2step(
            factory, grid, grid, multistep.ChainOptions(restarts=args.restarts),
            seed=args.seed, mapper=lambda fn, items: _map(fn, list(items)),
        )
        _write(emit_plotdata(records, "multistep_sweep"), args.out)
        return EXIT_OK
    noises = [_load_noise(obj) for obj in serialize.load_json(args.noise)]
    if len(noises) != args.steps - 1:
        raise FormatError(f"{args.steps}-step chain needs {args.steps - 1} noises")
    task = multistep.ChainTask(list(src.states), list(tgt.states), src.priorities, noises)
    chain = multistep.solve_chain(
        task, multistep.ChainOptions(restarts=args.restarts), seed=args.seed
    )
    out = {
        "fidelity": chain.fidelity,
        "single_step_fidelity": task.single_step_fidelity(),
        "residual": chain.residual,
        "seed_chain": chain.seed_label,
        "controllers": [
            {
                "mu": ctrl.mu.tolist(),
                "s": ctrl.s.tolist(),
                "V": serialize.matrix_to_json(ctrl.V),
                "U": serialize.matrix_to_json(ctrl.U),
            }
            for ctrl in chain.controllers
        ],
    }
    _write(serialize.dump_json(out) + "\n", args.out)
    return EXIT_OK


def _cmd_compat(args):
    cells = [(int(i), int(d)) for i, d in (pair.split("x") for pair in args.cells)]
    results = tracking.compatibility_experiment(
        cells, args.samples, args.seed, target_pure=True
    )
    out = {}
    for cell, data in results.items():
        key = f"I{cell[0]}d{cell[1]}"
        out[key] = {
            "drops": {
                f"{x}|{y}": {"mean": m, "std": s}
                for (x, y), (m, s) in data["drops"].items()
            },
            "orderings": data["orderings"],
        }
    _write(serialize.dump_json(out) + "\n", args.out)
    return EXIT_OK


def _cmd_bench(args):
    rng = np.random.default_rng(args.seed)
    times = distances.benchmark_measures(args.d, args.repeats, rng)
    rows = [{"measure": k, "mean_seconds": v} for k, v in times.items()]
    ordering = sorted(times, key=times.get)
    _write(emit_plotdata(rows, "bench") + "# fastest-to-slowest: " + ",".join(ordering) + "\n", args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qtrack",
        description="Optimal quantum operations for tracking sequences of density matrices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distances", help="evaluate a distance/closeness measure")
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.add_argument("--measure", default="F", choices=distances.MEASURES)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--bounds", action="store_true", help="emit the bound-slack CSV report")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_distances)

    p = sub.add_parser("scatter-bounds", help="random-state scatter of D vs 1 - F_N")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_scatter)

    p = sub.add_parser("channel", help="inspect a channel (CPTP/PPT/canonical form)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_channel)

    p = sub.add_parser("solve", help="solve a tracking SDP")
    p.add_argument("--problem", required=True)
    p.add_argument("--objective", required=True, choices=tracking.OBJECTIVES)
    p.add_argument("--feasible", default="cptp", choices=tracking.FEASIBLE_SETS)
    p.add_argument("--gap-tol", type=float, default=1e-9)
    p.add_argument("--dump-problem", help="also write the assembled program as JSON")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("analytic", help="closed-form optimal tracker for a qubit pair")
    p.add_argument("--src", nargs=2, required=True)
    p.add_argument("--tgt", nargs=2, required=True)
    p.add_argument("--pi", nargs=2, type=float, default=[0.5, 0.5])
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_analytic)

    p = sub.add_parser("stabilize", help="dephasing stabilization fidelities")
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.add_argument("--p", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--grid", type=int, help="emit a grid CSV instead of one point")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_stabilize)

    p = sub.add_parser("discriminate", help="Helstrom vs tracking discrimination")
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_discriminate)

    p = sub.add_parser("clone", help="state-dependent cloning fidelity")
    p.add_argument("--format", default="json", choices=("json", "csv"))
    p.add_argument("--phi", type=float, required=True)
    p.add_argument("--pi1", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_clone)

    p = sub.add_parser("au-check", help="two-state convertibility criterion")
    p.add_argument("--src", nargs=2, required=True)
    p.add_argument("--tgt", nargs=2, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_au_check)

    p = sub.add_parser("multistep", help="multi-step chain solve or 2-step sweep")
    p.add_argument("--steps", type=int, default=2)
    p.add_argument("--noise", help="JSON list of noise channels")
    p.add_argument("--task", required=True, help="JSON with source/target sequences")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--sweep", type=int, help="grid size: sweep extremal noises instead")
    p.add_argument("--sweep-min", type=float, default=0.05)
    p.add_argument("--sweep-max", type=float, default=0.95)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_multistep)

    p = sub.add_parser("compat", help="cross-objective compatibility experiment")
    p.add_argument("--cells", nargs="+", default=["2x2"], help="IxD cells, e.g. 2x2 3x2")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_compat)

    p = sub.add_parser("bench", help="relative measure-cost ordering")
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (FormatError, LinalgError) as exc:
        print(f"qtrack: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"qtrack: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
