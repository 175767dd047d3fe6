"""Command-line entry point: gen, solve, eval, oracle, bench, render."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from .gpm import SCHEDULES, compute_video_labels, infer
from .instance import dumps, load_instance, save_instance
from .label_solver import (
    BRUTE_FORCE_MAX_STATES,
    alpha_expansion,
    brute_force_labeling,
    build_expansion_problem,
    check_submodular,
    solve_labeling,
)
from .metrics import evaluate
from .slice_solver import BRUTE_FORCE_MAX_NODES, brute_force_slice, slice_costs, slice_objective, solve_slice_dp
from .synth import ConfigError, SynthConfig, corrupt, generate

TRACE_COLUMNS = (
    "iteration",
    "labeling_before",
    "labeling_energy",
    "slice_objective",
    "total_energy",
    "active_nodes",
    "labels_changed",
    "solver",
    "metric",
)


class CliError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _tsv(rows) -> str:
    return "".join("\t".join(_fmt(c) for c in r) + "\n" for r in rows)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from None


def truth_path_for(instance_path) -> Path:
    p = Path(instance_path)
    return p.with_name(p.name.removesuffix(".json") + ".truth.json")


def solution_path_for(instance_path) -> Path:
    p = Path(instance_path)
    return p.with_name(p.name.removesuffix(".json") + ".solution.json")


def trace_path_for(solution_path) -> Path:
    p = Path(solution_path)
    return p.with_name(p.name.removesuffix(".json").removesuffix(".solution") + ".trace.tsv")


# ---- gen


def cmd_gen(args) -> int:
    cfg = SynthConfig.from_dict(_read_json(args.config)) if args.config else SynthConfig()
    if args.seed is not None:
        cfg = SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    inst, truth = generate(cfg)
    if args.flip_fraction:
        flip_seed = cfg.seed + 1 if args.flip_seed is None else args.flip_seed
        inst = corrupt(inst, truth, args.flip_fraction, flip_seed)
    out = Path(args.output)
    save_instance(inst, out)
    tp = truth_path_for(out)
    names = [inst.labels.name(k) for k in range(inst.labels.n_labels)]
    tp.write_text(dumps({"labeling": truth.tolist(), "segment_sizes": inst.graph.segment_sizes.tolist(), "classes": names}))
    print(
        f"wrote {out} ({inst.n_segments} segments, {len(inst.graph.edges)} edges, {inst.tree.n_nodes} tree nodes) and {tp}"
    )
    return 0


# ---- solve


def solve_file(path, out, use_gpm, use_video, max_iters, seed, schedule, figure=None) -> str:
    inst = load_instance(path)
    sol = infer(inst, use_gpm=use_gpm, use_video=use_video, max_iters=max_iters, seed=seed, schedule=schedule)
    d = sol.to_dict()
    d["classes"] = [inst.labels.name(k) for k in range(inst.labels.n_labels)]
    Path(out).write_text(dumps(d))
    rows = [TRACE_COLUMNS] + [[r[c] for c in TRACE_COLUMNS] for r in sol.trace]
    trace_path_for(out).write_text(_tsv(rows))
    if figure and sol.trace:
        from .plotting import trace_figure

        trace_figure(sol.trace, figure)
    status = "converged" if sol.converged else "stopped"
    return f"{path}\t{out}\t{status}\t{sol.iterations}"


def cmd_solve(args) -> int:
    src = Path(args.instance)
    opts = dict(
        use_gpm=not args.no_gpm,
        use_video=not args.no_video,
        max_iters=args.max_iters,
        seed=args.seed,
        schedule=args.schedule,
    )
    if src.is_dir():
        files = sorted(p for p in src.glob("*.json") if not p.name.endswith((".truth.json", ".solution.json")))
        if not files:
            raise CliError(f"{src}: no instance files")
        out_dir = Path(args.output) if args.output else src
        out_dir.mkdir(parents=True, exist_ok=True)
        outs = [out_dir / solution_path_for(p).name for p in files]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                futs = [ex.submit(solve_file, p, o, **opts) for p, o in zip(files, outs)]
                lines = [f.result() for f in futs]
        else:
            lines = [solve_file(p, o, **opts) for p, o in zip(files, outs)]
    else:
        out = Path(args.output) if args.output else solution_path_for(src)
        lines = [solve_file(src, out, figure=args.figure, **opts)]
    for line in lines:
        print(line)
    return 0


# ---- eval


def cmd_eval(args) -> int:
    sol = _read_json(args.solution)
    truth = _read_json(args.truth)
    pred = np.asarray(sol["labeling"], dtype=np.int64)
    gt = np.asarray(truth["labeling"], dtype=np.int64)
    if pred.shape != gt.shape:
        raise CliError(f"segment count mismatch: solution has {pred.size}, truth has {gt.size}")
    names = truth["classes"]
    n = len(names)
    if pred.size and (pred.min() < 0 or pred.max() >= n):
        raise CliError(f"solution labels out of range [0, {n})")
    rep = evaluate(pred, gt, truth["segment_sizes"], n)
    if args.json:
        sys.stdout.write(dumps(rep.to_dict(names)))
    else:
        rows = [("metric", "value"), ("average_per_class", rep.average_per_class), ("global_accuracy", rep.global_accuracy)]
        for name, acc in zip(names, rep.per_class_accuracy):
            if not np.isnan(acc):
                rows.append((f"per_class:{name}", float(acc)))
        sys.stdout.write(_tsv(rows))
    if args.figure:
        from .plotting import confusion_figure

        confusion_figure(rep, names, args.figure)
    return 0


# ---- oracle


def cmd_oracle(args) -> int:
    inst = load_instance(args.instance)
    tree = inst.tree
    if tree.n_nodes > BRUTE_FORCE_MAX_NODES:
        raise CliError(f"instance too large for slice enumeration: {tree.n_nodes} tree nodes > {BRUTE_FORCE_MAX_NODES}")
    states = inst.labels.n_labels**inst.n_segments
    if states > BRUTE_FORCE_MAX_STATES:
        raise CliError(
            f"instance too large for labeling enumeration: {inst.labels.n_labels}^{inst.n_segments} states > {BRUTE_FORCE_MAX_STATES}"
        )
    v = compute_video_labels(inst)
    L0 = np.argmin(inst.unary_matrix, axis=1)
    costs = slice_costs(L0, inst)
    s_dp = solve_slice_dp(tree, costs)
    s_bf = brute_force_slice(tree, costs)
    e_dp, e_bf = slice_objective(s_dp, costs), slice_objective(s_bf, costs)

    problem = build_expansion_problem(inst, s_dp, v, L0)
    metric = check_submodular(problem)
    if metric:
        L, solver = alpha_expansion(problem, L0, seed=args.seed, check=False), "alpha_expansion"
    else:
        L, solver = solve_labeling(problem, L0, seed=args.seed)
    L_bf = brute_force_labeling(problem)
    l_prod, l_bf = problem.energy(L), problem.energy(L_bf)
    rel = (l_prod - l_bf) / max(1.0, abs(l_bf))
    rows = [
        ("problem", "solver", "production", "oracle", "gap", "relative_gap"),
        ("slice", "tree_dp", e_dp, e_bf, e_dp - e_bf, (e_dp - e_bf) / max(1.0, abs(e_bf))),
        ("labeling", solver, l_prod, l_bf, l_prod - l_bf, rel),
    ]
    sys.stdout.write(_tsv(rows))
    return 0


# ---- bench

PHASES = ("init", "slice", "labeling", "total")


def bench_samples(inst, repeats: int, **opts) -> dict:
    samples = {p: [] for p in PHASES}
    for _ in range(repeats):
        t0 = time.perf_counter()
        sol = infer(inst, **opts)
        total = time.perf_counter() - t0
        samples["init"].append(sol.timings["init"])
        samples["slice"].append(sum(sol.timings["slice"]))
        samples["labeling"].append(sum(sol.timings["labeling"]))
        samples["total"].append(total)
    return samples


def cmd_bench(args) -> int:
    if args.repeats < 1:
        raise CliError("repeats must be >= 1")
    inst = load_instance(args.instance)
    if args.warmup:
        infer(inst, max_iters=1)  # compile numba kernels outside the timed runs
    samples = bench_samples(inst, args.repeats)
    rows = [("phase", "median_seconds", "n_samples", "samples")]
    for p in PHASES:
        xs = samples[p]
        rows.append((p, statistics.median(xs), len(xs), ",".join(f"{x:.6f}" for x in xs)))
    sys.stdout.write(_tsv(rows))
    if args.figure:
        from .plotting import bench_figure

        bench_figure(samples, args.figure)
    return 0


# ---- render


def cmd_render(args) -> int:
    from .render import write_frame

    inst = load_instance(args.instance)
    labeling = np.asarray(_read_json(args.solution)["labeling"], dtype=np.int64)
    if labeling.size != inst.n_segments:
        raise CliError(f"segment count mismatch: labeling has {labeling.size}, instance has {inst.n_segments}")
    if inst.graph.layout is None:
        raise CliError("instance has no frame layout; cannot render")
    w, h = write_frame(args.output, labeling, inst.graph.layout, args.frame, inst.labels.n_labels)
    print(f"wrote {args.output} ({w}x{h})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpmseg", description="Joint actor-action video labeling with a grouping process.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a planted-truth synthetic instance")
    p.add_argument("config", nargs="?", help="JSON config file (defaults when omitted)")
    p.add_argument("-o", "--output", required=True, help="instance path; truth goes to <stem>.truth.json")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--flip-fraction", type=float, default=0.0, help="corrupt this fraction of unary rows")
    p.add_argument("--flip-seed", type=int, help="corruption seed (default: config seed + 1)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run inference on an instance file or a directory of them")
    p.add_argument("instance")
    p.add_argument("-o", "--output", help="solution path (or output directory for directory input)")
    p.add_argument("--no-gpm", action="store_true", help="stop after the initial labeling")
    p.add_argument("--no-video", action="store_true", help="drop video-level terms")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--schedule", choices=SCHEDULES, default="labeling-first")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for directory input")
    p.add_argument("--figure", help="write an energy trace figure (single instance only)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="score a solution against ground truth")
    p.add_argument("solution")
    p.add_argument("truth")
    p.add_argument("--json", action="store_true", help="full report as JSON instead of TSV")
    p.add_argument("--figure", help="write a confusion-matrix figure")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="compare production solvers with exhaustive search")
    p.add_argument("instance")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="time inference phases")
    p.add_argument("instance")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--no-warmup", dest="warmup", action="store_false")
    p.add_argument("--figure", help="write a box plot of phase timings")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="render one frame of a labeling as PPM")
    p.add_argument("solution", help="solution or truth file")
    p.add_argument("instance")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except jsonschema.ValidationError as e:
        where = "/".join(str(x) for x in e.absolute_path) or "<root>"
        msg = f"schema violation at {where}: {e.message}"
    except (CliError, ConfigError, ValueError, KeyError, OSError) as e:
        msg = str(e) if not isinstance(e, KeyError) else f"missing field {e}"
    print("error: " + " ".join(msg.split()), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
