"""Batch experiment runner.

Subcommands reproduce the benchmark tables, the initialization-scaling
study, and the classical quench reference. Every output file embeds the
fully-resolved configuration; all commands are deterministic given
``--seed``. Exit codes: 0 success, 2 completed-but-not-converged,
1 error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys

import numpy as np

from . import adapt, aqctensor
from .bench import aggregate, random_chi2_state
from .circuits import Circuit, cnot_metrics
from .errors import MpsaqcError
from .physics import (
    DmrgConfig,
    QuenchSpec,
    XXZParams,
    ground_state,
    neel_state,
    staggered_magnetization,
    tebd_evolve,
    trotter2_circuit,
)
from .sequential import ran_prepare, schon_prepare
from .simulator import simulate
from .tensor import MPSState, TruncationPolicy, fidelity, log10_fidelity

log = logging.getLogger("mpsaqc")

ALL_METHODS = ("schon", "ran", "adapt", "aqc-tensor")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


# -- output helpers ----------------------------------------------------


def _write_csv(path: str, config: dict, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as f:
        for k, v in sorted(config.items()):
            f.write(f"# {k}={json.dumps(v)}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_csv_cell(x) for x in row) + "\n")


def _csv_cell(x) -> str:
    if isinstance(x, float):
        return format(x, ".10g")
    return str(x)


def _write_json(path: str, config: dict, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump({"config": config, "results": payload}, f, indent=2, sort_keys=True)
        f.write("\n")


def _svg_line_plot(series: dict[str, tuple[list, list]], xlabel: str,
                   ylabel: str, config: dict,
                   width: int = 640, height: int = 420) -> str:
    """Minimal multi-series line plot (no plotting dependency)."""
    pad = 56
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys]
    if not xs_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(ys_all), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f"<desc>{json.dumps(config, sort_keys=True)}</desc>",
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
           f'y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" '
           f'font-size="13">{xlabel}</text>',
           f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 16 {height / 2:.0f})">{ylabel}</text>']
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        out.append(f'<text x="{px(xv):.1f}" y="{height - pad + 16}" '
                   f'text-anchor="middle" font-size="11">{xv:.3g}</text>')
        out.append(f'<text x="{pad - 6}" y="{py(yv) + 4:.1f}" text-anchor="end" '
                   f'font-size="11">{yv:.3g}</text>')
    for idx, (name, (xs, ys)) in enumerate(sorted(series.items())):
        color = colors[idx % len(colors)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   'stroke-width="1.5"/>')
        out.append(f'<text x="{width - pad + 4}" y="{pad + 16 * idx + 10}" '
                   f'font-size="12" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out)


def _emit(out: str, formats: list[str], config: dict, header: list[str],
          rows: list[list], results: dict,
          svg_series: dict | None = None, svg_labels=("x", "y")) -> None:
    base, ext = os.path.splitext(out)
    if ext.lstrip(".") in ("csv", "json", "svg"):
        formats = [ext.lstrip(".")]
        out = base
    parent = os.path.dirname(os.path.abspath(out))
    os.makedirs(parent, exist_ok=True)
    if "csv" in formats:
        _write_csv(out + ".csv", config, header, rows)
        log.info("wrote %s.csv", out)
    if "json" in formats:
        _write_json(out + ".json", config, results)
        log.info("wrote %s.json", out)
    if "svg" in formats and svg_series is not None:
        with open(out + ".svg", "w") as f:
            f.write(_svg_line_plot(svg_series, svg_labels[0], svg_labels[1], config))
        log.info("wrote %s.svg", out)


def _run_parallel(fn, items, jobs: int) -> list:
    """Map fn over items, in order, optionally across processes."""
    if jobs <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# -- method dispatch ---------------------------------------------------


def _compile_with(method: str, target: MPSState, epsilon: float,
                  layers: int, threshold: float) -> tuple[dict, Circuit]:
    """Compile target with one method; returns (metrics record, circuit)."""
    if method == "schon":
        circ = schon_prepare(target)
        prepared = simulate(circ, policy=TruncationPolicy(threshold, None))
        fid = fidelity(prepared, target.normalized())
        m = cnot_metrics(circ)
        return {"fidelity": fid, "depth": m["depth"], "count": m["count"],
                "converged": True}, circ
    if method == "ran":
        circ, fid = ran_prepare(target, layers)
        m = cnot_metrics(circ)
        return {"fidelity": fid, "depth": m["depth"], "count": m["count"],
                "converged": fid >= 1.0 - epsilon}, circ
    if method == "adapt":
        res = adapt.compile(target, adapt.AdaptConfig(
            epsilon=epsilon, sim_threshold=threshold))
    elif method == "aqc-tensor":
        res = aqctensor.compile(target, layers, aqctensor.TensorConfig(
            epsilon=epsilon, sim_threshold=threshold))
    else:
        raise ValueError(f"unknown method {method!r}")
    return {"fidelity": res.fidelity, "depth": res.cnot_depth,
            "count": res.cnot_count, "converged": res.converged}, res.circuit


def _default_layers(method: str, layers: int | None) -> int:
    if layers is not None:
        return layers
    return {"ran": 5, "aqc-tensor": 1}.get(method, 1)


# -- subcommands -------------------------------------------------------


def _bench_one(task):
    """Worker: compile one random-MPS instance with one method."""
    idx, method, L, seed, epsilon, layers, threshold = task
    target = random_chi2_state(L, seed)
    r, _circ = _compile_with(method, target, epsilon,
                             _default_layers(method, layers), threshold)
    log.info("instance %d %s: fid %.4f depth %d count %d",
             idx, method, r["fidelity"], r["depth"], r["count"])
    return {"instance": idx, "method": method, "seed": seed, **r}


def cmd_random_mps_benchmark(args) -> int:
    methods = args.method or list(ALL_METHODS)
    for m in methods:
        if m not in ALL_METHODS:
            raise ValueError(f"unknown method {m!r}")
    config = {"command": "random-mps-benchmark", "n_instances": args.n_instances,
              "L": args.length, "chi": 2, "epsilon": args.epsilon,
              "layers": args.layers, "threshold": args.threshold,
              "methods": methods, "seed": args.seed, "jobs": args.jobs}
    tasks = [(i, m, args.length, args.seed + i, args.epsilon, args.layers,
              args.threshold)
             for m in methods for i in range(args.n_instances)]
    records = _run_parallel(_bench_one, tasks, args.jobs)
    records.sort(key=lambda r: (r["method"], r["instance"]))

    header = ["method", "instance", "seed", "fidelity", "depth", "count", "converged"]
    rows = [[r[k] for k in header] for r in records]
    summary = {}
    for m in methods:
        sub = [r for r in records if r["method"] == m]
        summary[m] = {
            "fidelity": aggregate([r["fidelity"] for r in sub]),
            "depth": aggregate([float(r["depth"]) for r in sub]),
            "count": aggregate([float(r["count"]) for r in sub]),
            "n_converged": sum(r["converged"] for r in sub),
        }
    svg = {m: ([r["instance"] for r in records if r["method"] == m],
               [r["fidelity"] for r in records if r["method"] == m])
           for m in methods}
    _emit(args.out, args.format, config, header, rows,
          {"instances": records, "summary": summary},
          svg_series=svg, svg_labels=("instance", "fidelity"))
    all_ok = all(r["converged"] for r in records)
    return EXIT_OK if all_ok else EXIT_NOT_CONVERGED


def cmd_xxz_groundstate(args) -> int:
    methods = args.method or list(ALL_METHODS)
    for m in methods:
        if m not in ALL_METHODS:
            raise ValueError(f"unknown method {m!r}")
    params = XXZParams(args.length, args.jz, args.hz)
    dmrg_cfg = DmrgConfig(truncation_cutoff=args.cutoff)
    config = {"command": "xxz-groundstate", "L": args.length, "J_z": args.jz,
              "h_z": args.hz, "dmrg_cutoff": args.cutoff, "epsilon": args.epsilon,
              "layers": args.layers, "threshold": args.threshold,
              "methods": methods, "seed": args.seed, "jobs": args.jobs}
    state, energy, stats = ground_state(params, dmrg_cfg)
    log.info("DMRG: E %.10f chi %d sweeps %d", energy, state.max_bond(),
             stats.sweeps)
    records = []
    for m in methods:
        r, _circ = _compile_with(m, state, args.epsilon,
                                 _default_layers(m, args.layers), args.threshold)
        log.info("%s: fid %.4f depth %d count %d", m, r["fidelity"],
                 r["depth"], r["count"])
        records.append({"method": m, **r})
    header = ["method", "fidelity", "depth", "count", "converged"]
    rows = [[r[k] for k in header] for r in records]
    results = {"dmrg": {"energy": energy, "max_bond": state.max_bond(),
                        "staggered_magnetization": staggered_magnetization(state)},
               "methods": records}
    svg = {r["method"]: ([0, 1], [r["fidelity"], r["fidelity"]]) for r in records}
    _emit(args.out, args.format, config, header, rows, results,
          svg_series=svg, svg_labels=("", "fidelity"))
    all_ok = all(r["converged"] for r in records)
    return EXIT_OK if all_ok else EXIT_NOT_CONVERGED


def _chi1_fidelity(task):
    # initialization fidelity against the XXZ ground-state family
    mode, L, jz, cutoff, seed = task
    rng = np.random.default_rng(seed)
    target, _, _ = ground_state(XXZParams(L, jz, 0.0),
                                DmrgConfig(truncation_cutoff=cutoff))
    if mode == "chi1":
        _, fid = aqctensor.chi1_initialize(target)
        return np.log10(fid)
    if mode == "identity":
        return log10_fidelity(MPSState.zero_state(L), target.normalized())
    ansatz = aqctensor.BrickworkAnsatz(
        L, 1, aqctensor.identity_layer(L), np.zeros(0))
    ansatz.params = rng.uniform(-np.pi, np.pi, 15 * ansatz.n_blocks)
    prepared = simulate(ansatz.to_circuit(), policy=TruncationPolicy(1e-12, None))
    return log10_fidelity(prepared, target.normalized())


def cmd_init_scaling(args) -> int:
    lengths = [int(x) for x in args.lengths.split(",")]
    if len(lengths) < 3:
        raise ValueError("need at least 3 chain lengths for a slope fit")
    config = {"command": "init-scaling", "lengths": lengths, "seed": args.seed,
              "n_samples": args.n_samples, "J_z": args.jz,
              "dmrg_cutoff": args.cutoff, "jobs": args.jobs}
    modes = ("chi1", "random", "identity")
    step = float(np.mean(np.diff(lengths)))
    rows = []
    series = {}
    slopes = {}
    for mode in modes:
        # chi1/identity are deterministic; only random params need samples
        n_samples = args.n_samples if mode == "random" else 1
        tasks = [(mode, L, args.jz, args.cutoff, args.seed + 101 * k)
                 for L in lengths for k in range(n_samples)]
        vals = _run_parallel(_chi1_fidelity, tasks, args.jobs)
        per_l = np.asarray(vals).reshape(len(lengths), n_samples).mean(axis=1)
        # slope of -log10 F against L, least squares in the log domain
        slope = -np.polyfit(lengths, per_l, 1)[0]
        slopes[mode] = {"per_site": float(slope),
                        "per_step": float(step * slope)}
        series[mode] = (lengths, list(map(float, per_l)))
        for L, v in zip(lengths, per_l):
            rows.append([mode, L, float(v)])
        log.info("%s: slope %.4f per site (%.3f per %g-site step)",
                 mode, slope, step * slope, step)
    header = ["mode", "L", "log10_fidelity"]
    _emit(args.out, args.format, config, header, rows,
          {"log10_fidelity": {m: dict(zip(map(str, lengths), series[m][1]))
                              for m in modes},
           "slopes": slopes},
          svg_series=series, svg_labels=("L", "log10 fidelity"))
    return EXIT_OK


def cmd_quench(args) -> int:
    gp = XXZParams(args.length, args.jz_ground, args.hz_ground)
    qp = XXZParams(args.length, args.jz_quench, args.hz_quench)
    spec = QuenchSpec(gp, qp, dt=args.dt, n_steps=args.steps)
    config = {"command": "quench", "L": args.length,
              "ground": {"J_z": gp.J_z, "h_z": gp.h_z},
              "quench": {"J_z": qp.J_z, "h_z": qp.h_z},
              "dt": args.dt, "n_steps": args.steps, "prep": args.prep,
              "epsilon": args.epsilon, "layers": args.layers,
              "threshold": args.threshold, "seed": args.seed}

    if args.prep == "neel":
        initial = neel_state(args.length)
        prep_metrics = {"fidelity": 1.0, "depth": 0, "count": 0}
        converged = True
    else:
        state, _e, _stats = ground_state(gp, DmrgConfig())
        if args.prep == "exact":
            initial = state
            prep_metrics = {"fidelity": 1.0, "depth": 0, "count": 0}
            converged = True
        else:
            r, circ = _compile_with(args.prep, state, args.epsilon,
                                    _default_layers(args.prep, args.layers),
                                    args.threshold)
            converged = r["converged"]
            prep_metrics = r
            initial = simulate(circ, policy=TruncationPolicy(args.threshold, None))
            initial = initial.normalized()

    # fine-step TEBD reference from the same initial state
    ref = tebd_evolve(initial, qp, dt=0.1, t_max=args.dt * args.steps)

    # Trotterized circuit path, one coarse step at a time on the MPS backend
    policy = TruncationPolicy(args.threshold, None)
    rows = [[0.0, staggered_magnetization(initial),
             float(np.interp(0.0, ref.times, ref.sm)),
             prep_metrics["depth"], prep_metrics["count"]]]
    state_t = initial
    step_circ = trotter2_circuit(qp, args.dt, 1)
    cum_depth, cum_count = prep_metrics["depth"], prep_metrics["count"]
    for k in range(1, args.steps + 1):
        state_t = simulate(step_circ, init=state_t, policy=policy).normalized()
        m = cnot_metrics(step_circ)
        cum_depth += m["depth"]
        cum_count += m["count"]
        t = k * args.dt
        rows.append([t, staggered_magnetization(state_t),
                     float(np.interp(t, ref.times, ref.sm)),
                     cum_depth, cum_count])
    header = ["t", "sm_circuit", "sm_tebd", "cnot_depth", "cnot_count"]
    results = {"preparation": prep_metrics,
               "trajectory": [dict(zip(header, r)) for r in rows],
               "tebd_max_chi": ref.max_chi}
    series = {"circuit": ([r[0] for r in rows], [r[1] for r in rows]),
              "tebd": (list(map(float, ref.times)), list(map(float, ref.sm)))}
    _emit(args.out, args.format, config, header, rows, results,
          svg_series=series, svg_labels=("t", "staggered magnetization"))
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


# -- entry point -------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")
    p.add_argument("--format", action="append", choices=["csv", "json", "svg"],
                   help="repeatable; default csv+json")
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--layers", type=int, default=None,
                   help="staircase/brickwork layer count (default: 5 ran, 1 aqc-tensor)")
    p.add_argument("--threshold", type=float, default=1e-8,
                   help="simulator truncation threshold")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpsaqc", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("random-mps-benchmark",
                       help="compile random chi=2 targets with each method")
    b.add_argument("--n-instances", type=int, default=100)
    b.add_argument("--length", "-L", type=int, default=50)
    b.add_argument("--method", action="append", choices=ALL_METHODS)
    _add_common(b)
    b.set_defaults(fn=cmd_random_mps_benchmark)

    g = sub.add_parser("xxz-groundstate",
                       help="DMRG ground state, then compile it with each method")
    g.add_argument("--length", "-L", type=int, default=50)
    g.add_argument("--jz", type=float, default=2.5)
    g.add_argument("--hz", type=float, default=0.0)
    g.add_argument("--cutoff", type=float, default=1e-4)
    g.add_argument("--method", action="append", choices=ALL_METHODS)
    _add_common(g)
    g.set_defaults(fn=cmd_xxz_groundstate)

    i = sub.add_parser("init-scaling",
                       help="log-fidelity of chi=1/random/identity starts vs L")
    i.add_argument("--lengths", default="50,100,150,200,250,300")
    i.add_argument("--n-samples", type=int, default=5)
    i.add_argument("--jz", type=float, default=2.5)
    i.add_argument("--cutoff", type=float, default=1e-4)
    _add_common(i)
    i.set_defaults(fn=cmd_init_scaling)

    q = sub.add_parser("quench",
                       help="Trotter quench on the MPS backend vs TEBD reference")
    q.add_argument("--length", "-L", type=int, default=50)
    q.add_argument("--jz-ground", type=float, default=2.5)
    q.add_argument("--hz-ground", type=float, default=0.0)
    q.add_argument("--jz-quench", type=float, default=1.2)
    q.add_argument("--hz-quench", type=float, default=0.5)
    q.add_argument("--dt", type=float, default=1.0)
    q.add_argument("--steps", type=int, default=5)
    q.add_argument("--prep", default="aqc-tensor",
                   choices=ALL_METHODS + ("neel", "exact"))
    _add_common(q)
    q.set_defaults(fn=cmd_quench)
    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("MPSC_LOG", "INFO").upper(),
                        format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = ["csv", "json"]
    try:
        return args.fn(args)
    except (MpsaqcError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
