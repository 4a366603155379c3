"""``platoon-hinf`` command-line front end.

Exit codes: 0 success, 2 completed but infeasible / check failed,
3 configuration error, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from ._fmt import dump_json, fmt, round_json
from .config import (
    COMMANDS,
    controller_from_dict,
    controller_to_dict,
    keys_help,
    load_controller,
    load_run_config,
)
from .errors import ConfigError, DivergenceError, PlatoonHinfError, SynthesisFailure
from .lti import default_grid, freq_response, tf_mul
from .platoon import TRADITIONAL, closed_loops
from .simulator import simulate, trace_metrics, write_metrics_json, write_trace_csv
from .synthesis import (
    crossover_frequency,
    evaluate,
    synthesize_multiobj,
    synthesize_traditional,
    verify_string_stability,
)

log = logging.getLogger("platoon_hinf")

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_CONFIG = 3
EXIT_DIVERGED = 4

#: frequency points per decade in the exported response CSVs
CSV_POINTS_PER_DECADE = 200


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_freq_csv(sys_, path):
    grid = default_grid(sys_, CSV_POINTS_PER_DECADE)
    fr = freq_response(sys_, grid)
    _write_rows(path, ("freq_hz", "mag_db", "phase_deg"), zip(fr.freqs_hz, fr.mag_db, fr.phase_deg))


def _objectives_doc(vals, feasible, extra=None):
    doc = {
        "gamma_s": vals.gamma_s,
        "gamma_t": vals.gamma_t,
        "gamma_u": vals.gamma_u,
        "t_norm": vals.t_norm,
        "stable": vals.stable,
        "feasible": feasible,
    }
    if extra:
        doc.update(extra)
    return doc


def run_synth(rc):
    cfg, W = rc.platoon, rc.weights
    solver = synthesize_traditional if rc.design == TRADITIONAL else synthesize_multiobj
    code = EXIT_OK
    try:
        res = solver(cfg, W, rc.synth_opts)
    except SynthesisFailure as exc:
        log.error("%s", exc)
        res = exc.best
        code = EXIT_INFEASIBLE
    meta = {"design": rc.design, "seed": rc.seed, "weights": rc.weights_source}
    doc = round_json(controller_to_dict(res.controller, cfg, meta))
    dump_json(doc, os.path.join(rc.out_dir, "controller.json"))
    # certify what was written, not the unrounded optimizer point
    K = controller_from_dict(doc)
    vals = evaluate(cfg, W, K)
    feasible = vals.feasible
    if not feasible:
        code = EXIT_INFEASIBLE
    extra = {
        "objective": vals.traditional() if rc.design == TRADITIONAL else vals.multiobjective(),
        "iterations": res.iterations,
        "restarts_used": res.restarts_used,
        "history": [{"feasible": f, "objective": o} for f, o in res.history],
        "design": rc.design,
    }
    if vals.stable:
        extra["crossover_hz"] = crossover_frequency(cfg, K)
    dump_json(
        _objectives_doc(vals, feasible, extra),
        os.path.join(rc.out_dir, "objectives.json"),
    )
    if vals.stable:
        s, t = closed_loops(cfg, K)
        for name, sys_ in (
            ("S", s),
            ("T", t),
            ("WS_S", tf_mul(W.ws, s)),
            ("WT_T", tf_mul(W.wt, t)),
        ):
            write_freq_csv(sys_, os.path.join(rc.out_dir, f"{name}.csv"))
    log.info(
        "synth: feasible=%s gamma_s=%.4g gamma_t=%.4g ||T||=%.6g",
        feasible, vals.gamma_s, vals.gamma_t, vals.t_norm,
    )
    return code


def _verify_doc(rep):
    return {
        "t_norm": rep.t_norm,
        "argmax_hz": rep.argmax_hz,
        "margin": rep.margin,
        "pass": rep.passed,
        "zero_controller": rep.zero_controller,
    }


def run_verify(rc, controller_path):
    cfg = rc.platoon
    K = load_controller(controller_path, cfg)
    rep = verify_string_stability(cfg, K)
    if rep.zero_controller:
        log.warning("zero controller: string stability holds only degenerately (T = 0 or D/H)")
    vals = evaluate(cfg, rc.weights, K)
    doc = _verify_doc(rep)
    doc["structure"] = K.structure
    doc["gamma_s"] = vals.gamma_s
    doc["gamma_t"] = vals.gamma_t
    dump_json(doc, os.path.join(rc.out_dir, "stringstability.json"))
    _write_rows(
        os.path.join(rc.out_dir, "T_mag.csv"),
        ("freq_hz", "magnitude", "mag_db"),
        (
            (f, m, 20.0 * np.log10(m) if m > 0 else -np.inf)
            for f, m in zip(rep.freqs_hz, rep.magnitude)
        ),
    )
    log.info("verify: ||T||=%.6g at %.4g Hz pass=%s", rep.t_norm, rep.argmax_hz, rep.passed)
    return EXIT_OK if rep.passed else EXIT_INFEASIBLE


def run_simulate(rc, controller_path):
    cfg = rc.platoon
    K = load_controller(controller_path, cfg)
    trace_path = os.path.join(rc.out_dir, "trace.csv")
    metrics_path = os.path.join(rc.out_dir, "metrics.json")
    try:
        trace = simulate(cfg, K, rc.scenario)
    except DivergenceError as exc:
        log.error("%s", exc)
        write_trace_csv(exc.trace, trace_path)
        write_metrics_json(
            trace_metrics(exc.trace),
            metrics_path,
            {"diverged": True, "diverged_vehicle": exc.vehicle, "diverged_t": exc.t},
        )
        return EXIT_DIVERGED
    write_trace_csv(trace, trace_path)
    metrics = trace_metrics(trace)
    write_metrics_json(metrics, metrics_path, {"diverged": False})
    log.info("simulate: string_stable=%s max|e|=%s", metrics.string_stable, metrics.max_abs_e)
    return EXIT_OK


def run_sweep(rc, controller_path):
    cfg = rc.platoon
    K = load_controller(controller_path, cfg)
    rows, traces = [], []
    for idx, point in enumerate(rc.sweep_grid()):
        rep = verify_string_stability(cfg.replace(**point), K)
        rows.append(
            [idx, point["h"], point["tau"], point["phi"], point["theta"],
             rep.t_norm, rep.argmax_hz, rep.margin, int(rep.passed)]
        )
        traces.extend(
            (idx, f, 20.0 * np.log10(m) if m > 0 else -np.inf)
            for f, m in zip(rep.freqs_hz, rep.magnitude)
        )
    _write_rows(
        os.path.join(rc.out_dir, "sweep.csv"),
        ("row", "h", "tau", "phi", "theta", "t_norm", "argmax_hz", "margin", "pass"),
        rows,
    )
    _write_rows(os.path.join(rc.out_dir, "sweep_traces.csv"), ("row", "freq_hz", "mag_db"), traces)
    log.info("sweep: %d points, %d pass", len(rows), sum(r[-1] for r in rows))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="platoon-hinf",
        description="Multi-objective H-infinity design and analysis for ACC/CACC platoons.",
        epilog=keys_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--controller", help="controller JSON (verify, simulate, sweep)")
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int, help="random seed (overrides seed)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        rc = load_run_config(args.command, args.config, seed=args.seed, out_dir=args.out)
        if args.command != "synth" and not args.controller:
            raise ConfigError(f"{args.command} needs --controller")
        os.makedirs(rc.out_dir, exist_ok=True)
        if args.command == "synth":
            return run_synth(rc)
        runner = {"verify": run_verify, "simulate": run_simulate, "sweep": run_sweep}
        return runner[args.command](rc, args.controller)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except PlatoonHinfError as exc:
        # domain errors raised from bad input values behave like config errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
