"""Batch entry point: scenario file in, tables out.

Commands
--------
fig1        propagator-difference scan -> fig1.csv
experiment  oracle amplitudes -> flux design -> intensities ->
            amplitude recovery; writes amplitudes_oracle.csv,
            intensities.csv, amplitudes_recovered.csv, summary.json
hausdorff   expected-length scaling scan in the scenario's method
            (monitored sampler, synthetic power-law injection, or the
            solenoid-row ladder) -> scaling.csv, fit.json
validate    parse and validate the scenario, computing nothing

Every command is a pure function of (scenario file, master seed): all
randomness flows from the one master seed, and stage sub-seeds are the
first state word of ``numpy.random.SeedSequence([master, *tags])``
(tags: experiment design=0, measurement noise=1, solver starts=2;
scan points use [master, point_index, stage]).  Outputs are therefore
byte-reproducible.

Exit statuses: 0 success; 2 invalid scenario or usage; 3 the pipeline
ran but amplitude recovery did not converge; 4 the problem as posed
cannot be computed (domain, capacity, or design failure); 1 unexpected
internal error.  ``--jobs`` caps worker counts for stages that fan
out; the current implementation runs every stage on one worker
regardless, keeping reductions deterministic.
"""

import argparse
import os
import sys

import numpy as np

from .errors import AbPathsError, SchemaError
from .forward import FluxDesign, design_fluxes, phase_matrix, run_experiment
from .fractal import (LineScanScenario, ScalingSeries, ScanPoint,
                      fit_power_law, length_scan)
from .inversion import aligned_error, build_problem, solve
from .io import (write_class_amplitudes_csv, write_fig1_csv, write_fit_json,
                 write_intensities_csv, write_recovered_csv,
                 write_scaling_csv, write_summary_json)
from .oracle import free_class_amplitudes, monitored_length
from .propagator import fig1_scan
from .scenario import load_scenario

__all__ = ["main"]

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NONCONVERGED = 3
EXIT_STRUCTURAL = 4


def _derived_seed(master, *tags):
    seq = np.random.SeedSequence([int(master)] + [int(t) for t in tags])
    return int(seq.generate_state(1)[0])


def _stage(name, fn, *args, **kwargs):
    """Run one pipeline stage, naming it in any failure."""
    try:
        return fn(*args, **kwargs)
    except AbPathsError as error:
        if error.args and isinstance(error.args[0], str):
            error.args = ((f"[stage: {name}] {error.args[0]}",)
                          + error.args[1:])
        raise


def cmd_fig1(section, seed, out_dir):
    rows = fig1_scan(section["h_grid"], section["alpha_grid"],
                     section["params"],
                     chord_length=section["chord_length"])
    write_fig1_csv(os.path.join(out_dir, "fig1.csv"), rows)
    return EXIT_OK


def cmd_experiment(section, seed, out_dir):
    array = section["array"]
    truth = _stage("oracle", free_class_amplitudes, array,
                   section["params"], section["lattice"], section["n_cut"])
    classes = truth.classes
    write_class_amplitudes_csv(
        os.path.join(out_dir, "amplitudes_oracle.csv"), truth)

    noise_level = section["design"]["noise_level"]
    design = _stage("design", design_fluxes, array.n_solenoids,
                    len(classes),
                    oversampling=section["design"]["oversampling"],
                    seed=_derived_seed(seed, 0), noise_level=noise_level)
    if noise_level > 0.0:
        design = FluxDesign(sets=design.sets, noise_level=noise_level,
                            seed=_derived_seed(seed, 1),
                            condition_measure=design.condition_measure)
    results = _stage("measurement", run_experiment, design, truth, array)
    write_intensities_csv(os.path.join(out_dir, "intensities.csv"),
                          design.sets, results)

    intensities = np.array([value for _, value in results])
    phases = phase_matrix([c.winding for c in classes], design.sets,
                          array.endpoint_azimuths())
    problem = _stage("inversion", build_problem, intensities, phases,
                     classes=classes)
    solver = section["solver"]
    result = _stage("inversion", solve, problem, tol=solver["tol"],
                    max_iter=solver["max_iter"],
                    n_starts=solver["n_starts"],
                    seed=_derived_seed(seed, 2))
    write_recovered_csv(os.path.join(out_dir, "amplitudes_recovered.csv"),
                        result.amplitudes, n_cut=section["n_cut"])

    error = aligned_error(result.amplitudes, {c: truth[c] for c in classes})
    write_summary_json(os.path.join(out_dir, "summary.json"), {
        "command": "experiment",
        "seed": seed,
        "n_classes": len(classes),
        "n_sets": design.n_sets,
        "condition_measure": design.condition_measure,
        "noise_level": noise_level,
        "converged": result.converged,
        "iterations": result.iterations,
        "residual_rms": result.residual_rms,
        "gradient_norm": result.gradient_norm,
        "best_start": result.best_start,
        "aligned_error": error,
    })
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def _monitored_series(section, seed):
    unit = section["unit_length"]
    points = []
    ladder = sorted(section["delta_x_ladder"], reverse=True)
    for index, delta_x in enumerate(ladder):
        mean, _ = monitored_length(delta_x, section["params"],
                                   section["n_steps"], section["samples"],
                                   seed=_derived_seed(seed, index),
                                   kick_scale=section["kick_scale"])
        points.append(ScanPoint(delta_x=delta_x, epsilon=delta_x / unit,
                                complex_value=complex(mean), length=mean))
    return ScalingSeries(points=tuple(points), unit_length=unit)


def _synthetic_series(section):
    points = []
    for eps in sorted(section["epsilons"], reverse=True):
        length = section["L0"] * eps ** (-section["alpha"])
        points.append(ScanPoint(delta_x=eps, epsilon=eps,
                                complex_value=complex(length),
                                length=length))
    return ScalingSeries(points=tuple(points))


def cmd_hausdorff(section, seed, out_dir, mode=None):
    method = section["method"]
    status = EXIT_OK
    if method == "monitored":
        series = _stage("sampler", _monitored_series, section, seed)
    elif method == "synthetic":
        series = _synthetic_series(section)
    else:
        scan = LineScanScenario(
            source=section["source"], detector=section["detector"],
            n_cut=section["n_cut"], params=section["params"],
            lattice=section["lattice"],
            oversampling=section["design"]["oversampling"],
            noise_level=section["design"]["noise_level"], seed=seed,
            n_starts=section["solver"]["n_starts"],
            solver_tol=section["solver"]["tol"],
            max_iter=section["solver"]["max_iter"],
            unit_length=section["unit_length"])
        series = _stage("scan", length_scan, scan, section["spacings"],
                        mode or section["mode"])
        if not series.all_converged:
            status = EXIT_NONCONVERGED
    series = _stage("fit", fit_power_law, series)
    write_scaling_csv(os.path.join(out_dir, "scaling.csv"), series)
    write_fit_json(os.path.join(out_dir, "fit.json"), series)
    return status


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="abpaths",
        description="Flux-tuned interference pipeline batch runner")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fig1", "experiment", "hausdorff", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True,
                       help="path to the scenario JSON file")
        p.add_argument("--out", default=None,
                       help="output directory (default: scenario out_dir "
                            "or the working directory)")
        p.add_argument("--jobs", type=int, default=1,
                       help="cap on fan-out worker counts")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario master seed")
        if name == "hausdorff":
            p.add_argument("--mode", choices=("oracle", "experiment"),
                           default=None,
                           help="amplitude source for the array method")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    try:
        scenario = load_scenario(args.scenario)
    except SchemaError as error:
        print(f"invalid scenario: {error}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as error:
        print(f"cannot read scenario: {error}", file=sys.stderr)
        return EXIT_SCHEMA

    seed = scenario.seed if args.seed is None else args.seed
    if args.command == "validate":
        present = [name for name in ("fig1", "experiment", "hausdorff")
                   if getattr(scenario, name) is not None]
        print(f"scenario ok (seed {seed}; sections: "
              f"{', '.join(present) if present else 'none'})")
        return EXIT_OK

    section = getattr(scenario, args.command)
    if section is None:
        print(f"invalid scenario: no '{args.command}' section",
              file=sys.stderr)
        return EXIT_SCHEMA
    out_dir = args.out or scenario.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)

    try:
        if args.command == "fig1":
            return cmd_fig1(section, seed, out_dir)
        if args.command == "experiment":
            return cmd_experiment(section, seed, out_dir)
        return cmd_hausdorff(section, seed, out_dir, mode=args.mode)
    except SchemaError as error:
        print(f"invalid scenario: {error}", file=sys.stderr)
        return EXIT_SCHEMA
    except AbPathsError as error:
        print(f"{args.command} failed: {error}", file=sys.stderr)
        return EXIT_STRUCTURAL


if __name__ == "__main__":
    sys.exit(main())
