"""
Command handlers for the lepspec CLI.

Each handler takes the parsed arguments, the validated model and the
output directory, runs one analysis and writes its artifacts. The caller
writes the manifest and maps exceptions onto exit codes.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List

import numpy as np

from ..core.errors import NumericalError
from ..core.model import ValidatedModel, serialize_config
from ..core.runtime import get_logger
from ..services.correlations import g1, g2k, unnormalized_ttcf
from ..services.fockspace import (
    build_superoperator,
    coherence_oracle,
    g1_oracle,
    sector_spectrum,
    spectral_deviation,
    steady_state_density,
)
from ..services.moments import (
    bimodal_liouvillian_eigenvalues,
    check_moment_symmetry,
    first_moment_generator,
    multiplicity_report,
    second_moment_system,
    steady_state_matrix,
    transform_to_supermodes,
)
from ..services.nhh import (
    build_effective_nhh,
    eigendecompose,
    liouvillian_eigs_from_nhh,
    supermode_lindblad_coefficients,
    supermode_transform,
    symmetry_check,
)
from ..services.sensitivity import (
    locate_exceptional_point,
    parameter_family,
    splitting_exponent,
    sweep_eigenvalues,
)
from ..services.spectra import POWER, intensity_fluctuation_spectrum, lineshape_analysis, power_spectrum
from ..utils.artifacts import emit_csv, emit_json, write_text

logger = get_logger()

ORACLE_G1_TOL = 1e-4
ORACLE_G2_TOL = 5e-3
ORACLE_MOMENT_TOL = 5e-5
ORACLE_SPECTRUM_TOL = 1e-6


@dataclass
class CommandResult:
    summary: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)


def _fmt(value: Any) -> str:
    if isinstance(value, (complex, np.complexfloating)):
        return f"{value.real:.12g}{value.imag:+.12g}j"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    return str(value)


def format_summary(verb: str, result: CommandResult) -> str:
    lines = [f"{verb}:"]
    lines += [f"  {key}: {_fmt(value)}" for key, value in result.summary.items()]
    lines += [f"  wrote: {name}" for name in result.outputs]
    return "\n".join(lines)


def handle_validate(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    write_text(out_dir / "model.json", serialize_config(model) + "\n")
    return CommandResult(
        summary={"n_modes": model.n_modes, "n_th": model.spec.n_th, "jump_rates": model.jump_rates, "status": "valid"},
        outputs=["model.json"],
    )


def handle_nhh_spectrum(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    nhh_report = eigendecompose(build_effective_nhh(model), args.tol)
    single = eigendecompose(first_moment_generator(model).generator, args.tol)
    moments = multiplicity_report(second_moment_system(model), args.tol)

    emit_csv(nhh_report, out_dir / "nhh_eigenvalues.csv")
    emit_csv(single, out_dir / "single_quantum_eigenvalues.csv")
    emit_csv(moments, out_dir / "moment_multiplicities.csv")
    clusters = [{
        "value": c.value,
        "algebraic": c.algebraic,
        "geometric": c.geometric,
        "jordan_blocks": c.jordan_blocks,
        "residual": c.residual,
    } for c in nhh_report.clusters]
    emit_json({"nhh_clusters": clusters, "condition_number": nhh_report.condition_number},
              out_dir / "nhh_clusters.json")

    return CommandResult(
        summary={
            "nu": nhh_report.eigenvalues,
            "lambda = -i nu": liouvillian_eigs_from_nhh(nhh_report),
            "nhh_defective": [(c.algebraic, c.geometric) for c in nhh_report.defective_clusters],
            "moment_lep_orders": [r.lep_order for r in moments],
        },
        outputs=["nhh_eigenvalues.csv", "single_quantum_eigenvalues.csv",
                 "moment_multiplicities.csv", "nhh_clusters.json"],
    )


def handle_sweep(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    grid = np.linspace(args.start, args.stop, args.steps)
    trajectories = sweep_eigenvalues(parameter_family(model, args.param), grid,
                                     generator=args.generator, parameter=args.param)
    name = f"sweep_{args.generator}_{args.param}.csv"
    emit_csv(trajectories, out_dir / name)
    return CommandResult(
        summary={"points": int(grid.size), "branches": int(trajectories.values.shape[1]),
                 "degenerate_points": len(trajectories.ambiguous)},
        outputs=[name],
    )


def handle_ep_find(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    root, closed_form = locate_exceptional_point(model, "gamma12")
    located = closed_form if closed_form is not None else root
    at_ep = parameter_family(model, "gamma12")(located)
    report = eigendecompose(build_effective_nhh(at_ep), args.tol)
    confirmed = bool(report.defective_clusters)
    cluster = report.defective_clusters[0] if confirmed else report.clusters[0]
    payload = {
        "gamma12_ep": located,
        "gamma12_bisection": root,
        "gamma12_closed_form": closed_form,
        "degeneracy_confirmed": confirmed,
        "eigenvalue": cluster.value,
        "algebraic": cluster.algebraic,
        "geometric": cluster.geometric,
    }
    emit_json(payload, out_dir / "ep.json")
    if not confirmed:
        raise NumericalError("discriminant root is not a defective point", payload)
    return CommandResult(summary=payload, outputs=["ep.json"])


def handle_correlations(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    tau = np.linspace(0.0, args.tau_max, args.tau_steps)
    order = args.order
    if order == 1:
        series = g1(model, args.mode, tau)
    elif order >= 2 and order % 2 == 0:
        series = g2k(model, args.mode, order // 2, tau)
    else:
        raise ValueError(f"order must be 1 or even, got {order}")
    name = f"correlations_{series.mode}_g{order}.csv"
    emit_csv(series, out_dir / name)
    outputs = [name]
    if order == 1:
        raw = unnormalized_ttcf(model, args.mode, tau)
        raw_name = f"correlations_{series.mode}_ttcf.csv"
        emit_csv(raw, out_dir / raw_name)
        outputs.append(raw_name)
    return CommandResult(
        summary={"mode": series.mode, "order": order, "points": int(tau.size),
                 "value_at_tau_max": series.values[-1]},
        outputs=outputs,
    )


def handle_spectra(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    # S(2) is a fluctuation spectrum around zero frequency; S(1) sits at the mean mode frequency.
    center = float(np.mean(model.spec.omega)) if args.kind == POWER else 0.0
    omega = np.linspace(center - args.omega_max, center + args.omega_max, args.omega_steps)
    if args.kind == POWER:
        series = power_spectrum(model, args.mode, omega, convention=args.convention)
    else:
        series = intensity_fluctuation_spectrum(model, args.mode, omega, convention=args.convention)
    name = f"spectrum_{args.kind}_{series.mode}.csv"
    emit_csv(series, out_dir / name)
    summary = {"mode": series.mode, "kind": series.kind, "convention": series.convention,
               "peak": float(series.values.max())}
    outputs = [name]
    if args.analyze:
        report = lineshape_analysis(series)
        emit_json({
            "winner": report.winner,
            "classification": report.classification,
            "components": [vars(c) for c in report.components],
            "peak_curvature": report.peak_curvature,
            "residuals": report.residuals,
            "aic": report.aic,
            "reconstruction_rms": report.reconstruction_rms,
            "center_is_local_minimum": report.center_is_local_minimum,
        }, out_dir / f"lineshape_{series.mode}.json")
        outputs.append(f"lineshape_{series.mode}.json")
        summary.update(classification=report.classification, winner=report.winner)
    return CommandResult(summary=summary, outputs=outputs)


def handle_oracle_check(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    """
    Compare moment-based results against the truncated Fock-space Liouvillian.

    The spectral containment check runs on the vacuum Liouvillian, where the
    low-lying blocks are not touched by the cutoff; the spectrum itself does
    not depend on n_th.
    """
    if model.spec.n_th <= 0:
        raise ValueError("oracle-check needs n_th > 0 (use --n-th)")
    start_time = time.time()
    tau = np.linspace(0.0, args.tau_max, args.tau_steps)
    sop = build_superoperator(model, args.cutoff)
    rho = steady_state_density(sop)

    n = model.n_modes
    fock_moments = np.array([[rho.expectation(sop.annihilators[j].conj().T @ sop.annihilators[k])
                              for k in range(n)] for j in range(n)])
    moment_dev = float(np.abs(fock_moments - steady_state_matrix(model)).max())

    g1_dev, g2_dev = 0.0, 0.0
    outputs = []
    for mode in range(n):
        label = f"a{mode + 1}"
        oracle_g1 = g1_oracle(sop, mode, tau, rho)
        oracle_g2 = coherence_oracle(sop, mode, 1, tau, rho)
        g1_dev = max(g1_dev, float(np.abs(oracle_g1.values - g1(model, mode, tau).values).max()))
        g2_dev = max(g2_dev, float(np.abs(oracle_g2.values.real - g2k(model, mode, 1, tau).values.real).max()))
        emit_csv(oracle_g1, out_dir / f"oracle_{label}_g1.csv")
        emit_csv(oracle_g2, out_dir / f"oracle_{label}_g2.csv")
        outputs += [f"oracle_{label}_g1.csv", f"oracle_{label}_g2.csv"]

    vacuum = build_superoperator(model.spec.replace(n_th=0.0), args.cutoff)
    single_quantum = liouvillian_eigs_from_nhh(eigendecompose(build_effective_nhh(model)))
    spec = model.spec
    if n == 2 and spec.gamma[0, 0] == spec.gamma[1, 1] and not np.any(spec.chi):
        second_moment = bimodal_liouvillian_eigenvalues(
            float(spec.gamma[0, 0].real), float(spec.gamma[0, 1].real), spec.omega[0] - spec.omega[1])
    else:
        second_moment = np.linalg.eigvals(second_moment_system(model).generator)
    spectrum_dev = max(
        spectral_deviation(sector_spectrum(vacuum, 1), single_quantum),
        spectral_deviation(sector_spectrum(vacuum, 0), np.concatenate([[0.0], second_moment])),
    )

    checks = {
        "steady_state_moments": (moment_dev, ORACLE_MOMENT_TOL),
        "g1": (g1_dev, ORACLE_G1_TOL),
        "g2": (g2_dev, ORACLE_G2_TOL),
        "spectrum": (spectrum_dev, ORACLE_SPECTRUM_TOL),
    }
    passed = all(dev < tol for dev, tol in checks.values())
    payload = {
        "cutoff": args.cutoff,
        "n_th": model.spec.n_th,
        "boundary_population": rho.boundary_population(),
        "checks": {name: {"max_deviation": dev, "tolerance": tol, "passed": dev < tol}
                   for name, (dev, tol) in checks.items()},
        "passed": passed,
    }
    emit_json(payload, out_dir / "oracle_check.json")
    logger.info("oracle_check_completed", passed=passed, cutoff=args.cutoff,
                duration_ms=int((time.time() - start_time) * 1000))
    outputs.append("oracle_check.json")
    if not passed:
        raise NumericalError("oracle check failed", payload)
    summary = {name: f"max dev {dev:.3e} < {tol:g}" for name, (dev, tol) in checks.items()}
    summary["result"] = "PASS"
    return CommandResult(summary=summary, outputs=outputs)


def handle_sensitivity(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    epsilons = np.geomspace(args.eps_min, args.eps_max, args.eps_count)
    fit = splitting_exponent(model, args.param, epsilons, generator=args.generator, direction=args.direction)
    name = f"splitting_{args.generator}_{args.param}.csv"
    emit_csv(fit, out_dir / name)
    payload = {
        "parameter": fit.parameter,
        "generator": fit.generator,
        "direction": fit.direction,
        "base_eigenvalue": fit.base_eigenvalue,
        "cluster_size": fit.cluster_size,
        "noise_floor": fit.noise_floor,
        "below_floor": fit.below_floor,
        "p": fit.p,
        "p_interval": list(fit.p_interval),
        "exponent": fit.exponent,
        "rms_residual": fit.rms_residual,
        "real_branches_per_epsilon": [int(np.sum(f)) for f in fit.real_flags],
        "lep_branch_real_per_epsilon": [int(np.sum(f)) for f in fit.lep_branch_real_flags],
    }
    emit_json(payload, out_dir / "splitting_fit.json")
    summary = {"p": fit.p, "p_interval": fit.p_interval, "below_floor": fit.below_floor,
               "centroid_shift_at_eps_max": fit.centroid_shifts[-1]}
    return CommandResult(summary=summary, outputs=[name, "splitting_fit.json"])


def handle_symmetry(args, model: ValidatedModel, out_dir: Path) -> CommandResult:
    if model.n_modes != 2:
        raise ValueError("symmetry verb needs a two-mode model")
    theta = args.theta
    h = build_effective_nhh(model)
    nhh_report = symmetry_check(h)
    rotated = symmetry_check(supermode_transform(h, theta))
    system = second_moment_system(model)
    moment_report = check_moment_symmetry(system)
    supermode_moments = check_moment_symmetry(transform_to_supermodes(system, theta), gauged=True)
    coefficients = supermode_lindblad_coefficients(model, theta)

    def row(report):
        return {"anti_pt_residual": report.anti_pt_residual,
                "pt_residual_after_gauge": report.pt_residual_after_gauge,
                "gauge_rate": report.gauge_rate,
                "classification": report.classification}

    payload = {
        "theta": theta,
        "nhh": row(nhh_report),
        "nhh_supermodes": row(rotated),
        "moments": row(moment_report),
        "moments_supermodes": row(supermode_moments),
        "supermode_coefficients": vars(coefficients),
    }
    emit_json(payload, out_dir / "symmetry.json")
    summary = {
        "nhh": nhh_report.classification,
        "nhh_supermodes": rotated.classification,
        "moments": moment_report.classification,
        "moments_supermodes": supermode_moments.classification,
        "A1": coefficients.A1,
        "A2": coefficients.A2,
        "A12": coefficients.A12,
        "A21": coefficients.A21,
        "supermode_coupling": coefficients.coupling_c12,
    }
    return CommandResult(summary=summary, outputs=["symmetry.json"])


HANDLERS: Dict[str, Callable[..., CommandResult]] = {
    "validate": handle_validate,
    "nhh-spectrum": handle_nhh_spectrum,
    "sweep": handle_sweep,
    "ep-find": handle_ep_find,
    "correlations": handle_correlations,
    "spectra": handle_spectra,
    "oracle-check": handle_oracle_check,
    "sensitivity": handle_sensitivity,
    "symmetry": handle_symmetry,
}
