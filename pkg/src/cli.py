"""
qkinetic - configuration-driven front end of the kinetic laboratory.

    qkinetic verify|sweep|evolve --config PATH [--force] [--out DIR] [--threads N]

Exit codes: 0 success, 1 numerical criterion failed (or unexpected error),
2 invalid configuration or input.
"""

import argparse
import logging
import math
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from .config import Settings, settings
from .errors import CapacityError, ConfigError, DimensionError, KineticsError, NormalizationError, SymmetryError
from .models.kinetic_models import SeriesTruncation, SweepPlan, SweepRecord
from .models.operators import CorrelationFamily, DensityOp
from .models.run_config import CorrelationPreset, InitialKind, RunConfig, SweepKind, load_run_config
from .models.states import WaveFunction
from .services import reporting, tensor_core
from .services.cumulant_engine import CumulantEngine
from .services.gqke_solver import GQKESolver
from .services.lattice_model import LatticeModel
from .services.meanfield_lab import MeanFieldLab
from .services.verification import VerificationSuite
from .services.vlasov_solver import VlasovSolver

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
TRACE_DRIFT_TOL = 1e-10
HARTREE_NORM_TOL = 1e-8
VERIFY_PARTICLES = 5


def configure_logging() -> None:
    log_level = settings.LOG_LEVEL.upper()
    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    handlers = [logging.StreamHandler()]

    # Only create file handler if LOG_FILE is explicitly set
    log_file = settings.LOG_FILE
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, mode='a'))

    logging.basicConfig(
        level=getattr(logging, log_level, logging.INFO),
        format=log_format,
        handlers=handlers
    )


def resolve_threads(requested: Optional[int]) -> int:
    """QKINETIC_THREADS wins over --threads."""
    override = Settings().THREADS
    threads = override if override is not None else requested
    return max(int(threads or 1), 1)


def required_particles(command: str, cfg: RunConfig) -> int:
    """Largest particle number a command builds operators on."""
    experiment = cfg.experiment
    if command == "verify":
        return VERIFY_PARTICLES
    particles = 1 + experiment.max_order
    if command == "sweep" and any(kind != SweepKind.THEOREM1 for kind in experiment.sweeps):
        particles = max(particles, 2 + experiment.functional_order)
    return particles


def check_config_capacity(command: str, cfg: RunConfig) -> None:
    try:
        tensor_core.check_capacity(cfg.model.d, required_particles(command, cfg))
    except CapacityError as e:
        raise ConfigError(f"{command} with MODEL__D={cfg.model.d}: {e}") from e


def build_initial(cfg: RunConfig) -> DensityOp:
    d, initial = cfg.model.d, cfg.initial
    if initial.kind == InitialKind.PURE:
        psi = np.array([complex(re, im) for re, im in initial.vector])
        norm = float(np.linalg.norm(psi))
        if abs(norm - 1.0) > 1e-12:
            raise NormalizationError(f"pure initial vector has norm {norm:.15f}")
        return DensityOp(n=1, d=d, data=np.outer(psi, psi.conj()), state=True)
    if initial.kind == InitialKind.DIAGONAL:
        return DensityOp(n=1, d=d, data=np.diag(np.asarray(initial.weights, dtype=float)), state=True)
    if initial.kind == InitialKind.MATRIX:
        pairs = np.asarray(initial.entries, dtype=float)
        data = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(d, d)
        return DensityOp(n=1, d=d, data=data, state=True)
    return tensor_core.seeded_density(d, cfg.seed, initial.trace_norm)


def build_correlations(cfg: RunConfig) -> Optional[CorrelationFamily]:
    section, d = cfg.correlations, cfg.model.d
    if section is None:
        return None
    if section.preset == CorrelationPreset.IDENTITY:
        return CorrelationFamily.identity(d)
    if section.preset == CorrelationPreset.JASTROW:
        return CorrelationFamily.jastrow(d, section.gamma)
    return CorrelationFamily.diagonal(d, section.entries)


def _pure_vector(cfg: RunConfig) -> Optional[np.ndarray]:
    if cfg.initial.kind != InitialKind.PURE:
        return None
    return np.array([complex(re, im) for re, im in cfg.initial.vector])


def _out_dir(args: argparse.Namespace, cfg: RunConfig) -> Path:
    return Path(args.out or cfg.output_dir)


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    check_config_capacity("verify", cfg)
    spec, initial = cfg.model.to_spec(), build_initial(cfg)
    suite = VerificationSuite(spec, initial, t=cfg.experiment.verify_time,
                              correlations=build_correlations(cfg), threads=resolve_threads(args.threads))
    reports = suite.run()
    table = reporting.residual_table(reports)
    failed = [r for r in reports if not r.passed]
    status = "pass" if not failed else f"FAIL ({len(failed)} of {len(reports)})"
    reporting.write_summary(f"config_hash: {cfg.fingerprint()}\n\n{table}\n\noverall: {status}\n", _out_dir(args, cfg))
    print(table)
    for r in failed:
        print(f"FAILED {r.module}:{r.name} measured={r.measured:.3e} tolerance={r.tolerance:.3e} {r.detail}")
    return EXIT_OK if not failed else EXIT_FAILED


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    check_config_capacity("sweep", cfg)
    experiment = cfg.experiment
    if not experiment.epsilons:
        raise ConfigError("sweep needs EXPERIMENT__EPSILONS")
    spec, initial, corr = cfg.model.to_spec(), build_initial(cfg), build_correlations(cfg)
    lab = MeanFieldLab(spec, threads=resolve_threads(args.threads))
    times = experiment.resolved_times(lab.limit.t0_bound(initial))
    plan = SweepPlan(
        spec=spec,
        initial=initial,
        epsilons=experiment.epsilons,
        times=times,
        max_order=experiment.max_order,
        functional_order=experiment.functional_order,
        quad_nodes=experiment.quad_nodes,
        correlations=corr,
        force=args.force,
    )
    records: List[SweepRecord] = []
    for kind in experiment.sweeps:
        if kind == SweepKind.THEOREM1:
            records += lab.theorem1_sweep(plan)
        elif kind == SweepKind.THEOREM2:
            records += lab.theorem2_sweep(plan)
        else:
            if corr is None:
                raise ConfigError("correlation_propagation needs a CORRELATIONS section")
            records += lab.correlation_propagation_sweep(plan)
    assessments = MeanFieldLab.assess(records)
    out_dir, config_hash = _out_dir(args, cfg), cfg.fingerprint()
    reporting.write_records(records, out_dir, config_hash)
    summary = reporting.sweep_summary(assessments, records, config_hash)
    reporting.write_summary(summary, out_dir)
    print(summary, end="")
    return EXIT_OK if all(a.passed for a in assessments) else EXIT_FAILED


def _trajectory_row(
    vlasov: VlasovSolver,
    solver: GQKESolver,
    f1_0: DensityOp,
    f1: DensityOp,
    t: float,
    order: int,
    t0: float,
    corr: Optional[CorrelationFamily],
) -> Dict[str, float]:
    model = vlasov.model
    free = f1_0.with_data(model.free_evolve_sites(f1_0.data, 1, (0,), t))
    row = {
        "t": t,
        "trace": float(f1.trace().real),
        "purity": tensor_core.largest_eigenvalue(f1),
        "min_eigenvalue": tensor_core.smallest_eigenvalue(f1),
        "energy": vlasov.mean_field_energy(f1),
        "free_distance": tensor_core.trace_norm(f1 - free),
        "duhamel_distance": math.nan,
        "series_distance": math.nan,
    }
    if abs(t) < t0:
        duhamel = vlasov.duhamel_series(f1_0, t, order, corr=corr)
        row["duhamel_distance"] = tensor_core.trace_norm(f1 - duhamel)
        epsilon = solver.model.spec.epsilon
        series = solver.solution_series(f1_0 * (1.0 / epsilon), t, SeriesTruncation(max_order=order), corr).F1
        row["series_distance"] = tensor_core.trace_norm(series * epsilon - f1)
    return row


def cmd_evolve(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    check_config_capacity("evolve", cfg)
    experiment = cfg.experiment
    spec, initial, corr = cfg.model.to_spec(), build_initial(cfg), build_correlations(cfg)
    model = LatticeModel(spec)
    vlasov = VlasovSolver(model)
    solver = GQKESolver(CumulantEngine(model))
    t0 = vlasov.t0_bound(initial)
    trajectory = vlasov.integrate_vlasov(initial, experiment.t_end, experiment.dt, corr)

    psi_0 = _pure_vector(cfg)
    hartree = None
    if psi_0 is not None and corr is None:
        hartree = vlasov.hartree_evolve(WaveFunction(psi=psi_0, t=0.0), experiment.t_end, experiment.dt,
                                        method=experiment.hartree_method)

    rows = []
    for step in range(0, len(trajectory), experiment.record_every):
        state = trajectory[step]
        row = _trajectory_row(vlasov, solver, initial, state.f1, state.t, experiment.max_order, t0, corr)
        if hartree is not None:
            wave = hartree[step]
            row["hartree_norm"] = wave.norm
            row["hartree_energy"] = vlasov.hartree_energy(wave.psi)
            row["hartree_distance"] = tensor_core.trace_norm(wave.density() - state.f1)
        rows.append(row)

    reporting.write_trajectory(rows, _out_dir(args, cfg), cfg.fingerprint())
    drift = max(abs(row["trace"] - rows[0]["trace"]) for row in rows)
    failures = []
    if drift > TRACE_DRIFT_TOL:
        failures.append(f"trace drift {drift:.3e} exceeds {TRACE_DRIFT_TOL:.0e}")
    if hartree is not None:
        norm_drift = max(abs(w.norm - 1.0) for w in hartree)
        if norm_drift > HARTREE_NORM_TOL:
            failures.append(f"Hartree norm drift {norm_drift:.3e} exceeds {HARTREE_NORM_TOL:.0e}")
    for failure in failures:
        logger.error(f"[CLI] {failure}")
    print(f"trajectory: {len(rows)} rows, t_end={experiment.t_end}, trace drift={drift:.3e}")
    return EXIT_OK if not failures else EXIT_FAILED


COMMANDS = {
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "evolve": cmd_evolve,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkinetic",
        description="Mean-field kinetic equations for quantum lattice particles"
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="What to run")
    parser.add_argument("--config", required=True, type=Path, help="Run configuration (.env or .json)")
    parser.add_argument("--force", action="store_true", help="Run sweeps at times not below t0")
    parser.add_argument("--out", type=Path, default=None, help="Output directory (overrides OUTPUT_DIR)")
    parser.add_argument("--threads", type=int, default=None, help="Worker threads for sweep points")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    logger.info(f"[CLI] {args.command} --config {args.config}")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, SymmetryError, DimensionError, NormalizationError, ValidationError) as e:
        logger.error(f"[CLI] {type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except KineticsError as e:
        logger.error(f"[CLI] {type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILED
    except Exception as e:
        logger.error(f"[CLI] Unexpected failure: {type(e).__name__}: {e}", exc_info=True)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
