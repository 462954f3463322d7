"""Experiment orchestration: one scenario through every pipeline stage, and emission of result files."""

import asyncio
import copy
import csv
import logging
import os
import platform
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import scipy
import yaml

from .config import Configuration, load_config
from .coverage import AdmissibilityCertificate, certify_admissible
from .entropy import (
    EntropyCell,
    OuterEntropyTable,
    TheoremVerdict,
    TopologicalEntropyTable,
    assemble_sweep,
    entropy_cell,
    lower_bound_violations,
    theorem_check,
    topological_entropy_table,
)
from .errors import LieEntropyError
from .groups import TorusGroup
from .quotient import (
    LowerBoundTable,
    QuotientChartUnavailable,
    StableSubgroupNotClosed,
    ZeroMeasureK,
    invariant_measure,
    lower_bound_table,
    quotient_chart,
)
from .scenario import Scenario
from .spectral import DensityWitness, SpectralSummary, WitnessNotFound, density_witness_torus, exp_conjugation_residual, spectral_summary
from .system import AutomorphismReport, LinearSystem

logger = logging.getLogger(__name__)

ENTROPY_COLUMNS = ["preset", "n", "epsilon", "delta", "rho", "method", "r_inv", "log_r_inv"]
FIT_COLUMNS = ["epsilon", "slope", "intercept", "ci_low", "ci_high", "limsup", "n_first", "n_last", "log_base"]
SEPARATED_COLUMNS = ["n", "epsilon", "s_n", "log_s_n", "spanning_verified", "separation_verified"]


def _num(value: Any) -> str:
    """Stable text form of a number for emitted files."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.12g}"


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays inside a structure to plain Python for YAML."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{float(value):.12g}")
    return value


@dataclass
class RunReport:
    """Everything one scenario run produced."""

    scenario: Scenario
    system: LinearSystem
    log_base: str
    automorphism: Optional[AutomorphismReport] = None
    checks: Dict[str, Any] = field(default_factory=dict)
    spectral: Optional[SpectralSummary] = None
    quotient_status: str = "not run"
    lower: Optional[LowerBoundTable] = None
    certificate: Optional[AdmissibilityCertificate] = None
    sweep: Optional[OuterEntropyTable] = None
    separated: Optional[TopologicalEntropyTable] = None
    topological_status: Optional[str] = None
    witness: Optional[DensityWitness] = None
    witness_status: Optional[str] = None
    verdict: Optional[TheoremVerdict] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if self.verdict is None or not self.verdict.passed:
            return False
        return self.topological_status != "FAIL"

    def entropy_rows(self) -> List[Dict[str, Any]]:
        rows: List[Dict[str, Any]] = []
        if self.sweep is None:
            return rows
        delta = self.system.control.delta
        for record in self.sweep.rows():
            rows.append({"preset": self.scenario.name, "delta": delta, "rho": self.scenario.rho, **record})
        return rows

    def summary(self, include_timings: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "scenario": self.scenario.name,
            "system": {
                "name": self.system.name,
                "group": self.system.group.name,
                "description": self.system.description,
                "alphabet_size": self.system.control.size,
            },
            "log_base": self.log_base,
            "verdict": "PASS" if self.passed else "FAIL",
        }
        if self.automorphism is not None:
            data["automorphism"] = {
                "homomorphism": self.automorphism.homomorphism,
                "inverse": self.automorphism.inverse,
                "identity": self.automorphism.identity,
            }
        if self.checks:
            data["checks"] = dict(self.checks)
        if self.spectral is not None:
            data["spectral"] = self.spectral.to_dict()
        data["quotient"] = {"status": self.quotient_status, "lower_bound": self.lower.to_dict() if self.lower else None}
        if self.certificate is not None:
            data["admissibility"] = self.certificate.to_dict()
        if self.sweep is not None:
            data["entropy"] = {
                "estimate": self.sweep.estimate,
                "fits": [{"epsilon": c.epsilon, **(c.fit.to_dict() if c.fit else {})} for c in self.sweep.cells],
                "notes": self.sweep.notes + [note for c in self.sweep.cells for note in c.notes],
            }
        if self.separated is not None:
            data["topological"] = {
                "status": self.topological_status,
                "bowen": self.separated.bowen,
                "fit": self.separated.fit.to_dict() if self.separated.fit else None,
                "notes": list(self.separated.notes),
            }
        if self.witness_status is not None:
            data["density_witness"] = {
                "status": self.witness_status,
                "targets": int(len(self.witness.targets)) if self.witness is not None else None,
                "latest_time": float(np.max(self.witness.times)) if self.witness is not None and self.witness.complete else None,
            }
        if self.verdict is not None:
            data["theorem"] = self.verdict.to_dict()
        data["provenance"] = dict(self.provenance)
        data["notes"] = list(self.notes)
        if include_timings:
            data["timings"] = dict(self.timings)
        return _plain(data)


class _Stage:
    """Times a pipeline stage and tags escaping errors with its name."""

    def __init__(self, report: RunReport, name: str):
        self.report = report
        self.name = name

    def __enter__(self) -> "_Stage":
        self.start = time.perf_counter()
        logger.info(f"Stage {self.name} started")
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        elapsed = time.perf_counter() - self.start
        self.report.timings[self.name] = elapsed
        if isinstance(exc, LieEntropyError):
            exc.with_stage(self.name)
            logger.error(f"Stage {self.name} failed after {elapsed:.2f}s: {exc.message}")
        else:
            logger.info(f"Stage {self.name} finished in {elapsed:.2f}s")
        return False


async def run_async(scenario: Scenario, config: Optional[Configuration] = None) -> RunReport:
    """Run every stage of a scenario; epsilon cells are computed concurrently in worker threads."""
    config = copy.deepcopy(config) if config is not None else load_config()
    if scenario.budget is not None:
        config.budget.max_evaluations = scenario.budget
    log_base = str(scenario.log_base or config.entropy.log_base)
    system = scenario.build_system()
    rng = np.random.default_rng(scenario.seed)
    report = RunReport(scenario=scenario, system=system, log_base=log_base)
    report.provenance = {
        "fingerprint": scenario.fingerprint({"budget": config.budget.max_evaluations, "log_base": log_base}),
        "seed": scenario.seed,
        "versions": {"lie_entropy": _package_version(), "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
    }

    with _Stage(report, "system"):
        report.automorphism = system.automorphism_report(rng)
        if not report.automorphism.passed(config.tolerances.automorphism):
            report.notes.append(f"automorphism residuals above {config.tolerances.automorphism}: {report.automorphism}")
        tol = config.tolerances
        axioms = system.group.check_axioms(rng, n=2_000)
        report.checks["group_axioms"] = {
            "passed": axioms.passed(tol.group_axioms, tol.left_invariance, tol.exp_log),
            "associativity": axioms.associativity,
            "left_invariance": axioms.left_invariance,
            "exp_log": axioms.exp_log,
        }
        if not report.checks["group_axioms"]["passed"]:
            report.notes.append(f"group axiom residuals above tolerance on {system.group.name}: {axioms}")
        trajectory = system.solution_formula_residual(rng)
        report.checks["solution_formula"] = {"passed": trajectory <= tol.trajectory, "residual": trajectory}
        if trajectory > tol.trajectory:
            report.notes.append(f"direct and translated trajectories differ by {trajectory:.3e}")

    with _Stage(report, "spectral"):
        report.spectral = spectral_summary(system, config, log_base)
        X = system.group.random_algebra(rng, 200, 0.05)
        conjugation = max(exp_conjugation_residual(system, report.spectral.differential.matrix, X, n) for n in (1, 3))
        report.checks["exp_conjugation"] = {"passed": conjugation <= tol.semiconjugacy, "residual": conjugation}
        if conjugation > tol.semiconjugacy:
            report.notes.append(f"f0^n(exp X) and exp(D^n X) differ by {conjugation:.3e}")

    with _Stage(report, "pair"):
        pair = scenario.build_pair(system)

    lower_slope = None
    with _Stage(report, "quotient"):
        try:
            chart = quotient_chart(system.group, report.spectral.split, report.spectral.closedness)
            measure = invariant_measure(chart)
            measure.check(chart, rng)
            report.lower = lower_bound_table(
                chart,
                measure,
                report.spectral.differential.matrix,
                scenario.K_region,
                scenario.Q_region,
                pair.epsilon,
                scenario.n_values,
                log_base,
                config.measure,
                config.tolerances,
            )
            lower_slope = report.lower.slope
            report.quotient_status = f"{chart.kind} chart, measure {measure.name}"
        except (StableSubgroupNotClosed, QuotientChartUnavailable, ZeroMeasureK) as e:
            report.quotient_status = f"{type(e).__name__}: {e.message}"
            logger.info(f"Quotient stage skipped: {report.quotient_status}")

    with _Stage(report, "admissibility"):
        horizon = scenario.admissibility_horizon or max(scenario.n_values)
        report.certificate = certify_admissible(system, pair, horizon, config.budget.max_evaluations)

    with _Stage(report, "entropy"):
        semaphore = asyncio.Semaphore(max(1, int(config.runner.max_workers)))

        async def compute(eps: float) -> EntropyCell:
            async with semaphore:
                cell_pair = pair.with_epsilon(eps)
                cell_pair.certificate = report.certificate
                return await asyncio.to_thread(
                    entropy_cell, system, cell_pair, scenario.n_values, scenario.mode, config.budget, config.entropy, log_base, scenario.fit_window
                )

        cells = await asyncio.gather(*(compute(eps) for eps in scenario.eps_list))
        report.sweep = assemble_sweep(cells, log_base)
        finest = report.sweep.finest
        exact = finest.exact or (finest.results if scenario.mode == "exact" else [])
        if report.lower is not None and exact:
            violations = lower_bound_violations(report.lower.horizons, report.lower.values, exact)
            report.checks["lower_vs_exact"] = {"passed": not violations, "serving": pair.serving, "violations": [list(v) for v in violations]}
            if violations:
                report.notes.append(f"exact r_inv below the measure lower bound at n={[v[0] for v in violations]} with {pair.serving} serving")

    if scenario.separated_n_values:
        with _Stage(report, "separated"):
            grid = scenario.K_region.grid(scenario.separated_rho or scenario.rho)
            report.separated = await asyncio.to_thread(
                topological_entropy_table,
                system,
                system.group.check_chart(grid),
                scenario.separated_n_values,
                scenario.separated_epsilon or scenario.eps_list[-1],
                report.spectral.bowen,
                log_base,
                config.entropy,
            )
            fit = report.separated.fit
            verified = all(r.spanning_verified and r.separation_verified for r in report.separated.results)
            if fit is None or not verified:
                report.topological_status = "FAIL"
            else:
                report.topological_status = "PASS" if abs(fit.slope - report.spectral.bowen) <= config.entropy.upper_tolerance else "FAIL"

    if scenario.witness_epsilon is not None and isinstance(system.group, TorusGroup):
        with _Stage(report, "witness"):
            split = report.spectral.split
            direction = split.basis_plus[:, 0] if split.basis_plus.shape[1] else split.basis_minus[:, 0]
            try:
                report.witness = density_witness_torus(direction, scenario.witness_epsilon, scenario.witness_t_max or 1e4)
                report.witness_status = "found"
            except WitnessNotFound as e:
                report.witness = e.witness
                report.witness_status = f"not found: {e.message}"
                report.notes.append(report.witness_status)

    with _Stage(report, "theorem"):
        report.verdict = theorem_check(
            report.spectral,
            report.sweep,
            lower_slope,
            report.quotient_status if lower_slope is None else None,
            pair.size,
            config.entropy,
        )

    logger.info(f"Scenario {scenario.name} finished: {'PASS' if report.passed else 'FAIL'}")
    return report


def run(scenario: Scenario, config: Optional[Configuration] = None) -> RunReport:
    """Synchronous wrapper around :func:`run_async`."""
    return asyncio.run(run_async(scenario, config))


def _package_version() -> str:
    from . import __version__

    return __version__


def _write_csv(path: str, columns: List[str], rows: List[Dict[str, Any]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] if isinstance(row.get(c), str) else _num(row.get(c)) for c in columns])


def emit(report: RunReport, output_dir: str, include_timings: bool = False) -> List[str]:
    """Write the result tables, plot data and summary of a run; returns the written paths.

    Files: ``entropy_table.csv`` (one row per (n, epsilon, method) cell),
    ``fits.csv``, ``separated_table.csv``, ``summary.yaml`` and one
    ``growth_eps_<epsilon>.dat`` two-column file (n, log r_inv) per epsilon.
    """
    os.makedirs(output_dir, exist_ok=True)
    written = []

    path = os.path.join(output_dir, "entropy_table.csv")
    _write_csv(path, ENTROPY_COLUMNS, report.entropy_rows())
    written.append(path)

    fit_rows = []
    cells = report.sweep.cells if report.sweep is not None else []
    for cell in cells:
        if cell.fit is None:
            continue
        fit_rows.append(
            {
                "epsilon": cell.epsilon,
                "slope": cell.fit.slope,
                "intercept": cell.fit.intercept,
                "ci_low": cell.fit.ci_low,
                "ci_high": cell.fit.ci_high,
                "limsup": cell.fit.limsup,
                "n_first": cell.fit.horizons[0],
                "n_last": cell.fit.horizons[-1],
                "log_base": cell.fit.log_base,
            }
        )
    path = os.path.join(output_dir, "fits.csv")
    _write_csv(path, FIT_COLUMNS, fit_rows)
    written.append(path)

    path = os.path.join(output_dir, "separated_table.csv")
    _write_csv(path, SEPARATED_COLUMNS, report.separated.rows() if report.separated is not None else [])
    written.append(path)

    for cell in cells:
        path = os.path.join(output_dir, f"growth_eps_{_num(cell.epsilon)}.dat")
        with open(path, "w") as f:
            f.write(f"# n log_r_inv (base {report.log_base})\n")
            for result in cell.results:
                f.write(f"{result.n} {_num(result.to_record(report.log_base)['log_r_inv'])}\n")
        written.append(path)

    path = os.path.join(output_dir, "summary.yaml")
    with open(path, "w") as f:
        yaml.safe_dump(report.summary(include_timings), f, sort_keys=False, default_flow_style=None)
    written.append(path)

    logger.info(f"Wrote {len(written)} files to {output_dir}")
    return written
