from typing import Callable, Dict, List, Optional

import numpy as np

from calabi_lab.config import LabConfig
from calabi_lab.core.calabi.invariant import calabi_report, potential_gradient_residual
from calabi_lab.core.chart.darboux import LinearChart, chart_symplecticity_residual
from calabi_lab.core.chart.graph import alpha_closedness_residual, graphicality_report
from calabi_lab.core.flow.integrator import FlowMap, realize_time_one, stiffness_steps
from calabi_lab.core.flow.operations import concatenate
from calabi_lab.core.geometry.fields import TimeDepField
from calabi_lab.core.geometry.forms import primitive, primitive_residual
from calabi_lab.core.geometry.symplectic import symplectic_defect
from calabi_lab.core.phase.correction import correction_residual, path_independence_residual
from calabi_lab.core.phase.phase_function import (
    phase_data,
    phase_gradient_residual,
    phase_pullback_integrals,
    theorem_bound_check,
)
from calabi_lab.core.suites.catalog import suite_catalog
from calabi_lab.models.reports import CalabiReport, InvariantCheck, VerifyReport
from calabi_lab.utils.exceptions import CalabiLabException
from calabi_lab.utils.logging import get_logger

logger = get_logger(__name__)

LIOUVILLE_TOL = 1e-6
ORACLE_PROBES = 100
PHASE_PROBES = 50
SECTION_PROBES = 6


class VerifyService:
    """Runs every invariant of the lab against a Hamiltonian suite"""

    def __init__(self):
        self.catalog = suite_catalog

    def _check(self, name: str, tolerance: float, measure: Callable[[], float]) -> InvariantCheck:
        try:
            measured = float(measure())
        except CalabiLabException as e:
            logger.error("Invariant check raised", check=name, error=str(e))
            return InvariantCheck(name=name, tolerance=tolerance, passed=False, detail=str(e))
        check = InvariantCheck(
            name=name,
            tolerance=tolerance,
            measured=measured,
            passed=bool(np.isfinite(measured) and measured <= tolerance),
        )
        if not check.passed:
            logger.error("Invariant failed", check=name, tolerance=tolerance, measured=measured)
        return check

    def _realize(self, H: TimeDepField, config: LabConfig, probes: Optional[np.ndarray] = None) -> FlowMap:
        return realize_time_one(H, stiffness_steps(H, config.integrator(), config.max_step_stiffness, probes))

    def run_verify_suite(
        self,
        config: LabConfig,
        chart: Optional[LinearChart] = None,
        suite: Optional[str] = None,
    ) -> VerifyReport:
        """
        Run all checks; a failed chart check skips the rest

        Args:
            config: lab settings (tolerances, probe counts, seed)
            chart: chart whose symplecticity gates the run, the linear chart by default
            suite: suite name, config.suite by default

        Returns:
            Report listing each invariant with its tolerance and measured value
        """
        suite = suite or config.suite
        n = config.dim
        report = VerifyReport(suite=suite)
        rng = np.random.default_rng(config.seed)
        logger.info("Verification started", suite=suite, n=n, chart=repr(chart) if chart else "linear")

        chart_check = self._check(
            "chart_symplecticity",
            config.tol_chart,
            lambda: chart_symplecticity_residual(n, chart, rng=rng),
        )
        report.checks.append(chart_check)
        members = self.catalog.members(suite, n, config.smoothing_floor)
        if not chart_check.passed:
            for name in self._planned_checks(config, suite, [name for name, _ in members]):
                report.checks.append(
                    InvariantCheck(name=name, tolerance=0.0, skipped=True, detail="chart check failed")
                )
            logger.error("Verification stopped after chart failure", suite=suite)
            return report

        report.checks.extend(self._form_checks(config, rng))
        calabi: Dict[str, CalabiReport] = {}
        for name, H in members:
            checks, calabi[name] = self._member_checks(name, H, config, rng)
            report.checks.extend(checks)
        for first, second in self.catalog.pairs(suite):
            report.checks.extend(
                self._pair_checks(first, second, dict(members), calabi, config)
            )
        report.checks.extend(self._section_checks(suite, config, rng))

        logger.info(
            "Verification finished",
            suite=suite,
            checks=len(report.checks),
            failures=[check.name for check in report.failures],
            passed=report.passed,
        )
        return report

    def _planned_checks(self, config: LabConfig, suite: str, members: List[str]) -> List[str]:
        names = []
        for kind in config.kinds():
            names += [f"liouville_exactness[{kind.value}]", f"correction_identity[{kind.value}]"]
            names.append(f"path_independence[{kind.value}]")
        for member in members:
            for check in ("flow_symplecticity", "calabi_agreement", "potential_oracle", "phase_gradient"):
                names.append(f"{check}[{member}]")
            names += [f"phase_support[{member}]", f"bridge_identity[{member}]"]
        for first, second in self.catalog.pairs(suite):
            names += [f"homomorphism_hamiltonian[{first}+{second}]", f"homomorphism_potential[{first}+{second}]"]
        return names + ["phase_bound", "section_identity", "alpha_closedness"]

    def _form_checks(self, config: LabConfig, rng: np.random.Generator) -> List[InvariantCheck]:
        """d lambda = omega for each primitive, and the defining identities of R"""
        n = config.dim
        points = rng.uniform(-2.0, 2.0, size=(config.probe_count, 2 * n))
        chart_points = rng.uniform(-1.0, 1.0, size=(config.probe_count, 4 * n))
        checks = []
        for kind in config.kinds():
            checks.append(self._check(
                f"liouville_exactness[{kind.value}]",
                LIOUVILLE_TOL,
                lambda: primitive_residual(primitive(kind), points, config.fd_step),
            ))
            checks.append(self._check(
                f"correction_identity[{kind.value}]",
                config.tol_correction,
                lambda: correction_residual(kind, chart_points, config.path_nodes, config.fd_step),
            ))
            checks.append(self._check(
                f"path_independence[{kind.value}]",
                config.tol_path,
                lambda: path_independence_residual(kind, chart_points, config.path_nodes, rng),
            ))
        return checks

    def _member_checks(self, name: str, H: TimeDepField, config: LabConfig, rng: np.random.Generator):
        kinds = config.kinds()
        kind = kinds[0]
        q = config.quadrature()
        if H.is_zero:
            names = ["flow_symplecticity", "calabi_agreement", "potential_oracle", "phase_gradient"]
            names += ["phase_support", "bridge_identity"]
            checks = [
                InvariantCheck(name=f"{check}[{name}]", tolerance=0.0, measured=0.0, passed=True, detail="zero Hamiltonian")
                for check in names
            ]
            return checks, CalabiReport(cal_H=0.0, cal_f={k.value: 0.0 for k in kinds})

        phi = self._realize(H, config)
        probes = H.support.sample(rng, config.probe_count)
        calabi = calabi_report(H, q, phi.config, kinds, phi)
        outside = self._outside_points(H, rng, config.probe_count)

        def bridge() -> float:
            I_S, I_R = phase_pullback_integrals(phi, H, kind, q, config.path_nodes)
            return abs((H.n + 1) * calabi.cal_H - (I_S - I_R))

        checks = [
            self._check(f"flow_symplecticity[{name}]", config.tol_flow, lambda: symplectic_defect(phi.jacobian(probes))),
            self._check(f"calabi_agreement[{name}]", config.tol_calabi, lambda: calabi.discrepancy),
            self._check(
                f"potential_oracle[{name}]",
                config.tol_potential,
                lambda: max(
                    potential_gradient_residual(phi, k, probes[:ORACLE_PROBES], config.fd_step) for k in kinds
                ),
            ),
            self._check(
                f"phase_gradient[{name}]",
                config.tol_phase,
                lambda: phase_gradient_residual(phi, H, kind, probes[:PHASE_PROBES], config.path_nodes, config.fd_step),
            ),
            self._check(
                f"phase_support[{name}]",
                0.0,
                lambda: float(np.max(np.abs(phase_data(phi, kind, outside, config.path_nodes).S), initial=0.0)),
            ),
            self._check(f"bridge_identity[{name}]", config.tol_bridge, bridge),
        ]
        return checks, calabi

    def _outside_points(self, H: TimeDepField, rng: np.random.Generator, count: int) -> np.ndarray:
        """Points beyond the support box along every axis"""
        box = H.support
        signs = rng.choice([-1.0, 1.0], size=(count, box.size))
        reach = 0.5 * box.sides * (1.0 + rng.uniform(0.05, 0.5, size=(count, box.size)))
        return box.center + signs * reach

    def _pair_checks(
        self,
        first: str,
        second: str,
        members: Dict[str, TimeDepField],
        calabi: Dict[str, CalabiReport],
        config: LabConfig,
    ) -> List[InvariantCheck]:
        """Calabi is additive under composition, through both formulas"""
        label = f"{first}+{second}"
        H, K = members[first], members[second]
        composed = concatenate(H, K)
        expected = calabi[first].cal_H + calabi[second].cal_H
        if composed.is_zero:
            report = CalabiReport(cal_H=0.0, cal_f={k.value: 0.0 for k in config.kinds()})
        else:
            phi = self._realize(composed, config)
            report = calabi_report(composed, config.quadrature(), phi.config, config.kinds(), phi)
        return [
            self._check(f"homomorphism_hamiltonian[{label}]", config.tol_calabi, lambda: abs(report.cal_H - expected)),
            self._check(
                f"homomorphism_potential[{label}]",
                config.tol_calabi,
                lambda: max((abs(value - expected) for value in report.cal_f.values()), default=0.0),
            ),
        ]

    def _section_checks(self, suite: str, config: LabConfig, rng: np.random.Generator) -> List[InvariantCheck]:
        """The phase bound and grad_q (S o alpha) = -alpha on the first member of the epsilon schedule"""
        eps = config.eps_values()[0]
        base = self.catalog.build(self.catalog.section_member(suite), config.dim, suite, config.smoothing_floor)
        H = eps * base
        kind = config.kinds()[0]
        if H.is_zero:
            return [
                InvariantCheck(name=name, tolerance=0.0, measured=0.0, passed=True, detail="zero Hamiltonian")
                for name in ("phase_bound", "section_identity", "alpha_closedness")
            ]

        phi = self._realize(H, config)
        probes = H.support.sample(rng, SECTION_PROBES, margin=0.1)
        try:
            graphicality = graphicality_report(phi, config.grid_res, config.det_threshold, config.collision_fraction)
            bound = theorem_bound_check(
                phi, H, kind, config.grid_res, config.newton(), config.path_nodes, graphicality, probes, config.fd_step
            )
        except CalabiLabException as e:
            logger.error("Section checks could not run", error=str(e))
            return [
                InvariantCheck(name=name, tolerance=0.0, passed=False, detail=str(e))
                for name in ("phase_bound", "section_identity", "alpha_closedness")
            ]
        allowance = (bound.A + 1.0) * bound.sup_alpha + bound.slack
        return [
            self._check("phase_bound", allowance, lambda: bound.sup_S),
            self._check("section_identity", config.tol_section, lambda: bound.section_residual),
            self._check(
                "alpha_closedness",
                config.tol_section,
                lambda: alpha_closedness_residual(phi, probes, config.newton()),
            ),
        ]


# Global instance
verify_service = VerifyService()
