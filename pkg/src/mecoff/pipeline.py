"""End-to-end approximation pipeline: discretize, relax, round, materialize.

The chain objective >= (1/2) * fractional matching optimum >= (1/2) *
relaxation optimum gives the (1 - alpha) / (2 + epsilon) guarantee against
the integral optimum; each run records the certificate values so the bound
can be audited per instance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from . import lp
from .discretize import Combination, enumerate_combinations
from .graphs import bg_construct, project, wtg_construct
from .matching import Matching, kdma
from .model import (Assignment, FeasibilityReport, MecInstance,
                    min_power_units, saved_energy, validate_assignment)


@dataclass(frozen=True)
class GmaConfig:
    """Knobs for one pipeline run.

    epsilon sets the discretization step phi = 1 + epsilon / 2; the bound
    factor (1 - alpha) / (2 + epsilon) degrades as epsilon grows while the
    level sets shrink.  prune_equal_energy drops combinations that differ
    from a cheaper one only by surplus compute at identical saved energy
    (the relaxation optimum is unchanged; the LPs get smaller).
    """

    epsilon: float = 0.2
    zero_tolerance: float = 1e-9
    diagnostics: bool = False
    prune_equal_energy: bool = True

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.zero_tolerance <= 0:
            raise ValueError("zero_tolerance must be > 0")

    @property
    def phi(self) -> float:
        return 1.0 + self.epsilon / 2.0


@dataclass
class GmaReport:
    """Per-run accounting: optima, certificate values, timings."""

    objective: float = 0.0
    matching_weight: float = 0.0
    opt_rdp: float = 0.0
    opt_3dm: float = 0.0
    bound_factor: float = 0.0
    accepted_tasks: int = 0
    num_combinations: int = 0
    num_pruned_columns: int = 0
    num_hyperedges: int = 0
    kdma_fallbacks: int = 0
    runtime_s: dict[str, float] = field(default_factory=dict)
    work_units: float = 0.0
    validation: Optional[FeasibilityReport] = None

    @property
    def feasible(self) -> bool:
        return self.validation is not None and self.validation.feasible

    def certificate_ok(self, rel_tol: float = 1e-6) -> bool:
        """Objective >= matching weight >= half the 3DM optimum >= half RDP."""
        slack = rel_tol * (1.0 + abs(self.opt_3dm))
        return (self.objective >= self.matching_weight - slack
                and self.matching_weight >= 0.5 * self.opt_3dm - slack
                and self.opt_3dm >= self.opt_rdp - slack)

    def to_dict(self) -> dict:
        return {
            "objective_j": self.objective,
            "matching_weight_j": self.matching_weight,
            "opt_rdp_j": self.opt_rdp,
            "opt_3dm_j": self.opt_3dm,
            "bound_factor": self.bound_factor,
            "accepted_tasks": self.accepted_tasks,
            "num_combinations": self.num_combinations,
            "num_pruned_columns": self.num_pruned_columns,
            "num_hyperedges": self.num_hyperedges,
            "kdma_fallbacks": self.kdma_fallbacks,
            "runtime_s": dict(self.runtime_s),
            "work_units": self.work_units,
            "feasible": self.feasible,
        }


def prune_equal_energy(combos: list[Combination]) -> list[Combination]:
    """Keep one column per (task, ap, level, server, power) group.

    Within such a group the saved energy is identical (it depends only on
    bandwidth and power), so only the smallest compute level can matter;
    enumeration order guarantees that is the first one seen.
    """
    kept: list[Combination] = []
    seen: set[tuple[int, int, int, int, int]] = set()
    for c in combos:
        key = (c.task, c.ap, c.bw_level, c.server, c.power_units)
        if key in seen:
            continue
        seen.add(key)
        kept.append(c)
    return kept


def gma(inst: MecInstance, cfg: GmaConfig = GmaConfig()
        ) -> tuple[Assignment, GmaReport]:
    """Run the full approximation and materialize a feasible assignment.

    Every matched hyperedge fixes the task's AP, server, and allocations;
    the transmit power is re-derived from the edge's (possibly larger)
    allocations, so the realized saved energy is at least the edge weight.
    """
    report = GmaReport(bound_factor=(1.0 - inst.alpha) / (2.0 + cfg.epsilon))
    clock = time.monotonic
    t0 = clock()

    combos = enumerate_combinations(inst, cfg.phi)
    report.num_combinations = len(combos)
    columns = prune_equal_energy(combos) if cfg.prune_equal_energy else combos
    report.num_pruned_columns = len(columns)
    report.work_units += 3.0 * len(combos)
    report.runtime_s["enumerate"] = clock() - t0

    assignment = Assignment.empty(inst.num_tasks)
    if not columns:
        report.validation = validate_assignment(inst, assignment)
        return assignment, report

    t1 = clock()
    rdp = lp.build_rdp(inst, columns)
    z = lp.solve(rdp)
    report.opt_rdp = z.objective
    report.work_units += float(z.pivots) * rdp.num_vars
    report.runtime_s["rdp"] = clock() - t1

    t2 = clock()
    xt, yt = project(z, columns, cfg.zero_tolerance)
    bg_x = bg_construct(xt, {(j, m): c.bw_units for j, m, c in
                             _level_units(columns, "ap")})
    bg_y = bg_construct(yt, {(k, n): c.cpu_units for k, n, c in
                             _level_units(columns, "server")})
    graph = wtg_construct(z, columns, bg_x, bg_y, inst.num_tasks,
                          cfg.zero_tolerance)
    report.num_hyperedges = len(graph.hyperedges)
    report.work_units += 10.0 * len(graph.hyperedges)
    report.runtime_s["graphs"] = clock() - t2

    t3 = clock()
    dm = lp.build_3dm(graph)
    fz = lp.solve(dm)
    report.opt_3dm = fz.objective
    report.work_units += float(fz.pivots) * max(dm.num_vars, 1)
    report.runtime_s["3dm"] = clock() - t3

    t4 = clock()
    matching = kdma(graph, fz, zero_tol=cfg.zero_tolerance)
    report.matching_weight = matching.weight
    report.kdma_fallbacks = matching.fallbacks
    report.runtime_s["kdma"] = clock() - t4

    t5 = clock()
    total = _materialize(inst, graph, matching, assignment)
    assignment.objective = total
    report.objective = total
    report.accepted_tasks = sum(1 for _ in assignment.offloaded_tasks())
    report.validation = validate_assignment(inst, assignment)
    report.runtime_s["materialize"] = clock() - t5
    report.runtime_s["total"] = clock() - t0

    if cfg.diagnostics and not report.certificate_ok():
        raise AssertionError(
            f"certificate chain violated: obj={report.objective:.9g} "
            f"matching={report.matching_weight:.9g} "
            f"3dm={report.opt_3dm:.9g} rdp={report.opt_rdp:.9g}")
    return assignment, report


def _level_units(columns: list[Combination], side: str):
    if side == "ap":
        for c in columns:
            yield c.ap, c.bw_level, c
    else:
        for c in columns:
            yield c.server, c.cpu_level, c


def _materialize(inst: MecInstance, graph, matching: Matching,
                 assignment: Assignment) -> float:
    total = 0.0
    for idx in matching.selected:
        e = graph.hyperedges[idx]
        task = inst.tasks[e.task]
        j, _ = e.ap_node
        k, _ = e.server_node
        gain = task.gain_at(j)
        budget = (task.deadline - inst.delay_s[j][k]
                  - task.cycles / (e.cpu_units * inst.compute_unit))
        power = min_power_units(task, e.bw_units, budget, gain, inst)
        realized = saved_energy(task, e.bw_units, power, gain, inst)
        assignment.set_task(e.task, j, k, e.bw_units, e.cpu_units, power)
        total += realized
    return total


def acceptance_ratio(a: Assignment, inst: MecInstance) -> float:
    """Fraction of tasks the assignment offloads."""
    if inst.num_tasks == 0:
        return 0.0
    return sum(1 for _ in a.offloaded_tasks()) / inst.num_tasks
