"""Baseline algorithms and the exact oracle.

zsg: greedy by energy-to-resource ratio with zero-slack time splitting.
ldm: equal-interval discretization solved as an ILP by anytime
branch-and-bound under a runtime budget.
brute_force_opt: exhaustive optimum for tiny instances, used to audit the
approximation bound.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import lp
from .discretize import Combination
from .model import (Assignment, MecInstance, PowerLimitError, _EXP_CAP,
                    iceil, ifloor, local_energy, min_power_units,
                    offload_rate, saved_energy)


class OracleSizeError(ValueError):
    """Instance exceeds the brute-force size guards."""


@dataclass
class OracleResult:
    assignment: Assignment
    optimum: float
    explored: int
    proven_optimal: bool


@dataclass(frozen=True)
class OracleCaps:
    """Search-space guards; defaults keep the exhaustive search under a minute."""

    max_tasks: int = 6
    max_bandwidth_units: int = 8
    max_compute_units: int = 8
    max_power_units: int = 4


# ---------------------------------------------------------------------------
# ZSG greedy


def zsg(inst: MecInstance) -> Assignment:
    """Greedy offloading by highest energy-to-resource-allocation ratio.

    Per (task, AP, server) candidate the remaining deadline is split between
    offloading and processing in proportion to the fastest achievable phase
    times (alpha-capped allocations, max power); minimal integer allocations
    meeting those stretched phase budgets are derived, the processing slack
    is folded back into the offload budget, and the candidate's ratio is
    saved energy over the normalized capacity fractions b/b_j + c/c_k.
    Candidates commit greedily while capacities last.
    """
    candidates = []
    for i, task in enumerate(inst.tasks):
        e_local = local_energy(task, inst.local_energy_coeff)
        if e_local <= 0:
            continue
        for j in sorted(task.accessible_aps):
            gain = task.gain_at(j)
            b_cap = ifloor(inst.alpha * inst.aps[j].bandwidth_units)
            if b_cap < 1:
                continue
            log_term = math.log2(
                1.0 + inst.max_power_units * inst.power_unit * gain
                / inst.noise_power)
            for k in range(inst.num_servers):
                c_cap = ifloor(inst.alpha * inst.servers[k].compute_units)
                if c_cap < 1:
                    continue
                window = task.deadline - inst.delay_s[j][k]
                if window <= 0:
                    continue
                t_off_min = task.input_size / (
                    b_cap * inst.bandwidth_unit * log_term)
                t_proc_min = task.cycles / (c_cap * inst.compute_unit)
                if t_off_min + t_proc_min > window:
                    continue
                stretch = window / (t_off_min + t_proc_min)
                t_proc = t_proc_min * stretch
                c_units = min(max(1, iceil(task.cycles
                                           / (t_proc * inst.compute_unit))),
                              c_cap)
                t_off = window - task.cycles / (c_units * inst.compute_unit)
                b_units = min(max(1, iceil(task.input_size
                                           / (t_off * inst.bandwidth_unit
                                              * log_term))),
                              b_cap)
                try:
                    power = min_power_units(task, b_units, t_off, gain, inst)
                except PowerLimitError:
                    continue
                energy = saved_energy(task, b_units, power, gain, inst)
                if energy <= 0:
                    continue
                share = (b_units / inst.aps[j].bandwidth_units
                         + c_units / inst.servers[k].compute_units)
                candidates.append((energy / share, i, j, k,
                                   b_units, c_units, power, energy))

    candidates.sort(key=lambda c: (-c[0], c[1], c[2], c[3]))
    a = Assignment.empty(inst.num_tasks)
    rem_b = [ap.bandwidth_units for ap in inst.aps]
    rem_c = [s.compute_units for s in inst.servers]
    total = 0.0
    for _, i, j, k, b, c, p, energy in candidates:
        if a.is_offloaded(i) or rem_b[j] < b or rem_c[k] < c:
            continue
        a.set_task(i, j, k, b, c, p)
        rem_b[j] -= b
        rem_c[k] -= c
        total += energy
    a.objective = total
    return a


# ---------------------------------------------------------------------------
# LDM: equal-interval discretization + anytime branch and bound


@dataclass(frozen=True)
class _Column:
    task: int
    ap: int
    server: int
    bw_units: int
    cpu_units: int
    power_units: int
    energy: float


class _BudgetExhausted(Exception):
    pass


class _Meter:
    """Joint deterministic-work and wall-clock budget."""

    def __init__(self, work_budget: Optional[float], deadline: Optional[float]):
        self.work_budget = work_budget
        self.deadline = deadline
        self.work = 0.0
        self._ticks = 0

    def spend(self, units: float) -> None:
        self.work += units
        if self.work_budget is not None and self.work > self.work_budget:
            raise _BudgetExhausted
        self._ticks += 1
        if self.deadline is not None and self._ticks % 64 == 0:
            if time.monotonic() > self.deadline:
                raise _BudgetExhausted

    def exhausted(self) -> bool:
        if self.work_budget is not None and self.work > self.work_budget:
            return True
        return self.deadline is not None and time.monotonic() > self.deadline


def _ldm_columns(inst: MecInstance, q_b: int, q_c: int,
                 meter: _Meter) -> list[list[_Column]]:
    """Per-task candidate columns on the interval grid.

    For each bandwidth multiple only compute levels where the minimal
    integer power actually drops are kept; intermediate grid points cost
    more compute for the same saved energy.
    """
    p_levels = np.arange(1, inst.max_power_units + 1, dtype=float)
    out: list[list[_Column]] = [[] for _ in inst.tasks]
    for i, task in enumerate(inst.tasks):
        e_local = local_energy(task, inst.local_energy_coeff)
        if e_local <= 0:
            continue
        for j in sorted(task.accessible_aps):
            gain = task.gain_at(j)
            b_cap = ifloor(inst.alpha * inst.aps[j].bandwidth_units)
            if b_cap < q_b:
                continue
            bw = np.arange(q_b, b_cap + 1, q_b, dtype=float)
            snr = p_levels * inst.power_unit * gain / inst.noise_power
            rate = bw[:, None] * inst.bandwidth_unit * np.log2(1.0 + snr)
            t_off = task.input_size / rate                     # (B, P)
            e_off = p_levels * inst.power_unit * t_off
            energy = e_local - e_off
            for k in range(inst.num_servers):
                c_cap = ifloor(inst.alpha * inst.servers[k].compute_units)
                if c_cap < q_c:
                    continue
                window = task.deadline - inst.delay_s[j][k]
                t_rem = window - t_off
                with np.errstate(divide="ignore", invalid="ignore"):
                    c_real = task.cycles / (t_rem * inst.compute_unit)
                meter.spend(bw.size * p_levels.size)
                for bi in range(bw.shape[0]):
                    seen_c: set[int] = set()
                    for pi in range(p_levels.shape[0]):
                        if t_rem[bi, pi] <= 0 or energy[bi, pi] <= 0:
                            continue
                        c_units = q_c * iceil(c_real[bi, pi] / q_c)
                        c_units = max(c_units, q_c)
                        if c_units > c_cap or c_units in seen_c:
                            continue
                        seen_c.add(c_units)
                        out[i].append(_Column(
                            i, j, k, int(bw[bi]), c_units, pi + 1,
                            float(energy[bi, pi])))
        out[i].sort(key=lambda c: (c.ap, c.server, c.bw_units, c.cpu_units))
    return out


def _columns_lp(inst: MecInstance, columns: list[list[_Column]]
                ) -> lp.LinearProgram:
    flat = [c for cols in columns for c in cols]
    n = len(flat)
    data, ri, ci = [], [], []
    obj = np.zeros(n)
    for idx, c in enumerate(flat):
        obj[idx] = c.energy
        data += [1.0, float(c.bw_units), float(c.cpu_units)]
        ri += [c.task, inst.num_tasks + c.ap,
               inst.num_tasks + inst.num_aps + c.server]
        ci += [idx, idx, idx]
    m = inst.num_tasks + inst.num_aps + inst.num_servers
    from scipy import sparse
    mat = sparse.csc_matrix((data, (ri, ci)), shape=(m, n))
    rhs = np.concatenate([
        np.ones(inst.num_tasks),
        np.array([float(a.bandwidth_units) for a in inst.aps]),
        np.array([float(s.compute_units) for s in inst.servers]),
    ])
    return lp.LinearProgram(obj, mat, ("<=",) * m, rhs)


def ldm(inst: MecInstance, bw_interval: float = 1e6,
        cpu_interval: float = 5e7, budget_s: Optional[float] = None,
        work_budget: Optional[float] = None) -> Assignment:
    """Equal-interval ILP baseline under an anytime budget.

    Allocations are restricted to multiples of the interval sizes (snapped
    to whole resource units).  The resulting ILP is searched by
    branch-and-bound: a ratio-greedy dive provides the first incumbent, the
    root LP relaxation provides the global bound and the branching order,
    and per-node bounds add the undecided tasks' best columns.  The best
    incumbent when the budget runs out is returned; with no budget the
    search is exact over the grid.

    budget_s is wall-clock seconds; work_budget is a deterministic work
    count for reproducible runs.  A zero budget returns the empty
    assignment.
    """
    empty = Assignment.empty(inst.num_tasks)
    if (budget_s is not None and budget_s <= 0) or \
            (work_budget is not None and work_budget <= 0):
        return empty
    deadline = time.monotonic() + budget_s if budget_s is not None else None
    meter = _Meter(work_budget, deadline)

    q_b = max(1, round(bw_interval / inst.bandwidth_unit))
    q_c = max(1, round(cpu_interval / inst.compute_unit))
    try:
        columns = _ldm_columns(inst, q_b, q_c, meter)
    except _BudgetExhausted:
        return empty

    search = _LdmSearch(inst, columns, meter)
    try:
        search.run()
    except _BudgetExhausted:
        pass
    return search.best_assignment()


class _LdmSearch:
    def __init__(self, inst: MecInstance, columns: list[list[_Column]],
                 meter: _Meter):
        self.inst = inst
        self.columns = columns
        self.meter = meter
        self.incumbent: list[Optional[_Column]] = [None] * inst.num_tasks
        self.incumbent_value = 0.0
        self.global_bound = math.inf
        self.order = list(range(inst.num_tasks))
        self.nodes = 0

    # -- incumbent handling --------------------------------------------------

    def _record(self, value: float, chosen: dict[int, _Column]) -> None:
        if value > self.incumbent_value + 1e-12:
            self.incumbent_value = value
            self.incumbent = [None] * self.inst.num_tasks
            for i, col in chosen.items():
                self.incumbent[i] = col

    def best_assignment(self) -> Assignment:
        a = Assignment.empty(self.inst.num_tasks)
        total = 0.0
        for i, col in enumerate(self.incumbent):
            if col is not None:
                a.set_task(i, col.ap, col.server, col.bw_units,
                           col.cpu_units, col.power_units)
                total += col.energy
        a.objective = total
        return a

    # -- search --------------------------------------------------------------

    def run(self) -> None:
        self._greedy_dive()
        self._root_lp()
        suffix = self._suffix_bounds()
        if suffix[0] <= self.incumbent_value + 1e-12:
            return
        rem_b = [a.bandwidth_units for a in self.inst.aps]
        rem_c = [s.compute_units for s in self.inst.servers]
        self._dfs(0, 0.0, rem_b, rem_c, {}, suffix)

    def _greedy_dive(self) -> None:
        flat = [c for cols in self.columns for c in cols]
        flat.sort(key=lambda c: (
            -c.energy / (c.bw_units / self.inst.aps[c.ap].bandwidth_units
                         + c.cpu_units / self.inst.servers[c.server].compute_units),
            c.task, c.ap, c.server, c.bw_units))
        self.meter.spend(len(flat))
        rem_b = [a.bandwidth_units for a in self.inst.aps]
        rem_c = [s.compute_units for s in self.inst.servers]
        chosen: dict[int, _Column] = {}
        value = 0.0
        for col in flat:
            if col.task in chosen or rem_b[col.ap] < col.bw_units \
                    or rem_c[col.server] < col.cpu_units:
                continue
            chosen[col.task] = col
            rem_b[col.ap] -= col.bw_units
            rem_c[col.server] -= col.cpu_units
            value += col.energy
        self._record(value, chosen)

    def _root_lp(self) -> None:
        n_cols = sum(len(c) for c in self.columns)
        if n_cols == 0:
            self.global_bound = 0.0
            return
        budget = None
        if self.meter.work_budget is not None:
            budget = 0.4 * (self.meter.work_budget - self.meter.work)
            if budget <= 0:
                return
        try:
            relax = _columns_lp(self.inst, self.columns)
            sol = lp.solve(relax, work_limit=budget, deadline=self.meter.deadline)
        except lp.LpWorkLimitError:
            return
        self.meter.work += float(sol.pivots) * relax.num_vars
        self.global_bound = sol.objective
        # branch first on the task the relaxation leans on hardest
        mass = [0.0] * self.inst.num_tasks
        pos = 0
        for i, cols in enumerate(self.columns):
            for _ in cols:
                mass[i] += float(sol.values[pos])
                pos += 1
        self.order.sort(key=lambda i: (-mass[i], i))

    def _suffix_bounds(self) -> list[float]:
        best = [max((c.energy for c in self.columns[i]), default=0.0)
                for i in self.order]
        suffix = [0.0] * (len(best) + 1)
        for d in range(len(best) - 1, -1, -1):
            suffix[d] = suffix[d + 1] + best[d]
        return suffix

    def _dfs(self, depth: int, value: float, rem_b: list[int],
             rem_c: list[int], chosen: dict[int, _Column],
             suffix: list[float]) -> None:
        self.nodes += 1
        self.meter.spend(8.0)
        if value + suffix[depth] <= self.incumbent_value + 1e-12:
            return
        if self.incumbent_value >= self.global_bound - 1e-9 * (
                1.0 + abs(self.global_bound)):
            return
        if depth == len(self.order):
            self._record(value, chosen)
            return
        task = self.order[depth]
        feasible = [c for c in self.columns[task]
                    if rem_b[c.ap] >= c.bw_units
                    and rem_c[c.server] >= c.cpu_units]
        self.meter.spend(float(len(self.columns[task])))
        # children best-bound first; skipping the task comes last
        feasible.sort(key=lambda c: (-c.energy, c.ap, c.server,
                                     c.bw_units, c.cpu_units))
        for col in feasible:
            rem_b[col.ap] -= col.bw_units
            rem_c[col.server] -= col.cpu_units
            chosen[task] = col
            self._dfs(depth + 1, value + col.energy, rem_b, rem_c, chosen,
                      suffix)
            del chosen[task]
            rem_b[col.ap] += col.bw_units
            rem_c[col.server] += col.cpu_units
        self._dfs(depth + 1, value, rem_b, rem_c, chosen, suffix)


# ---------------------------------------------------------------------------
# Exact oracle


def brute_force_opt(inst: MecInstance, caps: OracleCaps = OracleCaps()
                    ) -> OracleResult:
    """Exhaustive optimum over all integral allocations.

    Searches task by task over (AP, server, bandwidth, compute) with the
    minimal integer power, pruning by remaining capacity and by the sum of
    the undecided tasks' best options.  Ties resolve to the first optimum in
    lexicographic option order (ascending AP, server, bandwidth, compute,
    with "keep local" last).
    """
    if inst.num_tasks > caps.max_tasks:
        raise OracleSizeError(f"more than {caps.max_tasks} tasks")
    if any(a.bandwidth_units > caps.max_bandwidth_units for a in inst.aps):
        raise OracleSizeError("AP capacity exceeds oracle guard")
    if any(s.compute_units > caps.max_compute_units for s in inst.servers):
        raise OracleSizeError("server capacity exceeds oracle guard")
    if inst.max_power_units > caps.max_power_units:
        raise OracleSizeError("power cap exceeds oracle guard")

    options: list[list[tuple[int, int, int, int, int, float]]] = []
    for task in inst.tasks:
        opts = []
        for j in sorted(task.accessible_aps):
            gain = task.gain_at(j)
            b_cap = ifloor(inst.alpha * inst.aps[j].bandwidth_units)
            for k in range(inst.num_servers):
                c_cap = ifloor(inst.alpha * inst.servers[k].compute_units)
                for b in range(1, b_cap + 1):
                    for c in range(1, c_cap + 1):
                        budget = (task.deadline - inst.delay_s[j][k]
                                  - task.cycles / (c * inst.compute_unit))
                        if budget <= 0:
                            continue
                        try:
                            p = min_power_units(task, b, budget, gain, inst)
                        except PowerLimitError:
                            continue
                        energy = saved_energy(task, b, p, gain, inst)
                        if energy <= 0:
                            continue
                        opts.append((j, k, b, c, p, energy))
        options.append(opts)

    best_energy = [max((o[5] for o in opts), default=0.0) for opts in options]
    suffix = [0.0] * (inst.num_tasks + 1)
    for i in range(inst.num_tasks - 1, -1, -1):
        suffix[i] = suffix[i + 1] + best_energy[i]

    state = {
        "best": 0.0,
        "best_choice": [None] * inst.num_tasks,
        "explored": 0,
    }
    choice: list[Optional[tuple]] = [None] * inst.num_tasks
    rem_b = [a.bandwidth_units for a in inst.aps]
    rem_c = [s.compute_units for s in inst.servers]

    def dfs(i: int, value: float) -> None:
        state["explored"] += 1
        if value + suffix[i] <= state["best"] - 1e-15 or \
                (state["best_choice"][0] is not None or state["best"] > 0.0
                 ) and value + suffix[i] < state["best"] - 1e-15:
            return
        if value + suffix[i] < state["best"] - 1e-15:
            return
        if i == inst.num_tasks:
            if value > state["best"] + 1e-15:
                state["best"] = value
                state["best_choice"] = list(choice)
            return
        for opt in options[i]:
            j, k, b, c, p, energy = opt
            if rem_b[j] < b or rem_c[k] < c:
                continue
            if value + energy + suffix[i + 1] <= state["best"] + 1e-15:
                continue
            rem_b[j] -= b
            rem_c[k] -= c
            choice[i] = opt
            dfs(i + 1, value + energy)
            choice[i] = None
            rem_b[j] += b
            rem_c[k] += c
        dfs(i + 1, value)

    dfs(0, 0.0)

    a = Assignment.empty(inst.num_tasks)
    total = 0.0
    for i, opt in enumerate(state["best_choice"]):
        if opt is not None:
            j, k, b, c, p, energy = opt
            a.set_task(i, j, k, b, c, p)
            total += energy
    a.objective = total
    return OracleResult(a, total, state["explored"], True)


def performance_ratio(obj: float, inst: MecInstance,
                      combos: Sequence[Combination], phi: float) -> float:
    """Objective over the optimal-policy LP optimum for the same phi."""
    ub = lp.solve(lp.build_upper_bound_lp(inst, combos, phi)).objective
    return ratio_against(obj, ub)


def ratio_against(obj: float, upper_bound: float) -> float:
    if upper_bound <= 1e-12:
        return 1.0 if obj <= 1e-12 else math.inf
    return obj / upper_bound
