"""Problem instances, physical-layer formulas, and the feasibility validator.

Canonical units throughout: bits, Hz, cycles/s, W, seconds, joules.
Bandwidth, compute, and transmit power are allocated in integer numbers of
units (``bandwidth_unit`` Hz, ``compute_unit`` cycles/s, ``power_unit`` W);
file formats and generators convert to these units at the boundary.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

# Exponents beyond this make the inverted Shannon power astronomically larger
# than any realistic power cap, and 2.0**x would overflow anyway.
_EXP_CAP = 500.0

# Snap tolerance for integer unit arithmetic (LP output and float inversions
# carry rounding noise well below this).
_UNIT_SNAP = 1e-9


class InstanceError(ValueError):
    """Raised when a problem instance violates a structural invariant."""


class ZeroRateError(ValueError):
    """Raised when an offloading energy is requested at zero rate."""


class PowerLimitError(ValueError):
    """Raised when no admissible power level meets a time budget."""

    def __init__(self, required_units: float, max_units: int):
        self.required_units = required_units
        self.max_units = max_units
        super().__init__(
            f"required {required_units:g} power units exceeds cap {max_units}"
        )


def db_to_linear(db: float) -> float:
    """Convert a dB power quantity to linear scale."""
    return 10.0 ** (db / 10.0)


def ifloor(x: float) -> int:
    """Floor with a snap guard so 2.999999999 counts as 3."""
    return int(math.floor(x + _UNIT_SNAP))


def iceil(x: float) -> int:
    """Ceil with a snap guard so 3.000000001 counts as 3."""
    return int(math.ceil(x - _UNIT_SNAP))


@dataclass(frozen=True)
class Task:
    """One offloadable task.

    input_size is in bits, cycles_per_bit in cycles/bit, local_cpu in
    cycles/s, deadline in seconds.  accessible_aps lists the AP indices the
    task may offload to and gains holds the linear channel gain toward each
    of them (same order).
    """

    id: int
    input_size: float
    cycles_per_bit: float
    local_cpu: float
    deadline: float
    accessible_aps: tuple[int, ...]
    gains: tuple[float, ...]

    def __post_init__(self):
        if self.input_size <= 0:
            raise InstanceError(f"task {self.id}: input_size must be > 0")
        if self.cycles_per_bit <= 0:
            raise InstanceError(f"task {self.id}: cycles_per_bit must be > 0")
        if self.local_cpu <= 0:
            raise InstanceError(f"task {self.id}: local_cpu must be > 0")
        if self.deadline <= 0:
            raise InstanceError(f"task {self.id}: deadline must be > 0")
        if not self.accessible_aps:
            raise InstanceError(f"task {self.id}: accessible_aps is empty")
        if len(set(self.accessible_aps)) != len(self.accessible_aps):
            raise InstanceError(f"task {self.id}: duplicate accessible AP")
        if len(self.gains) != len(self.accessible_aps):
            raise InstanceError(f"task {self.id}: gains do not match APs")
        if any(g <= 0 for g in self.gains):
            raise InstanceError(f"task {self.id}: channel gain must be > 0")

    @property
    def cycles(self) -> float:
        """Total CPU cycles needed to process the task."""
        return self.input_size * self.cycles_per_bit

    def gain_at(self, ap: int) -> float:
        return self.gains[self.accessible_aps.index(ap)]


@dataclass(frozen=True)
class AccessPoint:
    id: int
    bandwidth_units: int

    def __post_init__(self):
        if self.bandwidth_units < 0:
            raise InstanceError(f"ap {self.id}: bandwidth_units must be >= 0")


@dataclass(frozen=True)
class Server:
    id: int
    compute_units: int

    def __post_init__(self):
        if self.compute_units < 0:
            raise InstanceError(f"server {self.id}: compute_units must be >= 0")


@dataclass(frozen=True)
class MecInstance:
    """Immutable problem instance; safe to share across workers.

    delay_s[j][k] is the backhaul delay between AP j and server k, used for
    both directions of the link.
    """

    tasks: tuple[Task, ...]
    aps: tuple[AccessPoint, ...]
    servers: tuple[Server, ...]
    delay_s: tuple[tuple[float, ...], ...]
    bandwidth_unit: float
    compute_unit: float
    power_unit: float
    max_power_units: int
    alpha: float
    noise_power: float
    local_energy_coeff: float = 1e-27

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise InstanceError("alpha must be in [0, 1)")
        for name in ("bandwidth_unit", "compute_unit", "power_unit"):
            if getattr(self, name) <= 0:
                raise InstanceError(f"{name} must be > 0")
        if self.max_power_units < 1:
            raise InstanceError("max_power_units must be >= 1")
        if self.noise_power <= 0:
            raise InstanceError("noise_power must be > 0")
        if self.local_energy_coeff < 0:
            raise InstanceError("local_energy_coeff must be >= 0")
        if len(self.delay_s) != len(self.aps):
            raise InstanceError("delay_s must have one row per AP")
        for row in self.delay_s:
            if len(row) != len(self.servers):
                raise InstanceError("delay_s rows must have one entry per server")
            if any(d < 0 for d in row):
                raise InstanceError("backhaul delays must be >= 0")
        for i, t in enumerate(self.tasks):
            if t.id != i:
                raise InstanceError("task ids must be 0..I-1 in order")
            if any(j < 0 or j >= len(self.aps) for j in t.accessible_aps):
                raise InstanceError(f"task {i}: AP index out of range")
        for j, a in enumerate(self.aps):
            if a.id != j:
                raise InstanceError("AP ids must be 0..J-1 in order")
        for k, s in enumerate(self.servers):
            if s.id != k:
                raise InstanceError("server ids must be 0..K-1 in order")

    @property
    def num_tasks(self) -> int:
        return len(self.tasks)

    @property
    def num_aps(self) -> int:
        return len(self.aps)

    @property
    def num_servers(self) -> int:
        return len(self.servers)

    def gain(self, task: int, ap: int) -> float:
        return self.tasks[task].gain_at(ap)

    def with_alpha(self, alpha: float) -> "MecInstance":
        """Copy of this instance with a different resource allocation bound."""
        return dataclasses.replace(self, alpha=alpha)


@dataclass
class Assignment:
    """Offloading decision set, indexed by task id.

    A task is offloaded iff all five per-task entries are set; objective is
    the total saved energy in joules, recomputed from the energy model.
    """

    offload_ap: list[Optional[int]]
    process_server: list[Optional[int]]
    bw_units: list[Optional[int]]
    cpu_units: list[Optional[int]]
    power_units: list[Optional[int]]
    objective: float = 0.0

    @classmethod
    def empty(cls, num_tasks: int) -> "Assignment":
        return cls([None] * num_tasks, [None] * num_tasks, [None] * num_tasks,
                   [None] * num_tasks, [None] * num_tasks, 0.0)

    def set_task(self, i: int, ap: int, server: int, bw: int, cpu: int,
                 power: int) -> None:
        self.offload_ap[i] = ap
        self.process_server[i] = server
        self.bw_units[i] = bw
        self.cpu_units[i] = cpu
        self.power_units[i] = power

    def is_offloaded(self, i: int) -> bool:
        return self.offload_ap[i] is not None

    def offloaded_tasks(self) -> Iterator[int]:
        return (i for i, j in enumerate(self.offload_ap) if j is not None)

    @property
    def num_tasks(self) -> int:
        return len(self.offload_ap)


# ---------------------------------------------------------------------------
# Energy model


def local_energy(task: Task, coeff: float) -> float:
    """Energy in joules to process the task on the end device."""
    return coeff * task.local_cpu ** 2 * task.input_size * task.cycles_per_bit


def offload_rate(bw_units: int, power_units: int, gain: float, noise: float,
                 bandwidth_unit: float, power_unit: float) -> float:
    """Shannon offloading rate in bits/s; zero without bandwidth or power."""
    if bw_units <= 0 or power_units <= 0:
        return 0.0
    snr = power_units * power_unit * gain / noise
    return bw_units * bandwidth_unit * math.log2(1.0 + snr)


def offload_time(task: Task, bw_units: int, power_units: int, gain: float,
                 inst: MecInstance) -> float:
    """Transmit duration in seconds; inf when the rate is zero."""
    rate = offload_rate(bw_units, power_units, gain, inst.noise_power,
                        inst.bandwidth_unit, inst.power_unit)
    if rate <= 0.0:
        return math.inf
    return task.input_size / rate


def offload_energy(task: Task, bw_units: int, power_units: int, gain: float,
                   inst: MecInstance) -> float:
    """Transmit energy in joules: power times actual transmit duration."""
    rate = offload_rate(bw_units, power_units, gain, inst.noise_power,
                        inst.bandwidth_unit, inst.power_unit)
    if rate <= 0.0:
        raise ZeroRateError("offloading rate is zero")
    return power_units * inst.power_unit * task.input_size / rate


def saved_energy(task: Task, bw_units: int, power_units: int, gain: float,
                 inst: MecInstance) -> float:
    """Local energy minus offloading energy for the given allocation."""
    return local_energy(task, inst.local_energy_coeff) - offload_energy(
        task, bw_units, power_units, gain, inst)


def min_power_units(task: Task, bw_units: int, time_budget: float,
                    gain: float, inst: MecInstance) -> int:
    """Smallest integer power level that transmits within the budget.

    Inverts the rate equation at the full budget and rounds up to the next
    power unit; the realized transmission is then at least as fast as the
    budget demands.  Raises PowerLimitError when even max_power_units is too
    slow.
    """
    if bw_units <= 0:
        raise ValueError("bw_units must be positive")
    if time_budget <= 0:
        raise ValueError("time_budget must be positive")
    exponent = task.input_size / (time_budget * bw_units * inst.bandwidth_unit)
    if exponent > _EXP_CAP:
        raise PowerLimitError(math.inf, inst.max_power_units)
    required = (2.0 ** exponent - 1.0) * inst.noise_power / (gain * inst.power_unit)
    units = max(1, iceil(required))
    if units > inst.max_power_units:
        raise PowerLimitError(required, inst.max_power_units)
    return units


# ---------------------------------------------------------------------------
# Feasibility validation


@dataclass(frozen=True)
class Violation:
    family: str
    subject: str
    detail: str


@dataclass
class FeasibilityReport:
    """Constraint-by-constraint audit of an assignment.

    Violations are data, grouped by constraint family: deadline,
    single_assignment, ap_capacity, server_capacity, alloc_bound,
    power_bound, domain, objective.
    """

    violations: list[Violation] = field(default_factory=list)
    recomputed_objective: float = 0.0

    @property
    def feasible(self) -> bool:
        return not self.violations

    def families(self) -> set[str]:
        return {v.family for v in self.violations}

    def add(self, family: str, subject: str, detail: str) -> None:
        self.violations.append(Violation(family, subject, detail))


_REL_TOL = 1e-9


def validate_assignment(inst: MecInstance, a: Assignment) -> FeasibilityReport:
    """Audit an assignment against every problem constraint.

    The deadline comparison uses relative tolerance 1e-9; capacity sums are
    exact integer arithmetic.  The report also recomputes the objective from
    the energy model and flags a mismatch with the stored value.
    """
    rep = FeasibilityReport()
    if a.num_tasks != inst.num_tasks:
        rep.add("domain", "assignment", "task count mismatch")
        return rep

    ap_load = [0] * inst.num_aps
    server_load = [0] * inst.num_servers
    total = 0.0

    for i, task in enumerate(inst.tasks):
        j = a.offload_ap[i]
        k = a.process_server[i]
        fields = (j, k, a.bw_units[i], a.cpu_units[i], a.power_units[i])
        if j is None or k is None:
            if any(f is not None for f in fields):
                rep.add("domain", f"task {i}",
                        "partial assignment: all five fields must be set together")
            continue
        b, c, p = a.bw_units[i], a.cpu_units[i], a.power_units[i]
        if any(f is None for f in (b, c, p)):
            rep.add("domain", f"task {i}", "offloaded without full allocation")
            continue
        if any(not isinstance(v, int) or isinstance(v, bool) for v in (j, k, b, c, p)):
            rep.add("domain", f"task {i}", "allocations must be integers")
            continue
        if not (0 <= j < inst.num_aps and 0 <= k < inst.num_servers):
            rep.add("domain", f"task {i}", "AP or server index out of range")
            continue
        if b < 0 or c < 0 or p < 0:
            rep.add("domain", f"task {i}", "negative allocation")
            continue
        if j not in task.accessible_aps:
            rep.add("single_assignment", f"task {i}",
                    f"AP {j} is not accessible")
            continue

        ap_load[j] += b
        server_load[k] += c

        cap_b = inst.alpha * inst.aps[j].bandwidth_units
        if b > cap_b * (1 + _REL_TOL) + _UNIT_SNAP:
            rep.add("alloc_bound", f"task {i}",
                    f"bandwidth {b} exceeds alpha bound {cap_b:g} at AP {j}")
        cap_c = inst.alpha * inst.servers[k].compute_units
        if c > cap_c * (1 + _REL_TOL) + _UNIT_SNAP:
            rep.add("alloc_bound", f"task {i}",
                    f"compute {c} exceeds alpha bound {cap_c:g} at server {k}")
        if p > inst.max_power_units:
            rep.add("power_bound", f"task {i}",
                    f"power {p} exceeds cap {inst.max_power_units}")

        gain = task.gain_at(j)
        t_off = offload_time(task, b, p, gain, inst)
        t_proc = task.cycles / (c * inst.compute_unit) if c > 0 else math.inf
        elapsed = t_off + inst.delay_s[j][k] + t_proc
        if elapsed > task.deadline * (1 + _REL_TOL):
            rep.add("deadline", f"task {i}",
                    f"completion {elapsed:.6g}s exceeds deadline {task.deadline:.6g}s")

        if math.isfinite(t_off):
            total += saved_energy(task, b, p, gain, inst)

    for j, ap in enumerate(inst.aps):
        if ap_load[j] > ap.bandwidth_units:
            rep.add("ap_capacity", f"ap {j}",
                    f"load {ap_load[j]} exceeds capacity {ap.bandwidth_units}")
    for k, srv in enumerate(inst.servers):
        if server_load[k] > srv.compute_units:
            rep.add("server_capacity", f"server {k}",
                    f"load {server_load[k]} exceeds capacity {srv.compute_units}")

    rep.recomputed_objective = total
    if abs(a.objective - total) > _REL_TOL * (1.0 + abs(total)):
        rep.add("objective", "assignment",
                f"stored objective {a.objective:.9g} != recomputed {total:.9g}")
    return rep


# ---------------------------------------------------------------------------
# JSON interchange


def _require_keys(d: dict, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise InstanceError(f"{where}: unknown fields {sorted(unknown)}")
    missing = allowed - set(d)
    if missing:
        raise InstanceError(f"{where}: missing fields {sorted(missing)}")


def instance_to_dict(inst: MecInstance) -> dict:
    return {
        "units": {
            "bandwidth_hz": inst.bandwidth_unit,
            "compute_cps": inst.compute_unit,
            "power_w": inst.power_unit,
            "rho": inst.local_energy_coeff,
        },
        "alpha": inst.alpha,
        "p_max": inst.max_power_units,
        "noise_w": inst.noise_power,
        "aps": [{"b_units": a.bandwidth_units} for a in inst.aps],
        "servers": [{"c_units": s.compute_units} for s in inst.servers],
        "delay_s": [list(row) for row in inst.delay_s],
        "tasks": [
            {
                "s_bits": t.input_size,
                "eta": t.cycles_per_bit,
                "f_cps": t.local_cpu,
                "d_s": t.deadline,
                "aps": list(t.accessible_aps),
                "gain": list(t.gains),
            }
            for t in inst.tasks
        ],
    }


def instance_from_dict(doc: dict) -> MecInstance:
    _require_keys(doc, {"units", "alpha", "p_max", "noise_w", "aps",
                        "servers", "delay_s", "tasks"}, "instance")
    _require_keys(doc["units"], {"bandwidth_hz", "compute_cps", "power_w",
                                 "rho"}, "units")
    aps = []
    for j, rec in enumerate(doc["aps"]):
        _require_keys(rec, {"b_units"}, f"aps[{j}]")
        aps.append(AccessPoint(j, int(rec["b_units"])))
    servers = []
    for k, rec in enumerate(doc["servers"]):
        _require_keys(rec, {"c_units"}, f"servers[{k}]")
        servers.append(Server(k, int(rec["c_units"])))
    tasks = []
    for i, rec in enumerate(doc["tasks"]):
        _require_keys(rec, {"s_bits", "eta", "f_cps", "d_s", "aps", "gain"},
                      f"tasks[{i}]")
        tasks.append(Task(
            id=i,
            input_size=float(rec["s_bits"]),
            cycles_per_bit=float(rec["eta"]),
            local_cpu=float(rec["f_cps"]),
            deadline=float(rec["d_s"]),
            accessible_aps=tuple(int(j) for j in rec["aps"]),
            gains=tuple(float(g) for g in rec["gain"]),
        ))
    return MecInstance(
        tasks=tuple(tasks),
        aps=tuple(aps),
        servers=tuple(servers),
        delay_s=tuple(tuple(float(d) for d in row) for row in doc["delay_s"]),
        bandwidth_unit=float(doc["units"]["bandwidth_hz"]),
        compute_unit=float(doc["units"]["compute_cps"]),
        power_unit=float(doc["units"]["power_w"]),
        max_power_units=int(doc["p_max"]),
        alpha=float(doc["alpha"]),
        noise_power=float(doc["noise_w"]),
        local_energy_coeff=float(doc["units"]["rho"]),
    )


def assignment_to_dict(a: Assignment) -> dict:
    tasks = []
    for i in range(a.num_tasks):
        tasks.append({
            "ap": a.offload_ap[i],
            "server": a.process_server[i],
            "bw_units": a.bw_units[i],
            "cpu_units": a.cpu_units[i],
            "power_units": a.power_units[i],
        })
    return {"objective_j": a.objective, "tasks": tasks}


def assignment_from_dict(doc: dict) -> Assignment:
    _require_keys(doc, {"objective_j", "tasks"}, "assignment")
    a = Assignment.empty(len(doc["tasks"]))
    for i, rec in enumerate(doc["tasks"]):
        _require_keys(rec, {"ap", "server", "bw_units", "cpu_units",
                            "power_units"}, f"tasks[{i}]")
        if rec["ap"] is not None:
            a.set_task(i, int(rec["ap"]), int(rec["server"]),
                       int(rec["bw_units"]), int(rec["cpu_units"]),
                       int(rec["power_units"]))
    a.objective = float(doc["objective_j"])
    return a


def load_instance(path) -> MecInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))


def save_instance(inst: MecInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2)
        fh.write("\n")


def load_assignment(path) -> Assignment:
    with open(path) as fh:
        return assignment_from_dict(json.load(fh))


def save_assignment(a: Assignment, path) -> None:
    with open(path, "w") as fh:
        json.dump(assignment_to_dict(a), fh, indent=2)
        fh.write("\n")
