"""Logarithmic resource-level sets and feasible combination enumeration.

A combination pins one task to an AP at a bandwidth level and a server at a
compute level; it is feasible when a positive offload-time budget remains
after backhaul and processing, the minimal integer power fits under the cap,
and the saved energy is positive.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import MecInstance, _EXP_CAP, ifloor, local_energy


class BadPhiError(ValueError):
    """Raised when the discretization constant is not > 1."""


@dataclass(frozen=True)
class LevelSet:
    """Strictly increasing allocation levels in integer units.

    raw_index_count is the level-index count before deduplication; the level
    list is empty when even one unit would break the alpha bound.
    """

    levels: tuple[int, ...]
    raw_index_count: int

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, m: int) -> int:
        return self.levels[m]


class Combination(NamedTuple):
    """Feasible tuple (task, ap, bw level, server, cpu level).

    bw_level/cpu_level index the deduplicated LevelSets; offload_budget is
    the full time remaining for transmission, power_units the minimal
    integer power meeting it, and saved_energy the energy saved at that
    integer power (recomputed at the realized, shorter transmit time).
    """

    task: int
    ap: int
    bw_level: int
    server: int
    cpu_level: int
    bw_units: int
    cpu_units: int
    offload_budget: float
    power_units: int
    saved_energy: float


def build_levels(capacity: int, alpha: float, phi: float) -> LevelSet:
    """Geometric allocation levels clipped to the alpha bound.

    Levels are deduplicated floor(phi**m) for m up to the raw index count,
    plus floor(alpha * capacity) as the final level.  An AP or server whose
    alpha bound rounds below one unit gets an empty set and is unusable for
    offloading.
    """
    if phi <= 1.0:
        raise BadPhiError(f"phi must be > 1 (got {phi})")
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    bound = alpha * capacity
    cap_units = ifloor(bound)
    if cap_units < 1:
        return LevelSet((), 0)
    raw = max(0, math.ceil(math.log(bound) / math.log(phi) - 1e-12))
    levels = set()
    for m in range(raw):
        levels.add(min(ifloor(phi ** m), cap_units))
    levels.add(cap_units)
    return LevelSet(tuple(sorted(levels)), raw)


def enumerate_combinations(inst: MecInstance, phi: float) -> list[Combination]:
    """All feasible combinations in lexicographic (i, j, m, k, n) order.

    For each tuple the offload-time budget is the deadline minus backhaul
    delay minus processing time at the compute level; the minimal integer
    power is the snapped ceiling of the Shannon inversion at that budget.
    """
    ap_levels = [build_levels(a.bandwidth_units, inst.alpha, phi)
                 for a in inst.aps]
    server_levels = [build_levels(s.compute_units, inst.alpha, phi)
                     for s in inst.servers]
    return _enumerate(inst, ap_levels, server_levels)


def _enumerate(inst: MecInstance, ap_levels: list[LevelSet],
               server_levels: list[LevelSet]) -> list[Combination]:
    p_max = inst.max_power_units
    b_unit = inst.bandwidth_unit
    c_unit = inst.compute_unit
    p_unit = inst.power_unit
    noise = inst.noise_power
    delay = np.asarray(inst.delay_s, dtype=float)

    usable_servers = [k for k in range(inst.num_servers) if server_levels[k]]
    if not usable_servers:
        return []
    cpu_grid = [np.asarray(server_levels[k].levels, dtype=float)
                for k in range(inst.num_servers)]

    out: list[Combination] = []
    for i, task in enumerate(inst.tasks):
        e_local = local_energy(task, inst.local_energy_coeff)
        if e_local <= 0:
            continue
        cycles = task.cycles
        for j in sorted(task.accessible_aps):
            blevels = ap_levels[j]
            if not blevels:
                continue
            gain = task.gains[task.accessible_aps.index(j)]
            bw = np.asarray(blevels.levels, dtype=float)  # (M,)
            buf: list[Combination] = []
            for k in usable_servers:
                cpu = cpu_grid[k]  # (N,)
                budget = task.deadline - delay[j, k] - cycles / (cpu * c_unit)
                ok_n = budget > 0.0
                if not ok_n.any():
                    continue
                # (M, N) grids; exponent capped to keep exp2 finite
                with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                    exponent = task.input_size / (
                        np.where(ok_n, budget, np.nan)[None, :] * bw[:, None] * b_unit)
                    exponent = np.where(exponent > _EXP_CAP, np.nan, exponent)
                    p_req = (np.exp2(exponent) - 1.0) * noise / (gain * p_unit)
                    p_int = np.maximum(1, np.ceil(p_req - 1e-9))
                    feas = np.isfinite(p_int) & (p_int <= p_max) & ok_n[None, :]
                    snr = p_int * p_unit * gain / noise
                    rate = bw[:, None] * b_unit * np.log2(1.0 + snr)
                    e_off = p_int * p_unit * task.input_size / rate
                    energy = e_local - e_off
                feas &= energy > 0.0
                if not feas.any():
                    continue
                for m, n in zip(*np.nonzero(feas)):
                    buf.append(Combination(
                        task=i, ap=j, bw_level=int(m), server=k,
                        cpu_level=int(n),
                        bw_units=blevels.levels[m],
                        cpu_units=server_levels[k].levels[n],
                        offload_budget=float(budget[n]),
                        power_units=int(p_int[m, n]),
                        saved_energy=float(energy[m, n]),
                    ))
            # emitted per AP in (m, k, n) order; field order makes the
            # NamedTuple sort lexicographic
            buf.sort()
            out.extend(buf)
    return out


def dump_combinations_csv(combos: list[Combination], path) -> None:
    """Debug dump of the enumeration result."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "m", "k", "n", "B", "C",
                    "t_budget", "p", "E"])
        for c in combos:
            w.writerow([c.task, c.ap, c.bw_level, c.server, c.cpu_level,
                        c.bw_units, c.cpu_units, repr(c.offload_budget),
                        c.power_units, repr(c.saved_energy)])
