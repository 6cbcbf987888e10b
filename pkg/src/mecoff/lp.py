"""Sparse linear programs, a revised-simplex vertex solver, and builders.

The rounding stage needs basic (vertex) optima, which interior-point codes
do not guarantee, so the default solver is a two-phase revised simplex:
Dantzig pricing with an automatic switch to Bland's rule after a degenerate
stall, dense basis inverse with periodic refactorization.  Everything is
deterministic for identical input.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from .discretize import Combination
from .model import MecInstance

_RC_TOL = 1e-9       # reduced-cost optimality tolerance
_PIVOT_TOL = 1e-11   # smallest admissible ratio-test denominator
_KICK_TOL = 1e-7     # pivot magnitude for evicting basic artificials
_STALL_LIMIT = 200   # degenerate pivots before switching to Bland's rule
_REFACTOR_EVERY = 64


class LpError(Exception):
    pass


class LpInfeasibleError(LpError):
    pass


class LpUnboundedError(LpError):
    pass


class LpNumericsError(LpError):
    pass


class LpWorkLimitError(LpError):
    """Raised when a work or wall-clock budget runs out mid-solve."""


@dataclass(frozen=True)
class LinearProgram:
    """max objective @ x subject to matrix @ x (senses) rhs, x >= 0.

    senses entries are "<=", "==", or ">=" per row.
    """

    objective: np.ndarray
    matrix: sparse.csc_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray

    def __post_init__(self):
        m, n = self.matrix.shape
        if self.objective.shape != (n,):
            raise ValueError("objective length must match column count")
        if self.rhs.shape != (m,) or len(self.senses) != m:
            raise ValueError("rhs/senses length must match row count")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective must be finite")
        if not np.all(np.isfinite(self.rhs)):
            raise ValueError("rhs must be finite")
        if self.matrix.nnz and not np.all(np.isfinite(self.matrix.data)):
            raise ValueError("matrix coefficients must be finite")
        bad = set(self.senses) - {"<=", "==", ">="}
        if bad:
            raise ValueError(f"unknown senses {bad}")

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_vars(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_rows(cls, objective: Sequence[float],
                  rows: Iterable[tuple[dict[int, float], str, float]],
                  ) -> "LinearProgram":
        """Build from sparse rows given as ({col: coeff}, sense, rhs)."""
        obj = np.asarray(objective, dtype=float)
        n = obj.shape[0]
        data, ri, ci, senses, rhs = [], [], [], [], []
        for r, (coeffs, sense, b) in enumerate(rows):
            for c, v in coeffs.items():
                if not 0 <= c < n:
                    raise ValueError(f"column {c} out of range")
                data.append(float(v))
                ri.append(r)
                ci.append(c)
            senses.append(sense)
            rhs.append(float(b))
        mat = sparse.csc_matrix(
            (data, (ri, ci)), shape=(len(rhs), n), dtype=float)
        return cls(obj, mat, tuple(senses), np.asarray(rhs, dtype=float))


@dataclass
class FractionalSolution:
    """LP solution; is_basic marks a vertex of the feasible polytope."""

    values: np.ndarray
    objective: float
    is_basic: bool
    pivots: int = 0

    def positive(self, tol: float = 1e-9) -> list[tuple[int, float]]:
        """(index, value) pairs above the zero threshold."""
        idx = np.nonzero(self.values > tol)[0]
        return [(int(i), float(self.values[i])) for i in idx]


def solve(lp: LinearProgram, *, work_limit: Optional[float] = None,
          deadline: Optional[float] = None) -> FractionalSolution:
    """Optimal basic solution of the LP.

    work_limit caps pivots * columns (deterministic); deadline is a
    time.monotonic() timestamp.  Either cap raises LpWorkLimitError.
    """
    sx = _Simplex(lp, work_limit=work_limit, deadline=deadline)
    return sx.run()


class _Simplex:
    """Revised simplex over the augmented (slack + artificial) system."""

    def __init__(self, lp: LinearProgram, work_limit=None, deadline=None):
        self.lp = lp
        self.work_limit = work_limit
        self.deadline = deadline
        m, n = lp.matrix.shape
        self.m, self.n_struct = m, n

        # Normalize to nonnegative rhs so slack/artificial bases start at I.
        mat = lp.matrix.tocsr(copy=True)
        rhs = lp.rhs.copy()
        senses = list(lp.senses)
        flip = rhs < 0
        if flip.any():
            scale = np.where(flip, -1.0, 1.0)
            mat = sparse.diags(scale) @ mat
            rhs = rhs * scale
            swap = {"<=": ">=", ">=": "<=", "==": "=="}
            senses = [swap[s] if f else s for s, f in zip(senses, flip)]

        aux_cols = []
        self.basis = np.empty(m, dtype=int)
        art_rows = []
        col = n
        for r, s in enumerate(senses):
            if s == "<=":
                aux_cols.append((r, 1.0, False))
                self.basis[r] = col
                col += 1
            elif s == ">=":
                aux_cols.append((r, -1.0, False))
                col += 1
                art_rows.append(r)
            else:
                art_rows.append(r)
        self.art_start = col
        for r in art_rows:
            aux_cols.append((r, 1.0, True))
            self.basis[r] = col
            col += 1
        self.n_total = col

        if aux_cols:
            rows = np.array([a[0] for a in aux_cols])
            vals = np.array([a[1] for a in aux_cols])
            aux = sparse.csc_matrix(
                (vals, (rows, np.arange(len(aux_cols)))),
                shape=(m, len(aux_cols)))
            self.A = sparse.hstack([mat.tocsc(), aux], format="csc")
        else:
            self.A = mat.tocsc()
        self.AT = self.A.T.tocsr()
        self.b = rhs
        self.is_artificial = np.zeros(self.n_total, dtype=bool)
        self.is_artificial[self.art_start:] = True

        self.Binv = np.eye(m)
        self.x_b = rhs.copy()
        self.pivots = 0
        self.work = 0.0

    # -- core ---------------------------------------------------------------

    def run(self) -> FractionalSolution:
        if self.m == 0:
            if np.any(self.lp.objective > _RC_TOL):
                raise LpUnboundedError("no constraints bound a profitable column")
            x = np.zeros(self.n_struct)
            return FractionalSolution(x, 0.0, True, 0)

        if self.art_start < self.n_total:
            c1 = np.zeros(self.n_total)
            c1[self.art_start:] = -1.0
            self._iterate(c1, phase=1)
            infeas = -float(c1[self.basis] @ self.x_b)
            if infeas > 1e-7 * (1.0 + np.abs(self.b).sum()):
                raise LpInfeasibleError(f"phase 1 residual {infeas:g}")
            self._evict_artificials()

        c2 = np.zeros(self.n_total)
        c2[:self.n_struct] = self.lp.objective
        self._iterate(c2, phase=2)
        return self._extract()

    def _iterate(self, costs: np.ndarray, phase: int) -> None:
        m = self.m
        bland = False
        stall = 0
        max_pivots = 20000 + 60 * m
        enterable = ~self.is_artificial
        while True:
            if self.pivots > max_pivots:
                raise LpNumericsError("pivot limit exceeded")
            self._check_budget()

            y = costs[self.basis] @ self.Binv
            reduced = costs - self.AT @ y
            reduced[~enterable] = -np.inf
            reduced[self.basis] = -np.inf

            if bland:
                candidates = reduced > _RC_TOL
                if not candidates.any():
                    return
                j = int(np.argmax(candidates))
            else:
                j = int(np.argmax(reduced))
                if reduced[j] <= _RC_TOL:
                    return

            d = self.Binv @ self.A[:, j].toarray().ravel()
            # Basic artificials must not grow; they leave at a zero step.
            art_basic = self.is_artificial[self.basis]
            kick = art_basic & (np.abs(d) > _KICK_TOL)
            pos = d > _PIVOT_TOL
            if kick.any():
                r = int(np.nonzero(kick)[0][0])
                theta = 0.0
            elif pos.any():
                ratios = np.full(m, np.inf)
                ratios[pos] = self.x_b[pos] / d[pos]
                theta = float(ratios.min())
                ties = np.nonzero(ratios <= theta * (1 + 1e-12) + 1e-15)[0]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                if phase == 1:
                    raise LpNumericsError("phase 1 unbounded")
                raise LpUnboundedError("improving direction is unbounded")

            self.x_b = self.x_b - theta * d
            self.x_b[r] = theta
            self.basis[r] = j
            temp = self.Binv[r] / d[r]
            self.Binv -= np.outer(d, temp)
            self.Binv[r] = temp

            self.pivots += 1
            self.work += self.n_total
            stall = stall + 1 if theta <= 1e-12 else 0
            if stall > _STALL_LIMIT:
                bland = True
            if self.pivots % _REFACTOR_EVERY == 0:
                self._refactor()

    def _evict_artificials(self) -> None:
        # Swap basic artificials for structural columns where a usable pivot
        # exists; rows without one are redundant, and their artificial stays
        # pinned at zero by the kick rule.
        for r in range(self.m):
            if self.basis[r] < self.art_start:
                continue
            row = self.AT @ self.Binv[r]
            row[self.is_artificial] = 0.0
            row[self.basis] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) <= _KICK_TOL:
                continue
            d = self.Binv @ self.A[:, j].toarray().ravel()
            self.basis[r] = j
            temp = self.Binv[r] / d[r]
            self.Binv -= np.outer(d, temp)
            self.Binv[r] = temp
            self.x_b = self.Binv @ self.b

    def _refactor(self) -> None:
        B = self.A[:, self.basis].toarray()
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise LpNumericsError("singular basis") from exc
        self.x_b = self.Binv @ self.b
        neg = float(self.x_b.min(initial=0.0))
        if neg < -1e-7:
            raise LpNumericsError(f"basis refactor lost feasibility ({neg:g})")
        np.maximum(self.x_b, 0.0, out=self.x_b)

    def _check_budget(self) -> None:
        if self.work_limit is not None and self.work > self.work_limit:
            raise LpWorkLimitError("work limit exhausted")
        if self.deadline is not None and self.pivots % 16 == 0:
            if time.monotonic() > self.deadline:
                raise LpWorkLimitError("deadline exceeded")

    def _extract(self) -> FractionalSolution:
        self._refactor()
        x = np.zeros(self.n_total)
        x[self.basis] = self.x_b
        struct = x[:self.n_struct]
        if struct.min(initial=0.0) < -1e-7:
            raise LpNumericsError(f"negative variable {struct.min():g}")
        struct = np.maximum(struct, 0.0)
        _check_residuals(self.lp, struct)
        obj = float(self.lp.objective @ struct)
        return FractionalSolution(struct, obj, True, self.pivots)


def _check_residuals(lp: LinearProgram, x: np.ndarray) -> None:
    lhs = lp.matrix @ x
    for r, (s, b) in enumerate(zip(lp.senses, lp.rhs)):
        tol = 1e-7 * (1.0 + abs(b))
        v = lhs[r]
        bad = ((s == "<=" and v > b + tol) or (s == ">=" and v < b - tol)
               or (s == "==" and abs(v - b) > tol))
        if bad:
            raise LpNumericsError(f"row {r} residual: {v:g} {s} {b:g}")


# ---------------------------------------------------------------------------
# Problem builders


def _combo_lp(inst: MecInstance, combos: Sequence[Combination],
              ap_rhs: np.ndarray, server_rhs: np.ndarray) -> LinearProgram:
    i_rows = inst.num_tasks
    j_rows = inst.num_aps
    n = len(combos)
    if n:
        task = np.fromiter((c.task for c in combos), dtype=int, count=n)
        ap = np.fromiter((c.ap for c in combos), dtype=int, count=n)
        srv = np.fromiter((c.server for c in combos), dtype=int, count=n)
        bw = np.fromiter((c.bw_units for c in combos), dtype=float, count=n)
        cpu = np.fromiter((c.cpu_units for c in combos), dtype=float, count=n)
        obj = np.fromiter((c.saved_energy for c in combos), dtype=float, count=n)
        cols = np.tile(np.arange(n), 3)
        rows = np.concatenate([task, i_rows + ap, i_rows + j_rows + srv])
        data = np.concatenate([np.ones(n), bw, cpu])
        mat = sparse.csc_matrix(
            (data, (rows, cols)),
            shape=(i_rows + j_rows + inst.num_servers, n))
    else:
        obj = np.zeros(0)
        mat = sparse.csc_matrix(
            (i_rows + j_rows + inst.num_servers, 0), dtype=float)
    rhs = np.concatenate([np.ones(i_rows), ap_rhs, server_rhs])
    senses = ("<=",) * mat.shape[0]
    return LinearProgram(obj, mat, senses, rhs)


def build_rdp(inst: MecInstance, combos: Sequence[Combination]) -> LinearProgram:
    """Relaxed selection LP over feasible combinations.

    One variable per combination; per-task mass at most one, and AP/server
    capacities shrunk to (1 - alpha) of nominal to reserve the headroom the
    graph rounding spends later.
    """
    shrink = 1.0 - inst.alpha
    ap_rhs = np.array([shrink * a.bandwidth_units for a in inst.aps])
    server_rhs = np.array([shrink * s.compute_units for s in inst.servers])
    return _combo_lp(inst, combos, ap_rhs, server_rhs)


def build_upper_bound_lp(inst: MecInstance, combos: Sequence[Combination],
                         phi: float) -> LinearProgram:
    """Optimal-policy LP: capacities inflated to phi * nominal.

    Its optimum dominates the true integral optimum, so it serves as the
    performance-ratio denominator.
    """
    ap_rhs = np.array([phi * a.bandwidth_units for a in inst.aps])
    server_rhs = np.array([phi * s.compute_units for s in inst.servers])
    return _combo_lp(inst, combos, ap_rhs, server_rhs)


def build_3dm(graph) -> LinearProgram:
    """Fractional matching LP of a tripartite hypergraph.

    One variable per hyperedge; the incident fraction mass at every node is
    at most one.
    """
    edges = graph.hyperedges
    n = len(edges)
    node_rows = {node: r for r, node in enumerate(graph.all_nodes())}
    data, ri, ci = [], [], []
    obj = np.zeros(n)
    for e_idx, e in enumerate(edges):
        obj[e_idx] = e.weight
        for node in (("t", e.task), ("a",) + e.ap_node, ("s",) + e.server_node):
            data.append(1.0)
            ri.append(node_rows[node])
            ci.append(e_idx)
    m = len(node_rows)
    mat = sparse.csc_matrix((data, (ri, ci)), shape=(m, n))
    return LinearProgram(obj, mat, ("<=",) * m, np.ones(m))


def to_lp_text(lp: LinearProgram, name: str = "lp") -> str:
    """Fixed-format text export for cross-checking with external solvers."""
    lines = [f"\\ {name}", "Maximize", " obj: " + _expr(lp.objective)]
    lines.append("Subject To")
    mat = lp.matrix.tocsr()
    rel = {"<=": "<=", ">=": ">=", "==": "="}
    for r in range(lp.num_rows):
        row = mat.getrow(r)
        terms = _expr(row.toarray().ravel())
        lines.append(f" c{r}: {terms} {rel[lp.senses[r]]} {lp.rhs[r]:.17g}")
    lines.append("Bounds")
    for jx in range(lp.num_vars):
        lines.append(f" 0 <= x{jx}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _expr(coeffs: np.ndarray) -> str:
    terms = []
    for jx, v in enumerate(coeffs):
        if v != 0.0:
            sign = "+" if v >= 0 else "-"
            terms.append(f"{sign} {abs(v):.17g} x{jx}")
    return " ".join(terms) if terms else "0 x0"
