"""Self-contained LP / mixed-binary solver used by every other module.

The LP core is a two-phase primal simplex on a dense tableau with native
handling of variable bounds (nonbasic variables rest at a bound, steps may
be plain bound flips). Dantzig pricing is used until a run of degenerate
pivots, after which Bland's rule takes over to guarantee termination.
Binary models are solved by branch and bound: most-fractional branching,
best-bound node selection.

    from kadapt.milp import ModelBuilder, solve_lp, solve_milp

    mb = ModelBuilder()
    x = mb.add_var(lo=0.0, hi=10.0, obj=1.0)
    mb.add_constr([(x, 1.0)], ">=", 2.0)
    sol = solve_lp(mb.build())          # sol.objective == 2.0

Models are immutable once built; distinct solves share no state. Intended
for desk-scale instances (up to a few thousand variables), not as a
general-purpose solver.
"""

from __future__ import annotations

import enum
import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-7
INT_TOL = 1e-6
PIVOT_TOL = 1e-9
COST_TOL = 1e-9
BLAND_THRESHOLD = 200

CONTINUOUS = "C"
BINARY = "B"

SENSES = ("<=", "=", ">=")


class ModelError(ValueError):
    """Malformed model: bad index, NaN data, inconsistent bounds."""


class SolveError(RuntimeError):
    """Numerical failure inside the solver (should not happen at desk scale)."""


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"


@dataclass(frozen=True)
class MilpModel:
    num_vars: int
    kinds: tuple[str, ...]                 # CONTINUOUS | BINARY per variable
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    constraints: tuple[tuple[tuple[tuple[int, float], ...], str, float], ...]
    objective: tuple[tuple[int, float], ...]
    obj_const: float = 0.0
    sense: str = "min"                     # "min" | "max"
    name: str = "model"

    def validate(self) -> None:
        if self.num_vars < 0:
            raise ModelError("negative variable count")
        if len(self.kinds) != self.num_vars or len(self.lower) != self.num_vars \
                or len(self.upper) != self.num_vars:
            raise ModelError("kind/bound arrays must match num_vars")
        if self.sense not in ("min", "max"):
            raise ModelError(f"bad sense {self.sense!r}")
        has_binary = False
        for j in range(self.num_vars):
            kind = self.kinds[j]
            lo, hi = self.lower[j], self.upper[j]
            if kind not in (CONTINUOUS, BINARY):
                raise ModelError(f"bad kind {kind!r} for variable {j}")
            if math.isnan(lo) or math.isnan(hi):
                raise ModelError(f"NaN bound on variable {j}")
            if lo > hi + FEAS_TOL:
                raise ModelError(f"empty bound interval on variable {j}")
            if kind == BINARY:
                has_binary = True
                if lo < -INT_TOL or hi > 1.0 + INT_TOL:
                    raise ModelError(f"binary variable {j} has bounds outside [0,1]")
        if has_binary:
            # branch and bound assumes every LP relaxation is bounded
            for j in range(self.num_vars):
                if not (math.isfinite(self.lower[j]) and math.isfinite(self.upper[j])):
                    raise ModelError(f"variable {j} needs finite bounds in a binary model")
        for coeffs, sense, rhs in self.constraints:
            if sense not in SENSES:
                raise ModelError(f"bad constraint sense {sense!r}")
            if math.isnan(rhs) or math.isinf(rhs):
                raise ModelError("non-finite constraint rhs")
            for idx, val in coeffs:
                if not (0 <= idx < self.num_vars):
                    raise ModelError(f"constraint references variable {idx}")
                if math.isnan(val) or math.isinf(val):
                    raise ModelError("non-finite constraint coefficient")
        for idx, val in self.objective:
            if not (0 <= idx < self.num_vars):
                raise ModelError(f"objective references variable {idx}")
            if math.isnan(val) or math.isinf(val):
                raise ModelError("non-finite objective coefficient")
        if math.isnan(self.obj_const) or math.isinf(self.obj_const):
            raise ModelError("non-finite objective constant")

    @property
    def binary_indices(self) -> list[int]:
        return [j for j, k in enumerate(self.kinds) if k == BINARY]


@dataclass
class MilpSolution:
    status: Status
    objective: float
    values: np.ndarray
    node_count: int = 0
    wall_time: float = 0.0
    bound: float = math.nan                # best proven bound (objective sense)
    duals: np.ndarray | None = None        # LP row duals, when solved as an LP
    dual_bound: float = math.nan           # dual objective certificate for LPs


class ModelBuilder:
    """Incremental construction of an immutable MilpModel."""

    def __init__(self, sense: str = "min", name: str = "model"):
        self.sense = sense
        self.name = name
        self._kinds: list[str] = []
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._constraints: list[tuple[tuple[tuple[int, float], ...], str, float]] = []
        self._objective: list[tuple[int, float]] = []
        self.obj_const = 0.0

    @property
    def num_vars(self) -> int:
        return len(self._kinds)

    def add_var(self, kind: str = CONTINUOUS, lo: float = 0.0, hi: float = math.inf,
                obj: float = 0.0) -> int:
        if kind == BINARY:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        j = len(self._kinds)
        self._kinds.append(kind)
        self._lower.append(float(lo))
        self._upper.append(float(hi))
        if obj:
            self._objective.append((j, float(obj)))
        return j

    def add_binary(self, obj: float = 0.0) -> int:
        return self.add_var(BINARY, 0.0, 1.0, obj)

    def add_constr(self, coeffs, sense: str, rhs: float) -> None:
        clean = tuple((int(i), float(v)) for i, v in coeffs if v != 0.0)
        self._constraints.append((clean, sense, float(rhs)))

    def set_obj(self, j: int, coeff: float) -> None:
        if coeff:
            self._objective.append((j, float(coeff)))

    def build(self, validate: bool = True) -> MilpModel:
        model = MilpModel(
            num_vars=len(self._kinds),
            kinds=tuple(self._kinds),
            lower=tuple(self._lower),
            upper=tuple(self._upper),
            constraints=tuple(self._constraints),
            objective=tuple(self._objective),
            obj_const=self.obj_const,
            sense=self.sense,
            name=self.name,
        )
        if validate:
            model.validate()
        return model


# ---------------------------------------------------------------------------
# simplex core
# ---------------------------------------------------------------------------

class _Simplex:
    """Primal simplex over min c'x, rows A x = b, lo <= x <= hi.

    Columns: structural variables, then one slack per inequality row, then
    phase-1 artificials. The dense tableau holds B^-1 A; basic values are
    tracked directly so nonbasic variables may rest at either bound.
    """

    def __init__(self, model: MilpModel, lower=None, upper=None):
        m = len(model.constraints)
        n = model.num_vars
        lo = np.array(model.lower if lower is None else lower, dtype=float)
        hi = np.array(model.upper if upper is None else upper, dtype=float)

        rows = np.zeros((m, n))
        rhs = np.zeros(m)
        senses = []
        for i, (coeffs, sense, b) in enumerate(model.constraints):
            for j, v in coeffs:
                rows[i, j] += v
            rhs[i] = b
            senses.append(sense)

        # one slack column (coefficient +1) per inequality row; bounds encode
        # the sense: [0,inf) for <=, (-inf,0] for >=
        slack_row = [i for i, s in enumerate(senses) if s != "="]
        n_slack = len(slack_row)
        A = np.zeros((m, n + n_slack))
        A[:, :n] = rows
        slack_lo = np.zeros(n_slack)
        slack_hi = np.zeros(n_slack)
        for k, i in enumerate(slack_row):
            A[i, n + k] = 1.0
            if senses[i] == "<=":
                slack_lo[k], slack_hi[k] = 0.0, math.inf
            else:
                slack_lo[k], slack_hi[k] = -math.inf, 0.0

        c = np.zeros(n + n_slack)
        for j, v in model.objective:
            c[j] += v
        if model.sense == "max":
            c = -c

        self.n_struct = n
        self.slack_of_row = {i: n + k for k, i in enumerate(slack_row)}
        self.A = A
        self.b = rhs
        self.c = c
        self.lo = np.concatenate([lo, slack_lo])
        self.hi = np.concatenate([hi, slack_hi])
        self.senses = senses
        self.iterations = 0
        self._art_row: list[int] = []
        self._art_sign: list[float] = []

    def solve(self, max_iter: int | None = None):
        """Returns (status, x_struct, obj_min, duals, dual_bound).

        obj_min excludes obj_const and is in min orientation.
        """
        A0, b, lo0, hi0 = self.A, self.b, self.lo, self.hi
        m, ncols = A0.shape
        if max_iter is None:
            max_iter = 5000 + 80 * (m + ncols)

        # every column rests at its finite bound nearest zero (0 if free)
        nb_at_upper = ~np.isfinite(lo0) & np.isfinite(hi0)
        x_nb = np.where(np.isfinite(lo0), lo0, np.where(np.isfinite(hi0), hi0, 0.0))
        residual = b - A0 @ x_nb

        basis = np.full(m, -1, dtype=int)
        xB = np.zeros(m)
        self._art_row, self._art_sign = [], []
        for i in range(m):
            col = self.slack_of_row.get(i)
            if col is not None:
                val = x_nb[col] + residual[i]
                if lo0[col] - FEAS_TOL <= val <= hi0[col] + FEAS_TOL:
                    basis[i] = col
                    xB[i] = val
                    continue
            self._art_row.append(i)
            self._art_sign.append(math.copysign(1.0, residual[i]) if residual[i] else 1.0)

        n_art = len(self._art_row)
        if n_art:
            ext = np.zeros((m, n_art))
            for k, (i, sgn) in enumerate(zip(self._art_row, self._art_sign)):
                ext[i, k] = sgn
                basis[i] = ncols + k
                xB[i] = abs(residual[i])
            A = np.hstack([A0, ext])
            lo = np.concatenate([lo0, np.zeros(n_art)])
            hi = np.concatenate([hi0, np.full(n_art, math.inf)])
            x_nb = np.concatenate([x_nb, np.zeros(n_art)])
            nb_at_upper = np.concatenate([nb_at_upper, np.zeros(n_art, dtype=bool)])
        else:
            A, lo, hi = A0, lo0.copy(), hi0.copy()
        ncols_ext = A.shape[1]

        T = A.astype(float, copy=True)
        for i in range(m):
            piv = T[i, basis[i]]
            if abs(piv - 1.0) > 1e-12:
                T[i, :] /= piv

        basic_mask = np.zeros(ncols_ext, dtype=bool)
        basic_mask[basis] = True

        if n_art:
            c1 = np.zeros(ncols_ext)
            c1[ncols:] = 1.0
            outcome = self._optimize(T, basis, basic_mask, xB, x_nb, nb_at_upper,
                                     lo, hi, c1, max_iter)
            if outcome == "iter":
                raise SolveError("phase-1 iteration limit exceeded")
            art_val = sum(xB[i] for i in range(m) if basis[i] >= ncols)
            if art_val > 1e-6:
                return Status.INFEASIBLE, None, math.inf, None, math.nan
            lo[ncols:] = 0.0
            hi[ncols:] = 0.0
            self._drive_out_artificials(T, basis, basic_mask, xB, x_nb, ncols)

        c2 = np.concatenate([self.c, np.zeros(n_art)])
        outcome = self._optimize(T, basis, basic_mask, xB, x_nb, nb_at_upper,
                                 lo, hi, c2, max_iter)
        if outcome == "iter":
            raise SolveError("phase-2 iteration limit exceeded")
        if outcome == "unbounded":
            return Status.UNBOUNDED, None, -math.inf, None, math.nan

        x = x_nb.copy()
        x[basis] = xB
        x_struct = x[: self.n_struct].copy()
        obj = float(self.c @ x[: ncols])
        duals, dual_bound = self._certificate(basis, ncols)
        return Status.OPTIMAL, x_struct, obj, duals, dual_bound

    def _optimize(self, T, basis, basic_mask, xB, x_nb, nb_at_upper, lo, hi, c, max_iter):
        """Primal simplex loop for cost vector c. Mutates all state in place."""
        m = T.shape[0]
        cbar = c - (c[basis] @ T if m else np.zeros(T.shape[1]))
        fixed = hi - lo <= 1e-12
        free = ~np.isfinite(lo) & ~np.isfinite(hi)
        degenerate_run = 0
        bland = False

        for _ in range(max_iter):
            self.iterations += 1
            can_inc = ~basic_mask & ~fixed & ~nb_at_upper & (cbar < -COST_TOL)
            can_dec = ~basic_mask & ~fixed & (nb_at_upper | free) & (cbar > COST_TOL)
            cand = np.where(can_inc | can_dec)[0]
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(cbar[cand]))])
            increases = bool(can_inc[j])

            d = T[:, j] if increases else -T[:, j]
            limit = math.inf
            leave_row = -1
            leave_to_upper = False
            pos = d > PIVOT_TOL
            neg = d < -PIVOT_TOL
            if pos.any():
                room = np.maximum(xB - lo[basis], 0.0)
                ratios = np.where(pos, room / np.where(pos, d, 1.0), math.inf)
                r = int(np.argmin(ratios))
                if ratios[r] < limit:
                    limit, leave_row, leave_to_upper = float(ratios[r]), r, False
            if neg.any():
                room = np.maximum(hi[basis] - xB, 0.0)
                ratios = np.where(neg, room / np.where(neg, -d, 1.0), math.inf)
                r = int(np.argmin(ratios))
                if ratios[r] < limit:
                    limit, leave_row, leave_to_upper = float(ratios[r]), r, True

            span = hi[j] - lo[j]
            if span < limit:
                # bound flip: strictly improving, no basis change
                xB -= span * d
                x_nb[j] = hi[j] if increases else lo[j]
                nb_at_upper[j] = increases
                degenerate_run = 0
                continue

            if leave_row < 0:
                return "unbounded"

            t = max(limit, 0.0)
            if bland and t <= 1e-12:
                ties = []
                for i in range(m):
                    if d[i] > PIVOT_TOL and xB[i] - lo[basis[i]] <= PIVOT_TOL * max(1.0, abs(xB[i])):
                        ties.append((basis[i], i, False))
                    elif d[i] < -PIVOT_TOL and hi[basis[i]] - xB[i] <= PIVOT_TOL * max(1.0, abs(xB[i])):
                        ties.append((basis[i], i, True))
                if ties:
                    _, leave_row, leave_to_upper = min(ties)

            if t <= 1e-12:
                degenerate_run += 1
                if degenerate_run > BLAND_THRESHOLD:
                    bland = True
            else:
                degenerate_run = 0

            leaving = basis[leave_row]
            entering_val = (x_nb[j] + t) if increases else (x_nb[j] - t)
            xB -= t * d
            x_nb[leaving] = hi[leaving] if leave_to_upper else lo[leaving]
            nb_at_upper[leaving] = leave_to_upper

            piv = T[leave_row, j]
            if abs(piv) < PIVOT_TOL:
                raise SolveError("pivot element vanished")
            T[leave_row, :] /= piv
            col = T[:, j].copy()
            col[leave_row] = 0.0
            T -= np.outer(col, T[leave_row, :])
            cbar -= cbar[j] * T[leave_row, :]
            cbar[j] = 0.0

            basic_mask[leaving] = False
            basic_mask[j] = True
            basis[leave_row] = j
            xB[leave_row] = entering_val
        return "iter"

    def _drive_out_artificials(self, T, basis, basic_mask, xB, x_nb, ncols):
        """Swap zero-valued basic artificials for genuine columns when possible."""
        m = T.shape[0]
        for i in range(m):
            if basis[i] < ncols:
                continue
            row = T[i, :ncols]
            cand = np.where((np.abs(row) > 1e-7) & ~basic_mask[:ncols])[0]
            if cand.size == 0:
                continue                    # redundant row; artificial stays pinned
            j = int(cand[0])
            piv = T[i, j]
            T[i, :] /= piv
            col = T[:, j].copy()
            col[i] = 0.0
            T -= np.outer(col, T[i, :])
            basic_mask[basis[i]] = False
            basic_mask[j] = True
            x_nb[basis[i]] = 0.0
            basis[i] = j
            xB[i] = x_nb[j]                 # degenerate swap keeps the point

    def _certificate(self, basis, ncols):
        """Row duals recomputed from the original basis matrix.

        Returns (duals, dual objective). The dual objective is a genuine
        bound certificate: b'y plus bound terms of nonbasic reduced costs.
        Returns (None, nan) if the certificate cannot be formed cleanly.
        """
        m = len(self.b)
        if m == 0:
            dual_obj = 0.0
            for j in range(ncols):
                if self.c[j] > COST_TOL and math.isfinite(self.lo[j]):
                    dual_obj += self.c[j] * self.lo[j]
                elif self.c[j] < -COST_TOL and math.isfinite(self.hi[j]):
                    dual_obj += self.c[j] * self.hi[j]
                elif abs(self.c[j]) > COST_TOL:
                    return None, math.nan
            return np.zeros(0), dual_obj
        B = np.zeros((m, m))
        cB = np.zeros(m)
        for r, bi in enumerate(basis):
            if bi < ncols:
                B[:, r] = self.A[:, bi]
                cB[r] = self.c[bi]
            else:
                k = bi - ncols
                B[self._art_row[k], r] = self._art_sign[k]
        try:
            y = np.linalg.solve(B.T, cB)
        except np.linalg.LinAlgError:
            return None, math.nan
        cbar = self.c - y @ self.A
        dual_obj = float(y @ self.b)
        in_basis = set(int(bi) for bi in basis)
        for j in range(ncols):
            if j in in_basis or abs(cbar[j]) <= 1e-9:
                continue
            if cbar[j] > 0 and math.isfinite(self.lo[j]):
                dual_obj += cbar[j] * self.lo[j]
            elif cbar[j] < 0 and math.isfinite(self.hi[j]):
                dual_obj += cbar[j] * self.hi[j]
            else:
                return y, math.nan          # dual-infeasible sign pattern
        return y, dual_obj


def _solve_relaxation(model: MilpModel, lower=None, upper=None):
    """LP solve with optional bound overrides (no validation, min orientation)."""
    return _Simplex(model, lower, upper).solve()


def solve_lp(model: MilpModel) -> MilpSolution:
    """Exact solve of an all-continuous model.

    Raises ModelError on malformed input or if any variable is binary.
    """
    model.validate()
    if any(k == BINARY for k in model.kinds):
        raise ModelError("solve_lp requires all-continuous variables")
    t0 = time.perf_counter()
    status, x, obj, duals, dual_bound = _solve_relaxation(model)
    wall = time.perf_counter() - t0
    sgn = -1.0 if model.sense == "max" else 1.0
    if status != Status.OPTIMAL:
        obj_out = sgn * obj if math.isfinite(obj) else (sgn * obj)
        return MilpSolution(status, obj_out, np.zeros(model.num_vars), 0, wall)
    if model.sense == "max":
        obj, dual_bound = -obj, -dual_bound
    return MilpSolution(Status.OPTIMAL, obj + model.obj_const, x, 0, wall,
                        bound=obj + model.obj_const, duals=duals,
                        dual_bound=dual_bound + model.obj_const)


def solve_milp(model: MilpModel, time_limit: float = math.inf,
               gap: float = 0.0) -> MilpSolution:
    """Branch and bound over the binary variables of `model`.

    On Optimal the objective is within relative `gap` of the true optimum
    (gap 0 = exact) and binary values are integral within 1e-6. On
    TimeLimit the best incumbent and the proven bound are returned.
    """
    model.validate()
    t0 = time.perf_counter()
    bins = model.binary_indices
    if not bins:
        return solve_lp(model)

    lower = np.array(model.lower, dtype=float)
    upper = np.array(model.upper, dtype=float)

    def out(status, obj_min, values, nodes, bound_min):
        wall = time.perf_counter() - t0
        if model.sense == "max":
            obj, bnd = -obj_min, -bound_min
        else:
            obj, bnd = obj_min, bound_min
        if math.isfinite(obj):
            obj += model.obj_const
        if math.isfinite(bnd):
            bnd += model.obj_const
        return MilpSolution(status, obj, values, nodes, wall, bound=bnd)

    def fractional(xv):
        best_j, best_f = -1, INT_TOL
        for j in bins:
            f = min(xv[j] - math.floor(xv[j]), math.ceil(xv[j]) - xv[j])
            if f > best_f:
                best_j, best_f = j, f
        return best_j

    status, x, obj, _, _ = _solve_relaxation(model, lower, upper)
    nodes = 1
    if status == Status.INFEASIBLE:
        return out(Status.INFEASIBLE, math.inf, np.zeros(model.num_vars), nodes, math.inf)
    if status == Status.UNBOUNDED:
        return out(Status.UNBOUNDED, -math.inf, np.zeros(model.num_vars), nodes, -math.inf)

    best_obj = math.inf
    best_x = None
    counter = 0
    heap: list[tuple[float, int, np.ndarray, np.ndarray, np.ndarray]] = []
    heapq.heappush(heap, (obj, counter, lower, upper, x))
    counter += 1

    while heap:
        bound_now = heap[0][0]
        if best_x is not None:
            if (best_obj - bound_now) / max(1.0, abs(best_obj)) <= gap + 1e-12:
                break
        if time.perf_counter() - t0 > time_limit:
            if best_x is None:
                return out(Status.TIME_LIMIT, math.inf, np.zeros(model.num_vars),
                           nodes, bound_now)
            return out(Status.TIME_LIMIT, best_obj, best_x, nodes, bound_now)

        node_obj, _, node_lo, node_hi, node_x = heapq.heappop(heap)
        if node_obj >= best_obj - 1e-9:
            continue
        j = fractional(node_x)
        if j < 0:
            if node_obj < best_obj:
                best_obj, best_x = node_obj, node_x
            continue
        for fix in (0.0, 1.0):
            child_lo = node_lo.copy()
            child_hi = node_hi.copy()
            child_lo[j] = fix
            child_hi[j] = fix
            status, cx, cobj, _, _ = _solve_relaxation(model, child_lo, child_hi)
            nodes += 1
            if status != Status.OPTIMAL or cobj >= best_obj - 1e-9:
                continue
            if fractional(cx) < 0:
                if cobj < best_obj:
                    best_obj, best_x = cobj, cx
            else:
                heapq.heappush(heap, (cobj, counter, child_lo, child_hi, cx))
                counter += 1

    if best_x is None:
        return out(Status.INFEASIBLE, math.inf, np.zeros(model.num_vars), nodes, math.inf)
    proven = min(min((h[0] for h in heap), default=best_obj), best_obj)
    return out(Status.OPTIMAL, best_obj, best_x, nodes, proven)


# ---------------------------------------------------------------------------
# LP-format text export
# ---------------------------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def _expr(coeffs: dict[int, float], const: float = 0.0) -> str:
    parts = []
    for j in sorted(coeffs):
        v = coeffs[j]
        if v == 0.0:
            continue
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(v))} x{j}")
    if const:
        sign = "-" if const < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(const))}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp_text(model: MilpModel) -> str:
    """Render the model as standard LP-format text (CPLEX dialect).

    Round-trippable by external solvers for cross-checking.
    """
    model.validate()
    obj: dict[int, float] = {}
    for j, v in model.objective:
        obj[j] = obj.get(j, 0.0) + v
    lines = [f"\\ {model.name}"]
    lines.append("Minimize" if model.sense == "min" else "Maximize")
    lines.append(f" obj: {_expr(obj, model.obj_const)}")
    lines.append("Subject To")
    for i, (coeffs, sense, rhs) in enumerate(model.constraints):
        row: dict[int, float] = {}
        for j, v in coeffs:
            row[j] = row.get(j, 0.0) + v
        lines.append(f" c{i}: {_expr(row)} {sense} {_fmt(rhs)}")
    lines.append("Bounds")
    for j in range(model.num_vars):
        lo, hi = model.lower[j], model.upper[j]
        if model.kinds[j] == BINARY and lo == 0.0 and hi == 1.0:
            continue
        lo_s = "-inf" if not math.isfinite(lo) else _fmt(lo)
        hi_s = "+inf" if not math.isfinite(hi) else _fmt(hi)
        lines.append(f" {lo_s} <= x{j} <= {hi_s}")
    bins = model.binary_indices
    if bins:
        lines.append("Binary")
        lines.append(" " + " ".join(f"x{j}" for j in bins))
    lines.append("End")
    return "\n".join(lines) + "\n"
