"""Backend tests: simplex + branch and bound against enumeration oracles."""

import math
import re

import numpy as np
import pytest

from kadapt.milp import (
    BINARY,
    CONTINUOUS,
    MilpModel,
    ModelBuilder,
    ModelError,
    Status,
    export_lp_text,
    solve_lp,
    solve_milp,
)


def _lp(c, rows, senses, rhs, bounds, sense="min", const=0.0):
    mb = ModelBuilder(sense=sense)
    for j, (lo, hi) in enumerate(bounds):
        mb.add_var(CONTINUOUS, lo, hi, obj=c[j])
    for row, s, b in zip(rows, senses, rhs):
        mb.add_constr([(j, v) for j, v in enumerate(row) if v], s, b)
    mb.obj_const = const
    return mb.build()


def brute_force_binary(model: MilpModel):
    """Enumerate all binary assignments; direct constraint evaluation."""
    n = model.num_vars
    best = math.inf
    best_x = None
    sgn = -1.0 if model.sense == "max" else 1.0
    for mask in range(2 ** n):
        x = np.array([(mask >> j) & 1 for j in range(n)], dtype=float)
        ok = True
        for coeffs, sense, rhs in model.constraints:
            lhs = sum(v * x[j] for j, v in coeffs)
            if sense == "<=" and lhs > rhs + 1e-9:
                ok = False
            elif sense == ">=" and lhs < rhs - 1e-9:
                ok = False
            elif sense == "=" and abs(lhs - rhs) > 1e-9:
                ok = False
            if not ok:
                break
        if not ok:
            continue
        obj = sgn * (sum(v * x[j] for j, v in model.objective)) + sgn * model.obj_const
        if obj < best:
            best, best_x = obj, x
    if best_x is None:
        return None, None
    return sgn * best, best_x


def random_binary_model(rng, n=6, m=4):
    mb = ModelBuilder()
    for _ in range(n):
        mb.add_binary(obj=float(rng.integers(-9, 10)))
    for _ in range(m):
        row = [(j, float(rng.integers(-9, 10))) for j in range(n)]
        rhs = float(rng.integers(-5, 15))
        sense = ["<=", ">="][int(rng.integers(0, 2))]
        mb.add_constr(row, sense, rhs)
    return mb.build()


class TestSolveLp:
    def test_single_active_bound(self):
        model = _lp([1.0], [[1.0]], [">="], [2.0], [(0.0, 10.0)])
        sol = solve_lp(model)
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(2.0, abs=1e-9)

    def test_contradictory_constraints(self):
        model = _lp([1.0], [[1.0], [1.0]], [">=", "<="], [1.0, 0.0], [(-10.0, 10.0)])
        assert solve_lp(model).status == Status.INFEASIBLE

    def test_budget_constraint_binds(self):
        model = _lp([1.0, 1.0], [[1.0, 1.0]], ["<="], [1.0],
                    [(0.0, 1.0), (0.0, 1.0)], sense="max")
        sol = solve_lp(model)
        assert sol.objective == pytest.approx(1.0, abs=1e-9)

    def test_unbounded_detected(self):
        model = _lp([-1.0], [], [], [], [(0.0, math.inf)])
        assert solve_lp(model).status == Status.UNBOUNDED

    def test_free_variable(self):
        model = _lp([1.0], [[1.0]], [">="], [-3.0], [(-math.inf, math.inf)])
        sol = solve_lp(model)
        assert sol.objective == pytest.approx(-3.0, abs=1e-9)

    def test_equality_rows(self):
        model = _lp([1.0, 2.0], [[1.0, 1.0], [1.0, -1.0]], ["=", "="],
                    [4.0, 0.0], [(0.0, 10.0), (0.0, 10.0)])
        sol = solve_lp(model)
        assert sol.values == pytest.approx([2.0, 2.0], abs=1e-8)

    def test_rejects_binary_kind(self):
        mb = ModelBuilder()
        mb.add_binary(obj=1.0)
        with pytest.raises(ModelError):
            solve_lp(mb.build())

    def test_strong_duality_spot_check(self):
        rng = np.random.default_rng(7)
        for _ in range(40):
            n, m = 4, 3
            c = rng.integers(-5, 6, n).astype(float)
            rows = rng.integers(-4, 5, (m, n)).astype(float)
            rhs = rng.integers(1, 10, m).astype(float)
            senses = ["<="] * m
            model = _lp(c, rows, senses, rhs, [(0.0, 5.0)] * n)
            sol = solve_lp(model)
            assert sol.status == Status.OPTIMAL
            assert sol.dual_bound == pytest.approx(sol.objective, abs=1e-7)

    def test_randomized_against_scipy(self):
        scipy_opt = pytest.importorskip("scipy.optimize")
        rng = np.random.default_rng(21)
        for _ in range(60):
            n = int(rng.integers(2, 7))
            m = int(rng.integers(1, 6))
            c = rng.normal(size=n).round(3)
            rows = rng.normal(size=(m, n)).round(3)
            rhs = rng.normal(size=m).round(3) + 2.0
            senses = [["<=", ">=", "="][int(rng.integers(0, 3))] for _ in range(m)]
            lo = np.where(rng.random(n) < 0.3, -2.0, 0.0)
            hi = np.where(rng.random(n) < 0.3, 3.0, 6.0)
            model = _lp(c, rows, senses, rhs, list(zip(lo, hi)))
            sol = solve_lp(model)
            A_ub, b_ub, A_eq, b_eq = [], [], [], []
            for row, s, b in zip(rows, senses, rhs):
                if s == "<=":
                    A_ub.append(row); b_ub.append(b)
                elif s == ">=":
                    A_ub.append(-row); b_ub.append(-b)
                else:
                    A_eq.append(row); b_eq.append(b)
            ref = scipy_opt.linprog(
                c, A_ub=np.array(A_ub) if A_ub else None,
                b_ub=np.array(b_ub) if b_ub else None,
                A_eq=np.array(A_eq) if A_eq else None,
                b_eq=np.array(b_eq) if b_eq else None,
                bounds=list(zip(lo, hi)), method="highs")
            if ref.status == 2:
                assert sol.status == Status.INFEASIBLE
            else:
                assert ref.status == 0
                assert sol.status == Status.OPTIMAL
                assert sol.objective == pytest.approx(ref.fun, abs=1e-6)


class TestSolveMilp:
    def test_dominant_coefficient(self):
        mb = ModelBuilder()
        mb.add_binary(obj=-3.0)
        mb.add_binary(obj=-2.0)
        mb.add_constr([(0, 1.0), (1, 1.0)], "<=", 1.0)
        sol = solve_milp(mb.build())
        assert sol.status == Status.OPTIMAL
        assert sol.objective == pytest.approx(-3.0, abs=1e-9)
        assert sol.values == pytest.approx([1.0, 0.0], abs=1e-6)

    def test_identity_case(self):
        mb = ModelBuilder()
        for _ in range(5):
            mb.add_binary(obj=1.0)
        sol = solve_milp(mb.build())
        assert sol.objective == pytest.approx(0.0, abs=1e-9)

    def test_infeasible(self):
        mb = ModelBuilder()
        mb.add_binary()
        mb.add_constr([(0, 1.0)], ">=", 2.0)
        assert solve_milp(mb.build()).status == Status.INFEASIBLE

    def test_hundred_random_models_vs_enumeration(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            model = random_binary_model(rng)
            sol = solve_milp(model)
            ref_obj, _ = brute_force_binary(model)
            if ref_obj is None:
                assert sol.status == Status.INFEASIBLE
            else:
                assert sol.status == Status.OPTIMAL
                assert sol.objective == pytest.approx(ref_obj, abs=1e-6)

    def test_mixed_binary_continuous(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            mb = ModelBuilder()
            nb, nc = 4, 2
            for _ in range(nb):
                mb.add_binary(obj=float(rng.integers(-5, 6)))
            cont = [mb.add_var(CONTINUOUS, 0.0, 3.0, obj=float(rng.integers(-3, 4)))
                    for _ in range(nc)]
            for _ in range(3):
                row = [(j, float(rng.integers(-4, 5))) for j in range(nb + nc)]
                mb.add_constr(row, "<=", float(rng.integers(0, 9)))
            model = mb.build()
            sol = solve_milp(model)
            # oracle: enumerate binaries, solve the continuous LP for each
            best = math.inf
            for mask in range(2 ** nb):
                fix = [(mask >> j) & 1 for j in range(nb)]
                sub = ModelBuilder()
                for j in range(nb):
                    sub.add_var(CONTINUOUS, fix[j], fix[j])
                for j in range(nc):
                    sub.add_var(CONTINUOUS, 0.0, 3.0)
                for coeffs, s, b in model.constraints:
                    sub.add_constr(coeffs, s, b)
                for j, v in model.objective:
                    sub.set_obj(j, v)
                r = solve_lp(sub.build())
                if r.status == Status.OPTIMAL:
                    best = min(best, r.objective)
            if math.isinf(best):
                assert sol.status == Status.INFEASIBLE
            else:
                assert sol.status == Status.OPTIMAL
                assert sol.objective == pytest.approx(best, abs=1e-6)

    def test_twelve_binary_invariant(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            model = random_binary_model(rng, n=12, m=5)
            sol = solve_milp(model)
            ref_obj, _ = brute_force_binary(model)
            if ref_obj is None:
                assert sol.status == Status.INFEASIBLE
            else:
                assert abs(sol.objective - ref_obj) <= 1e-6
                for j in model.binary_indices:
                    assert abs(sol.values[j] - round(sol.values[j])) <= 1e-6
                for coeffs, sense, rhs in model.constraints:
                    lhs = sum(v * sol.values[j] for j, v in coeffs)
                    if sense == "<=":
                        assert lhs <= rhs + 1e-7
                    elif sense == ">=":
                        assert lhs >= rhs - 1e-7
                    else:
                        assert abs(lhs - rhs) <= 1e-7

    def test_maximization_round_trip(self):
        mb = ModelBuilder(sense="max")
        mb.add_binary(obj=3.0)
        mb.add_binary(obj=5.0)
        mb.add_constr([(0, 1.0), (1, 1.0)], "<=", 1.0)
        sol = solve_milp(mb.build())
        assert sol.objective == pytest.approx(5.0, abs=1e-9)

    def test_determinism(self):
        rng = np.random.default_rng(3)
        model = random_binary_model(rng, n=8, m=5)
        a = solve_milp(model)
        b = solve_milp(model)
        assert a.status == b.status
        assert a.objective == b.objective
        assert np.array_equal(a.values, b.values)

    def test_time_limit_returns_bound(self):
        rng = np.random.default_rng(11)
        model = random_binary_model(rng, n=14, m=6)
        sol = solve_milp(model, time_limit=0.0)
        assert sol.status == Status.TIME_LIMIT

    def test_gap_override(self):
        rng = np.random.default_rng(13)
        model = random_binary_model(rng, n=10, m=4)
        ref_obj, _ = brute_force_binary(model)
        sol = solve_milp(model, gap=0.1)
        assert sol.status == Status.OPTIMAL
        assert sol.objective >= ref_obj - 1e-9
        assert (sol.objective - sol.bound) / max(1.0, abs(sol.objective)) <= 0.1 + 1e-9

    def test_validation_errors(self):
        with pytest.raises(ModelError):
            MilpModel(1, (BINARY,), (0.0,), (1.0,),
                      ((((2, 1.0),), "<=", 1.0),), ()).validate()
        with pytest.raises(ModelError):
            MilpModel(1, (CONTINUOUS,), (0.0,), (1.0,),
                      ((((0, math.nan),), "<=", 1.0),), ()).validate()
        with pytest.raises(ModelError):
            MilpModel(1, (BINARY,), (0.0,), (math.inf,), (), ()).validate()


# --- LP text export ---------------------------------------------------------

def parse_lp_text(text):
    """Independent mini-reader for the exported LP format."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("\\")]
    section = None
    sense = None
    obj = {}
    obj_const = 0.0
    constraints = []
    bounds = {}
    binaries = set()

    term_re = r"([+-]?[\d.]+(?:[eE][+-]?\d+)?)\s+x(\d+)"

    def parse_terms(expr):
        # the exported format always writes an explicit coefficient
        terms = {}
        const = 0.0
        expr = expr.strip().replace("- ", "-").replace("+ ", "+")
        for m in re.finditer(term_re, expr):
            j = int(m.group(2))
            terms[j] = terms.get(j, 0.0) + float(m.group(1))
        for tok in re.sub(term_re, "", expr).split():
            if tok not in ("", "0"):
                const += float(tok)
        return terms, const

    for ln in lines:
        stripped = ln.strip()
        if stripped in ("Minimize", "Maximize"):
            sense = "min" if stripped == "Minimize" else "max"
            section = "obj"
            continue
        if stripped == "Subject To":
            section = "con"
            continue
        if stripped == "Bounds":
            section = "bnd"
            continue
        if stripped == "Binary":
            section = "bin"
            continue
        if stripped == "End":
            break
        if section == "obj":
            body = stripped.split(":", 1)[1]
            obj, obj_const = parse_terms(body)
        elif section == "con":
            body = stripped.split(":", 1)[1]
            m = re.match(r"(.*?)(<=|>=|=)(.*)", body)
            terms, _ = parse_terms(m.group(1))
            constraints.append((terms, m.group(2), float(m.group(3))))
        elif section == "bnd":
            m = re.match(r"(\S+) <= x(\d+) <= (\S+)", stripped)
            lo = -math.inf if m.group(1) == "-inf" else float(m.group(1))
            hi = math.inf if m.group(3) == "+inf" else float(m.group(3))
            bounds[int(m.group(2))] = (lo, hi)
        elif section == "bin":
            for tok in stripped.split():
                binaries.add(int(tok[1:]))
    return sense, obj, obj_const, constraints, bounds, binaries


class TestExportLpText:
    def test_smallest_model(self):
        model = _lp([1.0], [[1.0]], [">="], [2.0], [(0.0, 10.0)])
        text = export_lp_text(model)
        assert "Minimize" in text
        assert "Subject To" in text
        assert "c0: 1.0 x0 >= 2.0" in text
        assert "0.0 <= x0 <= 10.0" in text
        assert text.rstrip().endswith("End")

    def test_equality_row_verbatim(self):
        model = _lp([1.0], [[1.0]], ["="], [3.0], [(0.0, 10.0)])
        assert "c0: 1.0 x0 = 3.0" in export_lp_text(model)

    def test_reimport_by_external_solver(self):
        scipy_opt = pytest.importorskip("scipy.optimize")
        rng = np.random.default_rng(42)
        for _ in range(30):
            model = random_binary_model(rng)
            ref_obj, _ = brute_force_binary(model)
            text = export_lp_text(model)
            sense, obj, const, cons, bounds, bins = parse_lp_text(text)
            n = model.num_vars
            c = np.zeros(n)
            for j, v in obj.items():
                c[j] = v
            A_ub, b_ub, A_eq, b_eq = [], [], [], []
            for terms, op, rhs in cons:
                row = np.zeros(n)
                for j, v in terms.items():
                    row[j] = v
                if op == "<=":
                    A_ub.append(row); b_ub.append(rhs)
                elif op == ">=":
                    A_ub.append(-row); b_ub.append(-rhs)
                else:
                    A_eq.append(row); b_eq.append(rhs)
            lo = np.array([bounds.get(j, (0.0, 1.0))[0] for j in range(n)])
            hi = np.array([bounds.get(j, (0.0, 1.0))[1] for j in range(n)])
            cons_list = []
            if A_ub:
                cons_list.append(scipy_opt.LinearConstraint(np.array(A_ub), -np.inf, b_ub))
            if A_eq:
                cons_list.append(scipy_opt.LinearConstraint(np.array(A_eq), b_eq, b_eq))
            res = scipy_opt.milp(
                c=c if sense == "min" else -c,
                integrality=np.array([1 if j in bins else 0 for j in range(n)]),
                bounds=scipy_opt.Bounds(lo, hi),
                constraints=cons_list)
            if ref_obj is None:
                assert res.status == 2
            else:
                ext = res.fun + const if sense == "min" else -res.fun + const
                assert ext == pytest.approx(ref_obj, abs=1e-6)
