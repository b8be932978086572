"""Problem datum, on-disk format and reformulation transforms.

A KAdaptInstance bundles everything the solvers need: stage costs, the
coupling block T x + W y <= b, the binary feasible sets X and Y as
polytopes, the scenario polytope Xi with its bounding box, and K.

Cost models that are affine in the scenario (nominal + deviation) are
stored in pure bilinear form xi'Q y by augmenting the scenario vector
with a coordinate frozen at 1 (the `xi0` flag) that carries the nominal
cost. All solver modules then see a single cost shape.

Instances are immutable after construction and round-trip through a
single JSON document, exact to the last float bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from kadapt.milp import ModelBuilder, Status, solve_lp, solve_milp

FEAS_TOL = 1e-7


class InstanceError(ValueError):
    """Schema violation, dimension mismatch, or an unusable scenario set."""


@dataclass(frozen=True)
class Polytope:
    """Rows A x (sense) rhs over a fixed-dimension variable block."""

    A: np.ndarray              # (num_rows, dim)
    senses: tuple[str, ...]
    rhs: np.ndarray            # (num_rows,)

    @staticmethod
    def empty(dim: int) -> "Polytope":
        return Polytope(np.zeros((0, dim)), (), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    def contains(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        if self.num_rows == 0:
            return True
        vals = self.A @ x
        for v, s, r in zip(vals, self.senses, self.rhs):
            scale = max(1.0, abs(r))
            if s == "<=" and v > r + tol * scale:
                return False
            if s == ">=" and v < r - tol * scale:
                return False
            if s == "=" and abs(v - r) > tol * scale:
                return False
        return True

    def add_rows_to(self, mb: ModelBuilder, var_ids) -> None:
        for i in range(self.num_rows):
            coeffs = [(var_ids[j], self.A[i, j]) for j in range(self.dim) if self.A[i, j]]
            mb.add_constr(coeffs, self.senses[i], self.rhs[i])


@dataclass(frozen=True)
class XiSet:
    """Scenario polytope: rows G xi (sense) g intersected with a box."""

    poly: Polytope
    lo: np.ndarray
    hi: np.ndarray

    @property
    def dim(self) -> int:
        return self.poly.dim

    def contains(self, xi: np.ndarray, tol: float = FEAS_TOL) -> bool:
        if np.any(xi < self.lo - tol) or np.any(xi > self.hi + tol):
            return False
        return self.poly.contains(xi, tol)

    def add_vars_to(self, mb: ModelBuilder):
        ids = [mb.add_var(lo=self.lo[l], hi=self.hi[l]) for l in range(self.dim)]
        self.poly.add_rows_to(mb, ids)
        return ids


@dataclass(frozen=True)
class FirstStageUncertainty:
    """Worst-case first-stage cost exposure max_w w'C x.

    `omega` present: w ranges over its own set, independent of xi.
    `omega` None: C is q-by-n over the same xi (dependent case); solve
    after `lift_dependent_first_stage`.
    """

    C: np.ndarray
    omega: XiSet | None = None


@dataclass(frozen=True)
class KAdaptInstance:
    name: str
    variant: str               # "objective" | "constraint"
    n: int
    m: int
    q: int
    s: int
    K: int
    c: np.ndarray              # (n,)
    Q: np.ndarray              # (q, m)
    T: np.ndarray              # (s, n)
    W: np.ndarray              # (s, m); the nominal W0 under constraint uncertainty
    b: np.ndarray              # (s,)
    X: Polytope                # over n binary first-stage vars
    Y: Polytope                # over m binary recourse vars
    xi: XiSet                  # over q scenario coordinates
    W_l: tuple[np.ndarray, ...] = ()    # q matrices: W(xi) = W + sum_l xi_l W_l
    xi0: bool = False          # coordinate 0 frozen at 1 carries nominal costs
    first_stage: FirstStageUncertainty | None = None
    x_int_upper: tuple[int, ...] | None = None   # integer first stage, pre-expansion
    seed: int | None = None

    # -- derived helpers ----------------------------------------------------

    def W_of(self, xi: np.ndarray) -> np.ndarray:
        if self.variant != "constraint" or not self.W_l:
            return self.W
        out = self.W.copy()
        for l, Wl in enumerate(self.W_l):
            if xi[l]:
                out = out + xi[l] * Wl
        return out

    def recourse_cost(self, xi: np.ndarray, y: np.ndarray) -> float:
        return float(xi @ self.Q @ y)

    def bilinear_bound(self) -> float:
        """Rigorous bound on |xi'Q y| over the box hull of Xi and binary y."""
        box = np.maximum(np.abs(self.xi.lo), np.abs(self.xi.hi))
        return float(box @ np.abs(self.Q).sum(axis=1)) + 1.0

    def validate(self) -> None:
        if self.K < 1:
            raise InstanceError("K must be >= 1")
        if self.variant not in ("objective", "constraint"):
            raise InstanceError(f"unknown variant {self.variant!r}")
        checks = [
            (self.c.shape, (self.n,), "c"),
            (self.Q.shape, (self.q, self.m), "Q"),
            (self.T.shape, (self.s, self.n), "T"),
            (self.W.shape, (self.s, self.m), "W"),
            (self.b.shape, (self.s,), "b"),
            ((self.X.dim,), (self.n,), "X_poly"),
            ((self.Y.dim,), (self.m,), "Y_poly"),
            ((self.xi.dim,), (self.q,), "Xi_poly"),
        ]
        for got, want, what in checks:
            if got != want:
                raise InstanceError(f"{what} has shape {got}, expected {want}")
        if self.variant == "constraint":
            if len(self.W_l) != self.q:
                raise InstanceError("need one W_l matrix per scenario coordinate")
            for l, Wl in enumerate(self.W_l):
                if Wl.shape != (self.s, self.m):
                    raise InstanceError(f"W_l[{l}] has shape {Wl.shape}")
        if self.xi0:
            if not (self.xi.lo[0] == 1.0 and self.xi.hi[0] == 1.0):
                raise InstanceError("xi0-augmented instance must pin coordinate 0 to 1")
        if self.first_stage is not None:
            C = self.first_stage.C
            if C.shape[1] != self.n:
                raise InstanceError(f"first-stage C has {C.shape[1]} columns, expected {self.n}")
            if self.first_stage.omega is None and C.shape[0] != self.q:
                raise InstanceError("dependent first-stage C must have q rows")
        if self.x_int_upper is not None and len(self.x_int_upper) != self.n:
            raise InstanceError("x_int_upper length must equal n")

        # Xi nonempty and bounded: two LP solves per coordinate
        for l in range(self.q):
            for sense in ("min", "max"):
                mb = ModelBuilder(sense=sense)
                ids = self.xi.add_vars_to(mb)
                mb.set_obj(ids[l], 1.0)
                sol = solve_lp(mb.build())
                if sol.status == Status.INFEASIBLE:
                    raise InstanceError("scenario set is empty")
                if sol.status != Status.OPTIMAL:
                    raise InstanceError(f"scenario set unbounded in coordinate {l}")

        # X and Y nonempty via MILP feasibility probes; X rows of a
        # pre-expansion integer instance are not over binaries yet
        probes = [(self.m, self.Y, "Y")]
        if self.x_int_upper is None:
            probes.append((self.n, self.X, "X"))
        for dim, poly, what in probes:
            mb = ModelBuilder()
            ids = [mb.add_binary() for _ in range(dim)]
            poly.add_rows_to(mb, ids)
            if solve_milp(mb.build()).status != Status.OPTIMAL:
                raise InstanceError(f"{what} is empty")


@dataclass
class KPolicy:
    """A first-stage vector with K prepared recourses and its certificate."""

    x: np.ndarray
    recourses: list[np.ndarray]
    value: float
    gap: float
    stats: dict = field(default_factory=dict)


def with_constraint_uncertainty(inst: KAdaptInstance,
                                W_l=None) -> KAdaptInstance:
    """Reinterpret an instance under the constraint-uncertainty pipeline.

    W_l defaults to all-zero matrices, making the coupling deterministic;
    the constraint-uncertainty pipeline then reduces to the plain one.
    """
    if W_l is None:
        W_l = tuple(np.zeros((inst.s, inst.m)) for _ in range(inst.q))
    out = replace(inst, variant="constraint", W_l=tuple(W_l))
    out.validate()
    return out


def nominal_scenario(inst: KAdaptInstance) -> np.ndarray:
    """Box-midpoint scenario (xi0 kept at 1), L1-projected into Xi if needed."""
    mid = 0.5 * (inst.xi.lo + inst.xi.hi)
    if inst.xi.contains(mid):
        return mid
    mb = ModelBuilder()
    ids = inst.xi.add_vars_to(mb)
    for l in range(inst.q):
        t = mb.add_var(lo=0.0, obj=1.0)
        mb.add_constr([(ids[l], 1.0), (t, -1.0)], "<=", mid[l])
        mb.add_constr([(ids[l], -1.0), (t, -1.0)], "<=", -mid[l])
    sol = solve_lp(mb.build())
    if sol.status != Status.OPTIMAL:
        raise InstanceError("scenario set admits no nominal point")
    return sol.values[: inst.q].copy()


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _matrix_to_list(M: np.ndarray):
    return [[float(v) for v in row] for row in M]


def _matrix_from_obj(obj, what: str) -> np.ndarray:
    if isinstance(obj, dict):
        try:
            r, c = obj["shape"]
            M = np.zeros((int(r), int(c)))
            for i, j, v in obj["triplets"]:
                M[int(i), int(j)] = float(v)
            return M
        except (KeyError, TypeError, IndexError) as exc:
            raise InstanceError(f"bad triplet encoding for {what}") from exc
    M = np.array(obj, dtype=float)
    if M.ndim == 1 and M.size == 0:
        M = M.reshape(0, 0)
    if M.ndim != 2:
        raise InstanceError(f"{what} is not a matrix")
    return M


def _poly_to_dict(p: Polytope) -> dict:
    return {"A": _matrix_to_list(p.A), "senses": list(p.senses),
            "rhs": [float(v) for v in p.rhs]}


def _poly_from_dict(d: dict, dim: int, what: str) -> Polytope:
    A = _matrix_from_obj(d["A"], what)
    if A.size == 0:
        A = A.reshape(len(d["rhs"]), dim) if d["rhs"] else np.zeros((0, dim))
    senses = tuple(d["senses"])
    rhs = np.array(d["rhs"], dtype=float)
    if A.shape[0] != len(senses) or A.shape[0] != rhs.shape[0]:
        raise InstanceError(f"{what}: row count mismatch")
    if A.shape[1] != dim:
        raise InstanceError(f"{what}: dimension {A.shape[1]}, expected {dim}")
    for s in senses:
        if s not in ("<=", "=", ">="):
            raise InstanceError(f"{what}: bad sense {s!r}")
    return Polytope(A, senses, rhs)


def instance_to_dict(inst: KAdaptInstance) -> dict:
    doc = {
        "meta": {"name": inst.name, "variant": inst.variant, "seed": inst.seed},
        "dims": {"n": inst.n, "m": inst.m, "q": inst.q, "s": inst.s, "K": inst.K},
        "cost": {"c": [float(v) for v in inst.c], "Q": _matrix_to_list(inst.Q)},
        "coupling": {
            "T": _matrix_to_list(inst.T),
            "W": _matrix_to_list(inst.W),
            "b": [float(v) for v in inst.b],
            "W_l": [_matrix_to_list(Wl) for Wl in inst.W_l] if inst.W_l else None,
        },
        "sets": {
            "X_poly": _poly_to_dict(inst.X),
            "Y_poly": _poly_to_dict(inst.Y),
            "Xi_poly": {**_poly_to_dict(inst.xi.poly),
                        "lo": [float(v) for v in inst.xi.lo],
                        "hi": [float(v) for v in inst.xi.hi]},
        },
        "options": {
            "xi0_augmented": inst.xi0,
            "first_stage_uncertainty": None,
            "x_int_upper": list(inst.x_int_upper) if inst.x_int_upper is not None else None,
        },
    }
    if inst.first_stage is not None:
        fs = {"C": _matrix_to_list(inst.first_stage.C), "Omega_poly": None}
        if inst.first_stage.omega is not None:
            om = inst.first_stage.omega
            fs["Omega_poly"] = {**_poly_to_dict(om.poly),
                                "lo": [float(v) for v in om.lo],
                                "hi": [float(v) for v in om.hi]}
        doc["options"]["first_stage_uncertainty"] = fs
    return doc


def instance_from_dict(doc: dict) -> KAdaptInstance:
    try:
        meta, dims = doc["meta"], doc["dims"]
        n, m, q, s, K = (int(dims[k]) for k in ("n", "m", "q", "s", "K"))
        cost, coupling, sets, options = doc["cost"], doc["coupling"], doc["sets"], doc["options"]
    except (KeyError, TypeError) as exc:
        raise InstanceError(f"missing field: {exc}") from exc

    def vec(values, length, what):
        v = np.array(values, dtype=float)
        if v.shape != (length,):
            raise InstanceError(f"{what} has length {v.shape}, expected {length}")
        return v

    def mat(obj, rows, cols, what):
        M = _matrix_from_obj(obj, what)
        if M.size == 0:
            M = M.reshape(rows, cols) if rows * cols == 0 else M
        if M.shape != (rows, cols):
            raise InstanceError(f"{what} has shape {M.shape}, expected {(rows, cols)}")
        return M

    xi_doc = sets["Xi_poly"]
    xi = XiSet(_poly_from_dict(xi_doc, q, "Xi_poly"),
               vec(xi_doc["lo"], q, "Xi lo"), vec(xi_doc["hi"], q, "Xi hi"))
    W_l_doc = coupling.get("W_l")
    W_l = tuple(mat(Wl, s, m, f"W_l[{l}]") for l, Wl in enumerate(W_l_doc)) if W_l_doc else ()

    fs = None
    fs_doc = options.get("first_stage_uncertainty")
    if fs_doc is not None:
        C = _matrix_from_obj(fs_doc["C"], "first-stage C")
        omega = None
        om_doc = fs_doc.get("Omega_poly")
        if om_doc is not None:
            om_dim = len(om_doc["lo"])
            omega = XiSet(_poly_from_dict(om_doc, om_dim, "Omega_poly"),
                          vec(om_doc["lo"], om_dim, "Omega lo"),
                          vec(om_doc["hi"], om_dim, "Omega hi"))
        fs = FirstStageUncertainty(C=C, omega=omega)

    x_int_upper = options.get("x_int_upper")
    inst = KAdaptInstance(
        name=str(meta.get("name", "instance")),
        variant=str(meta.get("variant", "objective")),
        n=n, m=m, q=q, s=s, K=K,
        c=vec(cost["c"], n, "c"),
        Q=mat(cost["Q"], q, m, "Q"),
        T=mat(coupling["T"], s, n, "T"),
        W=mat(coupling["W"], s, m, "W"),
        b=vec(coupling["b"], s, "b"),
        X=_poly_from_dict(sets["X_poly"], n, "X_poly"),
        Y=_poly_from_dict(sets["Y_poly"], m, "Y_poly"),
        xi=xi,
        W_l=W_l,
        xi0=bool(options.get("xi0_augmented", False)),
        first_stage=fs,
        x_int_upper=tuple(int(u) for u in x_int_upper) if x_int_upper is not None else None,
        seed=meta.get("seed"),
    )
    inst.validate()
    return inst


def save_instance(inst: KAdaptInstance, path) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def load_instance(path) -> KAdaptInstance:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"unparseable instance file: {exc}") from exc
    return instance_from_dict(doc)


def save_policy(policy: KPolicy, path) -> None:
    doc = {
        "x": [float(v) for v in policy.x],
        "recourses": [[float(v) for v in y] for y in policy.recourses],
        "value": policy.value,
        "gap": policy.gap,
        "stats": policy.stats,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_policy(path) -> KPolicy:
    with open(path) as fh:
        doc = json.load(fh)
    return KPolicy(x=np.array(doc["x"], dtype=float),
                   recourses=[np.array(y, dtype=float) for y in doc["recourses"]],
                   value=float(doc["value"]), gap=float(doc["gap"]),
                   stats=doc.get("stats", {}))


# ---------------------------------------------------------------------------
# reformulation transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BitExpansion:
    """Maps between integer first-stage vectors and their binary encodings."""

    upper: tuple[int, ...]
    bits: tuple[int, ...]          # bit count per original variable
    offsets: tuple[int, ...]       # start of each variable's bit block

    def decode(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.upper))
        for i, (nb, off) in enumerate(zip(self.bits, self.offsets)):
            out[i] = sum(round(u[off + p]) * (1 << p) for p in range(nb))
        return out

    def encode(self, x: np.ndarray) -> np.ndarray:
        total = sum(self.bits)
        out = np.zeros(total)
        for i, (nb, off) in enumerate(zip(self.bits, self.offsets)):
            v = int(round(x[i]))
            for p in range(nb):
                out[off + p] = (v >> p) & 1
        return out


def _expand_columns(M: np.ndarray, bits, offsets, total: int) -> np.ndarray:
    out = np.zeros((M.shape[0], total))
    for i, (nb, off) in enumerate(zip(bits, offsets)):
        for p in range(nb):
            out[:, off + p] = out[:, off + p] + M[:, i] * (1 << p)
    return out


def binary_expand(inst: KAdaptInstance) -> tuple[KAdaptInstance, BitExpansion]:
    """Rewrite an integer first stage over binary bit variables.

    Each x_i in {0..ub_i} becomes sum_p 2^p u_ip with ceil(log2(ub_i + 1))
    bits; when ub_i is not of the form 2^k - 1 an explicit cap row keeps
    the encoded value within bound. All first-stage data (costs, X rows,
    T, first-stage C) are rewritten over the bits.
    """
    if inst.x_int_upper is None:
        raise InstanceError("instance has no integer first-stage bounds")
    upper = inst.x_int_upper
    for i, ub in enumerate(upper):
        if ub < 0 or not math.isfinite(ub):
            raise InstanceError(f"integer variable {i} needs a finite upper bound >= 0")
    bits = tuple(max(0, math.ceil(math.log2(ub + 1))) if ub > 0 else 0 for ub in upper)
    offsets = []
    total = 0
    for nb in bits:
        offsets.append(total)
        total += nb
    offsets = tuple(offsets)
    exp = BitExpansion(upper=upper, bits=bits, offsets=offsets)

    weights = _expand_columns(np.eye(inst.n), bits, offsets, total)  # (n, total)
    A_rows = [inst.X.A @ weights] if inst.X.num_rows else []
    senses = list(inst.X.senses)
    rhs = list(inst.X.rhs)
    for i, ub in enumerate(upper):
        if bits[i] and ub != (1 << bits[i]) - 1:      # cap redundant at 2^k - 1
            row = np.zeros(total)
            for p in range(bits[i]):
                row[offsets[i] + p] = 1 << p
            A_rows.append(row.reshape(1, -1))
            senses.append("<=")
            rhs.append(float(ub))
    A = np.vstack(A_rows) if A_rows else np.zeros((0, total))
    X = Polytope(A, tuple(senses), np.array(rhs, dtype=float))

    fs = inst.first_stage
    if fs is not None:
        fs = FirstStageUncertainty(C=fs.C @ weights, omega=fs.omega)

    expanded = replace(
        inst,
        name=inst.name + "-bits",
        n=total,
        c=inst.c @ weights,
        T=inst.T @ weights,
        X=X,
        first_stage=fs,
        x_int_upper=None,
    )
    expanded.validate()
    return expanded, exp


def lift_dependent_first_stage(inst: KAdaptInstance) -> KAdaptInstance:
    """Fold shared-scenario first-stage cost into the recourse block.

    The recourse becomes (x-copy, y) with cost matrix [C, Q]; linking rows
    pin the copy to x, so the lifted instance has the same optimal value
    with a deterministic first-stage objective. The first n recourse
    coordinates of any returned policy are the x-copy.
    """
    fs = inst.first_stage
    if fs is None or fs.omega is not None:
        raise InstanceError("instance has no dependent first-stage uncertainty")
    if fs.C.shape != (inst.q, inst.n):
        raise InstanceError(f"C has shape {fs.C.shape}, expected {(inst.q, inst.n)}")
    n, m, s = inst.n, inst.m, inst.s
    eye = np.eye(n)
    T_bar = np.vstack([eye, -eye, inst.T])
    W_bar = np.vstack([
        np.hstack([-eye, np.zeros((n, m))]),
        np.hstack([eye, np.zeros((n, m))]),
        np.hstack([np.zeros((s, n)), inst.W]),
    ])
    b_bar = np.concatenate([np.zeros(2 * n), inst.b])
    Q_bar = np.hstack([fs.C, inst.Q])
    Y_A = np.hstack([np.zeros((inst.Y.num_rows, n)), inst.Y.A]) \
        if inst.Y.num_rows else np.zeros((0, n + m))
    lifted = replace(
        inst,
        name=inst.name + "-lifted",
        m=n + m,
        s=2 * n + s,
        Q=Q_bar,
        T=T_bar,
        W=W_bar,
        b=b_bar,
        Y=Polytope(Y_A, inst.Y.senses, inst.Y.rhs.copy()),
        first_stage=None,
    )
    lifted.validate()
    return lifted
