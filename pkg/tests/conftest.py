"""Shared builders for hand-crafted toy instances."""

import numpy as np
import pytest

from kadapt.instances import KAdaptInstance, Polytope, XiSet


def one_hot_instance(table, K, box=None):
    """Instance whose recourses are the unit vectors and whose scenario
    coordinates pick rows of `table`: cost(y_j, e_h) = table[j][h].

    `table` is indexed [recourse][scenario]. The scenario set is the box
    (default unit cube), so pooled one-hot scenarios reproduce the table.
    """
    table = np.asarray(table, dtype=float)
    J, H = table.shape
    Y = Polytope(np.ones((1, J)), ("=",), np.array([1.0]))
    lo = np.zeros(H) if box is None else np.array([b[0] for b in box], dtype=float)
    hi = np.ones(H) if box is None else np.array([b[1] for b in box], dtype=float)
    xi = XiSet(Polytope.empty(H), lo, hi)
    inst = KAdaptInstance(
        name="one-hot", variant="objective", n=0, m=J, q=H, s=0, K=K,
        c=np.zeros(0), Q=table.T.copy(), T=np.zeros((0, 0)),
        W=np.zeros((0, J)), b=np.zeros(0),
        X=Polytope.empty(0), Y=Y, xi=xi)
    inst.validate()
    return inst


def crossing_instance(K=1):
    """Two recourses with costs 2*t and 3 - 3*t over t in [0,1].

    Scenario vector is (1, t) with the first coordinate frozen at 1
    carrying the constant terms.
    """
    Y = Polytope(np.ones((1, 2)), ("=",), np.array([1.0]))
    xi = XiSet(Polytope.empty(2), np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    Q = np.array([[0.0, 3.0],
                  [2.0, -3.0]])
    inst = KAdaptInstance(
        name="crossing", variant="objective", n=0, m=2, q=2, s=0, K=K,
        c=np.zeros(0), Q=Q, T=np.zeros((0, 0)), W=np.zeros((0, 2)),
        b=np.zeros(0), X=Polytope.empty(0), Y=Y, xi=xi, xi0=True)
    inst.validate()
    return inst


def cu_toy(K, s_rows=1):
    """Two one-hot recourses, nominal costs (1, 3); scenario coordinate 1
    can knock out recourse 1 (and also recourse 2 when s_rows=2)."""
    Y = Polytope(np.ones((1, 2)), ("=",), np.array([1.0]))
    xi = XiSet(Polytope.empty(2), np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    Q = np.array([[1.0, 3.0], [0.0, 0.0]])
    if s_rows == 1:
        W_l = (np.zeros((1, 2)), np.array([[2.0, 0.0]]))
        W0, b = np.zeros((1, 2)), np.ones(1)
    else:
        W_l = (np.zeros((2, 2)), np.array([[2.0, 0.0], [0.0, 2.0]]))
        W0, b = np.zeros((2, 2)), np.ones(2)
    inst = KAdaptInstance(
        name="cu-toy", variant="constraint", n=0, m=2, q=2, s=s_rows, K=K,
        c=np.zeros(0), Q=Q, T=np.zeros((s_rows, 0)), W=W0, b=b,
        X=Polytope.empty(0), Y=Y, xi=xi, W_l=W_l, xi0=True)
    inst.validate()
    return inst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
