"""Algebraic identities checked over generated inputs with hypothesis."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conicqp import (
    ConicInstance,
    Polyhedron,
    branch_select,
    dual_bound_estimate,
    eval_h,
    eval_objective,
)
from conicqp.generate import gen_quadratic


def make_instance(seed, n, omega):
    rng = np.random.default_rng(seed)
    q = gen_quadratic(n, max(1, n // 3), 0.5, rng)
    poly = Polyhedron(A=np.ones((1, n)), b=[n / 5.0], lower=np.zeros(n),
                      upper=np.ones(n))
    c = rng.uniform(-2, 0, n)
    return ConicInstance(c=c, omega=omega, q=q, poly=poly), rng


@given(seed=st.integers(0, 10_000), n=st.integers(5, 40),
       omega=st.floats(0.1, 5.0))
@settings(max_examples=60, deadline=None)
def test_quadratic_form_nonnegative(seed, n, omega):
    inst, rng = make_instance(seed, n, omega)
    x = rng.normal(size=n)
    assert inst.q.quad(x) >= -1e-10


@given(seed=st.integers(0, 10_000), n=st.integers(5, 30),
       t=st.floats(1e-6, 1e6))
@settings(max_examples=60, deadline=None)
def test_eval_h_positive_branch(seed, n, t):
    inst, rng = make_instance(seed, n, 1.0)
    x = rng.uniform(0, 1, n)
    h = eval_h(inst.q, x, t)
    assert h >= 0.0
    assert h == inst.q.quad(x) / t


@given(seed=st.integers(0, 10_000), n=st.integers(5, 30),
       omega=st.floats(0.1, 5.0))
@settings(max_examples=60, deadline=None)
def test_perspective_sandwich_identity(seed, n, omega):
    # at t = sqrt(x'Qx) the reformulated objective equals the conic one
    inst, rng = make_instance(seed, n, omega)
    x = rng.uniform(0.0, 1.0, n)
    t = math.sqrt(inst.q.quad(x))
    if t <= 1e-8:
        return
    val = (float(inst.c @ x) + 0.5 * omega * eval_h(inst.q, x, t)
           + 0.5 * omega * t)
    assert abs(val - eval_objective(inst, x)) <= 1e-12 * (1 + abs(val))


@given(seed=st.integers(0, 10_000), n=st.integers(5, 30),
       eps=st.floats(0.0, 1e-6))
@settings(max_examples=40, deadline=None)
def test_dual_bound_with_no_t_change_is_eps(seed, n, eps):
    inst, rng = make_instance(seed, n, 1.0)
    x = rng.uniform(0.1, 1.0, n)
    t = math.sqrt(inst.q.quad(x))
    assert dual_bound_estimate(inst, x, t, t, eps) == eps


@given(values=st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12))
@settings(max_examples=80, deadline=None)
def test_branch_select_returns_most_fractional(values):
    x = np.array(values)
    dist = np.minimum(x - np.floor(x), np.ceil(x) - x)
    if dist.max() <= 1e-5:
        return
    j, fl, cl = branch_select(x, tuple(range(len(x))))
    assert dist[j] >= dist.max() - 1e-6
    assert fl == math.floor(x[j]) and cl == math.ceil(x[j])
