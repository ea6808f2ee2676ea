import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sltrans.integrate import (
    OutOfSpan,
    StepFailure,
    dop853,
    integrate_ivp,
    integrate_ivp_w,
    propagate,
    sample,
)
from sltrans.problem import CoefficientError

LEFT = -1.0
H1 = -1.0 / 3.0


def test_zero_lambda_gives_linear_solution(problem_a):
    traj = integrate_ivp(problem_a, 0, 0.0, LEFT, H1, 0.0, 1.0)
    x = np.linspace(LEFT, H1, 17)
    u, up = traj(x)
    assert np.max(np.abs(u - (x + 1))) < 1e-12
    assert np.max(np.abs(up - 1)) < 1e-12


def test_oscillatory_solution_matches_sine(problem_a):
    lam = np.pi**2
    traj = integrate_ivp(problem_a, 1, lam, H1, -H1, np.sin(np.pi * (H1 + 1)) / np.pi, np.cos(np.pi * (H1 + 1)))
    x = np.linspace(H1, -H1, 33)
    u, up = traj(x)
    assert np.max(np.abs(u - np.sin(np.pi * (x + 1)) / np.pi)) < 1e-9
    assert np.max(np.abs(up - np.cos(np.pi * (x + 1)))) < 1e-9
    # sin(pi (x + 1)) vanishes at x = 0
    assert abs(traj(0.0)[0]) < 1e-9


def test_negative_lambda_gives_sinh(problem_a):
    traj = integrate_ivp(problem_a, 0, -1.0, LEFT, H1, 0.0, 1.0)
    x = np.linspace(LEFT, H1, 21)
    u, up = traj(x)
    assert np.max(np.abs(u - np.sinh(x + 1))) < 1e-9
    assert np.max(np.abs(up - np.cosh(x + 1))) < 1e-9


def test_trajectory_endpoints_are_exact(problem_a):
    traj = integrate_ivp(problem_a, 0, 4.0, LEFT, H1, 0.25, -0.5)
    assert traj.x_start == LEFT and traj.x_end == H1
    u0, up0 = sample(traj, LEFT)
    assert u0 == 0.25 and up0 == -0.5
    for node, u_node, w_node in zip(traj.xs, traj.us, traj.ws):
        u, w = traj.state(node)
        assert u == pytest.approx(u_node, abs=1e-15) and w == pytest.approx(w_node, abs=1e-15)


def test_sampling_outside_span_raises(problem_a):
    traj = integrate_ivp(problem_a, 0, 1.0, LEFT, -0.5, 0.0, 1.0)
    with pytest.raises(OutOfSpan):
        traj(-0.4)
    with pytest.raises(OutOfSpan):
        traj(np.array([-0.9, -1.1]))


def test_span_must_lie_in_piece(problem_a):
    with pytest.raises(ValueError):
        integrate_ivp(problem_a, 0, 1.0, LEFT, 0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        propagate(problem_a, 2, 1.0, 0.0, 1.0, 0.0, 1.0)


def test_error_shrinks_with_tolerance(problem_a):
    lam = np.pi**2
    exact = np.sin(np.pi * (H1 + 1)) / np.pi
    errors = []
    for rtol in (1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11):
        u, _ = integrate_ivp(problem_a, 0, lam, LEFT, H1, 0.0, 1.0, rtol=rtol, atol=rtol * 1e-2)(H1)
        errors.append(abs(u - exact))
    assert all(b <= a for a, b in zip(errors, errors[1:])), errors
    assert errors[-1] < 1e-11


def test_backward_integration_recovers_start(problem_variable):
    lo, hi = problem_variable.bounds[0]
    fwd = integrate_ivp_w(problem_variable, 0, 30.0, lo, hi, 0.0, 1.0)
    back = integrate_ivp_w(problem_variable, 0, 30.0, hi, lo, fwd.us[-1], fwd.ws[-1])
    assert back.direction == -1.0
    scale = max(1.0, np.max(np.abs(fwd.us)), np.max(np.abs(fwd.ws)))
    assert abs(back.us[-1]) < 10 * 1e-10 * scale
    assert abs(back.ws[-1] - 1.0) < 10 * 1e-10 * scale


def test_end_state_is_smooth_in_lambda(problem_variable):
    lo, hi = problem_variable.bounds[2]
    lams = 5.0 + 0.01 * np.arange(7)
    u, w = propagate(problem_variable, 2, lams, lo, hi, 0.0, 1.0)
    # second differences of a smooth function are O(dlam^2)
    second = np.abs(np.diff(u, 2))
    assert np.max(second) < 1e-3 * max(1.0, np.max(np.abs(u)))
    assert np.max(np.abs(np.diff(second))) < 1e-5


def test_batched_and_single_propagation_agree(problem_b):
    lo, hi = problem_b.bounds[1]
    lams = np.array([-3.0, 0.0, 7.5, 120.0])
    ub, wb = propagate(problem_b, 1, lams, lo, hi, 0.2, -1.0)
    for k, lam in enumerate(lams):
        u, w = propagate(problem_b, 1, lam, lo, hi, 0.2, -1.0)
        scale = 1.0 + abs(u) + abs(w)
        assert abs(ub[k] - u) < 1e-9 * scale
        assert abs(wb[k] - w) < 1e-9 * scale


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(-50.0, 400.0), u0=st.floats(-2.0, 2.0), up0=st.floats(-2.0, 2.0))
def test_constant_coefficient_solution(problem_a, lam, u0, up0):
    x0, x1 = H1, -H1
    traj = integrate_ivp(problem_a, 1, lam, x0, x1, u0, up0)
    k = np.sqrt(complex(lam))
    t = x1 - x0
    if abs(k) < 1e-12:
        exact = u0 + up0 * t
    else:
        exact = (u0 * np.cos(k * t) + up0 * np.sin(k * t) / k).real
    scale = max(1.0, abs(u0) + abs(up0)) * max(1.0, np.exp(abs(k.imag) * t))
    assert abs(traj(x1)[0] - exact) < 1e-8 * scale


def test_step_budget_exhaustion_raises():
    with pytest.raises(StepFailure):
        dop853(lambda x, y: np.array([y[1], -1e6 * y[0]]), 0.0, 10.0, [0.0, 1.0], max_steps=20)


def test_nonfinite_rhs_raises():
    with pytest.raises(StepFailure):
        dop853(lambda x, y: np.array([np.nan, y[0]]), 0.0, 1.0, [1.0, 0.0])


def test_coefficient_failure_is_reported(problem_a):
    # bypass validation so that q fails only once the stepper reaches x < -0.9
    spec = problem_a.spec.replace(q=("sqrt(x + 0.9)", "0", "0"))
    broken = dataclasses.replace(problem_a, spec=spec)
    with pytest.raises(CoefficientError):
        integrate_ivp(broken, 0, 1.0, H1, LEFT, 0.0, 1.0)
