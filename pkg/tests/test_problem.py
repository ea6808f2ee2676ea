import numpy as np
import pytest

from sltrans.problem import (
    BetaBothZero,
    BreakpointOrder,
    CoefficientError,
    NonPositiveCoefficient,
    ProblemSpec,
    RhoNotPositive,
    ZeroTransmissionCoefficient,
    boundary_forms,
    from_arrays,
    symmetry_condition_check,
    validate_problem,
)


def spec(**changes):
    base = dict(h1=-1 / 3, h2=1 / 3, r="1", p="1", q="0", alpha=(0, -1), beta=(1, 0))
    base.update(changes)
    return ProblemSpec(**base)


def test_reference_problem_is_valid(problem_a):
    assert problem_a.rho == 1.0
    assert problem_a.p_minus == (1.0, 1.0) and problem_a.p_plus == (1.0, 1.0)


@pytest.mark.parametrize(
    "changes,error",
    [
        (dict(alpha=(0, 0)), RhoNotPositive),
        (dict(alpha=(0, 1)), RhoNotPositive),
        (dict(h1=0.5, h2=0.2), BreakpointOrder),
        (dict(h1=-1.0), BreakpointOrder),
        (dict(h2=1.0), BreakpointOrder),
        (dict(beta=(0, 0)), BetaBothZero),
        (dict(gamma=(1, 0, 1, 1)), ZeroTransmissionCoefficient),
        (dict(delta=(1, 1, 1, 0)), ZeroTransmissionCoefficient),
        (dict(p="x"), NonPositiveCoefficient),
        (dict(r=("1", "1", "-1")), NonPositiveCoefficient),
        (dict(q="1/(x - 1/3)"), CoefficientError),
        (dict(p="sqrt(x)"), CoefficientError),
    ],
)
def test_invalid_specs(changes, error):
    with pytest.raises(error):
        validate_problem(spec(**changes))


def test_one_sided_limits_use_adjacent_pieces():
    P = validate_problem(spec(p=("1", "4", "2 + x"), r=("x + 2", "3", "1")))
    assert P.p_minus == (1.0, 4.0)
    assert P.p_plus == (4.0, 2 + 1 / 3)
    assert P.r_minus == (2 - 1 / 3, 3.0)


@pytest.mark.parametrize(
    "alpha,beta,u1,up1,expected",
    [((0, -1), (1, 0), 2.0, 3.0, (2.0, 3.0)), ((0.3, 2), (1, -4), 0.0, 0.0, (0.0, 0.0)), ((1, 0), (0, -1), 1.0, 1.0, (1.0, 1.0))],
)
def test_boundary_forms(alpha, beta, u1, up1, expected):
    # the forms only read alpha and beta, so rho need not be positive here
    P = spec(alpha=alpha, beta=beta)
    f = boundary_forms(P, u1, up1)
    assert (f.u1_form, f.u1p_form) == expected


def test_boundary_form_identity(rng):
    P = validate_problem(spec(alpha=(0.7, -1.3), beta=(2.0, 0.4)))
    for u1, up1, v1, vp1 in rng.normal(size=(100, 4)):
        fu, fv = boundary_forms(P, u1, up1), boundary_forms(P, v1, vp1)
        lhs = P.rho * (u1 * vp1 - up1 * v1)
        rhs = fu.u1_form * fv.u1p_form - fu.u1p_form * fv.u1_form
        assert abs(lhs - rhs) <= 1e-14 * (1 + abs(lhs))


def test_symmetry_condition():
    assert symmetry_condition_check(validate_problem(spec())).holds
    assert symmetry_condition_check(validate_problem(spec())).residuals == (0.0, 0.0)
    broken = symmetry_condition_check(validate_problem(spec(delta=(2, 2, 1, 1))))
    assert not broken.holds and broken.residuals[0] == 3.0
    assert symmetry_condition_check(validate_problem(spec(p=("1", "4", "4"), delta=(2, 2, 1, 1)))).holds


def test_validation_is_idempotent(problem_b):
    again = validate_problem(problem_b.spec)
    assert again == problem_b


def test_from_arrays_matches_spec():
    P = from_arrays((-0.5, 0.5), "1", "1", "0", (0, -1), (1, 0))
    assert P.bounds == ((-1.0, -0.5), (-0.5, 0.5), (0.5, 1.0))


def test_locate_requires_side_at_breakpoints(problem_a):
    assert list(problem_a.locate(np.array([-0.9, 0.0, 0.9]))) == [0, 1, 2]
    with pytest.raises(ValueError):
        problem_a.locate(problem_a.h1)
    assert int(problem_a.locate(problem_a.h1, "-")) == 0
    assert int(problem_a.locate(problem_a.h1, "+")) == 1
