import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orbitflow.errors import NonSymmetric
from orbitflow.manifolds import ComplexProjective, Sphere
from orbitflow.numcore import (StepControl, fd_tangent_gradient, fd_weights, integrate,
                               logdet_psd, quadrature_mean, time_derivative)
from orbitflow.scenarios import s2_mean_curvature

P_HALF = np.array([np.sqrt(3) / 2, 0.0, 0.5])


# --- logdet_psd ---------------------------------------------------------

def test_logdet_identity():
    assert logdet_psd(np.eye(2)) == pytest.approx(0.0, abs=1e-13)


def test_logdet_latitude_gram():
    # |X|^2 = x^2 + y^2 for the z-rotation field, evaluated directly
    x = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]]) @ P_HALF
    assert logdet_psd(np.array([[x @ x]])) == pytest.approx(np.log(0.75), rel=1e-12)
    assert logdet_psd(np.array([[0.75]])) == pytest.approx(-0.287682, abs=1e-6)


def test_logdet_clifford_gram():
    g = np.array([[2 / 9, -1 / 9], [-1 / 9, 2 / 9]])
    assert logdet_psd(g) == pytest.approx(np.log(1 / 27), rel=1e-12)
    assert logdet_psd(g) == pytest.approx(-3.295837, abs=1e-6)


def test_logdet_degenerate_flag():
    assert logdet_psd(np.diag([1.0, 1e-15])) is None
    assert logdet_psd(np.zeros((2, 2))) is None


def test_logdet_rejects_nonsymmetric():
    with pytest.raises(NonSymmetric):
        logdet_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_logdet_matches_slogdet(k, seed):
    a = np.random.default_rng(seed).normal(size=(k, k))
    m = a @ a.T + 0.1 * np.eye(k)
    sign, ref = np.linalg.slogdet(m)
    assert sign > 0
    assert logdet_psd(m) == pytest.approx(ref, rel=1e-10, abs=1e-10)


# --- fd_tangent_gradient -------------------------------------------------

def test_fd_gradient_constant_is_zero():
    g = fd_tangent_gradient(lambda q: 1.0, P_HALF, Sphere(2))
    assert np.allclose(g, 0.0, atol=1e-14)


def test_fd_gradient_of_vol2_on_s2():
    s2 = Sphere(2)
    g = fd_tangent_gradient(lambda q: 1.0 - q[2] ** 2, P_HALF, s2)
    # ambient gradient (0, 0, -2z), projected onto the tangent plane
    amb = np.array([0.0, 0.0, -2 * P_HALF[2]])
    ref = amb - (amb @ P_HALF) * P_HALF
    assert np.linalg.norm(g - ref) / np.linalg.norm(ref) < 1e-6


def test_fd_gradient_on_cp2_clifford():
    cp2 = ComplexProjective(2)
    p = cp2.from_complex(np.full(3, 1 / np.sqrt(3)))
    f = lambda q: abs(cp2.to_complex(q)[1]) ** 2
    g = fd_tangent_gradient(f, p, cp2)
    # |z_1|^2 = x_1^2 + y_1^2 on the sphere representative; project horizontally
    amb = np.zeros(6)
    amb[1], amb[4] = 2 * p[1], 2 * p[4]
    ref = cp2.tangent_project(p, amb)
    assert np.linalg.norm(ref) == pytest.approx(np.sqrt(4 / 3 - 4 / 9), rel=1e-12)
    assert abs(np.linalg.norm(g) - np.linalg.norm(ref)) / np.linalg.norm(ref) < 1e-6
    assert np.linalg.norm(g - ref) / np.linalg.norm(ref) < 1e-6


def test_fd_gradient_fourth_order():
    s2 = Sphere(2)
    f = lambda q: np.sin(2 * q[2]) + q[0] * q[2]
    amb = lambda q: np.array([q[2], 0.0, 2 * np.cos(2 * q[2]) + q[0]])
    ref = amb(P_HALF) - (amb(P_HALF) @ P_HALF) * P_HALF
    err = {(h, o): np.linalg.norm(fd_tangent_gradient(f, P_HALF, s2, h, o) - ref)
           for h in (1e-2, 1e-3) for o in (2, 4)}
    assert err[1e-2, 2] / err[1e-3, 2] == pytest.approx(100, rel=0.05)
    assert err[1e-2, 4] / err[1e-3, 4] == pytest.approx(1e4, rel=0.05)
    assert err[1e-3, 4] < 1e-10
    with pytest.raises(ValueError):
        fd_tangent_gradient(f, P_HALF, s2, order=3)


def test_fd_gradient_of_invariant_function_is_orbit_normal():
    s2 = Sphere(2)
    for q in s2.sample(20, 4):
        f = lambda x: np.cos(3 * x[2]) + x[2] ** 3
        g = fd_tangent_gradient(f, q, s2)
        field = np.array([-q[1], q[0], 0.0])
        assert abs(g @ field) < 1e-6 * max(np.linalg.norm(g), 1.0)


# --- time derivatives ------------------------------------------------------

def test_fd_weights_central():
    w = fd_weights(0.0, [-1.0, 0.0, 1.0])
    assert np.allclose(w, [-0.5, 0.0, 0.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000))
def test_time_derivative_exact_on_quartics(seed):
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.01, 0.1, 12))
    c = rng.normal(size=5)
    y = np.polyval(c, t)
    d = time_derivative(t, y)
    ref = np.polyval(np.polyder(c), t)
    assert np.isnan(d[0]) and np.isnan(d[-1])
    assert np.allclose(d[1:-1], ref[1:-1], rtol=1e-7, atol=1e-7)


def test_time_derivative_uses_exact_steps():
    steps = np.array([0.0, 1e-3, 2e-3, 1e-3, 3e-3, 1e-3])
    t = np.cumsum(steps) + 1e6      # absolute times carry little precision here
    y = np.exp(np.cumsum(steps))
    d = time_derivative(t, y, steps=steps)
    assert np.allclose(d[1:-1], y[1:-1], rtol=1e-8)


# --- integrate -------------------------------------------------------------

def test_integrate_zero_field():
    p0 = np.array([0.6, 0.0, 0.8])
    tr = integrate(lambda y: np.zeros(3), p0, (0.0, 1.0), retract=Sphere(2).retract)
    assert tr.terminal == "TimeLimit"
    assert tr.t[-1] == 1.0
    assert all(np.array_equal(y, p0) for y in tr.y)


def test_integrate_s2_collapse_time():
    s2 = Sphere(2)
    p0 = s2.retract(P_HALF)

    def near_pole(t, y):
        return "Collapse" if 1.0 - y[2] ** 2 < 1e-12 * 0.75 else None

    tr = integrate(s2_mean_curvature, p0, (0.0, 5.0), events=[near_pole], retract=s2.retract,
                   max_step=lambda t, y: 0.05 * (1 - y[2] ** 2))
    assert tr.terminal == "Collapse"
    assert tr.t[-1] == pytest.approx(np.log(2.0), abs=1e-3)


def test_integrate_s2_backward():
    s2 = Sphere(2)
    p0 = s2.retract([np.sqrt(1 - 0.81), 0.0, 0.9])
    tr = integrate(s2_mean_curvature, p0, (0.0, -6.0), retract=s2.retract)
    assert tr.terminal == "TimeLimit"
    assert tr.t[-1] == -6.0
    assert tr.y[-1][2] == pytest.approx(0.9 * np.exp(-6.0), abs=1e-4)
    assert tr.y[-1][2] == pytest.approx(0.9 * np.exp(-6.0), rel=1e-8)


def test_integrate_retraction_residual():
    s2 = Sphere(2)
    tr = integrate(s2_mean_curvature, s2.retract([0.3, 0.4, 0.5]), (0.0, -3.0),
                   retract=s2.retract)
    assert max(s2.constraint_residual(y) for y in tr.y) < 1e-10


def _order_ratio(rel_tol, per_unit_step):
    errs = []
    for r in (rel_tol, rel_tol / 16):
        ctl = StepControl(rel_tol=r, abs_tol=1e-16, h_min=1e-16, per_unit_step=per_unit_step)
        tr = integrate(lambda y: y, np.array([0.5]), (0.0, 0.5), ctl)
        errs.append(abs(tr.y[-1][0] - 0.5 * np.exp(0.5)))
    return errs[0] / errs[1]


@pytest.mark.parametrize("rel_tol", [1e-8, 1e-9, 1e-10])
def test_integrator_order_per_unit_step(rel_tol):
    # tolerance-proportional mode: 16x tighter tolerance gives >= 2**4 smaller error
    assert _order_ratio(rel_tol, per_unit_step=True) >= 16.0


def test_integrator_order_default_control_is_sublinear_but_converging():
    # per-step control: the global error shrinks with the tolerance (ratio about 8..15)
    assert _order_ratio(1e-9, per_unit_step=False) > 4.0


def test_integrate_events_on_initial_state():
    tr = integrate(lambda y: y, np.array([1.0]), (0.0, 1.0), events=[lambda t, y: "Stop"])
    assert tr.terminal == "Stop" and len(tr.t) == 1


def test_integrate_max_steps():
    tr = integrate(lambda y: y, np.array([1.0]), (0.0, 10.0),
                   StepControl(h_init=1e-3, h_max=1e-3, max_steps=5))
    assert tr.terminal == "MaxSteps" and len(tr.t) == 6


def test_integrate_step_underflow_is_terminal():
    def blows_up(y):
        raise FloatingPointError("always")
    tr = integrate(blows_up, np.array([1.0]), (0.0, 1.0), StepControl(h_min=1e-6))
    assert tr.terminal == "StepUnderflow"


def test_step_control_validation():
    with pytest.raises(ValueError):
        StepControl(h_min=1.0, h_init=0.1)
    with pytest.raises(ValueError):
        StepControl(rel_tol=0.0)
    with pytest.raises(ValueError):
        StepControl(max_steps=0)


# --- quadrature_mean -------------------------------------------------------

def test_quadrature_odd_function_on_s2():
    assert abs(quadrature_mean(lambda q: q[2], Sphere(2), 100_000, 11)) < 0.01


@pytest.mark.parametrize("n", [1, 2, 3])
def test_quadrature_coordinate_mass_on_cpn(n):
    cp = ComplexProjective(n)
    val = quadrature_mean(lambda q: abs(cp.to_complex(q)[n]) ** 2, cp, 20_000, 5)
    assert val == pytest.approx(1 / (n + 1), abs=0.01)


def test_quadrature_constant_is_exact():
    assert quadrature_mean(lambda q: 5.0, Sphere(2), 17, 0) == 5.0


def test_quadrature_is_deterministic():
    f = lambda q: q[0] * q[1] + q[2]
    a = quadrature_mean(f, Sphere(2), 1000, 42)
    b = quadrature_mean(f, Sphere(2), 1000, 42)
    assert a == b
    assert a != quadrature_mean(f, Sphere(2), 1000, 43)
