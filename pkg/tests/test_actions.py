import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from orbitflow.actions import Action, Generator, fundamental_field
from orbitflow.errors import NotClosed
from orbitflow.manifolds import ComplexProjective, Sphere
from orbitflow.scenarios import L_X, L_Y, L_Z, get_scenario

P_HALF = np.array([np.sqrt(3) / 2, 0.0, 0.5])
CLIFFORD = ComplexProjective(2).from_complex(np.full(3, 1 / np.sqrt(3)))


@pytest.fixture(scope="module")
def s2():
    return get_scenario("s2_rotation").action


@pytest.fixture(scope="module")
def cp2():
    return get_scenario("cp2_torus").action


@pytest.fixture(scope="module")
def so3():
    return get_scenario("so3_on_s2").action


def _cp2_point(a, b, c):
    return ComplexProjective(2).from_complex(np.sqrt([a, b, c]))


def test_generator_rejects_non_skew():
    with pytest.raises(ValueError):
        Generator(np.eye(3))
    with pytest.raises(ValueError):
        Generator.from_complex(np.eye(2))


def test_field_vanishes_at_pole():
    assert np.allclose(fundamental_field(Sphere(2), Generator(L_Z), np.array([0, 0, 1.0])), 0.0)


def test_field_at_latitude():
    x = fundamental_field(Sphere(2), Generator(L_Z), P_HALF)
    assert np.allclose(x, [0.0, np.sqrt(3) / 2, 0.0], atol=1e-15)
    assert x @ x == pytest.approx(0.75)


def test_torus_field_at_clifford(cp2):
    x = cp2.fields(CLIFFORD)[0]
    assert x @ x == pytest.approx(2 / 9, rel=1e-12)
    # horizontal: orthogonal to z and iz
    man = cp2.manifold
    assert abs(x @ CLIFFORD) < 1e-15 and abs(x @ man.jmul(CLIFFORD, CLIFFORD)) < 1e-15


def test_gram_zero_at_fixed_point(s2):
    assert np.array_equal(s2.gram(np.array([0, 0, 1.0])), np.zeros((1, 1)))
    s2xs2 = get_scenario("s2xs2_torus").action
    assert np.array_equal(s2xs2.gram(np.array([0, 0, 1.0, 0, 0, -1.0])), np.zeros((2, 2)))


@pytest.mark.parametrize("z", [-0.9, 0.0, 0.3, 0.5])
def test_gram_latitude(s2, z):
    p = np.array([np.sqrt(1 - z * z), 0.0, z])
    assert s2.gram(p)[0, 0] == pytest.approx(1 - z * z, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_gram_cp2_closed_form(seed):
    cp2 = get_scenario("cp2_torus").action
    p = cp2.manifold.random_point(seed)
    a, b, c = np.abs(cp2.manifold.to_complex(p)) ** 2
    ref = np.array([[b - b * b, -b * c], [-b * c, c - c * c]])
    g = cp2.gram(p)
    assert np.allclose(g, ref, atol=1e-14)
    assert np.linalg.det(g) == pytest.approx(a * b * c, rel=1e-9, abs=1e-15)
    assert np.array_equal(g, g.T)


def test_orbit_dim_examples(s2, cp2):
    assert s2.orbit_dim(np.array([0, 0, 1.0])) == 0
    assert s2.classify(np.array([0, 0, 1.0])) == "Singular"
    assert s2.orbit_dim(P_HALF) == 1 and s2.classify(P_HALF) == "Regular"
    assert cp2.orbit_dim(CLIFFORD) == 2 and cp2.classify(CLIFFORD) == "Regular"


def test_max_orbit_dim(s2, cp2, so3):
    assert (s2.max_orbit_dim, cp2.max_orbit_dim, so3.max_orbit_dim) == (1, 2, 2)


def test_lower_semicontinuity(s2, cp2):
    pole = np.array([0, 0, 1.0])
    for eps in np.logspace(-1, -7, 7):
        pn = s2.manifold.retract([eps, 0, 1.0])
        assert s2.orbit_dim(pn) >= s2.orbit_dim(pole)
    edge = _cp2_point(0.5, 0.0, 0.5)
    for eps in np.logspace(-1, -7, 7):
        pn = _cp2_point(0.5 - eps, eps, 0.5)
        assert cp2.orbit_dim(pn) >= cp2.orbit_dim(edge) == 1


def test_vanishing_directions(s2, cp2):
    assert s2.vanishing_directions(P_HALF) == []
    assert cp2.vanishing_directions(CLIFFORD) == []
    (v,) = s2.vanishing_directions(np.array([0, 0, 1.0]))
    assert np.allclose(v, [1.0])
    (w,) = cp2.vanishing_directions(_cp2_point(0.5, 0.0, 0.5))
    assert np.allclose(np.abs(w), [1.0, 0.0], atol=1e-12)


def test_derived_subalgebra(s2, cp2, so3):
    assert cp2.derived_subalgebra() == []
    assert s2.derived_subalgebra() == []
    basis = np.array(so3.derived_subalgebra())
    assert basis.shape == (3, 3)
    assert np.linalg.matrix_rank(basis) == 3


def test_structure_constants_so3(so3):
    c = so3.structure_constants
    # [L_x, L_y] = L_z and cyclic
    assert np.allclose(c[0, 1], [0, 0, 1]) and np.allclose(c[1, 2], [1, 0, 0])
    assert np.allclose(c[2, 0], [0, 1, 0])


def test_not_closed():
    a = Action(Sphere(2), [Generator(L_X), Generator(L_Y)])
    with pytest.raises(NotClosed):
        a.derived_subalgebra()


@pytest.mark.parametrize("name", ["s2_rotation", "cp2_torus", "s2xs2_torus", "so3_on_s2"])
def test_equivariance_gram_invariant_along_orbits(name):
    act = get_scenario(name).action
    man = act.manifold
    for q in man.sample(5, 21):
        g0 = act.gram(q)
        for gen in act.generators:
            for s in (0.3, 1.1, -2.0):
                moved = man.retract(expm(s * gen.matrix) @ q)
                gs = act.gram(moved)
                assert abs(np.linalg.det(gs) - np.linalg.det(g0)) < 1e-8
                assert np.allclose(np.linalg.eigvalsh(gs), np.linalg.eigvalsh(g0), atol=1e-12)


def test_isotropy_residual(cp2, so3):
    q = cp2.manifold.random_point(4)
    assert cp2.isotropy_residual(q) < 1e-10
    assert so3.isotropy_residual(so3.manifold.random_point(4)) > 0.1
