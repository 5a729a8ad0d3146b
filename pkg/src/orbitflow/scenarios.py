"""Registry of built-in scenarios: manifold, action, moment map, start family."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .actions import Action, Generator
from .errors import UnknownScenario
from .kaehler import MomentMap
from .manifolds import ComplexProjective, Manifold, Product, RealProjective, Sphere

L_X = np.array([[0, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=float)
L_Y = np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]], dtype=float)
L_Z = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)


@dataclass
class ScenarioSpec:
    name: str
    description: str
    manifold: Manifold
    action: Action
    make_point: Callable[..., np.ndarray]
    defaults: dict
    moment: Optional[MomentMap] = None
    einstein_constant: Optional[float] = None
    analytic_H: Optional[Callable[[np.ndarray], np.ndarray]] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.moment is None) != (self.einstein_constant is None):
            raise ValueError("moment map and Einstein constant must be given together")
        if self.moment is not None:
            # sign of the moment map chosen by fix_sign for omega = <J., .>
            self.metadata.setdefault("moment_sign", self.moment.sign)

    @property
    def kaehler(self) -> bool:
        return self.moment is not None

    @property
    def lagrangian(self) -> bool:
        """Regular orbits are half-dimensional and isotropic."""
        if not self.kaehler or 2 * self.action.max_orbit_dim != self.manifold.intrinsic_dim:
            return False
        q = self.manifold.random_point(12345)
        return self.action.isotropy_residual(q) < 1e-8

    def point(self, **params) -> np.ndarray:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise KeyError(f"unknown initial-point parameters {sorted(unknown)} for {self.name}")
        return self.manifold.retract(self.make_point(**{**self.defaults, **params}))


def _latitude(z0):
    if not -1.0 <= z0 <= 1.0:
        raise ValueError("latitude must lie in [-1, 1]")
    return np.array([np.sqrt(1.0 - z0 * z0), 0.0, z0])


def s2_mean_curvature(p):
    """Closed-form H for rotations about z: z (e_z - z p) / (1 - z^2)."""
    z = p[2]
    return z * (np.array([0.0, 0.0, 1.0]) - z * p) / (1.0 - z * z)


def cp_torus_mean_curvature(manifold: ComplexProjective):
    """Closed-form H for the standard torus on CP^n: -1/2 sum_j grad(b_j)/b_j, b_j = |z_j|^2."""
    def H(p):
        z = manifold.to_complex(p)
        b = np.abs(z) ** 2
        out = np.zeros_like(z)
        for j in range(z.size):
            g = -2.0 * b[j] * z
            g[j] += 2.0 * z[j]
            out += g / b[j]
        return manifold.from_complex(-0.5 * out)
    return H


def _torus_generators(n):
    gens = []
    for k in range(1, n + 1):
        e = np.zeros((n + 1, n + 1), dtype=complex)
        e[k, k] = 1j
        gens.append(Generator.from_complex(e, f"iE{k}"))
    return gens


def _cp_moment(manifold, action):
    n = manifold.n
    # 1/2 |z_k|^2 is the Hamiltonian of iE_k for omega = <J., .> (up to sign)
    comps = [lambda p, k=k: 0.5 * float(np.abs(manifold.to_complex(p)[k]) ** 2)
             for k in range(1, n + 1)]
    return MomentMap(manifold, comps, offsets=[0.5 / (n + 1)] * n).fix_sign(action)


def _s2_rotation():
    m = Sphere(2)
    act = Action(m, [Generator(L_Z, "Lz")])
    return ScenarioSpec(
        name="s2_rotation", description="S^1 rotating S^2 about the z-axis; orbits are latitudes",
        manifold=m, action=act, make_point=_latitude, defaults={"z0": 0.5},
        moment=MomentMap(m, [lambda p: p[2]]).fix_sign(act), einstein_constant=1.0,
        analytic_H=s2_mean_curvature, metadata={"minimal_orbit": "equator z=0"})


def _rp2_rotation():
    m = RealProjective(2)
    act = Action(m, [Generator(L_Z, "Lz")])
    return ScenarioSpec(
        name="rp2_rotation",
        description="S^1 on RP^2 = S^2/antipodal; equator is the exceptional orbit",
        manifold=m, action=act, make_point=_latitude, defaults={"z0": 0.5},
        analytic_H=s2_mean_curvature,
        metadata={"covering_multiplicity": 2, "exceptional_orbit": "equator z=0",
                  "notes": "flow runs on the sphere representative"})


def _s2xs2_torus():
    m = Product([Sphere(2), Sphere(2)])
    z3 = np.zeros((3, 3))
    act = Action(m, [Generator(np.block([[L_Z, z3], [z3, z3]]), "Lz(1)"),
                     Generator(np.block([[z3, z3], [z3, L_Z]]), "Lz(2)")])
    return ScenarioSpec(
        name="s2xs2_torus", description="T^2 rotating both factors of S^2 x S^2",
        manifold=m, action=act,
        make_point=lambda z1, z2: np.concatenate([_latitude(z1), _latitude(z2)]),
        defaults={"z1": 0.8, "z2": 0.2},
        moment=MomentMap(m, [lambda p: p[2], lambda p: p[5]]).fix_sign(act),
        einstein_constant=1.0,
        analytic_H=lambda p: np.concatenate([s2_mean_curvature(p[:3]), s2_mean_curvature(p[3:])]))


def _frozen_factor():
    m = Product([Sphere(2), Sphere(2)])
    z3 = np.zeros((3, 3))
    act = Action(m, [Generator(np.block([[z3, z3], [z3, L_Z]]), "Lz(2)")])
    return ScenarioSpec(
        name="cp2_frozen_factor",
        description="continuation of s2xs2_torus after the first factor collapses: "
                    "first factor frozen at the pole, S^1 on the second",
        manifold=m, action=act,
        make_point=lambda z2: np.concatenate([[0.0, 0.0, 1.0], _latitude(z2)]),
        defaults={"z2": 0.25},
        moment=MomentMap(m, [lambda p: p[5]]).fix_sign(act), einstein_constant=1.0,
        analytic_H=lambda p: np.concatenate([np.zeros(3), s2_mean_curvature(p[3:])]),
        metadata={"continues": "s2xs2_torus"})


def _cp_torus(n):
    m = ComplexProjective(n)
    act = Action(m, _torus_generators(n))
    if n == 1:
        make = lambda b1: m.from_complex([np.sqrt(1 - b1), np.sqrt(b1)])
        defaults = {"b1": 0.3}
    else:
        make = lambda b1, b2: m.from_complex([np.sqrt(1 - b1 - b2), np.sqrt(b1), np.sqrt(b2)])
        defaults = {"b1": 0.25, "b2": 0.35}
    return ScenarioSpec(
        name=f"cp{n}_torus", description=f"standard T^{n} on CP^{n}; Clifford torus is minimal",
        manifold=m, action=act, make_point=make, defaults=defaults,
        moment=_cp_moment(m, act), einstein_constant=m.einstein_constant,
        analytic_H=cp_torus_mean_curvature(m),
        metadata={"minimal_orbit": "Clifford torus |z_k|^2 = 1/(n+1)"})


def _so3_on_s2():
    m = Sphere(2)
    act = Action(m, [Generator(L_X, "Lx"), Generator(L_Y, "Ly"), Generator(L_Z, "Lz")])
    return ScenarioSpec(
        name="so3_on_s2",
        description="full rotation algebra on S^2: one orbit, not isotropic (contrast case)",
        manifold=m, action=act, make_point=_latitude, defaults={"z0": 0.5},
        moment=MomentMap(m, [lambda p: p[0], lambda p: p[1], lambda p: p[2]]).fix_sign(act),
        einstein_constant=1.0, analytic_H=lambda p: np.zeros(3))


_BUILDERS = {
    "s2_rotation": _s2_rotation,
    "rp2_rotation": _rp2_rotation,
    "s2xs2_torus": _s2xs2_torus,
    "cp1_torus": lambda: _cp_torus(1),
    "cp2_torus": lambda: _cp_torus(2),
    "cp2_frozen_factor": _frozen_factor,
    "so3_on_s2": _so3_on_s2,
}


@lru_cache(maxsize=None)
def get_scenario(name: str) -> ScenarioSpec:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownScenario(name) from None
    return builder()


def list_scenarios() -> list:
    """(name, description) for every built-in scenario."""
    return [(name, get_scenario(name).description) for name in _BUILDERS]
