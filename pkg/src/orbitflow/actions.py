"""Isometric group actions given by Lie-algebra generators.

A generator is a skew-symmetric ambient matrix ``A``; its fundamental field
at ``p`` is the tangent projection of ``A @ p`` (the projection only matters
on projective kinds, where it removes the vertical ``i z`` direction).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotClosed
from .manifolds import Manifold

SKEW_TOL = 1e-12
CLOSURE_TOL = 1e-8
RANK_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Generator:
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("generator matrix must be square")
        if np.max(np.abs(a + a.T)) >= SKEW_TOL:
            raise ValueError(f"generator {self.label!r} is not skew-symmetric")
        object.__setattr__(self, "matrix", a)

    @classmethod
    def from_complex(cls, m, label: str = "") -> "Generator":
        """Real form ``[[Re, -Im], [Im, Re]]`` of an anti-Hermitian complex matrix."""
        m = np.asarray(m, dtype=complex)
        return cls(np.block([[m.real, -m.imag], [m.imag, m.real]]), label)


def fundamental_field(manifold: Manifold, gen: Generator, p: np.ndarray) -> np.ndarray:
    return manifold.tangent_project(p, gen.matrix @ p)


class Action:
    """A list of generators acting on a manifold.

    Structure constants, ``max_orbit_dim`` and the characteristic Gram
    eigenvalue ``gram_scale`` are computed once at construction; the last
    two from ``n_probe`` seeded random points.
    """

    def __init__(self, manifold: Manifold, generators: Sequence[Generator],
                 n_probe: int = 64, seed: int = 0):
        self.manifold = manifold
        self.generators = tuple(generators)
        for g in self.generators:
            if g.matrix.shape != (manifold.ambient_dim,) * 2:
                raise ValueError(f"generator {g.label!r} has wrong shape for {manifold!r}")
        self.k = len(self.generators)
        self.structure_constants, self.closure_residual = self._structure_constants()

        probes = manifold.sample(n_probe, seed)
        dims, scale = [], 0.0
        for q in probes:
            eig = np.linalg.eigvalsh(self.gram(q))
            top = eig[-1] if eig.size else 0.0
            dims.append(int(np.sum(eig > RANK_TOL * top)) if top > 0 else 0)
            scale = max(scale, top)
        self.max_orbit_dim = max(dims) if dims else 0
        self.gram_scale = scale

    def __repr__(self):
        labels = ", ".join(g.label for g in self.generators)
        return f"Action({self.manifold!r}, [{labels}])"

    def _structure_constants(self):
        k = self.k
        c = np.zeros((k, k, k))
        if k == 0:
            return c, 0.0
        basis = np.stack([g.matrix.ravel() for g in self.generators], axis=1)
        worst = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                a, b = self.generators[i].matrix, self.generators[j].matrix
                comm = (a @ b - b @ a).ravel()
                coef, *_ = np.linalg.lstsq(basis, comm, rcond=None)
                worst = max(worst, float(np.linalg.norm(basis @ coef - comm)))
                c[i, j] = coef
                c[j, i] = -coef
        return c, worst

    def fields(self, p: np.ndarray) -> np.ndarray:
        """Fundamental fields at ``p``, shape ``(k, ambient_dim)``."""
        return np.stack([fundamental_field(self.manifold, g, p) for g in self.generators])

    def gram(self, p: np.ndarray) -> np.ndarray:
        x = self.fields(p)
        g = x @ x.T
        return 0.5 * (g + g.T)

    def _threshold(self, eig, tol):
        top = eig[-1] if eig.size else 0.0
        return tol * max(top, self.gram_scale)

    def orbit_dim(self, p: np.ndarray, tol: float = RANK_TOL) -> int:
        """Numerical rank of the Gram matrix.

        Eigenvalues count when above ``tol`` times the larger of the local top
        eigenvalue and ``gram_scale``; a purely local ratio could never see a
        1x1 Gram matrix degenerate.
        """
        eig = np.linalg.eigvalsh(self.gram(p))
        return int(np.sum(eig > self._threshold(eig, tol)))

    def classify(self, p: np.ndarray, tol: float = RANK_TOL) -> str:
        return "Regular" if self.orbit_dim(p, tol) >= self.max_orbit_dim else "Singular"

    def vanishing_directions(self, p: np.ndarray, tol: float = RANK_TOL) -> list:
        """Orthonormal generator-coordinate vectors spanning the numerical kernel of the Gram matrix."""
        eig, vec = np.linalg.eigh(self.gram(p))
        thr = self._threshold(eig, tol)
        out = []
        for lam, v in zip(eig, vec.T):
            if lam <= thr:
                i = np.argmax(np.abs(v))
                out.append(v * np.sign(v[i]))
        return out

    def derived_subalgebra(self) -> list:
        """Basis of span{[A_i, A_j]} in generator coordinates."""
        if self.closure_residual > CLOSURE_TOL:
            raise NotClosed(f"commutator residual {self.closure_residual:.3g}")
        k = self.k
        rows = [self.structure_constants[i, j] for i in range(k) for j in range(i + 1, k)]
        if not rows:
            return []
        m = np.array(rows)
        u, s, vt = np.linalg.svd(m)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 0.0)))
        return [vt[i] for i in range(rank)]

    def isotropy_residual(self, p: np.ndarray) -> float:
        """max |omega(X_i, X_j)| over generator pairs, relative to the Gram diagonal scale."""
        if self.k < 2:
            return 0.0
        x = self.fields(p)
        worst = 0.0
        for i in range(self.k):
            jx = self.manifold.jmul(p, x[i])
            for j in range(i + 1, self.k):
                worst = max(worst, abs(float(np.dot(jx, x[j]))))
        scale = float(np.max(np.sum(x * x, axis=1)))
        return worst / scale if scale > 0 else 0.0
