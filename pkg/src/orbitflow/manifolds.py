"""Built-in compact manifolds embedded in Euclidean space.

Points are plain 1-D float arrays of ambient coordinates; every manifold
knows how to retract onto itself, project onto tangent spaces and draw
uniform samples. ``ComplexProjective(n)`` stores a unit representative of
C^(n+1) as ``[Re z_0..Re z_n, Im z_0..Im z_n]`` with no phase fixed.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import NotKaehler, TooFar

# accepted norm band per factor; 2.0 keeps radial inputs such as (0, 0, 2) valid
RETRACT_BAND = (0.5, 2.0)


def _normalize(x: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(x)
    if not (RETRACT_BAND[0] <= r <= RETRACT_BAND[1]):
        raise TooFar(f"norm {r:.3g} outside {RETRACT_BAND}")
    return x / r


class Manifold:
    """Common interface. Subclasses fill in the geometry."""

    kind: str
    ambient_dim: int
    intrinsic_dim: int
    kaehler: bool = False
    einstein_constant: Optional[float] = None

    def retract(self, raw) -> np.ndarray:
        raise NotImplementedError

    def tangent_project(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def constraint_residual(self, p: np.ndarray) -> float:
        raise NotImplementedError

    def sample(self, n: int, seed: int) -> np.ndarray:
        """``n`` points uniform in the volume measure, shape ``(n, ambient_dim)``."""
        raise NotImplementedError

    def random_point(self, seed: int) -> np.ndarray:
        return self.sample(1, seed)[0]

    def inner(self, p, u, v) -> float:
        return float(np.dot(u, v))

    def jmul(self, p, v) -> np.ndarray:
        raise NotKaehler(f"{self!r} has no complex structure")

    def omega(self, p, u, v) -> float:
        return self.inner(p, self.jmul(p, u), v)

    def tangent_basis(self, p: np.ndarray) -> np.ndarray:
        """Orthonormal basis of the tangent space, shape ``(intrinsic_dim, ambient_dim)``."""
        proj = np.stack([self.tangent_project(p, e) for e in np.eye(self.ambient_dim)])
        u, s, vt = np.linalg.svd(proj)
        return vt[: self.intrinsic_dim]

    def output_gauge(self, p: np.ndarray) -> np.ndarray:
        return np.asarray(p, dtype=float)

    def __eq__(self, other):
        return type(self) is type(other) and repr(self) == repr(other)

    def __hash__(self):
        return hash(repr(self))


class Sphere(Manifold):
    """Unit sphere S^m in R^(m+1). S^2 carries its area form as Kaehler form."""

    kind = "Sphere"

    def __init__(self, m: int):
        self.m = m
        self.ambient_dim = m + 1
        self.intrinsic_dim = m
        self.kaehler = m == 2
        self.einstein_constant = 1.0 if m == 2 else None

    def __repr__(self):
        return f"Sphere({self.m})"

    def retract(self, raw):
        return _normalize(np.asarray(raw, dtype=float))

    def tangent_project(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        return v - (np.dot(v, p) / np.dot(p, p)) * p

    def constraint_residual(self, p):
        return abs(float(np.linalg.norm(p)) - 1.0)

    def sample(self, n, seed):
        x = np.random.default_rng(seed).standard_normal((n, self.ambient_dim))
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    def jmul(self, p, v):
        if not self.kaehler:
            return super().jmul(p, v)
        # rotation by +90 degrees in T_pS^2, so omega(u, v) = <p, u x v>
        return np.cross(p, v)


class RealProjective(Sphere):
    """RP^m realised on its sphere representative.

    All local orbit quantities are those of the double cover; the antipodal
    identification only shows up as scenario metadata.
    """

    kind = "RealProjective"

    def __init__(self, m: int):
        super().__init__(m)
        self.kaehler = False
        self.einstein_constant = None

    def __repr__(self):
        return f"RealProjective({self.m})"


class ComplexProjective(Manifold):
    """CP^n with the Fubini-Study metric of the unit sphere S^(2n+1) (Ric = 2(n+1) g)."""

    kind = "ComplexProjective"

    def __init__(self, n: int):
        self.n = n
        self.ambient_dim = 2 * n + 2
        self.intrinsic_dim = 2 * n
        self.kaehler = True
        self.einstein_constant = 2.0 * (n + 1)

    def __repr__(self):
        return f"ComplexProjective({self.n})"

    def to_complex(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        k = self.n + 1
        return p[:k] + 1j * p[k:]

    def from_complex(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.concatenate([z.real, z.imag])

    def _j(self, v):
        k = self.n + 1
        return np.concatenate([-v[k:], v[:k]])

    def retract(self, raw):
        return _normalize(np.asarray(raw, dtype=float))

    def tangent_project(self, p, v):
        p = np.asarray(p, dtype=float)
        v = np.asarray(v, dtype=float)
        ip = self._j(p)
        nn = np.dot(p, p)
        return v - (np.dot(v, p) / nn) * p - (np.dot(v, ip) / nn) * ip

    def constraint_residual(self, p):
        return abs(float(np.linalg.norm(p)) - 1.0)

    def sample(self, n, seed):
        x = np.random.default_rng(seed).standard_normal((n, self.ambient_dim))
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    def jmul(self, p, v):
        return self._j(np.asarray(v, dtype=float))

    def output_gauge(self, p):
        z = self.to_complex(p)
        nz = np.flatnonzero(np.abs(z) > 1e-12)
        if nz.size:
            z = z * np.exp(-1j * np.angle(z[nz[0]]))
        return self.from_complex(z)


class Product(Manifold):
    kind = "Product"

    def __init__(self, factors: Sequence[Manifold]):
        self.factors = tuple(factors)
        self.ambient_dim = sum(f.ambient_dim for f in self.factors)
        self.intrinsic_dim = sum(f.intrinsic_dim for f in self.factors)
        self.kaehler = all(f.kaehler for f in self.factors)
        cs = {f.einstein_constant for f in self.factors}
        self.einstein_constant = cs.pop() if self.kaehler and len(cs) == 1 else None
        bounds = np.cumsum([0] + [f.ambient_dim for f in self.factors])
        self.slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def __repr__(self):
        return "Product([" + ", ".join(map(repr, self.factors)) + "])"

    def split(self, x):
        x = np.asarray(x, dtype=float)
        return [x[s] for s in self.slices]

    def _per_factor(self, name, p, v):
        out = np.empty(self.ambient_dim)
        for f, s in zip(self.factors, self.slices):
            out[s] = getattr(f, name)(p[s], v[s])
        return out

    def retract(self, raw):
        raw = np.asarray(raw, dtype=float)
        return np.concatenate([f.retract(raw[s]) for f, s in zip(self.factors, self.slices)])

    def tangent_project(self, p, v):
        return self._per_factor("tangent_project", np.asarray(p, float), np.asarray(v, float))

    def constraint_residual(self, p):
        return max(f.constraint_residual(p[s]) for f, s in zip(self.factors, self.slices))

    def sample(self, n, seed):
        ss = np.random.SeedSequence(seed).spawn(len(self.factors))
        parts = [f.sample(n, int(s.generate_state(1)[0])) for f, s in zip(self.factors, ss)]
        return np.concatenate(parts, axis=1)

    def jmul(self, p, v):
        if not self.kaehler:
            return super().jmul(p, v)
        return self._per_factor("jmul", np.asarray(p, float), np.asarray(v, float))

    def output_gauge(self, p):
        p = np.asarray(p, dtype=float)
        return np.concatenate([f.output_gauge(p[s]) for f, s in zip(self.factors, self.slices)])
