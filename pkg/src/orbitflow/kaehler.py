"""Moment maps on Kaehler-Einstein scenarios and the laws tying them to MCF.

Moment components are analytic functions supplied by the scenario and
made canonical by subtracting their mean over the manifold. The ``g*`` norm
of a moment value at ``p`` is ``m^T G^-1 m`` with ``G`` the Gram matrix of
the generators at ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .actions import Action
from .errors import AllComponentsZero, DegenerateGram, InconsistentChecks, NotKaehler
from .mcflow import FlowParams, FlowTrace, mcf, mean_curvature
from .numcore import time_derivative


@dataclass(frozen=True)
class MomentValue:
    coeffs: np.ndarray
    canonical: bool = True

    def __len__(self):
        return len(self.coeffs)


class MomentMap:
    """``mu_i(p) = sign * (raw_i(p) - offset_i)`` for the i-th generator."""

    def __init__(self, manifold, components: Sequence[Callable[[np.ndarray], float]],
                 offsets: Optional[Sequence[float]] = None, sign: float = 1.0):
        if not manifold.kaehler:
            raise NotKaehler(f"{manifold!r} is not Kaehler")
        self.manifold = manifold
        self.components = tuple(components)
        self.offsets = np.zeros(len(self.components)) if offsets is None else np.asarray(offsets, float)
        self.sign = float(sign)

    def __call__(self, p) -> MomentValue:
        raw = np.array([f(p) for f in self.components])
        return MomentValue(self.sign * (raw - self.offsets), canonical=True)

    def with_sign(self, sign: float) -> "MomentMap":
        return MomentMap(self.manifold, self.components, self.offsets, sign)

    def fix_sign(self, action: Action, n_points: int = 4, seed: int = 0) -> "MomentMap":
        """Pick the sign of the moment map that satisfies the moment condition."""
        pts = self.manifold.sample(n_points, seed)
        best = {s: max(verify_moment_condition(action, self.with_sign(s), q) for q in pts)
                for s in (1.0, -1.0)}
        return self.with_sign(min(best, key=best.get))

    def quadrature_means(self, n_samples: int = 100_000, seed: int = 0) -> np.ndarray:
        """Monte Carlo mean of every canonical component (should be ~0)."""
        # same sample set as numcore.quadrature_mean, all components per sample
        vals = np.array([self(q).coeffs for q in self.manifold.sample(n_samples, seed)])
        return vals.mean(axis=0)


def moment(mm: MomentMap, p) -> MomentValue:
    return mm(p)


def verify_moment_condition(action: Action, mm: MomentMap, p, h: float = 1e-4) -> float:
    """max_ij |d mu_i(v_j) - omega(X_i, v_j)| over an orthonormal tangent basis v_j."""
    man = action.manifold
    basis = man.tangent_basis(p)
    fields = action.fields(p)
    worst = 0.0
    for v in basis:
        dmu = (mm(man.retract(p + h * v)).coeffs - mm(man.retract(p - h * v)).coeffs) / (2 * h)
        for i, x in enumerate(fields):
            worst = max(worst, abs(dmu[i] - man.omega(p, x, v)))
    return worst


def is_isotropic_orbit(action: Action, p, tol: float = 1e-8):
    """(isotropic?, residual) with residual = max |omega(X_i, X_j)| / Gram scale."""
    if not action.manifold.kaehler:
        raise NotKaehler(f"{action.manifold!r} is not Kaehler")
    r = action.isotropy_residual(p)
    return r < tol, r


def is_lagrangian_point(action: Action, mm: MomentMap, p, tol: float = 1e-8,
                        rank_tol: float = 1e-8) -> bool:
    """Regular half-dimensional orbit whose moment annihilates [g, g].

    The moment-map test is cross-checked against the isotropy test; a
    disagreement raises ``InconsistentChecks``. ``rank_tol`` is the Gram rank
    cut used for the dimension test.
    """
    man = action.manifold
    dim = action.orbit_dim(p, rank_tol)
    if 2 * dim != man.intrinsic_dim or dim < action.max_orbit_dim:
        return False
    m = mm(p).coeffs
    derived = action.derived_subalgebra()
    by_moment = all(abs(float(np.dot(m, d))) < tol for d in derived)
    by_omega, _ = is_isotropic_orbit(action, p, tol)
    if by_moment != by_omega:
        raise InconsistentChecks(f"moment test {by_moment} vs isotropy test {by_omega}")
    return by_moment


def moment_norm(action: Action, mm: MomentMap, p) -> float:
    """``sqrt(m^T G^-1 m)``: the moment's length in the orbit-induced metric on g*."""
    m = mm(p).coeffs
    return float(np.sqrt(max(m @ _solve_gram(action, p, m), 0.0)))


def _solve_gram(action, p, rhs):
    g = action.gram(p)
    eig = np.linalg.eigvalsh(g)
    if eig.size == 0 or eig[0] <= 1e-13 * max(eig[-1], 1e-300):
        raise DegenerateGram("Gram matrix not invertible at working precision")
    return np.linalg.solve(g, rhs)


@dataclass
class MomentLawFit:
    rates: np.ndarray        # fitted d log|mu_i|/dt, NaN for skipped components
    fitted_rate: float       # mean of the fitted rates
    max_residual: float      # max |dmu/dt - c mu| / |c mu| at interior samples


def verify_flow_moment_law(trace: FlowTrace, c: float, threshold: float = 1e-6) -> MomentLawFit:
    """Fit the exponential growth rate of every moment component along a trace.

    Components with ``|mu_i(0)| <= threshold`` are skipped; if none is left,
    ``AllComponentsZero`` is raised. A terminal Collapse sample is excluded.
    """
    s = trace.samples[:-1] if trace.terminal == "Collapse" else trace.samples
    if s[0].mu is None:
        raise ValueError("trace carries no moment values")
    t = np.array([x.t for x in s])
    steps = np.array([x.dt for x in s])
    mu = np.array([x.mu.coeffs for x in s])
    active = np.abs(mu[0]) > threshold
    if not np.any(active):
        raise AllComponentsZero("every moment component starts at zero")
    rates = np.full(mu.shape[1], np.nan)
    worst = 0.0
    for i in np.flatnonzero(active):
        rates[i] = np.polyfit(t, np.log(np.abs(mu[:, i])), 1)[0]
        if len(s) >= 3:
            d = time_derivative(t, mu[:, i], steps=steps)[1:-1]
            target = c * mu[1:-1, i]
            worst = max(worst, float(np.max(np.abs(d - target) / np.abs(target))))
    return MomentLawFit(rates=rates, fitted_rate=float(np.nanmean(rates)), max_residual=worst)


def exponential_law_residual(trace: FlowTrace, c: float, threshold: float = 1e-4) -> float:
    """Max relative error of mu_i(t2)/mu_i(t1) = exp(c (t2 - t1)) over consecutive samples."""
    s = trace.samples[:-1] if trace.terminal == "Collapse" else trace.samples
    worst = 0.0
    for a, b in zip(s[:-1], s[1:]):
        for m1, m2 in zip(a.mu.coeffs, b.mu.coeffs):
            if abs(m1) > threshold:
                worst = max(worst, abs(m2 / m1 / np.exp(c * b.dt) - 1.0))
    return worst


def moment_ray_deviation(trace: FlowTrace) -> float:
    """Max distance of the unit moment direction from its initial value."""
    s = trace.samples[:-1] if trace.terminal == "Collapse" else trace.samples
    mus = np.array([x.mu.coeffs for x in s])
    norms = np.linalg.norm(mus, axis=1)
    keep = norms > 1e-12
    if not np.any(keep):
        return 0.0
    dirs = mus[keep] / norms[keep, None]
    return float(np.max(np.linalg.norm(dirs - dirs[0], axis=1)))


def frozen_norm_law(action: Action, mm: MomentMap, p, c: float, h: float = 1e-4,
                    analytic=None):
    """(lhs, rhs) of d|mu|^2(H) = 2c|mu|^2 with the g*-norm frozen at ``p``.

    lhs = 2 m^T G^-1 (D_H m) with D_H m by central differences along H,
    rhs = 2c m^T G^-1 m.
    """
    man = action.manifold
    m = mm(p).coeffs
    ginv_m = _solve_gram(action, p, m)
    H = mean_curvature(action, p, h, analytic)
    hn = float(np.linalg.norm(H))
    if hn == 0.0:
        dm = np.zeros_like(m)
    else:
        u = H / hn
        dm = hn * (mm(man.retract(p + h * u)).coeffs - mm(man.retract(p - h * u)).coeffs) / (2 * h)
    return float(2.0 * ginv_m @ dm), float(2.0 * c * ginv_m @ m)


@dataclass
class MinimalOrbit:
    point: np.ndarray
    H_norm: float
    mu_norm: float
    trace: FlowTrace


def find_minimal_lagrangian(action: Action, mm: MomentMap, p0,
                            params: FlowParams = FlowParams(direction="backward")) -> MinimalOrbit:
    """Follow backward MCF from a Lagrangian orbit to a minimal one."""
    if params.direction != "backward":
        params = params.with_overrides(direction="backward")
    trace = mcf(action, p0, params, moment=mm)
    if trace.terminal != "Converged":
        raise RuntimeError(f"backward flow ended with {trace.terminal}, not Converged")
    end = trace.terminal_state
    if not end.H_norm < params.converged_H_norm:
        raise RuntimeError(f"terminal |H| = {end.H_norm:.3g} above threshold")
    return MinimalOrbit(point=end.p, H_norm=end.H_norm,
                        mu_norm=moment_norm(action, mm, end.p), trace=trace)


@dataclass
class MinimalityVerdict:
    H_norm: float
    mu_norm: float
    minimal: bool
    moment_zero: bool

    @property
    def consistent(self) -> bool:
        return self.minimal == self.moment_zero


def minimal_iff_moment_zero(action: Action, mm: MomentMap, p, c: float,
                            tol: float = 1e-6, h: float = 1e-4) -> MinimalityVerdict:
    """Compare "H vanishes" with "mu vanishes"; the two must agree.

    The moment tolerance is ``tol * sqrt(c)``.
    """
    hn = float(np.linalg.norm(mean_curvature(action, p, h)))
    mn = moment_norm(action, mm, p)
    return MinimalityVerdict(H_norm=hn, mu_norm=mn, minimal=hn < tol,
                             moment_zero=mn < tol * np.sqrt(c))
