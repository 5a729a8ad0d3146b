"""Small dense numerics: log-determinants, manifold finite differences,
an adaptive Dormand-Prince integrator with retraction, and Monte Carlo means.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonSymmetric, OrbitflowError

SYM_TOL = 1e-12
DEGENERATE_RATIO = 1e-14
JITTER = 1e-14


def check_symmetric(m: np.ndarray, tol: float = SYM_TOL) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {m.shape}")
    if m.size and np.max(np.abs(m - m.T)) >= tol:
        raise NonSymmetric("matrix is not symmetric")
    return m


def logdet_psd(m: np.ndarray) -> Optional[float]:
    """Log-determinant of a symmetric positive semidefinite matrix.

    Returns ``None`` (the degenerate flag) when the smallest eigenvalue is
    below ``1e-14`` times the largest, which happens close to singular orbits.
    """
    m = check_symmetric(m)
    if m.shape[0] == 0:
        return 0.0
    eig = np.linalg.eigvalsh(m)
    if eig[-1] <= 0.0 or eig[0] < DEGENERATE_RATIO * eig[-1]:
        return None
    jittered = m + JITTER * np.trace(m) * np.eye(m.shape[0])
    chol = np.linalg.cholesky(jittered)
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def fd_tangent_gradient(f: Callable[[np.ndarray], float], p: np.ndarray, manifold,
                        h: float = 1e-4, order: int = 2) -> np.ndarray:
    """Riemannian gradient of ``f`` at ``p`` by central differences.

    Differences are taken along every ambient basis direction of
    ``f o retract`` and the result is projected onto the tangent space at
    ``p``. Truncation error is O(h**order); ``order`` is 2 or 4.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    p = np.asarray(p, dtype=float)
    offsets, weights = ((1.0,), (0.5,)) if order == 2 else ((1.0, 2.0), (2.0 / 3.0, -1.0 / 12.0))
    grad = np.zeros_like(p)
    for i in range(p.size):
        step = np.zeros_like(p)
        step[i] = h
        for k, w in zip(offsets, weights):
            grad[i] += w * (f(manifold.retract(p + k * step)) - f(manifold.retract(p - k * step)))
        grad[i] /= h
    return manifold.tangent_project(p, grad)


def quadrature_mean(f: Callable[[np.ndarray], float], manifold, n_samples: int,
                    seed: int) -> float:
    """Monte Carlo mean of ``f`` under the manifold's volume measure."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pts = manifold.sample(n_samples, seed)
    return float(np.mean([f(q) for q in pts]))


def fd_weights(x0: float, xs: Sequence[float], order: int = 1) -> np.ndarray:
    """Fornberg weights for the ``order``-th derivative at ``x0`` on nodes ``xs``."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def time_derivative(t: np.ndarray, y: np.ndarray, width: int = 2,
                    steps: Optional[np.ndarray] = None) -> np.ndarray:
    """d/dt of sampled ``y`` at each interior sample on a non-uniform grid.

    Each derivative uses ``2*width + 1`` consecutive nodes, centred where
    possible and shifted inwards near the ends. Endpoints get NaN.

    ``steps[j] = t[j] - t[j-1]`` as actually taken by the integrator; when
    given, stencil offsets are summed from these instead of differencing the
    absolute times, which lose all precision once steps fall near eps * |t|.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(y.shape, np.nan)
    n = t.size
    m = min(2 * width + 1, n)
    for i in range(1, n - 1):
        lo = min(max(i - width, 0), n - m)
        idx = slice(lo, lo + m)
        if steps is None:
            nodes = t[idx] - t[i]
        else:
            run = np.concatenate([[0.0], np.cumsum(steps[lo + 1:lo + m])])
            nodes = run - run[i - lo]
        out[i] = fd_weights(0.0, nodes) @ y[idx]
    return out


@dataclass(frozen=True)
class StepControl:
    h_init: float = 1e-3
    h_min: float = 1e-15
    h_max: float = 0.1
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_steps: int = 200_000
    # control the error per unit step (err / |h|) instead of per step
    per_unit_step: bool = False

    def __post_init__(self):
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass
class Trajectory:
    """Accepted samples of an integration run and the reason it stopped."""

    t: list = field(default_factory=list)
    y: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    terminal: str = "TimeLimit"
    n_rejected: int = 0


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
# PI gains are 0.7/q and 0.4/q with q the exponent of the controlled error
_PI_GAINS = (0.7, 0.4)


def _stage(field, y):
    k = np.asarray(field(y), dtype=float)
    if not np.all(np.isfinite(k)):
        raise FloatingPointError("non-finite field value")
    return k


def integrate(field: Callable[[np.ndarray], np.ndarray], p0: np.ndarray,
              t_span: tuple, ctl: StepControl = StepControl(),
              events: Sequence[Callable[[float, np.ndarray], Optional[str]]] = (),
              retract: Callable[[np.ndarray], np.ndarray] = lambda y: y,
              max_step: Optional[Callable[[float, np.ndarray], float]] = None) -> Trajectory:
    """Integrate the autonomous ODE ``y' = field(y)`` over ``t_span``.

    Embedded Dormand-Prince 4(5) pair with PI step-size control and local
    extrapolation. ``retract`` is applied to every accepted state (not to
    intermediate stages). ``t_span`` may run backwards in time.

    Every event predicate is called as ``event(t, y)`` on the initial state
    and after each accepted step; the first non-None return value becomes the
    terminal event. Step-size underflow and the step budget end the run with
    terminal ``"StepUnderflow"`` / ``"MaxSteps"`` rather than raising.
    Field evaluations that raise an orbitflow or floating-point error reject
    the step. ``max_step(t, y)``, if given, caps the step size taken from
    each accepted state.

    With ``ctl.per_unit_step`` the controlled quantity is the local error
    divided by ``|h|``; the global error then scales like ``rel_tol**1.25``
    instead of ``rel_tol``, at the price of many more steps near a blow-up.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    direction = 1.0 if t1 >= t0 else -1.0
    y = retract(np.asarray(p0, dtype=float))
    t = t0
    traj = Trajectory(t=[t], y=[y.copy()], steps=[0.0])

    def fire(tt, yy):
        for ev in events:
            name = ev(tt, yy)
            if name is not None:
                return name
        return None

    hit = fire(t, y)
    if hit is not None:
        traj.terminal = hit
        return traj
    if t1 == t0:
        return traj

    h = ctl.h_init
    q = 4.0 if ctl.per_unit_step else 5.0
    err_prev = 1.0
    k1 = None
    steps = 0
    while True:
        if steps >= ctl.max_steps:
            traj.terminal = "MaxSteps"
            return traj
        remaining = abs(t1 - t)
        if remaining <= 0.0:
            traj.terminal = "TimeLimit"
            return traj
        if max_step is not None:
            h = min(h, max(max_step(t, y), ctl.h_min))
        last = h >= remaining
        if last:
            h = remaining
        hs = direction * h
        try:
            if k1 is None:
                k1 = _stage(field, y)
            ks = [k1]
            for i in range(1, 7):
                yi = y + hs * sum(a * kk for a, kk in zip(_A[i], ks) if a != 0.0)
                ks.append(_stage(field, yi))
            y5 = y + hs * sum(b * kk for b, kk in zip(_B5, ks) if b != 0.0)
            errv = hs * sum(e * kk for e, kk in zip(_E, ks))
            scale = ctl.abs_tol + ctl.rel_tol * np.maximum(np.abs(y), np.abs(y5))
            err = float(np.sqrt(np.mean((errv / scale) ** 2)))
            if ctl.per_unit_step:
                err /= h
            if not np.isfinite(err):
                raise FloatingPointError("non-finite error estimate")
        except (OrbitflowError, FloatingPointError, np.linalg.LinAlgError):
            traj.n_rejected += 1
            h *= 0.25
            if h < ctl.h_min:
                traj.terminal = "StepUnderflow"
                return traj
            if k1 is not None and not np.all(np.isfinite(k1)):
                k1 = None
            continue

        if err <= 1.0:
            if last:
                hs = t1 - t
            t = t1 if last else t + hs
            y = retract(y5)
            # FSAL is only valid if retraction did not move the state
            k1 = ks[6] if np.array_equal(y, y5) else None
            traj.t.append(t)
            traj.y.append(y.copy())
            traj.steps.append(hs)
            steps += 1
            hit = fire(t, y)
            if hit is not None:
                traj.terminal = hit
                return traj
            if last:
                traj.terminal = "TimeLimit"
                return traj
            err = max(err, 1e-10)
            factor = _SAFETY * err ** (-_PI_GAINS[0] / q) * err_prev ** (_PI_GAINS[1] / q)
            h = min(ctl.h_max, h * min(5.0, max(0.2, factor)))
            err_prev = err
        else:
            traj.n_rejected += 1
            h *= max(0.2, _SAFETY * err ** (-1.0 / q))
        if h < ctl.h_min:
            traj.terminal = "StepUnderflow"
            return traj
