"""Mean curvature flow of group orbits as an ODE on the ambient manifold.

The orbit volume squared is the Gram determinant of the fundamental fields
(up to a constant that cancels everywhere below), and the mean curvature of
the orbit through ``p`` is ``H = -grad(vol2) / (2 vol2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .actions import Action
from .errors import SingularOrbit
from .numcore import StepControl, fd_tangent_gradient, integrate, time_derivative

VOL2_FLOOR = 1e-300


def vol_squared(action: Action, p: np.ndarray) -> float:
    """Gram determinant at ``p``; 0 on singular orbits.

    Computed as the product of squared singular values of the field matrix,
    which equals ``det gram(p)`` but keeps full relative accuracy as the
    orbit degenerates (forming the Gram first loses about ``eps / vol2``).
    When the principal orbits have dimension below the number of generators
    (e.g. SO(3) on S^2) only the top ``max_orbit_dim`` values enter, since
    the determinant would vanish identically.
    """
    sv = np.linalg.svd(action.fields(p), compute_uv=False)
    return float(np.prod(sv[:action.max_orbit_dim] ** 2))


def mean_curvature(action: Action, p: np.ndarray, h: float = 1e-4,
                   analytic: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                   order: int = 4) -> np.ndarray:
    """Mean curvature vector of the orbit through ``p``.

    ``analytic`` replaces the finite-difference field (used only by oracle
    tests). The default fourth-order stencil keeps the truncation error far
    below the convergence threshold near minimal orbits; with second order it
    is about ``h**2`` and leaks into orbit directions. Raises
    ``SingularOrbit`` if the orbit volume has underflowed.
    """
    if analytic is not None:
        return np.asarray(analytic(p), dtype=float)
    v2 = vol_squared(action, p)
    if v2 < VOL2_FLOOR:
        raise SingularOrbit(f"vol2 = {v2:.3g} at singular orbit")
    grad = fd_tangent_gradient(lambda q: vol_squared(action, q), p, action.manifold, h, order)
    return -0.5 * grad / v2


@dataclass
class OrbitState:
    t: float
    p: np.ndarray
    vol2: float
    H: np.ndarray
    H_norm: float
    orbit_dim: int
    mu: Optional[object] = None
    isotropy_residual: Optional[float] = None
    # exact signed integrator step that produced this sample (0 for the first)
    dt: float = 0.0


@dataclass(frozen=True)
class FlowParams:
    direction: str = "forward"
    t_max: float = 30.0
    collapse_vol2_ratio: float = 1e-12
    collapse_H_norm: float = 1e6
    converged_H_norm: float = 1e-8
    converged_count: int = 3
    # rank cut used for per-sample orbit_dim; tighter than the default 1e-8 so
    # that only the collapse sample itself can register a dimension drop
    rank_tol: float = 1e-14
    fd_step: float = 1e-4
    # cap on |d log vol2| per step: keeps samples dense near a collapse
    max_dlogvol: float = 0.1
    step: StepControl = StepControl()

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if min(self.collapse_vol2_ratio, self.collapse_H_norm, self.converged_H_norm) <= 0:
            raise ValueError("thresholds must be positive")
        if self.collapse_vol2_ratio >= 1:
            raise ValueError("collapse_vol2_ratio must be < 1")

    def with_overrides(self, **kw) -> "FlowParams":
        step_keys = {k: kw.pop(k) for k in list(kw) if k in StepControl.__dataclass_fields__}
        step = replace(self.step, **step_keys) if step_keys else self.step
        return replace(self, step=step, **kw)


@dataclass
class FlowTrace:
    samples: list
    terminal: str
    direction: str
    vanishing: Optional[list] = None
    n_rejected: int = 0
    params: Optional[FlowParams] = field(default=None, repr=False)

    @property
    def terminal_state(self) -> OrbitState:
        return self.samples[-1]

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def vol2(self) -> np.ndarray:
        return np.array([s.vol2 for s in self.samples])

    @property
    def H_norm(self) -> np.ndarray:
        return np.array([s.H_norm for s in self.samples])

    @property
    def orbit_dims(self) -> np.ndarray:
        return np.array([s.orbit_dim for s in self.samples])


def orbit_state(action: Action, p: np.ndarray, t: float = 0.0, *, h: float = 1e-4,
                rank_tol: float = 1e-8, moment=None, analytic=None) -> OrbitState:
    v2 = vol_squared(action, p)
    if v2 >= VOL2_FLOOR:
        H = mean_curvature(action, p, h, analytic)
        hn = float(np.linalg.norm(H))
    else:
        H = np.full_like(p, np.nan)
        hn = float("inf")
    state = OrbitState(t=t, p=np.array(p, dtype=float), vol2=v2, H=H, H_norm=hn,
                       orbit_dim=action.orbit_dim(p, rank_tol))
    if moment is not None:
        state.mu = moment(p)
        state.isotropy_residual = action.isotropy_residual(p)
    return state


def mcf(action: Action, p0: np.ndarray, params: FlowParams = FlowParams(), *,
        moment=None, analytic=None) -> FlowTrace:
    """Run forward or backward mean curvature flow of the orbit through ``p0``.

    Terminal events: ``Collapse`` once vol2 drops below
    ``collapse_vol2_ratio * vol2(p0)`` (also when the step size underflows
    while ``H_norm > collapse_H_norm``, i.e. the integrator is stalled by the
    blow-up), ``Converged`` after ``converged_count`` consecutive samples with
    ``H_norm < converged_H_norm``, otherwise ``TimeLimit``, ``StepUnderflow``
    or ``MaxSteps``. ``moment`` (a callable returning a moment value) adds
    moment and isotropy diagnostics to every sample.
    """
    man = action.manifold
    p0 = man.retract(p0)
    sign = 1.0 if params.direction == "forward" else -1.0
    vol2_0 = vol_squared(action, p0)
    if vol2_0 < VOL2_FLOOR:
        raise SingularOrbit("flow must start on a regular orbit")

    def field_fn(y):
        # H o retract: a smooth extension to a neighbourhood for the RK stages
        return mean_curvature(action, man.retract(y), params.fd_step, analytic)

    samples: list = []
    below = [0]

    def watch(t, y):
        st = orbit_state(action, y, t, h=params.fd_step, rank_tol=params.rank_tol,
                         moment=moment, analytic=analytic)
        samples.append(st)
        if st.vol2 < params.collapse_vol2_ratio * vol2_0:
            return "Collapse"
        below[0] = below[0] + 1 if st.H_norm < params.converged_H_norm else 0
        if below[0] >= params.converged_count:
            return "Converged"
        return None

    def cap(t, y):
        hn = samples[-1].H_norm
        return params.max_dlogvol / (2.0 * hn * hn) if hn > 0 else np.inf

    traj = integrate(field_fn, p0, (0.0, sign * params.t_max), params.step,
                     events=[watch], retract=man.retract, max_step=cap)
    for st, hs in zip(samples, traj.steps):
        st.dt = hs
    terminal = traj.terminal
    if terminal == "StepUnderflow" and samples[-1].H_norm > params.collapse_H_norm:
        terminal = "Collapse"
    trace = FlowTrace(samples=samples, terminal=terminal, direction=params.direction,
                      n_rejected=traj.n_rejected, params=params)
    if terminal == "Collapse":
        # the collapse sample is judged with the default rank cut, like its kernel
        samples[-1].orbit_dim = action.orbit_dim(samples[-1].p)
        trace.vanishing = action.vanishing_directions(samples[-1].p)
    return trace


def verify_monotonicity(trace: FlowTrace, floor: float = 1e-6, abs_floor: float = 1e-8,
                        width: int = 3) -> float:
    """Max relative gap between d/dt (log vol2)/2 and -|H|^2 at interior samples.

    Relative errors are taken against ``max(|H|^2, floor * peak |H|^2, abs_floor)``
    so that numerically stationary stretches do not divide noise by noise. A
    terminal Collapse sample only enters as a stencil node. The time
    derivative uses ``2*width + 1`` nodes; the default sixth-order stencil
    resolves the exponential approach to a minimal orbit, where accepted
    steps are large compared with the relaxation time.
    """
    s = trace.samples
    n_eval = len(s) - 1 if trace.terminal == "Collapse" else len(s)
    if n_eval < 3:
        raise ValueError("need at least 3 samples")
    t = np.array([x.t for x in s])
    lv = 0.5 * np.log(np.array([x.vol2 for x in s]))
    h2 = np.array([x.H_norm for x in s])[:n_eval] ** 2
    steps = np.array([x.dt for x in s])
    dl = time_derivative(t, lv, width=width, steps=steps)[1:n_eval - 1]
    rhs = -h2[1:-1]
    peak = float(np.max(h2))
    denom = np.maximum(np.abs(rhs), max(floor * peak, abs_floor))
    return float(np.max(np.abs(dl - rhs) / denom))


def check_type_preservation(trace: FlowTrace) -> bool:
    dims = trace.orbit_dims
    if trace.terminal == "Collapse":
        dims = dims[:-1]
    return bool(dims.size == 0 or np.all(dims == dims[0]))


def check_orthogonality(action: Action, state: OrbitState, rel: float = 1e-6,
                        floor: float = 1e-7) -> bool:
    """H is orthogonal to every fundamental field at the sample.

    ``floor`` absorbs the absolute finite-difference error of H (about
    ``h**2`` for step ``h``), which dominates near minimal orbits.
    """
    if not np.all(np.isfinite(state.H)):
        return True
    x = action.fields(state.p)
    for xi in x:
        n = np.linalg.norm(xi)
        if abs(np.dot(state.H, xi)) > rel * state.H_norm * n + floor * n:
            return False
    return True
