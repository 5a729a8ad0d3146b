"""Invariant suite for one scenario: every applicable law, one row per check."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OrbitflowError
from .kaehler import (exponential_law_residual, frozen_norm_law, is_isotropic_orbit,
                      is_lagrangian_point, minimal_iff_moment_zero, moment_ray_deviation,
                      verify_flow_moment_law, verify_moment_condition)
from .mcflow import (FlowParams, check_orthogonality, check_type_preservation, mcf,
                     mean_curvature, orbit_state, verify_monotonicity)
from .scenarios import ScenarioSpec, get_scenario

N_GRADIENT_POINTS = 100
N_MOMENT_POINTS = 32


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    skipped: bool = False

    @property
    def status(self) -> str:
        return "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")


def regular_samples(spec: ScenarioSpec, n: int, seed: int, min_ratio: float = 1e-6) -> list:
    """``n`` seeded random points on regular orbits away from the singular set."""
    act = spec.action
    out, s = [], seed
    while len(out) < n:
        for q in spec.manifold.sample(4 * n, s):
            if act.classify(q) == "Regular" and act.orbit_dim(q, min_ratio) == act.max_orbit_dim:
                out.append(q)
                if len(out) == n:
                    break
        s += 1
    return out


def gradient_oracle_error(spec: ScenarioSpec, points) -> float:
    worst = 0.0
    for q in points:
        fd = mean_curvature(spec.action, q)
        ref = spec.analytic_H(q)
        scale = max(np.linalg.norm(ref), 1.0)
        worst = max(worst, float(np.linalg.norm(fd - ref) / scale))
    return worst


def _guard(name, fn) -> Check:
    try:
        return fn()
    except OrbitflowError as exc:
        return Check(name, False, f"{type(exc).__name__}: {exc}")


def verify_scenario(name: str, seed: int = 0) -> list:
    spec = get_scenario(name)
    act, c = spec.action, spec.einstein_constant
    checks = []
    pts = regular_samples(spec, N_GRADIENT_POINTS, seed)

    if spec.analytic_H is not None:
        err = gradient_oracle_error(spec, pts)
        checks.append(Check("gradient_oracle", err < 1e-6, f"max rel err {err:.2e} at {len(pts)} pts"))

    bad = sum(not check_orthogonality(act, orbit_state(act, q)) for q in pts)
    checks.append(Check("orthogonality", bad == 0, f"{bad} violations at {len(pts)} pts"))

    p0 = spec.point()
    fwd = mcf(act, p0, FlowParams(direction="forward"), moment=spec.moment)
    bwd = mcf(act, p0, FlowParams(direction="backward"), moment=spec.moment)
    for label, tr in (("forward", fwd), ("backward", bwd)):
        gap = verify_monotonicity(tr)
        checks.append(Check(f"monotonicity_{label}", gap < 1e-3, f"max rel gap {gap:.2e}"))
        ok = check_type_preservation(tr)
        checks.append(Check(f"type_preservation_{label}", ok, f"dims {sorted(set(tr.orbit_dims.tolist()))}"))
        for s in tr.samples[:-1] if tr.terminal == "Collapse" else tr.samples:
            if not check_orthogonality(act, s):
                checks.append(Check(f"orthogonality_{label}", False, f"at t={s.t:.6g}"))
                break

    end = fwd.terminal_state
    ratio = end.vol2 / fwd.samples[0].vol2
    if fwd.terminal == "Collapse":
        ok = end.H_norm > 1e3 and ratio < 1e-12
    else:
        ok = fwd.terminal == "Converged" and end.H_norm < 1e-7
    checks.append(Check("dichotomy", ok, f"{fwd.terminal} at t={end.t:.6f}, |H|={end.H_norm:.3g}, "
                                          f"vol2 ratio={ratio:.3g}"))
    bend = bwd.terminal_state
    checks.append(Check("backward_converges", bwd.terminal == "Converged" and bend.H_norm < 1e-7,
                        f"{bwd.terminal} at t={bend.t:.4f}, |H|={bend.H_norm:.2e}"))

    if not spec.kaehler:
        return checks

    mpts = regular_samples(spec, N_MOMENT_POINTS, seed + 1000)
    res = max(verify_moment_condition(act, spec.moment, q) for q in mpts)
    checks.append(Check("moment_condition", res < 1e-6, f"max residual {res:.2e} (sign {spec.moment.sign:+.0f})"))
    means = spec.moment.quadrature_means(100_000, seed)
    checks.append(Check("canonical_mean_zero", bool(np.all(np.abs(means) < 0.01)),
                        "means " + ", ".join(f"{m:+.4f}" for m in means)))

    if not spec.lagrangian:
        iso, r = is_isotropic_orbit(act, mpts[0])
        why = "orbits not half-dimensional" if 2 * act.max_orbit_dim != spec.manifold.intrinsic_dim \
            else f"isotropy residual {r:.2e}"
        checks.append(Check("isotropy", True, f"not Lagrangian setup ({why}); "
                                                      "Lagrangian checks skipped", skipped=True))
        return checks

    iso = max(is_isotropic_orbit(act, q)[1] for q in mpts)
    checks.append(Check("isotropy", iso < 1e-10, f"max residual {iso:.2e}"))

    def moment_law():
        fit = verify_flow_moment_law(fwd, c)
        ok = abs(fit.fitted_rate - c) <= 0.01 * c
        return Check("exponential_rate", ok, f"fitted {fit.fitted_rate:.5f} vs c={c:g}")
    checks.append(_guard("exponential_rate", moment_law))

    e = exponential_law_residual(fwd, c)
    checks.append(Check("exponential_law", e < 5e-3, f"max ratio error {e:.2e}"))
    ray = moment_ray_deviation(fwd)
    checks.append(Check("moment_ray", ray < 1e-3, f"max direction change {ray:.2e}"))

    worst = 0.0
    for q in mpts:
        lhs, rhs = frozen_norm_law(act, spec.moment, q, c)
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    checks.append(Check("frozen_norm_law", worst < 1e-3, f"max rel gap {worst:.2e}"))

    tangent = all(is_lagrangian_point(act, spec.moment, s.p, rank_tol=tr.params.rank_tol)
                  for tr in (fwd, bwd) for s in tr.samples[:-1])
    checks.append(Check("lagrangian_tangency", tangent, "is_lagrangian_point along both flows"))

    v_end = minimal_iff_moment_zero(act, spec.moment, bend.p, c)
    v_gen = [minimal_iff_moment_zero(act, spec.moment, q, c) for q in mpts]
    ok = v_end.minimal and v_end.moment_zero and all(v.consistent for v in v_gen)
    checks.append(Check("minimal_iff_moment_zero", ok,
                        f"terminal |H|={v_end.H_norm:.2e} |mu|={v_end.mu_norm:.2e}; "
                        f"{sum(v.consistent for v in v_gen)}/{len(v_gen)} consistent"))
    return checks


def format_report(name: str, checks: list) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"verify {name}"]
    lines += [f"  {c.status:4s}  {c.name:<{width}}  {c.detail}" for c in checks]
    failed = sum(c.status == "FAIL" for c in checks)
    lines.append(f"  {'all checks passed' if not failed else f'{failed} check(s) failed'}")
    return "\n".join(lines)
