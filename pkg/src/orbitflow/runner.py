"""Flow runs, sweeps and their on-disk formats (trace CSV, summary JSON)."""
from __future__ import annotations

import csv
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateGram
from .kaehler import moment_norm
from .mcflow import FlowParams, FlowTrace, check_orthogonality, check_type_preservation, mcf
from .numcore import StepControl
from .scenarios import ScenarioSpec, get_scenario

DEFAULT_OUT = "orbitflow_out"
EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_NUMERIC = 0, 1, 2, 3
OK_TERMINALS = ("Collapse", "Converged", "TimeLimit")

FLOW_KEYS = {k for k in FlowParams.__dataclass_fields__ if k != "step"}
STEP_KEYS = set(StepControl.__dataclass_fields__)


def default_output_dir() -> Path:
    return Path(os.environ.get("ORBITFLOW_OUT", DEFAULT_OUT))


@dataclass
class RunConfig:
    scenario: str
    direction: str = "forward"
    t_max: float = 30.0
    overrides: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    output_dir: Optional[str] = None
    seed: int = 0

    def flow_params(self) -> FlowParams:
        bad = set(self.overrides) - FLOW_KEYS - STEP_KEYS
        if bad:
            raise KeyError(f"unknown parameter(s) {sorted(bad)}")
        return FlowParams(direction=self.direction, t_max=self.t_max).with_overrides(**self.overrides)


def _fmt(x) -> str:
    return repr(float(x))


def trace_header(spec: ScenarioSpec) -> list:
    d = spec.manifold.ambient_dim
    cols = ["t"] + [f"p_{i}" for i in range(d)] + ["vol2", "H_norm", "orbit_dim"]
    if spec.kaehler:
        cols += [f"mu_{i}" for i in range(spec.action.k)] + ["isotropy_residual"]
    return cols


def write_trace(path, spec: ScenarioSpec, trace: FlowTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(spec))
        for s in trace.samples:
            row = [_fmt(s.t)] + [_fmt(x) for x in spec.manifold.output_gauge(s.p)]
            hn = s.H_norm if np.isfinite(s.H_norm) else np.finfo(float).max
            row += [_fmt(s.vol2), _fmt(hn), str(s.orbit_dim)]
            if spec.kaehler:
                row += [_fmt(m) for m in s.mu.coeffs] + [_fmt(s.isotropy_residual)]
            w.writerow(row)


def read_trace(path) -> tuple:
    """(header, float array) of a trace CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def terminal_mu_norm(spec: ScenarioSpec, p) -> Optional[float]:
    if not spec.kaehler:
        return None
    try:
        return moment_norm(spec.action, spec.moment, p)
    except DegenerateGram:
        return None


def summarize(spec: ScenarioSpec, cfg: RunConfig, trace: FlowTrace, violations: list) -> dict:
    end = trace.terminal_state
    return {
        "scenario": spec.name,
        "direction": trace.direction,
        "terminal": trace.terminal,
        "t_final": float(end.t),
        "vol2_final": float(end.vol2),
        "H_norm_final": float(end.H_norm) if np.isfinite(end.H_norm) else None,
        "mu_final": end.mu.coeffs.tolist() if end.mu is not None else None,
        "vanishing_directions": [v.tolist() for v in trace.vanishing] if trace.vanishing else None,
        "n_samples": len(trace.samples),
        "invariant_violations": violations,
        "config": asdict(cfg),
    }


def run_invariants(spec: ScenarioSpec, trace: FlowTrace) -> list:
    """Per-run checks; returns a list of violation messages (empty when clean)."""
    out = []
    s = trace.samples
    resid = max(spec.manifold.constraint_residual(x.p) for x in s)
    if resid >= 1e-10:
        out.append(f"constraint residual {resid:.3g}")
    if not all(check_orthogonality(spec.action, x) for x in s):
        out.append("H not orthogonal to the orbit")
    if not check_type_preservation(trace):
        out.append("orbit dimension changed along the flow")
    v = trace.vol2
    sign = 1.0 if trace.direction == "forward" else -1.0
    jumps = sign * np.diff(v)
    if np.any(jumps > 1e-12 * np.maximum(v[1:], v[:-1])):
        out.append("vol2 not monotone along the flow")
    return out


def execute(cfg: RunConfig) -> tuple:
    """Run one flow. Returns (spec, trace, violations)."""
    spec = get_scenario(cfg.scenario)
    params = cfg.flow_params()
    p0 = spec.point(**cfg.init)
    trace = mcf(spec.action, p0, params, moment=spec.moment)
    return spec, trace, run_invariants(spec, trace)


def exit_code(trace: FlowTrace, violations: list) -> int:
    if trace.terminal not in OK_TERMINALS:
        return EXIT_NUMERIC
    return EXIT_INVARIANT if violations else EXIT_OK


def run(cfg: RunConfig) -> tuple:
    """Execute, write ``<scenario>_<direction>.csv`` and ``..._summary.json``.

    Returns (exit code, summary dict).
    """
    spec, trace, violations = execute(cfg)
    out = Path(cfg.output_dir) if cfg.output_dir else default_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{spec.name}_{trace.direction}"
    write_trace(out / f"{stem}.csv", spec, trace)
    summary = summarize(spec, cfg, trace, violations)
    (out / f"{stem}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return exit_code(trace, violations), summary


def parse_grid(spec_text: str) -> dict:
    """``"z0=0.1:0.9:9"`` or ``"b1=0.1,0.2;b2=0.1:0.4:4"`` -> {name: values}."""
    grid = {}
    for part in filter(None, (s.strip() for s in spec_text.split(";"))):
        name, _, rhs = part.partition("=")
        if not rhs:
            raise ValueError(f"bad grid entry {part!r}")
        if ":" in rhs:
            a, b, n = rhs.split(":")
            vals = np.round(np.linspace(float(a), float(b), int(n)), 12).tolist()
        else:
            vals = [float(x) for x in rhs.split(",")]
        grid[name.strip()] = vals
    if not grid:
        raise ValueError("empty grid")
    return grid


SWEEP_COLUMNS = ["terminal", "t_final", "vol2_final", "mu_norm_final", "type_preserved",
                 "exit_code"]


def _sweep_cell(args):
    cfg, trace_path = args
    spec, trace, violations = execute(cfg)
    write_trace(trace_path, spec, trace)
    end = trace.terminal_state
    mn = terminal_mu_norm(spec, end.p)
    return [trace.terminal, _fmt(end.t), _fmt(end.vol2), "nan" if mn is None else _fmt(mn),
            str(int(check_type_preservation(trace))), str(exit_code(trace, violations))]


def sweep(scenario: str, grid: dict, direction: str = "forward", seed: int = 0,
          overrides: Optional[dict] = None, t_max: float = 30.0,
          output_dir: Optional[str] = None, jobs: int = 1) -> Path:
    """Run one flow per grid cell; write the aggregate CSV and per-cell traces."""
    spec = get_scenario(scenario)
    unknown = set(grid) - set(spec.defaults)
    if unknown:
        raise KeyError(f"unknown initial-point parameters {sorted(unknown)} for {scenario}")
    out = Path(output_dir) if output_dir else default_output_dir()
    cell_dir = out / f"{scenario}_{direction}_sweep"
    cell_dir.mkdir(parents=True, exist_ok=True)
    names = list(grid)
    cells = list(itertools.product(*(grid[n] for n in names)))
    tasks = []
    for i, values in enumerate(cells):
        cfg = RunConfig(scenario=scenario, direction=direction, t_max=t_max,
                        overrides=dict(overrides or {}), init=dict(zip(names, values)),
                        output_dir=str(out), seed=seed)
        tasks.append((cfg, cell_dir / f"cell_{i:04d}.csv"))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, tasks))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    path = out / f"{scenario}_{direction}_sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + SWEEP_COLUMNS)
        for values, row in zip(cells, rows):
            w.writerow([_fmt(v) for v in values] + row)
    return path
