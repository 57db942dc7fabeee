"""Built-in verification matrix: nine numbered criteria over six scenarios.

The matrix covers {2d, 3d-above-threshold, 3d-below-threshold} x {moderate,
small} couplings, all with e1 = 0, e2 = 1, cutoff 1.  Each criterion checks a
distinct property at a fixed tolerance: measure normalization, threshold
reproduction, late-time plateau vs decay, cross-route agreement, short-time
law, weak-coupling exponential rate, eigenvalue correctness against a
brute-force oracle, and byte determinism of rendered artifacts.

``run_matrix`` computes every scenario once, evaluates all criteria, writes
the scenario artifacts plus a verify_report.json into the output directory,
and returns the per-criterion results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts
from .cli import Scenario, SweepSpec, sweep_point
from .coupling import CouplingFamily, CouplingModel, coupling_sq, l2_norm_sq
from .evolution import (
    AmplitudeSeries,
    amplitude_spectral,
    asymptotic_limit,
    fitted_decay_rate,
    weak_coupling_rate,
)
from .quadrature import QuadratureConfig
from .spectrum import (
    ModelParams,
    NoEigenvalueError,
    SpectralData,
    build_spectral_data,
    find_eigenvalue,
    threshold_check,
)
from .volterra import richardson_ratio, solve_ide


@dataclass(frozen=True)
class MatrixScenario:
    name: str
    family: CouplingFamily
    g_sq: float
    has_eigenvalue: bool

    def params(self) -> ModelParams:
        return ModelParams(0.0, 1.0, CouplingModel(self.family, self.g_sq, 1.0))


MATRIX: tuple[MatrixScenario, ...] = (
    MatrixScenario("2d-moderate", CouplingFamily.TWO_DIM_EXP, 0.5, True),
    MatrixScenario("2d-small", CouplingFamily.TWO_DIM_EXP, 0.1, True),
    MatrixScenario("3d-above-moderate", CouplingFamily.THREE_DIM_EXP, 2.0, True),
    MatrixScenario("3d-above-small", CouplingFamily.THREE_DIM_EXP, 1.2, True),
    MatrixScenario("3d-below-moderate", CouplingFamily.THREE_DIM_EXP, 0.5, False),
    MatrixScenario("3d-below-small", CouplingFamily.THREE_DIM_EXP, 0.01, False),
)

_WINDOW_T = 200.0          # window start in units of 1/gap; window is [T, 2T]
_CROSS_T = 50.0            # cross-route comparison horizon
_SERIES_POINTS = 2001
_VOLTERRA_STEP = 0.01


@dataclass(frozen=True)
class CriterionResult:
    cid: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.cid} [{status}] {self.name}: {self.detail}"


@dataclass
class ScenarioRun:
    scenario: MatrixScenario
    params: ModelParams
    spec: SpectralData
    spectral: AmplitudeSeries
    vol: AmplitudeSeries


def _compute_run(ms: MatrixScenario, cfg: QuadratureConfig) -> ScenarioRun:
    params = ms.params()
    spec = build_spectral_data(params, cfg=cfg)
    horizon = 2.0 * _WINDOW_T / params.level_gap
    dt = horizon / (_SERIES_POINTS - 1)
    per_output = max(1, int(math.ceil(dt / _VOLTERRA_STEP)))
    vol_full = solve_ide(params, horizon=horizon, step=dt / per_output)
    vol = artifacts.subsample(vol_full, per_output)
    spectral = amplitude_spectral(spec, vol.times, cfg)
    return ScenarioRun(ms, params, spec, spectral, vol)


def _window_mean(series: AmplitudeSeries, t_lo: float, t_hi: float) -> float:
    mask = (series.times >= t_lo) & (series.times <= t_hi)
    return float(series.probability[mask].mean())


def _check_normalization(runs: list[ScenarioRun]) -> CriterionResult:
    worst = max(r.spec.normalization_defect for r in runs)
    return CriterionResult(
        1, "spectral-measure normalization",
        worst <= 1e-6,
        f"max |w + mass + tail - 1| = {worst:.3e} (tolerance 1e-6)",
    )


def _eigenvalue_exists(params: ModelParams, cfg: QuadratureConfig) -> bool:
    try:
        e0 = find_eigenvalue(params, cfg)
    except NoEigenvalueError:
        return False
    return e0 < params.e1


def _check_threshold(cfg: QuadratureConfig) -> CriterionResult:
    failures = []
    for g_sq, expected in ((0.9, False), (1.1, True)):
        params = ModelParams(0.0, 1.0, CouplingModel(CouplingFamily.THREE_DIM_EXP, g_sq, 1.0))
        got = _eigenvalue_exists(params, cfg)
        agrees = got == expected == threshold_check(params).exists
        if not agrees:
            failures.append(f"3d g2={g_sq}: solver={got}, expected={expected}")
    for g_sq in (1e-3, 0.1, 1.0):
        params = ModelParams(0.0, 1.0, CouplingModel(CouplingFamily.TWO_DIM_EXP, g_sq, 1.0))
        if not _eigenvalue_exists(params, cfg):
            failures.append(f"2d g2={g_sq}: no eigenvalue found")
    return CriterionResult(
        2, "threshold reproduction",
        not failures,
        "; ".join(failures) if failures else
        "3d exists iff g2 above gap at +-10%; 2d exists for g2 in {1e-3, 0.1, 1}",
    )


def _check_plateau(runs: list[ScenarioRun]) -> CriterionResult:
    details, ok = [], True
    for run in runs:
        if not run.scenario.has_eigenvalue:
            continue
        target = asymptotic_limit(run.spec)
        for series, tag in ((run.spectral, "spectral"), (run.vol, "volterra")):
            got = _window_mean(series, _WINDOW_T, 2.0 * _WINDOW_T)
            if abs(got - target) > 1e-2:
                ok = False
                details.append(f"{run.scenario.name}/{tag}: |{got:.4f} - {target:.4f}| > 1e-2")
    return CriterionResult(
        3, "non-decay above threshold",
        ok,
        "; ".join(details) if details else
        "window mean of P on [T, 2T] matches w^2 within 1e-2 on both routes",
    )


def _check_decay(runs: list[ScenarioRun]) -> CriterionResult:
    details, ok = [], True
    for run in runs:
        if run.scenario.has_eigenvalue:
            continue
        for series, tag in ((run.spectral, "spectral"), (run.vol, "volterra")):
            got = _window_mean(series, _WINDOW_T, 2.0 * _WINDOW_T)
            if got >= 1e-2:
                ok = False
                details.append(f"{run.scenario.name}/{tag}: window mean {got:.3e} >= 1e-2")
    return CriterionResult(
        4, "decay below threshold",
        ok,
        "; ".join(details) if details else
        "window mean of P on [T, 2T] below 1e-2 on both routes",
    )


def _check_cross_route(runs: list[ScenarioRun]) -> CriterionResult:
    details, ok = [], True
    worst = 0.0
    for run in runs:
        mask = run.spectral.times <= _CROSS_T / run.params.level_gap
        dev = float(np.max(np.abs(
            run.spectral.amplitude[mask] - run.vol.amplitude[mask]
        )))
        worst = max(worst, dev)
        if dev > 1e-3:
            ok = False
            details.append(f"{run.scenario.name}: max |C_s - C_v| = {dev:.2e} > 1e-3")
        ratio = richardson_ratio(run.params, _CROSS_T / run.params.level_gap, 0.04)
        if not 3.0 <= ratio <= 5.0:
            ok = False
            details.append(f"{run.scenario.name}: Richardson ratio {ratio:.2f} outside [3, 5]")
    return CriterionResult(
        5, "cross-route agreement",
        ok,
        "; ".join(details) if details else
        f"max deviation {worst:.2e} <= 1e-3; step-halving ratios in [3, 5]",
    )


def _check_short_time(runs: list[ScenarioRun], cfg: QuadratureConfig) -> CriterionResult:
    details, ok = [], True
    for run in runs:
        l2 = l2_norm_sq(run.params.coupling)
        t_star = 1e-2 / math.sqrt(l2)
        predicted = 1.0 - l2 * t_star**2
        vol = solve_ide(run.params, horizon=t_star, step=t_star / 16.0)
        spec_series = amplitude_spectral(run.spec, np.array([0.0, t_star]), cfg)
        for got, tag in (
            (float(vol.probability[-1]), "volterra"),
            (float(spec_series.probability[-1]), "spectral"),
        ):
            if abs(got - predicted) > 1e-5:
                ok = False
                details.append(
                    f"{run.scenario.name}/{tag}: |P({t_star:.4f}) - {predicted:.8f}| "
                    f"= {abs(got - predicted):.2e} > 1e-5"
                )
    return CriterionResult(
        6, "short-time quadratic law",
        ok,
        "; ".join(details) if details else
        "P(t*) = 1 - l2 t*^2 within 1e-5 on both routes for every scenario",
    )


def _check_weak_coupling(runs: list[ScenarioRun], cfg: QuadratureConfig) -> CriterionResult:
    run = next(r for r in runs if r.scenario.name == "3d-below-small")
    gamma = weak_coupling_rate(run.params, cfg).gamma
    fitted = fitted_decay_rate(run.spectral)
    rel = abs(fitted - gamma) / gamma
    return CriterionResult(
        7, "weak-coupling exponential rate",
        rel <= 0.15,
        f"fitted rate {fitted:.6f} vs 2*pi*|V(gap)|^2 = {gamma:.6f} "
        f"(relative error {rel:.3f}, tolerance 0.15)",
    )


def _simpson_blocks(f, edges: np.ndarray, n_per_block: int = 4097) -> float:
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xs = np.linspace(a, b, n_per_block)
        weights = np.ones(n_per_block)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        total += (xs[1] - xs[0]) / 3.0 * float(np.dot(weights, f(xs)))
    return total


def _oracle_k(params: ModelParams, lam: float) -> float:
    """Brute-force k(lam): fixed graded composite Simpson, no adaptivity."""
    model = params.coupling
    a = params.e1 - lam
    upper = 60.0 * model.cutoff
    geo = a * 2.0 ** np.arange(0, 64)
    geo = geo[geo < model.cutoff]
    tail = model.cutoff * np.arange(1.0, upper / model.cutoff + 1.0)
    edges = np.unique(np.concatenate([[0.0, a], geo, tail, [upper]]))

    def integrand(x):
        return coupling_sq(model, x) / (x + a)

    return _simpson_blocks(integrand, edges)


def _oracle_eigenvalue(params: ModelParams) -> float:
    """Plain bisection on the brute-force k; independent of the main solver."""
    lo = params.e1 - 8.0 * max(1.0, params.level_gap)
    hi = params.e1 - 1e-9 * params.coupling.cutoff

    def f_of(lam: float) -> float:
        return params.e2 - lam - _oracle_k(params, lam)

    f_lo, f_hi = f_of(lo), f_of(hi)
    if not (f_lo > 0.0 > f_hi):
        raise RuntimeError(f"oracle bracket invalid: F(lo)={f_lo!r}, F(hi)={f_hi!r}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if f_of(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check_eigenvalue_oracle(runs: list[ScenarioRun], cfg: QuadratureConfig) -> CriterionResult:
    details, ok = [], True
    worst = 0.0
    for run in runs:
        if not run.scenario.has_eigenvalue:
            continue
        e0 = run.spec.eigenvalue
        if not e0 < run.params.e1:
            ok = False
            details.append(f"{run.scenario.name}: e0 not strictly below e1")
            continue
        oracle = _oracle_eigenvalue(run.params)
        err = abs(e0 - oracle)
        worst = max(worst, err)
        if err > 1e-8:
            ok = False
            details.append(f"{run.scenario.name}: |e0 - oracle| = {err:.2e} > 1e-8")
    grid = [1.2, 1.5, 2.0, 3.0, 4.0]
    roots = [
        find_eigenvalue(
            ModelParams(0.0, 1.0, CouplingModel(CouplingFamily.THREE_DIM_EXP, g, 1.0)), cfg
        )
        for g in grid
    ]
    if not all(b < a for a, b in zip(roots[:-1], roots[1:])):
        ok = False
        details.append(f"e0 not strictly decreasing over g2 grid {grid}: {roots}")
    return CriterionResult(
        8, "eigenvalue solver correctness",
        ok,
        "; ".join(details) if details else
        f"max |e0 - oracle| = {worst:.2e} <= 1e-8; e0 < e1; e0 strictly decreasing in g2",
    )


def _sweep_scenarios(cfg: QuadratureConfig) -> list[tuple[str, Scenario]]:
    base3 = Scenario(
        name="verify-sweep-3d",
        params=ModelParams(0.0, 1.0, CouplingModel(CouplingFamily.THREE_DIM_EXP, 1.0, 1.0)),
        quadrature=cfg,
        horizon=1.0,
        sweep=SweepSpec("g_sq", (0.5, 0.9, 1.0, 1.1, 2.0)),
    )
    base2 = Scenario(
        name="verify-sweep-2d",
        params=ModelParams(0.0, 1.0, CouplingModel(CouplingFamily.TWO_DIM_EXP, 1.0, 1.0)),
        quadrature=cfg,
        horizon=1.0,
        sweep=SweepSpec("g_sq", (1e-3, 0.1, 1.0)),
    )
    return [("3d", base3), ("2d", base2)]


def _check_determinism(cfg: QuadratureConfig) -> CriterionResult:
    """Recompute one scenario's artifacts from scratch and byte-compare."""
    ms = next(m for m in MATRIX if m.name == "3d-below-moderate")

    def render() -> tuple[str, str, str]:
        spec = build_spectral_data(ms.params(), cfg=cfg)
        scenario = _sweep_scenarios(cfg)[0][1]
        rows = [sweep_point(scenario, v) for v in scenario.sweep.values]
        return (
            artifacts.render_density_csv(spec),
            artifacts.render_spectral_json(spec),
            artifacts.render_sweep_csv(rows),
        )

    first, second = render(), render()
    same = first == second
    return CriterionResult(
        9, "artifact determinism",
        same,
        "repeated renders byte-identical" if same else "renders differ between runs",
    )


def _write_artifacts(out_dir: Path, runs: list[ScenarioRun], cfg: QuadratureConfig) -> None:
    for run in runs:
        stem = out_dir / run.scenario.name
        artifacts.write_density_csv(Path(f"{stem}_density.csv"), run.spec)
        artifacts.write_spectral_json(Path(f"{stem}_spectral.json"), run.spec)
        artifacts.write_series_csv(Path(f"{stem}_spectral.csv"), run.spectral)
        artifacts.write_series_csv(Path(f"{stem}_volterra.csv"), run.vol)
        deviation = float(np.max(np.abs(run.spectral.amplitude - run.vol.amplitude)))
        artifacts.write_decay_json(
            Path(f"{stem}_decay.json"),
            p_infinity=asymptotic_limit(run.spec),
            gamma_estimate=weak_coupling_rate(run.params, cfg).gamma,
            max_deviation=deviation,
        )
    for _label, scenario in _sweep_scenarios(cfg):
        rows = [sweep_point(scenario, v) for v in scenario.sweep.values]
        artifacts.write_sweep_csv(out_dir / f"{scenario.name}_sweep.csv", rows)


def run_matrix(out_dir: Path | None = None) -> list[CriterionResult]:
    """Compute the scenario matrix, evaluate all criteria, write artifacts."""
    cfg = QuadratureConfig()
    runs = [_compute_run(ms, cfg) for ms in MATRIX]
    results = [
        _check_normalization(runs),
        _check_threshold(cfg),
        _check_plateau(runs),
        _check_decay(runs),
        _check_cross_route(runs),
        _check_short_time(runs, cfg),
        _check_weak_coupling(runs, cfg),
        _check_eigenvalue_oracle(runs, cfg),
        _check_determinism(cfg),
    ]
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_artifacts(out_dir, runs, cfg)
        artifacts.write_json(out_dir / "verify_report.json", {
            "all_passed": all(r.passed for r in results),
            "criteria": [
                {"id": r.cid, "name": r.name, "passed": r.passed, "detail": r.detail}
                for r in results
            ],
        })
    return results
