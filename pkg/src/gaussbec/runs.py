"""Time-series and interspecies-coupling sweeps built on the core modules."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .config import RunConfig
from .gaussian import (
    analyze,
    entanglement_parameter,
    evolve_covariance,
    standard_form,
    thermal_covariance,
    vacuum_covariance,
)
from .model import ModelParams, critical_coupling, extended_space_limit, normal_modes
from .propagator import UnstableParametersError, propagator, propagator_at_phases
from .spin import (
    OCCUPATION_WARN,
    SpinBasis,
    build_hamiltonian,
    evolve_many,
    initial_state,
    occupation_fraction,
    spin_covariance,
)

log = logging.getLogger(__name__)

TIMESERIES_COLUMNS = ("t", "xi", "eof", "n", "c", "epr", "f_a", "f_b", "backend")
SWEEP_COLUMNS = ("kappa", "stable", "min_xi", "t_at_min", "eof_at_min", "above_kappa_e")


@dataclass(frozen=True)
class TimeSeriesRow:
    t: float
    xi: float
    eof: Optional[float]
    n: float
    c: float
    epr: float
    f_a: Optional[float]
    f_b: Optional[float]
    backend: str


@dataclass(frozen=True)
class SweepRow:
    kappa: float
    stable: bool
    min_xi: Optional[float]
    t_at_min: Optional[float]
    eof_at_min: Optional[float]
    above_kappa_e: bool


def default_dt(params: ModelParams) -> float:
    """A fortieth of the fastest normal-mode period."""
    return 2 * math.pi / normal_modes(params).omega_1 / 40


def time_grid(t_max: float, dt: float) -> np.ndarray:
    count = int(math.floor(t_max / dt + 1e-9))
    return dt * np.arange(count + 1)


def initial_covariance(config: RunConfig) -> np.ndarray:
    if config.initial.kind == "thermal":
        return thermal_covariance(config.initial.nbar_a, config.initial.nbar_b)
    return vacuum_covariance()


def hpt_xi(params: ModelParams, M0: np.ndarray, t: float) -> float:
    return analyze(evolve_covariance(M0, propagator(params, t))).xi


def hpt_rows(params: ModelParams, M0: np.ndarray, times) -> list[TimeSeriesRow]:
    rows = []
    for t in times:
        rep = analyze(evolve_covariance(M0, propagator(params, t)))
        rows.append(TimeSeriesRow(float(t), rep.xi, rep.eof, rep.n, rep.c, rep.epr, None, None, "hpt"))
    return rows


def exact_rows(params: ModelParams, times, method: str = "auto") -> list[TimeSeriesRow]:
    """Rows from exact spin evolution; quadratures use the mean-spin normalization."""
    H = build_hamiltonian(params)
    psi0 = initial_state(SpinBasis.for_params(params))
    rows = []
    warned = False
    for state in evolve_many(H, psi0, times, method):
        f_a, f_b = occupation_fraction(state)
        if max(f_a, f_b) > OCCUPATION_WARN and not warned:
            log.warning(
                "occupation fraction %.3f exceeds %.2f at t=%g: oscillator approximation unreliable",
                max(f_a, f_b), OCCUPATION_WARN, state.time,
            )
            warned = True
        rep = analyze(spin_covariance(state, params, normalization="mean_spin"))
        rows.append(TimeSeriesRow(state.time, rep.xi, rep.eof, rep.n, rep.c, rep.epr, f_a, f_b, "exact"))
    return rows


def run_timeseries(config: RunConfig) -> list[TimeSeriesRow]:
    """Rows for t = 0, dt, ..., t_max for each requested backend.

    Raises :class:`UnstableParametersError` if the oscillator backend is
    requested for unstable parameters.
    """
    params = config.model_params()
    dt = config.dt or default_dt(params)
    times = time_grid(config.t_max, dt)
    rows: list[TimeSeriesRow] = []
    if config.backend in ("hpt", "both"):
        if not normal_modes(params).stable:
            raise UnstableParametersError(
                f"|kappa| = {abs(params.kappa):g} >= kappa_c = {critical_coupling(params):.6g}"
            )
        rows += hpt_rows(params, initial_covariance(config), times)
    if config.backend in ("exact", "both"):
        rows += exact_rows(params, times, config.exact_method)
    return rows


def sweep_point(params: ModelParams, M0: np.ndarray, t_max: float, dt: Optional[float] = None) -> SweepRow:
    """Smallest entanglement parameter reached for t in [0, t_max].

    The sampled minimum is polished with a bounded scalar search over the
    two neighbouring sample intervals.
    """
    above = abs(params.kappa) > extended_space_limit(params)
    if not normal_modes(params).stable:
        return SweepRow(params.kappa, False, None, None, None, above)
    dt = dt or default_dt(params)
    times = time_grid(t_max, dt)
    xis = np.array([hpt_xi(params, M0, t) for t in times])
    k = int(np.argmin(xis))
    t_best, xi_best = float(times[k]), float(xis[k])
    if len(times) > 1:
        lo, hi = max(0.0, t_best - dt), min(t_max, t_best + dt)
        res = minimize_scalar(
            lambda t: hpt_xi(params, M0, t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10}
        )
        if res.fun < xi_best:
            t_best, xi_best = float(res.x), float(res.fun)
    rep = analyze(evolve_covariance(M0, propagator(params, t_best)))
    return SweepRow(params.kappa, True, xi_best, t_best, rep.eof, above)


TORUS_GRID = 32
TORUS_STARTS = 4


def _phase_xi(params: ModelParams, M0: np.ndarray, theta) -> float:
    return entanglement_parameter(standard_form(evolve_covariance(M0, propagator_at_phases(params, theta[0], theta[1]))))


def long_time_point(params: ModelParams, M0: np.ndarray) -> SweepRow:
    """Infimum of the entanglement parameter over unbounded time.

    U(t) depends on t only through the phases (omega_1 t, omega_2 t), so the
    long-time infimum is the minimum over the phase torus. A coarse grid
    seeds a few Nelder-Mead polishes. ``t_at_min`` is left empty.
    """
    above = abs(params.kappa) > extended_space_limit(params)
    if not normal_modes(params).stable:
        return SweepRow(params.kappa, False, None, None, None, above)
    g = np.linspace(0.0, 2 * math.pi, TORUS_GRID, endpoint=False)
    vals = np.array([[_phase_xi(params, M0, (a, b)) for b in g] for a in g])
    best = (float(vals.min()), (0.0, 0.0))
    for flat in np.argsort(vals, axis=None)[:TORUS_STARTS]:
        i, k = np.unravel_index(flat, vals.shape)
        res = minimize(
            lambda th: _phase_xi(params, M0, th),
            (g[i], g[k]),
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-13},
        )
        if res.fun <= best[0]:
            best = (float(res.fun), tuple(res.x))
    theta = best[1]
    rep = analyze(evolve_covariance(M0, propagator_at_phases(params, *theta)))
    return SweepRow(params.kappa, True, rep.xi, None, rep.eof, above)


def _sweep_task(args):
    window, *rest = args
    if window == "long_time":
        return long_time_point(rest[0], rest[1])
    return sweep_point(*rest)


def run_sweep(config: RunConfig, kappa_grid=None, jobs: Optional[int] = None) -> list[SweepRow]:
    """One :class:`SweepRow` per grid value, in grid order."""
    grid = list(kappa_grid if kappa_grid is not None else (config.kappa_grid or [config.params.kappa]))
    jobs = jobs or config.jobs
    M0 = initial_covariance(config)
    tasks = [
        (config.sweep_window, config.model_params(kappa=float(k)), M0, config.t_max, config.dt) for k in grid
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_task, tasks))
    return [_sweep_task(task) for task in tasks]
