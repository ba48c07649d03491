"""Entropy balance, discrete H-theorem and conservation audits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .closure import _entropy_density, _entropy_increment
from .collisions import _production_species, _production_total
from .errors import ValidationError
from .model import CellState, Field1D, MixtureSpec
from .solver import (SolverConfig, U_TIE, divergence, face_neighbours, limit_face_velocities,
                     run_simulation, stable_dt, prepare, total_energy)


@dataclass
class EntropyReport:
    """Entropy density, flux and production per species and in total.

    Arrays carry a trailing cell axis.  ``D`` includes the alpha^2 factor;
    ``D_reduced`` is the same production with alpha set to one, i.e. the
    source term of the alpha-stripped balance law.
    """

    H_i: np.ndarray
    Phi_i: np.ndarray
    D_i: np.ndarray
    H: np.ndarray
    Phi: np.ndarray
    D: np.ndarray
    D_reduced: np.ndarray
    int_H: float
    int_D: float
    int_D_reduced: float
    balance_residual_max: float = math.nan


def _arrays(obj):
    if isinstance(obj, CellState):
        return obj.rho[:, None], obj.u[:, None, :], np.array([obj.T]), 1.0
    return obj.rho, obj.u, obj.T, obj.dx


def entropy_report(obj: Union[Field1D, CellState], spec: MixtureSpec, alpha: float) -> EntropyReport:
    """Evaluate entropy quantities cellwise and integrate them over the domain.

    A single ``CellState`` is treated as a one-cell field of unit width.
    """
    rho, u, T, dx = _arrays(obj)
    H_i = np.stack([_entropy_density(spec.m[i], spec.m0, spec.b[i], rho[i], T)
                    for i in range(spec.S)])
    Phi_i = alpha * H_i[..., None] * u
    D_i = np.stack([_production_species(spec, rho, u, T, alpha, i) for i in range(spec.S)])
    D = _production_total(spec, rho, u, T, alpha)
    D_red = _production_total(spec, rho, u, T, 1.0)
    H = H_i.sum(axis=0)
    return EntropyReport(H_i, Phi_i, D_i, H, Phi_i.sum(axis=0), D, D_red,
                         float(np.sum(H) * dx), float(np.sum(D) * dx), float(np.sum(D_red) * dx))


def integrated_entropy(f: Field1D, spec: MixtureSpec) -> float:
    H = sum(_entropy_density(spec.m[i], spec.m0, spec.b[i], f.rho[i], f.T) for i in range(spec.S))
    return float(np.sum(H) * f.dx)


def entropy_increment(prev: Field1D, new: Field1D, spec: MixtureSpec) -> float:
    """Change of the integrated entropy between two frames, free of cancellation."""
    dH = sum(_entropy_increment(spec.m[i], spec.m0, spec.b[i], prev.rho[i], new.rho[i],
                                prev.T, new.T) for i in range(spec.S))
    return float(np.sum(dH) * prev.dx)


@dataclass
class BalanceResidual:
    """Discrete residual of dH/dt + d/dx(sum_i H_i u_i) - D/alpha^2 per step."""

    residuals: list
    max_per_step: np.ndarray
    defect_per_step: np.ndarray
    max_norm: float
    max_defect: float
    raw_max_norm: Optional[float]


def _step_residual(prev: Field1D, new: Field1D, spec: MixtureSpec):
    dt = new.t - prev.t
    if not (dt > 0):
        raise ValidationError("frames must be ordered in time with positive spacing")
    N, bc, dx = prev.N, prev.boundary, prev.dx
    left, right = face_neighbours(N, bc)
    uf = new.u_face
    if uf is None:
        uf = limit_face_velocities(prev, spec, "equimolar")
    rl, rr = prev.rho[:, left], prev.rho[:, right]
    H_prev = np.stack([_entropy_density(spec.m[i], spec.m0, spec.b[i], prev.rho[i], prev.T)
                       for i in range(spec.S)])
    dH = sum(_entropy_increment(spec.m[i], spec.m0, spec.b[i], prev.rho[i], new.rho[i],
                                prev.T, new.T) for i in range(spec.S))
    s = H_prev / prev.rho
    sl, sr = s[:, left], s[:, right]
    # same upwinding as the mass flux, so the entropy is carried with the mass
    J = np.where(uf > U_TIE, rl * uf, np.where(uf < -U_TIE, rr * uf, 0.5 * (rl + rr) * uf))
    s_f = np.where(uf > U_TIE, sl, np.where(uf < -U_TIE, sr, 0.5 * (sl + sr)))
    flux = np.sum(J * s_f, axis=0)
    D_red = _production_total(spec, prev.rho, new.u, prev.T, 1.0)
    dHdt = dH / dt
    res = dHdt + divergence(flux, N, dx, bc) - D_red
    defect = float(np.sum(dHdt - D_red) * dx)
    return res, defect


def entropy_balance_residual(series: Sequence[Field1D], spec: MixtureSpec,
                             alpha: float) -> BalanceResidual:
    """Residual of the entropy balance law between consecutive frames.

    Uses the alpha-stripped form (finite at alpha = 0).  Time derivatives are
    forward differences between frames; the divergence uses the solver's face
    mass fluxes (the ``u_face`` stored on the later frame).  When alpha > 0
    the residual of the unstripped law, alpha times the stripped one, is also
    reported.
    """
    series = list(series)
    if len(series) < 2:
        raise ValidationError("need at least two frames")
    for f in series[1:]:
        if not f.same_grid(series[0]):
            raise ValidationError("all frames must share the same grid")
    residuals, maxes, defects = [], [], []
    for prev, new in zip(series[:-1], series[1:]):
        r, d = _step_residual(prev, new, spec)
        residuals.append(r)
        maxes.append(float(np.max(np.abs(r))))
        defects.append(d)
    maxes = np.array(maxes)
    defects = np.array(defects)
    mx = float(np.max(maxes))
    return BalanceResidual(residuals, maxes, defects, mx, float(np.max(np.abs(defects))),
                           alpha * mx if alpha > 0 else None)


@dataclass
class StepMonitor:
    """Per-step record of integrated entropy, balance residual and pressure residual.

    Pass an instance to ``run_simulation(monitors=...)``.
    """

    spec: MixtureSpec
    alpha: float = 0.0
    balance: bool = True
    t: list = field(default_factory=list)
    int_H: list = field(default_factory=list)
    dH: list = field(default_factory=list)
    balance_max: list = field(default_factory=list)
    pressure_residual: list = field(default_factory=list)

    def __call__(self, prev: Field1D, new: Field1D, dt: float):
        if not self.int_H:
            self.t.append(prev.t)
            self.int_H.append(integrated_entropy(prev, self.spec))
        h = integrated_entropy(new, self.spec)
        self.dH.append(entropy_increment(prev, new, self.spec))
        self.t.append(new.t)
        self.int_H.append(h)
        self.pressure_residual.append(new.pressure_residual)
        if self.balance:
            r, _ = _step_residual(prev, new, self.spec)
            self.balance_max.append(float(np.max(np.abs(r))))

    @property
    def min_increment(self) -> float:
        return float(min(self.dH)) if self.dH else 0.0


@dataclass
class ConservationReport:
    """Relative drifts over a run."""

    mass_drift: np.ndarray
    energy_drift: float
    pressure_residual: float
    pressure_uniformity: float


def conservation_audit(series: Sequence[Field1D], spec: MixtureSpec,
                       config: SolverConfig) -> ConservationReport:
    """Per-species mass drift, total-energy drift and pressure residuals over ``series``."""
    series = list(series)
    mass = np.array([f.rho.sum(axis=1) * f.dx for f in series])
    mass_drift = np.max(np.abs(mass - mass[0]), axis=0) / np.abs(mass[0])
    energy = np.array([total_energy(f, spec, config) for f in series])
    energy_drift = float(np.max(np.abs(energy - energy[0])) / abs(energy[0]))
    pres = float(max(f.pressure_residual for f in series))
    unif = float(max(np.max(np.abs(f.pressure - f.pressure.mean())) / f.pressure.mean()
                     for f in series))
    return ConservationReport(mass_drift, energy_drift, pres, unif)


@dataclass
class StudyRow:
    alpha: float
    err_rho: float
    err_u: float
    err: float
    ratio: float = math.nan
    order: float = math.nan


def convergence_study(initial: Field1D, spec: MixtureSpec, config: SolverConfig,
                      alphas: Sequence[float]) -> list:
    """Distance of scaled-system solutions from the limit solution at ``t_end``.

    All runs share one fixed time step (the most restrictive stability bound
    over the alphas, fitted to ``t_end``), so that differences isolate the
    alpha dependence.  Errors are L2 norms over the domain of the species
    densities and cell velocities.
    """
    alphas = [float(a) for a in alphas]
    if not alphas or any(not (a > 0) for a in alphas):
        raise ValidationError("alphas must be positive")
    if any(b > a for a, b in zip(alphas, alphas[1:])):
        raise ValidationError("alphas must be non-increasing")
    t_end = config.t_end
    prepared = prepare(initial, spec, config)
    if config.dt is not None:
        dt = config.dt
    else:
        dt = min(stable_dt(prepared, spec, config, a) for a in alphas + [0.0])
    n = max(1, math.ceil(t_end / dt - 1e-9))
    dt = t_end / n
    ref = run_simulation(initial, spec, replace(config, alpha=0.0, dt=dt,
                                                frame_interval=None)).final
    rows = []
    for a in alphas:
        out = run_simulation(initial, spec, replace(config, alpha=a, dt=dt,
                                                    frame_interval=None)).final
        er = math.sqrt(float(np.sum((out.rho - ref.rho) ** 2)) * ref.dx)
        eu = math.sqrt(float(np.sum((out.u[..., 0] - ref.u[..., 0]) ** 2)) * ref.dx)
        rows.append(StudyRow(a, er, eu, math.hypot(er, eu)))
    for prev, row in zip(rows, rows[1:]):
        if row.err > 0:
            row.ratio = prev.err / row.err
            if prev.alpha != row.alpha and row.ratio > 0:
                row.order = math.log(row.ratio) / math.log(prev.alpha / row.alpha)
    return rows
