"""1-D finite-volume solvers for the Maxwell-Stefan limit and the scaled moment system.

Layout: densities and temperature live in cells; species velocities (and,
for the scaled system, momenta) live on the interior faces between cells.
Both steppers share the face gradients, the face friction matrix and the
upwind mass flux, so that the scaled scheme reduces to the limit scheme as
alpha -> 0 on a fixed grid and time step.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import CompatibilityError, NumericalError, ValidationError
from .model import CellState, Field1D, MixtureSpec

log = logging.getLogger(__name__)

CLOSURES = ("equimolar", "mass-average")
RHO_FLOOR = 1e-12
U_TIE = 1e-14
COMPAT_RTOL = 1e-8
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings shared by the steppers.

    ``alpha = 0`` selects the limit system.  ``dt`` fixes the time step
    (otherwise it follows the stability bound).  ``frame_interval`` spaces
    the stored frames; ``None`` keeps only the initial and final fields.
    """

    closure: str = "equimolar"
    cfl_safety: float = 0.4
    t_end: float = 1.0
    energy_mass_factors: bool = True
    alpha: float = 0.0
    dt: Optional[float] = None
    frame_interval: Optional[float] = None

    def __post_init__(self):
        if self.closure not in CLOSURES:
            raise ValidationError(f"closure must be one of {CLOSURES}, got {self.closure!r}")
        if not (0 < self.cfl_safety <= 1):
            raise ValidationError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValidationError(f"t_end must be >= 0, got {self.t_end}")
        if not (self.alpha >= 0):
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        if self.dt is not None and not (self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if self.frame_interval is not None and not (self.frame_interval > 0):
            raise ValidationError("frame_interval must be positive")


@dataclass
class FrictionSystem:
    """Friction matrix ``B`` (S, S) and driving force ``g`` (S,) of the momentum relations."""

    B: np.ndarray
    g: Optional[np.ndarray] = None


# --- grid helpers -----------------------------------------------------------

def face_neighbours(N: int, boundary: str):
    """Left and right cell indices of every interior face."""
    if boundary == "periodic":
        left = np.arange(N)
        return left, (left + 1) % N
    left = np.arange(N - 1)
    return left, left + 1


def divergence(flux, N: int, dx: float, boundary: str):
    """Cell divergence of face fluxes (..., F); boundary faces carry no flux."""
    if boundary == "periodic":
        return (flux - np.roll(flux, 1, axis=-1)) / dx
    pad = [(0, 0)] * (flux.ndim - 1) + [(1, 1)]
    fl = np.pad(flux, pad)
    return (fl[..., 1:] - fl[..., :-1]) / dx


def face_to_cell(uf, N: int, boundary: str):
    """Average of the two faces bounding each cell (boundary faces are at rest)."""
    if boundary == "periodic":
        return 0.5 * (uf + np.roll(uf, 1, axis=-1))
    pad = [(0, 0)] * (uf.ndim - 1) + [(1, 1)]
    fl = np.pad(uf, pad)
    return 0.5 * (fl[..., 1:] + fl[..., :-1])


def face_average(a, left, right):
    return 0.5 * (a[..., left] + a[..., right])


def upwind_flux(rho, uf, left, right):
    """Face mass flux rho_upwind * u; central average when |u| is below the tie threshold."""
    rl, rr = rho[:, left], rho[:, right]
    central = 0.5 * (rl + rr) * uf
    return np.where(uf > U_TIE, rl * uf, np.where(uf < -U_TIE, rr * uf, central))


def energy_coefficients(spec: MixtureSpec, energy_mass_factors: bool) -> np.ndarray:
    """Per-species coefficient c_i of rho_i T in the thermal energy density."""
    if energy_mass_factors:
        return 1.5 * 3.0 * spec.m0 / (5.0 * spec.m)
    return np.full(spec.S, 1.5)


# --- friction system --------------------------------------------------------

def _friction(spec: MixtureSpec, rho):
    """Friction matrices for densities of shape (S, ...); returns (..., S, S)."""
    S = spec.S
    m = spec.m
    rho = np.moveaxis(np.asarray(rho, dtype=float), 0, -1)
    coef = 2.0 * math.pi * spec.K * m[None, :] / (m[:, None] + m[None, :])
    np.fill_diagonal(coef, 0.0)
    B = coef * rho[..., :, None] * rho[..., None, :]
    idx = np.arange(S)
    B[..., idx, idx] = -B.sum(axis=-1)
    return B


def friction_matrix(spec: MixtureSpec, state: CellState) -> FrictionSystem:
    """Friction matrix of a cell; constant vectors span its kernel and m its left kernel."""
    return FrictionSystem(_friction(spec, state.rho))


def driving_force(spec: MixtureSpec, grad_pT) -> np.ndarray:
    """g_i = 3 m0 / (5 m_i) * d/dx (rho_i T) from the partial-pressure gradients."""
    grad_pT = np.asarray(grad_pT, dtype=float)
    shape = (-1,) + (1,) * (grad_pT.ndim - 1)
    return (3.0 * spec.m0 / (5.0 * spec.m)).reshape(shape) * grad_pT


def closure_weights(spec: MixtureSpec, rho, closure: str):
    if closure == "equimolar":
        return np.asarray(rho, dtype=float)
    if closure == "mass-average":
        rho = np.asarray(rho, dtype=float)
        return spec.m.reshape((-1,) + (1,) * (rho.ndim - 1)) * rho
    raise ValidationError(f"unknown closure {closure!r}")


def _bordered_solve(B, g, w, m, atol=0.0):
    """Solve B u = g with w . u = 0 for stacks B (..., S, S), g and w (..., S).

    The bordered matrix [[B, m/|m|], [w^T, 0]] is nonsingular whenever B has
    rank S-1 with kernel spanned by the ones vector and w sums to nonzero.
    """
    S = B.shape[-1]
    mn = m / np.linalg.norm(m)
    gnorm = np.linalg.norm(g, axis=-1)
    compat = np.abs(g @ mn)
    bad = compat > COMPAT_RTOL * gnorm + atol
    if np.any(bad):
        k = np.argmax(compat - COMPAT_RTOL * gnorm)
        raise CompatibilityError(
            "driving force is incompatible with the friction matrix: pressure-gradient "
            f"residual m^T g / |m| = {np.ravel(compat)[k]:.3e} exceeds "
            f"{COMPAT_RTOL:g} * |g| = {COMPAT_RTOL * np.ravel(gnorm)[k]:.3e}")
    if np.any(~(np.abs(w.sum(axis=-1)) > 0)):
        raise NumericalError("degenerate state: closure weights vanish")
    lead = B.shape[:-2]
    A = np.zeros(lead + (S + 1, S + 1))
    A[..., :S, :S] = B
    A[..., :S, S] = mn
    A[..., S, :S] = w
    rhs = np.zeros(lead + (S + 1,))
    rhs[..., :S] = g
    sol = np.linalg.solve(A, rhs[..., None])[..., 0]
    u = sol[..., :S]
    res = np.linalg.norm(np.einsum("...ij,...j->...i", B, u) - g, axis=-1)
    bscale = np.max(np.abs(B), axis=(-2, -1)) * np.max(np.abs(u), axis=-1, initial=0.0)
    tol = 1e-10 * np.maximum(1.0, gnorm) + 64 * EPS * bscale
    if np.any(res > tol):
        raise NumericalError(f"velocity solve residual {np.max(res):.3e} above tolerance")
    return u


def solve_velocities(sys: FrictionSystem, spec: MixtureSpec, state: CellState,
                     closure: str = "equimolar", atol: float = 0.0) -> np.ndarray:
    """Species x-velocities solving ``B u = g`` under the chosen closure.

    Raises
    ------
    CompatibilityError
        If ``m . g`` (proportional to the total pressure gradient) is not
        negligible relative to ``|g|``.
    NumericalError
        If all densities sit at the floor.
    """
    if np.all(state.rho <= RHO_FLOOR):
        raise NumericalError("degenerate state: all densities at the floor")
    g = np.zeros(spec.S) if sys.g is None else np.asarray(sys.g, dtype=float)
    w = closure_weights(spec, state.rho, closure)
    return _bordered_solve(np.asarray(sys.B), g, w, spec.m, atol)


def limit_face_velocities(field: Field1D, spec: MixtureSpec, closure: str) -> np.ndarray:
    """Face velocities (S, F) of the Maxwell-Stefan relations for the current state."""
    left, right = face_neighbours(field.N, field.boundary)
    pT = field.rho * field.T
    g = driving_force(spec, (pT[:, right] - pT[:, left]) / field.dx)
    rb = face_average(field.rho, left, right)
    B = _friction(spec, rb)
    w = closure_weights(spec, rb, closure)
    # round-off floor of the discrete pressure difference
    atol = (64 * EPS * 0.6 * spec.m0 * spec.S * np.max(np.abs(pT))
            / (field.dx * np.linalg.norm(spec.m)))
    return _bordered_solve(B, g.T, w.T, spec.m, atol).T


# --- time stepping ----------------------------------------------------------

def stable_dt(field: Field1D, spec: MixtureSpec, config: SolverConfig,
              alpha: Optional[float] = None) -> float:
    """Explicit step bound: parabolic bound, plus the acoustic bound when alpha > 0."""
    alpha = config.alpha if alpha is None else alpha
    m, K = spec.m, spec.K
    D_max = 0.0
    for i in range(spec.S):
        others = [j for j in range(spec.S) if j != i]
        fr = np.min([2.0 * math.pi * K[i, j] * m[j] / (m[i] + m[j]) * field.rho[j]
                     for j in others], axis=0)
        D_max = max(D_max, float(np.max(3.0 * spec.m0 * field.T / (5.0 * m[i] * fr))))
    dt = config.cfl_safety * field.dx**2 / (2.0 * D_max)
    if alpha > 0:
        c = math.sqrt(spec.m0 * float(np.max(field.T)) / float(np.min(m))) / alpha
        if field.u_face is not None and field.u_face.size:
            c += float(np.max(np.abs(field.u_face)))
        dt = min(dt, config.cfl_safety * field.dx / c)
    return dt


def _apply_floor(rho):
    low = rho < RHO_FLOOR
    if np.any(low):
        log.warning("clipping %d densities below %g", int(np.count_nonzero(low)), RHO_FLOOR)
        rho = np.where(low, RHO_FLOOR, rho)
    return rho


def _check_temperature(T, field, what):
    if not np.all(T > 0):
        bad = np.flatnonzero(~(T > 0))
        raise NumericalError(f"{what}: nonpositive temperature in cells {bad[:10].tolist()}",
                             state=field)


def prepare(field: Field1D, spec: MixtureSpec, config: SolverConfig) -> Field1D:
    """Attach face velocities and momenta of the Maxwell-Stefan relations to ``field``."""
    if field.S != spec.S:
        raise ValidationError(f"field has {field.S} species, mixture has {spec.S}")
    uf = limit_face_velocities(field, spec, config.closure)
    left, right = face_neighbours(field.N, field.boundary)
    q = face_average(field.rho, left, right) * uf
    u = np.zeros_like(field.u)
    u[..., 0] = face_to_cell(uf, field.N, field.boundary)
    return field.copy(u=u, u_face=uf, q_face=q)


def _finish(field, rho_new, T_new, uf, q, dt, P0, pres_res):
    u = np.zeros_like(field.u)
    u[..., 0] = face_to_cell(uf, field.N, field.boundary)
    return Field1D(rho_new, u, T_new, field.dx, field.boundary, P0=P0, t=field.t + dt,
                   u_face=uf, q_face=q, pressure_residual=pres_res)


def step_limit(field: Field1D, spec: MixtureSpec, config: SolverConfig, dt: float) -> Field1D:
    """One explicit step of the Maxwell-Stefan limit system.

    Face velocities from the current state, upwind mass fluxes, explicit
    energy update, then projection onto uniform pressure.  The uniform
    pressure is chosen so that the projection conserves total energy; it
    equals the previous one whenever the energy density is proportional to
    the pressure (equal masses, or ``energy_mass_factors=False``).
    ``pressure_residual`` on the result is the pre-projection deviation.
    """
    if not (dt > 0):
        raise ValidationError(f"dt must be positive, got {dt}")
    N, bc = field.N, field.boundary
    left, right = face_neighbours(N, bc)
    uf = limit_face_velocities(field, spec, config.closure)
    J = upwind_flux(field.rho, uf, left, right)
    rho_new = _apply_floor(field.rho - dt * divergence(J, N, field.dx, bc))

    c = energy_coefficients(spec, config.energy_mass_factors)
    E = c @ field.rho * field.T
    Tf = face_average(field.T, left, right)
    HF = (5.0 / 3.0) * (c @ J) * Tf
    E_new = E - dt * divergence(HF, N, field.dx, bc)
    C_new = c @ rho_new
    n_new = rho_new.sum(axis=0)
    T_pre = E_new / C_new
    _check_temperature(T_pre, field, "limit step")
    pres_res = float(np.max(np.abs(T_pre * n_new - field.P0)) / field.P0)
    P_new = float(np.sum(E_new) / np.sum(C_new / n_new))
    T_new = P_new / n_new
    q = face_average(field.rho, left, right) * uf
    return _finish(field, rho_new, T_new, uf, q, dt, P_new, pres_res)


def step_scaled(field: Field1D, spec: MixtureSpec, config: SolverConfig, dt: float,
                alpha: float) -> Field1D:
    """One IMEX step of the alpha-scaled moment system.

    Face momenta: explicit convection and partial-pressure force, implicit
    friction (one (S, S) solve per face).  Mass and total energy are then
    advanced conservatively with the new face velocities; temperature is
    recovered from the total energy.
    """
    if not (alpha > 0):
        raise ValidationError("the scaled system needs alpha > 0")
    if not (dt > 0):
        raise ValidationError(f"dt must be positive, got {dt}")
    if field.q_face is None:
        field = prepare(field, spec, config)
    N, bc, dx = field.N, field.boundary, field.dx
    left, right = face_neighbours(N, bc)
    a2 = alpha * alpha
    rb = face_average(field.rho, left, right)
    pT = field.rho * field.T
    G = driving_force(spec, (pT[:, right] - pT[:, left]) / dx)
    ux = field.u[..., 0]
    mflux = field.rho * ux * ux
    conv = (mflux[:, right] - mflux[:, left]) / dx

    B = _friction(spec, rb)
    S = spec.S
    A = a2 * np.eye(S) - dt * B / rb.T[:, None, :]
    rhs = a2 * (field.q_face - dt * conv) - dt * G
    q = np.linalg.solve(A, rhs.T[..., None])[..., 0].T
    uf = q / rb

    J = upwind_flux(field.rho, uf, left, right)
    rho_new = _apply_floor(field.rho - dt * divergence(J, N, dx, bc))

    c = energy_coefficients(spec, config.energy_mass_factors)
    E = np.sum(0.5 * a2 * field.rho * ux * ux, axis=0) + c @ field.rho * field.T
    Tf = face_average(field.T, left, right)
    HF = np.sum(J * (0.5 * a2 * uf * uf + (5.0 / 3.0) * c[:, None] * Tf), axis=0)
    E_new = E - dt * divergence(HF, N, dx, bc)
    u_new = face_to_cell(uf, N, bc)
    KE = np.sum(0.5 * a2 * rho_new * u_new * u_new, axis=0)
    T_new = (E_new - KE) / (c @ rho_new)
    _check_temperature(T_new, field, "scaled step")
    p = T_new * rho_new.sum(axis=0)
    pres_res = float(np.max(np.abs(p - p.mean())) / p.mean())
    return _finish(field, rho_new, T_new, uf, q, dt, field.P0, pres_res)


def total_energy(field: Field1D, spec: MixtureSpec, config: SolverConfig,
                 alpha: Optional[float] = None) -> float:
    """Integral over the domain of the conserved energy density of the configured system."""
    alpha = config.alpha if alpha is None else alpha
    c = energy_coefficients(spec, config.energy_mass_factors)
    e = c @ field.rho * field.T
    if alpha > 0:
        ux = field.u[..., 0]
        e = e + np.sum(0.5 * alpha**2 * field.rho * ux * ux, axis=0)
    return float(np.sum(e) * field.dx)


@dataclass
class SimulationResult:
    """Frames at the output times plus step count."""

    frames: list
    n_steps: int

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.frames])

    @property
    def final(self) -> Field1D:
        return self.frames[-1]


def output_schedule(t_end: float, frame_interval: Optional[float]) -> list:
    if t_end == 0:
        return []
    if frame_interval is None:
        return [t_end]
    n = int(math.floor(t_end / frame_interval + 1e-9))
    times = [k * frame_interval for k in range(1, n + 1)]
    if not times or t_end - times[-1] > 1e-12 * max(1.0, t_end):
        times.append(t_end)
    else:
        times[-1] = t_end
    return times


def run_simulation(initial: Field1D, spec: MixtureSpec, config: SolverConfig,
                   monitors: Sequence[Callable] = (),
                   output_times: Optional[Iterable[float]] = None) -> SimulationResult:
    """Advance ``initial`` to ``config.t_end``.

    Each monitor is called as ``monitor(previous, current, dt)`` after every
    step.  Frames are recorded at ``output_times`` (default: every
    ``config.frame_interval`` and at ``t_end``).
    """
    field = prepare(initial, spec, config)
    field.t = float(initial.t)
    frames = [field]
    targets = list(output_times) if output_times is not None else output_schedule(
        config.t_end, config.frame_interval)
    alpha = config.alpha
    n_steps = 0
    for target in targets:
        while field.t < target:
            dt = config.dt if config.dt is not None else stable_dt(field, spec, config)
            remaining = target - field.t
            last = dt >= remaining * (1.0 - 1e-12)
            if last:
                dt = remaining
            new = (step_scaled(field, spec, config, dt, alpha) if alpha > 0
                   else step_limit(field, spec, config, dt))
            if last:
                new.t = target
            for mon in monitors:
                mon(field, new, dt)
            field = new
            n_steps += 1
        frames.append(field)
    return SimulationResult(frames, n_steps)
