"""Domain types, diffusive scaling and the scaled Maxwellian.

All quantities here are dimensionless unless stated otherwise.  Masses
enter only through ratios with the reference mass ``m0``; velocities are
3-vectors throughout.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy import constants

from .errors import ValidationError

BOUNDARIES = ("periodic", "no-flux")


@dataclass(frozen=True)
class MixtureSpec:
    """Species masses and kernel norms of a mixture of Maxwell molecules.

    Parameters
    ----------
    m : array_like, shape (S,)
        Dimensionless atomic masses.
    K : array_like, shape (S, S)
        Symmetric matrix of angular-kernel L1 norms; ``K[i, j]`` for the
        bi-species kernel, ``K[i, i]`` for the mono-species kernel.
    m0 : float, optional
        Reference (average) mass.  Defaults to the arithmetic mean of ``m``.
    b : array_like, shape (S,), optional
        Normalisation constants inside the entropy logarithm.  Default 1.
    """

    m: np.ndarray
    K: np.ndarray
    m0: Optional[float] = None
    b: Optional[np.ndarray] = None

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float).reshape(-1)
        K = np.asarray(self.K, dtype=float)
        S = m.size
        if S < 2:
            raise ValidationError(f"need at least 2 species, got {S}")
        if K.shape != (S, S):
            raise ValidationError(f"K must have shape ({S}, {S}), got {K.shape}")
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValidationError("all masses must be strictly positive")
        if np.any(K < 0) or not np.all(np.isfinite(K)):
            raise ValidationError("kernel norms must be finite and nonnegative")
        if not np.array_equal(K, K.T):
            i, j = np.argwhere(K != K.T)[0]
            raise ValidationError(
                f"K must be symmetric: K[{i}][{j}] = {K[i, j]} != K[{j}][{i}] = {K[j, i]}"
            )
        off = K[~np.eye(S, dtype=bool)]
        if np.any(off <= 0):
            raise ValidationError("every species pair must interact (K[i][j] > 0 for i != j)")
        m0 = float(np.mean(m)) if self.m0 is None else float(self.m0)
        if not m0 > 0:
            raise ValidationError("reference mass m0 must be positive")
        b = np.ones(S) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        if b.shape != (S,) or np.any(b <= 0):
            raise ValidationError("normalisation constants b must be positive, one per species")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "b", b)

    @property
    def S(self) -> int:
        return self.m.size

    def thermal_variance(self, T):
        """Per-axis variance 3 m0 T / (5 m_i) of each species' maximizer, shape (S, ...)."""
        T = np.asarray(T, dtype=float)
        return 3.0 * self.m0 * T / (5.0 * self.m.reshape((-1,) + (1,) * T.ndim))


@dataclass(frozen=True)
class ScalingConfig:
    """Diffusive scaling parameter and (optional) physical reference scales.

    ``tau`` [s], ``L`` [m], ``T0`` [K], ``N`` [particles], ``r`` [m].
    """

    alpha: float = 0.0
    tau: Optional[float] = None
    L: Optional[float] = None
    T0: Optional[float] = None
    N: Optional[float] = None
    r: Optional[float] = None

    def __post_init__(self):
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ValidationError(f"alpha must be >= 0, got {self.alpha}")
        for name in ("tau", "L", "T0", "N", "r"):
            v = getattr(self, name)
            if v is not None and not (v > 0 and math.isfinite(v)):
                raise ValidationError(f"reference scale {name} must be positive, got {v}")

    @property
    def has_reference_scales(self) -> bool:
        return all(getattr(self, k) is not None for k in ("tau", "L", "T0", "N", "r"))


@dataclass(frozen=True)
class CellState:
    """Macroscopic state at one point: densities, velocities, common temperature."""

    rho: np.ndarray
    u: np.ndarray
    T: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float).reshape(-1)
        u = np.asarray(self.u, dtype=float)
        if u.ndim == 1 and u.size == rho.size:
            # x-components only
            u = np.stack([u, np.zeros_like(u), np.zeros_like(u)], axis=-1)
        u = u.reshape(rho.size, 3)
        if np.any(~(rho > 0)):
            raise ValidationError("densities must be strictly positive")
        if not (self.T > 0):
            raise ValidationError(f"temperature must be positive, got {self.T}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "T", float(self.T))

    @property
    def S(self) -> int:
        return self.rho.size


@dataclass
class Field1D:
    """Cell-averaged state on a uniform 1-D grid.

    ``rho`` has shape (S, N), ``u`` (S, N, 3), ``T`` (N,).  ``u_face`` holds the
    x-velocities on interior faces that transported mass into this state and
    ``q_face`` the matching face momenta; both are filled by the steppers.
    ``P0`` is the uniform value of sum_i rho_i T enforced by the limit solver.
    """

    rho: np.ndarray
    u: np.ndarray
    T: np.ndarray
    dx: float
    boundary: str = "periodic"
    P0: Optional[float] = None
    t: float = 0.0
    u_face: Optional[np.ndarray] = None
    q_face: Optional[np.ndarray] = None
    pressure_residual: float = 0.0

    def __post_init__(self):
        self.rho = np.array(self.rho, dtype=float, ndmin=2)
        S, N = self.rho.shape
        u = np.asarray(self.u, dtype=float)
        if u.shape == (S, N):
            u = np.stack([u, np.zeros_like(u), np.zeros_like(u)], axis=-1)
        if u.shape != (S, N, 3):
            raise ValidationError(f"u must have shape ({S}, {N}, 3), got {u.shape}")
        self.u = np.array(u)
        self.T = np.array(self.T, dtype=float).reshape(-1)
        if self.T.size == 1 and N > 1:
            self.T = np.full(N, self.T[0])
        if self.T.shape != (N,):
            raise ValidationError(f"T must have shape ({N},), got {self.T.shape}")
        if not (self.dx > 0):
            raise ValidationError(f"dx must be positive, got {self.dx}")
        if self.boundary not in BOUNDARIES:
            raise ValidationError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.boundary == "no-flux" and N < 2:
            raise ValidationError("no-flux domain needs at least 2 cells")
        if self.P0 is None:
            self.P0 = float(np.mean(self.pressure))

    @property
    def S(self) -> int:
        return self.rho.shape[0]

    @property
    def N(self) -> int:
        return self.rho.shape[1]

    @property
    def length(self) -> float:
        return self.N * self.dx

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) * self.dx

    @property
    def pressure(self) -> np.ndarray:
        return self.T * self.rho.sum(axis=0)

    def cell(self, j: int) -> CellState:
        return CellState(self.rho[:, j], self.u[:, j, :], self.T[j])

    @property
    def cells(self) -> list:
        return [self.cell(j) for j in range(self.N)]

    def same_grid(self, other: "Field1D") -> bool:
        return (self.rho.shape == other.rho.shape and self.dx == other.dx
                and self.boundary == other.boundary)

    def copy(self, **changes) -> "Field1D":
        arrays = {k: (None if getattr(self, k) is None else np.array(getattr(self, k)))
                  for k in ("rho", "u", "T", "u_face", "q_face")}
        arrays.update(changes)
        return replace(self, **arrays)

    @classmethod
    def from_cells(cls, cells, dx, boundary="periodic", P0=None) -> "Field1D":
        cells = list(cells)
        S = cells[0].S
        if any(c.S != S for c in cells):
            raise ValidationError("all cells must share the same species count")
        rho = np.stack([c.rho for c in cells], axis=1)
        u = np.stack([c.u for c in cells], axis=1)
        T = np.array([c.T for c in cells])
        return cls(rho, u, T, dx, boundary, P0)


def nondimensionalize(scales: ScalingConfig, m0, masses, rho, u, T, dx,
                      boundary="periodic", k_B=constants.Boltzmann):
    """Scale physical fields onto the dimensionless diffusive variables.

    Parameters
    ----------
    scales : ScalingConfig
        Must carry all five reference scales; its ``alpha`` is ignored.
    m0 : float
        Reference atomic mass [kg].
    masses : array_like, shape (S,)
        Atomic masses [kg].
    rho : array_like, shape (S, N)
        Species mass densities [kg m^-3].
    u : array_like, shape (S, N) or (S, N, 3)
        Species velocities [m s^-1].
    T : array_like, shape (N,)
        Temperature [K].
    dx : float
        Cell width [m].

    Returns
    -------
    (ScalingConfig, Field1D)
        ``alpha`` is the Mach number u0/c0.  A warning is issued when the
        Knudsen number differs from it by more than 1e-6 relative.
    """
    if not scales.has_reference_scales:
        raise ValidationError("nondimensionalize needs tau, L, T0, N and r")
    for name, v in (("m0", m0), ("dx", dx), ("k_B", k_B)):
        if not (v > 0):
            raise ValidationError(f"{name} must be positive, got {v}")
    masses = np.asarray(masses, dtype=float).reshape(-1)
    if np.any(~(masses > 0)):
        raise ValidationError("masses must be positive")
    L, tau, T0, N = scales.L, scales.tau, scales.T0, scales.N
    u0 = L / tau
    c0 = math.sqrt(5.0 * k_B * T0 / (3.0 * m0))
    Ma = u0 / c0
    Kn = L**3 / (N * 4.0 * math.pi * scales.r**2) / L
    if abs(Ma - Kn) / Ma > 1e-6:
        warnings.warn(f"Mach number {Ma:.6g} differs from Knudsen number {Kn:.6g}; "
                      "the diffusive scaling assumes Ma = Kn", RuntimeWarning, stacklevel=2)
    rho = np.asarray(rho, dtype=float)
    rho_hat = L**3 * rho / (masses[:, None] * N)
    u_hat = np.asarray(u, dtype=float) / u0
    T_hat = np.asarray(T, dtype=float) / T0
    out = replace(scales, alpha=Ma)
    return out, Field1D(rho_hat, u_hat, T_hat, dx / L, boundary)


def maxwellian_eval(spec: MixtureSpec, state: CellState, alpha: float, i: int, v):
    """Scaled Maxwellian of species ``i`` evaluated at velocities ``v`` (..., 3)."""
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    v = np.asarray(v, dtype=float)
    beta = 5.0 / (3.0 * spec.m0)
    mi = spec.m[i]
    T = state.T
    amp = beta**1.5 * state.rho[i] * (mi / (2.0 * math.pi * T)) ** 1.5
    d = v - alpha * state.u[i]
    return amp * np.exp(-beta * mi * np.sum(d * d, axis=-1) / (2.0 * T))


def maxwellian_shape(spec: MixtureSpec, state: CellState, alpha: float, i: int):
    """Mean and per-axis standard deviation of species ``i``'s maximizer."""
    return alpha * state.u[i], math.sqrt(3.0 * spec.m0 * state.T / (5.0 * spec.m[i]))


def gauss_hermite_grid(order: int, shift=(0.0, 0.0, 0.0), width: float = 1.0):
    """Tensor Gauss-Hermite nodes (n, 3) and weights (n,) for integrals over R^3.

    The weights already include the factor exp(|x|^2) so that
    ``sum(w * f(v))`` approximates ``int f(v) dv`` for f ~ Gaussian of
    the given centre and per-axis standard deviation ``width``.
    """
    if order < 2:
        raise ValidationError(f"quadrature order must be >= 2, got {order}")
    if not (width > 0):
        raise ValidationError("quadrature width must be positive")
    x, w = np.polynomial.hermite.hermgauss(order)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
    scale = math.sqrt(2.0) * width
    nodes = np.asarray(shift, dtype=float) + scale * X
    weights = W * np.exp(np.sum(X * X, axis=1)) * scale**3
    return nodes, weights


def moments_numeric(f: Callable, order: int = 40, shift=(0.0, 0.0, 0.0), width: float = 1.0):
    """Mass, momentum and energy moments of a velocity distribution.

    ``f`` maps an array of velocities (n, 3) to values (n,).  ``shift`` and
    ``width`` centre and scale the tensor Gauss-Hermite rule; for a Gaussian
    with exactly that centre and width the rule is exact up to round-off.

    Returns
    -------
    M0 : float
    M1 : ndarray, shape (3,)
    M2 : float
    """
    nodes, weights = gauss_hermite_grid(order, shift, width)
    wf = weights * f(nodes)
    M0 = float(np.sum(wf))
    M1 = wf @ nodes
    M2 = float(wf @ np.sum(nodes * nodes, axis=1))
    return M0, M1, M2


def constraint_moments(spec: MixtureSpec, state: CellState, alpha: float, i: int):
    """Exact values of the three constraint moments imposed on species ``i``."""
    rho, u = state.rho[i], state.u[i]
    M0 = rho
    M1 = alpha * rho * u
    M2 = alpha**2 * rho * float(u @ u) + 3.0 * rho * (3.0 * spec.m0 / (5.0 * spec.m[i])) * state.T
    return M0, M1, M2


def constraint_residual(spec: MixtureSpec, state: CellState, alpha: float, i: int,
                        order: int = 40) -> float:
    """Largest relative error of the quadrature moments of the maximizer.

    The momentum error is measured against sqrt(M0 M2), which stays finite
    when the prescribed momentum vanishes.
    """
    shift, width = maxwellian_shape(spec, state, alpha, i)
    M0, M1, M2 = moments_numeric(lambda v: maxwellian_eval(spec, state, alpha, i, v),
                                 order, shift, width)
    T0, T1, T2 = constraint_moments(spec, state, alpha, i)
    return max(abs(M0 - T0) / T0,
               float(np.max(np.abs(M1 - T1))) / math.sqrt(T0 * T2),
               abs(M2 - T2) / T2)


def random_case(rng: np.random.Generator, S: Optional[int] = None, alphas=(0.0, 0.1, 1.0)):
    """Draw a random mixture, cell state and alpha for oracle sweeps.

    S in {2, 3, 4} unless given; masses in [0.5, 5]; off-diagonal K in
    [0.05, 1]; rho_i and T in [0.1, 10]; |u_i| <= 1.
    """
    if S is None:
        S = int(rng.integers(2, 5))
    m = rng.uniform(0.5, 5.0, S)
    K = rng.uniform(0.05, 1.0, (S, S))
    K = 0.5 * (K + K.T)
    spec = MixtureSpec(m, K)
    d = rng.standard_normal((S, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    u = d * rng.uniform(0.0, 1.0, (S, 1))
    state = CellState(rng.uniform(0.1, 10.0, S), u, float(rng.uniform(0.1, 10.0)))
    alpha = float(alphas[int(rng.integers(len(alphas)))])
    return spec, state, alpha
