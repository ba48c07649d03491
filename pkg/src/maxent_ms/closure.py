"""Maximum entropy closure: Lagrange multipliers, dual Newton solve, entropy density.

The maximizer of -int f log(b f) dv under mass, momentum and energy
constraints belongs to the exponential family

    f(v) = (1/b) exp(-(1 + lambda0 + lambda1 . v + lambda2 |v|^2)),

which is an isotropic Gaussian whenever lambda2 > 0.  All moment integrals
of that family are Gaussian integrals, so the dual residual and its
Jacobian are available in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .model import CellState, MixtureSpec

MAX_ITER = 50
RTOL = 1e-12


@dataclass(frozen=True)
class Multipliers:
    """Multiplier triple of one species."""

    lambda0: float
    lambda1: np.ndarray
    lambda2: float

    def __post_init__(self):
        object.__setattr__(self, "lambda0", float(self.lambda0))
        object.__setattr__(self, "lambda1", np.asarray(self.lambda1, dtype=float).reshape(3))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        if not (self.lambda2 > 0):
            raise ValidationError(f"lambda2 must be positive for an integrable density, got {self.lambda2}")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.lambda0], self.lambda1, [self.lambda2]])

    @classmethod
    def from_vector(cls, x) -> "Multipliers":
        return cls(x[0], x[1:4], x[4])


@dataclass(frozen=True)
class MomentTargets:
    """Prescribed mass, momentum and energy moments, one row per species."""

    M0: np.ndarray
    M1: np.ndarray
    M2: np.ndarray

    def __post_init__(self):
        M0 = np.asarray(self.M0, dtype=float).reshape(-1)
        M1 = np.asarray(self.M1, dtype=float).reshape(M0.size, 3)
        M2 = np.asarray(self.M2, dtype=float).reshape(-1)
        if M2.shape != M0.shape:
            raise ValidationError("M0 and M2 must have one entry per species")
        if np.any(~(M0 > 0)):
            raise ValidationError("mass moments must be positive")
        if np.any(~(M2 * M0 > np.sum(M1 * M1, axis=1))):
            raise ValidationError("targets violate the positive-temperature condition "
                                  "M2 * M0 > |M1|^2")
        object.__setattr__(self, "M0", M0)
        object.__setattr__(self, "M1", M1)
        object.__setattr__(self, "M2", M2)

    @classmethod
    def from_state(cls, spec: MixtureSpec, state: CellState, alpha: float) -> "MomentTargets":
        rho, u = state.rho, state.u
        M1 = alpha * rho[:, None] * u
        M2 = (alpha**2 * rho * np.sum(u * u, axis=1)
              + 3.0 * rho * 3.0 * spec.m0 / (5.0 * spec.m) * state.T)
        return cls(rho.copy(), M1, M2)


def _lambda0_for_mass(rho, lambda1, lambda2, b):
    # (1/b) exp(-1 - l0) exp(|l1|^2 / (4 l2)) (pi / l2)^{3/2} = rho
    return (-1.0 - math.log(b * rho) + float(lambda1 @ lambda1) / (4.0 * lambda2)
            + 1.5 * math.log(math.pi / lambda2))


def multipliers_closed_form(spec: MixtureSpec, state: CellState, alpha: float) -> list:
    """Multipliers of every species from the analytic relations of the maximizer."""
    if alpha < 0:
        raise ValidationError("alpha must be >= 0")
    out = []
    for i in range(spec.S):
        lam2 = (5.0 / 3.0) * (spec.m[i] / spec.m0) / (2.0 * state.T)
        lam1 = -2.0 * lam2 * alpha * state.u[i]
        lam0 = _lambda0_for_mass(state.rho[i], lam1, lam2, spec.b[i])
        out.append(Multipliers(lam0, lam1, lam2))
    return out


def distribution_from_multipliers(lam: Multipliers, b: float = 1.0):
    """Return the exponential-family density ``f(v)`` for velocities (..., 3)."""
    if not (lam.lambda2 > 0):
        raise ValidationError("lambda2 <= 0 gives a non-integrable density")
    l0, l1, l2 = lam.lambda0, lam.lambda1, lam.lambda2

    def f(v):
        v = np.asarray(v, dtype=float)
        return np.exp(-(1.0 + l0 + v @ l1 + l2 * np.sum(v * v, axis=-1))) / b

    return f


def _gaussian_moments(x, b):
    """Total mass, mean, per-axis variance and squared mean of the family."""
    l0, l1, l2 = x[0], x[1:4], x[4]
    s2 = 0.5 / l2
    mu = -l1 * s2
    mu2 = float(mu @ mu)
    logZ = -1.0 - l0 + float(l1 @ l1) / (4.0 * l2) + 1.5 * math.log(math.pi / l2) - math.log(b)
    Z = math.exp(logZ)
    return Z, mu, s2, mu2


def _moments_and_jacobian(x, b):
    Z, mu, s2, mu2 = _gaussian_moments(x, b)
    w = mu2 + 3.0 * s2                      # E|v|^2
    Evv = np.outer(mu, mu) + s2 * np.eye(3)  # E v v^T
    Evw = mu * (mu2 + 5.0 * s2)             # E v |v|^2
    Eww = mu2**2 + 10.0 * s2 * mu2 + 15.0 * s2**2
    M = np.concatenate([[Z], Z * mu, [Z * w]])
    G = np.empty((5, 5))
    G[0, 0] = 1.0
    G[0, 1:4] = G[1:4, 0] = mu
    G[0, 4] = G[4, 0] = w
    G[1:4, 1:4] = Evv
    G[1:4, 4] = G[4, 1:4] = Evw
    G[4, 4] = Eww
    # d(int phi_k f)/d(lambda_l) = -int phi_k phi_l f
    return M, -Z * G


def _initial_guess(M0, M1, M2, b):
    mu = M1 / M0
    s2 = (M2 / M0 - float(mu @ mu)) / 3.0
    lam2 = 0.5 / s2
    lam1 = -2.0 * lam2 * mu
    return np.concatenate([[_lambda0_for_mass(M0, lam1, lam2, b)], lam1, [lam2]])


def solve_dual(targets: MomentTargets, spec: MixtureSpec, i: int, x0=None,
               rtol: float = RTOL, max_iter: int = MAX_ITER) -> Multipliers:
    """Solve the moment equations of species ``i`` for its multipliers.

    Damped Newton on the five multipliers with analytic Gaussian moments and
    Jacobian; the step is halved until the scaled residual norm decreases.
    ``x0`` overrides the moment-implied starting point.

    Raises
    ------
    ConvergenceError
        If the relative moment residual is still above ``rtol`` after
        ``max_iter`` iterations; carries the last residual.
    """
    b = float(spec.b[i])
    M0, M1, M2 = targets.M0[i], targets.M1[i], targets.M2[i]
    if not (M2 * M0 > float(M1 @ M1)):
        raise ValidationError("targets violate the positive-temperature condition")
    target = np.concatenate([[M0], M1, [M2]])
    scale = np.array([M0, *([math.sqrt(M0 * M2)] * 3), M2])
    x = _initial_guess(M0, M1, M2, b) if x0 is None else np.asarray(
        x0.as_vector() if isinstance(x0, Multipliers) else x0, dtype=float).copy()

    def residual(x):
        M, J = _moments_and_jacobian(x, b)
        return (M - target) / scale, J / scale[:, None]

    r, J = residual(x)
    rn = np.max(np.abs(r))
    for _ in range(max_iter):
        if rn <= rtol:
            break
        dx = np.linalg.solve(J, -r)
        t = 1.0
        while t >= 1e-10:
            xt = x + t * dx
            if xt[4] > 0:
                try:
                    rt, Jt = residual(xt)
                    rtn = np.max(np.abs(rt))
                except OverflowError:
                    rtn = math.inf
                if rtn < rn:
                    break
            t *= 0.5
        else:
            break
        x, r, J, rn = xt, rt, Jt, rtn
    if rn <= rtol:
        return Multipliers.from_vector(x)
    raise ConvergenceError(f"dual Newton did not converge for species {i}: "
                           f"relative residual {rn:.3e}", residual=rn)


def entropy_density(spec: MixtureSpec, state: CellState, i: int) -> float:
    """Entropy density -int f_i log(b_i f_i) dv of species ``i``'s maximizer."""
    return float(_entropy_density(spec.m[i], spec.m0, spec.b[i], state.rho[i], state.T))


def _entropy_density(mi, m0, b, rho, T):
    """Vectorised entropy density; broadcasts over ``rho`` and ``T``."""
    arg = b * (5.0 / (3.0 * m0)) ** 1.5 * rho * (mi / (2.0 * math.pi * T)) ** 1.5
    return (1.5 - np.log(arg)) * rho


def _entropy_increment(mi, m0, b, rho, rho_new, T, T_new):
    """H(rho_new, T_new) - H(rho, T) without cancellation between O(1) densities.

    Splits H = rho (1.5 - log c) - rho log rho + 1.5 rho log T and
    differences each product with log1p, so small increments keep their
    relative accuracy.
    """
    c = b * (5.0 / (3.0 * m0)) ** 1.5 * (mi / (2.0 * math.pi)) ** 1.5
    drho = rho_new - rho
    dT = T_new - T
    d_rlogr = drho * np.log(rho_new) + rho * np.log1p(drho / rho)
    d_rlogT = drho * np.log(T_new) + rho * np.log1p(dT / T)
    return (1.5 - math.log(c)) * drho - d_rlogr + 1.5 * d_rlogT


def entropy_flux(spec: MixtureSpec, state: CellState, alpha: float, i: int) -> np.ndarray:
    """Entropy flux alpha H_i u_i of species ``i``."""
    return alpha * entropy_density(spec, state, i) * state.u[i]


def relative_discrepancy(a: Multipliers, b: Multipliers) -> float:
    """Norm-wise relative distance between two multiplier triples."""
    va, vb = a.as_vector(), b.as_vector()
    return float(np.max(np.abs(va - vb)) / np.max(np.abs(vb)))
