"""Weak-form collision production terms for Maxwell molecules.

Closed forms for the momentum and energy exchange between species and the
entropy production, plus a Monte Carlo estimator of the weak-form
integrals that uses only the collision rules and the maximizers, so it is
independent of the closed forms it checks.

The angular kernel is taken constant, b_ij(s) = K_ij / 2 on [-1, 1]; its
integral over the sphere is then 2 pi K_ij and the first sigma-moment
vanishes.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import CellState, MixtureSpec

PSI_KINDS = ("unit", "velocity", "speed-squared")
MIN_SAMPLES = 1000
CHUNK = 1 << 16


def _check_pair(spec, i, j):
    if not (0 <= i < spec.S and 0 <= j < spec.S):
        raise ValidationError(f"species index out of range: ({i}, {j})")
    if i == j:
        raise ValidationError("exchange rates need two distinct species")


def momentum_exchange_rate(spec: MixtureSpec, state: CellState, i: int, j: int) -> np.ndarray:
    """Friction force on species ``i`` from ``j``: 2 pi K m_j/(m_i+m_j) rho_i rho_j (u_j - u_i)."""
    _check_pair(spec, i, j)
    mi, mj = spec.m[i], spec.m[j]
    c = 2.0 * math.pi * spec.K[i, j] * mj / (mi + mj) * state.rho[i] * state.rho[j]
    return c * (state.u[j] - state.u[i])


def exchange_force(spec: MixtureSpec, state: CellState, alpha: float, i: int, j: int) -> np.ndarray:
    """Bi-species weak form with psi = v; equals alpha times the friction force."""
    return alpha * momentum_exchange_rate(spec, state, i, j)


def energy_exchange_rate(spec: MixtureSpec, state: CellState, alpha: float, i: int, j: int) -> float:
    """Bi-species weak form with psi = |v|^2."""
    _check_pair(spec, i, j)
    mi, mj = spec.m[i], spec.m[j]
    ui, uj = state.u[i], state.u[j]
    c = alpha**2 * 4.0 * math.pi * spec.K[i, j] * mj * state.rho[i] * state.rho[j] / (mi + mj) ** 2
    return float(c * ((mi * ui + mj * uj) @ (uj - ui)))


def _production_species(spec, rho, u, T, alpha, i):
    # rho (S, ...), u (S, ..., 3), T (...); loops keep the operation order
    # independent of the trailing shape
    mi = spec.m[i]
    acc = np.zeros(np.shape(T))
    for j in range(spec.S):
        if j == i:
            continue
        mj = spec.m[j]
        du = u[j] - u[i]
        ubar = (mi * u[i] + mj * u[j]) / (mi + mj)
        bracket = np.sum(ubar * du, axis=-1) - np.sum(u[i] * du, axis=-1)
        acc = acc + spec.K[i, j] * mi * mj * rho[i] * rho[j] / (mi + mj) * bracket
    return alpha**2 * 10.0 * math.pi / (3.0 * T * spec.m0) * acc


def _production_total(spec, rho, u, T, alpha):
    acc = np.zeros(np.shape(T))
    for i in range(spec.S):
        for j in range(spec.S):
            if j == i:
                continue
            mi, mj = spec.m[i], spec.m[j]
            du = u[j] - u[i]
            acc = acc + (spec.K[i, j] * mi * mj / (mi + mj) * rho[i] * rho[j]
                         * np.sum(du * du, axis=-1))
    return alpha**2 * 5.0 * math.pi / (3.0 * T * spec.m0) * acc


def entropy_production_species(spec: MixtureSpec, state: CellState, alpha: float, i: int) -> float:
    """Partial entropy production D_i of species ``i``."""
    return float(_production_species(spec, state.rho, state.u, state.T, alpha, i))


def entropy_production_total(spec: MixtureSpec, state: CellState, alpha: float) -> float:
    """Total entropy production D, a quadratic form in velocity differences."""
    return float(_production_total(spec, state.rho, state.u, state.T, alpha))


@dataclass(frozen=True)
class OracleEstimate:
    """Sample mean with its standard error."""

    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        if np.any(np.asarray(self.stderr) < 0):
            raise ValidationError("stderr must be nonnegative")

    def within(self, target, k: float = 3.0, floor: float = 0.0) -> np.ndarray:
        """Componentwise |mean - target| <= k * stderr + floor."""
        return np.abs(np.asarray(self.mean) - target) <= k * np.asarray(self.stderr) + floor


def _psi(kind, v):
    if kind == "unit":
        return np.ones(v.shape[0])
    if kind == "velocity":
        return v
    return np.sum(v * v, axis=1)


def _post_collision(mi, mj, v, vs, sigma):
    g = np.linalg.norm(v - vs, axis=1)[:, None]
    mv = mi * v + mj * vs
    M = mi + mj
    return (mv + mj * g * sigma) / M, (mv - mi * g * sigma) / M


def _chunk_stats(spec, state, alpha, i, j, psi, seed, c, size):
    rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, c]))
    sd_i = math.sqrt(3.0 * spec.m0 * state.T / (5.0 * spec.m[i]))
    sd_j = math.sqrt(3.0 * spec.m0 * state.T / (5.0 * spec.m[j]))
    z = rng.standard_normal((size, 9))
    v = alpha * state.u[i] + sd_i * z[:, 0:3]
    vs = alpha * state.u[j] + sd_j * z[:, 3:6]
    sigma = z[:, 6:9] / np.linalg.norm(z[:, 6:9], axis=1)[:, None]
    vp, vsp = _post_collision(spec.m[i], spec.m[j], v, vs, sigma)
    rate = state.rho[i] * state.rho[j] * 2.0 * math.pi * spec.K[i, j]
    if i == j:
        x = 0.5 * rate * (_psi(psi, vp) + _psi(psi, vsp) - _psi(psi, v) - _psi(psi, vs))
    else:
        x = rate * (_psi(psi, vp) - _psi(psi, v))
    mean = x.mean(axis=0)
    m2 = np.sum((x - mean) ** 2, axis=0)
    return size, mean, m2


def mc_weak_form(spec: MixtureSpec, state: CellState, alpha: float, i: int, j: int,
                 psi: str, n: int, seed: int, threads: int = 1) -> OracleEstimate:
    """Monte Carlo estimate of the weak-form collision integral of ``psi``.

    ``i == j`` selects the mono-species form (symmetrised four-point
    difference), ``i != j`` the bi-species form.  Samples are drawn in fixed
    chunks from a counter-based generator keyed by ``(seed, chunk index)`` and
    combined in chunk order, so the result does not depend on ``threads``.
    """
    if psi not in PSI_KINDS:
        raise ValidationError(f"psi must be one of {PSI_KINDS}, got {psi!r}")
    if n < MIN_SAMPLES:
        raise ValidationError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if not (0 <= i < spec.S and 0 <= j < spec.S):
        raise ValidationError(f"species index out of range: ({i}, {j})")
    if not (0 <= seed < 2**64):
        raise ValidationError("seed must be an unsigned 64-bit integer")
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])
    jobs = [(spec, state, alpha, i, j, psi, seed, c, s) for c, s in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _chunk_stats(*a), jobs))
    else:
        parts = [_chunk_stats(*a) for a in jobs]
    # Chan et al. pairwise update, always in chunk order
    count, mean, m2 = parts[0]
    for nb, mb, m2b in parts[1:]:
        tot = count + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta * delta * (count * nb / tot)
        count = tot
    var = m2 / (count - 1) if count > 1 else np.zeros_like(m2)
    return OracleEstimate(np.asarray(mean), np.sqrt(var / count), count, seed)


def weak_form_closed(spec: MixtureSpec, state: CellState, alpha: float, i: int, j: int, psi: str):
    """Closed-form value of the quantity ``mc_weak_form`` estimates."""
    if psi == "unit":
        return 0.0
    if i == j:
        return np.zeros(3) if psi == "velocity" else 0.0
    if psi == "velocity":
        return exchange_force(spec, state, alpha, i, j)
    return energy_exchange_rate(spec, state, alpha, i, j)


def roundoff_floor(spec: MixtureSpec, state: CellState, alpha: float, i: int, j: int,
                   rtol: float = 1e-12) -> float:
    """Absolute tolerance for integrals that vanish analytically.

    The pre/post differences cancel to round-off per sample, so both the
    sample mean and its standard error sit at ~eps times the integrand
    scale; a 3-sigma test alone is then meaningless.
    """
    var = spec.thermal_variance(state.T)
    scale = sum(alpha**2 * float(state.u[k] @ state.u[k]) + 3.0 * float(var[k]) for k in (i, j))
    return rtol * state.rho[i] * state.rho[j] * 2.0 * math.pi * spec.K[i, j] * (1.0 + scale)
