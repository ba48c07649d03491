"""Line-oriented run configuration: ``[section]`` headers and ``key = value`` lines.

Example::

    [mixture]
    species = 2
    masses = 1 1
    K_1_2 = 0.3183098861837907

    [domain]
    length = 1
    cells = 128
    boundary = periodic

    [initial]
    rho_1 = sine 0.5 1e-6 1
    rho_2 = sine 0.5 -1e-6 1
    T = 1

    [solver]
    t_end = 0.02

Species indices in keys are 1-based.  ``#`` and ``;`` start comments.
Lists are whitespace separated.  Every error names the offending line.
"""
from __future__ import annotations

import hashlib
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import constants

from .errors import ValidationError
from .model import BOUNDARIES, Field1D, MixtureSpec, ScalingConfig
from .solver import CLOSURES, SolverConfig

SECTIONS = ("mixture", "scaling", "domain", "initial", "solver", "output",
            "study", "mep", "oracle")
DIAGNOSTICS = ("entropy", "conservation", "balance")


class ConfigError(ValidationError):
    """Malformed or out-of-range configuration entry."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Profile:
    """Initial density profile of one species along x."""

    kind: str
    params: tuple

    def evaluate(self, x, length):
        p = self.params
        if self.kind == "uniform":
            return np.full_like(x, p[0])
        if self.kind == "sine":
            mean, amp, mode = p
            return mean + amp * np.sin(2.0 * math.pi * mode * x / length)
        left, right, x0, width = p
        if width > 0:
            s = 0.5 * (1.0 + np.tanh((x - x0) / width))
        else:
            s = (x >= x0).astype(float)
        return left + (right - left) * s


_PROFILE_ARITY = {"uniform": (1, 1), "sine": (3, 3), "step": (3, 4)}


@dataclass
class RunConfig:
    """Fully validated run description."""

    spec: MixtureSpec
    scaling: ScalingConfig
    length: float
    cells: int
    boundary: str
    profiles: list
    T: Optional[float]
    P0: Optional[float]
    solver: SolverConfig
    out_dir: Optional[str] = None
    diagnostics: tuple = DIAGNOSTICS
    study_alphas: tuple = (0.4, 0.2, 0.1, 0.05)
    mep_states: int = 200
    mep_seed: int = 0
    oracle_sets: int = 20
    oracle_samples: int = 1_000_000
    oracle_seed: int = 0
    text: str = field(default="", repr=False)

    @property
    def alpha(self) -> float:
        return self.scaling.alpha

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode("utf-8")).hexdigest()

    @property
    def dx(self) -> float:
        return self.length / self.cells

    def initial_field(self) -> Field1D:
        """Cell-averaged initial data at the cell centres."""
        x = (np.arange(self.cells) + 0.5) * self.dx
        rho = np.stack([p.evaluate(x, self.length) for p in self.profiles])
        if self.T is not None:
            T = np.full(self.cells, self.T)
        else:
            T = self.P0 / rho.sum(axis=0)
        return Field1D(rho, np.zeros((self.spec.S, self.cells, 3)), T, self.dx, self.boundary)


def _tokens(raw):
    out = []
    lineno = 0
    section = None
    for lineno, line in enumerate(raw.splitlines(), start=1):
        line = re.split(r"[#;]", line, maxsplit=1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_-]+)\s*\]", line)
        if m:
            section = m.group(1).lower()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if line.startswith("["):
            raise ConfigError(f"malformed section header {line!r}", lineno)
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"empty key or value in {line!r}", lineno)
        out.append((section, key, value, lineno))
    return out


def _float(value, line, what):
    try:
        v = float(value)
    except ValueError:
        raise ConfigError(f"{what} must be a number, got {value!r}", line) from None
    if not math.isfinite(v):
        raise ConfigError(f"{what} must be finite, got {value!r}", line)
    return v


def _int(value, line, what):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{what} must be an integer, got {value!r}", line) from None


def _floats(value, line, what):
    return [_float(s, line, what) for s in value.split()]


def _bool(value, line, what):
    v = value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{what} must be a boolean, got {value!r}", line)


def _species(key, idx, S, line):
    if not (1 <= idx <= S):
        raise ConfigError(f"species index in {key!r} out of range 1..{S}", line)
    return idx - 1


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration.

    Defaults: ``m0`` is the arithmetic mean of the masses, ``K_i_i = 0``,
    ``alpha = 0`` (limit system), ``closure = equimolar``,
    ``cfl_safety = 0.4``, ``boundary = periodic``.

    Raises
    ------
    ConfigError
        On syntax errors, unknown keys, missing required keys, range
        violations or an asymmetric kernel matrix; the message carries the
        line number.
    """
    entries = _tokens(text)
    seen = {}
    for sec, key, value, line in entries:
        if (sec, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{sec}] (first on line {seen[sec, key]})", line)
        seen[sec, key] = line
    by_sec = {s: [(k, v, ln) for sec, k, v, ln in entries if sec == s] for s in SECTIONS}

    def need(sec, key):
        for k, v, ln in by_sec[sec]:
            if k == key:
                return v, ln
        raise ConfigError(f"missing required key {key!r} in [{sec}]")

    # mixture
    v, ln = need("mixture", "species")
    S = _int(v, ln, "species")
    if S < 2:
        raise ConfigError(f"species must be >= 2, got {S}", ln)
    m = None
    m0 = None
    b = None
    K = np.zeros((S, S))
    K_line = {}
    for key, v, ln in by_sec["mixture"]:
        km = re.fullmatch(r"K_(\d+)_(\d+)", key)
        if key == "species":
            continue
        elif key == "masses":
            m = _floats(v, ln, "masses")
            if len(m) != S:
                raise ConfigError(f"masses needs {S} entries, got {len(m)}", ln)
            if any(not (x > 0) for x in m):
                raise ConfigError("masses must be positive", ln)
        elif key == "m0":
            m0 = _float(v, ln, "m0")
            if not (m0 > 0):
                raise ConfigError("m0 must be positive", ln)
        elif key == "b":
            b = _floats(v, ln, "b")
            if len(b) != S or any(not (x > 0) for x in b):
                raise ConfigError(f"b needs {S} positive entries", ln)
        elif km:
            i = _species(key, int(km.group(1)), S, ln)
            j = _species(key, int(km.group(2)), S, ln)
            val = _float(v, ln, key)
            if val < 0:
                raise ConfigError(f"{key} must be nonnegative", ln)
            K[i, j] = val
            K_line[i, j] = ln
        else:
            raise ConfigError(f"unknown key {key!r} in [mixture]", ln)
    if m is None:
        need("mixture", "masses")
    for (i, j), ln in sorted(K_line.items()):
        if i != j and (j, i) not in K_line:
            K[j, i] = K[i, j]
    for (i, j), ln in sorted(K_line.items()):
        if i != j and K[i, j] != K[j, i]:
            raise ConfigError(f"K_{i + 1}_{j + 1} = {float(K[i, j])!r} and K_{j + 1}_{i + 1} = "
                              f"{float(K[j, i])!r} differ; the kernel matrix must be symmetric", ln)
    for i in range(S):
        for j in range(i + 1, S):
            if not (K[i, j] > 0):
                raise ConfigError(f"K_{i + 1}_{j + 1} missing or zero; every pair must interact")
    spec = MixtureSpec(m, K, m0, b)

    # scaling
    sc = {k: (v, ln) for k, v, ln in by_sec["scaling"]}
    for k, (v, ln) in sc.items():
        if k not in ("alpha", "tau", "L", "T0", "N", "r", "m0_kg"):
            raise ConfigError(f"unknown key {k!r} in [scaling]", ln)
    phys = {k: _float(v, ln, k) for k, (v, ln) in sc.items() if k != "alpha"}
    if "alpha" in sc and phys:
        raise ConfigError("give either alpha or physical reference scales, not both", sc["alpha"][1])
    if phys:
        missing = [k for k in ("tau", "L", "T0", "N", "r", "m0_kg") if k not in phys]
        if missing:
            raise ConfigError(f"physical scaling needs {missing} in [scaling]")
        for k, x in phys.items():
            if not (x > 0):
                raise ConfigError(f"reference scale {k} must be positive", sc[k][1])
        u0 = phys["L"] / phys["tau"]
        c0 = math.sqrt(5.0 * constants.Boltzmann * phys["T0"] / (3.0 * phys["m0_kg"]))
        Ma = u0 / c0
        Kn = phys["L"] ** 2 / (phys["N"] * 4.0 * math.pi * phys["r"] ** 2)
        if abs(Ma - Kn) / Ma > 1e-6:
            warnings.warn(f"Mach number {Ma:.6g} differs from Knudsen number {Kn:.6g}",
                          RuntimeWarning, stacklevel=2)
        scaling = ScalingConfig(Ma, phys["tau"], phys["L"], phys["T0"], phys["N"], phys["r"])
    elif "alpha" in sc:
        v, ln = sc["alpha"]
        a = _float(v, ln, "alpha")
        if a < 0:
            raise ConfigError("alpha must be >= 0", ln)
        scaling = ScalingConfig(a)
    else:
        scaling = ScalingConfig(0.0)

    # domain
    length, cells, boundary = 1.0, None, "periodic"
    for key, v, ln in by_sec["domain"]:
        if key == "length":
            length = _float(v, ln, "length")
            if not (length > 0):
                raise ConfigError("length must be positive", ln)
        elif key == "cells":
            cells = _int(v, ln, "cells")
            if cells < 2:
                raise ConfigError("cells must be >= 2", ln)
        elif key == "boundary":
            if v not in BOUNDARIES:
                raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {v!r}", ln)
            boundary = v
        else:
            raise ConfigError(f"unknown key {key!r} in [domain]", ln)
    if cells is None:
        need("domain", "cells")

    # initial
    profiles = [None] * S
    T = P0 = None
    for key, v, ln in by_sec["initial"]:
        pm = re.fullmatch(r"rho_(\d+)", key)
        if pm:
            i = _species(key, int(pm.group(1)), S, ln)
            parts = v.split()
            kind = parts[0]
            if kind not in _PROFILE_ARITY:
                raise ConfigError(f"profile must be uniform, sine or step, got {kind!r}", ln)
            lo, hi = _PROFILE_ARITY[kind]
            args = _floats(" ".join(parts[1:]), ln, key)
            if not (lo <= len(args) <= hi):
                raise ConfigError(f"{kind} profile takes {lo}..{hi} parameters, got {len(args)}", ln)
            if kind == "step" and len(args) == 3:
                args.append(0.0)
            if kind == "step" and args[3] < 0:
                raise ConfigError("step width must be >= 0", ln)
            profiles[i] = Profile(kind, tuple(args))
        elif key == "T":
            T = _float(v, ln, "T")
            if not (T > 0):
                raise ConfigError("T must be positive", ln)
        elif key == "P0":
            P0 = _float(v, ln, "P0")
            if not (P0 > 0):
                raise ConfigError("P0 must be positive", ln)
        else:
            raise ConfigError(f"unknown key {key!r} in [initial]", ln)
    for i, p in enumerate(profiles):
        if p is None:
            raise ConfigError(f"missing initial profile rho_{i + 1} in [initial]")
    if (T is None) == (P0 is None):
        raise ConfigError("[initial] needs exactly one of T or P0")

    # solver and output
    kw = {"alpha": scaling.alpha}
    out_dir, diags = None, DIAGNOSTICS
    for key, v, ln in by_sec["solver"]:
        if key == "closure":
            if v not in CLOSURES:
                raise ConfigError(f"closure must be one of {CLOSURES}, got {v!r}", ln)
            kw["closure"] = v
        elif key in ("cfl_safety", "t_end", "dt"):
            kw[key] = _float(v, ln, key)
        elif key == "energy_mass_factors":
            kw[key] = _bool(v, ln, key)
        else:
            raise ConfigError(f"unknown key {key!r} in [solver]", ln)
    for key, v, ln in by_sec["output"]:
        if key == "directory":
            out_dir = v
        elif key == "frame_interval":
            kw["frame_interval"] = _float(v, ln, key)
        elif key == "diagnostics":
            diags = tuple(v.split())
            bad = [d for d in diags if d not in DIAGNOSTICS]
            if bad:
                raise ConfigError(f"unknown diagnostics {bad}; choose from {DIAGNOSTICS}", ln)
        else:
            raise ConfigError(f"unknown key {key!r} in [output]", ln)
    try:
        solver = SolverConfig(**kw)
    except ValidationError as e:
        line = min((seen.get(("solver", k)) or seen.get(("output", k)) or 10**9) for k in kw)
        raise ConfigError(str(e), None if line == 10**9 else line) from None

    extra = {}
    for key, v, ln in by_sec["study"]:
        if key != "alphas":
            raise ConfigError(f"unknown key {key!r} in [study]", ln)
        al = _floats(v, ln, "alphas")
        if not al or any(not (a > 0) for a in al) or any(b > a for a, b in zip(al, al[1:])):
            raise ConfigError("study alphas must be positive and non-increasing", ln)
        extra["study_alphas"] = tuple(al)
    for sec, keys in (("mep", ("states", "seed")), ("oracle", ("sets", "samples", "seed"))):
        for key, v, ln in by_sec[sec]:
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", ln)
            n = _int(v, ln, key)
            if n < (0 if key == "seed" else 1) or (key == "seed" and n >= 2**64):
                raise ConfigError(f"{key} out of range", ln)
            extra[f"{sec}_{key}"] = n

    cfg = RunConfig(spec, scaling, length, cells, boundary, profiles, T, P0, solver,
                    out_dir, diags, text=text, **extra)
    x = (np.arange(cells) + 0.5) * cfg.dx
    for i, p in enumerate(profiles):
        r = p.evaluate(x, length)
        if np.any(~(r > 0)):
            raise ConfigError(f"initial profile rho_{i + 1} is not strictly positive "
                              f"(min {float(r.min()):.6g})", seen["initial", f"rho_{i + 1}"])
    p = cfg.initial_field().pressure
    if np.max(np.abs(p - p.mean())) > 1e-8 * p.mean():
        raise ConfigError("initial pressure sum_i rho_i T is not uniform; both solvers start "
                          "from the Maxwell-Stefan relations, which need it uniform (use "
                          "complementary density profiles or give P0 instead of T)",
                          seen.get(("initial", "T")))
    return cfg
