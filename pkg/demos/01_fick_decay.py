"""
Fick diffusion as the simplest Maxwell-Stefan limit
===================================================

Two species of equal mass at uniform total density.  The friction
relations then collapse to Fick's law for species 1 with diffusivity
D_eff = 3 T / (5 pi K_12 n), so a sine perturbation decays like
exp(-D_eff k^2 t).  We measure the decay rate on refined grids.
"""
import math
from pathlib import Path

import numpy as np

from maxent_ms.config import parse_config
from maxent_ms.solver import run_simulation

text = (Path(__file__).parent / "configs" / "fick.ini").read_text()

# D_eff = 3 / (5 pi * (1/pi) * 1) = 0.6 for the configured mixture
k = 2 * math.pi
expected = 0.6 * k**2


def amplitude(f):
    return 2 * np.sum((f.rho[0] - f.rho[0].mean()) * np.sin(k * f.x)) * f.dx


print(f"{'cells':>6} {'rate':>12} {'rel. error':>12}")
prev = None
for N in (32, 64, 128, 256):
    cfg = parse_config(text.replace("cells = 128", f"cells = {N}"))
    res = run_simulation(cfg.initial_field(), cfg.spec, cfg.solver)
    rate = -math.log(amplitude(res.final) / amplitude(res.frames[0])) / res.final.t
    err = rate / expected - 1
    ratio = f"  ratio {prev / err:.2f}" if prev else ""
    print(f"{N:>6} {rate:>12.6f} {err:>12.3e}{ratio}")
    prev = err

# Halving dx cuts the error by about 4: central gradients and the face
# friction solve are second order for this linear problem.
