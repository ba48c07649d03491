"""
From the scaled moment system to Maxwell-Stefan
===============================================

For alpha > 0 the species momenta evolve with a stiff friction source of
strength 1/alpha^2.  As alpha -> 0 the momenta relax onto the
Maxwell-Stefan relations; the distance between both solutions at t_end
shrinks with alpha.
"""
from pathlib import Path

from maxent_ms.config import parse_config
from maxent_ms.diagnostics import convergence_study

cfg = parse_config((Path(__file__).parent / "configs" / "relaxation.ini").read_text())
rows = convergence_study(cfg.initial_field(), cfg.spec, cfg.solver, cfg.study_alphas)

print(f"{'alpha':>6} {'L2(rho)':>11} {'L2(u)':>11} {'ratio':>7} {'order':>6}")
for r in rows:
    print(f"{r.alpha:>6} {r.err_rho:>11.3e} {r.err_u:>11.3e} {r.ratio:>7.2f} {r.order:>6.2f}")
