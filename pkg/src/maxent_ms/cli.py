"""Command-line runner: ``maxent-ms <command> --config run.ini``.

Commands
--------
simulate           run the configured scenario, write fields and diagnostics
mep-check          dual Newton vs closed-form multipliers on random states
collision-oracle   Monte Carlo weak-form integrals vs closed forms
relaxation-study   distance of scaled-system runs from the limit system
entropy-audit      per-step entropy increments and balance residuals

Exit codes: 0 success, 2 invalid input, 3 numerical failure.  Files written
by a failing command are removed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .closure import MomentTargets, multipliers_closed_form, relative_discrepancy, solve_dual
from .collisions import PSI_KINDS, mc_weak_form, roundoff_floor, weak_form_closed
from .config import RunConfig, parse_config
from .diagnostics import (StepMonitor, conservation_audit, convergence_study, entropy_report)
from .errors import NumericalError, ValidationError
from .model import constraint_residual, random_case
from .solver import run_simulation, total_energy

log = logging.getLogger("maxent_ms")

ENV_OUT = "MAXENT_MS_OUT"
DEFAULT_OUT = "maxent_ms_out"
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def fmt(x) -> str:
    return "%.17g" % x


class Outputs:
    """Tracks files written in an output directory so they can be rolled back."""

    def __init__(self, directory: Path, cfg: RunConfig, command: str):
        self.dir = directory
        self.cfg = cfg
        self.command = command
        self.written = []
        self.created_dir = not directory.exists()

    def _open(self, name):
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        self.written.append(path)
        return open(path, "w", newline="\n")

    def csv(self, name, columns, units, rows):
        with self._open(name) as fh:
            fh.write(f"# maxent-ms {self.command} config_sha256={self.cfg.config_hash}\n")
            fh.write("# units: " + ", ".join(f"{c} [{u}]" for c, u in zip(columns, units)) + "\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")

    def dat(self, name, columns, blocks):
        """gnuplot data: whitespace columns, blank-line separated blocks."""
        with self._open(name) as fh:
            fh.write(f"# maxent-ms {self.command} config_sha256={self.cfg.config_hash}\n")
            fh.write("# " + " ".join(columns) + "\n")
            for k, block in enumerate(blocks):
                if k:
                    fh.write("\n\n")
                for row in block:
                    fh.write(" ".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")

    def manifest(self, seed, wall, summary):
        with self._open("manifest.json") as fh:
            json.dump({"command": self.command, "version": __version__,
                       "config_sha256": self.cfg.config_hash, "config": self.cfg.text,
                       "seed": seed, "wall_time_s": wall, "summary": summary,
                       "files": sorted(p.name for p in self.written)}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def rollback(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass
        if self.created_dir:
            try:
                self.dir.rmdir()
            except OSError:
                pass


def _species_cols(prefix, S):
    return [f"{prefix}_{i + 1}" for i in range(S)]


def cmd_simulate(cfg: RunConfig, out: Outputs, args) -> dict:
    spec, solver = cfg.spec, cfg.solver
    S = spec.S
    mon = StepMonitor(spec, cfg.alpha, balance="balance" in cfg.diagnostics)
    res = run_simulation(cfg.initial_field(), spec, solver, monitors=[mon])
    frames = res.frames

    cols = ["t", "x", *_species_cols("rho", S), *_species_cols("u", S), "T"]
    units = ["1", "1", *["1"] * S, *["1"] * S, "1"]
    rows, blocks = [], []
    for f in frames:
        block = []
        for j in range(f.N):
            block.append([f.t, f.x[j], *f.rho[:, j], *f.u[:, j, 0], f.T[j]])
        rows.extend(block)
        blocks.append(block)
    out.csv("fields.csv", cols, units, rows)
    out.dat("fields.dat", cols, blocks)

    step_t = np.array(mon.t[1:])
    bal = np.array(mon.balance_max) if mon.balance_max else np.zeros(len(step_t))
    pres = np.array(mon.pressure_residual)
    drows = []
    prev_t = -np.inf
    for f in frames:
        rep = entropy_report(f, spec, cfg.alpha)
        sel = (step_t > prev_t) & (step_t <= f.t)
        drows.append([f.t, rep.int_H, rep.int_D_reduced, *(f.rho.sum(axis=1) * f.dx),
                      total_energy(f, spec, solver),
                      float(pres[sel].max()) if sel.any() else f.pressure_residual,
                      float(bal[sel].max()) if sel.any() else 0.0])
        prev_t = f.t
    dcols = ["t", "int_H", "int_D", *_species_cols("mass", S), "energy",
             "pressure_residual", "balance_residual_max"]
    dunits = ["1", "1", "1", *["1"] * S, "1", "1", "1"]
    out.csv("diagnostics.csv", dcols, dunits, drows)
    out.dat("diagnostics.dat", dcols, [drows])

    summary = {"n_steps": res.n_steps, "n_frames": len(frames),
               "min_entropy_increment": mon.min_increment}
    if "conservation" in cfg.diagnostics:
        audit = conservation_audit(frames, spec, solver)
        summary.update(mass_drift=[float(x) for x in audit.mass_drift],
                       energy_drift=audit.energy_drift,
                       pressure_uniformity=audit.pressure_uniformity)
    return summary


def cmd_mep_check(cfg: RunConfig, out: Outputs, args) -> dict:
    seed = cfg.mep_seed if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(cfg.mep_states):
        spec, state, alpha = random_case(rng)
        closed = multipliers_closed_form(spec, state, alpha)
        targets = MomentTargets.from_state(spec, state, alpha)
        disc = max(relative_discrepancy(solve_dual(targets, spec, i), closed[i])
                   for i in range(spec.S))
        cres = max(constraint_residual(spec, state, alpha, i) for i in range(spec.S))
        rows.append([k, spec.S, alpha, disc, cres])
    out.csv("mep_check.csv",
            ["state", "S", "alpha", "max_multiplier_discrepancy", "max_constraint_residual"],
            ["1", "1", "1", "relative", "relative"], rows)
    return {"states": len(rows), "seed": seed,
            "max_multiplier_discrepancy": max(r[3] for r in rows),
            "max_constraint_residual": max(r[4] for r in rows)}


def cmd_collision_oracle(cfg: RunConfig, out: Outputs, args) -> dict:
    seed = cfg.oracle_seed if args.seed is None else args.seed
    n = cfg.oracle_samples if args.samples is None else args.samples
    rng = np.random.default_rng(seed)
    rows = []
    failures = 0
    for k in range(cfg.oracle_sets):
        spec, state, alpha = random_case(rng, S=2, alphas=(0.1, 0.5, 1.0))
        for i, j in ((0, 1), (0, 0)):
            floor = roundoff_floor(spec, state, alpha, i, j)
            for psi in PSI_KINDS:
                est_seed = int(rng.integers(2**63))
                est = mc_weak_form(spec, state, alpha, i, j, psi, n, est_seed, args.threads)
                target = np.atleast_1d(weak_form_closed(spec, state, alpha, i, j, psi))
                ok = np.atleast_1d(est.within(target, 3.0, floor))
                mean, se = np.atleast_1d(est.mean), np.atleast_1d(est.stderr)
                for c in range(mean.size):
                    failures += not ok[c]
                    rows.append([k, i + 1, j + 1, psi, c, mean[c], se[c], target[c], floor,
                                 "pass" if ok[c] else "fail"])
    out.csv("oracle.csv",
            ["set", "i", "j", "psi", "component", "mc_mean", "stderr", "closed_form",
             "floor", "verdict"],
            ["1", "1", "1", "-", "1", "1", "1", "1", "1", "-"], rows)
    return {"sets": cfg.oracle_sets, "samples": n, "seed": seed, "failures": failures}


def cmd_relaxation_study(cfg: RunConfig, out: Outputs, args) -> dict:
    table = convergence_study(cfg.initial_field(), cfg.spec, cfg.solver, cfg.study_alphas)
    rows = [[r.alpha, r.err_rho, r.err_u, r.err, r.ratio, r.order] for r in table]
    cols = ["alpha", "err_rho", "err_u", "err", "ratio", "order"]
    out.csv("relaxation.csv", cols, ["1"] * 6, rows)
    out.dat("relaxation.dat", cols, [rows])
    return {"errors": [r.err for r in table], "last_order": table[-1].order}


def cmd_entropy_audit(cfg: RunConfig, out: Outputs, args) -> dict:
    spec = cfg.spec
    mon = StepMonitor(spec, cfg.alpha)
    res = run_simulation(cfg.initial_field(), spec, cfg.solver, monitors=[mon])
    rows = [[mon.t[k + 1], mon.t[k + 1] - mon.t[k], mon.int_H[k + 1], mon.dH[k],
             mon.balance_max[k], mon.pressure_residual[k]] for k in range(len(mon.dH))]
    cols = ["t", "dt", "int_H", "dH", "balance_residual_max", "pressure_residual"]
    out.csv("entropy_audit.csv", cols, ["1"] * 6, rows)
    out.dat("entropy_audit.dat", cols, [rows])
    return {"n_steps": res.n_steps, "min_entropy_increment": mon.min_increment,
            "max_balance_residual": max(mon.balance_max, default=0.0)}


COMMANDS = {
    "simulate": cmd_simulate,
    "mep-check": cmd_mep_check,
    "collision-oracle": cmd_collision_oracle,
    "relaxation-study": cmd_relaxation_study,
    "entropy-audit": cmd_entropy_audit,
}


def _u64(s):
    v = int(s)
    if not (0 <= v < 2**64):
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxent-ms", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="run configuration (.ini)")
        sp.add_argument("--out", type=Path, default=None,
                        help=f"output directory (default: [output] directory, then ${ENV_OUT}, "
                             f"then ./{DEFAULT_OUT})")
        sp.add_argument("--seed", type=_u64, default=None,
                        help="override the configured seed (unsigned 64-bit)")
        sp.add_argument("--samples", type=_positive_int, default=None,
                        help="override the Monte Carlo sample count")
        sp.add_argument("--threads", type=_positive_int, default=1,
                        help="worker threads; results do not depend on this")
        sp.add_argument("--quiet", action="store_true", help="suppress the JSON summary")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config.read_text())
    except OSError as e:
        log.error("cannot read config: %s", e)
        return EXIT_INVALID
    except ValidationError as e:
        log.error("invalid config %s: %s", args.config, e)
        return EXIT_INVALID
    directory = args.out or (Path(cfg.out_dir) if cfg.out_dir else None) \
        or Path(os.environ.get(ENV_OUT, DEFAULT_OUT))
    out = Outputs(directory, cfg, args.command)
    t0 = time.perf_counter()
    try:
        summary = COMMANDS[args.command](cfg, out, args)
        out.manifest(args.seed, time.perf_counter() - t0, summary)
    except ValidationError as e:
        out.rollback()
        log.error("%s: invalid input: %s", args.command, e)
        return EXIT_INVALID
    except NumericalError as e:
        out.rollback()
        log.error("%s: numerical failure: %s", args.command, e)
        return EXIT_NUMERICAL
    except BaseException:
        out.rollback()
        raise
    if not args.quiet:
        print(json.dumps({"command": args.command, "out": str(directory), **summary},
                         sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
