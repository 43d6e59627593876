"""Command-line front end: ``fermispec hull|hfb|exact|figures``.

Every command reads an INI configuration file.  ``--override section.key=value``
flags replace individual entries and always win over the file.  Outputs are
deterministic: the same configuration yields byte-identical files.

Exit codes: 0 success, 1 runtime guard violation, 2 configuration error,
3 HFB solver did not converge, 4 exact-diagonalization mode guard.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import exactdiag as ed
from . import hfb
from .export import (blocks_json, envelope_json, fmt_float, grid_metadata, write_bottoms_csv,
                     write_dispersion_csv, write_envelope_csv, write_json)
from .lattice import (DispersionRelation, build_grid, free_dispersion, kinetic_energy,
                      model_dispersion)
from .quasispectrum import (SECTORS, SpectrumEnvelope, brute_force_hull, gap_and_cvel,
                            region_raster, sector_hulls)
from .svg import write_region_svg

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "build_potential",
           "cmd_hull", "cmd_hfb", "cmd_exact", "cmd_figures", "main"]

log = logging.getLogger("fermispec")

EXIT_OK, EXIT_GUARD, EXIT_CONFIG, EXIT_UNCONVERGED, EXIT_MODES = 0, 1, 2, 3, 4

DEFAULTS = {
    "grid": {"d": "1", "L": "25.132741228718345", "cutoff": "4.0"},
    "physics": {"mu": "1.0", "gamma": "0.5", "dispersion": "free",
                "potential": "contact", "mean_field": "full", "g": "0.0",
                "width": "1.0", "table": ""},
    "solver": {"tol": "1e-10", "damping": "0.5", "max_iter": "20000", "delta0": ""},
    "hull": {"mode": "windowed", "oracle": "false", "n_max": "6"},
    "hfb": {"chain_hull": "false"},
    "exact": {"hfb": "true"},
    "figures": {"mu": "1.0", "gamma": "0.5", "L1": "25.132741228718345", "cutoff1": "4.0",
                "L2": "25.132741228718345", "cutoff2": "3.0", "display": "2.5",
                "energy_max": "3.0", "energy_steps": "241"},
    "output": {"dir": "out", "formats": "csv,json"},
}


class ConfigError(Exception):
    """Invalid or incomplete experiment configuration (exit code 2)."""


@dataclass
class ExperimentConfig:
    """Parsed configuration with typed accessors over INI sections."""

    parser: configparser.ConfigParser
    source: str

    def _raw(self, section, key):
        try:
            return self.parser.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            raise ConfigError(f"missing setting {section}.{key}") from None

    def str(self, section, key) -> str:
        return self._raw(section, key).strip()

    def float(self, section, key) -> float:
        raw = self.str(section, key)
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}: not a number: {raw!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{section}.{key}: must be finite, got {raw!r}")
        return value

    def int(self, section, key) -> int:
        raw = self.str(section, key)
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}: not an integer: {raw!r}") from None

    def bool(self, section, key) -> bool:
        raw = self.str(section, key).lower()
        if raw in ("1", "true", "yes", "on"):
            return True
        if raw in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{section}.{key}: not a boolean: {raw!r}")


def load_config(path, overrides=()) -> ExperimentConfig:
    """Read the INI file at ``path`` on top of the defaults, then apply overrides."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict(DEFAULTS)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot or not section or not option:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value.strip())
    return ExperimentConfig(parser, str(path))


# ---------------------------------------------------------------------------
# building blocks shared by the commands
# ---------------------------------------------------------------------------

def _grid(cfg: ExperimentConfig):
    d = cfg.int("grid", "d")
    try:
        return build_grid(d, cfg.float("grid", "L"), cfg.float("grid", "cutoff"))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def _table_potential(path: str) -> Callable:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"potential table not found: {path}")
    try:
        data = np.loadtxt(p, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"potential table {path}: {exc}") from None
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise ConfigError(f"potential table {path}: need two columns q,vhat and two rows")
    q, v = data[:, 0], data[:, 1]
    if np.any(np.diff(q) <= 0) or not np.all(np.isfinite(data)):
        raise ConfigError(f"potential table {path}: q must be increasing and finite")

    def vhat(k):
        r = np.linalg.norm(np.asarray(k, dtype=float), axis=-1)
        return np.interp(r, q, v, left=v[0], right=0.0)

    vhat.descriptor = {"potential": "table", "path": str(path)}
    return vhat


def build_potential(cfg: ExperimentConfig) -> Callable:
    """Radial potential transform from the ``[physics]`` section."""
    kind = cfg.str("physics", "potential")
    if kind == "contact":
        return hfb.contact_potential(cfg.float("physics", "g"))
    if kind == "gaussian":
        width = cfg.float("physics", "width")
        if width <= 0:
            raise ConfigError("physics.width must be positive")
        return hfb.gaussian_potential(cfg.float("physics", "g"), width)
    if kind == "table":
        return _table_potential(cfg.str("physics", "table"))
    raise ConfigError(f"physics.potential must be contact, gaussian or table, got {kind!r}")


def _solver_options(cfg: ExperimentConfig) -> dict:
    tol = cfg.float("solver", "tol")
    damping = cfg.float("solver", "damping")
    max_iter = cfg.int("solver", "max_iter")
    if tol <= 0:
        raise ConfigError("solver.tol must be positive")
    if not 0 < damping <= 1:
        raise ConfigError(f"solver.damping must lie in (0, 1], got {damping}")
    if max_iter < 1:
        raise ConfigError("solver.max_iter must be at least 1")
    return {"tol": tol, "damping": damping, "max_iter": max_iter}


def _seed(cfg, tau):
    raw = cfg.str("solver", "delta0")
    if not raw:
        return None
    return hfb.pairing_seed(tau, cfg.float("solver", "delta0"))


def _out_dir(cfg: ExperimentConfig, out: Optional[str]) -> Path:
    path = Path(out) if out else Path(cfg.str("output", "dir"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _formats(cfg) -> set:
    fmts = {f.strip() for f in cfg.str("output", "formats").split(",") if f.strip()}
    if not fmts <= {"csv", "json"}:
        raise ConfigError(f"output.formats accepts csv and json, got {sorted(fmts)}")
    return fmts


def _summary(env: SpectrumEnvelope) -> dict:
    s = gap_and_cvel(env)
    return {"gap": s.gap, "critical_velocity": s.critical_velocity,
            "argmin_gap": s.argmin_gap,
            "argmin_critical_velocity": s.argmin_cvel}


def _write_hulls(out: Path, prefix: str, hulls: dict, fmts: set, extra: dict) -> dict:
    if "csv" in fmts:
        for sector in SECTORS:
            write_envelope_csv(out / f"{prefix}_{sector}.csv", hulls[sector])
    if "json" in fmts:
        write_json(out / f"{prefix}.json", envelope_json(hulls[s] for s in SECTORS))
    summary = dict(extra)
    summary["sectors"] = {s: _summary(hulls[s]) for s in SECTORS}
    summary.update(_summary(hulls["full"]))
    write_json(out / f"{prefix}_summary.json", summary)
    return summary


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _hull_dispersion(cfg, grid) -> DispersionRelation:
    kind = cfg.str("physics", "dispersion")
    mu = cfg.float("physics", "mu")
    if kind == "free":
        return free_dispersion(grid, mu)
    if kind == "model":
        gamma = cfg.float("physics", "gamma")
        if gamma < 0:
            raise ConfigError("physics.gamma must be non-negative")
        return model_dispersion(grid, mu, gamma)
    raise ConfigError(f"physics.dispersion must be free or model, got {kind!r}")


def cmd_hull(cfg: ExperimentConfig, out: Optional[str] = None) -> int:
    """Sector hulls, essential hulls and the gap / critical-velocity summary."""
    grid = _grid(cfg)
    mode = cfg.str("hull", "mode")
    if mode not in ("windowed", "reporting"):
        raise ConfigError(f"hull.mode must be windowed or reporting, got {mode!r}")
    omega = _hull_dispersion(cfg, grid)
    fmts = _formats(cfg)
    outdir = _out_dir(cfg, out)
    hulls = sector_hulls(omega, mode=mode)
    extra = {"grid": grid_metadata(hulls["full"].grid), "mode": mode,
             "dispersion": omega.label, "mu": cfg.float("physics", "mu")}
    if cfg.bool("hull", "oracle"):
        n_max = cfg.int("hull", "n_max")
        checks = {}
        for sector in ("full", "even", "odd"):
            ref = brute_force_hull(omega, n_max, parity=None if sector == "full" else sector)
            mine = hulls[sector].values
            if mode == "reporting":
                ref = ref.restricted(hulls[sector].grid)
            checks[sector] = bool(np.array_equal(ref.values, mine))
        extra["oracle"] = {"n_max": n_max, "equal": checks}
    summary = _write_hulls(outdir, "hull", hulls, fmts, extra)
    print(f"hull: gap {fmt_float(summary['gap'])}, "
          f"critical velocity {fmt_float(summary['critical_velocity'])}")
    return EXIT_OK


def _kernel(cfg, grid, vhat, allow_pairing=True):
    """HFB kernels; ``mean_field = pairing`` keeps only the pairing channel."""
    kind = cfg.str("physics", "mean_field")
    if kind == "full":
        return hfb.kernels_from_potential(vhat, grid)
    if kind == "pairing" and allow_pairing:
        full = hfb.kernels_from_potential(vhat, grid)
        return hfb.InteractionKernel(grid, full.alpha, np.zeros_like(full.beta),
                                     {**full.descriptor, "mean_field": "pairing"})
    raise ConfigError(f"physics.mean_field must be full"
                      f"{' or pairing' if allow_pairing else ' for exact runs'}, got {kind!r}")


def _solve(cfg, grid, tau, vhat, allow_pairing=True):
    kernel = _kernel(cfg, grid, vhat, allow_pairing)
    return hfb.solve_gap_equation(kernel, tau, init=_seed(cfg, tau), **_solver_options(cfg))


def cmd_hfb(cfg: ExperimentConfig, out: Optional[str] = None) -> int:
    """Solve the gap equation; write the solver report and ``D(k)``."""
    grid = _grid(cfg)
    tau = kinetic_energy(grid, cfg.float("physics", "mu"))
    vhat = build_potential(cfg)
    opts = _solver_options(cfg)
    fmts = _formats(cfg)
    outdir = _out_dir(cfg, out)
    sol = _solve(cfg, grid, tau, vhat)
    report = hfb.solver_report(sol)
    report["potential"] = dict(getattr(vhat, "descriptor", {}))
    report["tol"] = opts["tol"]
    write_json(outdir / "hfb_report.json", report)
    D = hfb.quasiparticle_dispersion(sol)
    if "csv" in fmts:
        write_dispersion_csv(outdir / "hfb_D.csv", D)
    if not sol.converged:
        print(f"hfb: not converged after {sol.iterations} iterations, "
              f"residual {fmt_float(sol.residual)}", file=sys.stderr)
        return EXIT_UNCONVERGED
    if cfg.bool("hfb", "chain_hull"):
        hulls = sector_hulls(D, mode=cfg.str("hull", "mode"))
        _write_hulls(outdir, "hfb_hull", hulls, fmts, {"dispersion": "hfb_D"})
    print(f"hfb: branch {sol.branch}, B {fmt_float(report['B'])}, "
          f"gap {fmt_float(report['gap'])}")
    return EXIT_OK


def cmd_exact(cfg: ExperimentConfig, out: Optional[str] = None) -> int:
    """Exact diagonalization on the configured grid, with optional HFB bounds."""
    grid = _grid(cfg)
    try:
        modes = ed.ModeSet(grid)
    except ed.ModeGuardError as exc:
        print(f"exact: {exc}", file=sys.stderr)
        return EXIT_MODES
    tau = kinetic_energy(grid, cfg.float("physics", "mu"))
    vhat = build_potential(cfg)
    fmts = _formats(cfg)
    outdir = _out_dir(cfg, out)
    blocks = ed.build_blocks(modes, tau, ed.local_interaction(modes, vhat))
    fv = ed.finite_volume_spectrum(blocks)
    gs = fv.ground
    summary = {
        "grid": grid_metadata(grid),
        "potential": dict(getattr(vhat, "descriptor", {})),
        "ground_energy": gs.energy,
        "ground_block": {"K": list(gs.total_momentum), "parity": gs.parity,
                         "n": gs.particle_number},
        "ground_degeneracy": gs.degeneracy,
        "flags": fv.flags,
    }
    if "json" in fmts:
        write_json(outdir / "exact_blocks.json", blocks_json(blocks))
    if "csv" in fmts:
        write_bottoms_csv(outdir / "exact_even.csv", grid, fv.bottoms_even, "even")
        write_bottoms_csv(outdir / "exact_odd.csv", grid, fv.bottoms_odd, "odd")
    code = EXIT_OK
    if cfg.bool("exact", "hfb"):
        sol = _solve(cfg, grid, tau, vhat, allow_pairing=False)
        bounds = hfb.variational_bounds(sol, gs.energy, lambda k: fv.bottom(-1, k))
        summary["bounds"] = {
            "branch": sol.branch,
            "converged": sol.converged,
            "B": sol.observables.B,
            "ground_holds": bounds.ground_holds,
            "ground_margin": bounds.ground_margin,
            "odd": [{"k": list(k), "holds": bounds.odd_holds[k], "margin": m}
                    for k, m in sorted(bounds.odd_margins.items())],
        }
        if not sol.converged:
            code = EXIT_UNCONVERGED
    write_json(outdir / "exact_summary.json", summary)
    print(f"exact: E {fmt_float(gs.energy)} in block K={list(gs.total_momentum)}, "
          f"parity {gs.parity:+d}")
    return code


FIGURES = (
    # (file stem, interacting, dimension, sector)
    ("fig01_free_d1_full", False, 1, "full"),
    ("fig02_free_d1_even", False, 1, "even"),
    ("fig03_free_d1_odd", False, 1, "odd"),
    ("fig04_free_d2_full", False, 2, "full"),
    ("fig05_model_d1_full", True, 1, "full"),
    ("fig06_model_d1_even", True, 1, "even"),
    ("fig07_model_d1_odd", True, 1, "odd"),
    ("fig08_model_d2_full", True, 2, "full"),
    ("fig09_model_d2_even", True, 2, "even"),
    ("fig10_model_d2_odd", True, 2, "odd"),
)


def figure_regions(cfg: ExperimentConfig) -> dict:
    """Rasterized spectrum regions of the ten figures, keyed by file stem."""
    mu = cfg.float("figures", "mu")
    gamma = cfg.float("figures", "gamma")
    emax = cfg.float("figures", "energy_max")
    steps = cfg.int("figures", "energy_steps")
    if gamma < 0 or emax <= 0 or steps < 2:
        raise ConfigError("figures: need gamma >= 0, energy_max > 0, energy_steps >= 2")
    grids = {}
    for d in (1, 2):
        try:
            grids[d] = build_grid(d, cfg.float("figures", f"L{d}"),
                                  cfg.float("figures", f"cutoff{d}"))
        except ValueError as exc:
            raise ConfigError(f"figures: {exc}") from None
    cache = {}
    regions = {}
    for stem, interacting, d, sector in FIGURES:
        key = (interacting, d)
        if key not in cache:
            g = grids[d]
            omega = model_dispersion(g, mu, gamma) if interacting else free_dispersion(g, mu)
            cache[key] = (omega, sector_hulls(omega))
        omega, hulls = cache[key]
        style = "dotted" if sector == "even" else "solid"
        regions[stem] = region_raster(hulls[f"essential_{sector}"], [(omega, style)],
                                      energy_max=emax, energy_steps=steps, title=stem)
    return regions


def cmd_figures(cfg: ExperimentConfig, out: Optional[str] = None) -> int:
    """Write the ten spectrum figures as SVG files."""
    display = cfg.float("figures", "display")
    if display <= 0:
        raise ConfigError("figures.display must be positive")
    outdir = _out_dir(cfg, out)
    for stem, region in figure_regions(cfg).items():
        write_region_svg(outdir / f"{stem}.svg", region, momentum_range=(-display, display))
    print(f"figures: wrote {len(FIGURES)} files to {outdir}")
    return EXIT_OK


COMMANDS = {"hull": cmd_hull, "hfb": cmd_hfb, "exact": cmd_exact, "figures": cmd_figures}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fermispec",
                                 description="Excitation spectra of Fermi gases.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="INI configuration file")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="replace one configuration entry; may be repeated")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.override)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
