"""Command-line front end.

Effective settings are merged as: built-in defaults, then a JSON config file
(``--config``), then ``BCDRES_*`` environment variables, then flags. Each run
writes its CSV files plus ``manifest.json`` (all effective parameters) into
``--out``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import re
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as bio
from .deformation import DeformationParams, build_deformation, validate_parameters
from .errors import BCDError, PatternMismatch, SingularKPoint
from .free1d import (POTENTIALS, Grid1D, complex_scaled_spectrum, free_scan, refine_free,
                     resonant_pair_free)
from .greens import ComplexEnergyGrid, GreenEvaluator, dos_bcd, dos_smearing, trace_map
from .lattice import TightBindingModel, load_model, sorted_band_path
from .models import (make_adatom_defect, make_chain, make_diatomic, make_diatomic_defect,
                     make_flatband, make_graphene)
from .nonlinear import local_minima
from .resonance import (DefectOperator, ExtraSite, normalize_residue, refine_resonance,
                        residue_condition, resonant_state_samples, svd_scan)

ENV_PREFIX = "BCDRES_"
COMMANDS = ("bands", "greenmap", "dos", "scan", "refine", "free1d", "validate")
DUPLICATE_TOL = 1e-8         # zeros closer than this are one root
STABILITY_TOL = 1e-4         # max move of a physical zero from N to 2N
FREE_STABILITY_TOL = 1e-3    # max move of a free-space resonance from L to 2L


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = "bands"
    model: str = "diatomic(1,0)"
    defect: str | None = None
    energy: float | None = None
    adaptive: bool = False
    alpha: float = 0.3
    delta_e: float = 0.5
    nk: int = 50
    window: list[float] | None = None          # re_min, re_max, im_min, im_max
    resolution: list[int] = field(default_factory=lambda: [81, 41])   # n_re, n_im
    seed_z: list[complex] = field(default_factory=list)
    out: str = "out"
    workers: int = 1
    eta: float = 0.3
    rmax: float | None = None
    state_radius: int = 8
    box_length: float = 10.0
    step: float = 0.05
    theta: float = math.pi / 5
    scan_window: list[float] = field(default_factory=lambda: [0.05, 2.5, -1.5, 0.05])
    potential: str = "double-well"

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        for name in ("alpha", "delta_e", "eta", "box_length", "step", "theta"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
        if self.energy is not None and not math.isfinite(self.energy):
            raise ConfigError("energy must be finite")
        if self.rmax is not None and not (math.isfinite(self.rmax) and self.rmax >= 0):
            raise ConfigError("rmax must be a non-negative number")
        if int(self.nk) != self.nk or self.nk < 2:
            raise ConfigError("nk must be an integer >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in ("window", "scan_window"):
            w = getattr(self, name)
            if w is not None and (len(w) != 4 or not all(math.isfinite(x) for x in w)
                                  or w[0] > w[1] or w[2] > w[3]):
                raise ConfigError(f"{name} must be re_min re_max im_min im_max with finite ordered values")
        if len(self.resolution) != 2 or min(self.resolution) < 1:
            raise ConfigError("resolution must be two positive integers")
        if any(not (math.isfinite(z.real) and math.isfinite(z.imag)) for z in self.seed_z):
            raise ConfigError("seeds must be finite")
        if self.potential not in POTENTIALS:
            raise ConfigError(f"unknown potential {self.potential!r}; available: {sorted(POTENTIALS)}")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["seed_z"] = [[z.real, z.imag] for z in self.seed_z]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k, v in data.items():
            kw[k] = _coerce(k, v)
        return cls(**kw)


_FLOATS = {"energy", "alpha", "delta_e", "eta", "rmax", "box_length", "step", "theta"}
_INTS = {"nk", "workers", "state_radius"}


def parse_complex(text) -> complex:
    if isinstance(text, (list, tuple)):
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float, complex)):
        return complex(text)
    s = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise ConfigError(f"cannot read {text!r} as a complex number") from None


def _coerce(key, value):
    try:
        if value is None:
            return None
        if key in _FLOATS:
            return float(value)
        if key in _INTS:
            if float(value) != int(float(value)):
                raise ConfigError(f"{key} must be an integer")
            return int(float(value))
        if key == "adaptive":
            if isinstance(value, str):
                return value.strip().lower() in ("1", "true", "yes", "on")
            return bool(value)
        if key in ("window", "scan_window"):
            if isinstance(value, str):
                value = value.replace(",", " ").split()
            return [float(x) for x in value]
        if key == "resolution":
            if isinstance(value, str):
                value = value.replace(",", " ").split()
            return [int(x) for x in value]
        if key == "seed_z":
            if isinstance(value, str):
                value = [v for v in re.split(r"[,\s]+", value) if v]
            return [parse_complex(v) for v in value]
        return str(value)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad value for {key}: {value!r}") from None


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    names = {f.name for f in dataclasses.fields(RunConfig)} - {"command"}
    out = {}
    for name in names:
        key = ENV_PREFIX + name.upper()
        if key in environ:
            out[name] = environ[key]
    return out


# ---------------------------------------------------------------- systems

_CALL = re.compile(r"^\s*([A-Za-z][\w-]*)\s*(?:\((.*)\))?\s*$")


def _args(text):
    if not text or not text.strip():
        return []
    return [float(a) for a in text.split(",")]


def build_model(spec: str) -> TightBindingModel:
    """``diatomic(Ea,Eb)``, ``graphene(t)``, ``chain1band(t)``, ``flatband(E0)`` or a JSON file."""
    m = _CALL.match(spec)
    if m and m.group(1) in ("diatomic", "graphene", "chain1band", "flatband"):
        name = m.group(1)
        try:
            args = _args(m.group(2))
            if name == "diatomic":
                return make_diatomic(*args)
            if name == "graphene":
                return make_graphene(*args)
            if name == "chain1band":
                return make_chain(*args)
            return make_flatband(*args)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad model spec {spec!r}: {exc}") from None
    if Path(spec).is_file():
        try:
            return load_model(spec)
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad model file {spec}: {exc}") from None
    raise ConfigError(f"unknown model {spec!r} (not a built-in name or an existing file)")


def _kv(text):
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip().lower()] = v.strip()
    return out


def defect_from_dict(data: dict) -> DefectOperator:
    entries = {}
    for e in data.get("lattice_entries", []):
        entries[(tuple(e["R"]), int(e["i"]), tuple(e["Rp"]), int(e["j"]))] = parse_complex(e["value"])
    sites = []
    for s in data.get("extra_sites", []):
        couplings = {(tuple(c["R"]), int(c["i"])): parse_complex(c["value"]) for c in s["couplings"]}
        sites.append(ExtraSite(float(s["energy"]), couplings))
    return DefectOperator(entries, tuple(sites))


def build_defect(spec: str | None, model: TightBindingModel) -> DefectOperator | None:
    """``bonds:eps=0.2``, ``adatom:eps=0.4,ed=2,attach=0`` or a JSON file."""
    if spec is None or spec.strip().lower() in ("", "none"):
        return None
    try:
        if spec.startswith("bonds:"):
            kv = _kv(spec[len("bonds:"):])
            cells = tuple(int(c) for c in kv.get("cells", "-1;1").split(";"))
            defect = make_diatomic_defect(float(kv["eps"]), cells)
        elif spec.startswith("adatom:"):
            kv = _kv(spec[len("adatom:"):])
            cell = tuple(int(c) for c in kv["cell"].split(";")) if "cell" in kv else (0,) * model.d
            defect = make_adatom_defect(float(kv["eps"]), float(kv["ed"]), int(kv.get("attach", 0)), cell)
        elif Path(spec).is_file():
            with open(spec) as fh:
                defect = defect_from_dict(json.load(fh))
        else:
            raise ConfigError(f"unknown defect spec {spec!r}")
    except KeyError as exc:
        raise ConfigError(f"defect spec {spec!r} is missing {exc}") from None
    except (TypeError, ValueError, json.JSONDecodeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad defect spec {spec!r}: {exc}") from None
    defect.check_against(model)
    return defect


# ---------------------------------------------------------------- commands

def _meta(cfg: RunConfig, model, mode: str, **extra) -> dict:
    meta = {"model": model.name, "N": cfg.nk, "alpha": cfg.alpha, "deltaE": cfg.delta_e, "E-mode": mode}
    meta.update(extra)
    return meta


def _energy_grid(cfg: RunConfig, default) -> ComplexEnergyGrid:
    w = cfg.window or default
    return ComplexEnergyGrid((w[0], w[1]), (w[2], w[3]), cfg.resolution[0], cfg.resolution[1])


def band_path(model: TightBindingModel, n: int):
    """Default sweep: the 1-d zone, or Gamma-M-K-Gamma in 2-d reduced coordinates."""
    if model.d == 1:
        k = np.linspace(-0.5, 0.5, n).reshape(-1, 1)
        return np.linspace(0, 1, n), k
    if model.d != 2:
        raise ConfigError("band sweeps are only defined for 1-d and 2-d models")
    corners = np.array([[0, 0], [0.5, 0], [1 / 3, -1 / 3], [0, 0]], dtype=float)
    seg = np.linalg.norm(np.diff(corners @ model.reciprocal_vectors(), axis=0), axis=1)
    s_corner = np.concatenate([[0], np.cumsum(seg)])
    s = np.linspace(0, s_corner[-1], n)
    k = np.stack([np.interp(s, s_corner, corners[:, j]) for j in range(2)], axis=1)
    return s, k


def cmd_bands(cfg, model, defect, out):
    s, k = band_path(model, max(cfg.resolution[0], 2))
    energies = sorted_band_path(model, k)
    return {"bands": bio.write_bands_csv(out / "bands.csv", s, k, energies, {"model": model.name})}, {}


def _mode(cfg) -> str:
    if cfg.adaptive:
        return "adaptive"
    return "fixed" if cfg.energy is not None else "undeformed"


def cmd_greenmap(cfg, model, defect, out):
    grid = _energy_grid(cfg, [-3.0, 3.0, -0.5, 0.5])
    mode = _mode(cfg)
    if mode == "undeformed":
        ev = GreenEvaluator.undeformed(model, cfg.nk)
        cmap = trace_map(ev, grid, "fixed", cfg.workers)
    else:
        E = cfg.energy if cfg.energy is not None else float(np.mean(grid.re_range))
        ev = GreenEvaluator.deformed(model, DeformationParams(E, cfg.alpha, cfg.delta_e), cfg.nk, warn=False)
        cmap = trace_map(ev, grid, mode, cfg.workers)
    meta = _meta(cfg, model, mode if mode != "fixed" else f"fixed({cfg.energy})")
    path = bio.write_map_csv(out / "greenmap.csv", cmap, meta)
    return {"greenmap": path}, {"masked_nodes": int(cmap.mask.sum())}


def cmd_dos(cfg, model, defect, out):
    w = cfg.window or [-3.5, 3.5, 0.0, 0.0]
    E = np.linspace(w[0], w[1], cfg.resolution[0])
    params = DeformationParams(0.0, cfg.alpha, cfg.delta_e)
    bcd = np.empty(len(E))
    near_van_hove = []
    for i, e in enumerate(E):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                bcd[i] = dos_bcd(model, e, params, cfg.nk)
            except SingularKPoint:
                bcd[i] = np.nan      # energy sits on a grid eigenvalue; masked like map nodes
        if caught:
            near_van_hove.append(float(e))
    if near_van_hove:
        warnings.warn(f"{len(near_van_hove)} of {len(E)} energies lie within deltaE of a van Hove "
                      f"point or band crossing; the deformed DOS is unreliable there", stacklevel=2)
    curves = {"bcd": bcd, "smearing": dos_smearing(model, E, cfg.eta, cfg.nk)}
    meta = _meta(cfg, model, "adaptive", eta=cfg.eta)
    masked = [float(e) for e in E[np.isnan(bcd)]]
    info = {"masked_energies": masked, "near_van_hove": near_van_hove}
    return {"dos": bio.write_dos_csv(out / "dos.csv", E, curves, meta)}, info


def _need_defect(defect):
    if defect is None:
        raise ConfigError("this command needs --defect")
    return defect


def _scan(cfg, model, defect, adaptive=None):
    grid = _energy_grid(cfg, [-3.0, 3.0, -0.5, 0.02])
    E = cfg.energy if cfg.energy is not None else float(np.mean(grid.re_range))
    ev = GreenEvaluator.deformed(model, DeformationParams(E, cfg.alpha, cfg.delta_e), cfg.nk, warn=False)
    adaptive = cfg.adaptive if adaptive is None else adaptive
    cmap = svd_scan(ev, defect, grid, "adaptive" if adaptive else "fixed", cfg.workers)
    return cmap, ("adaptive" if adaptive else f"fixed({E})")


def cmd_scan(cfg, model, defect, out):
    defect = _need_defect(defect)
    cmap, mode = _scan(cfg, model, defect)
    minima = local_minima(cmap.values, cmap.z)
    path = bio.write_scan_csv(out / "scan.csv", cmap, _meta(cfg, model, mode))
    return {"scan": path}, {"minima": [[z.real, z.imag] for z in minima]}


def _window_cells(model, defect, radius):
    d = model.d
    centre = np.zeros(d, dtype=int)
    cells = defect.cells()
    if cells:
        centre = np.round(np.mean(np.array(cells), axis=0)).astype(int)
    rng = range(-radius, radius + 1)
    grids = np.meshgrid(*[rng] * d, indexing="ij")
    return [tuple(int(c) for c in centre + np.array(p)) for p in np.stack([g.ravel() for g in grids], axis=1)]


def cmd_refine(cfg, model, defect, out):
    defect = _need_defect(defect)
    seeds = list(cfg.seed_z)
    if not seeds:
        # without a fixed target energy, seeds come from an adaptive scan
        cmap, _ = _scan(cfg, model, defect, adaptive=cfg.adaptive or cfg.energy is None)
        seeds = local_minima(cmap.values, cmap.z)
        if not seeds:
            raise ConfigError("no local minimum in the scan window; give --seed-z")
    records, outputs, failures, found = [], {}, [], []
    for n, seed in enumerate(seeds):
        E = cfg.energy if cfg.energy is not None else seed.real
        params = DeformationParams(E, cfg.alpha, cfg.delta_e)
        ev = GreenEvaluator.deformed(model, params, cfg.nk, warn=False)
        try:
            res = normalize_residue(ev, defect, refine_resonance(ev, defect, seed))
        except BCDError as exc:
            failures.append(exc)
            records.append({"seed": [seed.real, seed.imag], "error": f"{type(exc).__name__}: {exc}"})
            continue
        if any(abs(res.z0 - z) < DUPLICATE_TOL for z in found):
            continue
        found.append(res.z0)
        cond = residue_condition(ev, defect, res.phi, res.z0)
        rec = bio.result_record(res, cond, defect.support)
        rec["seed"] = [seed.real, seed.imag]
        rec["deformation_energy"] = E
        # physical zeros barely move on a finer grid; spurious ones drift or vanish
        try:
            fine = GreenEvaluator.deformed(model, params, 2 * cfg.nk, warn=False)
            shift = abs(refine_resonance(fine, defect, res.z0).z0 - res.z0)
        except BCDError:
            shift = None
        rec["grid_shift"] = shift
        rec["stable"] = shift is not None and shift < STABILITY_TOL
        records.append(rec)
        samples = resonant_state_samples(ev, defect, res, _window_cells(model, defect, cfg.state_radius))
        outputs[f"state{n}"] = bio.write_states_csv(out / f"state_{n}.csv", model, samples,
                                                    _meta(cfg, model, f"fixed({E})", z0=res.z0), defect)
    outputs["resonances"] = bio.write_json(out / "resonances.json", records)
    if len(failures) == len(seeds):
        raise failures[0]
    stable = [r["z0"] for r in records if r.get("stable")]
    return outputs, {"z0": [r.get("z0") for r in records], "stable_z0": stable}


def cmd_free1d(cfg, model, defect, out):
    grid = Grid1D(cfg.box_length, cfg.step)
    pot = POTENTIALS[cfg.potential]
    w = cfg.scan_window
    eg = ComplexEnergyGrid((w[0], w[1]), (w[2], w[3]), cfg.resolution[0], cfg.resolution[1])
    meta = {"potential": cfg.potential, "L": cfg.box_length, "h": cfg.step, "theta": cfg.theta}
    cmap = free_scan(grid, eg, pot, cfg.workers)
    outputs = {"scan": bio.write_scan_csv(out / "free_scan.csv", cmap, meta)}
    seeds = list(cfg.seed_z) or local_minima(cmap.values, cmap.z)
    eigs = complex_scaled_spectrum(grid, pot, cfg.theta)
    eigs = eigs[np.lexsort((eigs.imag, eigs.real))]
    outputs["scaled"] = bio._write(out / "complex_scaling.csv", meta, ["re_z", "im_z"],
                                   ((e.real, e.imag) for e in eigs))
    records, found = [], []
    for n, seed in enumerate(seeds):
        try:
            res = refine_free(grid, seed, pot)
        except BCDError as exc:
            records.append({"seed": [seed.real, seed.imag], "error": type(exc).__name__})
            continue
        if any(abs(res.z - z) < DUPLICATE_TOL for z in found):
            continue
        found.append(res.z)
        phi, psi = resonant_pair_free(grid, res.z, pot, res.x)
        near = eigs[np.argmin(np.abs(eigs - res.z))]
        # resonances are stable in the box length, spurious poles are not
        try:
            shift = abs(refine_free(Grid1D(2 * cfg.box_length, cfg.step), res.z, pot).z - res.z)
        except BCDError:
            shift = None
        records.append({"seed": [seed.real, seed.imag], "z0": [res.z.real, res.z.imag],
                        "newton_iterations": res.iterations, "residual": res.residual,
                        "nearest_scaled_eigenvalue": [near.real, near.imag],
                        "box_shift": shift, "stable": shift is not None and shift < FREE_STABILITY_TOL})
        outputs[f"state{n}"] = bio.write_free_states_csv(out / f"free_state_{n}.csv", grid.x, pot(grid.x),
                                                         phi, psi, dict(meta, z0=res.z))
    outputs["resonances"] = bio.write_json(out / "free_resonances.json", records)
    stable = [r["z0"] for r in records if r.get("stable")]
    return outputs, {"z0": [r.get("z0") for r in records], "stable_z0": stable}


def cmd_validate(cfg, model, defect, out):
    if cfg.energy is None:
        raise ConfigError("validate needs --energy")
    params = DeformationParams(cfg.energy, cfg.alpha, cfg.delta_e)
    rmax = cfg.rmax
    if rmax is None:
        cells = defect.cells() if defect is not None else []
        rmax = float(max((np.linalg.norm(np.subtract(a, b) @ model.lattice_vectors)
                          for a in cells for b in cells), default=0.0))
    report = validate_parameters(model, params, cfg.nk, rmax)
    print(report.summary())
    data = {"ok": report.ok, "Rmax": rmax, "van_hove": list(report.van_hove),
            "nearby_van_hove": list(report.nearby_van_hove),
            "rules": [dict(dataclasses.asdict(r), ratio=r.ratio) for r in report.rules]}
    field = build_deformation(model, params, cfg.nk, warn=False)
    paths = {"report": bio.write_json(out / "validation.json", data),
             "field": bio.write_field_csv(out / "field.csv", field, _meta(cfg, model, f"fixed({cfg.energy})"))}
    return paths, {"ok": report.ok}


HANDLERS = {"bands": cmd_bands, "greenmap": cmd_greenmap, "dos": cmd_dos, "scan": cmd_scan,
            "refine": cmd_refine, "free1d": cmd_free1d, "validate": cmd_validate}


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bcdres", description=__doc__.splitlines()[0],
                                epilog=f"Environment overrides use the prefix {ENV_PREFIX}, "
                                       f"e.g. {ENV_PREFIX}NK=80.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run config")
        s.add_argument("--model", help='built-in ("diatomic(1,0)", "graphene(1)", "chain1band", '
                                        '"flatband(0)") or a model JSON file')
        s.add_argument("--defect", help='"bonds:eps=0.2", "adatom:eps=0.4,ed=2,attach=0" or a JSON file')
        s.add_argument("--energy", type=float, help="deformation target energy")
        s.add_argument("--adaptive", action="store_const", const=True, default=None,
                       help="re-target the deformation at Re z for each column")
        s.add_argument("--alpha", type=float)
        s.add_argument("--delta-e", type=float, dest="delta_e")
        s.add_argument("--nk", type=int, help="grid points per direction")
        s.add_argument("--window", nargs=4, type=float, metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"))
        s.add_argument("--resolution", nargs=2, type=int, metavar=("N_RE", "N_IM"))
        s.add_argument("--seed-z", nargs="+", dest="seed_z", help="Newton seeds, e.g. 2-0.1j")
        s.add_argument("--out", help="output directory")
        s.add_argument("--workers", type=int)
        s.add_argument("--eta", type=float, help="smearing width for dos")
        s.add_argument("--rmax", type=float, help="largest |R - R'| of interest for validate")
        s.add_argument("--state-radius", type=int, dest="state_radius")
        s.add_argument("--box-length", type=float, dest="box_length")
        s.add_argument("--step", type=float)
        s.add_argument("--theta", type=float)
        s.add_argument("--scan-window", nargs=4, type=float, dest="scan_window")
        s.add_argument("--potential")
    return p


def resolve_config(argv=None, environ=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    merged = {}
    if args.config:
        merged.update(load_config_file(args.config))
    merged.update(env_overrides(environ))
    flags = {k: v for k, v in vars(args).items() if k != "config" and v is not None}
    merged.update(flags)
    merged["command"] = args.command
    return RunConfig.from_dict(merged).validate()


def run(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(cfg.model)
    defect = build_defect(cfg.defect, model)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        paths, info = HANDLERS[cfg.command](cfg, model, defect, out)
    manifest = {"version": __version__, "command": cfg.command, "config": cfg.to_dict(),
                "model": model.name, "outputs": {k: str(v) for k, v in paths.items()},
                "info": info, "elapsed_s": round(time.perf_counter() - t0, 3)}
    # elapsed time is kept out of the CSV files so they stay bit-identical
    bio.write_json(out / "manifest.json", manifest)
    return manifest


def main(argv=None) -> int:
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg)
    except (ConfigError, PatternMismatch) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except BCDError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    for name, path in manifest["outputs"].items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
