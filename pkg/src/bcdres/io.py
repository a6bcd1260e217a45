"""CSV and JSON writers for maps, scans, spectra, fields and resonant states.

Every CSV starts with one ``#`` comment line carrying the run parameters,
followed by a header row. Floats are written with ``repr`` so reruns are
bit-identical; masked map nodes are written as ``nan``.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .deformation import DeformationField
from .greens import ComplexMap
from .lattice import TightBindingModel
from .resonance import DefectOperator, ResonanceResult

__all__ = [
    "header_comment",
    "write_map_csv",
    "write_scan_csv",
    "write_dos_csv",
    "write_bands_csv",
    "write_field_csv",
    "write_states_csv",
    "write_free_states_csv",
    "result_record",
    "to_jsonable",
    "write_json",
    "read_csv",
]


def _num(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def header_comment(meta: Mapping) -> str:
    return "# " + ", ".join(f"{k}={v}" for k, v in meta.items())


def _write(path, meta, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header_comment(meta) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if not isinstance(v, str) else v for v in row])
    return path


def write_map_csv(path, cmap: ComplexMap, meta: Mapping):
    """Columns ``re_z, im_z, re_value, im_value``, row-major over the grid."""
    z = cmap.z.reshape(-1)
    v = np.asarray(cmap.values, dtype=complex).reshape(-1)
    bad = ~np.isfinite(v)
    if cmap.mask is not None:
        bad |= np.asarray(cmap.mask).reshape(-1)
    v = np.where(bad, complex(np.nan, np.nan), v)
    rows = ((zz.real, zz.imag, vv.real, vv.imag) for zz, vv in zip(z, v))
    return _write(path, meta, ["re_z", "im_z", "re_value", "im_value"], rows)


def write_scan_csv(path, cmap: ComplexMap, meta: Mapping):
    """Columns ``re_z, im_z, log10_sigma_min``."""
    z = cmap.z.reshape(-1)
    v = np.asarray(cmap.values, dtype=float).reshape(-1)
    rows = ((zz.real, zz.imag, vv) for zz, vv in zip(z, v))
    return _write(path, meta, ["re_z", "im_z", "log10_sigma_min"], rows)


def write_dos_csv(path, energies, curves: Mapping[str, np.ndarray], meta: Mapping):
    """Long format ``E, value, method``: one block of rows per method."""
    rows = []
    for method, values in curves.items():
        rows += [(E, v, method) for E, v in zip(energies, values)]
    return _write(path, meta, ["E", "value", "method"], rows)


def write_bands_csv(path, s, k, energies, meta: Mapping):
    """Path parameter, reduced wavevector components, then one column per band."""
    k = np.asarray(k, dtype=float).reshape(len(s), -1)
    energies = np.asarray(energies)
    header = ["s"] + [f"k{j + 1}" for j in range(k.shape[1])] + [f"band{n}" for n in range(energies.shape[1])]
    rows = (np.concatenate([[si], ki, ei]) for si, ki, ei in zip(s, k, energies))
    return _write(path, meta, header, rows)


def write_field_csv(path, field: DeformationField, meta: Mapping):
    """Columns ``k1.., h1.., re_det, im_det``."""
    d = field.d
    header = [f"k{j + 1}" for j in range(d)] + [f"h{j + 1}" for j in range(d)] + ["re_det", "im_det"]
    rows = (np.concatenate([k, h, [J.real, J.imag]])
            for k, h, J in zip(field.k, field.h, field.jacobians))
    return _write(path, meta, header, rows)


def _xy(p):
    p = np.asarray(p, dtype=float)
    return (p[0], p[1] if len(p) > 1 else 0.0)


def write_states_csv(path, model: TightBindingModel, samples: Mapping, meta: Mapping,
                     defect: DefectOperator | None = None):
    """Columns ``x, y, re_psi, im_psi, abs_psi, arg_psi``.

    Extra sites are placed on the first orbital they couple to.
    """
    rows = []
    for key, amp in samples.items():
        if key[0] == "extra":
            if defect is None:
                continue
            (R, i) = next(iter(defect.extra_sites[key[1]].couplings))
        else:
            R, i = key
        x, y = _xy(model.site_position(R, i))
        rows.append((x, y, amp.real, amp.imag, abs(amp), np.angle(amp)))
    return _write(path, meta, ["x", "y", "re_psi", "im_psi", "abs_psi", "arg_psi"], rows)


def write_free_states_csv(path, x, V, phi, psi, meta: Mapping):
    header = ["x", "V", "re_phi", "im_phi", "re_psi", "im_psi"]
    rows = zip(x, V, phi.real, phi.imag, psi.real, psi.imag)
    return _write(path, meta, header, rows)


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and complex numbers (as ``[re, im]``).

    Non-finite floats become ``None`` so the output stays valid JSON.
    """
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def result_record(result: ResonanceResult, condition: complex | None = None,
                  support: Iterable | None = None) -> dict:
    rec = {
        "z0": result.z0,
        "sigma_min": result.sigma_min,
        "newton_iterations": result.newton_iters,
        "residual": result.residual,
        "residue_condition": condition,
        "phi": result.phi,
    }
    if support is not None:
        rec["support"] = [str(s) for s in support]
    return to_jsonable(rec)


def write_json(path, obj):
    text = json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    """``(comment, header, rows)`` of a file written by this module."""
    with open(path, newline="") as fh:
        comment = fh.readline().rstrip("\n")
        reader = csv.reader(fh)
        header = next(reader)
        return comment, header, [row for row in reader]
