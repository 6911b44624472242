"""Diagnostics CSV and legacy-VTK snapshot writers."""
from __future__ import annotations

import csv
from dataclasses import fields
from pathlib import Path

import numpy as np

from .diagnostics import DissipationBreakdown, EnergyBreakdown
from .state import MixtureState

_ENERGY = [f.name for f in fields(EnergyBreakdown)]
_DISSIPATION = [f.name for f in fields(DissipationBreakdown)]

# StepReport scalars in the order they appear in the file
_SCALARS = ["slack", "tol_slack", "mass", "mass_change", "mass_drift", "phi_min", "phi_max",
            "psi_min", "psi_max", "div_norm", "picard_iters", "newton_iters", "pdas_iters",
            "linear_residual", "ch_residual", "picard_update", "halvings"]


def csv_columns():
    """Column names of ``diagnostics.csv``.

    ``step, t, h``, the old total energy, every energy part at the new
    level (``E_*``), every dissipation term (``D_*``), the dissipation rate,
    then the step scalars, and the Picard update history joined by ``;``.
    """
    return (["step", "t", "h", "energy_old"] + [f"E_{n}" for n in _ENERGY] + ["E_total"]
            + [f"D_{n}" for n in _DISSIPATION] + ["D_rate"] + _SCALARS + ["picard_history"])


def report_row(k, report, mass0):
    row = {"step": k, "t": report.t, "h": report.h, "energy_old": report.energy_old.total}
    for n in _ENERGY:
        row[f"E_{n}"] = getattr(report.energy_new, n)
    row["E_total"] = report.energy_new.total
    for n in _DISSIPATION:
        row[f"D_{n}"] = getattr(report.dissipation, n)
    row["D_rate"] = report.dissipation.rate
    for n in _SCALARS:
        row[n] = report.mass - mass0 if n == "mass_drift" else getattr(report, n)
    row["picard_history"] = ";".join(f"{v:.3e}" for v in report.history)
    return row


class CsvLog:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._w = csv.DictWriter(self._fh, fieldnames=csv_columns())
        self._w.writeheader()

    def write(self, row):
        self._w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(a):
    return "\n".join("%.17g" % v for v in np.asarray(a, dtype=float).ravel(order="F"))


def write_vtk(path, state: MixtureState, title="mpnsch snapshot"):
    """Legacy ASCII STRUCTURED_POINTS file with cell data.

    Points are the cell centres; scalars phi, mu, omega, p and the velocity
    averaged from faces to centres.  x varies fastest, as VTK expects.
    """
    g = state.grid
    ux = 0.5 * (state.u.x + np.roll(state.u.x, -1, axis=0))
    uy = 0.5 * (state.u.y[:, :-1] + state.u.y[:, 1:])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
             f"DIMENSIONS {g.nx} {g.ny} 1",
             "ORIGIN %.17g %.17g 0" % (0.5 * g.dx, 0.5 * g.dy),
             "SPACING %.17g %.17g 1" % (g.dx, g.dy),
             f"POINT_DATA {g.n_cells}"]
    for name, f in (("phi", state.phi), ("mu", state.mu), ("omega", state.omega), ("p", state.p)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(f)]
    vec = np.stack([ux.ravel(order="F"), uy.ravel(order="F"), np.zeros(g.n_cells)], axis=1)
    lines += ["VECTORS u double", "\n".join("%.17g %.17g %.17g" % tuple(v) for v in vec)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_scalars(path):
    """Scalar arrays of a file written by ``write_vtk``, shaped ``(nx, ny)``."""
    text = Path(path).read_text().split("\n")
    dims = next(l for l in text if l.startswith("DIMENSIONS")).split()
    nx, ny = int(dims[1]), int(dims[2])
    out = {}
    i = 0
    while i < len(text):
        if text[i].startswith("SCALARS"):
            name = text[i].split()[1]
            vals = np.array([float(v) for v in text[i + 2:i + 2 + nx * ny]])
            out[name] = vals.reshape((nx, ny), order="F")
            i += 2 + nx * ny
        else:
            i += 1
    return out
