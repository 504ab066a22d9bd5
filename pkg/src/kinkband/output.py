"""Result serialization: per-step history CSV and VTK legacy snapshots.

Floats are written with 17 significant digits so a parsed file reproduces
the in-memory values exactly.  Column names carry explicit unit suffixes.
"""

from __future__ import annotations

import csv

import numpy as np

from .energy import EnergyBreakdown
from .evolution import StepRecord

CSV_HEADER = ("k,time_s,top_displacement_mm,engineering_strain,"
              "reaction_force_N,nominal_stress_MPa,total_energy_Nmm,"
              "elastic_Nmm,hardening_Nmm,slip_gradient_Nmm,penalty_Nmm,"
              "dissipation_increment_Nmm,cumulative_dissipation_Nmm,"
              "max_abs_gamma,min_det_Fe,optimizer_iterations")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_history_csv(records, path, Lx: float, Ly: float, speed: float) -> None:
    """One row per step; nominal stress = force / Lx, strain = speed*t / Ly."""
    if not records:
        raise ValueError("no records to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            row = [
                str(r.k),
                _fmt(r.time),
                _fmt(r.top_displacement),
                _fmt(speed * r.time / Ly),
                _fmt(r.reaction_force),
                _fmt(r.reaction_force / Lx),
                _fmt(r.energy.total),
                _fmt(r.energy.elastic),
                _fmt(r.energy.hardening),
                _fmt(r.energy.slip_gradient),
                _fmt(r.energy.penalty),
                _fmt(r.dissipation_increment),
                _fmt(r.cumulative_dissipation),
                _fmt(r.max_abs_gamma),
                _fmt(r.min_det_Fe),
                str(r.optimizer_iterations),
            ]
            fh.write(",".join(row) + "\n")


def read_history_csv(path):
    """Parse a history CSV back into StepRecord objects (round-trip exact)."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise ValueError(f"unexpected header in {path}")
        for row in reader:
            energy = EnergyBreakdown(
                elastic=float(row["elastic_Nmm"]),
                hardening=float(row["hardening_Nmm"]),
                slip_gradient=float(row["slip_gradient_Nmm"]),
                penalty=float(row["penalty_Nmm"]),
                total=float(row["total_energy_Nmm"]),
            )
            records.append(StepRecord(
                k=int(row["k"]),
                time=float(row["time_s"]),
                energy=energy,
                dissipation_increment=float(row["dissipation_increment_Nmm"]),
                cumulative_dissipation=float(row["cumulative_dissipation_Nmm"]),
                reaction_force=float(row["reaction_force_N"]),
                top_displacement=float(row["top_displacement_mm"]),
                max_abs_gamma=float(row["max_abs_gamma"]),
                min_det_Fe=float(row["min_det_Fe"]),
                optimizer_iterations=int(row["optimizer_iterations"]),
            ))
    return records


def _cell_fields(state, mesh):
    """Element-constant displacement gradient, Green-Lagrange strain, det."""
    bg = mesh.basis_gradients
    tri = mesh.triangles
    g1 = np.einsum("ei,eij->ej", state.a1[tri], bg)   # rows of grad_y
    g2 = np.einsum("ei,eij->ej", state.a2[tri], bg)
    det = g1[:, 0] * g2[:, 1] - g1[:, 1] * g2[:, 0]
    gy = np.stack([g1, g2], axis=1)                    # (nt, 2, 2) = grad_y
    gu = gy - np.eye(2)
    # E = (grad_y^T grad_y - I) / 2
    E = 0.5 * (np.einsum("eki,ekj->eij", gy, gy) - np.eye(2))
    return det, E, gu


def write_snapshot_vtk(state, mesh, path, title: str = "kinkband snapshot") -> None:
    """VTK legacy ASCII unstructured grid of the deformed configuration.

    Point data: displacement vector and slip gamma.  Cell data: det Fe,
    Green-Lagrange strain components and displacement-gradient components.
    """
    det, E, gu = _cell_fields(state, mesh)
    u1 = state.a1 - mesh.nodes[:, 0]
    u2 = state.a2 - mesh.nodes[:, 1]
    n = mesh.n_nodes
    nt = mesh.n_triangles
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {n} double\n")
        for i in range(n):
            fh.write(f"{_fmt(state.a1[i])} {_fmt(state.a2[i])} 0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        for _ in range(nt):
            fh.write("5\n")
        fh.write(f"POINT_DATA {n}\n")
        fh.write("VECTORS displacement double\n")
        for i in range(n):
            fh.write(f"{_fmt(u1[i])} {_fmt(u2[i])} 0\n")
        _write_scalars(fh, "gamma", state.b)
        fh.write(f"CELL_DATA {nt}\n")
        _write_scalars(fh, "det_Fe", det)
        _write_scalars(fh, "E_11", E[:, 0, 0])
        _write_scalars(fh, "E_22", E[:, 1, 1])
        _write_scalars(fh, "E_12", E[:, 0, 1])
        _write_scalars(fh, "grad_u_11", gu[:, 0, 0])
        _write_scalars(fh, "grad_u_12", gu[:, 0, 1])
        _write_scalars(fh, "grad_u_21", gu[:, 1, 0])
        _write_scalars(fh, "grad_u_22", gu[:, 1, 1])


def _write_scalars(fh, name, values):
    fh.write(f"SCALARS {name} double 1\n")
    fh.write("LOOKUP_TABLE default\n")
    for v in values:
        fh.write(_fmt(v) + "\n")
