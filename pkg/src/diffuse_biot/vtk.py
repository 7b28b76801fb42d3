"""Legacy ASCII VTK output for triangle meshes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .mesh import Mesh

HEADER = "# vtk DataFile Version 3.0"
VTK_TRIANGLE = 5


def _vertex_values(values, n_vertices, components):
    """Restrict nodal coefficients to the mesh vertices (P2 nodes list vertices first)."""
    a = np.asarray(values, dtype=float)
    if components > 1:
        a = a.reshape(-1, components)
    if len(a) < n_vertices:
        raise ValueError(f"field has {len(a)} nodes, mesh has {n_vertices} vertices")
    return a[:n_vertices]


def write_vtk(path, mesh: Mesh, scalars=None, vectors=None, title="diffuse_biot") -> Path:
    """Write one unstructured-grid file with point data.

    ``scalars`` maps names to nodal arrays, ``vectors`` maps names to
    interleaved 2-component arrays; both may carry extra (P2) nodes after the
    vertices, which are dropped. Vectors are padded with a zero z component.
    """
    path = Path(path)
    nv, nt = mesh.n_vertices, len(mesh.triangles)
    lines = [HEADER, title, "ASCII", "DATASET UNSTRUCTURED_GRID", f"POINTS {nv} double"]
    lines += [f"{x:.16g} {y:.16g} 0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    lines.append(f"POINT_DATA {nv}")
    for name, vals in (scalars or {}).items():
        v = _vertex_values(vals, nv, 1)
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{x:.16g}" for x in v]
    for name, vals in (vectors or {}).items():
        v = _vertex_values(vals, nv, 2)
        lines.append(f"VECTORS {name} double")
        lines += [f"{x:.16g} {y:.16g} 0" for x, y in v]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_counts(path):
    """Return ``(n_points, n_cells, point_data_names)`` from a file written by :func:`write_vtk`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != HEADER:
        raise ValueError(f"{path}: missing VTK header")
    if lines[2] != "ASCII" or lines[3] != "DATASET UNSTRUCTURED_GRID":
        raise ValueError(f"{path}: not an ASCII unstructured grid")
    n_points = n_cells = None
    names = []
    i = 4
    while i < len(lines):
        tok = lines[i].split()
        if not tok:
            i += 1
            continue
        if tok[0] == "POINTS":
            n_points = int(tok[1])
            i += n_points + 1
        elif tok[0] == "CELLS":
            n_cells = int(tok[1])
            cells = [list(map(int, s.split())) for s in lines[i + 1 : i + 1 + n_cells]]
            if int(tok[2]) != sum(len(c) for c in cells):
                raise ValueError(f"{path}: CELLS size mismatch")
            if any(c[0] != len(c) - 1 or max(c[1:]) >= n_points for c in cells):
                raise ValueError(f"{path}: malformed cell")
            i += n_cells + 1
        elif tok[0] == "CELL_TYPES":
            if int(tok[1]) != n_cells:
                raise ValueError(f"{path}: CELL_TYPES count mismatch")
            i += n_cells + 1
        elif tok[0] == "POINT_DATA":
            if int(tok[1]) != n_points:
                raise ValueError(f"{path}: POINT_DATA count mismatch")
            i += 1
        elif tok[0] == "SCALARS":
            names.append(tok[1])
            i += n_points + 2
        elif tok[0] == "VECTORS":
            names.append(tok[1])
            i += n_points + 1
        else:
            raise ValueError(f"{path}: unexpected line {lines[i]!r}")
    if i != len(lines):
        raise ValueError(f"{path}: truncated data")
    return n_points, n_cells, names


def check_vtk(path, mesh: Mesh):
    """Raise ``ValueError`` unless the file's point and cell counts match ``mesh``."""
    n_points, n_cells, names = read_vtk_counts(path)
    if n_points != mesh.n_vertices or n_cells != len(mesh.triangles):
        raise ValueError(
            f"{path}: {n_points} points / {n_cells} cells, mesh has "
            f"{mesh.n_vertices} / {len(mesh.triangles)}"
        )
    return names
