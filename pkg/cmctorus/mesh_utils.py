import math
import logging
import os
from dataclasses import dataclass

import numpy as np

from cmctorus.exceptions import DomainError, InternalError
from cmctorus.geometry import rotation

FLOAT_FORMAT = "{:.17g}"


@dataclass(frozen=True, eq=False)
class MeshOut:
    """Closed quad mesh, faces counter-clockwise seen from outside (along -N)."""
    vertices: np.ndarray
    faces: np.ndarray
    orientation: str = "outward"

    def triangles(self):
        f = self.faces
        if f.shape[1] == 3:
            return f
        return np.concatenate([f[:, [0, 1, 2]], f[:, [0, 2, 3]]])

    def edges(self):
        f = self.faces
        pairs = np.concatenate([f[:, [k, (k + 1) % f.shape[1]]] for k in range(f.shape[1])])
        return np.sort(pairs, axis=1)

    def euler_characteristic(self):
        n_edges = len(np.unique(self.edges(), axis=0))
        return len(self.vertices) - n_edges + len(self.faces)

    def is_closed(self):
        """Every edge bounds exactly two faces."""
        _, counts = np.unique(self.edges(), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def signed_volume(self):
        tri = self.vertices[self.triangles()]
        return float(np.sum(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])))) / 6.0


def build_mesh(grid, positions, stride_t=1, stride_theta=1):
    """
    Assemble the closed torus from the fundamental cell by the rotations R_{2 pi k / n}.

    Parameters:
        grid (TorusGrid): closed torus grid (n set).
        positions (array): cell positions, shape (n_t, n_theta, 3), e.g. jet.X.
        stride_t (int, optional): keep every stride_t-th row.
        stride_theta (int, optional): keep every stride_theta-th column.

    Returns:
        MeshOut
    """
    if grid.n is None:
        raise DomainError("Mesh export needs a closed torus (n periods)")
    n_t, n_theta = grid.shape
    if n_t % stride_t or n_theta % stride_theta:
        raise DomainError(f"Strides ({stride_t}, {stride_theta}) do not divide the grid {grid.shape}")
    cell = np.asarray(positions)[::stride_t, ::stride_theta]
    rows, cols = cell.shape[:2]
    blocks = [cell @ rotation(2.0 * math.pi * k / grid.n).T for k in range(grid.n)]
    vertices = np.concatenate(blocks).reshape(-1, 3)

    total = grid.n * rows
    g = np.arange(total)[:, None]
    j = np.arange(cols)[None, :]
    g1, j1 = (g + 1) % total, (j + 1) % cols
    index = lambda gg, jj: np.broadcast_to(gg * cols + jj, (total, cols)).ravel()
    faces = np.stack([index(g, j), index(g, j1), index(g1, j1), index(g1, j)], axis=1)
    return MeshOut(vertices=vertices, faces=faces)


def write_obj(mesh, path):
    with open(path, "w") as file:
        file.write("# cmctorus mesh\n")
        for v in mesh.vertices:
            file.write("v " + " ".join(FLOAT_FORMAT.format(c) for c in v) + "\n")
        for f in mesh.faces:
            file.write("f " + " ".join(str(i + 1) for i in f) + "\n")
    logging.info(f"Wrote {len(mesh.vertices)} vertices to {path}")
    return path


def write_ply(mesh, path):
    header = ["ply", "format ascii 1.0", "comment cmctorus mesh",
              f"element vertex {len(mesh.vertices)}",
              "property double x", "property double y", "property double z",
              f"element face {len(mesh.faces)}",
              "property list uchar int vertex_indices", "end_header"]
    with open(path, "w") as file:
        file.write("\n".join(header) + "\n")
        for v in mesh.vertices:
            file.write(" ".join(FLOAT_FORMAT.format(c) for c in v) + "\n")
        for f in mesh.faces:
            file.write(f"{len(f)} " + " ".join(str(i) for i in f) + "\n")
    logging.info(f"Wrote {len(mesh.vertices)} vertices to {path}")
    return path


def read_obj(path):
    vertices, faces = [], []
    with open(path) as file:
        for line in file:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(c) for c in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:]])
    return MeshOut(vertices=np.array(vertices), faces=np.array(faces))


def read_ply(path):
    with open(path) as file:
        lines = file.read().splitlines()
    if not lines or lines[0] != "ply":
        raise InternalError(f"{path} is not a PLY file")
    n_vertices = n_faces = 0
    body = 0
    for k, line in enumerate(lines):
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n_vertices = int(parts[2])
        elif parts[:2] == ["element", "face"]:
            n_faces = int(parts[2])
        elif line == "end_header":
            body = k + 1
            break
    vertices = np.array([[float(c) for c in lines[body + i].split()] for i in range(n_vertices)])
    faces = np.array([[int(c) for c in lines[body + n_vertices + i].split()[1:]] for i in range(n_faces)])
    return MeshOut(vertices=vertices, faces=faces)


def export_mesh(mesh, path, fmt=None):
    """Write mesh as OBJ or PLY; fmt defaults to the file extension."""
    fmt = (fmt or os.path.splitext(path)[1].lstrip(".")).lower()
    if fmt == "obj":
        return write_obj(mesh, path)
    if fmt == "ply":
        return write_ply(mesh, path)
    raise DomainError(f"Unknown mesh format '{fmt}'")
