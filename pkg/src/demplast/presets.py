"""Built-in example problems, small enough to train on a laptop.

Each preset produces a ProblemSpec plus, when the geometry cannot be
described by a plain box, a Mesh carrying the element/node sets that
ProblemSpec refers to.  The CLI writes that mesh next to the echoed
config so a run can always be reproduced from its output directory
alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bc import AFFINE, CONST
from .config import DirichletSpec, MaterialSpec, ProblemSpec
from .mesh import HEX8, Mesh, generate_structured_box
from .solver import NetworkConfig, OptimizerConfig

MU = 384.62
KAPPA = 833.33

# Triangular loading wave: ramp to +1/2, unload, ramp to -1/2, unload.
CYCLE = (1 / 6, 1 / 3, 1 / 2, 1 / 3, 1 / 6, 0.0,
         -1 / 6, -1 / 3, -1 / 2, -1 / 3, -1 / 6, 0.0)


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    builder: object

    def build(self):
        """Return (ProblemSpec, Mesh or None)."""
        return self.builder()


def _shear_dirichlet():
    # u_x = y/4 on the four lateral faces, scaled by the load factor;
    # at factor 1/2 the applied engineering shear is 0.125.
    sides = ("x_min", "x_max", "y_min", "y_max")
    return [
        DirichletSpec(name="drive", node_sets=sides, axis="x",
                      kind=AFFINE, coeffs=(0.0, 0.25, 0.0, 0.0)),
        DirichletSpec(name="hold_y", node_sets=sides, axis="y",
                      kind=CONST, coeffs=(0.0, 0.0, 0.0, 0.0)),
        DirichletSpec(name="hold_z", node_sets=("z_min", "z_max"), axis="z",
                      kind=CONST, coeffs=(0.0, 0.0, 0.0, 0.0)),
    ]


def _shear(mode: str):
    hard = dict(H=500.0, C=0.0) if mode == "isotropic" else \
        dict(H=0.0, C=500.0)
    spec = ProblemSpec(
        mesh_box=(4.0, 4.0, 1.0, 4, 4, 1),
        materials=[MaterialSpec(name="metal", mu=MU, kappa=KAPPA,
                                sigma_y0=50.0, mode=mode, **hard)],
        dirichlet=_shear_dirichlet(),
        factors=CYCLE,
        network=NetworkConfig(widths=(3, 32, 32, 3)),
        optimizer=OptimizerConfig(tol=1e-10),
        name="shear-iso" if mode == "isotropic" else "shear-kin")
    return spec, None


def _bimat():
    """Two-material plate in simple shear: the left half yields at 50
    MPa, the right at 60, so plastic strain localizes on the left.
    Same plate and loading as the shear presets but a single step at
    factor 0.5 and a 20x20x1 mesh that resolves the interface."""
    mesh = generate_structured_box((4.0, 4.0, 1.0), (20, 20, 1))
    centers = mesh.nodes[mesh.conn[:, :8]].mean(axis=1)
    left = np.flatnonzero(centers[:, 0] < 2.0).astype(np.int64)
    right = np.flatnonzero(centers[:, 0] >= 2.0).astype(np.int64)
    mesh.elem_sets["soft"] = left
    mesh.elem_sets["hard"] = right
    common = dict(mu=MU, kappa=KAPPA, H=500.0, C=0.0, mode="isotropic")
    spec = ProblemSpec(
        mesh_file="mesh.txt",
        materials=[
            MaterialSpec(name="soft", sigma_y0=50.0, elemset="soft", **common),
            MaterialSpec(name="hard", sigma_y0=60.0, elemset="hard", **common),
        ],
        dirichlet=_shear_dirichlet(),
        factors=(0.5,),
        network=NetworkConfig(widths=(3, 32, 32, 3)),
        optimizer=OptimizerConfig(tol=1e-6),
        name="bimat")
    return spec, mesh


def generate_quarter_plate_hole(length=4.0, radius=1.5, thickness=1.0,
                                n_rad=4, n_theta=8, nz=1) -> Mesh:
    """Hex mesh of a quarter plate [0,L]^2 with a circular hole at the
    origin, extruded in z.

    Structured polar block: rays from the hole rim to the radial
    projection of each angle onto the square's outer edges.  Grid axes
    are ordered (radius, angle, z) so element volumes come out positive.
    """
    if radius <= 0 or radius >= length:
        raise ValueError("need 0 < radius < length")
    n_rad, n_theta, nz = int(n_rad), int(n_theta), int(nz)
    if min(n_rad, n_theta, nz) < 1:
        raise ValueError("divisions must be at least 1")

    theta = np.linspace(0.0, math.pi / 2, n_theta + 1)
    c, s = np.cos(theta), np.sin(theta)
    # Outer boundary point along each ray: on the right edge up to 45
    # degrees, on the top edge beyond.
    denom = np.maximum(c, s)
    bx, by = length * c / denom, length * s / denom
    ax, ay = radius * c, radius * s

    t = np.linspace(0.0, 1.0, n_rad + 1)
    x2 = ax[None, :] + t[:, None] * (bx - ax)[None, :]   # (n_rad+1, n_theta+1)
    y2 = ay[None, :] + t[:, None] * (by - ay)[None, :]
    z1 = np.linspace(0.0, thickness, nz + 1)

    nr1, na1, nz1 = n_rad + 1, n_theta + 1, nz + 1
    nodes = np.empty((nr1 * na1 * nz1, 3))
    nid = np.arange(nr1 * na1 * nz1).reshape(nr1, na1, nz1)
    for k in range(nz1):
        nodes[nid[:, :, k].ravel(), 0] = x2.ravel()
        nodes[nid[:, :, k].ravel(), 1] = y2.ravel()
        nodes[nid[:, :, k].ravel(), 2] = z1[k]

    ne = n_rad * n_theta * nz
    conn = np.empty((ne, 8), dtype=np.int64)
    eid = np.arange(ne).reshape(n_rad, n_theta, nz)
    e = 0
    for ir in range(n_rad):
        for ia in range(n_theta):
            for k in range(nz):
                conn[e] = (nid[ir, ia, k], nid[ir + 1, ia, k],
                           nid[ir + 1, ia + 1, k], nid[ir, ia + 1, k],
                           nid[ir, ia, k + 1], nid[ir + 1, ia, k + 1],
                           nid[ir + 1, ia + 1, k + 1], nid[ir, ia + 1, k + 1])
                e += 1

    tol = 1e-9 * length
    node_sets = {
        "hole": nid[0].ravel().copy(),
        "outer": nid[-1].ravel().copy(),
        "y_zero": nid[:, 0, :].ravel().copy(),
        "x_zero": nid[:, -1, :].ravel().copy(),
        "z_min": nid[:, :, 0].ravel().copy(),
        "z_max": nid[:, :, -1].ravel().copy(),
        "all": np.arange(len(nodes), dtype=np.int64),
    }
    outer_ids = nid[-1].ravel()
    node_sets["top"] = outer_ids[
        np.abs(nodes[outer_ids, 1] - length) < tol].copy()
    node_sets["right"] = outer_ids[
        np.abs(nodes[outer_ids, 0] - length) < tol].copy()

    # Face ids follow the face table order: the hole rim is the local
    # -radius face (nodes 0,1,5,4 -> face 2) and the outer boundary the
    # +radius face (nodes 2,3,7,6 -> face 4) of each hex.
    side_sets = {}
    hole_faces = [(int(eid[0, ia, k]), 2)
                  for ia in range(n_theta) for k in range(nz)]
    side_sets["hole"] = np.asarray(hole_faces, dtype=np.int64)
    top_faces = []
    right_faces = []
    for ia in range(n_theta):
        for k in range(nz):
            elem = int(eid[-1, ia, k])
            corners = conn[elem][[2, 3, 7, 6]]
            if np.all(np.abs(nodes[corners, 1] - length) < tol):
                top_faces.append((elem, 4))
            if np.all(np.abs(nodes[corners, 0] - length) < tol):
                right_faces.append((elem, 4))
    side_sets["top"] = np.asarray(top_faces, dtype=np.int64)
    side_sets["right"] = np.asarray(right_faces, dtype=np.int64)

    kinds = np.full(ne, HEX8, dtype="<U4")
    return Mesh(nodes=nodes, kinds=kinds, conn=conn, node_sets=node_sets,
                elem_sets={}, side_sets=side_sets,
                mat_id=np.zeros(ne, dtype=np.int64))


def _plate_hole():
    mesh = generate_quarter_plate_hole()
    spec = ProblemSpec(
        mesh_file="mesh.txt",
        materials=[MaterialSpec(name="metal", mu=MU, kappa=KAPPA,
                                sigma_y0=50.0, H=500.0, mode="isotropic")],
        dirichlet=[
            DirichletSpec(name="sym_x", node_sets=("x_zero",), axis="x",
                          kind=CONST, coeffs=(0.0, 0.0, 0.0, 0.0)),
            DirichletSpec(name="sym_y", node_sets=("y_zero",), axis="y",
                          kind=CONST, coeffs=(0.0, 0.0, 0.0, 0.0)),
            DirichletSpec(name="hold_z", node_sets=("z_min", "z_max"),
                          axis="z", kind=CONST, coeffs=(0.0, 0.0, 0.0, 0.0)),
            DirichletSpec(name="pull", node_sets=("top",), axis="y",
                          kind=CONST, coeffs=(0.0, 0.0, 0.0, 0.08)),
        ],
        factors=(0.5, 1.0, 0.5, 0.0),
        network=NetworkConfig(widths=(3, 32, 32, 3)),
        optimizer=OptimizerConfig(tol=2e-5),
        name="plate-hole")
    return spec, mesh


PRESETS = {
    "shear-iso": Preset(
        "shear-iso",
        "cyclic simple shear of a block, isotropic hardening",
        lambda: _shear("isotropic")),
    "shear-kin": Preset(
        "shear-kin",
        "cyclic simple shear of a block, kinematic hardening",
        lambda: _shear("kinematic")),
    "bimat": Preset(
        "bimat",
        "sheared strip with a 50/60 MPa yield-strength split",
        _bimat),
    "plate-hole": Preset(
        "plate-hole",
        "quarter plate with a hole, load-unload tension cycle",
        _plate_hole),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise KeyError(f"unknown preset {name!r}; available: {known}")
