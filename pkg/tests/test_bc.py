"""Dirichlet masks/offsets and load programs."""

import numpy as np
import pytest

from demplast.bc import (AXES, BCError, DirichletBC, LoadProgram, TractionBC,
                         apply_bc, build_mask_offset)
from demplast.mesh import generate_structured_box


def box():
    return generate_structured_box((1.0, 2.0, 1.0), (2, 2, 1))


def test_axes_table():
    assert AXES == {"x": 0, "y": 1, "z": 2}


def test_affine_values():
    bc = DirichletBC(node_sets=("x_min",), axis=0,
                     coeffs=(1.0, 2.0, 3.0, 4.0), kind="affine", name="t")
    coords = np.array([[1.0, 10.0, 100.0], [0.0, 0.0, 0.0]])
    np.testing.assert_allclose(bc.values(coords), [1 + 20 + 300 + 4, 4.0])


def test_const_values():
    bc = DirichletBC(node_sets=("x_min",), axis=1,
                     coeffs=(0.0, 0.0, 0.0, -2.5), kind="const", name="t")
    coords = np.zeros((3, 3))
    np.testing.assert_allclose(bc.values(coords), [-2.5, -2.5, -2.5])


def test_mask_offset_basic():
    mesh = box()
    bcs = [DirichletBC(node_sets=("x_min",), axis=0,
                       coeffs=(0.0, 0.0, 0.0, 0.1), kind="const", name="a")]
    mask, offset = build_mask_offset(mesh, bcs, factor=1.0)
    pinned = mesh.node_sets["x_min"]
    free = np.setdiff1d(np.arange(mesh.n_nodes), pinned)
    assert np.all(mask[pinned, 0] == 0.0)
    np.testing.assert_allclose(offset[pinned, 0], 0.1)
    assert np.all(mask[free, 0] == 1.0)
    assert np.all(mask[:, 1] == 1.0) and np.all(mask[:, 2] == 1.0)
    np.testing.assert_array_equal(offset[free], 0.0)


def test_factor_scales_offsets():
    mesh = box()
    bcs = [DirichletBC(node_sets=("y_max",), axis=1,
                       coeffs=(0.5, 0.0, 0.0, 0.2), kind="affine", name="a")]
    _, off1 = build_mask_offset(mesh, bcs, factor=1.0)
    _, off2 = build_mask_offset(mesh, bcs, factor=-0.5)
    np.testing.assert_allclose(off2, -0.5 * off1)


def test_overlapping_consistent_sets_allowed():
    mesh = box()
    bcs = [DirichletBC(node_sets=("x_min", "y_min"), axis=2,
                       coeffs=(0.0, 0.0, 0.0, 0.0), kind="const", name="a"),
           DirichletBC(node_sets=("x_min",), axis=2,
                       coeffs=(0.0, 0.0, 0.0, 0.0), kind="const", name="b")]
    mask, offset = build_mask_offset(mesh, bcs, factor=1.0)
    assert np.all(mask[mesh.node_sets["x_min"], 2] == 0.0)


def test_conflicting_values_raise():
    mesh = box()
    bcs = [DirichletBC(node_sets=("x_min",), axis=0,
                       coeffs=(0.0, 0.0, 0.0, 1.0), kind="const", name="a"),
           DirichletBC(node_sets=("x_min",), axis=0,
                       coeffs=(0.0, 0.0, 0.0, 2.0), kind="const", name="b")]
    with pytest.raises(BCError, match="axis"):
        build_mask_offset(mesh, bcs, factor=1.0)


def test_unknown_node_set():
    mesh = box()
    bcs = [DirichletBC(node_sets=("nope",), axis=0,
                       coeffs=(0.0, 0.0, 0.0, 0.0), kind="const", name="a")]
    with pytest.raises(BCError, match="nope"):
        build_mask_offset(mesh, bcs, factor=1.0)


def test_apply_bc_composition():
    rng = np.random.default_rng(0)
    mask = (rng.random((5, 3)) > 0.5).astype(float)
    offset = rng.standard_normal((5, 3))
    raw = rng.standard_normal((5, 3))
    u = apply_bc(mask, offset, raw)
    np.testing.assert_allclose(u, mask * raw + offset)


def test_dirichlet_validation():
    with pytest.raises(BCError):
        DirichletBC(node_sets=(), axis=0, coeffs=(0, 0, 0, 0),
                    kind="const", name="a")
    with pytest.raises(BCError):
        DirichletBC(node_sets=("s",), axis=5, coeffs=(0, 0, 0, 0),
                    kind="const", name="a")
    with pytest.raises(BCError):
        DirichletBC(node_sets=("s",), axis=0, coeffs=(0, 0, 0, 0),
                    kind="weird", name="a")


def test_traction_validation():
    TractionBC(side_sets=("top",), vector=(0.0, 1.0, 0.0), name="t")
    with pytest.raises(BCError):
        TractionBC(side_sets=(), vector=(0.0, 1.0, 0.0), name="t")
    with pytest.raises(BCError):
        TractionBC(side_sets=("top",), vector=(0.0, 1.0), name="t")


def test_load_program():
    p = LoadProgram(factors=(0.5, 1.0))
    assert len(p) == 2
    with pytest.raises(BCError):
        LoadProgram(factors=())
    with pytest.raises(BCError):
        LoadProgram(factors=(1.0, float("nan")))
