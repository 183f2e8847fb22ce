"""VTK writer/reader, stress-strain curve extraction, reference metrics."""

import numpy as np
import pytest

from demplast.mesh import build_grad_operators, generate_structured_box, Mesh
from demplast.post import (absolute_difference, compare_to_reference,
                           curve_csv, curve_rows, l2_percent,
                           read_reference_csv, read_vtk, write_vtk)
from demplast.solver import StepRecord


def five_tet_mesh():
    nodes = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                      [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float)
    conn = np.full((5, 8), -1, dtype=np.int64)
    conn[:, :4] = [(0, 1, 2, 5), (0, 2, 3, 7), (0, 5, 2, 7), (0, 5, 7, 4),
                   (2, 5, 6, 7)]
    return Mesh(nodes=nodes, kinds=np.full(5, "tet4", dtype="<U4"), conn=conn)


def fake_record(mesh, step=1, factor=0.5, seed=0):
    rng = np.random.default_rng(seed)
    ne = mesh.n_elements
    sigma = rng.standard_normal((ne, 6))
    return StepRecord(step=step, factor=factor, loss=1.25, iterations=7,
                      converged=True,
                      u=rng.standard_normal((mesh.n_nodes, 3)),
                      strain=rng.standard_normal((ne, 6)),
                      sigma=sigma, ebar_p=rng.random(ne),
                      mises=rng.random(ne))


def test_vtk_round_trip_hex(tmp_path):
    mesh = generate_structured_box((2.0, 1.0, 1.0), (2, 1, 1))
    rec = fake_record(mesh)
    path = tmp_path / "out.vtk"
    write_vtk(mesh, str(path), point_data={"displacement": rec.u},
              cell_data={"mises": rec.mises, "peeq": rec.ebar_p},
              cell_tensors={"stress": rec.sigma}, title="demo")
    data = read_vtk(str(path))
    np.testing.assert_array_equal(data.points, mesh.nodes)
    for cell, want in zip(data.cells, mesh.conn):
        np.testing.assert_array_equal(cell, want[:len(cell)])
    assert data.cell_types.tolist() == [12, 12]
    np.testing.assert_array_equal(data.point_data["displacement"], rec.u)
    np.testing.assert_array_equal(data.cell_data["mises"], rec.mises)
    np.testing.assert_array_equal(data.cell_data["peeq"], rec.ebar_p)
    np.testing.assert_array_equal(data.cell_tensors["stress"], rec.sigma)


def test_vtk_round_trip_tet(tmp_path):
    mesh = five_tet_mesh()
    path = tmp_path / "tets.vtk"
    write_vtk(mesh, str(path))
    data = read_vtk(str(path))
    np.testing.assert_array_equal(data.points, mesh.nodes)
    for cell, want in zip(data.cells, mesh.conn):
        assert len(cell) == 4
        np.testing.assert_array_equal(cell, want[:4])
    assert data.cell_types.tolist() == [10] * 5


def test_vtk_header_is_ascii_legacy(tmp_path):
    mesh = five_tet_mesh()
    path = tmp_path / "tets.vtk"
    write_vtk(mesh, str(path), title="my title")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# vtk DataFile Version")
    assert lines[1] == "my title"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"


def test_curve_rows_engineering_shear():
    mesh = generate_structured_box((1.0, 1.0, 1.0), (2, 1, 1))
    measures = build_grad_operators(mesh).measures()
    rec = fake_record(mesh, step=3, factor=0.25)
    rows = curve_rows([rec], measures)
    assert len(rows) == 1
    step, factor, strain, stress = rows[0]
    assert (step, factor) == (3, 0.25)
    w = measures / measures.sum()
    np.testing.assert_allclose(strain, 2.0 * (w @ rec.strain[:, 3]),
                               rtol=1e-15)
    np.testing.assert_allclose(stress, w @ rec.sigma[:, 3], rtol=1e-15)


def test_curve_rows_normal_component_not_doubled():
    mesh = generate_structured_box((1.0, 1.0, 1.0), (1, 1, 1))
    measures = build_grad_operators(mesh).measures()
    rec = fake_record(mesh)
    (_, _, strain, _), = curve_rows([rec], measures, component=0)
    np.testing.assert_allclose(strain, rec.strain[0, 0], rtol=1e-15)


def test_curve_csv_format(tmp_path):
    mesh = generate_structured_box((1.0, 1.0, 1.0), (1, 1, 1))
    measures = build_grad_operators(mesh).measures()
    recs = [fake_record(mesh, step=k, factor=0.5 * k, seed=k)
            for k in (1, 2)]
    path = tmp_path / "curve.csv"
    curve_csv(recs, measures, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "step,factor,strain,stress"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert int(first[0]) == 1
    np.testing.assert_allclose(float(first[2]), 2.0 * recs[0].strain[0, 3],
                               rtol=1e-15)


def test_absolute_difference_and_l2():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([1.0, 2.5, 2.0])
    np.testing.assert_allclose(absolute_difference(a, b), 0.5)
    np.testing.assert_allclose(l2_percent(a, b),
                               100 * np.sqrt(1.25) / np.sqrt(1 + 6.25 + 4))
    with pytest.raises(ValueError, match="shape"):
        absolute_difference(a, b[:2])
    with pytest.raises(ValueError, match="zero"):
        l2_percent(a, np.zeros(3))


def test_reference_csv_round_trip(tmp_path):
    path = tmp_path / "ref.csv"
    path.write_text(
        "# comparison fields\n"
        "node,ux,uy,uz\n"
        "0, 0.1, 0.2, 0.3\n"
        "2, -1.0, 0.0, 4.0\n"
        "\n"
        "elem,mises,peeq\n"
        "0, 55.0, 0.01\n"
        "1, 60.0, 0.02\n")
    ref = read_reference_csv(str(path))
    assert ref["u"].shape == (3, 3)
    np.testing.assert_array_equal(ref["u"][2], [-1.0, 0.0, 4.0])
    np.testing.assert_array_equal(ref["u"][1], 0.0)
    np.testing.assert_array_equal(ref["mises"], [55.0, 60.0])
    np.testing.assert_array_equal(ref["peeq"], [0.01, 0.02])


def test_reference_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0, 1.0, 2.0, 3.0\n")
    with pytest.raises(ValueError, match="bad.csv:1"):
        read_reference_csv(str(path))
    path.write_text("node,ux,uy,uz\n0, 1.0\n")
    with pytest.raises(ValueError, match="bad.csv:2"):
        read_reference_csv(str(path))


def test_compare_to_reference_self_is_zero(tmp_path):
    mesh = generate_structured_box((1.0, 1.0, 1.0), (2, 1, 1))
    rec = fake_record(mesh)
    lines = ["node,ux,uy,uz"]
    lines += [f"{i},{u[0]:.17g},{u[1]:.17g},{u[2]:.17g}"
              for i, u in enumerate(rec.u)]
    lines += ["elem,mises,peeq"]
    lines += [f"{e},{m:.17g},{p:.17g}"
              for e, (m, p) in enumerate(zip(rec.mises, rec.ebar_p))]
    path = tmp_path / "ref.csv"
    path.write_text("\n".join(lines) + "\n")
    metrics = compare_to_reference(rec, read_reference_csv(str(path)))
    assert set(metrics) == {"displacement_ad", "displacement_l2_pct",
                            "mises_ad", "mises_l2_pct",
                            "peeq_ad", "peeq_l2_pct"}
    for v in metrics.values():
        assert v == 0.0
