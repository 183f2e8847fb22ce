"""End-to-end training and inference on small meshes."""

import os

import numpy as np
import pytest

from demplast.bc import DirichletBC, LoadProgram
from demplast.material import ElasticConstants, HardeningLaw, PlasticState
from demplast.mesh import generate_structured_box
from demplast.oracle import analytic_shear_curve
from demplast.presets import CYCLE
from demplast.solver import (NetworkConfig, OptimizerConfig, Problem,
                             SolverError, infer, read_state, run, write_state)

from conftest import KAPPA, MU, SY0


def all_node_shear_problem(divisions, factors, mode="isotropic", tol=1e-6,
                           seed=0):
    """Every node pinned to u = (0.25 * factor * y, 0, 0): training only
    has to discover the constant-zero correction."""
    mesh = generate_structured_box((1.0, 1.0, 1.0), divisions)
    law = HardeningLaw(sigma_y0=SY0, H=500.0 * (mode == "isotropic"),
                       C=500.0 * (mode == "kinematic"), mode=mode)
    bcs = [
        DirichletBC(node_sets=("all",), axis=0, coeffs=(0.0, 0.25, 0.0, 0.0),
                    kind="affine", name="drive"),
        DirichletBC(node_sets=("all",), axis=1, coeffs=(0.0,) * 4,
                    kind="const", name="lock_y"),
        DirichletBC(node_sets=("all",), axis=2, coeffs=(0.0,) * 4,
                    kind="const", name="lock_z"),
    ]
    return Problem(
        mesh=mesh,
        materials=[(ElasticConstants(mu=MU, kappa=KAPPA), law)],
        dirichlet=bcs,
        program=LoadProgram(factors=tuple(factors)),
        network=NetworkConfig(widths=(3, 8, 3), seed=seed),
        optimizer=OptimizerConfig(tol=tol, patience=10,
                                  max_iters_per_step=200),
    )


def test_zero_program_stays_exactly_zero():
    problem = all_node_shear_problem((1, 1, 1), [0.0, 0.0])
    records = run(problem)
    for rec in records:
        assert rec.loss == 0.0
        np.testing.assert_array_equal(rec.u, 0.0)
        np.testing.assert_array_equal(rec.sigma, 0.0)
        np.testing.assert_array_equal(rec.ebar_p, 0.0)


@pytest.mark.parametrize("mode", ["isotropic", "kinematic"])
def test_cyclic_shear_tracks_point_recursion(mode):
    """Fully constrained single element through a full load reversal: the
    committed stresses must land on the scalar recursion at every step."""
    problem = all_node_shear_problem((1, 1, 1), CYCLE, mode=mode)
    records = run(problem)
    law = problem.materials[0][1]
    tau, ebar, _ = analytic_shear_curve(ElasticConstants(mu=MU, kappa=KAPPA),
                                        law, 0.25 * np.array(CYCLE))
    for rec, t, e in zip(records, tau, ebar):
        np.testing.assert_allclose(rec.sigma[0, 3], t, atol=1e-10)
        np.testing.assert_allclose(rec.ebar_p[0], e, atol=1e-12)
        assert rec.converged


def test_run_writes_step_outputs(tmp_path):
    problem = all_node_shear_problem((1, 1, 1), [0.5, 1.0])
    out = tmp_path / "run"
    records = run(problem, out_dir=str(out))
    assert len(records) == 2
    for k in (1, 2):
        assert (out / f"step_{k}.ckpt").exists()
        assert (out / f"state_{k}.dat").exists()
        assert (out / f"step_{k}.vtk").exists()
    state = read_state(str(out / "state_2.dat"), problem.mesh.n_elements)
    np.testing.assert_array_equal(state.sigma, records[1].sigma)
    np.testing.assert_array_equal(state.ebar_p, records[1].ebar_p)


def test_state_file_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    n = 7
    state = PlasticState(sigma=rng.standard_normal((n, 6)),
                         eps_p=rng.standard_normal((n, 6)),
                         ebar_p=rng.random(n),
                         q=rng.standard_normal((n, 6)))
    path = tmp_path / "state.dat"
    write_state(str(path), state)
    assert path.stat().st_size == n * 19 * 8
    back = read_state(str(path), n)
    np.testing.assert_array_equal(back.sigma, state.sigma)
    np.testing.assert_array_equal(back.eps_p, state.eps_p)
    np.testing.assert_array_equal(back.ebar_p, state.ebar_p)
    np.testing.assert_array_equal(back.q, state.q)


def test_read_state_size_mismatch(tmp_path):
    path = tmp_path / "state.dat"
    np.zeros(5).tofile(str(path))
    with pytest.raises(SolverError, match="expected"):
        read_state(str(path), 7)


def test_inference_replays_on_finer_mesh(tmp_path):
    """Checkpoints from a single-element run drive a refined mesh of the
    same cube; the affine constraint makes the fields mesh-independent."""
    factors = [1 / 3, 2 / 3, 1.0, 0.5]
    coarse = all_node_shear_problem((1, 1, 1), factors)
    out = tmp_path / "train"
    train_records = run(coarse, out_dir=str(out))

    fine = all_node_shear_problem((2, 2, 2), factors)
    infer_out = tmp_path / "replay"
    replay = infer(fine, str(out), out_dir=str(infer_out))

    assert len(replay) == len(factors)
    for tr, rp in zip(train_records, replay):
        # one stress state everywhere, equal to the coarse element's
        assert np.ptp(rp.sigma, axis=0).max() < 1e-12
        np.testing.assert_allclose(rp.sigma[0], tr.sigma[0], atol=1e-10)
        np.testing.assert_allclose(rp.ebar_p.mean(), tr.ebar_p[0],
                                   atol=1e-12)
    for k in range(1, len(factors) + 1):
        assert (infer_out / f"state_{k}.dat").exists()
        assert (infer_out / f"step_{k}.vtk").exists()
        assert not (infer_out / f"step_{k}.ckpt").exists()


def test_infer_missing_checkpoint_names_step(tmp_path):
    problem = all_node_shear_problem((1, 1, 1), [0.5, 1.0])
    out = tmp_path / "train"
    run(problem, out_dir=str(out))
    os.remove(out / "step_2.ckpt")
    with pytest.raises(SolverError, match="step 2"):
        infer(problem, str(out))


def test_divergent_step_reports_progress(tmp_path):
    mesh = generate_structured_box((1.0, 1.0, 1.0), (1, 1, 1))
    law = HardeningLaw(sigma_y0=SY0, H=500.0)
    # step 1 (factor 0, zero-init net) has identically zero loss and
    # gradient, so it converges untouched; step 2 pulls x_min and the
    # absurd learning rate overflows the parameters
    bcs = [DirichletBC(node_sets=("x_min",), axis=0,
                       coeffs=(0.0, 0.0, 0.0, 0.3), kind="const", name="pull")]
    problem = Problem(
        mesh=mesh,
        materials=[(ElasticConstants(mu=MU, kappa=KAPPA), law)],
        dirichlet=bcs,
        program=LoadProgram(factors=(0.0, 1.0)),
        network=NetworkConfig(widths=(3, 4, 3), seed=1),
        optimizer=OptimizerConfig(lr=1e160, patience=2,
                                  max_iters_per_step=50),
    )
    with pytest.raises(SolverError, match="1 completed step"):
        with np.errstate(all="ignore"):
            run(problem, out_dir=str(tmp_path / "out"))
    # the completed step is still on disk
    assert (tmp_path / "out" / "step_1.ckpt").exists()


def test_log_callback_sees_each_step():
    problem = all_node_shear_problem((1, 1, 1), [0.5, 1.0])
    lines = []
    run(problem, log=lines.append)
    assert len(lines) == 2
    assert "step 1" in lines[0] and "step 2" in lines[1]
