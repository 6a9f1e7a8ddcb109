"""Field files, checkpoints, step tables, reports, trajectory layout."""

import numpy as np
import pytest

from conftest import make_problem

from mhdflow import (State, build_grid, load_checkpoint, read_fields,
                     run_simulation, save_checkpoint, write_fields)
from mhdflow.errors import ConfigError
from mhdflow.fields import ScalarField, VectorField
from mhdflow.io import (STEP_COLUMNS, load_trajectory_states, read_report,
                        read_steps, save_trajectory, write_report, write_steps)


def random_state(nx=7, ny=5, seed=3, time=0.625):
    g = build_grid(nx, ny, 1.0, 1.0)
    rng = np.random.default_rng(seed)
    return State(time,
                 ScalarField(g, rng.uniform(0.5, 2.0, g.n_cells)),
                 ScalarField(g, rng.uniform(0.1, 1.5, g.n_cells)),
                 VectorField(g, rng.normal(0, 1, (g.n_cells, 2))))


def test_tabular_round_trip_is_bit_exact(tmp_path):
    st = random_state()
    path = str(tmp_path / "f.dat")
    write_fields(st, path)
    back = read_fields(path)
    assert back.time == st.time
    assert np.array_equal(back.rho.values, st.rho.values)
    assert np.array_equal(back.b.values, st.b.values)
    assert np.array_equal(back.u.values, st.u.values)
    assert (back.rho.grid.nx, back.rho.grid.ny) == (7, 5)


def test_tabular_tolerates_row_shuffle(tmp_path):
    st = random_state()
    path = str(tmp_path / "f.dat")
    write_fields(st, path)
    lines = open(path).read().splitlines()
    head = [ln for ln in lines if ln.startswith("#")]
    rows = [ln for ln in lines if not ln.startswith("#")]
    rng = np.random.default_rng(0)
    rng.shuffle(rows)
    with open(path, "w") as fh:
        fh.write("\n".join(head + rows) + "\n")
    back = read_fields(path)
    assert np.array_equal(back.rho.values, st.rho.values)
    assert np.array_equal(back.u.values, st.u.values)


def test_read_fields_checks_grid_dimensions(tmp_path):
    st = random_state()
    path = str(tmp_path / "f.dat")
    write_fields(st, path)
    with pytest.raises(ValueError, match=r"7x5.*expected 6x6"):
        read_fields(path, build_grid(6, 6))


def test_read_fields_rejects_foreign_and_stale_files(tmp_path):
    junk = tmp_path / "junk.dat"
    junk.write_text("hello\nworld\n")
    with pytest.raises(ValueError, match="not a tabular field file"):
        read_fields(str(junk))

    st = random_state()
    path = tmp_path / "f.dat"
    write_fields(st, str(path))
    lines = path.read_text().splitlines()
    lines[0] = "# mhdflow-fields version 99"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="format version 99"):
        read_fields(str(path))


def test_read_fields_rejects_truncated_payload(tmp_path):
    st = random_state()
    path = tmp_path / "f.dat"
    write_fields(st, str(path))
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(ValueError, match="payload shape"):
        read_fields(str(path))


def test_vtk_output_shape(tmp_path):
    st = random_state(nx=4, ny=3)
    path = tmp_path / "f.vtk"
    write_fields(st, str(path), fmt="vtk")
    text = path.read_text()
    lines = text.splitlines()
    assert lines[0].startswith("# vtk DataFile")
    assert "DIMENSIONS 4 3 1" in text
    assert "POINT_DATA 12" in text
    assert text.count("SCALARS") == 2
    assert "VECTORS velocity double" in text
    vec_rows = lines[lines.index("VECTORS velocity double") + 1:]
    assert len(vec_rows) == 12
    assert all(row.split()[2] == "0" for row in vec_rows)


def test_write_fields_rejects_unknown_format(tmp_path):
    with pytest.raises(ValueError, match="unknown field format"):
        write_fields(random_state(), str(tmp_path / "f.x"), fmt="hdf5")


def test_checkpoint_round_trip(tmp_path):
    st = random_state()
    path = str(tmp_path / "c.npz")
    save_checkpoint(st, path)
    back = load_checkpoint(path)
    assert back.time == st.time
    assert np.array_equal(back.rho.values, st.rho.values)
    assert np.array_equal(back.b.values, st.b.values)
    assert np.array_equal(back.u.values, st.u.values)
    with pytest.raises(ValueError, match=r"7x5.*expected 4x4"):
        load_checkpoint(path, build_grid(4, 4))


def test_checkpoint_version_gate(tmp_path):
    st = random_state()
    g = st.rho.grid
    path = str(tmp_path / "c.npz")
    np.savez(path, version=99, nx=g.nx, ny=g.ny, lx=g.lx, ly=g.ly,
             time=st.time, rho=st.rho.values, b=st.b.values, u=st.u.values)
    with pytest.raises(ValueError, match="checkpoint version 99"):
        load_checkpoint(path)


def _tiny_trajectory(**kw):
    prob, s0 = make_problem(nx=8, **kw)
    return prob, run_simulation(prob, s0, T=3e-3, dt=1e-3)


def test_steps_table_round_trip(tmp_path):
    _, traj = _tiny_trajectory()
    path = str(tmp_path / "steps.tsv")
    write_steps(traj.reports, path)
    table = read_steps(path)
    assert tuple(table.keys()) == STEP_COLUMNS
    assert all(v.shape == (len(traj.reports),) for v in table.values())
    assert np.array_equal(table["step"], np.arange(1, len(traj.reports) + 1))
    # %.17g round-trips doubles exactly
    assert np.array_equal(table["residual"],
                          [r.energy.residual for r in traj.reports])
    assert np.array_equal(table["mass_rho_defect"],
                          [r.mass_rho_defect for r in traj.reports])
    assert np.array_equal(table["dom_lower"],
                          [r.domination.lower_margin for r in traj.reports])


def test_steps_table_without_domination_uses_nan(tmp_path):
    _, traj = _tiny_trajectory(c_star=None, c_star_upper=None)
    path = str(tmp_path / "steps.tsv")
    write_steps(traj.reports, path)
    table = read_steps(path)
    assert np.isnan(table["dom_lower"]).all()
    assert np.isnan(table["dom_upper_outflow"]).all()


def test_read_steps_rejects_ragged_table(tmp_path):
    path = tmp_path / "steps.tsv"
    path.write_text("a\tb\tc\n1\t2\n")
    with pytest.raises(ValueError):
        read_steps(str(path))
    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_steps(str(empty))


def test_report_round_trip_and_verdict_words(tmp_path):
    path = str(tmp_path / "report.txt")
    entries = {
        "max_principle": True,
        "domination": False,
        "mass_ledger": np.bool_(True),  # comparisons of numpy floats yield these
        "steps": 40,
        "worst_residual": -9.5e-08,
        "label": "inflow-outflow",
    }
    write_report(entries, path)
    text = open(path).read()
    assert "max_principle = pass" in text
    assert "domination = FAIL" in text
    assert "mass_ledger = pass" in text
    lines = text.splitlines()
    assert [ln.split(" = ")[0] for ln in lines] == list(entries)  # stable order
    back = read_report(path)
    assert back["steps"] == "40"
    assert float(back["worst_residual"]) == -9.5e-08
    assert back["label"] == "inflow-outflow"


def test_trajectory_directory_round_trip(tmp_path):
    prob, traj = _tiny_trajectory()
    outdir = str(tmp_path / "run")
    save_trajectory(traj, outdir, config_text="[grid]\nnx = 8\n")
    assert (tmp_path / "run" / "steps.tsv").exists()
    assert (tmp_path / "run" / "checkpoint.npz").exists()
    assert (tmp_path / "run" / "config.cfg").read_text().startswith("[grid]")

    states = load_trajectory_states(outdir, prob.grid)
    assert len(states) == len(traj.states)
    for got, want in zip(states, traj.states):
        assert got.time == want.time
        assert np.array_equal(got.rho.values, want.rho.values)
        assert np.array_equal(got.u.values, want.u.values)

    chk = load_checkpoint(str(tmp_path / "run" / "checkpoint.npz"), prob.grid)
    assert np.array_equal(chk.b.values, traj.final.b.values)


def test_load_trajectory_states_requires_layout(tmp_path):
    with pytest.raises(ConfigError, match="no states"):
        load_trajectory_states(str(tmp_path))
