"""End-to-end runs of the command line entry point, in process."""

import textwrap

import numpy as np
import pytest

from perfhom.cli import main
from perfhom.experiments import VerdictGapError
from perfhom.geometry import mask_from_text
from perfhom.grid import field_from_text
from perfhom.kernels import ValidationReport

VK = """
    [experiment]
    kind = validate-kernel

    [kernel]
    profile = tent
    delta = 0.4
"""

SOLVE = """
    [experiment]
    kind = solve
    rhs = sine
    tol = 1e-8

    [geometry]
    example = periodic-balls
    omega_lo = 0 0
    omega_hi = 1 1
    epsilon = 0.5
    radius_factor = 0.2
    spacing = 0.0625

    [kernel]
    profile = bump
    delta = 0.5
"""

SWEEP = """
    [experiment]
    kind = epsilon-sweep
    bc = dirichlet_holes
    epsilons = 0.5 0.25
    h_over_eps = 0.25
    compute_eigenvalue = false
    tol = 1e-8

    [geometry]
    example = periodic-balls
    omega_lo = 0 0
    omega_hi = 1 1
    gamma = 1.0
    radius_factor = 0.25

    [kernel]
    profile = bump
    delta = 0.5
    mode = mass1
"""

CELL = """
    [experiment]
    kind = cell-coefficients

    [geometry]
    cell_lengths = 1 1
    hole_radius = 0.25
    cell_spacing = 0.0625
"""

DELTA = """
    [experiment]
    kind = delta-sweep
    rhs = sine
    deltas = 0.4 0.25
    tol = 1e-10

    [geometry]
    example = none
    omega_lo = 0 0
    omega_hi = 1 1
    spacing = 0.0625

    [kernel]
    profile = bump
"""

LIMITS = """
    [experiment]
    kind = iterated-limits
    table = dirichlet
    tol = 1e-10

    [geometry]
    dim = 3
    nodes_per_axis = 8
    box_size = 4.0
"""

EIGEN = """
    [experiment]
    kind = eigen
    tol = 1e-8

    [geometry]
    example = periodic-balls
    omega_lo = 0 0
    omega_hi = 1 1
    epsilon = 0.5
    radius_factor = 0.2
    spacing = 0.0625

    [kernel]
    profile = bump
    delta = 0.5
"""


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text).lstrip())
    return path


def run(config, outdir, emit=None):
    argv = ["run", str(config), "--output-dir", str(outdir)]
    if emit is not None:
        argv += ["--emit-fields", emit]
    return main(argv)


def read_summary(outdir):
    import json

    return json.loads((outdir / "summary.json").read_text())


def test_no_subcommand_is_a_usage_error(capsys):
    assert main([]) == 2
    assert "run" in capsys.readouterr().out


def test_missing_config_file(tmp_path, capsys):
    assert run(tmp_path / "nope.ini", tmp_path / "out") == 2
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize(
    "text",
    [
        VK.replace("[kernel]", "[kernle]"),
        VK.replace("profile = tent", "profile = tent\n    wobble = 3"),
        VK.replace("validate-kernel", "validate-kernle"),
        VK.replace("kind = validate-kernel", "rhs = one"),
        SOLVE.replace("rhs = sine", "rhs = cosine"),
    ],
    ids=["section", "key", "kind", "missing-kind", "rhs"],
)
def test_config_errors_exit_2(tmp_path, text, capsys):
    cfg = write_config(tmp_path, text)
    assert run(cfg, tmp_path / "out") == 2
    assert "config error" in capsys.readouterr().err


def test_validate_kernel_outputs(tmp_path):
    cfg = write_config(tmp_path, VK)
    out = tmp_path / "out"
    assert run(cfg, out) == 0
    assert (out / "config-echo.ini").read_bytes() == cfg.read_bytes()
    summary = read_summary(out)
    assert summary["kind"] == "validate-kernel"
    assert summary["passed"] is True
    assert abs(summary["discrete_mass"] - 1.0) <= 1e-12
    lines = (out / "kernel-checks.csv").read_text().splitlines()
    assert lines[0] == "check,ok,value"
    assert all(",true," in line for line in lines[1:])


def test_validation_failure_exits_3(tmp_path, monkeypatch, capsys):
    def fake(spec, mass_rtol=1e-8):
        return ValidationReport(passed=False, checks={"mass": (False, 0.5)}, notes=())

    monkeypatch.setattr("perfhom.cli.validate_kernel", fake)
    cfg = write_config(tmp_path, VK)
    out = tmp_path / "out"
    assert run(cfg, out) == 3
    assert "validation failure" in capsys.readouterr().err
    assert read_summary(out)["passed"] is False
    assert "mass,false,0.5" in (out / "kernel-checks.csv").read_text()


def test_solver_failure_exits_4(tmp_path, capsys):
    cfg = write_config(tmp_path, SOLVE + "\n[solver]\nmax_iterations = 1\n")
    assert run(cfg, tmp_path / "out") == 4
    assert "solver failure" in capsys.readouterr().err


def test_eigen_stall_exits_4(tmp_path, capsys):
    cfg = write_config(tmp_path, EIGEN.replace("tol = 1e-8", "tol = 1e-14"))
    cfg.write_text(cfg.read_text() + "\n[solver]\nmax_iterations = 1\n")
    out = tmp_path / "out"
    assert run(cfg, out) == 4
    assert "solver failure" in capsys.readouterr().err
    assert not (out / "eigen.csv").exists()


def test_verdict_gap_exits_5(tmp_path, monkeypatch, capsys):
    def fake(*args, **kwargs):
        raise VerdictGapError("ambiguous", distance=0.01)

    monkeypatch.setattr("perfhom.cli.iterated_limit_dirichlet", fake)
    cfg = write_config(tmp_path, LIMITS)
    assert run(cfg, tmp_path / "out") == 5
    assert "verdict gap" in capsys.readouterr().err


def test_solve_emits_requested_fields(tmp_path):
    cfg = write_config(tmp_path, SOLVE)
    out = tmp_path / "out"
    assert run(cfg, out, emit="u,mask") == 0
    summary = read_summary(out)
    assert summary["num_unknowns"] > 0
    assert summary["l2_norm_u"] > 0.0
    assert summary["field_files"] == ["u.txt", "mask.txt"]
    u = field_from_text((out / "u.txt").read_text())
    mask = mask_from_text((out / "mask.txt").read_text())
    assert u.grid.shape == mask.grid.shape
    assert np.isfinite(u.values).all()
    for name in summary["figure_files"]:
        assert (out / name).suffix == ".png" and (out / name).stat().st_size > 0


def test_unknown_emit_field_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path, SOLVE)
    assert run(cfg, tmp_path / "out", emit="u,bogus") == 2
    assert "bogus" in capsys.readouterr().err


def test_figures_can_be_disabled(tmp_path):
    cfg = write_config(tmp_path, SOLVE + "\n[output]\nfigures = false\n")
    out = tmp_path / "out"
    assert run(cfg, out) == 0
    assert list(out.glob("*.png")) == []
    assert "figure_files" not in read_summary(out)


def test_default_output_dir_is_next_to_config(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, VK, name="kern.ini")
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "kern-out" / "summary.json").is_file()


@pytest.mark.parametrize("text", [VK, CELL, SWEEP], ids=["kernel", "cell", "sweep"])
def test_outputs_are_byte_identical_across_reruns(tmp_path, text):
    cfg = write_config(tmp_path, text)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run(cfg, out1) == 0
    assert run(cfg, out2) == 0
    names1 = sorted(p.name for p in out1.iterdir())
    assert names1 == sorted(p.name for p in out2.iterdir())
    for name in names1:
        if name.endswith(".png"):
            continue
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_epsilon_sweep_csv_schema(tmp_path):
    cfg = write_config(tmp_path, SWEEP)
    out = tmp_path / "out"
    assert run(cfg, out) == 0
    lines = (out / "epsilon-sweep.csv").read_text().splitlines()
    phi = ",".join(f"pairing_err_phi{i}" for i in range(1, 7))
    assert lines[0] == f"epsilon,h,lambda1,l2_norm_u,{phi},solver_iters,residual"
    assert len(lines) == 3
    assert lines[1].startswith("0.5,0.125,")
    assert lines[2].startswith("0.25,0.0625,")
    summary = read_summary(out)
    assert summary["epsilons"] == [0.5, 0.25]
    assert "record_errors" not in summary


def test_delta_sweep_errors_shrink(tmp_path):
    cfg = write_config(tmp_path, DELTA)
    out = tmp_path / "out"
    assert run(cfg, out) == 0
    lines = (out / "delta-sweep.csv").read_text().splitlines()
    assert lines[0] == "delta,h,error_l2,solver_iters,residual"
    errs = [float(line.split(",")[2]) for line in lines[1:]]
    assert errs[0] > errs[1] > 0.0


def test_iterated_limits_small_table(tmp_path):
    cfg = write_config(tmp_path, LIMITS)
    out = tmp_path / "out"
    assert run(cfg, out) == 0
    lines = (out / "iterated-limits.csv").read_text().splitlines()
    assert lines[0] == "case_id,regime,distance,equal,predicted_equal,agrees"
    assert len(lines) == 5
    summary = read_summary(out)
    assert summary["all_agree"] is True
    assert set(summary["cases"]) == {
        "dirichlet_eq_b",
        "dirichlet_between_a_b",
        "dirichlet_eq_a",
        "dirichlet_ll_a",
    }


def test_eigen_outputs(tmp_path):
    cfg = write_config(tmp_path, EIGEN)
    out = tmp_path / "out"
    assert run(cfg, out) == 0
    lines = (out / "eigen.csv").read_text().splitlines()
    assert lines[0] == "lambda1,beta1,residual,iterations,converged,lambda_lower,established"
    summary = read_summary(out)
    assert 0.0 < summary["beta1"] < 1.0
    assert summary["lambda1"] + summary["beta1"] == pytest.approx(1.0)
    assert summary["converged"] is True
