"""End-to-end command-line tests driving the full pipeline."""

import json
import math

import numpy as np
import pytest

from lpvembed.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def msd_file(tmp_path, capsys):
    code, out, err = run(capsys, "example", "msd2dof", "--out", str(tmp_path))
    assert code == 0, err
    return tmp_path / "msd2dof_nlfr.json"


def test_example_writes_expected_matrix(msd_file):
    raw = json.loads(msd_file.read_text())
    k1 = math.pi**2
    k2 = (1.2 * math.pi) ** 2
    assert raw["A"][2][0] == -k1 - k2
    assert raw["f"] == ["0.1*sin(10*z1)*z2 + 0.2*z2^2 + 10*z1^3"]


def test_example_unknown_name(tmp_path, capsys):
    code, out, err = run(capsys, "example", "nosuch", "--out", str(tmp_path))
    assert code == 1
    assert "error[UnknownExample]" in err


def test_validate_msd(msd_file, capsys):
    code, out, err = run(capsys, "validate", "--model", str(msd_file))
    assert code == 0
    assert "RESULT: embeddable" in out
    assert "check[offset]" in out and "PASS" in out


def test_validate_rejects_nonzero_dzw(tmp_path, msd_file, capsys):
    raw = json.loads(msd_file.read_text())
    raw["Dzw"] = [[0.1], [0.0]]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(raw))
    code, out, err = run(capsys, "validate", "--model", str(bad))
    assert code == 1
    assert "error[NonzeroDzw]" in err


def test_validate_offset_toy_column_space_violation(tmp_path, capsys):
    # z has two channels but u reaches only the first; the offset needs both
    raw = {
        "dims": {"n_x": 2, "n_u": 1, "n_y": 1, "n_w": 1, "n_z": 2},
        "A": [[-1.0, 0.0], [0.0, -1.0]],
        "Bw": [[0.0], [1.0]],
        "Bu": [[1.0], [0.0]],
        "Cz": [[1.0, 0.0], [0.0, 1.0]],
        "Cy": [[1.0, 0.0]],
        "Dzu": [[0.0], [0.0]],
        "Dyw": [[0.0]],
        "Dyu": [[0.0]],
        "f": ["z2 + 1"],
    }
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(raw))
    code, out, err = run(capsys, "validate", "--model", str(path))
    assert code == 1
    assert "error[ColumnSpaceViolation]" in err


def test_embed_default_ordering(tmp_path, msd_file, capsys):
    code, out, err = run(
        capsys, "embed", "--model", str(msd_file), "--out", str(tmp_path)
    )
    assert code == 0
    assert "10*z1^2" in out
    assert "0.1*sin(10*z1) + 0.2*z2" in out
    lpv_path = tmp_path / "msd2dof_nlfr_lpv.json"
    assert lpv_path.exists()
    assert (tmp_path / "msd2dof_nlfr_embed_report.txt").exists()
    raw = json.loads(lpv_path.read_text())
    assert raw["dims"]["n_p"] == 2


def test_embed_reversed_ordering(tmp_path, msd_file, capsys):
    out_lpv = tmp_path / "rev.json"
    code, out, err = run(
        capsys, "embed", "--model", str(msd_file), "--out", str(tmp_path),
        "--ordering", "2,1", "--lpv", str(out_lpv),
    )
    assert code == 0
    assert "0.2*z2" in out
    raw = json.loads(out_lpv.read_text())
    assert raw["schedule"]["ordering"] == [2, 1]
    kinds = {cell["type"] for row in raw["schedule"]["entries"] for cell in row}
    assert "quotient" in kinds


def test_embed_bad_ordering(tmp_path, msd_file, capsys):
    code, out, err = run(
        capsys, "embed", "--model", str(msd_file), "--out", str(tmp_path),
        "--ordering", "1,1",
    )
    assert code == 1
    assert "error[InvalidOrdering]" in err


def test_simulate_deterministic_csv(tmp_path, msd_file, capsys):
    args = (
        "simulate", "--model", str(msd_file), "--out", str(tmp_path),
        "--t-end", "0.5", "--seed", "0",
    )
    code, *_ = run(capsys, *args)
    assert code == 0
    csv_path = tmp_path / "msd2dof_nlfr_traj.csv"
    first = csv_path.read_bytes()
    code, *_ = run(capsys, *args)
    assert code == 0
    assert csv_path.read_bytes() == first
    header = first.decode().splitlines()[0]
    assert header == "t,u1,u2,x1,x2,x3,x4,y1,y2,z1,z2,w1"


def test_simulate_two_sample_edge(tmp_path, msd_file, capsys):
    # a one-step horizon has no multisine grid line below Nyquist, so the
    # input must come from a file
    path = tmp_path / "u.csv"
    path.write_text("u1,u2\n1.0,0.0\n1.0,0.0\n")
    code, out, err = run(
        capsys, "simulate", "--model", str(msd_file), "--out", str(tmp_path),
        "--t-end", "0.001", "--input", f"file:{path}",
    )
    assert code == 0, err
    lines = (tmp_path / "msd2dof_nlfr_traj.csv").read_text().splitlines()
    assert len(lines) == 3  # header + 2 samples


def test_simulate_lpv_file(tmp_path, msd_file, capsys):
    run(capsys, "embed", "--model", str(msd_file), "--out", str(tmp_path))
    lpv_path = tmp_path / "msd2dof_nlfr_lpv.json"
    code, out, err = run(
        capsys, "simulate", "--model", str(lpv_path), "--out", str(tmp_path),
        "--t-end", "0.5",
    )
    assert code == 0
    header = (tmp_path / "msd2dof_nlfr_lpv_traj.csv").read_text().splitlines()[0]
    assert header.endswith("p1,p2")


def test_simulate_input_file(tmp_path, msd_file, capsys):
    n = 20
    path = tmp_path / "input.csv"
    rows = ["u1,u2"] + [f"{0.1 * k},{-0.05 * k}" for k in range(n + 1)]
    path.write_text("\n".join(rows) + "\n")
    code, out, err = run(
        capsys, "simulate", "--model", str(msd_file), "--out", str(tmp_path),
        "--t-end", "0.02", "--input", f"file:{path}",
    )
    assert code == 0, err


def test_simulate_input_file_wrong_columns(tmp_path, msd_file, capsys):
    path = tmp_path / "input.csv"
    path.write_text("u1\n0.0\n0.1\n")
    code, out, err = run(
        capsys, "simulate", "--model", str(msd_file), "--out", str(tmp_path),
        "--t-end", "0.001", "--input", f"file:{path}",
    )
    assert code == 1
    assert "error[InputFormatError]" in err


def test_compare_pipeline_passes(tmp_path, msd_file, capsys):
    run(capsys, "embed", "--model", str(msd_file), "--out", str(tmp_path))
    lpv_path = tmp_path / "msd2dof_nlfr_lpv.json"
    code, out, err = run(
        capsys, "compare", "--model", str(msd_file), "--lpv", str(lpv_path),
        "--out", str(tmp_path), "--t-end", "2",
    )
    assert code == 0, err
    assert "compare PASS" in out
    for name in (
        "compare_report.txt",
        "compare_report.csv",
        "spectrum_nlfr.csv",
        "spectrum_lpv.csv",
    ):
        assert (tmp_path / name).exists()
    report = (tmp_path / "compare_report.csv").read_text().splitlines()
    assert report[0] == "channel,max_abs_error,relative_rms"
    assert float(report[1].split(",")[1]) <= 1e-9


def test_compare_corrupted_lpv_fails(tmp_path, msd_file, capsys):
    run(capsys, "embed", "--model", str(msd_file), "--out", str(tmp_path))
    lpv_path = tmp_path / "msd2dof_nlfr_lpv.json"
    raw = json.loads(lpv_path.read_text())
    # corrupt a basis matrix consistently with its structural matrices so the
    # file loads but the dynamics no longer reconstruct the nonlinearity
    raw["Bw"] = [[0.0], [0.0], [-1.1], [0.0]]
    for cell in raw["basis"]:
        bw = np.array(raw["Bw"])[:, 0]
        cz = np.array(raw["Cz"])[cell["i"] - 1]
        cell["Ak"] = np.outer(bw, cz).tolist()
    bad = tmp_path / "bad_lpv.json"
    bad.write_text(json.dumps(raw))
    code, out, err = run(
        capsys, "compare", "--model", str(msd_file), "--lpv", str(bad),
        "--out", str(tmp_path), "--t-end", "2",
    )
    assert code == 1
    assert "error[ToleranceExceeded]" in err
    assert "compare FAIL" in out


def test_out_dir_env_var(tmp_path, msd_file, capsys, monkeypatch):
    monkeypatch.setenv("LPVEMBED_OUT", str(tmp_path / "envout"))
    code, out, err = run(capsys, "embed", "--model", str(msd_file))
    assert code == 0
    assert (tmp_path / "envout" / "msd2dof_nlfr_lpv.json").exists()


def test_full_pipeline_determinism(tmp_path, capsys):
    outs = []
    for sub in ("a", "b"):
        out_dir = tmp_path / sub
        run(capsys, "example", "msd2dof", "--out", str(out_dir))
        model = out_dir / "msd2dof_nlfr.json"
        run(capsys, "embed", "--model", str(model), "--out", str(out_dir))
        run(
            capsys, "compare", "--model", str(model),
            "--lpv", str(out_dir / "msd2dof_nlfr_lpv.json"),
            "--out", str(out_dir), "--t-end", "1",
        )
        outs.append(
            {
                p.name: p.read_bytes()
                for p in sorted(out_dir.iterdir())
                if p.is_file()
            }
        )
    assert outs[0].keys() == outs[1].keys()
    for name in outs[0]:
        assert outs[0][name] == outs[1][name], name


def test_simulate_divergence_flushes_partial(tmp_path, capsys):
    raw = {
        "dims": {"n_x": 1, "n_u": 1, "n_y": 1, "n_w": 1, "n_z": 1},
        "A": [[1.0]], "Bw": [[1.0]], "Bu": [[1.0]],
        "Cz": [[1.0]], "Cy": [[1.0]],
        "Dzu": [[0.0]], "Dyw": [[0.0]], "Dyu": [[0.0]],
        "f": ["z1^3"],
    }
    path = tmp_path / "unstable.json"
    path.write_text(json.dumps(raw))
    u_path = tmp_path / "u.csv"
    u_path.write_text("u1\n" + "\n".join(["1.0"] * 3001) + "\n")
    code, out, err = run(
        capsys, "simulate", "--model", str(path), "--out", str(tmp_path),
        "--t-end", "3", "--input", f"file:{u_path}",
    )
    assert code == 1
    assert "error[Divergence]" in err
    partial = tmp_path / "unstable_traj.csv"
    assert partial.exists()
    assert len(partial.read_text().splitlines()) > 1


def test_invalid_dt_rejected(tmp_path, msd_file, capsys):
    code, out, err = run(
        capsys, "simulate", "--model", str(msd_file), "--out", str(tmp_path),
        "--dt", "0",
    )
    assert code == 1
    assert "error[InvalidConfig]" in err


def test_embed_report_offset_diagnostics(tmp_path, capsys):
    raw = {
        "dims": {"n_x": 1, "n_u": 1, "n_y": 1, "n_w": 1, "n_z": 1},
        "A": [[-1.0]], "Bw": [[-1.0]], "Bu": [[1.0]],
        "Cz": [[1.0]], "Cy": [[1.0]],
        "Dzu": [[0.0]], "Dyw": [[0.0]], "Dyu": [[0.0]],
        "f": ["z1 + 1"],
    }
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(raw))
    code, out, err = run(capsys, "embed", "--model", str(path), "--out", str(tmp_path))
    assert code == 0
    report = (tmp_path / "toy_embed_report.txt").read_text()
    assert "residual" in report
    assert "stability" in report


def test_embed_linear_model_yields_lti(tmp_path, capsys):
    raw = {
        "dims": {"n_x": 1, "n_u": 1, "n_y": 1, "n_w": 1, "n_z": 1},
        "A": [[-1.0]], "Bw": [[1.0]], "Bu": [[1.0]],
        "Cz": [[1.0]], "Cy": [[1.0]],
        "Dzu": [[0.0]], "Dyw": [[0.0]], "Dyu": [[0.0]],
        "f": ["0"],
    }
    path = tmp_path / "lin.json"
    path.write_text(json.dumps(raw))
    code, out, err = run(capsys, "embed", "--model", str(path), "--out", str(tmp_path))
    assert code == 0
    lpv_raw = json.loads((tmp_path / "lin_lpv.json").read_text())
    assert lpv_raw["dims"]["n_p"] == 0
    assert lpv_raw["basis"] == []
    assert lpv_raw["A"] == raw["A"]


def test_compare_reversed_ordering_also_passes(tmp_path, msd_file, capsys):
    run(capsys, "embed", "--model", str(msd_file), "--out", str(tmp_path),
        "--ordering", "2,1", "--lpv", str(tmp_path / "rev.json"))
    code, out, err = run(
        capsys, "compare", "--model", str(msd_file),
        "--lpv", str(tmp_path / "rev.json"), "--out", str(tmp_path),
        "--t-end", "2",
    )
    assert code == 0, err
    assert "compare PASS" in out
