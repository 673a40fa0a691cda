import csv
import json
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from angio3d.cli import OUTPUTS, main
from angio3d.raster import read_mask, write_mask


def _files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def reconstruct_args(case, out, *extra):
    return ["reconstruct", "--view-a", str(case / "view_a"), "--view-b", str(case / "view_b"),
            "--calib-a", str(case / "calib_a.json"), "--calib-b", str(case / "calib_b.json"),
            "--device-a", str(case / "device_a"), "--device-b", str(case / "device_b"),
            "--out", str(out), *extra]


@pytest.fixture(scope="module")
def case(tmp_path_factory):
    d = tmp_path_factory.mktemp("phantom")
    assert main(["phantom", "--out", str(d), "--seed", "7"]) == 0
    return d


@pytest.fixture(scope="module")
def run(case, tmp_path_factory):
    out = tmp_path_factory.mktemp("recon")
    t0 = time.perf_counter()
    code = main(reconstruct_args(case, out))
    return code, out, time.perf_counter() - t0


def test_phantom_output_is_byte_identical(case, tmp_path):
    assert main(["phantom", "--out", str(tmp_path), "--seed", "7"]) == 0
    assert _files(tmp_path) == _files(case)
    names = sorted(p.name for p in (case / "view_b").iterdir())
    assert names[0] == "b_0000.pgm" and len(names) == 20


def test_reconstruct_writes_all_outputs(run, case):
    code, out, elapsed = run
    assert code == 0
    for name in OUTPUTS + ("manifest.json", "branch_0.obj"):
        assert (out / name).stat().st_size > 0
    assert elapsed < 10.0
    m = json.loads((out / "manifest.json").read_text())
    truth = json.loads((case / "ground_truth.json").read_text())
    assert m["status"] == "ok" and m["unpaired"] == []
    assert m["frames"] == truth["true_pair"]
    assert m["reprojection_mean_mm"] < 0.2


def test_report_csv_columns(run):
    rows = list(csv.reader((run[1] / "report.csv").open()))
    assert rows[0] == ["branch_id", "n_samples", "mean_mm", "std_mm", "max_mm"]
    ids = [r[0] for r in rows[1:]]
    assert ids[-1] == "all" and "view_a" in ids and "view_b" in ids
    assert all(float(r[2]) <= float(r[4]) for r in rows[1:])


def test_error_matrix_csv_shape(run):
    rows = list(csv.reader((run[1] / "error_matrix.csv").open()))
    assert len(rows) == 21 and len(rows[0]) == 21


def test_obj_is_well_formed(run):
    text = (run[1] / "tree.obj").read_text().splitlines()
    nv = sum(line.startswith("v ") for line in text)
    faces = [line.split()[1:] for line in text if line.startswith("f ")]
    assert nv > 0 and faces
    assert all(1 <= int(i.split("/")[0]) <= nv for f in faces for i in f)


def test_manifest_rerun_is_byte_identical(run, tmp_path):
    out = run[1]
    again = tmp_path / "again"
    assert main(["reconstruct", "--manifest", str(out / "manifest.json"), "--out", str(again)]) == 0
    assert _files(again) == _files(out)


def test_eval_of_reconstruction(run, case, tmp_path, capsys):
    m = json.loads((run[1] / "manifest.json").read_text())
    fa, fb = m["frames"]
    code = main(["eval", "--tree", str(run[1] / "tree.json"), "--view-a", str(case / "view_a"),
                 "--view-b", str(case / "view_b"), "--calib-a", str(case / "calib_a.json"),
                 "--calib-b", str(case / "calib_b.json"), "--frames", f"{fa},{fb}", "--out", str(tmp_path)])
    assert code == 0
    assert "reprojection error" in capsys.readouterr().out
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["overall"]["mean_mm"] < 0.2


def test_empty_view_directory_is_fatal(case, tmp_path, capsys):
    empty = tmp_path / "nothing_here"
    empty.mkdir()
    args = reconstruct_args(case, tmp_path / "out")
    args[args.index("--view-a") + 1] = str(empty)
    assert main(args) == 1
    assert str(empty) in capsys.readouterr().err


def test_missing_calibration_is_fatal(case, tmp_path, capsys):
    args = reconstruct_args(case, tmp_path / "out")
    bad = tmp_path / "nope.json"
    args[args.index("--calib-b") + 1] = str(bad)
    assert main(args) == 1
    assert str(bad) in capsys.readouterr().err


def test_detector_size_mismatch_names_both_sizes(case, tmp_path, capsys):
    small = tmp_path / "small"
    small.mkdir()
    for p in sorted((case / "view_a").iterdir()):
        write_mask(read_mask(p)[:256, :256], small / p.name)
    args = reconstruct_args(case, tmp_path / "out")
    args[args.index("--view-a") + 1] = str(small)
    assert main(args) == 1
    err = capsys.readouterr().err
    assert "256x256" in err and "512x512" in err and str(small) in err


def test_truncated_branch_gives_partial_result(tmp_path):
    case = tmp_path / "case"
    assert main(["phantom", "--out", str(case), "--seed", "0", "--n-frames", "4", "--truncate-b", "2"]) == 0
    out = tmp_path / "out"
    assert main(reconstruct_args(case, out)) == 2
    m = json.loads((out / "manifest.json").read_text())
    assert m["status"] == "partial"
    assert any(u.startswith("UnpairedChain") for u in m["unpaired"])


def test_single_frame_videos(tmp_path):
    case = tmp_path / "case"
    assert main(["phantom", "--out", str(case), "--seed", "3", "--n-frames", "1"]) == 0
    out = tmp_path / "out"
    assert main(reconstruct_args(case, out)) == 0
    assert json.loads((out / "manifest.json").read_text())["frames"] == [0, 0]


def test_manual_frames_without_devices(case, tmp_path):
    out = tmp_path / "out"
    args = ["reconstruct", "--view-a", str(case / "view_a"), "--view-b", str(case / "view_b"),
            "--calib-a", str(case / "calib_a.json"), "--calib-b", str(case / "calib_b.json"),
            "--frames", "9,3", "--out", str(out)]
    assert main(args) == 0
    assert json.loads((out / "manifest.json").read_text())["frames"] == [9, 3]
    rows = list(csv.reader((out / "error_matrix.csv").open()))
    assert np.isinf(float(rows[1][1]))


def test_bad_frames_flag_is_rejected(case, tmp_path):
    with pytest.raises(SystemExit):
        main(reconstruct_args(case, tmp_path / "o", "--frames", "banana"))


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "angio3d", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "angio3d" in r.stdout
    exe = shutil.which("angio3d")
    if exe:
        r = subprocess.run([exe, "phantom", "--out", str(tmp_path), "--n-frames", "1"],
                           capture_output=True, text=True)
        assert r.returncode == 0


def test_eval_size_mismatch_names_both_sizes(run, case, tmp_path, capsys):
    small = tmp_path / "a_0000.pgm"
    write_mask(read_mask(case / "view_a" / "a_0000.pgm")[:300, :400], small)
    code = main(["eval", "--tree", str(run[1] / "tree.json"), "--view-a", str(small),
                 "--view-b", str(case / "view_b"), "--calib-a", str(case / "calib_a.json"),
                 "--calib-b", str(case / "calib_b.json")])
    assert code == 1
    err = capsys.readouterr().err
    assert "400x300" in err and "512x512" in err


def test_phantom_unwritable_directory(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["phantom", "--out", str(blocker / "sub"), "--n-frames", "1"]) == 1
    assert str(blocker / "sub") in capsys.readouterr().err
