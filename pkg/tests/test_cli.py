import json
import subprocess
import sys

import numpy as np
import pytest

from ghosttomo import io
from ghosttomo.cli import main


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("phantom", "--n", 16, "--diameter", 3, "--out", d / "ph.raw") == 0
    return d


def test_phantom(workdir):
    vol = io.read_raw(workdir / "ph.raw")
    assert vol.shape == (16, 16, 16) and vol.max() == 1.0


def test_project_and_buckets(workdir):
    assert run("simulate", "project", "--vol", workdir / "ph.raw", "--angles", 4,
               "--out", workdir / "p.raw") == 0
    assert io.read_raw(workdir / "p.raw").shape == (4, 16, 16)
    assert run("simulate", "buckets", "--vol", workdir / "ph.raw", "--angles", 4,
               "--per-angle", 60, "--out", workdir / "b.csv") == 0
    assert io.read_buckets(workdir / "b.csv").values.shape == (4, 60)


def test_masks_and_autocorr(workdir, capsys):
    assert run("masks", "--kind", "mura", "--p", 11, "--out", workdir / "m.pgm") == 0
    assert run("autocorr", "--in", workdir / "m.pgm", "--report", workdir / "r.json") == 0
    rep = json.loads((workdir / "r.json").read_text())
    assert rep["offpeak_range"] <= 1
    assert "raw_peak" in capsys.readouterr().out


@pytest.mark.parametrize("method", ["xc", "ixc", "cg", "cs"])
def test_recon2d(workdir, method):
    out = workdir / f"g_{method}.raw"
    extra = ["--priors", "grad"] if method == "cs" else []
    assert run("recon2d", "--method", method, "--buckets", workdir / "b.csv", "--iters", 3,
               "--truth", workdir / "ph.raw", "--out", out, *extra) == 0
    m = json.loads(out.with_suffix(".json").read_text())
    assert m["MAD"] >= 0 and out.with_suffix(".png").exists()


@pytest.mark.parametrize("mode", ["direct", "two-step"])
def test_recon3d(workdir, mode):
    out = workdir / f"t_{mode}.raw"
    assert run("recon3d", "--mode", mode, "--buckets", workdir / "b.csv", "--iters", 2,
               "--gi-iters", 2, "--truth", workdir / "ph.raw", "--slices", 4, 5,
               "--out", out) == 0
    m = json.loads(out.with_suffix(".json").read_text())
    assert m["rmse_buckets"] > 0 and m["mad"] >= 0 and m["schema_version"] == 1
    assert (workdir / f"t_{mode}_r3_5.png").exists()
    assert io.read_raw(out).shape == (16, 16, 16)


def test_experiment(workdir, capsys):
    spec = {"name": "tiny", "study": "dose", "phantom": {"n": 16, "sphere_diameter": 3},
            "budget": 600, "splits": [[6, 100]], "chain": {"iterations": 1},
            "mask": {"kind": "iid"}, "slice_index": 4}
    (workdir / "spec.json").write_text(json.dumps(spec))
    assert run("experiment", "--spec", workdir / "spec.json", "--out", workdir / "exp") == 0
    assert "tiny-" in capsys.readouterr().out


def test_error_exit_code(workdir, capsys):
    assert run("masks", "--kind", "frt", "--p", 12, "--out", workdir / "bad.pgm") == 2
    assert "prime" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ghosttomo", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "recon3d" in proc.stdout
