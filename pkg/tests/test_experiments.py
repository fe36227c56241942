import json

import numpy as np
import pytest

from ghosttomo.errors import CapacityError, ConfigurationError
from ghosttomo.experiments import (ExperimentSpec, Row, axial_slice, ring_metric, run_chain,
                                   run_dose_fractionation, run_experiment, run_mask_comparison,
                                   run_ring_artifact_study, write_outputs)
from ghosttomo.metrics import MetricReport
from ghosttomo.volume import SpherePhantomSpec

SMALL = {"n": 16, "sphere_diameter": 3}
TINY = SpherePhantomSpec(n=11, sphere_diameter=2)


def test_spec_digest_stable_and_sensitive():
    a = ExperimentSpec("d", "dose", budget=600, splits=[[6, 100], [3, 200]])
    b = ExperimentSpec("d", "dose", budget=600, splits=[(6, 100), (3, 200)], output_dir="x")
    assert a.digest() == b.digest() and len(a.digest()) == 12
    c = ExperimentSpec("d", "dose", budget=600, splits=[(6, 100), (3, 200)], seeds=[1])
    assert c.digest() != a.digest()


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        ExperimentSpec("x", "astrology")
    with pytest.raises(ConfigurationError):
        ExperimentSpec("x", "dose", budget=600, splits=[(10, 100)])
    with pytest.raises(ConfigurationError):
        ExperimentSpec("x", "dose", budget=600, splits=[(2, 100)])
    with pytest.raises(ConfigurationError):
        ExperimentSpec("x", "ring", policy="both")
    # 90 x 333 sits just under J = 30000 and is accepted
    ExperimentSpec("x", "dose", budget=30000, splits=[(90, 333)])


def test_spec_from_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"name": "r", "study": "ring", "angles": 4}))
    assert ExperimentSpec.from_json(path).angles == 4


def test_ring_metric():
    n = 31
    yy, xx = np.mgrid[0:n, 0:n] - 15.0
    radial = np.hypot(yy, xx) / 15
    assert ring_metric(radial) > 0.1
    # odd in x: every ring averages to zero
    assert ring_metric(xx / 15) < 1e-20
    assert ring_metric(np.zeros((n, n))) == 0.0


def test_axial_slice():
    data = np.arange(27).reshape(3, 3, 3)
    assert np.array_equal(axial_slice(data), data[:, 1, :])


def test_dose_fractionation_small():
    rows = run_dose_fractionation(600, [(6, 100), (3, 200)], seed=0,
                                  chain={"iterations": 2}, phantom=SpherePhantomSpec(**SMALL),
                                  slice_index=4)
    assert [(r.label["M"], r.label["N"]) for r in rows] == [(6, 100), (3, 200)]
    assert all(r.report.mad > 0 and r.report.rmse_buckets > 0 for r in rows)
    with pytest.raises(ConfigurationError):
        run_dose_fractionation(100, [(6, 100)], phantom=SpherePhantomSpec(**SMALL))


def test_ring_study_small():
    out = run_ring_artifact_study("frt", m=6, per_angle=60, p=11, phantom=TINY)
    assert set(out) == {"same", "different", "truth"}
    for policy in ("same", "different"):
        res, metric = out[policy]
        assert res.data.shape == (11, 11, 11) and metric >= 0
    with pytest.raises(CapacityError):
        run_ring_artifact_study("frt", m=2, per_angle=200, p=11, phantom=TINY)


def test_mask_comparison_small():
    rows = run_mask_comparison(p=11, counts=(121, 60), phantom=TINY)
    assert len(rows) == 6
    by = {(r.label["kind"], r.label["count"]): r for r in rows}
    assert by[("mura", 121)].extra["offpeak_range"] <= 1
    assert by[("random", 121)].extra["offpeak_range"] > 1
    assert by[("frt", 121)].report.mad < by[("random", 121)].report.mad


def test_run_chain_unknown():
    with pytest.raises(ConfigurationError):
        run_chain(None, {"method": "magic"})


def test_run_experiment_writes_outputs(tmp_path):
    spec = ExperimentSpec("dose-small", "dose", phantom=SMALL, budget=600,
                          splits=[(6, 100), (3, 200)], chain={"iterations": 2},
                          mask={"kind": "iid"}, slice_index=4)
    out = run_experiment(spec, tmp_path)
    assert out.name == f"dose-small-{spec.digest()}"
    for name in ("spec.json", "table.csv", "metrics.json", "summary.md", "row000_slice.png"):
        assert (out / name).exists()
    table = (out / "table.csv").read_text().splitlines()
    assert table[0].startswith("M,N,seed,mad") and len(table) == 3
    assert json.loads((out / "spec.json").read_text())["budget"] == 600


def test_write_outputs_without_images(tmp_path):
    spec = ExperimentSpec("t", "masks")
    out = write_outputs(spec, [Row({"k": 1}, MetricReport(0.5))], tmp_path)
    assert "| k | mad |" in (out / "summary.md").read_text()


def test_mask_campaign_capacity_in_spec(tmp_path):
    spec = ExperimentSpec("cap", "dose", phantom=SMALL, budget=600, splits=[(2, 300)],
                          mask={"kind": "random"}, chain={"iterations": 1}, slice_index=4)
    with pytest.raises(CapacityError):
        run_experiment(spec)
