import json
import math

import numpy as np
import pytest

from ghosttomo.errors import NormalizationError, ParameterError, ShapeError
from ghosttomo.metrics import (DEFAULT_BUCKET_NORMALIZER, MetricReport, bucket_rmse,
                               expected_bucket, mad, report, write_curve_csv)


def test_mad_joint_scaling():
    truth = np.array([[0.0, 4.0], [2.0, 0.0]])
    est = truth + 1.0
    assert mad(est, truth) == pytest.approx(0.25)
    assert mad(truth, truth) == 0.0
    # a uniformly scaled estimate keeps its bias visible
    assert mad(0.5 * truth, truth) == pytest.approx(np.mean(0.5 * truth) / 4)


def test_mad_errors():
    with pytest.raises(NormalizationError):
        mad(np.ones(3), np.zeros(3))
    with pytest.raises(ShapeError):
        mad(np.ones(3), np.ones(4))


def test_bucket_rmse():
    assert bucket_rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert bucket_rmse([2, 2], [0, 0], normalizer=2) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        bucket_rmse([1], [1], normalizer=0)
    with pytest.raises(ShapeError):
        bucket_rmse([1, 2], [1])


def test_default_normalizer_value():
    assert DEFAULT_BUCKET_NORMALIZER == pytest.approx(0.5 * 3 * 4 / 3 * math.pi * 216)
    assert expected_bucket(0.5, 2714.3) == pytest.approx(1357.15)


def test_report_and_json(tmp_path):
    rep = report(np.ones(4), np.full(4, 2.0), [1.0], [1.0])
    assert rep.mad == pytest.approx(0.5)
    assert rep.rmse_buckets == 0.0
    assert rep.max_value_used_for_normalization == 2.0
    rep.to_json(tmp_path / "m.json")
    d = json.loads((tmp_path / "m.json").read_text())
    assert d["schema_version"] == 1 and d["mad"] == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        MetricReport(mad=-1)


def test_curve_csv(tmp_path):
    write_curve_csv(tmp_path / "c.csv", [3.0, 2.0], ("iteration", "rmse"))
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines == ["iteration,rmse", "1,3.0", "2,2.0"]
