from __future__ import annotations

import numpy as np
import pytest

from flame.core import FlameConfig, InvalidArgument, LabeledDataset
from flame.experiment import (
    DataSource,
    ExperimentConfig,
    ExperimentReport,
    Mode,
    SimulationDesign,
    aggregate_sweep,
    cross_validate,
    read_report,
    run_experiment,
    write_report,
)
from flame.simgen import covariance_structure_spec, sample_two_class


def sim_config(**kw):
    base = dict(mode="simulate", simulation=SimulationDesign("increasing_dimension"),
                theta_grid=(0.0, 1.0), dims=(5,), ms=(2.0,), replicates=2, test_size=50, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_single_record_report():
    report = run_experiment(sim_config(theta_grid=(0.5,), replicates=1))
    assert report.kind == "sweep" and len(report.records) == 1
    rec = report.records[0]
    assert rec["error"] is None and 0.0 <= rec["mwe"] <= 1.0
    assert report.aggregates[0]["n_ok"] == 1


def test_sweep_cells_have_R_records_and_recomputable_aggregates():
    report = run_experiment(sim_config(ms=(1.0, 3.0), replicates=3))
    cells = {}
    for r in report.records:
        cells.setdefault((r["theta"], r["d"], r["m"]), []).append(r)
    assert len(cells) == 4 and all(len(v) == 3 for v in cells.values())
    assert aggregate_sweep(report.records) == report.aggregates


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_report_roundtrip(tmp_path, fmt):
    report = run_experiment(sim_config())
    path = tmp_path / f"r.{fmt}"
    write_report(report, path, fmt)
    back = read_report(path)
    assert back.kind == report.kind and back.version == report.version
    assert back.aggregates == pytest.approx(report.aggregates) if fmt == "json" else True
    for a, b in zip(back.records, report.records):
        for key, value in b.items():
            if isinstance(value, float):
                assert a[key] == pytest.approx(value, rel=1e-15)
            elif isinstance(value, list):
                assert np.allclose(a[key], value, rtol=1e-15)
            else:
                assert a[key] == value


def test_seed_determinism(tmp_path):
    path = tmp_path / "r.json"
    run_experiment(sim_config(output=str(path)))
    first = path.read_bytes()
    run_experiment(sim_config(output=str(path)))
    assert path.read_bytes() == first


def test_cv_counting_contract():
    spec = covariance_structure_spec("interchangeable", 3, seed=0, d=50, n_total=120)
    data = sample_two_class(spec)
    report = cross_validate(data, FlameConfig(), folds=5, splits=5, seed=1, theta_grid=(0.0, 1.0))
    for theta in (0.0, 1.0):
        assert sum(1 for r in report.records if r["theta"] == theta) == 25
    assert [a["n_ok"] for a in report.aggregates] == [25, 25]


def test_cv_leave_one_out_separable():
    data = LabeledDataset([[1.0, 0.0], [2.0, 1.0], [-1.0, 0.0], [-2.0, 1.0]], [1, 1, -1, -1])
    report = cross_validate(data, FlameConfig(theta=1.0), folds=4, splits=1, seed=0)
    assert len(report.records) == 4
    assert all(r["mwe"] is None and r["error"] is None for r in report.records)
    assert report.aggregates[0]["mean"] == 0.0
    assert report.aggregates[0]["n_ok"] == 4


def test_cv_report_roundtrip_csv(tmp_path, small_data):
    report = cross_validate(small_data, FlameConfig(), folds=3, theta_grid=(0.0, 1.0))
    write_report(report, tmp_path / "cv.csv", "csv")
    back = read_report(tmp_path / "cv.csv")
    assert back.records == report.records
    assert back.aggregates == pytest.approx(report.aggregates)


def test_cv_mode_from_csv(tmp_path, small_data):
    from flame.dataio import write_csv
    path = tmp_path / "d.csv"
    write_csv(small_data, path)
    cfg = ExperimentConfig(mode=Mode.CROSS_VALIDATE, data=DataSource(str(path)),
                           theta_grid=(0.0, 0.5), folds=3)
    report = run_experiment(cfg)
    assert report.kind == "cv" and len(report.records) == 6


def test_config_roundtrip_and_validation():
    cfg = sim_config(flame=FlameConfig(C=2.0, theta=0.1))
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(InvalidArgument):
        sim_config(replicates=0)
    with pytest.raises(InvalidArgument):
        sim_config(data=DataSource("x.csv"))
    with pytest.raises(InvalidArgument):
        ExperimentConfig(mode="cv", simulation=SimulationDesign(), folds=1)
    with pytest.raises(InvalidArgument):
        SimulationDesign("nope")
    with pytest.raises(InvalidArgument):
        ExperimentConfig.from_dict({"mode": "simulate", "bogus": 1})
    with pytest.raises(InvalidArgument):
        ExperimentReport.from_dict({"format_version": 42, "kind": "sweep", "records": [], "aggregates": []})
