import json
import os
import subprocess

import numpy as np
import pytest

import trafficnmf as tn

CSV = """count_point_id,year,latitude,longitude,hour,all_motor_vehicles
2,2019,52.0,-1.0,7,5
1,2019,51.5,-0.1,7,10
1,2019,51.5,-0.1,8,20
1,2019,51.5,-0.1,8,x
"""


def test_parse_and_build_matrix():
    records, rejections = tn.parse_records(CSV)
    assert len(records) == 3
    assert rejections.rows_rejected == 1
    m = tn.build_matrix(records, tn.HourWindow(7, 8))
    assert m.shape == (2, 2)
    assert m.labels.location_ids == ["1", "2"]
    np.testing.assert_array_equal(m.values, [[10, 20], [5, 0]])
    n = tn.minmax_normalize(m)
    np.testing.assert_allclose(n.denormalize(), m.values)
    assert tn.CountMatrix.from_csv(m.to_csv()).values.tolist() == m.values.tolist()


def test_factorize_is_deterministic_and_nonnegative():
    rng = np.random.default_rng(0)
    x = rng.random((20, 12))
    a = tn.factorize(x, rank=3, seed=4)
    b = tn.factorize(x, rank=3, seed=4)
    assert a.w.shape == (20, 3) and a.h.shape == (12, 3)
    np.testing.assert_array_equal(a.w, b.w)
    assert a.w.min() >= 0 and a.h.min() >= 0
    trace = np.array(a.objective_trace)
    assert np.all(np.diff(trace) <= 1e-10)
    assert tn.reconstruction_error(x, a) == pytest.approx(a.final_loss)

    seen = []
    tn.factorize_observed(x, tn.NmfConfig(rank=2, max_iters=5), lambda it, w, h, loss: seen.append(it))
    assert seen[0] == 0 and seen[-1] <= 5


def test_errors_carry_their_kind():
    with pytest.raises(tn.Error) as info:
        tn.factorize(-np.ones((3, 3)), rank=1)
    assert info.value.kind == "NonNegativityViolation"
    with pytest.raises(tn.Error) as info:
        tn.factorize(np.ones((3, 3)), rank=9)
    assert info.value.kind == "InvalidRank"
    assert tn.exit_code_for("MissingInput") == 2


def test_dispersion_four_point_example():
    p = np.array([[0.0, 0.0], [0.0, 2.0], [4.0, 0.0], [4.0, 2.0]])
    a = tn.ClusterAssignment([0, 0, 1, 1], 2)
    assert tn.within_dispersion(p, a) == 4.0
    assert tn.between_dispersion(p, a) == 16.0
    assert tn.total_scatter(p) == 20.0
    assert tn.calinski_harabasz(p, a) == 8.0


def test_rank_scan_recovers_planted_rank():
    spec = tn.SyntheticSpec()
    spec.planted_rank = 4
    spec.noise_level = 0.02
    spec.seed = 2
    planted = tn.generate_planted(spec)
    m = tn.build_matrix(planted.records, tn.HourWindow(7, 18))
    scan = tn.rank_scan(tn.minmax_normalize(m).values, 2, 8, tn.NmfConfig(seed=1))
    assert scan.recommended_rank == 4
    assert [e.rank for e in scan.entries] == list(range(2, 9))
    assert scan.to_csv().startswith("rank,within_dispersion")


def test_patterns_self_match():
    spec = tn.SyntheticSpec()
    planted = tn.generate_planted(spec)
    m = tn.build_matrix(planted.records, tn.HourWindow(7, 18))
    n = tn.minmax_normalize(m)
    pair = tn.factorize(n.values, rank=3, seed=1)
    s = tn.extract_patterns(pair, n)
    match = tn.match_patterns(s, s)
    assert [(p.a, p.b) for p in match.pairs] == [(0, 0), (1, 1), (2, 2)]
    report = tn.compare_periods(m, m, match, s, s)
    assert report.total_reduction_pct == 0.0
    assert json.loads(report.to_json())["total_reduction_pct"] == 0.0
    assert json.loads(s.spatial_geojson())["type"] == "FeatureCollection"


def test_pipeline_drop_two(tmp_path):
    spec = tn.SyntheticSpec()
    spec.planted_rank = 6
    spec.noise_level = 0.02
    spec.seed = 3
    tn.run_synth(spec, tn.DropScenario(), tmp_path / "syn")
    cfg = tn.PipelineConfig()
    cfg.input_a = str(tmp_path / "syn" / "records_a.csv")
    cfg.input_b = str(tmp_path / "syn" / "records_b.csv")
    cfg.rank_a = 6
    cfg.rank_b = 4
    cfg.out_dir = tmp_path / "out"
    run, log = tn.run_pipeline(cfg)
    assert len(run.report.match.unmatched_a) == 2
    assert run.report.total_reduction_pct == pytest.approx(50, abs=5)
    assert "locations" in log
    assert (tmp_path / "out" / "comparison_report.json").exists()


@pytest.mark.skipif(not os.environ.get("TRAFFICNMF_CLI"), reason="CLI path not given")
def test_cli_and_bindings_ingest_alike(tmp_path):
    cli = os.environ["TRAFFICNMF_CLI"]
    subprocess.run([cli, "synth", "--planted-rank", "3", "--seed", "5", "--out", str(tmp_path)], check=True)
    records = tmp_path / "records_a.csv"
    subprocess.run([cli, "ingest", "--input-a", str(records), "--out", str(tmp_path)], check=True)
    m, _ = tn.ingest_file(records)
    assert m.shape == (60, 12)
    assert (tmp_path / "a_matrix.csv").read_text() == m.to_csv()
