import gzip

import numpy as np
import pytest

from fppshape import dataset as ds
from fppshape.dataset import HEADER, ShapeDataset, Variant
from fppshape.distributions import DistributionSpec, moments
from fppshape.errors import DataFormatError, DiagnosticError, UsageError
from fppshape.geometry import hausdorff_polyline

BUDGET = 4000


@pytest.fixture(scope="module")
def small_raw():
    return ds.build_dataset(12, "train", BUDGET, "raw", seed=5)


def test_header_layout():
    assert HEADER[:7] == ["family", "params", "seed", "budget", "variant", "mu", "sigma"]
    assert HEADER[7] == "q01" and HEADER[105] == "q99" and HEADER[-2:] == ["x", "y"]
    assert len(HEADER) == 108


def test_unit_weights_trace_l1_arc():
    d = ds.build_dataset(1, "train", 20000, "raw", seed=0, weights=1.0)
    arc = np.column_stack((d.x, d.y))
    assert hausdorff_polyline(arc, [[0, 1], [0.5, 0.5]]) <= 1e-12
    assert np.allclose(d.x + d.y, 1.0, atol=1e-12)


def test_rows_satisfy_invariants(small_raw):
    d = small_raw
    assert np.all(d.y >= d.x) and np.all(d.x >= 0) and np.all(d.y > 0)
    for sid in np.unique(d.sim_ids()):
        f = d.features[d.sim_ids() == sid]
        assert (f == f[0]).all()
    assert d.n_simulations == 12
    assert np.all(d.budgets == BUDGET)


def test_mean_transformed_is_raw_times_mu(small_raw):
    mt = ds.build_dataset(12, "train", BUDGET, "mean_transformed", seed=5)
    assert np.allclose(mt.x, small_raw.x * small_raw.mu, rtol=1e-12)
    assert np.allclose(mt.y, small_raw.y * small_raw.mu, rtol=1e-12)
    assert np.allclose(small_raw.to_variant("mt").y, mt.y, rtol=1e-12)
    assert np.allclose(mt.to_variant("raw").x, small_raw.x, rtol=1e-12)
    assert np.allclose(mt.to_raw_coordinates(mt.y), small_raw.y, rtol=1e-12)


def test_train_means_stay_below_twenty():
    d = ds.build_dataset(100, "train", 2000, "raw", seed=1)
    fam = d.families()
    assert np.all(d.mu <= 20)
    # the normal and gamma families also respect the lower end; scaled beta
    # can go below 1 because only the upper bound is enforced on it
    assert np.all(d.mu[fam != "beta"] >= 1)


def test_jobs_do_not_change_output(tmp_path, small_raw):
    par = ds.build_dataset(12, "train", BUDGET, "raw", seed=5, jobs=2)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ds.save(small_raw, a)
    ds.save(par, b)
    assert a.read_bytes() == b.read_bytes()


def test_round_trip(tmp_path, small_raw):
    for name in ("d.csv", "d.csv.gz"):
        path = tmp_path / name
        ds.save(small_raw, path)
        back = ds.load(path)
        assert back.variant is small_raw.variant
        assert back.specs == small_raw.specs
        assert np.array_equal(back.seeds, small_raw.seeds)
        for f in ("features", "x", "y"):
            assert np.array_equal(getattr(back, f), getattr(small_raw, f))
    gz = tmp_path / "d.csv.gz"
    ds.save(small_raw, tmp_path / "e.csv.gz")
    assert gz.read_bytes() == (tmp_path / "e.csv.gz").read_bytes()
    assert gzip.decompress(gz.read_bytes()) == (tmp_path / "d.csv").read_bytes()


def fixture_text(rows):
    lines = [",".join(HEADER)]
    for x, y in rows:
        q = ",".join(repr(1 + k / 100) for k in range(1, 100))
        lines.append(f'gamma,"2,1",17,50000,raw,2.0,1.4142135623730951,{q},{x},{y}')
    return "\n".join(lines) + "\n"


def test_hand_written_file(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text(fixture_text([(0.0, 0.25), (0.125, 0.125)]))
    d = ds.load(path)
    assert len(d) == 2 and d.specs == ("gamma:2,1", "gamma:2,1")
    assert d.x.tolist() == [0.0, 0.125] and d.y.tolist() == [0.25, 0.125]
    assert d.mu.tolist() == [2.0, 2.0]
    assert d.features[0, 2] == 1.01 and d.features[0, 100] == 1.99
    assert d.seeds.tolist() == [17, 17] and d.variant is Variant.RAW


@pytest.mark.parametrize("mutate, message", [
    (lambda t: t.replace("family,", "fam,", 1), ":1: malformed header"),
    (lambda t: t.rsplit(",", 3)[0] + "\n", ":3: expected 108 fields"),
    (lambda t: t.replace("0.125,0.125", "0.3,0.125"), ":3: row violates"),
    (lambda t: t.replace("1.5,1.51", "1.5,1.49", 1), ":2: percentiles"),
    (lambda t: t.replace('"2,1"', '"2.5,1"', 1), ":2: gamma"),
    (lambda t: t.replace(",raw,", ",mean_transformed,", 1), ":3: variant"),
    (lambda t: t.splitlines()[0] + "\n", "no data rows"),
    (lambda t: "", "empty file"),
])
def test_malformed_files(tmp_path, mutate, message):
    path = tmp_path / "bad.csv"
    path.write_text(mutate(fixture_text([(0.0, 0.25), (0.125, 0.125)])))
    with pytest.raises(DataFormatError, match=message):
        ds.load(path)


def test_missing_file(tmp_path):
    with pytest.raises(UsageError):
        ds.load(tmp_path / "nope.csv")


def sim_dataset(mus, family="gamma"):
    specs = tuple(f"{family}:{i + 1},1" for i in range(len(mus)))
    feats = np.zeros((len(mus), 101))
    feats[:, 0] = mus
    return ShapeDataset(feats, np.zeros(len(mus)), np.ones(len(mus)), specs,
                        np.arange(len(mus)), np.full(len(mus), 10), "raw")


def test_median_representative():
    assert ds.median_representative(sim_dataset([5.0, 12.0, 8.0]), "gamma") == "gamma:3,1"
    assert ds.median_representative(sim_dataset([4.0]), "gamma") == "gamma:1,1"
    assert ds.median_representative(sim_dataset([4.0, 9.0, 1.0, 6.0]), "gamma") == "gamma:1,1"
    with pytest.raises(UsageError):
        ds.median_representative(sim_dataset([4.0]), "beta")


def test_sanity_ceiling():
    results = ds.run_simulations(2, "train", 2000, seed=3)
    with pytest.raises(DiagnosticError, match="sanity ceiling"):
        ds.results_to_dataset(results, "mean_transformed", ceiling=1e-6)
    ds.results_to_dataset(results, "raw", ceiling=1e-6)


def test_failing_simulation_reports_seed():
    def broken(*_):
        raise ZeroDivisionError("boom")
    seed = ds.derive_seeds(0, 1)[0]
    with pytest.raises(DiagnosticError, match=f"seed {seed}"):
        ds.build_dataset(1, "train", 100, seed=0, weights=broken)


def test_seed_derivation():
    s = ds.derive_seeds(7, 5)
    assert s == ds.derive_seeds(7, 5) and len(set(s)) == 5
    assert ds.derive_seeds(7, 3) == s[:3]
    assert all(0 <= v < 2**63 for v in s)


def test_features_match_spec(small_raw):
    for spec, f in zip(small_raw.specs[:5], small_raw.features[:5]):
        assert f[0] == pytest.approx(moments(DistributionSpec.parse(spec))[0], rel=1e-12)
