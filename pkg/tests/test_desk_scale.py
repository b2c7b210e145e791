"""Desk-scale checks beyond the acceptance list."""
from dataclasses import replace

import numpy as np
import pytest

from fppshape import dataset as ds
from fppshape import evaluation as ev
from fppshape import linreg
from fppshape.cli import main
from fppshape.distributions import DistributionSpec
from fppshape.geometry import convex_hull, fold_to_octant, mean_vertical_deviation
from fppshape.neuralnet import TrainConfig
from fppshape.predictor import predict_octant
from fppshape.simulator import hull_input, run_fpp

pytestmark = pytest.mark.slow

DESK_CONFIG = TrainConfig(layers=6, hidden_units=40, epochs=2, seed=0)


@pytest.mark.filterwarnings("ignore:design matrix is rank deficient")
def test_interaction_formula_fits_training_data_better(desk):
    train = desk["train"]
    scores = {}
    for formula in linreg.Formula:
        model = linreg.fit(train.inputs(), train.y, formula)
        scores[formula] = ev.metrics(model.predict(train.inputs()), train.y)[1]
    F = linreg.Formula
    assert scores[F.ALL_INTERACTIONS] < scores[F.ALL_PLUS_X2] < scores[F.SIMPLE]


def test_finalize_improves_on_grid_training(desk):
    train = desk["train"]
    short = ev.NetworkTrainer(DESK_CONFIG)(train)
    final = ev.finalize(train, DESK_CONFIG)
    assert final.meta["history"] and len(final.meta["history"]) == ev.FINAL_EPOCHS
    mape_short = ev.metrics(short.predict(train.inputs()), train.y)[1]
    mape_final = ev.metrics(final.predict(train.inputs()), train.y)[1]
    assert mape_final <= mape_short


def test_predicted_gamma_shape_matches_fresh_simulation(desk, desk_raw):
    model = ev.finalize(desk["train"], DESK_CONFIG)
    spec = DistributionSpec.parse(ds.median_representative(desk_raw["train"], "gamma"))
    predicted = predict_octant(model, spec).vertices
    cloud = run_fpp(spec, ds.DESK_BUDGET, seed=12345)
    simulated = fold_to_octant(convex_hull(hull_input(cloud))).vertices
    assert mean_vertical_deviation(predicted, simulated) <= 0.08


def test_cli_grid_on_desk_data(desk, tmp_path, capsys):
    ds.save(desk["train"], tmp_path / "train.csv.gz")
    ds.save(desk["test"], tmp_path / "test.csv.gz")
    code = main(["grid", "--train", str(tmp_path / "train.csv.gz"),
                 "--test", str(tmp_path / "test.csv.gz"), "--out", str(tmp_path / "r.csv"),
                 "--jobs", "1", "-q"])
    capsys.readouterr()
    assert code == 0
    reports = ev.read_report(tmp_path / "r.csv")
    assert len(reports) == len(ev.GRID_LAYERS) * len(ev.GRID_UNITS)
    cv = [r.mape_cv for r in reports]
    assert cv == sorted(cv)
    assert all(r.data_source == "mean_transformed" for r in reports)
