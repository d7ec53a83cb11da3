import json

import numpy as np
import pytest

from snmf import cli
from snmf.errors import DatasetError, DimensionMismatch, GridParseError, IoError
from snmf.io import ModelFile, load_model, read_dataset, save_model, write_dataset
from snmf.supervised import LogRegModel


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--noise", 0, "--seed", 1, "--out", out) == 0
    return out


def read_report(path):
    with open(path) as fh:
        return json.load(fh)


# dataset files

def test_simulate_writes_both_halves_deterministically(sim, tmp_path):
    train, test = read_dataset(sim / "train.csv"), read_dataset(sim / "test.csv")
    assert train.X.shape[0] + test.X.shape[0] == 500
    assert train.X.shape[1] == 10 and int(train.y.sum()) == 125
    assert run("simulate", "--noise", 0, "--seed", 1, "--out", tmp_path) == 0
    for name in ("train.csv", "test.csv"):
        assert (sim / name).read_bytes() == (tmp_path / name).read_bytes()
    rep = read_report(sim / "simulate_report.json")
    assert rep["config"]["noise"] == 0 and rep["rows"] == {"train": 250, "test": 250}


def test_dataset_round_trip_is_exact(tmp_path):
    g = np.random.default_rng(0)
    X, y = g.uniform(size=(6, 3)) / 7, np.array([0, 1, 1, 0, 1, 0])
    write_dataset(tmp_path / "d.csv", X, y)
    d = read_dataset(tmp_path / "d.csv")
    np.testing.assert_array_equal(d.X, X)
    np.testing.assert_array_equal(d.y, y)
    write_dataset(tmp_path / "u.csv", X)
    assert read_dataset(tmp_path / "u.csv").y is None


@pytest.mark.parametrize("body, fragment", [
    ("f0,f1,label\n1,-2,0\n", "row 1, column f1"),
    ("f0,f1,label\n1,2,0\n1,nan,1\n", "row 2, column f1"),
    ("f0,f1,label\n1,abc,0\n", "not a number"),
    ("f0,f1,label\n1,2,3\n", "not 0 or 1"),
    ("f0,f1\n1,2,3\n", "3 fields"),
    ("f0,f1\n", "no data rows"),
])
def test_dataset_validation(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DatasetError, match=fragment):
        read_dataset(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError):
        read_dataset(tmp_path / "absent.csv")


def test_model_round_trip(tmp_path):
    g = np.random.default_rng(1)
    m = ModelFile("snmf", g.uniform(size=(4, 2)), g.uniform(size=(2, 3)) / 3,
                  LogRegModel(g.normal(size=2), 0.1), None, {"raw": {"alpha": 0.1}}, {"k": 1})
    save_model(tmp_path / "m.json", m)
    back = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(back.V, m.V)
    np.testing.assert_array_equal(back.U, m.U)
    np.testing.assert_array_equal(back.classifier.w, m.classifier.w)
    assert back.joint is None and back.hyper == m.hyper
    (tmp_path / "x.json").write_text('{"schema": "other"}')
    with pytest.raises(IoError):
        load_model(tmp_path / "x.json")


# fit / transform / evaluate

def test_zero_coupling_snmf_matches_nmf(sim, tmp_path):
    for mode in ("snmf", "nmf"):
        assert run("fit", "--mode", mode, "--rank", 2, "--train", sim / "train.csv",
                   "--model-out", tmp_path / f"{mode}.json", "--max-iter", 200) == 0
    a, b = load_model(tmp_path / "snmf.json"), load_model(tmp_path / "nmf.json")
    assert np.max(np.abs(a.V - b.V)) <= 1e-12
    assert np.max(np.abs(a.U - b.U)) <= 1e-12


@pytest.fixture(scope="module")
def fitted(sim, tmp_path_factory):
    d = tmp_path_factory.mktemp("fit")
    assert run("fit", "--mode", "snmf", "--rank", 2, "--alpha", 0.1, "--beta", 0.01,
               "--train", sim / "train.csv", "--model-out", d / "model.json") == 0
    return d / "model.json"


@pytest.fixture(scope="module")
def sim_default(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim_default")
    assert run("simulate", "--noise", 0, "--out", out) == 0
    assert run("fit", "--mode", "snmf", "--rank", 2, "--alpha", 0.1, "--beta", 0.01,
               "--train", out / "train.csv", "--model-out", out / "model.json") == 0
    return out


def test_fit_report(fitted):
    rep = read_report(fitted.with_suffix(".report.json"))
    totals = [t["total"] for t in rep["trace"]]
    assert rep["trace_non_increasing"] and all(b <= a for a, b in zip(totals, totals[1:]))
    assert rep["schema"] == "snmf-report/1" and rep["command"] == "fit"
    assert rep["hyper"]["effective"]["alpha"] == pytest.approx(0.1 / 10)


def test_evaluate_reproduces_train_auc(sim, fitted, tmp_path):
    train_auc = read_report(fitted.with_suffix(".report.json"))["metrics"]["train_auc"]
    assert run("evaluate", "--model", fitted, "--test", sim / "train.csv",
               "--report", tmp_path / "tr.json") == 0
    assert abs(read_report(tmp_path / "tr.json")["metrics"]["auc"] - train_auc) <= 1e-9


def test_noise_free_test_auc(sim_default, tmp_path):
    assert run("evaluate", "--model", sim_default / "model.json", "--test", sim_default / "test.csv",
               "--scores", "--report", tmp_path / "te.json") == 0
    rep = read_report(tmp_path / "te.json")
    assert rep["metrics"]["auc"] >= 0.9 and len(rep["scores"]) == 250


def test_transform_writes_coefficients(sim, fitted, tmp_path):
    assert run("transform", "--model", fitted, "--data", sim / "test.csv", "--out", tmp_path / "u.csv") == 0
    U = read_dataset(tmp_path / "u.csv").X
    assert U.shape == (250, 2) and np.all(U >= 0)


def test_feature_mismatch(fitted, tmp_path, capsys):
    write_dataset(tmp_path / "narrow.csv", np.ones((4, 3)), np.array([0, 1, 0, 1]))
    with pytest.raises(DimensionMismatch):
        load_model(fitted).check_features(read_dataset(tmp_path / "narrow.csv").X)
    assert run("evaluate", "--model", fitted, "--test", tmp_path / "narrow.csv") == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith("error: DimensionMismatch: ") and "3 features" in err[-1]


def test_error_lines(sim, tmp_path, capsys):
    assert run("simulate", "--noise", -1, "--out", tmp_path) == 1
    assert capsys.readouterr().err.strip().startswith("error: InvalidConfig: ")
    write_dataset(tmp_path / "nolabel.csv", np.ones((4, 3)))
    assert run("fit", "--train", tmp_path / "nolabel.csv", "--model-out", tmp_path / "m.json") == 1
    line = capsys.readouterr().err.strip()
    assert line.startswith("error: DatasetError: ") and "nolabel.csv" in line
    assert run("cv", "--train", sim / "train.csv", "--grid", "alpha=1..0:log10") == 1
    assert capsys.readouterr().err.strip().startswith("error: GridParseError: ")


# grid strings and cv

def test_parse_grid_forms():
    g = cli.parse_grid("{0,0.001,0.01,0.1}")
    assert g.size == 64 and g.ranks == (2,)
    g = cli.parse_grid("alpha=1e-2..1e2:log10;beta=0,0.1;rank=50..150:50")
    assert g.alphas == (0.01, 0.1, 1.0, 10.0, 100.0)
    assert g.betas == (0.0, 0.1) and g.gammas == (0.0,) and g.ranks == (50, 100, 150)


@pytest.mark.parametrize("spec", ["", "delta=1", "alpha=1;alpha=2", "alpha=x", "alpha=-1",
                                  "rank=1.5", "alpha=0..1:log10", "alpha=1..2:0"])
def test_parse_grid_errors(spec):
    with pytest.raises(GridParseError):
        cli.parse_grid(spec)


def test_cv_single_cell_and_jobs(sim, tmp_path):
    common = ["cv", "--train", sim / "train.csv", "--folds", 3, "--max-iter", 100, "--tol", 1e-5]
    assert run(*common, "--grid", "alpha=0.1;beta=0.01;gamma=0", "--report", tmp_path / "one.json") == 0
    best = read_report(tmp_path / "one.json")["best"]
    assert (best["alpha"], best["beta"], best["gamma"], best["rank"]) == (0.1, 0.01, 0.0, 2)

    grid = "alpha=0,0.1;beta=0.01;gamma=0,0.1"
    assert run(*common, "--grid", grid, "--jobs", 1, "--report", tmp_path / "a.json") == 0
    assert run(*common, "--grid", grid, "--jobs", 8, "--report", tmp_path / "b.json") == 0
    a, b = read_report(tmp_path / "a.json"), read_report(tmp_path / "b.json")
    assert a["table"] == b["table"] and a["n_cells"] == 4
