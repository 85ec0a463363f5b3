import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tsvqr.cli import main
from tsvqr.model import load_model, predict_bounds
from tsvqr.synthetic import read_csv


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture
def a1(tmp_path):
    assert main(["gen", "--family", "A1", "--seed", "7", "--outdir", str(tmp_path)]) == 0
    return tmp_path / "A1_train.csv", tmp_path / "A1_test.csv"


@pytest.fixture
def small(tmp_path):
    assert main(["gen", "--family", "B1", "--n-train", "60", "--n-test", "20",
                 "--outdir", str(tmp_path), "--name", "s"]) == 0
    return tmp_path / "s_train.csv", tmp_path / "s_test.csv"


def train_model(path_train, out, *extra):
    return main(["train", "--train", str(path_train), "--out", str(out), *extra])


class TestGen:

    def test_default_counts(self, a1, tmp_path):
        tr, te = a1
        assert len(rows(tr)) == 402 and len(rows(te)) == 401
        assert rows(tr)[0] == ["x", "target"]
        manifest = json.loads((tmp_path / "A1.manifest.json").read_text())
        assert manifest["command"] == "gen" and manifest["seed"] == 7
        assert set(manifest["outputs"]) == {str(tr), str(te)}

    def test_override_counts(self, small):
        tr, te = small
        assert len(rows(tr)) == 61 and len(rows(te)) == 21

    def test_rerun_byte_identical(self, tmp_path):
        for d in ("r1", "r2"):
            assert main(["gen", "--family", "B3", "--seed", "3", "--outdir", str(tmp_path / d)]) == 0
        for f in ("B3_train.csv", "B3_test.csv"):
            assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()

    def test_unknown_family_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as e:
            main(["gen", "--family", "Q9", "--outdir", str(tmp_path)])
        assert e.value.code == 2


class TestTrain:

    def test_table_setting_on_a1(self, a1, tmp_path, capsys):
        out = tmp_path / "m.json"
        assert train_model(a1[0], out, "--c1", "2^3", "--c2", "2^3", "--p", "2^0",
                           "--tau", "0.5") == 0
        doc = json.loads(out.read_text())
        assert doc["schema_version"] == 1 and len(doc["alpha_lower"]) == 401
        summary = json.loads(capsys.readouterr().out)
        assert {"epochs_run", "final_pg_norm"} <= set(summary["lower_dual"])
        assert (tmp_path / "m.manifest.json").exists()

    @pytest.mark.parametrize("tau", ["1.5", "0", "abc"])
    def test_bad_tau_is_usage_error(self, small, tmp_path, tau):
        with pytest.raises(SystemExit) as e:
            train_model(small[0], tmp_path / "m.json", "--tau", tau)
        assert e.value.code == 2

    def test_linear_cache_written(self, small, tmp_path):
        out = tmp_path / "lin.json"
        assert train_model(small[0], out, "--kernel", "linear") == 0
        cache = json.loads(out.read_text())["linear_cache"]
        assert len(cache["w1"]) == 1 and isinstance(cache["b2"], float)

    def test_malformed_csv_is_runtime_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("x,target\n1,2\n3\n")
        assert train_model(bad, tmp_path / "m.json") == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"] == "ValueError" and ":3:" in err["message"]

    def test_missing_file_is_runtime_error(self, tmp_path):
        assert train_model(tmp_path / "nope.csv", tmp_path / "m.json") == 1


class TestPredict:

    def test_training_rows_and_mean_identity(self, small, tmp_path):
        model, out = tmp_path / "m.json", tmp_path / "p.csv"
        assert train_model(small[0], model) == 0
        assert main(["predict", "--model", str(model), "--input", str(small[0]),
                     "--out", str(out)]) == 0
        r = rows(out)
        assert r[0] == ["f_lower", "f_upper", "f"] and len(r) == 61
        for fl, fu, f in r[1:]:
            assert float(f) == 0.5 * (float(fl) + float(fu))

    def test_file_matches_in_memory_and_reruns(self, small, tmp_path):
        model = tmp_path / "m.json"
        assert train_model(small[0], model, "--kernel", "wavelet", "--p", "2") == 0
        outs = []
        for name in ("p1.csv", "p2.csv"):
            out = tmp_path / name
            assert main(["predict", "--model", str(model), "--input", str(small[1]),
                         "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        m = load_model(model)
        fl, fu, f = predict_bounds(m, read_csv(small[1]).inputs)
        got = np.array([[float(v) for v in row] for row in rows(tmp_path / "p1.csv")[1:]])
        assert np.array_equal(got[:, 2], f) and np.array_equal(got[:, 0], fl)

    def test_dimension_mismatch(self, small, tmp_path):
        model = tmp_path / "m.json"
        assert train_model(small[0], model) == 0
        q = tmp_path / "q.csv"
        q.write_text("a,b,c\n1,2,3\n")
        assert main(["predict", "--model", str(model), "--input", str(q),
                     "--out", str(tmp_path / "p.csv")]) == 1


class TestGridsearch:

    def test_singleton(self, small, tmp_path):
        res, best = tmp_path / "g.csv", tmp_path / "best.json"
        assert main(["gridsearch", "--train", str(small[0]), "--c-values", "1",
                     "--p-values", "2", "--eps-values", "0.05", "--results", str(res),
                     "--best-model", str(best)]) == 0
        assert len(rows(res)) == 2
        assert load_model(best).hyper.c1 == 1.0

    def test_untied_c_squares_the_sweep(self, small, tmp_path):
        common = ["gridsearch", "--train", str(small[0]), "--c-values", "0.5,2",
                  "--p-values", "1", "--eps-values", "0.05"]
        assert main(common + ["--results", str(tmp_path / "t.csv"),
                              "--best-model", str(tmp_path / "t.json")]) == 0
        assert main(common + ["--tie-c", "false", "--results", str(tmp_path / "u.csv"),
                              "--best-model", str(tmp_path / "u.json")]) == 0
        assert len(rows(tmp_path / "t.csv")) - 1 == 2
        assert len(rows(tmp_path / "u.csv")) - 1 == 4

    def test_threads_give_same_ranking(self, small, tmp_path):
        out = []
        for threads in ("1", "3"):
            res = tmp_path / f"g{threads}.csv"
            assert main(["gridsearch", "--train", str(small[0]), "--c-values", "0.5,2,8",
                         "--p-values", "1,4", "--eps-values", "0.05", "--threads", threads,
                         "--results", str(res), "--best-model", str(tmp_path / "b.json")]) == 0
            out.append([r[:10] for r in rows(res)])
        assert out[0] == out[1]


class TestEval:

    def test_median_report(self, small, tmp_path):
        model, report = tmp_path / "m.json", tmp_path / "r.json"
        assert train_model(small[0], model, "--tau", "0.5") == 0
        assert main(["eval", "--model", str(model), "--test", str(small[1]),
                     "--json", str(report)]) == 0
        doc = json.loads(report.read_text())
        m = doc["metrics"]
        assert abs(m["risk"] - m["mae"] / 2) <= 1e-12
        assert m["gacv"] is not None
        assert set(doc["support_vectors"]) >= {"on_lower", "i_sv"}

    def test_perfect_fit_metrics(self, tmp_path):
        # targets equal to the model's own predictions give a perfect fit
        assert main(["gen", "--family", "A1", "--n-train", "30", "--n-test", "10",
                     "--outdir", str(tmp_path)]) == 0
        model = tmp_path / "m.json"
        assert train_model(tmp_path / "A1_train.csv", model) == 0
        m = load_model(model)
        test = read_csv(tmp_path / "A1_test.csv")
        f = predict_bounds(m, test.inputs)[2]
        perfect = tmp_path / "perfect.csv"
        with open(perfect, "w") as fh:
            fh.write("x,target\n")
            for x, y in zip(test.inputs[:, 0], f):
                fh.write(f"{float(x)!r},{float(y)!r}\n")
        report = tmp_path / "r.json"
        assert main(["eval", "--model", str(model), "--test", str(perfect),
                     "--json", str(report)]) == 0
        metrics = json.loads(report.read_text())["metrics"]
        assert metrics["risk"] == metrics["rmse"] == metrics["mae"] == metrics["mape"] == 0.0


class TestPlotdata:

    def test_five_models(self, a1, tmp_path):
        models = []
        for tau in ("0.1", "0.25", "0.5", "0.75", "0.9"):
            out = tmp_path / f"m{tau}.json"
            assert train_model(a1[0], out, "--tau", tau, "--c1", "8", "--c2", "8") == 0
            models.append(str(out))
        out = tmp_path / "plot.csv"
        assert main(["plotdata", "--models", *models, "--grid-size", "50", "--out", str(out)]) == 0
        r = rows(out)
        assert r[0] == ["x", "tau", "f_lower", "f_upper", "f"]
        assert len(r) - 1 == 5 * 50
        assert sorted({float(row[1]) for row in r[1:]}) == [0.1, 0.25, 0.5, 0.75, 0.9]

    def test_oracle_overlay(self, tmp_path):
        assert main(["gen", "--family", "Sinc", "--n-train", "80", "--outdir", str(tmp_path)]) == 0
        model = tmp_path / "s.json"
        assert train_model(tmp_path / "Sinc_train.csv", model, "--tau", "0.5") == 0
        out = tmp_path / "plot.csv"
        assert main(["plotdata", "--models", str(model), "--grid-size", "5", "--x-min", "-0.5",
                     "--x-max", "0.5", "--oracle", "--out", str(out)]) == 0
        r = rows(out)
        assert len(r) - 1 == 5
        at_quarter = [row for row in r[1:] if float(row[0]) == 0.25][0]
        assert float(at_quarter[5]) == pytest.approx(2 / np.pi, abs=1e-15)


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tsvqr.cli", "gen", "--family", "A2",
                          "--n-train", "5", "--n-test", "3", "--outdir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "tsvqr.cli", "train", "--train",
                          str(tmp_path / "A2_train.csv"), "--out", str(tmp_path / "m.json"),
                          "--tau", "2"], capture_output=True, text=True)
    assert res.returncode == 2
