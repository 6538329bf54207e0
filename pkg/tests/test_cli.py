import csv
import io

import numpy as np
import pytest

from arnoldi_gcn.cli import run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    """Parse a CLI table: leading '#' comments, one header, fixed width rows."""
    lines = text.splitlines()
    comments = []
    while lines and lines[0].startswith("#"):
        comments.append(lines.pop(0))
    assert not any(ln.startswith("#") for ln in lines), "comments after the header"
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    header, body = rows[0], rows[1:]
    assert all(len(r) == len(header) for r in body)
    return comments, header, body


def test_sample(capsys):
    code, out, _ = call(capsys, "sample", "--scheme", "chebyshev", "--lower", "-0.9", "--upper", "0.9", "--r", "10")
    assert code == 0
    comments, header, body = table(out)
    assert header == ["omega"] and len(body) == 10
    assert comments[0].startswith("# arnoldi-gcn 0.1.0 sample seed=None")


def test_filter_eval(capsys):
    code, out, _ = call(capsys, "filter-eval", "--filter", "g0", "--grid", "11")
    assert code == 0
    comments, header, body = table(out)
    assert header == ["omega", "value"] and len(body) == 11
    assert any("alpha=0.1" in c for c in comments)
    w, v = float(body[5][0]), float(body[5][1])
    assert abs(w) < 1e-15 and abs(v - 0.9) < 1e-15


def _max_error(comments):
    return float(next(c for c in comments if "max_abs_error" in c).split("=")[1])


def test_approx_g4(capsys, tmp_path):
    curve = tmp_path / "curve.csv"
    code, out, _ = call(capsys, "approx", "--filter", "g4", "--scheme", "chebyshev", "--r", "40", "--K", "40",
                        "--method", "arnoldi", "--grid", "1000", "--emit-monomial", "--curve-out", str(curve))
    assert code == 0
    comments, header, body = table(out)
    assert header == ["index", "basis_coefficient", "monomial_coefficient"]
    assert _max_error(comments) < 1e-10
    _, cheader, cbody = table(curve.read_text())
    assert cheader == ["omega", "true_value", "approx_value", "abs_error"] and len(cbody) == 1000
    assert max(float(r[3]) for r in cbody) == _max_error(comments)


@pytest.mark.xfail(strict=True, reason="g1 with 40 Chebyshev nodes is approximation-limited at ~1.5e-7")
def test_approx_g1_reproduction(capsys):
    code, out, _ = call(capsys, "approx", "--filter", "g1", "--scheme", "chebyshev", "--r", "40", "--K", "40",
                        "--method", "arnoldi", "--grid", "1000")
    assert code == 0 and _max_error(table(out)[0]) < 1e-10


def test_approx_vandermonde(capsys):
    code, out, _ = call(capsys, "approx", "--filter", "g4", "--r", "40", "--K", "40", "--method", "vandermonde")
    assert code == 0
    comments, _, body = table(out)
    assert _max_error(comments) > 1e-2
    assert all(r[1] == "" and r[2] != "" for r in body)


def _condition_rows(capsys, *extra):
    code, out, _ = call(capsys, "condition", "--scheme", "chebyshev", "--lower", "-0.9", "--upper", "0.9", *extra)
    assert code == 0
    _, header, body = table(out)
    assert header == ["r", "kappa_vandermonde", "theorem1_bound", "kappa_arnoldi_gram"]
    return [[float(x) for x in r] for r in body]


def test_condition_rows(capsys):
    rows = _condition_rows(capsys, "--r-list", "8,12")
    for r, kv, bound, kq in rows:
        assert kv >= bound and 1.0 <= kq <= 1.1


@pytest.mark.xfail(strict=True, reason="5 Chebyshev nodes on [-0.9, 0.9] give kappa(V) = 25.0 < 27.1")
def test_condition_example_includes_r5(capsys):
    for r, kv, bound, kq in _condition_rows(capsys, "--r-list", "5,8,12"):
        assert kv >= bound and kq <= 1.1


@pytest.fixture
def dataset(tmp_path, capsys):
    prefix = tmp_path / "data" / "sbm"
    code, out, _ = call(capsys, "synth", "--blocks", "30,30", "--p-in", "0.2", "--p-out", "0.02",
                        "--feature-dim", "6", "--feature-shift", "1.0", "--seed", "3", "--out-prefix", str(prefix))
    assert code == 0
    return prefix


def _train_args(prefix, model, *extra):
    return ["train", "--edges", f"{prefix}.edges", "--features", f"{prefix}.features",
            "--labels", f"{prefix}.labels", "--filter", "g1", "--scheme", "chebyshev", "--K", "10",
            "--mode", "recurrence", "--learn-gamma", "true", "--train-frac", "0.6", "--val-frac", "0.2",
            "--lr", "0.01", "--prop-lr", "0.01", "--weight-decay", "0.0005", "--dropout", "0.5",
            "--prop-dropout", "0.1", "--epochs", "60", "--patience", "20", "--seed", "5",
            "--model-out", str(model), *extra]


def test_synth_files(dataset):
    assert dataset.with_suffix(".features").read_text().splitlines()[0] == "60 6"
    assert len(dataset.with_suffix(".labels").read_text().splitlines()) == 60


def test_train_then_evaluate(capsys, dataset, tmp_path):
    model = tmp_path / "m.txt"
    code, out, _ = call(capsys, *_train_args(dataset, model))
    assert code == 0
    comments, header, body = table(out)
    assert header == ["epoch", "train_loss", "val_accuracy"] and body
    summary = comments[-1].split(" ", 2)[2].split(",")
    assert summary[:6] == ["sbm", "g1", "chebyshev", "10", "recurrence", "5"]
    # two classes, so the reported metric is AUROC
    assert "test_auroc" in comments[-2]
    code, out, _ = call(capsys, "evaluate", "--model", str(model), "--edges", f"{dataset}.edges",
                        "--features", f"{dataset}.features", "--labels", f"{dataset}.labels",
                        "--mask", "test", "--split-seed", "5")
    assert code == 0
    _, header, body = table(out)
    assert header == ["mask", "accuracy", "auroc"]
    assert body[0][2] == summary[6]


def test_train_deterministic(capsys, dataset, tmp_path):
    outs = []
    for i in range(2):
        model = tmp_path / f"m{i}.txt"
        code, out, _ = call(capsys, *_train_args(dataset, model))
        assert code == 0
        outs.append((out.replace(str(model), "MODEL"), model.read_text()))
    assert outs[0] == outs[1]


def test_monomial_mode_train(capsys, dataset, tmp_path):
    args = _train_args(dataset, tmp_path / "m.txt")
    args[args.index("recurrence")] = "monomial"
    code, out, _ = call(capsys, *args)
    assert code == 0


def test_usage_errors(capsys):
    code, _, err = call(capsys, "sample", "--scheme", "chebyshev", "--bogus", "1")
    assert code == 2 and "--bogus" in err and "usage: arnoldi-gcn sample" in err
    code, _, err = call(capsys, "sample", "--scheme", "nope", "--lower", "0", "--upper", "1", "--r", "2")
    assert code == 2
    code, _, _ = call(capsys, "frobnicate")
    assert code == 2


def test_runtime_errors(capsys, tmp_path):
    code, _, err = call(capsys, "sample", "--scheme", "chebyshev", "--lower", "1", "--upper", "0", "--r", "2")
    assert code == 1 and "lower < upper" in err
    code, _, _ = call(capsys, "evaluate", "--model", str(tmp_path / "missing"), "--edges", "x",
                      "--features", "y", "--labels", "z")
    assert code == 1
