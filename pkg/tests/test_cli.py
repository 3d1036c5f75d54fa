import json
import subprocess
import sys

import numpy as np
import pytest

from powercal import io
from powercal.cli import main
from powercal.fisher import fisher_w_hat
from powercal.models import Dataset, GammaPrior, NormalKnownVar, NormalPrior, Poisson
from powercal.posterior import power_posterior_conjugate


def _data_file(tmp_path, values, name="x.csv", header=True):
    p = tmp_path / name
    p.write_text(("x\n" if header else "") + "".join(f"{v}\n" for v in values))
    return str(p)


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCalibrate:
    def test_well_specified_counts(self, tmp_path, capsys):
        path = _data_file(tmp_path, [1, 1, 4])  # mean 2, variance 2
        code, out, _ = _run(capsys, "calibrate", "--data", path)
        assert code == 0
        res = json.loads(out)
        assert {"w_hat", "numerator", "denominator", "method", "diagnostics", "n"} <= set(res)
        assert res["w_hat"] == pytest.approx(1.0, rel=1e-12)
        assert res["n"] == 3

    def test_overdispersed_counts(self, tmp_path, capsys):
        values = [0] * 67 + [10] * 33
        path = _data_file(tmp_path, values)
        _, out, _ = _run(capsys, "calibrate", "--data", path, "--prior", "gamma:shape=3,rate=1")
        expected = fisher_w_hat(Poisson(), GammaPrior(3, 1), Dataset(values)).w_hat
        assert json.loads(out)["w_hat"] == expected < 1

    def test_kl_method_and_output_file(self, tmp_path, capsys):
        x = np.random.default_rng(0).normal(0, 2, 30)
        path = _data_file(tmp_path, x, header=False)
        out_path = tmp_path / "w.json"
        code, out, _ = _run(capsys, "calibrate", "--model", "normal:variance=1",
                            "--prior", "normal:mean=0,precision=0.01", "--method", "kl",
                            "--data", path, "--output", str(out_path))
        assert code == 0 and out == ""
        res = json.loads(out_path.read_text())
        assert res["method"] == "kl-numeric"
        assert abs(res["diagnostics"]["residual"]) <= 1e-10

    def test_missing_moment(self, tmp_path, capsys):
        path = _data_file(tmp_path, [1, 2, 3])
        code, out, err = _run(capsys, "calibrate", "--data", path, "--prior", "gamma:shape=2,rate=1")
        assert code == 3 and out == "" and "moment" in err

    def test_all_zero_counts(self, tmp_path, capsys):
        code, _, _ = _run(capsys, "calibrate", "--data", _data_file(tmp_path, [0, 0, 0]))
        assert code == 4

    @pytest.mark.parametrize("kind", ["missing", "empty", "garbage"])
    def test_bad_data_file(self, tmp_path, capsys, kind):
        path = tmp_path / "d.csv"
        if kind == "empty":
            path.write_text("x\n\n")
        elif kind == "garbage":
            path.write_text("1\nabc\n")
        code, out, _ = _run(capsys, "calibrate", "--data", str(path))
        assert code == 2 and out == ""

    def test_unwritable_output(self, tmp_path, capsys):
        path = _data_file(tmp_path, [1, 2, 3])
        code, _, _ = _run(capsys, "calibrate", "--data", path, "--output", str(tmp_path / "no" / "w.json"))
        assert code == 2

    @pytest.mark.parametrize("spec", ["gamma:shape=3", "beta:a=1", "gamma:shape=3,rate=1,scale=2",
                                      "gamma:shape=x,rate=1"])
    def test_bad_prior_spec(self, tmp_path, capsys, spec):
        code, _, _ = _run(capsys, "calibrate", "--data", _data_file(tmp_path, [1, 2]), "--prior", spec)
        assert code == 2


class TestPosterior:
    def test_w_zero_is_prior(self, tmp_path, capsys):
        path = _data_file(tmp_path, [1, 5, 2])
        code, out, _ = _run(capsys, "posterior", "--data", path, "--w", "0")
        assert code == 0
        assert out.startswith("# w=0 method=fixed\ntheta,density\n")
        cols = _parse(out)
        prior = GammaPrior(3, 1)
        mid = cols["theta"][len(cols["theta"]) // 2]
        assert np.interp(mid, cols["theta"], cols["density"]) == pytest.approx(float(prior.pdf(mid)), rel=1e-6)

    def test_w_one_matches_conjugate(self, tmp_path, capsys):
        x = [0.3, -1.2, 2.0, 0.7]
        path = _data_file(tmp_path, x)
        _, out, _ = _run(capsys, "posterior", "--model", "normal:variance=1",
                         "--prior", "normal:mean=0,precision=0.01", "--data", path, "--w", "1")
        cols = _parse(out)
        post = power_posterior_conjugate(NormalKnownVar(1), NormalPrior(0, 0.01), Dataset(x), 1.0)
        assert np.trapezoid(cols["density"], cols["theta"]) == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(cols["density"], post.pdf(cols["theta"]), rtol=1e-6, atol=1e-12)

    def test_calibrated_equals_two_step(self, tmp_path, capsys):
        path = _data_file(tmp_path, [0, 0, 7, 1, 9, 2])
        _, cal, _ = _run(capsys, "calibrate", "--data", path)
        w = json.loads(cal)["w_hat"]
        _, direct, _ = _run(capsys, "posterior", "--data", path)
        _, fixed, _ = _run(capsys, "posterior", "--data", path, "--w", repr(w))
        assert direct.splitlines()[0] == f"# w={io.format_float(w)} method=fisher-closed-form"
        assert direct.splitlines()[1:] == fixed.splitlines()[1:]


def _parse(text):
    rows = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = rows[0].split(",")
    body = np.array([r.split(",") for r in rows[1:]], dtype=float).T
    return dict(zip(header, body))


class TestReproduce:
    def test_fig1(self, tmp_path, capsys):
        code, out, _ = _run(capsys, "reproduce", "fig1", "--seed", "4", "--out", str(tmp_path))
        assert code == 0 and out == ""
        cols = io.read_csv_columns(tmp_path / "fig1.csv")
        assert list(cols) == ["n", "w_hat"]
        assert len(cols["n"]) == 100
        first = (tmp_path / "fig1.csv").read_bytes(), (tmp_path / "fig1.json").read_bytes()
        main(["reproduce", "fig1", "--seed", "4", "--out", str(tmp_path)])
        assert first == ((tmp_path / "fig1.csv").read_bytes(), (tmp_path / "fig1.json").read_bytes())
        assert json.loads(first[1])["seed"] == 4

    def test_fig2(self, tmp_path, capsys):
        code, _, _ = _run(capsys, "reproduce", "fig2", "--seed", "2", "--out", str(tmp_path))
        assert code == 0
        for sc in ("overdispersed", "underdispersed"):
            cols = io.read_csv_columns(tmp_path / f"fig2_{sc}.csv")
            assert list(cols) == ["theta", "fisher_posterior", "kl_posterior", "correct_posterior"]
            for k in list(cols)[1:]:
                assert np.trapezoid(cols[k], cols["theta"]) == pytest.approx(1.0, abs=1e-6)
            assert (tmp_path / f"fig2_{sc}.json").exists()

    def test_seed_from_environment(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("POWERCAL_SEED", "17")
        main(["reproduce", "fig1", "--out", str(tmp_path)])
        assert json.loads((tmp_path / "fig1.json").read_text())["seed"] == 17


class TestConfig:
    def test_round_trip(self):
        cfg = io.RunConfig("posterior", model="normal:variance=2", prior="normal:precision=0.5",
                           w=0.5, tolerances={"root_tol": 1e-9})
        again = io.RunConfig.from_json(cfg.to_json())
        assert again == cfg
        assert again.prior == "normal:mean=0,precision=0.5"

    @pytest.mark.parametrize("d", [{"command": "calibrate", "colour": 1},
                                   {"command": "calibrate", "tolerances": {"abs_tol": 1e-3}},
                                   {"command": "launch"}])
    def test_rejects_unknown(self, d):
        with pytest.raises(io.ConfigError):
            io.RunConfig.from_dict(d)

    def test_config_file(self, tmp_path, capsys):
        data = _data_file(tmp_path, [1, 1, 4])
        cfg = tmp_path / "run.json"
        cfg.write_text(io.RunConfig("calibrate", data=data).to_json())
        code, out, _ = _run(capsys, "--config", str(cfg))
        assert code == 0 and json.loads(out)["w_hat"] == pytest.approx(1.0)

    def test_dumps_is_canonical(self):
        text = io.dumps({"b": 0.1, "a": [1, 2.5]})
        assert text == '{\n  "a": [\n    1,\n    2.5\n  ],\n  "b": 0.10000000000000001\n}\n'


def test_module_entry_point(tmp_path):
    path = _data_file(tmp_path, [1, 1, 4])
    proc = subprocess.run([sys.executable, "-m", "powercal", "calibrate", "--data", path],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["w_hat"] == pytest.approx(1.0)
