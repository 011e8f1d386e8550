import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopsel import cli
from coopsel import pairing as pr
from coopsel.channel import I2I_MODEL, BivariateModel, mean_vector
from coopsel.config import ConfigError, dump_model, load_model, model_from_section, parse_config
from coopsel.energy import RadioConfig
from coopsel.quality import coding_gain_db


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("[radio]\nR = 1\nfoo = 2\n")
        assert exc.value.key == "radio.foo"

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            parse_config("[nope]\nx = 1\n")

    def test_missing_model_keys(self):
        with pytest.raises(ConfigError, match="missing"):
            model_from_section({"scenario": "I2I", "phi": "0"})

    @given(
        st.floats(-50, 50),
        st.floats(-5, 5),
        st.floats(0, 200),
        st.floats(-5, 5),
        st.floats(0, 20),
        st.floats(0, 20),
        st.floats(-1, 1),
    )
    def test_round_trip(self, a, ak, b, al, sk, sl, phi):
        m = BivariateModel("I2I", a, ak, b, al, sk, sl, phi)
        back = model_from_section(parse_config(dump_model(m))["model"])
        for name in ("muK_intercept", "alphaK", "muL_intercept", "alphaL", "sigmaK", "sigmaL", "phi"):
            x, y = getattr(m, name), getattr(back, name)
            assert y == pytest.approx(x, rel=1e-6, abs=1e-12)
        assert back.scenario == m.scenario and back.linear_in_D == m.linear_in_D


class TestSimulate:
    def test_deterministic(self, tmp_path, capsys):
        args = ["simulate", "--preset", "fig5", "--topologies", 100, "--seed", 7]
        assert run(args + ["--out-dir", tmp_path / "a"], capsys)[0] == 0
        assert run(args + ["--out-dir", tmp_path / "b", "--workers", 2], capsys)[0] == 0
        assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()

    def test_fig5_schema(self, tmp_path, capsys):
        assert run(["simulate", "--preset", "fig5", "--topologies", 2, "--out-dir", tmp_path], capsys)[0] == 0
        rows = read_csv(tmp_path / "results.csv")
        assert list(rows[0])[:4] == ["experiment", "N", "algorithm", "estimator"]
        assert {"N", "algorithm", "gain", "stderr"} <= set(rows[0])
        assert sorted({int(r["N"]) for r in rows}) == list(range(3, 56, 2))
        manifest = (tmp_path / "manifest.txt").read_text()
        assert "preset = fig5" in manifest and "started = " in manifest

    def test_manifest_replays(self, tmp_path, capsys):
        run(["simulate", "--preset", "fig7", "--topologies", 3, "--seed", 2, "--out-dir", tmp_path / "a"], capsys)
        code, _, _ = run(["simulate", "--config", tmp_path / "a/manifest.txt", "--out-dir", tmp_path / "b"], capsys)
        assert code == 0
        assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()

    def test_custom_requires_keys(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("[experiment]\nn_topologies = 3\n")
        code, _, err = run(["simulate", "--preset", "custom", "--config", cfg, "--out-dir", tmp_path], capsys)
        assert code == 2
        for k in ("n_nodes", "algorithms", "reference"):
            assert k in err

    def test_custom_runs(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(
            "[experiment]\nn_nodes = 3,4\nalgorithms = none,wlf-cg:mmse\nreference = none\nn_topologies = 3\n"
            "[radio]\np = 0.01\n[i2o]\noutdoor_mode = per_link\n"
        )
        assert run(["simulate", "--preset", "custom", "--config", cfg, "--out-dir", tmp_path], capsys)[0] == 0
        rows = read_csv(tmp_path / "results.csv")
        assert {(r["N"], r["algorithm"], r["estimator"]) for r in rows} == {
            ("3", "none", ""),
            ("3", "wlf-cg", "mmse"),
            ("4", "none", ""),
            ("4", "wlf-cg", "mmse"),
        }

    def test_unknown_key_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("[experiment]\nbogus = 1\n")
        code, _, err = run(["simulate", "--preset", "fig5", "--config", cfg], capsys)
        assert code == 2 and "experiment.bogus" in err

    def test_unreadable_exit_1(self, tmp_path, capsys):
        code, _, _ = run(["simulate", "--preset", "fig5", "--config", tmp_path / "missing.cfg"], capsys)
        assert code == 1

    def test_fig9_pdf(self, tmp_path, capsys):
        assert run(["simulate", "--preset", "fig9", "--topologies", 3, "--out-dir", tmp_path], capsys)[0] == 0
        rows = read_csv(tmp_path / "error_pdf.csv")
        assert {r["model_nodes"] for r in rows} == {"0", "7"}
        zero = [r for r in rows if float(r["K"]) == 0.0]
        assert float(zero[0]["pl_error"]) == pytest.approx(1.3327, abs=1e-4)


class TestFitAndSample:
    def test_sample_single_row(self, tmp_path, capsys):
        model = tmp_path / "m.cfg"
        model.write_text(dump_model(I2I_MODEL))
        a = run(["sample", model, "-n", 1, "--seed", 4], capsys)
        b = run(["sample", model, "-n", 1, "--seed", 4], capsys)
        assert a[0] == 0 and a[1] == b[1] and len(a[1].strip().splitlines()) == 2

    def test_sample_means(self, tmp_path, capsys):
        model = tmp_path / "m.cfg"
        model.write_text(dump_model(I2I_MODEL))
        out = tmp_path / "s.csv"
        assert run(["sample", model, "-n", 100_000, "--dmin", 10, "--dmax", 10, "--out", out], capsys)[0] == 0
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        muK, muL = mean_vector(I2I_MODEL, 10.0)
        assert data[:, 1].mean() == pytest.approx(muK, abs=0.1)
        assert data[:, 2].mean() == pytest.approx(muL, abs=0.1)

    def test_sample_bad_n(self, tmp_path, capsys):
        model = tmp_path / "m.cfg"
        model.write_text(dump_model(I2I_MODEL))
        assert run(["sample", model, "-n", 0], capsys)[0] == 2

    def test_round_trip(self, tmp_path, capsys):
        model = tmp_path / "m.cfg"
        model.write_text(dump_model(I2I_MODEL))
        samples, fitted = tmp_path / "s.csv", tmp_path / "fit.cfg"
        assert run(["sample", model, "-n", 10_000, "--seed", 1, "--out", samples], capsys)[0] == 0
        code, _, err = run(["fit-model", samples, "--out", fitted], capsys)
        assert code == 0 and "sigmaK" in err
        m = load_model(fitted)
        for name in ("muK_intercept", "alphaK", "muL_intercept", "alphaL", "sigmaK", "sigmaL", "phi"):
            assert getattr(m, name) == pytest.approx(getattr(I2I_MODEL, name), rel=0.05), name

    def test_exact_line(self, tmp_path, capsys):
        D = np.array([1.0, 3.0, 9.0, 20.0])
        K, L = mean_vector(I2I_MODEL, D)
        path = tmp_path / "s.csv"
        path.write_text("D,K,L\n" + "".join(f"{float(d)!r},{float(k)!r},{float(l)!r}\n" for d, k, l in zip(D, K, L)))
        code, out, _ = run(["fit-model", path], capsys)
        assert code == 0
        m = model_from_section(parse_config(out)["model"])
        assert m.sigmaK == pytest.approx(0, abs=1e-9) and m.sigmaL == pytest.approx(0, abs=1e-9)

    def test_two_rows(self, tmp_path, capsys):
        path = tmp_path / "s.csv"
        path.write_text("D,K,L\n1,2,3\n2,3,4\n")
        code, _, err = run(["fit-model", path], capsys)
        assert code == 2 and "insufficient samples" in err

    def test_malformed_row(self, tmp_path, capsys):
        path = tmp_path / "s.csv"
        path.write_text("D,K,L\n1,2,3\n2,x,4\n3,4,5\n")
        code, _, err = run(["fit-model", path], capsys)
        assert code == 2 and "line 3" in err


def _write_instance(path, K_up, L_up, K_in, L_in):
    n = len(K_up)
    lines = ["i,j,K,L"]
    for i in range(n):
        lines.append(f"{i + 1},0,{float(K_up[i])!r},{float(L_up[i])!r}")
        for j in range(i + 1, n):
            lines.append(f"{i + 1},{j + 1},{float(K_in[i][j])!r},{float(L_in[i][j])!r}")
    path.write_text("\n".join(lines) + "\n")


def _rows(out):
    return {r["algorithm"]: r for r in csv.DictReader(io.StringIO(out.split("verify")[0]))}


class TestPair:
    def test_two_nodes_match_library(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        _write_instance(path, [8.0, 3.0], [110.0, 100.0], [[0, 12.0], [0, 0]], [[0, 55.0], [0, 0]])
        code, out, _ = run(["pair", path, "--algorithm", "optimal,wlf-cg"], capsys)
        assert code == 0
        up = coding_gain_db(K=np.array([8.0, 3.0]), L=np.array([110.0, 100.0]))
        c = float(coding_gain_db(K=12.0, L=55.0))
        q = pr.QualityMatrix(up, [[0, c], [c, 0]])
        g = pr.build_weight_graph(q, RadioConfig())
        rows = _rows(out)
        lib = pr.optimal_pairing(g)
        assert float(rows["optimal"]["e_max_db"]) == pytest.approx(pr.e_max_db(lib, g))
        assert float(rows["wlf-cg"]["e_max_db"]) == pytest.approx(pr.e_max_db(pr.wlf_pairing(q, 30.0), g))

    def test_verify_brute(self, tmp_path, capsys):
        rng = np.random.default_rng(6)
        n = 6
        path = tmp_path / "p.csv"
        _write_instance(path, rng.normal(8, 5, n), rng.normal(110, 8, n), rng.normal(10, 5, (n, n)), rng.normal(60, 6, (n, n)))
        code, out, _ = run(["pair", path, "--algorithm", "optimal", "--verify", "brute"], capsys)
        assert code == 0 and "verify optimal: pass" in out

    def test_wlf_pl_definition(self, tmp_path, capsys):
        rng = np.random.default_rng(7)
        n = 5
        K_up, L_up = rng.normal(8, 5, n), rng.normal(110, 8, n)
        K_in, L_in = rng.normal(10, 5, (n, n)), rng.normal(60, 6, (n, n))
        path = tmp_path / "p.csv"
        _write_instance(path, K_up, L_up, K_in, L_in)
        code, out, _ = run(["pair", path, "--algorithm", "wlf-pl"], capsys)
        L_full = np.triu(L_in, 1) + np.triu(L_in, 1).T
        ps = pr.wlf_pairing(pr.QualityMatrix(-L_up, -L_full), -math.inf)
        assert _rows(out)["wlf-pl"]["pairs"] == ";".join(f"{i + 1}-{j + 1}" for i, j in sorted(ps.pairs))

    def test_asymmetric(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        path.write_text("i,j,K,L\n1,0,5,100\n2,0,5,100\n1,2,5,60\n2,1,5,61\n")
        assert run(["pair", path], capsys)[0] == 2

    def test_rayleigh_blank_k(self, tmp_path, capsys):
        path = tmp_path / "p.csv"
        path.write_text("i,j,K,L\n1,0,,100\n2,0,5,100\n1,2,5,60\n")
        code, out, _ = run(["pair", path, "--algorithm", "none"], capsys)
        assert code == 0 and float(_rows(out)["none"]["e_max_db"]) == pytest.approx(130.0)


def test_help_documents_schemas(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["--help"])
    out = capsys.readouterr().out
    assert ",".join(cli.RESULT_COLUMNS) in out
