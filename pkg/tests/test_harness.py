import json
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from phaseonium_engine import coarse, harness as h
from phaseonium_engine.coarse import CONSTANT_EXP, LINEAR_EXP, MICROSCOPIC, QUADRATIC_EXP
from phaseonium_engine.phaseonium import AtomSpec, CoherenceSpec, quasi_equilibrium_ratio, thermal_populations


@pytest.fixture(scope="module")
def cqed_rows():
    return h.run_sweep(h.PRESETS["circuit_qed"])


def curves(rows, model):
    out = {}
    for r in rows:
        if r.xi_model == model:
            out.setdefault(r.x, []).append(r)
    return {x: sorted(g, key=lambda r: r.N) for x, g in out.items()}


# -- presets -------------------------------------------------------------------------


def test_preset_values():
    p = h.PRESETS["circuit_qed"].params
    assert (p.g, p.r, p.kappa, p.gamma, p.T_h) == (0.01, 1e-4, 6.25e-4, 5e-6, 4.0)
    p = h.PRESETS["microwave"].params
    assert (p.g, p.r, p.kappa, p.gamma, p.T_h) == (9.21e-7, 6.47e-5, 1.96e-8, 9.54e-10, 4.0)
    p = h.PRESETS["optical"].params
    assert (p.g, p.r, p.kappa, p.gamma, p.T_h) == (6.28e-7, 8e-5, 2.86e-7, 4.68e-8, 4.0)
    for name in ("circuit_qed", "microwave", "optical"):
        sc = h.PRESETS[name]
        assert sc.lam == 1e-6 and sc.N_range == tuple(range(2, 41))
    assert h.PRESETS["circuit_qed"].x_values[QUADRATIC_EXP] == (0.012, 0.01, 0.008, 0.006)
    assert h.PRESETS["microwave"].panels[(LINEAR_EXP, "eta")] == (0.14, 0.12, 0.1, 0.08)
    assert h.PRESETS["optical"].x_values[QUADRATIC_EXP] == (0.01, 0.008, 0.006, 0.004)


def test_rydberg_preset():
    W0 = 51e9
    for name, N_ex in (("rydberg", 12e3), ("rydberg_nex4000", 4000)):
        sc = h.PRESETS[name]
        p = sc.params
        assert p.g * W0 == pytest.approx(5e4) and p.gamma * W0 == pytest.approx(33.3)
        assert p.gamma_phi * W0 == pytest.approx(3.3) and p.kappa == 1 / 2e10
        assert p.T_h == 2.0 and sc.lam == 1e-3
        assert sc.micro.tau / W0 == pytest.approx(10e-6)
        assert sc.micro.schedule.N_ex(p.kappa) == pytest.approx(N_ex)
        assert p.r == pytest.approx(sc.micro.schedule.r, rel=1e-14)


@pytest.mark.parametrize("name", ["circuit_qed", "microwave", "optical"])
def test_quasi_equilibrium_guard(name):
    sc = h.PRESETS[name]
    for N in sc.N_range:
        assert quasi_equilibrium_ratio(AtomSpec(N), sc.params.T_h, sc.coh) <= 1e-2
    assert sc.quasi_equilibrium_violations() == {}


@pytest.mark.parametrize("name", ["rydberg", "rydberg_nex4000"])
def test_quasi_equilibrium_rydberg(name):
    # lambda = 1e-3: N = 2 is within the guard, N = 3, 4 slightly above
    v = h.PRESETS[name].quasi_equilibrium_violations()
    assert sorted(v) == [3, 4]
    assert v[3] == pytest.approx(0.0108, abs=1e-4) and v[4] < 0.02


def test_load_scenario_file(tmp_path):
    f = tmp_path / "custom.json"
    f.write_text(json.dumps({"base": "optical", "kappa": 1e-7, "N_range": [2, 3, 4],
                             "x_values": {"const": [0.1]}}))
    sc = h.load_scenario(str(f))
    assert sc.name == "custom" and sc.params.kappa == 1e-7 and sc.params.g == 6.28e-7
    assert sc.N_range == (2, 3, 4) and sc.x_values == {"const": (0.1,)}
    assert len(h.run_sweep(sc)) == 3
    f.write_text(json.dumps({"base": "optical", "bogus": 1}))
    with pytest.raises(ValueError, match="bogus"):
        h.load_scenario(str(f))
    with pytest.raises(KeyError):
        h.load_scenario("nowhere")


# -- sweeps --------------------------------------------------------------------------


def test_empty_range():
    sc = replace(h.PRESETS["circuit_qed"], N_range=())
    assert h.run_sweep(sc) == []
    assert h.rows_to_csv([]).strip() == ",".join(h.CSV_HEADER)


def test_csv_is_deterministic():
    sc = replace(h.PRESETS["optical"], N_range=(2, 5, 9, 14))
    a = h.rows_to_csv(h.run_sweep(sc))
    b = h.rows_to_csv(h.run_sweep(sc, workers=2))
    assert a == b
    assert a.splitlines()[0] == ",".join(h.CSV_HEADER)


def test_csv_round_trip(tmp_path, cqed_rows):
    f = tmp_path / "rows.csv"
    f.write_text(h.rows_to_csv(cqed_rows))
    back = h.read_rows(f)
    assert [r.eta for r in back] == [r.eta for r in cqed_rows]
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        h.read_rows(bad)


def test_one_row_per_point(cqed_rows):
    keys = [r.key() for r in cqed_rows]
    assert len(keys) == len(set(keys)) == 39 * 12
    assert not any(r.error for r in cqed_rows)


def _convex(y):
    return np.all(np.diff(y, 2) > 0)


def test_constant_dephasing_curves(cqed_rows):
    cur = curves(cqed_rows, CONSTANT_EXP)
    for x, g in cur.items():
        N = np.array([r.N for r in g])
        for q in ("W", "eta"):
            y = np.array([getattr(r, q) for r in g])
            assert np.all(np.diff(y) > 0)
            # the coherence count switches form at N = 10; convex on each side
            assert _convex(y[N < 10]) and _convex(y[N >= 10])
    xs = sorted(cur)
    for lo, hi in zip(xs, xs[1:]):
        assert all(a.eta > b.eta and a.W > b.W for a, b in zip(cur[lo], cur[hi]))


@pytest.mark.parametrize("name", ["circuit_qed", "microwave", "optical"])
def test_quadratic_dephasing_interior_maximum(name):
    sc = h.PRESETS[name]
    rows = h.run_sweep(sc, models=[QUADRATIC_EXP])
    for x, g in curves(rows, QUADRATIC_EXP).items():
        eta = np.array([r.eta for r in g])
        k = int(np.argmax(eta))
        assert 0 < k < len(g) - 1
        # decays past the maximum down to the loss floor, where it flattens out
        assert eta[-1] < eta[k] and np.all(np.diff(eta[k:]) <= 1e-12 * eta[k])


def test_microsim_sweep_caps():
    sc = replace(h.PRESETS["rydberg"], N_range=(2, 7), micro=replace(h.PRESETS["rydberg"].micro, n_max=20))
    pts = h.sweep_points(sc, h.MICRO)
    assert [p[2] for p in pts] == [2] and pts[0][0].micro.n_max == h.MICRO_NMAX_CAP
    with pytest.warns(UserWarning, match="full"):
        pts = h.sweep_points(sc, h.MICRO, full=True)
    assert [p[2] for p in pts] == [2, 7]
    with pytest.raises(ValueError):
        h.sweep_points(h.PRESETS["optical"], h.MICRO)


def test_failed_points_are_recorded():
    sc = replace(h.PRESETS["circuit_qed"], lam=1e-3, N_range=(5, 30), x_values={CONSTANT_EXP: (0.001,)})
    rows = h.run_sweep(sc)
    bad = [r for r in rows if r.error]
    assert [r.N for r in bad] == [30] and np.isnan(bad[0].eta)
    assert not rows[0].error


# -- fits ------------------------------------------------------------------------------


def _row(N, eta):
    return h.SweepRow("s", N, CONSTANT_EXP, 0.0, 0.0, 0.0, 0.0, eta, 0.0, h.ANALYTIC)


def test_fit_synthetic_cubic():
    f = h.fit_scaling_exponent([_row(N, 0.3 * N ** 3) for N in range(2, 20)])
    assert f.exponent == pytest.approx(3.0, abs=1e-12) and f.prefactor == pytest.approx(0.3)
    with pytest.raises(ValueError):
        h.fit_scaling_exponent([_row(N, -1.0) for N in range(2, 20)])


def test_fit_quadratic_regime(cqed_rows):
    sc = h.PRESETS["circuit_qed"]
    g = [r for r in cqed_rows if r.xi_model == CONSTANT_EXP and r.x == 0.001 and 10 <= r.N <= 40]
    f = h.fit_scaling_exponent(g, sc.params)
    assert f.exponent == pytest.approx(2.0, abs=0.05)


def test_fit_small_n_pair_count():
    sc = h.PRESETS["circuit_qed"]
    g = [r for r in h.run_sweep(replace(sc, N_range=tuple(range(2, 7))), models=[CONSTANT_EXP])
         if r.x == 0.001]
    f = h.fit_scaling_exponent(g, sc.params)
    # independent oracle: the fitted quantity is n_bar(N) * N(N-1)/2 * xi * lam
    N = np.arange(2, 7)
    nbar = [thermal_populations(AtomSpec(n), 4.0)[0] / (thermal_populations(AtomSpec(n), 4.0)[1][0]
                                                        - thermal_populations(AtomSpec(n), 4.0)[0]) for n in N]
    ref = stats.linregress(np.log(N), np.log(np.array(nbar) * N * (N - 1) / 2)).slope
    assert f.exponent == pytest.approx(ref, rel=1e-6)
    assert 2.0 < f.exponent < 3.0


# -- comparison --------------------------------------------------------------------------


def test_compare_identical_rows():
    rows = [h.SweepRow("s", N, MICROSCOPIC, 0.1, 1e-3, 1.0, 2.0 + N, 0.1, 0.2, h.ANALYTIC) for N in (2, 3)]
    rep = h.compare_rows(rows, rows)
    assert rep.passed and all(p.rel == (0.0, 0.0, 0.0) for p in rep.points)
    assert "PASS" in rep.lines()[-1]
    with pytest.raises(KeyError):
        h.compare_rows(rows, rows[:1])


def test_compare_equilibrium_oracle():
    sc = replace(h.PRESETS["rydberg"], lam=0.0, N_range=(2,),
                 params=replace(h.PRESETS["rydberg"].params, kappa=0.0))
    rep = h.compare(sc)
    (p,) = rep.points
    assert p.micro[0] == pytest.approx(2.0, rel=0.02)
    assert p.analytic[0] == pytest.approx(2.0, rel=0.02)


def test_prep_cost_analytic_scenario():
    c = h.prep_cost(h.PRESETS["optical"], 10)
    assert c.margin > 1e3 and c.U_c == pytest.approx(100 * c.U_p)
    t_th = coarse.degenerate_rate_eq(h.PRESETS["optical"].params, 10, 1.0, 0.0).t_th
    assert c.U_ss / c.U_c == pytest.approx(max(1.0, h.PRESETS["optical"].params.r * t_th))


# -- CLI ----------------------------------------------------------------------------------


def test_cli_analytic_and_fit(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert h.main(["analytic-sweep", "--scenario", "circuit_qed", "--xi", "const", "--out", str(out)]) == 0
    assert out.read_text().startswith(",".join(h.CSV_HEADER))
    capsys.readouterr()
    assert h.main(["fit", "--in", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 4 and all("exponent 2.0" in ln or "exponent 1.9" in ln for ln in lines)


def test_cli_exit_codes(tmp_path, capsys):
    assert h.main(["analytic-sweep", "--scenario", "no_such"]) == 1
    assert h.main(["fit", "--in", str(tmp_path / "missing.csv")]) == 1
    f = tmp_path / "hot.json"
    f.write_text(json.dumps({"base": "circuit_qed", "lam": 1e-3, "N_range": [5, 30],
                             "x_values": {"const": [0.001]}}))
    assert h.main(["analytic-sweep", "--scenario", str(f), "--out", str(tmp_path / "o.csv")]) == 2
    assert "point failed" in capsys.readouterr().err
    assert h.main(["prep-cost", "--scenario", "optical", "--N", "10"]) == 0
    assert "respected" in capsys.readouterr().out
    assert h.main(["prep-cost", "--scenario", "optical", "--N", "2"]) == 2
    with pytest.raises(SystemExit):
        h.main(["bogus"])
