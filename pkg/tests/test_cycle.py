import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaseonium_engine import coarse
from phaseonium_engine.coarse import EngineParams
from phaseonium_engine.cycle import CycleCorner, entropy, evaluate_cycle
from phaseonium_engine.phaseonium import AtomSpec, CoherenceSpec
from phaseonium_engine.qcore import bose_einstein


def test_entropy_values():
    assert entropy(CycleCorner(0.0, 1.0)) == 0.0
    n = bose_einstein(2.0)
    assert entropy(CycleCorner(n, 2.0)) == pytest.approx(np.log(1 + n) + n / 2)
    assert entropy(CycleCorner(n, 2.0)) == pytest.approx(1.7035, abs=1e-4)
    s1 = entropy(CycleCorner(1.3, 2.0)) - np.log(2.3)
    s2 = entropy(CycleCorner(1.3, 4.0)) - np.log(2.3)
    assert s2 == pytest.approx(s1 / 2, rel=1e-15)
    with pytest.raises(ValueError):
        CycleCorner(-1.0, 1.0)


def test_equal_temperatures_give_nothing():
    n = bose_einstein(3.0)
    r = evaluate_cycle(3.0, 3.0, n, n)
    assert r.W_net == 0.0 and r.eta == 0.0


def test_single_bath_engine_harvests_work():
    p = EngineParams(g=0.01, r=1e-4, kappa=6.25e-4, gamma=5e-6, T_h=4.0)
    ss = coarse.steady_n_phi(coarse.coefficients(AtomSpec(12), p, CoherenceSpec(lam=1e-6)), p)
    r = evaluate_cycle(ss.T_phi, p.T_h, ss.n_phi, bose_einstein(p.T_h))
    assert ss.T_phi > p.T_h and r.W_net > 0 and not r.refrigerator
    assert r.eta == pytest.approx(r.W_net / r.Q_in, rel=1e-10)


def test_refrigerator_flag():
    r = evaluate_cycle(1.5, 2.0, bose_einstein(1.5), bose_einstein(2.0))
    assert r.refrigerator and r.eta < 0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.2, 50), st.floats(0.2, 50))
def test_bookkeeping_closes(T_phi, T_c):
    r = evaluate_cycle(T_phi, T_c, bose_einstein(T_phi), bose_einstein(T_c))
    assert abs(r.Q_in - r.Q_out - r.W_net) <= 1e-12 * max(1.0, abs(r.Q_in))
    assert r.eta == pytest.approx(1 - T_c / T_phi, rel=1e-14, abs=1e-15)
    assert r.S[0] == r.S[3] and r.S[1] == r.S[2]
    if T_phi > T_c:
        assert r.W_net > 0


def _ratio(N, T):
    p = EngineParams(g=0.01, r=1e-4, kappa=0.0, gamma=5e-6, T_h=T)
    ss = coarse.steady_n_phi(coarse.coefficients(AtomSpec(N), p, CoherenceSpec(lam=1e-7)), p)
    r = evaluate_cycle(ss.T_phi, T, ss.n_phi, bose_einstein(T))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, eta_ht = coarse.high_T_work_eta(p, N, 1.0, 1e-7)
    return r.W_net / r.Q_in / eta_ht


@pytest.mark.parametrize("N", [10, 20, 40])
def test_high_t_cross_check(N):
    # the closed form drops O(1/T_h) corrections: ~10-13% at T_h = 4, ~1-2.5% at T_h = 20
    assert abs(_ratio(N, 4.0) - 1) < 0.15
    assert abs(_ratio(N, 20.0) - 1) < 0.03
    assert abs(_ratio(N, 100.0) - 1) < 0.01
    assert abs(_ratio(N, 20.0) - 1) < abs(_ratio(N, 4.0) - 1)
