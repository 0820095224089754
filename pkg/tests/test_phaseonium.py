import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phaseonium_engine.phaseonium import (AtomSpec, CoherenceError, CoherenceSpec, build_nlap,
                                          coherence_bound, quasi_equilibrium_ratio, thermal_populations)
from phaseonium_engine import qcore


def test_populations_n2_t2():
    pe, pg = thermal_populations(AtomSpec(2), 2.0)
    Z = np.exp(-0.5) + 2
    assert pe == pytest.approx(np.exp(-0.5) / Z, rel=1e-14)
    assert pe == pytest.approx(0.2327, abs=1e-4)
    assert np.allclose(pg, 1 / Z) and pg[0] == pytest.approx(0.3837, abs=1e-4)


def test_population_limits():
    pe, pg = thermal_populations(AtomSpec(4), np.inf)
    assert pe == pytest.approx(0.2) and np.allclose(pg, 0.2)
    pe, pg = thermal_populations(AtomSpec(4), 1e-3)
    assert pe < 1e-300 and np.allclose(pg, 0.25)


def test_atom_spec_flags():
    a = AtomSpec(3, with_auxiliary=True)
    assert a.degenerate and a.dim == 5 and a.aux_index == 4
    assert not AtomSpec(2, e_lower=(0.0, 0.1)).degenerate
    with pytest.raises(ValueError):
        AtomSpec(2, e_lower=(0.0,))


def test_nlap_structure():
    rho = build_nlap(AtomSpec(2), 2.0, CoherenceSpec(lam=1e-6, phi=0.0))
    pe, pg = thermal_populations(AtomSpec(2), 2.0)
    expected = np.diag([pe, pg[0], pg[1]]).astype(complex)
    expected[1, 2] = expected[2, 1] = 1e-6
    assert np.allclose(rho.matrix, expected, atol=1e-18)
    zero = build_nlap(AtomSpec(3), 2.0, CoherenceSpec(lam=0.0))
    assert np.count_nonzero(zero.matrix - np.diag(np.diag(zero.matrix))) == 0


def test_auxiliary_level_is_empty():
    rho = build_nlap(AtomSpec(2, with_auxiliary=True), 2.0, CoherenceSpec(lam=1e-3))
    assert rho.dim == 4
    assert np.all(rho.matrix[3] == 0) and np.all(rho.matrix[:, 3] == 0)


def test_phases_and_overrides():
    coh = CoherenceSpec(lam=1e-3, phi=np.pi / 3, per_pair={(0, 2): (2e-3, 0.5)})
    rho = build_nlap(AtomSpec(3), 2.0, coh).matrix
    assert rho[1, 2] == pytest.approx(1e-3 * np.exp(1j * np.pi / 3))
    assert rho[1, 3] == pytest.approx(2e-3 * np.exp(0.5j))
    assert rho[3, 1] == pytest.approx(np.conj(rho[1, 3]))
    assert len(list(coh.pairs(5))) == 10
    with pytest.raises(ValueError):
        CoherenceSpec(per_pair={(2, 1): (1e-3, 0.0)})


def test_pairwise_bound_example():
    # N = 3 at phi = 0: the all-equal lower block keeps positivity up to the bound
    atom = AtomSpec(3)
    b = coherence_bound(atom, 2.0)
    rho = build_nlap(atom, 2.0, CoherenceSpec(lam=0.99 * b, phi=0.0))
    assert qcore.min_eigenvalue(rho.matrix) >= 0
    with pytest.raises(CoherenceError, match="rho_b1b2"):
        build_nlap(atom, 2.0, CoherenceSpec(lam=1.01 * b, phi=0.0))


def test_jointly_nonpositive_rejected():
    # with phi = pi the lower block is P_g I - lam (J - I); PSD needs lam <= P_g / (N - 1)
    atom = AtomSpec(3)
    b = coherence_bound(atom, 2.0)
    with pytest.raises(CoherenceError, match="jointly"):
        build_nlap(atom, 2.0, CoherenceSpec(lam=0.9 * b, phi=np.pi))
    build_nlap(atom, 2.0, CoherenceSpec(lam=0.49 * b, phi=np.pi))


def test_bound_scales_as_inverse_n():
    # the bound is P_g, which tends to 1/N when the excited weight is negligible against N
    for N in range(10, 41, 5):
        assert coherence_bound(AtomSpec(N), 1.0) * N == pytest.approx(1.0, rel=0.05)


def test_quasi_equilibrium_ratio():
    atom = AtomSpec(4)
    _, pg = thermal_populations(atom, 4.0)
    assert quasi_equilibrium_ratio(atom, 4.0, CoherenceSpec(lam=1e-6)) == pytest.approx(4e-6 / pg[0])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.floats(0.2, 20.0), st.floats(0.0, 0.999), st.floats(0, 2 * np.pi))
def test_nlap_valid_below_psd_bound(N, T, frac, phi):
    atom = AtomSpec(N)
    _, pg = thermal_populations(atom, T)
    lam = frac * pg[0] / (N - 1)
    rho = build_nlap(atom, T, CoherenceSpec(lam=lam, phi=phi))
    assert abs(np.trace(rho.matrix) - 1) < 1e-12
    assert qcore.min_eigenvalue(rho.matrix) > -1e-12
