import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvfidelity import fock_oracle as fo
from cvfidelity import gaussian_single as g1
from cvfidelity.errors import DomainError, UndefinedQuantityError


def oracle_density(s, n_max=None):
    x, r, n_T = g1.physical_params(s)
    if n_max is None:
        return fo.gaussian1_to_fock_auto(x, r, n_T)
    return fo.gaussian1_to_fock(x, r, n_T, n_max)


energy = st.floats(0.0, 3.0)
fraction = st.floats(0.0, 1.0)
amplitude = st.floats(-1.5, 1.5)


@st.composite
def dsts1(draw):
    return g1.dsts1_from_energy(g1.EnergyParams1(draw(energy), draw(fraction), draw(amplitude)))


# -- construction ----------------------------------------------------------


def test_vacuum():
    s = g1.dsts1_from_physical(0, 0, 0)
    np.testing.assert_array_equal(s.mean, [0, 0])
    np.testing.assert_array_equal(s.cm, np.diag([0.5, 0.5]))


def test_displaced_thermal():
    s = g1.dsts1_from_physical(0.5, 0, 1)
    np.testing.assert_allclose(s.mean, [math.sqrt(2) * 0.5, 0])
    np.testing.assert_allclose(s.cm, np.diag([1.5, 1.5]))


def test_squeezed_vacuum_sinh_one():
    # sinh r = 1  ->  e^r = 1 + sqrt(2),  e^{2r} = 3 + 2 sqrt(2)
    s = g1.dsts1_from_physical(0, math.asinh(1.0), 0)
    np.testing.assert_allclose(np.diag(s.cm), [(3 + 2 * math.sqrt(2)) / 2, (3 - 2 * math.sqrt(2)) / 2], rtol=1e-14)
    assert np.linalg.det(s.cm) == pytest.approx(0.25, abs=1e-14)


def test_negative_thermal_rejected():
    with pytest.raises(DomainError):
        g1.dsts1_from_physical(0, 0, -0.1)


def test_unphysical_cm_rejected():
    with pytest.raises(DomainError):
        g1.GaussianState1(mean=[0, 0], cm=np.diag([0.4, 0.4]))
    with pytest.raises(DomainError):
        g1.GaussianState1(mean=[0, 0], cm=[[1, 0.2], [0.1, 1]])


def test_state_is_immutable():
    s = g1.dsts1_from_physical(0.3, 0.1, 0.2)
    with pytest.raises(ValueError):
        s.cm[0, 0] = 3.0


@given(dsts1())
def test_dsts1_cm_invariants(s):
    assert s.cm[0, 1] == 0
    x, r, n_T = g1.physical_params(s)
    assert np.linalg.det(s.cm) == pytest.approx((n_T + 0.5) ** 2, rel=1e-12)
    assert np.linalg.det(s.cm) >= 0.25 - 1e-12


# -- energy parametrization ------------------------------------------------


@pytest.mark.parametrize(
    "N, beta, n_T, n_S",
    [(1, 0, 1, 0), (1, 1, 0, 1), (1, 0.5, 0.25, 0.5)],
)
def test_energy_to_physical(N, beta, n_T, n_S):
    got_T, got_S, r = g1.energy_to_physical(g1.EnergyParams1(N, beta))
    assert got_T == pytest.approx(n_T, abs=1e-15)
    assert got_S == pytest.approx(n_S, abs=1e-15)
    assert math.sinh(r) ** 2 == pytest.approx(n_S, abs=1e-14)
    assert got_T + got_S + 2 * got_T * got_S == pytest.approx(N, abs=1e-15)


@given(energy, fraction)
def test_energy_round_trip(N, beta):
    n_T, n_S, _ = g1.energy_to_physical(g1.EnergyParams1(N, beta))
    back = g1.physical_to_energy(n_T, n_S)
    assert back.N == pytest.approx(N, abs=1e-12)
    if N > 1e-6:
        assert back.beta == pytest.approx(beta, abs=1e-12)


@given(fraction.filter(lambda b: b < 1), st.floats(0, 5), st.floats(0, 5))
def test_thermal_part_monotone_in_energy(beta, N1, N2):
    lo, hi = sorted((N1, N2))
    assert g1.energy_to_physical(g1.EnergyParams1(lo, beta))[0] <= g1.energy_to_physical(g1.EnergyParams1(hi, beta))[0] + 1e-15


def test_energy_params_validation():
    with pytest.raises(DomainError):
        g1.EnergyParams1(-1, 0.5)
    with pytest.raises(DomainError):
        g1.EnergyParams1(1, 1.5)


def test_amplitude_squeezing_reduces_displaced_quadrature():
    s = g1.dsts1_from_energy(g1.EnergyParams1(1.0, 1.0, 1.0))
    assert s.cm[0, 0] < 0.5 < s.cm[1, 1]


# -- photon statistics -----------------------------------------------------


def test_mean_photon_examples():
    assert g1.mean_photon(g1.dsts1_from_physical(0, 0, 0)) == 0
    kernel = g1.dsts1_from_energy(g1.EnergyParams1(1.0, 0.5, 0.5))
    assert g1.mean_photon(kernel) == pytest.approx(1.25, abs=1e-14)
    assert g1.mean_photon(g1.dsts1_from_physical(0, 0, 2)) == pytest.approx(2)


@given(energy, fraction, amplitude)
def test_mean_photon_is_x2_plus_N(N, beta, x):
    s = g1.dsts1_from_energy(g1.EnergyParams1(N, beta, x))
    assert g1.mean_photon(s) == pytest.approx(x * x + N, abs=1e-12)


def test_fano_coherent_is_one():
    assert g1.fano_factor(g1.dsts1_from_physical(1, 0, 0)) == pytest.approx(1, abs=1e-12)


def test_fano_thermal_is_two():
    assert g1.fano_factor(g1.dsts1_from_physical(0, 0, 1)) == pytest.approx(2, abs=1e-12)


def test_fano_squeezed_vacuum_is_four():
    # Var = 2 n_S (n_S + 1) = 4, <n> = 1
    s = g1.dsts1_from_energy(g1.EnergyParams1(1.0, 1.0))
    assert g1.fano_factor(s) == pytest.approx(4, abs=1e-12)


def test_fano_vacuum_undefined():
    with pytest.raises(UndefinedQuantityError):
        g1.fano_factor(g1.dsts1_from_physical(0, 0, 0))
    with pytest.raises(UndefinedQuantityError):
        g1.is_sub_poissonian(g1.dsts1_from_physical(0, 0, 0))


@pytest.mark.parametrize(
    "x, r, n_T",
    [(0, 0, 1), (1, 0, 0), (0, -math.asinh(1), 0), (0.5, 0.3, 0.2), (2, -0.25, 0.02), (0.7, -0.4, 0.3)],
)
def test_fano_against_oracle_moments(x, r, n_T):
    s = g1.dsts1_from_physical(x, r, n_T)
    mean, second = fo.photon_moments(oracle_density(s))
    assert g1.mean_photon(s) == pytest.approx(mean, abs=1e-8)
    assert g1.fano_factor(s) == pytest.approx((second - mean * mean) / mean, abs=1e-6)


def test_sub_poissonian_examples():
    assert not g1.is_sub_poissonian(g1.dsts1_from_physical(1, 0, 0))
    assert not g1.is_sub_poissonian(g1.dsts1_from_physical(0, 0, 1))
    bright = g1.dsts1_from_energy(g1.EnergyParams1(0.1, 0.9, 2.0))
    assert g1.is_sub_poissonian(bright)
    mean, second = fo.photon_moments(oracle_density(bright))
    assert (second - mean * mean) / mean < 1


# -- classicality ----------------------------------------------------------


@pytest.mark.parametrize("n_T", [0, 0.3, 2.0])
def test_thermal_is_classical(n_T):
    assert g1.is_classical(g1.dsts1_from_physical(0, 0, n_T))


def test_squeezed_vacuum_is_nonclassical():
    assert not g1.is_classical(g1.dsts1_from_physical(0, 0.2, 0))


@pytest.mark.parametrize("n_T", [0.1, 1.0, 3.0])
def test_classicality_boundary_is_inclusive(n_T):
    r = 0.5 * math.log(2 * n_T + 1)  # e^{-2r} (2 n_T + 1) = 1
    assert g1.is_classical(g1.dsts1_from_physical(0, r, n_T))
    assert not g1.is_classical(g1.dsts1_from_physical(0, r * 1.001, n_T))


@given(dsts1())
def test_classical_implies_not_sub_poissonian(s):
    if g1.mean_photon(s) > 1e-9 and g1.is_classical(s):
        assert g1.fano_factor(s) >= 1 - 1e-10


# -- fidelity --------------------------------------------------------------


@settings(max_examples=200)
@given(dsts1())
def test_self_fidelity(s):
    assert g1.fidelity1(s, s) == pytest.approx(1, abs=1e-10)


@given(dsts1(), dsts1())
def test_fidelity_symmetric_and_bounded(a, b):
    F = g1.fidelity1(a, b)
    assert 0 <= F <= 1
    assert F == pytest.approx(g1.fidelity1(b, a), abs=1e-12)


def test_coherent_fidelity_is_exp_minus_one():
    a, b = g1.dsts1_from_physical(0, 0, 0), g1.dsts1_from_physical(1, 0, 0)
    assert g1.fidelity1(a, b) == pytest.approx(math.exp(-1), abs=1e-12)
    # |<0|alpha>|^2 = e^{-|alpha|^2}
    assert fo.uhlmann(oracle_density(a, 40), oracle_density(b, 40)) == pytest.approx(math.exp(-1), abs=1e-8)


def test_positive_exponent_would_exceed_one():
    # guards the sign of the Gaussian exponent
    a, b = g1.dsts1_from_physical(0, 0, 0), g1.dsts1_from_physical(0.3, 0, 0)
    assert g1.fidelity1(a, b) < 1


@pytest.mark.parametrize("N", [0.2, 1.0, 2.5])
def test_high_fidelity_near_target(N):
    target = g1.dsts1_from_energy(g1.EnergyParams1(N, 0.5, 0.5))
    near = g1.dsts1_from_energy(g1.EnergyParams1(N, 0.45, 0.5))
    assert g1.fidelity1(target, near) > 0.99


@pytest.mark.parametrize(
    "p1, p2",
    [
        ((0.3, 0.2, 0.1), (0.0, -0.4, 0.5)),
        ((1.0, 0.0, 0.0), (0.8, -0.3, 0.0)),
        ((0.0, 0.5, 1.0), (0.2, 0.1, 0.4)),
    ],
)
def test_fidelity_against_oracle(p1, p2):
    a, b = g1.dsts1_from_physical(*p1), g1.dsts1_from_physical(*p2)
    n = max(oracle_density(a).n_max, oracle_density(b).n_max)
    Fo = fo.uhlmann(oracle_density(a, n), oracle_density(b, n))
    assert g1.fidelity1(a, b) == pytest.approx(Fo, abs=1e-6)


def test_clamp_rejects_large_excess():
    with pytest.raises(g1.NumericalConsistencyError):
        g1.clamp_fidelity(1 + 1e-6)
    assert g1.clamp_fidelity(1 + 1e-10) == 1.0


# -- distances -------------------------------------------------------------


def test_bures_distance_values():
    assert g1.bures_distance(1) == 0
    assert g1.bures_distance(0) == pytest.approx(math.sqrt(2))
    assert g1.bures_distance(0.99) == pytest.approx(0.100126, abs=1e-6)


def test_trace_distance_bounds_values():
    assert g1.trace_distance_bounds(1) == (0, 0)
    lo, hi = g1.trace_distance_bounds(0.99)
    assert lo == pytest.approx(0.005013, abs=1e-6)
    assert hi == pytest.approx(0.1, abs=1e-12)


@pytest.mark.parametrize("F", [-0.1, 1.1])
def test_distance_domain(F):
    with pytest.raises(DomainError):
        g1.bures_distance(F)
    with pytest.raises(DomainError):
        g1.trace_distance_bounds(F)


def test_trace_distance_sandwich_random_pair():
    rng = np.random.default_rng(3)
    for _ in range(5):
        a = g1.dsts1_from_physical(rng.uniform(-1, 1), rng.uniform(-0.4, 0.4), rng.uniform(0, 0.5))
        b = g1.dsts1_from_physical(rng.uniform(-1, 1), rng.uniform(-0.4, 0.4), rng.uniform(0, 0.5))
        n = max(oracle_density(a).n_max, oracle_density(b).n_max)
        T = fo.trace_distance(oracle_density(a, n), oracle_density(b, n))
        lo, hi = g1.trace_distance_bounds(g1.fidelity1(a, b))
        assert lo - 1e-10 <= T <= hi + 1e-10


# -- serialization ---------------------------------------------------------


def test_dict_round_trip():
    s = g1.dsts1_from_energy(g1.EnergyParams1(1.2, 0.3, 0.4))
    assert g1.state1_from_dict(s.to_dict()) == s
    assert g1.state1_from_dict({"N": 1.2, "beta": 0.3, "x": 0.4}) == s
