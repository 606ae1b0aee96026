import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from cvfidelity import fock_oracle as fo
from cvfidelity import pnes
from cvfidelity.errors import DomainError, NumericalConsistencyError
from cvfidelity.pnes import Variant

ys = st.floats(0.0, 0.99)
energies = st.floats(1e-3, 1e2)
F_INF = 27 / 32


def h(d):
    return (d + 0.5) * math.log(d + 0.5) - (d - 0.5) * math.log(d - 0.5)


# -- coefficients ----------------------------------------------------------


@pytest.mark.parametrize("make", [pnes.twb_coeffs, pnes.pssv_coeffs])
def test_y_zero_is_vacuum(make):
    p = make(0.0)
    assert p.coeffs[0] == 1 and np.all(p.coeffs[1:] == 0)


def test_twb_half():
    c = pnes.twb_coeffs(0.5).coeffs
    assert c[0] == pytest.approx(math.sqrt(0.75), abs=1e-15)
    assert c[:2] == pytest.approx([0.8660, 0.4330], abs=1e-4)


def test_pssv_first_coefficients():
    y, q = 0.5, 0.25
    c = pnes.pssv_coeffs(y).coeffs
    norm = math.sqrt((1 - q) ** 3 / (1 + q))
    assert c[:3] == pytest.approx([norm, 2 * y * norm, 3 * q * norm], rel=1e-14)


@pytest.mark.parametrize("y", [1.0, 1.2, -0.1])
def test_y_out_of_range(y):
    with pytest.raises(DomainError):
        pnes.twb_coeffs(y)
    with pytest.raises(DomainError):
        pnes.pssv_coeffs(y)


@given(ys)
def test_normalization(y):
    for make in (pnes.twb_coeffs, pnes.pssv_coeffs):
        p = make(y)
        assert abs(p.norm2 - 1) <= 1e-10
        assert np.all(p.coeffs >= 0)


def test_pssv_normalized_at_point_nine():
    assert pnes.pssv_coeffs(0.9).norm2 == pytest.approx(1, abs=1e-10)


@given(ys)
def test_energy_matches_closed_forms(y):
    assert pnes.twb_coeffs(y).energy == pytest.approx(pnes.twb_energy(y), abs=1e-10)
    assert pnes.pssv_coeffs(y).energy == pytest.approx(pnes.pssv_energy(y), abs=1e-10)


@given(ys)
def test_cutoff_tail_bound(y):
    # tail of the PSSV weights, summed directly over a generous range
    tol = 1e-12
    m = pnes.cutoff_for(y, tol)
    q = y * y
    n = np.arange(m + 1, m + 20000)
    tail = (1 - q) ** 3 / (1 + q) * np.sum((1 + n) ** 2 * q**n)
    assert tail < tol
    if m > 0:
        n = np.arange(m, m + 20000)
        assert (1 - q) ** 3 / (1 + q) * np.sum((1 + n) ** 2 * q**n) >= tol * (1 - 1e-9)


def test_default_cutoff_is_stricter_than_mass_rule():
    for y in (0.3, 0.9, 0.99):
        assert pnes.cutoff_for(y) > pnes.cutoff_for(y, 1e-12)


# -- energy inversion ------------------------------------------------------


def test_y_from_energy_examples():
    assert pnes.y_from_energy(0, Variant.TWB) == 0
    assert pnes.y_from_energy(1, Variant.TWB) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    y = pnes.y_from_energy(1, Variant.PSSV)
    assert 2 * y**2 * (y**2 + 2) / (1 - y**4) == pytest.approx(1, abs=1e-12)


@given(energies)
def test_pssv_inverse_matches_bisection(N):
    y_ref = brentq(lambda y: pnes.pssv_energy(y) - N, 0.0, 1 - 1e-15, xtol=1e-15)
    y = pnes.y_from_energy(N, Variant.PSSV)
    assert y == pytest.approx(y_ref, abs=1e-12)
    assert pnes.pssv_energy(y) == pytest.approx(N, rel=1e-12, abs=1e-12)


@given(energies)
def test_twb_inverse(N):
    assert pnes.twb_energy(pnes.y_from_energy(N, "TWB")) == pytest.approx(N, rel=1e-12)


def test_negative_energy_rejected():
    with pytest.raises(DomainError):
        pnes.y_from_energy(-1, Variant.TWB)
    with pytest.raises(DomainError):
        pnes.y_from_energy(1, Variant.CUSTOM)


# -- fidelity --------------------------------------------------------------


@given(ys)
def test_self_fidelity(y):
    p = pnes.pssv_coeffs(y)
    assert pnes.fidelity_pnes(p, p) == pytest.approx(1, abs=1e-12)


@given(ys, ys)
def test_series_matches_closed_form(yT, yS):
    F = pnes.fidelity_pnes(pnes.twb_coeffs(yT), pnes.pssv_coeffs(yS))
    assert F == pytest.approx(pnes.fidelity_twb_pssv(yT, yS), abs=1e-10)


def test_unnormalized_input_rejected():
    good = pnes.twb_coeffs(0.3)
    with pytest.raises(DomainError):
        pnes.fidelity_pnes(good, pnes.PnesState([1.0, 0.5]))


def test_equal_energy_bound_and_monotone():
    N = np.geomspace(1e-2, 1e2, 200)
    F = np.array([pnes.fidelity_equal_energy(n) for n in N])
    assert np.all(F > F_INF)
    assert np.all(np.diff(F) < 0)
    assert F[-1] - F_INF < 0.01


def test_equal_energy_limit():
    assert pnes.fidelity_equal_energy(1e8) == pytest.approx(F_INF, abs=1e-6)
    assert pnes.fidelity_equal_energy(0) == 1


@pytest.mark.parametrize("yT, yS", [(0.05, 0.08), (0.1, 0.1), (0.2, 0.15)])
def test_fidelity_against_oracle(yT, yS):
    n_max = 12
    a, b = pnes.twb_coeffs(yT, n_max), pnes.pssv_coeffs(yS, n_max)
    F = pnes.fidelity_pnes(a, b)
    assert F == pytest.approx(fo.uhlmann(fo.pnes_to_fock(a), fo.pnes_to_fock(b)), abs=1e-8)


# -- non-Gaussianity -------------------------------------------------------


@given(ys)
def test_twb_is_gaussian(y):
    assert pnes.nongaussianity(pnes.twb_coeffs(y)) == pytest.approx(0, abs=1e-12)


def test_twb_gaussian_on_dense_grid():
    worst = max(pnes.nongaussianity(pnes.twb_coeffs(y)) for y in np.linspace(0, 0.99, 200))
    assert worst <= 1e-12


@given(st.floats(0.0, 0.95))
def test_series_d_minus_matches_closed_form(y):
    p = pnes.pssv_coeffs(y)
    assert pnes.symplectic_minus(p) == pytest.approx(pnes.pssv_symplectic_minus(y), abs=1e-10)


def test_pssv_nongaussianity_increasing():
    N = np.geomspace(1e-3, 1e3, 120)
    d = [pnes.pssv_nongaussianity(n) for n in N]
    assert np.all(np.diff(d) > 0)


def test_pssv_series_values_ordered():
    lo = pnes.nongaussianity(pnes.state_from_energy(0.5, "PSSV"))
    hi = pnes.nongaussianity(pnes.state_from_energy(2.0, "PSSV"))
    assert 0 < lo < hi
    assert lo == pytest.approx(pnes.pssv_nongaussianity(0.5), abs=1e-10)
    assert hi == pytest.approx(pnes.pssv_nongaussianity(2.0), abs=1e-10)


def test_negative_argument_is_an_error():
    # a negative gap cannot come from a normalized state
    with pytest.raises(NumericalConsistencyError):
        pnes._delta_from_gap(-0.1, 2.0)


def test_ladder_limit_matches_closed_limit():
    lim = pnes.asymptotic_nongaussianity()
    # q -> 1 in d_minus^2 = (9q^2 + 2q + 1) / (4 (1+q)^2) gives d_minus = sqrt(3)/2
    assert lim.value == pytest.approx(2 * h(math.sqrt(3) / 2), abs=1e-7)
    assert lim.last_step < 1e-8
    assert lim.value == pytest.approx(1.5878908, abs=1e-6)


def test_renormalized_range_and_monotone():
    N = np.geomspace(1e-3, 1e3, 100)
    r = np.array([pnes.renormalized_nongaussianity_at(n) for n in N])
    assert np.all((r >= 0) & (r <= 1))
    assert np.all(np.diff(r) >= 0)
    assert r[0] < 1e-2 and r[-1] > 0.99


def test_renormalized_series_path():
    p = pnes.state_from_energy(1.0, "PSSV")
    assert pnes.renormalized_nongaussianity(p) == pytest.approx(pnes.renormalized_nongaussianity_at(1.0), abs=1e-9)
    assert pnes.renormalized_nongaussianity(pnes.pssv_coeffs(0.0)) == 0


def test_renormalized_needs_pssv():
    with pytest.raises(DomainError):
        pnes.renormalized_nongaussianity(pnes.twb_coeffs(0.5))


def test_nongaussianity_is_base_invariant_after_renormalization():
    # scaling every log by a constant cancels in the ratio
    d1, d_inf = pnes.pssv_nongaussianity(1.0), pnes.asymptotic_nongaussianity().value
    assert (d1 / math.log(2)) / (d_inf / math.log(2)) == pytest.approx(d1 / d_inf, rel=1e-15)


# -- serialization ---------------------------------------------------------


@pytest.mark.parametrize(
    "d",
    [{"variant": "TWB", "y": 0.4}, {"variant": "PSSV", "y": 0.6}, {"variant": "custom", "coeffs": [0.6, 0.8]}],
)
def test_dict_round_trip(d):
    p = pnes.pnes_from_dict(d)
    q = pnes.pnes_from_dict(p.to_dict())
    assert q.variant == p.variant
    np.testing.assert_array_equal(q.coeffs, p.coeffs)


def test_dict_from_energy():
    p = pnes.pnes_from_dict({"variant": "PSSV", "N": 2.0})
    assert p.energy == pytest.approx(2.0, abs=1e-10)
    with pytest.raises(DomainError):
        pnes.pnes_from_dict({"variant": "TWB"})
