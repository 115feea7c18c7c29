import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import constants as sc
from scipy import integrate

from cqedquant import modes as md
from cqedquant import nonreciprocal as nr

CC, CJ, C_LINE, L_LINE, LENGTH = 40.3e-15, 5.13e-15, 249e-12, 623e-9, 4.7e-3
ALPHA = md.optimal_lengths(CJ + CC, 1.0, CC, C_LINE, L_LINE)[0]


def test_optimal_length_is_series_capacitance():
    assert math.isclose(ALPHA, CC * CJ / (CC + CJ) / C_LINE, rel_tol=1e-14)
    a, ib = md.optimal_lengths(CJ + CC, 1.0, CC, C_LINE, L_LINE, L_c=2e-9)
    assert a == ALPHA and math.isclose(ib, L_LINE / 2e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 1.0), st.floats(0.0, 50.0), st.sampled_from(["short", "open"]))
def test_roots_satisfy_secular_equation(alpha, inv_beta, far_end):
    spec = md.BoundarySpec(alpha, inv_beta, far_end=far_end)
    basis = md.solve_secular(spec, 1.0, 40)
    f = md._secular(spec, 1.0)
    scale = basis.k + alpha * basis.k**2 + inv_beta
    assert np.all(np.abs(f(basis.k)) < 1e-10 * scale)
    assert np.all(np.diff(basis.k) > 0) and basis.k[0] > 0


def test_large_k_asymptotics():
    basis = md.solve_secular(md.BoundarySpec(ALPHA), LENGTH, 4000)
    n = np.arange(len(basis.k))
    tail = slice(3000, None)
    # tan(kL) -> 1/(alpha k) once alpha k >> 1
    shift = basis.k[tail] * LENGTH - n[tail] * np.pi
    assert np.allclose(shift, 1 / (ALPHA * basis.k[tail]), rtol=1e-2)


def test_orthogonality_with_boundary_weight():
    L = 1.0
    alpha = 0.3
    basis = md.solve_secular(md.BoundarySpec(alpha), L, 6)
    gram = np.empty((6, 6))
    for i in range(6):
        for j in range(6):
            bulk = integrate.quad(lambda x: basis.mode_function(i, x) * basis.mode_function(j, x), 0, L,
                                  epsabs=1e-13, limit=200)[0]
            gram[i, j] = bulk + alpha * basis.u0[i] * basis.u0[j]
    assert np.allclose(gram, np.eye(6), atol=1e-10)


def test_line_coupling_maximum():
    basis = md.solve_secular(md.BoundarySpec(ALPHA), LENGTH, 300, velocity=1 / math.sqrt(L_LINE * C_LINE),
                             c=C_LINE)
    tab = md.coupling_spectrum(basis, CC, CJ, math.sqrt(L_LINE / C_LINE))
    assert abs(tab.argmax - 81) <= 1
    assert abs(tab.frequency_hz[tab.argmax] / 702.5e9 - 1) < 0.02
    assert abs(tab.cutoff_index - tab.argmax) <= 1


def test_first_sum_residual_halves():
    basis = md.solve_secular(md.BoundarySpec(ALPHA), LENGTH, 4000)
    rep = md.sum_rule_check(basis, [1000, 2000, 4000])
    assert 1.8 < rep.halving_ratio(0, 1) < 2.2
    assert 1.8 < rep.halving_ratio(1, 2) < 2.2
    assert np.allclose(rep.r1, rep.tail_estimate, rtol=0.05)
    assert np.all(rep.r2 == 1.0)


def test_second_sum_rule_with_inductor():
    L = 1.0
    basis = md.solve_secular(md.BoundarySpec(0.05, 2.0), L, 4000)
    rep = md.sum_rule_check(basis, [4000])
    # the completed second sum equals L / (beta + L); see the design notes
    assert abs((1 - rep.r2[0]) - L / (0.5 + L)) < 1e-4


def test_zero_alpha_first_sum_diverges():
    basis = md.solve_secular(md.BoundarySpec(0.0), 1.0, 100)
    assert md.sum_rule_check(basis).divergent


@pytest.mark.parametrize("alpha, inv_beta", [(0.1, 0.0), (0.02, 3.0), (1.0, 0.2)])
def test_continuum_normalization(alpha, inv_beta):
    cb = md.continuum_modes(alpha, inv_beta)
    assert math.isclose(cb.norm_integral, 1 / alpha, rel_tol=1e-6)
    if inv_beta > 0:
        assert math.isclose(cb.inverse_k2_integral, 1 / inv_beta, rel_tol=1e-6)


def test_spectral_density_limits():
    J = md.spectral_density(0.01, 0.0, 1.0, "charge")
    w = np.array([1e-3, 1e5])
    lo, hi = J(w)
    assert math.isclose(lo, 0.01**2 * 1e-9 / 1e-6, rel_tol=1e-3)
    assert math.isclose(hi, 1 / 1e5, rel_tol=1e-3)
    with pytest.raises(md.ModesError):
        md.spectral_density(0.01, 0.0, 1.0, "bogus")


@pytest.mark.parametrize("T", [0.0, 0.05, 0.5])
def test_endpoint_flux_forms_agree(T):
    fl = md.endpoint_fluctuations(80e-15, 10e-9, C_LINE, L_LINE, T=T)
    assert math.isclose(fl.flux2, fl.flux2_frequency_form, rel_tol=1e-8)
    assert fl.charge_divergent


def test_endpoint_flux_decoupled_limit():
    C, L = 80e-15, 10e-9
    # a very high impedance line barely loads the oscillator
    fl = md.endpoint_fluctuations(C, L, 1e-16, 1e-2)
    assert math.isclose(fl.flux2, sc.hbar * math.sqrt(L / C) / 2, rel_tol=1e-4)


def test_endpoint_charge_grows_with_cutoff():
    a = md.endpoint_fluctuations(80e-15, 10e-9, C_LINE, L_LINE, k_max=1e6)
    b = md.endpoint_fluctuations(80e-15, 10e-9, C_LINE, L_LINE, k_max=1e8)
    assert b.charge2 > a.charge2


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_telegrapher_matrix_is_minus_sigma_y(n, seed):
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.5, 3.0, n)
    X = rng.normal(size=(n, n))
    Y = X - X.T
    db = md.doubled_space_basis(d, Y)
    sigma_y = np.array([[0, -1j], [1j, 0]])
    assert np.allclose(db.t, -np.kron(sigma_y, np.eye(n)), atol=1e-10)
    assert np.all(db.m > 0)


def test_doubled_space_rejects_symmetric_admittance():
    with pytest.raises(md.ModesError, match="skew"):
        md.doubled_space_basis(np.ones(2), np.ones((2, 2)))


def test_projector_kernel_is_hermitian_pairing():
    A = 0.3 * np.eye(2)
    Binv = np.diag([1.0, 2.0])
    k12 = md.doubled_space_basis(np.ones(2), np.zeros((2, 2)), 1.0, A, Binv, 1.5).kernel
    k21 = md.doubled_space_basis(np.ones(2), np.zeros((2, 2)), 1.5, A, Binv, 1.0).kernel
    assert np.allclose(k12, k21.T)


def test_circulator_line_reduces_to_open_line_without_device():
    res = md.circulator_line_hamiltonian(np.zeros((3, 3)), C_LINE, L_LINE, LENGTH, ALPHA, 60)
    ref = md.solve_secular(md.BoundarySpec(ALPHA, far_end="open"), LENGTH, 20)
    coupled = np.abs(res.U_end) > 1e-8
    got_u = np.sqrt(2) * np.abs(res.U_end[coupled])[:20]
    assert np.allclose(got_u, ref.u0, rtol=1e-8)
    assert np.allclose(res.k[coupled][:20], ref.k, rtol=1e-8)


def test_circulator_lamb_shift_trace_is_monotone():
    Y = nr.cayley_admittance(nr.ScatteringDevice(np.roll(np.eye(3), 1, axis=0), 50.0))
    res = md.circulator_line_hamiltonian(Y, C_LINE, L_LINE, LENGTH, ALPHA, 300)
    tr = res.chi_trace()
    assert np.all(np.diff(tr) >= 0) and tr[-1] < 1


def test_galvanic_variant():
    spec = md.BoundarySpec(0.05, variant="galvanic")
    basis = md.solve_secular(spec, 1.0, 200)
    f = md._secular(spec, 1.0)
    assert np.all(np.abs(f(basis.k)) < 1e-9 * (1 + basis.k**2))
    r1 = md.sum_rule_check(basis).r1
    assert r1[-1] < r1[10] and r1[-1] > 0
    with pytest.raises(md.ModesError):
        md.BoundarySpec(0.05, variant="galvanic", far_end="open")


def test_modes_csv_layout():
    basis = md.solve_secular(md.BoundarySpec(ALPHA), LENGTH, 10)
    rows = list(csv.reader(io.StringIO(md.modes_csv(basis))))
    assert rows[0] == ["n", "k_per_m", "f_hz", "u0", "g_hz"]
    assert len(rows) == 11


def test_bad_inputs():
    with pytest.raises(md.ModesError):
        md.BoundarySpec(-1.0)
    with pytest.raises(md.ModesError):
        md.solve_secular(md.BoundarySpec(0.1), math.inf, 3)


@pytest.mark.parametrize("inv_beta", [5e-324, 1e-300, 1e-15])
def test_tiny_inductive_term_gives_soft_mode(inv_beta):
    basis = md.solve_secular(md.BoundarySpec(1.0, inv_beta, far_end="open"), 1.0, 3)
    assert math.isclose(basis.k[0], math.sqrt(inv_beta) / math.sqrt(2.0), rel_tol=1e-12)
    # the soft mode is flat: u^2 L + alpha u^2 = 1 with L = alpha = 1
    assert math.isclose(basis.u0[0], math.sqrt(0.5), rel_tol=1e-12)


def test_line_lengths_and_limits():
    assert abs(ALPHA * 1e6 - 18.3) < 0.1
    assert md.optimal_lengths(CJ, 1.0, 0.0, C_LINE, L_LINE)[0] == 0.0
    basis = md.solve_secular(md.BoundarySpec(0.0), 2.0, 10)
    assert np.allclose(basis.k, (2 * np.arange(10) + 1) * np.pi / 4, rtol=1e-13)


def test_asymptotic_root_offset():
    basis = md.solve_secular(md.BoundarySpec(ALPHA), LENGTH, 1001)
    n = 1000
    assert abs(basis.k[n] * LENGTH - n * np.pi - (LENGTH / ALPHA) / (n * np.pi)) < 1e-3


def test_coupling_growth_and_saturation():
    v = 1 / math.sqrt(L_LINE * C_LINE)
    basis = md.solve_secular(md.BoundarySpec(ALPHA), LENGTH, 8001, velocity=v, c=C_LINE)
    g = md.coupling_spectrum(basis, CC, CJ, math.sqrt(L_LINE / C_LINE)).g
    ratio = g[:6] / np.sqrt(basis.k[:6])
    assert np.all(np.abs(ratio / ratio[0] - 1) < 0.01)
    assert abs(g[4000] * math.sqrt(4000) / (g[8000] * math.sqrt(8000)) - 1) < 1e-2


def test_continuum_amplitude_limits():
    alpha, ib = 0.2, 0.5
    k = 1e-6
    assert math.isclose(md.continuum_amplitude(k, alpha, ib), math.sqrt(2 / np.pi) * k / ib, rel_tol=1e-6)
    k = 1e6
    assert math.isclose(md.continuum_amplitude(k, alpha, ib), math.sqrt(2 / np.pi) / (alpha * k), rel_tol=1e-6)
    cb = md.continuum_modes(ALPHA, 0.0, k_max=50 / ALPHA)
    assert abs(ALPHA * cb.norm_integral - 1) < 1e-3


def test_spectral_density_slopes():
    w = np.array([1e-4, 1e-2])
    J = md.spectral_density(0.01, 2.0, 1.0, "total")(w)
    assert abs(np.log(J[1] / J[0]) / np.log(w[1] / w[0]) - 1) < 0.02
    w = np.array([1e5, 1e7])
    J = md.spectral_density(0.01, 2.0, 1.0, "charge")(w)
    assert abs(np.log(J[1] / J[0]) / np.log(w[1] / w[0]) + 1) < 0.02
    # without capacitive coupling the flux density is Lorentz-Drude, peaked at v / beta
    w = np.linspace(0.01, 30, 300001)
    J = md.spectral_density(0.0, 2.0, 3.0, "flux")(w)
    assert abs(w[np.argmax(J)] - 6.0) < 1e-3


def test_thermal_kernel_zero_temperature_limit():
    assert np.allclose(md._coth_kernel(np.array([50.0, 1e3])), 1.0)
    assert math.isclose(float(md._coth_kernel(0.1)), 1 / math.tanh(0.1))


def test_orthonormalization_matrix_closed_forms():
    assert np.allclose(md.doubled_space_basis(np.ones(3), np.zeros((3, 3))).m, 1.0)
    y = 0.7
    db = md.doubled_space_basis(np.ones(2), y * np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert np.allclose(db.m, 1 + y * y)


def test_projector_kernel_without_device_has_empty_blocks():
    n = 2
    k = md.doubled_space_basis(np.ones(n), np.zeros((n, n)), 1.0, 0.3 * np.eye(n), np.diag([1.0, 2.0]), 1.5).kernel
    assert np.all(k[:n, :] == 0) and np.all(k[:, :n] == 0)
    assert np.all(np.abs(np.diag(k[n:, n:])) > 0)


def test_circulator_endpoint_amplitudes_decay_as_inverse_n():
    Y = nr.cayley_admittance(nr.ScatteringDevice(np.roll(np.eye(3), 1, axis=0), 50.0))
    res = md.circulator_line_hamiltonian(Y, C_LINE, L_LINE, LENGTH, ALPHA, 600)
    nu = np.arange(1, 601) * np.abs(res.U_end)
    assert abs(nu[-1] / nu[499] - 1) < 0.05
    assert nu.max() < 1.1 * nu[-1]
