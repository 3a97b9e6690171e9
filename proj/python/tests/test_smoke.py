import math

import pytest

spintk = pytest.importorskip("spintk")


def test_zero_field_lines():
    sys = spintk.SpinSystem()
    sys.i_nuclear = 0.0
    sys.d_mhz = 560.0
    sys.e_mhz = 60.0
    sys.axis_polar_deg = 0.0
    lines = spintk.transitions(sys, unpolarized=True)
    assert [round(t["freq_mhz"], 9) for t in lines] == [500.0, 620.0]


def test_preset_doublets():
    nu1 = spintk.preset_family("nu1").system
    assert spintk.degeneracy_census(nu1) == [2] * 6
    assert spintk.degeneracy_census(nu1, [0.0, 0.0, 6.7]) == [1] * 12


def test_hamiltonian_is_hermitian():
    h = spintk.hamiltonian(spintk.preset_family("nu2").system, [1.0, 2.0, 3.0])
    assert h.shape == (12, 12)
    assert abs(h - h.conj().T).max() < 1e-12


def test_rate_model_contrast():
    m = spintk.RateModel.fig1f_default()
    w = m.pl_weights()
    with_rf = float(w @ spintk.steady_state(m))
    without = float(w @ spintk.steady_state(m.with_rf(0.0)))
    assert with_rf > without


def test_ramsey_roundtrip():
    tau = spintk.uniform_grid(0.0, 4000.0, 10.0)
    c = spintk.ramsey_closed_form(0.5, 0.5, 1.6, 10.1, 2.0, tau)
    fit = spintk.fit_ramsey(tau, c)
    assert fit["converged"]
    assert abs(fit["values"]["f1_mhz"] - 1.6) < 1e-6
    assert abs(fit["values"]["f2_mhz"] - 10.1) < 1e-6


def test_exponential_fit():
    t = [20.0 * i for i in range(201)]
    y = [0.94 * math.exp(-x / 660.0) + 0.06 for x in t]
    fit = spintk.fit_exponential(t, y)
    assert abs(fit["values"]["t_const"] - 660.0) < 1e-6


def test_debye_waller_uniform_half():
    wl = [1250.0 + 0.5 * i for i in range(601)]
    dw = spintk.debye_waller(wl, [1.0] * len(wl), zpl_center_nm=1350.0, zpl_half_width_nm=50.0,
                             total_min_nm=1300.0, total_max_nm=1500.0)
    assert abs(dw - 0.5) < 1e-12


def test_cli_presets():
    code, out, err = spintk.run_cli(["presets"])
    assert code == 0 and "nu1" in out and err == ""
    code, _, err = spintk.run_cli(["no-such-command"])
    assert code == 1 and err


def test_errors_are_python_exceptions():
    with pytest.raises(ValueError):
        spintk.preset_family("nu9")
