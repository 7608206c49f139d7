import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blackstart.grid_model import HvdcTerminal
from blackstart.hvdc import (
    InfeasibleDispatch,
    NoRealRoot,
    build_profile,
    converter_reactive,
    dc_ceiling,
    dispatch,
    filter_output,
    operating_point,
    solve_current,
    startup_gate,
    startup_mode_quantities,
)
from blackstart.strength import StrengthSnapshot, ZeroDcPower, ZeroImpedance, frc, scc, scr


def term(**kw):
    base = dict(node=39, rated_power=1000.0, filter_min=120.0, transformer_reactance=0.1545,
                transformer_emf=0.8889, ideal_no_load_voltage=1.2, extinction_angle=17.0)
    base.update(kw)
    return HvdcTerminal(**base)


def test_scc():
    assert scc(0.058790j, 1.0, 100.0) == pytest.approx(1700.97, abs=0.01)
    assert scc(1j, 1.0, 100.0) == 100.0
    assert scc(1j, 0.0) == 0.0
    with pytest.raises(ZeroImpedance):
        scc(0j)


def test_frc(ieee39):
    assert frc([]) == 0
    pair = [ieee39.generator(31), ieee39.generator(32)]
    assert frc(pair) == pytest.approx(600 / 7.94 + 650 / 7.94)
    assert frc(pair) == pytest.approx(157.43, abs=0.01)
    every = sum(g.rated_power / g.freq_coeff for g in ieee39.generators)
    assert frc(ieee39.generators) == pytest.approx(every)


def test_scr():
    assert scr(1700.97, 566.99) == pytest.approx(3.0, abs=1e-4)
    assert scr(2243.74, 747.91) == pytest.approx(3.0, abs=1e-4)
    with pytest.raises(ZeroDcPower):
        scr(100.0, 0.0)


@given(st.floats(1e-4, 10.0), st.floats(1.0, 5000.0))
def test_scr_identity(x, p):
    s = scc(complex(0.0, x), 1.0, 100.0)
    assert scr(s, p) * p == pytest.approx(s, rel=1e-15)


def test_ceiling():
    assert dc_ceiling(1700.97) == pytest.approx(566.99, abs=0.01)
    assert dc_ceiling(2243.74) == pytest.approx(747.91, abs=0.01)
    assert dc_ceiling(0.0) == 0.0
    with pytest.raises(ValueError):
        dc_ceiling(100.0, 2.0)


def test_gate():
    floors = (850.0, 70.0)
    assert not startup_gate(StrengthSnapshot(70.0, 832.92, 200.0), floors, True)
    assert startup_gate(StrengthSnapshot(105.0, 1700.97, 200.0), floors, True)
    assert not startup_gate(StrengthSnapshot(105.0, 1e6, 1e6), floors, False)
    assert not startup_gate(StrengthSnapshot(105.0, 1e6, 69.9), floors, True)


def test_startup_mode():
    q = startup_mode_quantities(term(ideal_no_load_voltage=1.0))
    assert (q.u_d, q.i_d) == (0.7, 0.1)
    assert q.p_d == 70.0
    assert q.q_d == pytest.approx(70.0 * math.sqrt(1 / 0.49 - 1), abs=1e-9)
    assert q.q_d == pytest.approx(71.41, abs=0.01)
    assert converter_reactive(50.0, 1.2, 1.2) == 0.0


def test_dispatch_ceiling_binds():
    t = term()
    d = dispatch(t, 1937.88, True)
    assert d.p_d == pytest.approx(645.95, abs=0.01)
    assert dispatch(t, 1937.88, False) == (dispatch(t, 0.0, False))
    off = dispatch(t, 1937.88, False)
    assert (off.p_d, off.q_d, off.i_d) == (0.0, 0.0, 0.0)
    assert dispatch(t, 1e6, True).p_d == 1000.0
    assert dispatch(t, 1e6, True, balance_cap=200.0).p_d == 200.0
    assert dispatch(t, 1e6, True, balance_cap=1.0).p_d == t.min_power


def test_dispatch_below_minimum():
    with pytest.raises(InfeasibleDispatch):
        dispatch(term(), 3 * 34.0, True)


def test_no_real_root():
    with pytest.raises(NoRealRoot):
        solve_current(term(), 1000.0, ac_voltage=0.2)


@given(st.floats(35.0, 1000.0), st.floats(0.9, 1.1))
def test_converter_self_consistency(p, u):
    t = term()
    d = operating_point(t, p, u)
    a = 3 / math.pi * t.transformer_reactance
    b = 1.35 * t.transformer_emf * u * math.cos(math.radians(t.extinction_angle))
    rebuilt = t.bridges * (b * d.i_d - a * d.i_d**2) * t.rated_power
    assert rebuilt == pytest.approx(p, rel=1e-6)
    assert d.u_d * d.i_d * t.rated_power == pytest.approx(p, rel=1e-12)
    # smaller root: the larger one lies beyond the characteristic's peak
    assert d.i_d <= b / (2 * a) + 1e-12


@given(st.floats(0.0, 6000.0), st.floats(0.0, 6000.0))
def test_dispatch_monotone_in_scc(s1, s2):
    t = term()
    lo, hi = sorted((s1, s2))
    if dc_ceiling(lo) < t.min_power:
        return
    assert dispatch(t, lo, True).p_d <= dispatch(t, hi, True).p_d


def test_filter_banks():
    t = term()
    assert filter_output(t, 0.0, 0.0) == 0.0
    assert filter_output(t, 70.0, 100.0) == 120.0
    assert filter_output(t, 500.0, 250.0) == 360.0
    staged = term(filter_schedule=((300.0, 100.0), (600.0, 150.0)))
    assert filter_output(staged, 400.0, 0.0) == 220.0
    assert filter_output(staged, 700.0, 0.0) == 370.0


def test_profile():
    assert build_profile([]).steps == ((0.0, 0.0),)
    prof = build_profile([(0, 0.0), (5, 0.0), (10, 300.0), (15, 300.0), (20, 350.0)])
    assert prof.steps == ((0, 0.0), (10, 300.0), (20, 350.0))
    assert prof.ceiling_at(12) == 300.0
