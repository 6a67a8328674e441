import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scldpc.channels import BAWGN, BEC, channel_entropy
from scldpc.coupling import CoupledSpec
from scldpc.density import GridSpec
from scldpc.ebp import (AnchorError, MaxwellError, anchored_fp, curve_area, curve_csv,
                        default_anchors, fp_profile_report, is_unimodal, maxwell_bound,
                        profile_csv, trace_ebp, uncoupled_stable_entropy)
from scldpc.errors import SpecError

UNC = CoupledSpec.uncoupled(3, 6)
MID = GridSpec(25.0, 512)


def branch(x, l=3, r=6):
    """Closed-form BEC fixed-point family of the uncoupled (l, r) ensemble."""
    y = 1 - (1 - x) ** (r - 1)
    return x / y ** (l - 1), y ** l


@given(st.floats(0.01, 1.0))
def test_bec_branch_oracle(x):
    pt = anchored_fp(BEC, UNC, x, tol=1e-14)
    eps, g = branch(x)
    assert pt.param_value == pytest.approx(eps, abs=1e-9)
    assert pt.g_value == pytest.approx(g, abs=1e-9)
    assert pt.h_channel == pt.param_value


def test_extended_bec_points_are_not_channels():
    pt = anchored_fp(BEC, UNC, 0.02)
    assert pt.param_value > 1 and not pt.physical
    with pytest.raises(ValueError):
        pt.param


def test_bec_area_theorem():
    curve = trace_ebp(BEC, UNC, default_anchors(400))
    assert curve_area(curve) == pytest.approx(0.5, abs=2e-3)
    assert not curve.gaps


def test_bec_maxwell_bound_uncoupled():
    curve = trace_ebp(BEC, UNC, default_anchors(400))
    assert maxwell_bound(curve, 0.5) == pytest.approx(0.48815, abs=5e-4)


def test_maxwell_rectangle_exact():
    pts = [(0.0, 0.0), (0.4, 0.0), (0.4, 1.0), (1.0, 1.0)]
    assert maxwell_bound(pts, 0.3) == 0.7
    assert maxwell_bound(pts, 0.6) == 0.4
    with pytest.raises(MaxwellError):
        maxwell_bound(pts, 0.61)
    with pytest.raises(MaxwellError):
        maxwell_bound([(0.0, 0.0), (0.9, 0.9)], 0.3)


def test_maxwell_with_backtracking_branch():
    # S-shaped curve: leftward, back right, then vertical; signed area counts
    pts = [(0.2, 0.0), (0.2, 0.5), (0.1, 0.6), (0.5, 1.0), (1.0, 1.0)]
    assert maxwell_bound(pts, 0.5) == pytest.approx(0.5, abs=1e-15)


@given(st.floats(0.05, 0.49))
def test_maxwell_linear_curve(rate):
    # curve g = h from (1, 1): area from 1 to m is (1 - m^2)/2
    h = np.linspace(0, 1, 2001)
    m = maxwell_bound(np.column_stack([h, h]), rate)
    assert m == pytest.approx(math.sqrt(1 - 2 * rate), abs=1e-6)


def test_trivial_anchor():
    pt = anchored_fp(BAWGN, UNC, 1.0, grid=MID)
    assert math.isinf(pt.param_value) and pt.h_channel == 1.0 and pt.g_value == 1.0


def test_bawgn_anchor_unreachable():
    with pytest.raises(AnchorError):
        anchored_fp(BAWGN, UNC, 0.02, grid=MID)


def test_family_validation():
    with pytest.raises(SpecError):
        anchored_fp("BSC", UNC, 0.4)
    with pytest.raises(ValueError):
        anchored_fp(BEC, UNC, 0.0)


def test_bawgn_point_is_consistent():
    pt = anchored_fp(BAWGN, UNC, 0.3, grid=MID)
    assert pt.converged
    assert float(np.mean(pt.fp_summary)) == pytest.approx(0.3, abs=1e-8)
    assert pt.h_channel == pytest.approx(channel_entropy(pt.param), abs=1e-15)
    assert 0 < pt.g_value < 1


def test_warm_and_cold_traces_agree():
    anchors = [0.25, 0.3, 0.4, 0.6]
    warm = trace_ebp(BAWGN, UNC, anchors, grid=MID, warm=True)
    cold = trace_ebp(BAWGN, UNC, anchors, grid=MID, warm=False)
    hw, gw = warm.arrays()
    hc, gc = cold.arrays()
    assert np.allclose(hw, hc, atol=1e-6) and np.allclose(gw, gc, atol=1e-6)


def test_bawgn_curve_leftmost_point_near_bp_threshold():
    curve = trace_ebp(BAWGN, UNC, np.linspace(0.1, 1.0, 46), grid=MID)
    h, g = curve.arrays()
    assert h.min() == pytest.approx(0.4291, abs=3e-3)
    assert h[-1] == 1.0 and g[-1] == 1.0


def test_coupled_bec_curve_has_vertical_part_near_map():
    spec = CoupledSpec.line(3, 6, 8, 3)
    curve = trace_ebp(BEC, spec, np.linspace(0.02, 1.0, 50))
    h, _ = curve.arrays()
    assert np.sum(np.abs(h - 0.4882) < 2e-3) >= 5


def test_is_unimodal():
    assert is_unimodal([0, 1, 2, 2, 1, 0])
    assert is_unimodal([3, 2, 1])
    assert not is_unimodal([0, 2, 1, 2, 0])
    assert is_unimodal([])


def test_profile_report_on_bec():
    spec = CoupledSpec.line(3, 6, 16, 3)
    stable = uncoupled_stable_entropy(BEC, 0.48815, spec)
    pt = anchored_fp(BEC, spec, 0.6 * stable, tol=1e-13)
    rep = fp_profile_report(pt, spec)
    assert rep.unimodal
    assert rep.boundary_entropy < 0.1
    assert rep.middle_gap < 2e-3
    text = profile_csv(rep)
    assert text.splitlines()[0] == "position,entropy" and len(text.splitlines()) == 34


def test_curve_csv_format():
    curve = trace_ebp(BEC, UNC, [0.5, 1.0])
    lines = curve_csv(curve).splitlines()
    assert lines[0] == "anchor,param_value,h_channel,g_value,residual"
    assert lines[1].startswith("0.5000000000,")
