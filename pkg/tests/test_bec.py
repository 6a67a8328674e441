import numpy as np
import pytest
from hypothesis import given, strategies as st

from scldpc.bec import (MAX_ITERS, STALLED, TO_ZERO, bec_bp_threshold, bec_de_step, bec_run,
                        effective_erasure)
from scldpc.coupling import CoupledSpec, compile_graph
from scldpc.errors import NoBracketError

UNC = CoupledSpec.uncoupled(3, 6)
LINE16 = CoupledSpec.line(3, 6, 16, 3)


def line_step_reference(eps, x, l, r, L, w):
    """Direct transcription of the coupled erasure recursion, zeros outside."""
    S = 2 * L + 1
    pad = np.concatenate([np.zeros(w - 1), x, np.zeros(w - 1)])
    out = np.empty(S)
    for i in range(S):
        acc = 0.0
        for j in range(w):
            inner = sum(pad[i + j - k + w - 1] for k in range(w)) / w
            acc += 1 - (1 - inner) ** (r - 1)
        out[i] = eps * (acc / w) ** (l - 1)
    return out


@given(st.floats(0, 1), st.floats(0, 1))
def test_uncoupled_step_closed_form(eps, x):
    got = bec_de_step(eps, [x], UNC)[0]
    assert got == pytest.approx(eps * (1 - (1 - x) ** 5) ** 2, abs=1e-15)


@given(st.floats(0, 1), st.lists(st.floats(0, 1), min_size=9, max_size=9))
def test_line_step_matches_reference(eps, x):
    spec = CoupledSpec.line(3, 6, 4, 3)
    got = bec_de_step(eps, x, spec)
    assert np.allclose(got, line_step_reference(eps, np.array(x), 3, 6, 4, 3), atol=1e-14)


@given(st.floats(0, 1), st.lists(st.floats(0, 1), min_size=7, max_size=7), st.integers(1, 4))
def test_step_is_monotone(eps, x, bump):
    spec = CoupledSpec.circular(3, 6, 7, 3)
    x = np.array(x)
    y = np.minimum(x + 0.1 * bump / 4, 1.0)
    assert np.all(bec_de_step(eps, y, spec) >= bec_de_step(eps, x, spec) - 1e-15)


def test_stop_reasons():
    assert bec_run(0.40, UNC).stop_reason == TO_ZERO
    assert bec_run(0.45, UNC).stop_reason == STALLED
    assert bec_run(0.48, LINE16).stop_reason == TO_ZERO
    assert bec_run(0.495, LINE16).stop_reason == STALLED
    assert bec_run(0.48, LINE16, max_iters=5).stop_reason == MAX_ITERS


def test_uncoupled_fixed_point_is_fixed():
    run = bec_run(0.45, UNC, tol=1e-14, max_iters=10**6)
    x = run.x[0]
    assert x == pytest.approx(0.45 * (1 - (1 - x) ** 5) ** 2, abs=1e-12)


def test_trajectory_monotone_from_all_erased():
    x = np.ones(33)
    for _ in range(200):
        nxt = bec_de_step(0.49, x, LINE16)
        assert np.all(nxt <= x + 1e-15)
        x = nxt


def test_thresholds():
    assert bec_bp_threshold(UNC) == pytest.approx(0.4294, abs=5e-4)
    assert bec_bp_threshold(LINE16) == pytest.approx(0.48815, abs=5e-4)


def test_threshold_bracket_errors():
    with pytest.raises(NoBracketError):
        bec_bp_threshold(UNC, lo=0.45)
    with pytest.raises(NoBracketError):
        bec_bp_threshold(UNC, hi=0.4)


def test_effective_erasure_override():
    spec = CoupledSpec.circular(3, 6, 5, 3, kappa=[0.5, 0, 0, 0, 0])
    g = compile_graph(spec)
    assert np.allclose(effective_erasure(0.4, g), [0.2, 0.4, 0.4, 0.4, 0.4])
    assert np.allclose(effective_erasure(0.4, g, {1: 0.1}), [0.2, 0.1, 0.4, 0.4, 0.4])


def test_known_sections_help():
    spec = CoupledSpec.circular(3, 6, 30, 3)
    plain = bec_run(0.47, spec)
    assert not plain.decoded
    seeded = bec_run(0.47, spec, delta={0: 0.0, 1: 0.0}, max_iters=10**5)
    assert seeded.decoded


def test_one_sided_threshold_close_to_line():
    eps = bec_bp_threshold(CoupledSpec.one_sided(3, 6, 25, 3), tol=1e-4, max_iters=10**5)
    assert eps == pytest.approx(0.488, abs=1e-3)


def test_input_validation():
    with pytest.raises(ValueError):
        bec_de_step(0.4, [0.5, 0.5], UNC)
    with pytest.raises(ValueError):
        bec_de_step(0.4, [1.5], UNC)
