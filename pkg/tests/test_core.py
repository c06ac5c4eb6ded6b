import pytest
from hypothesis import given, strategies as st

from hybridspin.core import (
    GaussianMoments,
    ParameterError,
    ProtocolParams,
    ProtocolStage,
    StageTag,
    initial_scs,
    rotate_half_pi,
)


def test_initial_scs_is_vacuum():
    m = initial_scs()
    assert m.var_x == 0.5
    assert m.var_p == 0.5
    assert m.uncertainty_product == 0.25


def test_rotation_swaps_quadratures():
    assert rotate_half_pi(GaussianMoments(0.1, 0.9)) == GaussianMoments(0.9, 0.1)
    assert rotate_half_pi(GaussianMoments(0.5, 0.5)) == GaussianMoments(0.5, 0.5)


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_rotation_is_involution(vx, vp):
    m = GaussianMoments(vx, vp)
    assert rotate_half_pi(rotate_half_pi(m)) == m


def test_moments_require_positive_variances():
    with pytest.raises(ValueError):
        GaussianMoments(0.0, 0.5)
    with pytest.raises(ValueError):
        GaussianMoments(0.5, -1.0)


def test_params_validation_reports_every_violation():
    with pytest.raises(ParameterError) as exc:
        ProtocolParams(kappa=-1.0, gamma=-2.0, n_atoms=0, eta=1.5,
                       t1=-0.1, t2=-0.2, p_threshold=1.0)
    violations = exc.value.violations
    for field in ("kappa", "gamma", "n_atoms", "eta", "t1", "t2", "p_threshold"):
        assert any(field in v for v in violations), field
    assert len(violations) >= 7


def test_params_need_some_drive():
    with pytest.raises(ParameterError):
        ProtocolParams(kappa=0.0, gamma=0.0, n_atoms=10)
    ProtocolParams(kappa=0.0, gamma=1.0, n_atoms=10)
    ProtocolParams(kappa=1.0, gamma=0.0, n_atoms=10)


def test_params_with_times():
    p = ProtocolParams(kappa=1.0, gamma=1.0, n_atoms=500)
    q = p.with_times(t1=0.3, t2=0.1)
    assert (q.t1, q.t2) == (0.3, 0.1)
    assert q.kappa == p.kappa
    with pytest.raises(ParameterError):
        p.with_times(t1=-1.0)


def test_stage_machine_happy_path():
    s = ProtocolStage()
    s = s.advance(StageTag.PHASE_I, 0.4)
    s = s.advance(StageTag.ROTATED)
    s = s.advance(StageTag.PHASE_II, 0.1)
    s = s.advance(StageTag.POST_CLICK)
    assert s.tag is StageTag.POST_CLICK
    assert s.elapsed == pytest.approx(0.5)


def test_stage_machine_rejects_skips_and_backwards():
    s = ProtocolStage()
    with pytest.raises(ValueError):
        s.advance(StageTag.ROTATED)
    s2 = s.advance(StageTag.PHASE_I, 0.1)
    with pytest.raises(ValueError):
        s2.advance(StageTag.INITIAL)
    with pytest.raises(ValueError):
        s2.advance(StageTag.ROTATED, -0.5)
