import numpy as np
import pytest

from fracobstacle import obstacle as ob

from conftest import make_spec


def test_discrete_operator_is_m_matrix_and_matvec():
    spec = make_spec(n=129, b=0.3)
    op = ob.DiscreteOperator(spec)
    assert op.is_m_matrix
    v = np.sin(spec.grid.x) * np.exp(-spec.grid.x**2)
    assert np.allclose(op.matvec(v), op.matrix @ v, atol=1e-11)


def test_beta_and_gamma():
    assert ob.beta_eps(np.array([-3.0, 0.0, 2.0]), 0.1).tolist() == [0.0, 0.0, 20.0]
    with pytest.raises(ValueError):
        ob.beta_eps(1.0, 0.0)
    assert ob.gamma_eps(np.array([1.0, 0.0]), np.array([0.5, 2.0]), 0.5).tolist() == [2.0, 4.0]


def test_penalized_state_invariants():
    spec = make_spec(n=129, b=0.3)
    st = ob.penalized_solve(spec, 1e-2)
    assert st.monotone and st.bounded
    for prev, nxt in zip(st.iterates, st.iterates[1:]):
        assert np.all(nxt >= prev - 1e-10)
    assert st.beta_term.max() <= st.lphi_pos + 1e-6


def test_negative_obstacle_trivial():
    spec = make_spec(n=65, obstacle="negative")
    sol = ob.obstacle_solve(spec)
    assert not sol.u.values.any()
    assert not sol.contact_mask.any()
    assert sol.comp_residual == 0.0


def test_contact_interval_inside_support_and_drift_shift():
    kw = dict(n=65, s=0.75)
    no_drift = ob.lcp_oracle(make_spec(b=0.0, **kw))
    drift = ob.lcp_oracle(make_spec(b=0.5, **kw))
    (i0, i1), = no_drift.contact_intervals()
    x = no_drift.grid.x
    assert -2 < x[i0] <= x[i1] < 2
    (j0, j1), = drift.contact_intervals()
    centre = lambda a, b: 0.5 * (x[a] + x[b])
    # the drift transports mass to the right, so the contact set moves to the left
    assert centre(j0, j1) < centre(i0, i1)


@pytest.mark.parametrize("b", [0.0, 0.3])
def test_active_set_agrees_with_oracle(b):
    spec = make_spec(n=65, b=b)
    orc = ob.lcp_oracle(spec)
    act = ob.lcp_active_set(spec)
    assert np.max(np.abs(orc.u.values - act.u.values)) < 1e-8
    assert np.array_equal(orc.contact_mask, act.contact_mask)


def test_newton_matches_picard():
    spec = make_spec(n=129, b=0.3)
    p = ob.obstacle_solve(spec, method="picard")
    n = ob.obstacle_solve(spec, method="newton")
    # Picard contracts by ~(1 - c eps), so its step tolerance 1e-9 leaves an
    # error up to ~tol / (c eps) = 1e-5 at eps = 1e-4
    assert np.max(np.abs(p.u.values - n.u.values)) < 2e-5


def test_oracle_size_guard():
    with pytest.raises(ValueError):
        ob.lcp_oracle(make_spec(n=257))


def test_schedule_validation():
    spec = make_spec(n=65)
    with pytest.raises(ValueError):
        ob.obstacle_solve(spec, eps_schedule=[1e-2, 1e-1])
