import numpy as np
import pytest

from nahmkn import liecore, modulimap, nahmflow

T = liecore.su2_basis()
I2 = np.eye(2, dtype=complex)
ZERO = np.zeros((3, 2, 2), dtype=complex)
STEP = 1 / 1024


def origin():
    return modulimap.ModuliPoint(k=I2, x=ZERO)


def random_point(rng, max_norm=0.9, k_angle=1.5):
    while True:
        x = liecore.random_triple(rng, 2, norm=rng.uniform(0.1, max_norm))
        if nahmflow.integrate_reduced(x, 1 / 256).status == nahmflow.COMPLETE:
            return modulimap.ModuliPoint(
                k=liecore.random_unitary(rng, 2, max_angle=k_angle), x=x
            )


def test_chart_fixes_origin():
    q = modulimap.moduli_to_cotangent(origin(), STEP)
    assert liecore.frob(q.g - I2) < 1e-14
    assert liecore.frob(q.y) < 1e-14


def test_chart_on_zero_triple(rng):
    # with P = 0 the holonomy equation is g' = g Y0, so the chart fixes (k, 0)
    y = liecore.random_algebra(rng, 2, norm=1.1)
    k = liecore.group_exp(y)
    q = modulimap.moduli_to_cotangent(modulimap.ModuliPoint(k=k, x=ZERO), STEP)
    assert liecore.frob(q.g - k) < 1e-10
    assert liecore.frob(q.y) < 1e-14


def _independent_joint_flow(y0, x, n_steps):
    """Test-side RK4 for the coupled system, written from scratch."""
    h = 1.0 / n_steps
    p = x.astype(complex).copy()
    g = np.eye(x.shape[1], dtype=complex)

    def rhs(t, state):
        p_, g_ = state
        dp = np.stack([
            -(p_[1] @ p_[2] - p_[2] @ p_[1]),
            -(p_[2] @ p_[0] - p_[0] @ p_[2]),
            -(p_[0] @ p_[1] - p_[1] @ p_[0]),
        ])
        import scipy.linalg as sla
        e = sla.expm(-t * y0)
        alpha = y0 + 1j * (e @ p_[0] @ e.conj().T)
        return dp, g_ @ alpha

    state = (p, g)
    for k in range(n_steps):
        t = k * h
        k1 = rhs(t, state)
        k2 = rhs(t + h / 2, (state[0] + h / 2 * k1[0], state[1] + h / 2 * k1[1]))
        k3 = rhs(t + h / 2, (state[0] + h / 2 * k2[0], state[1] + h / 2 * k2[1]))
        k4 = rhs(t + h, (state[0] + h * k3[0], state[1] + h * k3[1]))
        state = (
            state[0] + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            state[1] + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        )
    return state


def test_chart_against_independent_integration(rng):
    point = random_point(rng)
    y0 = liecore.log_principal(point.k)
    q = modulimap.moduli_to_cotangent(point, STEP)
    _, g_ref = _independent_joint_flow(y0, point.x, 2048)
    assert liecore.frob(q.g - g_ref) < 1e-8
    assert liecore.frob(q.y - (point.x[1] + 1j * point.x[2])) < 1e-14


def test_chart_against_complex_flow_transport(rng):
    # the complexified pair (alpha, beta) built from the chart data must
    # transport beta by the holonomy: integrating beta' = [beta, alpha]
    # backward from t = 1 recovers X2 + i X3 at t = 0
    point = random_point(rng)
    grid, p_traj, g_traj, y0 = modulimap.chart_trajectory(point, 1 / 2048)
    n_steps = grid.shape[0] - 1
    h = 1.0 / n_steps
    import scipy.linalg as sla

    def alpha(t, p1):
        e = sla.expm(-t * y0)
        return y0 + 1j * (e @ p1 @ e.conj().T)

    beta_end = sla.expm(-y0) @ (p_traj[-1, 1] + 1j * p_traj[-1, 2]) @ sla.expm(y0)
    beta = beta_end.copy()
    for k in range(n_steps, 0, -1):
        t = k * h
        # cubic-midpoint interpolation is overkill: reuse exact P1 nodes and
        # a backward RK4 with midpoint averaging of the two adjacent nodes
        p1_hi, p1_lo = p_traj[k, 0], p_traj[k - 1, 0]
        p1_mid = 0.5 * (p1_hi + p1_lo)
        a1, am, a0 = alpha(t, p1_hi), alpha(t - h / 2, p1_mid), alpha(t - h, p1_lo)
        k1 = beta @ a1 - a1 @ beta
        b2 = beta - h / 2 * k1
        k2 = b2 @ am - am @ b2
        b3 = beta - h / 2 * k2
        k3 = b3 @ am - am @ b3
        b4 = beta - h * k3
        k4 = b4 @ a0 - a0 @ b4
        beta = beta - h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert liecore.frob(beta - (point.x[1] + 1j * point.x[2])) < 1e-6


def test_chart_branch_independence():
    # eigenangles near +-pi: compare the principal branch against the other
    # traceless logarithm of the same unitary
    theta = np.pi - 0.05
    y_main = np.diag([-1j * theta, 1j * theta])
    y_alt = np.diag([1j * (2 * np.pi - theta), -1j * (2 * np.pi - theta)])
    k = liecore.group_exp(y_main)
    assert liecore.frob(liecore.group_exp(y_alt) - k) < 1e-12
    x = 0.6 * T
    point = modulimap.ModuliPoint(k=k, x=x)
    q_main = modulimap.moduli_to_cotangent(point, STEP, log_branch=y_main)
    q_alt = modulimap.moduli_to_cotangent(point, STEP, log_branch=y_alt)
    assert liecore.frob(q_main.g - q_alt.g) < 1e-8


def test_chart_equivariance(rng):
    point = random_point(rng)
    k1 = liecore.random_unitary(rng, 2)
    k2 = liecore.random_unitary(rng, 2)
    q = modulimap.moduli_to_cotangent(point, STEP)
    moved = modulimap.ModuliPoint(
        k=k1 @ point.k @ k2.conj().T, x=liecore.adjoint3(k1, point.x)
    )
    q_moved = modulimap.moduli_to_cotangent(moved, STEP)
    assert liecore.frob(q_moved.g - k1 @ q.g @ k2.conj().T) < 1e-8
    assert liecore.frob(q_moved.y - liecore.adjoint(k1, q.y)) < 1e-8


def test_chart_domain_error():
    with pytest.raises(modulimap.DomainError):
        modulimap.moduli_to_cotangent(
            modulimap.ModuliPoint(k=I2, x=-1.5 * T), 1 / 64
        )


def test_derivative_at_origin(rng):
    for _ in range(5):
        v = np.stack([liecore.random_algebra(rng, 2, norm=1.0) for _ in range(4)])
        dg, dy = modulimap.moduli_to_cotangent_derivative(origin(), v, STEP)
        assert liecore.frob(dg - (v[0] + 1j * v[1])) < 1e-6
        assert liecore.frob(dy - (v[2] + 1j * v[3])) < 1e-12
    dg, dy = modulimap.moduli_to_cotangent_derivative(
        origin(), np.zeros((4, 2, 2), dtype=complex), STEP
    )
    assert liecore.frob(dg) == 0.0 and liecore.frob(dy) == 0.0


def test_derivative_matches_finite_differences(rng):
    point = random_point(rng)
    v = np.stack([liecore.random_algebra(rng, 2, norm=1.0) for _ in range(4)])
    dg, dy = modulimap.moduli_to_cotangent_derivative(point, v, STEP)
    eps = 1e-5

    def chart_at(s):
        k = liecore.group_exp(s * v[0]) @ point.k
        k = k / np.linalg.det(k) ** 0.5
        return modulimap.moduli_to_cotangent(
            modulimap.ModuliPoint(k=k, x=point.x + s * v[1:]), STEP
        )

    qp, qm, q0 = chart_at(eps), chart_at(-eps), chart_at(0.0)
    dg_fd = (qp.g - qm.g) / (2 * eps) @ np.linalg.inv(q0.g)
    dy_fd = (qp.y - qm.y) / (2 * eps)
    assert liecore.frob(dg - dg_fd) < 1e-6
    assert liecore.frob(dy - dy_fd) < 1e-6


def test_inverse_fixes_origin():
    point, info = modulimap.cotangent_to_moduli(
        modulimap.CotangentPoint(g=I2, y=np.zeros((2, 2))), STEP
    )
    assert liecore.frob(point.k - I2) < 1e-10
    assert np.abs(point.x).max() < 1e-10
    assert info.residual < 1e-9


def test_inverse_on_unitary_fiberless_point(rng):
    y = liecore.random_algebra(rng, 2, norm=1.0)
    q = modulimap.CotangentPoint(g=liecore.group_exp(y), y=np.zeros((2, 2)))
    point, _ = modulimap.cotangent_to_moduli(q, STEP)
    assert liecore.frob(point.k - liecore.group_exp(y)) < 1e-8
    assert np.abs(point.x).max() < 1e-8


def test_inverse_round_trips(rng):
    for _ in range(10):
        point = random_point(rng)
        q = modulimap.moduli_to_cotangent(point, STEP)
        back, info = modulimap.cotangent_to_moduli(q, STEP)
        assert np.abs(back.k - point.k).max() < 1e-8
        assert np.abs(back.x - point.x).max() < 1e-8
        assert info.residual < 1e-9


def test_inverse_is_branch_free():
    # the Newton shooting never takes the logarithm of the unitary factor,
    # so it inverts targets whose preimage k sits on the branch cut where
    # the forward map needs an explicit branch
    theta = np.pi - 1e-4
    y = np.diag([-1j * theta, 1j * theta])
    k = liecore.group_exp(y)
    with pytest.raises(liecore.BranchAmbiguityError):
        liecore.log_principal(k, branch_tol=1e-3)
    point = modulimap.ModuliPoint(k=k, x=0.5 * T)
    q = modulimap.moduli_to_cotangent(point, STEP, log_branch=y)
    back, info = modulimap.cotangent_to_moduli(q, STEP)
    assert np.abs(back.k - k).max() < 1e-8
    assert np.abs(back.x - point.x).max() < 1e-8


def test_inverse_budget_exhaustion(rng):
    point = random_point(rng)
    q = modulimap.moduli_to_cotangent(point, STEP)
    with pytest.raises(modulimap.NoPreimageError):
        modulimap.cotangent_to_moduli(q, STEP, max_iter=1, tol=1e-14)


def test_potential_zero_and_anchor():
    assert modulimap.kahler_potential(ZERO, STEP) == 0.0
    rho = modulimap.kahler_potential(T, STEP)
    assert abs(rho - 0.25) < 1e-8


def test_potential_scaling_cross_check(rng):
    # rho(sX) equals the rescaled-time quadrature of the base flow
    x = liecore.random_triple(rng, 2, norm=0.8)
    n_a, n_b = 256, 1024
    s = n_a / n_b
    lhs = modulimap.kahler_potential(s * x, 1.0 / n_a)
    base = nahmflow.integrate_reduced(x, 1.0 / n_b)
    vals = np.einsum("kaij,kaij->ka", base.values, base.values.conj()).real
    integrand = 0.25 * (2 * vals[:, 0] + vals[:, 1] + vals[:, 2])
    # int_0^1 |s P(s t)|^2 dt = s int_0^s |P(u)|^2 du on the aligned grid
    m = n_a + 1
    from nahmkn.kernels import simpson_uniform
    rhs = s * simpson_uniform(np.ascontiguousarray(integrand[:m]), 1.0 / n_b)
    assert abs(lhs - rhs) < 1e-7


def test_potential_conjugation_invariance(rng):
    x = liecore.random_triple(rng, 2, norm=0.9)
    a = liecore.random_unitary(rng, 2)
    assert abs(
        modulimap.kahler_potential(liecore.adjoint3(a, x), STEP)
        - modulimap.kahler_potential(x, STEP)
    ) < 1e-9


def test_moment_zero_point():
    mom = modulimap.hyperkahler_moment(origin(), STEP)
    for pair in (mom.m_i, mom.m_j, mom.m_k):
        assert liecore.frob(pair[0]) == 0.0
        assert liecore.frob(pair[1]) < 1e-14


def test_moment_closed_form_anchor():
    mom = modulimap.hyperkahler_moment(modulimap.ModuliPoint(k=I2, x=T), STEP)
    assert liecore.frob(mom.m_i[0] - T[0]) < 1e-14
    assert liecore.frob(mom.m_i[1] + 0.5 * T[0]) < 1e-9
    assert liecore.frob(mom.m_j[1] + 0.5 * T[1]) < 1e-9
    assert liecore.frob(mom.m_k[1] + 0.5 * T[2]) < 1e-9


def test_moment_equivariance(rng):
    # mu((k1, k2).p) = (Ad_k1 mu0, Ad_k2 mu1), checked by recomputation
    point = random_point(rng)
    k1, k2 = liecore.group_exp(T[1]), I2
    mom = modulimap.hyperkahler_moment(point, STEP)
    moved = modulimap.ModuliPoint(
        k=k1 @ point.k @ k2.conj().T, x=liecore.adjoint3(k1, point.x)
    )
    mom_moved = modulimap.hyperkahler_moment(moved, STEP)
    for pair, pair_moved in ((mom.m_i, mom_moved.m_i), (mom.m_j, mom_moved.m_j),
                             (mom.m_k, mom_moved.m_k)):
        assert liecore.frob(pair_moved[0] - liecore.adjoint(k1, pair[0])) < 1e-9
        assert liecore.frob(pair_moved[1] - liecore.adjoint(k2, pair[1])) < 1e-9


def test_complex_moment_identity(rng):
    assert modulimap.complex_moment_residual(origin(), STEP) == 0.0
    special = modulimap.ModuliPoint(k=liecore.group_exp(T[2]), x=T)
    assert modulimap.complex_moment_residual(special, STEP) < 1e-7
    for _ in range(10):
        assert modulimap.complex_moment_residual(random_point(rng), STEP) < 1e-7


def test_potential_moment_pairing(rng):
    z_zero = (np.zeros((2, 2)), np.zeros((2, 2)))
    assert modulimap.potential_moment_residual(origin(), z_zero, STEP) < 1e-12
    z = (T[0], T[1])
    assert modulimap.potential_moment_residual(origin(), z, STEP) < 1e-6
    point = random_point(rng, max_norm=0.4, k_angle=0.4)
    assert modulimap.potential_moment_residual(point, z, STEP) < 1e-4


def test_json_round_trips(rng):
    point = random_point(rng)
    back = modulimap.moduli_point_from_json(modulimap.moduli_point_to_json(point))
    assert np.abs(back.k - point.k).max() < 1e-15
    assert np.abs(back.x - point.x).max() < 1e-15
    q = modulimap.moduli_to_cotangent(point, STEP)
    qb = modulimap.cotangent_point_from_json(modulimap.cotangent_point_to_json(q))
    assert np.abs(qb.g - q.g).max() < 1e-15


def test_moduli_point_validation():
    with pytest.raises(ValueError):
        modulimap.ModuliPoint(k=2 * I2, x=ZERO)
    with pytest.raises(ValueError):
        modulimap.CotangentPoint(g=I2, y=np.eye(2))
