import numpy as np
import pytest

from bogoflow.errors import (DimensionMismatch, IdentityDrift,
                             InvalidArgument, StepFailure)
from bogoflow.evolution import (BogoliubovMatrix, compose, evolve_Q, evolve_U,
                                identity_residual, static_driver)
from bogoflow.integrators import solve_dopri
from bogoflow.scenarios import GwCavityConfig, gw_exact_driver


def random_valid_coupling(rng, n):
    """ahat anti-Hermitian, bhat symmetric, as the structure demands."""
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    ahat = 0.5 * (a - a.conj().T)
    b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    bhat = 0.5 * (b + b.T)
    return ahat, bhat


def test_static_evolution_is_pure_phase():
    w = np.array([1.0, 2.0, 3.5])
    U = evolve_U(static_driver(w), 0.0, 2.0, tol=1e-12)
    expect = np.diag(np.exp(1j * w * 2.0))
    assert np.max(np.abs(U.alpha - expect)) < 1e-10
    assert np.max(np.abs(U.beta)) == 0.0
    q, acc = evolve_Q(static_driver(w), 0.0, 2.0, tol=1e-12)
    assert np.max(np.abs(q.alpha - np.eye(3))) == 0.0
    assert np.max(np.abs(q.beta)) == 0.0
    assert np.max(np.abs(np.abs(acc.theta) - 1.0)) < 1e-12


def test_single_step_taylor_consistency(rng):
    n = 3
    w = np.array([1.0, 1.7, 2.4])
    ahat, bhat = random_valid_coupling(rng, n)
    driver = lambda t: (w, (ahat, bhat))
    dt = 1e-5
    U = evolve_U(driver, 0.0, dt, tol=1e-13)
    # dU = (i Omega + K) U in blocks
    dA = 1j * np.diag(w) + ahat
    expectA = np.eye(n) + dt * dA
    expectB = dt * bhat
    assert np.max(np.abs(U.alpha - expectA)) < 5 * dt ** 2 * np.max(np.abs(dA)) ** 2
    assert np.max(np.abs(U.beta - expectB)) < 5 * dt ** 2 * np.max(np.abs(bhat)) ** 2


def test_identity_residual_values(rng):
    eye = BogoliubovMatrix.identity(4)
    assert identity_residual(eye) == 0.0
    delta = 1e-3
    scaled = BogoliubovMatrix(np.sqrt(1 + delta) * np.eye(4),
                              np.zeros((4, 4)))
    assert abs(identity_residual(scaled) - delta) < 1e-12


def test_compose_identity_and_dimension_guard(rng):
    ahat, bhat = random_valid_coupling(rng, 3)
    U = evolve_U(lambda t: (np.array([1.0, 2.0, 3.0]), (ahat * 0.1, bhat * 0.1)),
                 0.0, 0.5, tol=1e-11)
    eye = BogoliubovMatrix.identity(3)
    c = compose(U, eye)
    assert np.max(np.abs(c.alpha - U.alpha)) == 0.0
    with pytest.raises(DimensionMismatch):
        compose(U, BogoliubovMatrix.identity(2))


def test_semigroup_and_reversal():
    cfg = GwCavityConfig(lengths=(1.0, 2.0, 1.0), epsilon=1e-4,
                         n_modes_per_axis=(1, 1, 1))
    drv = gw_exact_driver(cfg)
    tol = 1e-11
    U02 = evolve_U(drv, 0.0, 2.0, tol=tol)
    U01 = evolve_U(drv, 0.0, 1.0, tol=tol)
    U12 = evolve_U(drv, 1.0, 2.0, tol=tol)
    comp = compose(U12, U01)
    assert np.max(np.abs(comp.alpha - U02.alpha)) < 10 * tol
    assert np.max(np.abs(comp.beta - U02.beta)) < 10 * tol
    # reversing the interval yields the inverse transformation; the bound
    # budgets the independent errors of two runs
    U20 = evolve_U(drv, 2.0, 0.0, tol=tol)
    ident = compose(U02, U20)
    assert np.max(np.abs(ident.alpha - np.eye(1))) < 20 * tol
    assert np.max(np.abs(ident.beta)) < 20 * tol


def test_compose_residual_bound(rng):
    ahat, bhat = random_valid_coupling(rng, 3)
    w = np.array([1.0, 2.0, 3.0])
    U1 = evolve_U(lambda t: (w, (0.2 * ahat, 0.2 * bhat)), 0.0, 1.0, tol=1e-9)
    U2 = evolve_U(lambda t: (w, (0.1 * ahat, 0.3 * bhat)), 0.0, 1.0, tol=1e-9)
    r1, r2 = identity_residual(U1), identity_residual(U2)
    r12 = identity_residual(compose(U2, U1))
    norm = max(np.max(np.abs(U1.full_matrix())), np.max(np.abs(U2.full_matrix())))
    c = 8 * norm ** 2
    assert r12 <= c * (r1 + r2) + 1e-14


def test_q_form_matches_u_form():
    cfg = GwCavityConfig(lengths=(1.0, 2.0, 1.0), epsilon=1e-4,
                         n_modes_per_axis=(1, 1, 1))
    drv = gw_exact_driver(cfg)
    tol = 1e-10
    U = evolve_U(drv, 0.0, 2.0, tol=tol)
    q, acc = evolve_Q(drv, 0.0, 2.0, tol=tol)
    Uq = acc.to_U(q)
    assert np.max(np.abs(U.alpha - Uq.alpha)) < 10 * tol
    assert np.max(np.abs(U.beta - Uq.beta)) < 10 * tol
    # phase stripping only: moduli agree block by block
    assert np.max(np.abs(np.abs(q.alpha) - np.abs(Uq.alpha))) < 1e-13
    assert np.max(np.abs(np.abs(q.beta) - np.abs(Uq.beta))) < 1e-13


def test_identity_residual_grows_at_most_linearly():
    cfg = GwCavityConfig(lengths=(1.0, 2.0, 1.0), epsilon=1e-4,
                         n_modes_per_axis=(1, 1, 1))
    drv = gw_exact_driver(cfg)
    tol = 1e-10
    res = [identity_residual(evolve_U(drv, 0.0, T, tol=tol))
           for T in (2.0, 4.0, 8.0)]
    floor = 10 * tol
    assert res[1] <= 2.5 * res[0] + floor
    assert res[2] <= 2.5 * res[1] + floor


def test_identity_drift_aborts_on_invalid_coupling(rng):
    # violating bhat = bhat^T breaks the identity; the monitor must abort
    n = 2
    w = np.array([1.0, 2.0])
    bad_b = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    driver = lambda t: (w, (np.zeros((n, n), dtype=complex), bad_b))
    with pytest.raises(IdentityDrift):
        evolve_U(driver, 0.0, 5.0, tol=1e-12)


def test_step_failure_on_singular_rhs():
    def rhs(t, y):
        return y / (0.5 - t)

    with pytest.raises(StepFailure):
        solve_dopri(rhs, 0.0, 1.0, np.array([1.0 + 0j]), rtol=1e-8, atol=1e-8)


def test_empty_interval_rejected():
    with pytest.raises(InvalidArgument):
        evolve_U(static_driver([1.0]), 1.0, 1.0)


def test_solver_against_scipy_reference():
    from scipy.integrate import solve_ivp

    def m(t):
        return np.array([[0.1j * t, 0.05 * np.sin(t)],
                         [0.05 * np.sin(t), -0.1j * t]])

    def rhs(t, y):
        return m(t) @ y

    y0 = np.array([1.0 + 0j, 0.2 - 0.1j])
    mine = solve_dopri(rhs, 0.0, 4.0, y0, rtol=1e-11, atol=1e-11)
    ref = solve_ivp(rhs, (0.0, 4.0), y0, method="DOP853",
                    rtol=1e-12, atol=1e-13)
    assert np.max(np.abs(mine.y[-1] - ref.y[:, -1])) < 1e-9


def test_backward_integration():
    def rhs(t, y):
        return -0.3 * y

    res = solve_dopri(rhs, 1.0, 0.0, np.array([2.0 + 0j]),
                      rtol=1e-11, atol=1e-12)
    assert abs(res.y[-1][0] - 2.0 * np.exp(0.3)) < 1e-9
