"""Pure-Python scenario kernels (fallback for the compiled extension).

Both scenario families reduce to one phase-stripped pair system per mode,

    dQa/dx = J(x) b(x) e^{-2i phi} conj(Qb)
    dQb/dx = J(x) b(x) e^{-2i phi} conj(Qa)
    dphi/dx = J(x) w(x)

where x is the integration variable (conformal time for the cosmology
family with Jacobian J = a, coordinate time with J = 1 for the cavity
family), b is the pair coupling rate and w the mode frequency.  The
compiled kernel implements exactly the same stepper on this system.
"""

import numpy as np

from ..errors import IdentityDrift
from ..integrators import solve_dopri

FLRW_TANH = 1
GW_MODE = 2


def _flrw_rates(params, eta):
    A, B, rho, k, m = params
    a2 = A + B * np.tanh(rho * eta)
    a = np.sqrt(a2)
    sech2 = 1.0 - np.tanh(rho * eta) ** 2
    a_eta = B * rho * sech2 / (2.0 * a)
    w = np.sqrt(k * k / a2 + m * m)
    b = -(a_eta / (2.0 * a2)) * (m * m / (w * w))
    return a, w, b


def _gw_rates(params, t):
    kx2, ky2, kz2, msq, eps, omega, tau = params
    if tau > 0:
        env = np.exp(-(t / tau) ** 2)
        denv = -2.0 * t / (tau * tau) * env
    else:
        env, denv = 1.0, 0.0
    s = np.sin(omega * t) * env
    ds = omega * np.cos(omega * t) * env + np.sin(omega * t) * denv
    hx = 1.0 + eps * s
    hy = 1.0 - eps * s
    dhx = eps * ds
    dhy = -eps * ds
    w = np.sqrt(kx2 / hx + ky2 / hy + kz2 + msq)
    wdot = -(kx2 * dhx / hx ** 2 + ky2 * dhy / hy ** 2) / (2.0 * w)
    q = 0.5 * (dhx / hx + dhy / hy)
    b = -0.5 * q - wdot / (2.0 * w)
    return 1.0, w, b


_RATES = {FLRW_TANH: _flrw_rates, GW_MODE: _gw_rates}


def pair_evolution(family: int, params, x0: float, x_samples,
                   rtol: float = 1e-10, atol: float = 1e-10,
                   ident_cap: float = 0.0):
    """Integrate one pair system from x0 through the requested sample points.

    Returns (qa, qb, phase) arrays over ``x_samples``.  A positive
    ``ident_cap`` aborts with IdentityDrift when | |Qa|^2 - |Qb|^2 - 1 |
    exceeds it on an accepted step.
    """
    rates = _RATES[family]
    p = tuple(float(v) for v in params)

    def rhs(x, y):
        jac, w, b = rates(p, x)
        qa, qb, phi = y
        rot = b * np.exp(-2j * phi.real)
        return np.array([jac * rot * np.conj(qb),
                         jac * rot * np.conj(qa),
                         jac * w + 0j])

    hook = None
    if ident_cap > 0:
        def hook(x, y):
            drift = abs(abs(y[0]) ** 2 - abs(y[1]) ** 2 - 1.0)
            if drift > ident_cap:
                raise IdentityDrift(
                    f"pair identity drift {drift:.3e} at x={x:.6g}")

    samples = np.asarray(x_samples, dtype=float)
    y0 = np.array([1.0 + 0j, 0.0 + 0j, 0.0 + 0j])
    res = solve_dopri(rhs, x0, float(samples[-1]), y0, rtol=rtol, atol=atol,
                      t_eval=samples, step_hook=hook)
    qa = res.y[:, 0]
    qb = res.y[:, 1]
    phase = res.y[:, 2].real
    return qa, qb, phase
