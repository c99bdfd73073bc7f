"""Independent numerical oracles used by the test suite.

Everything here deliberately avoids the analytic response machinery: the
driven optical Bloch equations and the quantum-regression equations are
integrated in the time domain with an adaptive high-order solver, Fourier
components are extracted over an exact beat period, and Laplace transforms
are taken by quadrature.  Probe detunings must sit on a rational lattice
(multiples of `base`) so that the limit cycle is exactly periodic.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from atomcbs.algebra import dipole_components, dipole_raising_components, standard_basis

TWO_PI = 2.0 * np.pi


def drive_rhs(sys, probes, g):
    couplings = [g * sys.coupling(p.q, p.sign) for p in probes]
    freqs = [p.sign * float(p.delta) for p in probes]

    def rhs(t, y):
        v = sys.M @ y + sys.L
        for c, f in zip(couplings, freqs):
            v = v + np.exp(1j * f * t) * (c @ y)
        return v

    return rhs


def steady_cycle(sys, probes, g, base, settle=50.0, n_samples=4096):
    """Times and Bloch vectors over one exact beat period of the limit cycle."""
    period = TWO_PI / base
    rhs = drive_rhs(sys, probes, g)
    sol = solve_ivp(rhs, (0.0, settle + period), sys.steady_state().astype(complex),
                    method="DOP853", rtol=1e-11, atol=1e-13, dense_output=True)
    ts = settle + period * np.arange(n_samples) / n_samples
    return ts, sol.sol(ts), sol


def fourier_component(ts, ys, freq):
    """Line amplitude at `freq` from uniform samples over an exact period."""
    return (ys * np.exp(-1j * freq * ts)).mean(axis=-1)


def elastic_component_oracle(sys, probes, g, base, **kw):
    """Time-domain value of the full-order stationary correction."""
    ts, ys, _ = steady_cycle(sys, probes, g, base, **kw)
    zeta = sum(p.sign * float(p.delta) for p in probes)
    return fourier_component(ts, ys, zeta) / g ** len(probes)


def dense_equal_time(rho, kind, dip):
    """<Delta Q Delta D_r> resp. <Delta D_q^dag Delta Q> from a 4x4 state."""
    basis = standard_basis()
    out = np.empty(15, dtype=complex)
    if kind == "f":
        D = dipole_components()[dip]
        mean = np.trace(rho @ D)
        for i, mu in enumerate(basis.ops):
            out[i] = np.trace(rho @ mu @ D) - np.trace(rho @ mu) * mean
    else:
        Dd = dipole_raising_components()[dip]
        mean = np.trace(rho @ Dd)
        for i, mu in enumerate(basis.ops):
            out[i] = np.trace(rho @ Dd @ mu) - mean * np.trace(rho @ mu)
    return out


def regression_component_oracle(sys, probes, g, base, kind, dip, taus,
                                settle=50.0, n_t0=16):
    """Full-order regression component fhat^{(all probes)}(tau) on `taus`.

    Integrates the two-time equations from dense-matrix initial conditions at
    n_t0 points of the limit cycle and projects out the component that
    oscillates at the total beat frequency, referenced to the later time.
    """
    period = TWO_PI / base
    rhs = drive_rhs(sys, probes, g)
    sol = solve_ivp(rhs, (0.0, settle + period), sys.steady_state().astype(complex),
                    method="DOP853", rtol=1e-11, atol=1e-13, dense_output=True)
    couplings = [g * sys.coupling(p.q, p.sign) for p in probes]
    freqs = [p.sign * float(p.delta) for p in probes]
    zeta = sum(freqs)
    basis = standard_basis()
    acc = np.zeros((15, len(taus)), dtype=complex)
    for k in range(n_t0):
        t0 = settle + period * k / n_t0
        rho0 = basis.rho_from_bloch(sol.sol(t0))
        y0 = dense_equal_time(rho0, kind, dip)

        def rrhs(tau, y, _t0=t0):
            v = sys.M @ y
            for c, f in zip(couplings, freqs):
                v = v + np.exp(1j * f * (_t0 + tau)) * (c @ y)
            return v

        rsol = solve_ivp(rrhs, (0.0, taus[-1]), y0, method="DOP853",
                         rtol=1e-11, atol=1e-13, dense_output=True)
        vals = rsol.sol(taus)
        acc += vals * np.exp(-1j * zeta * (t0 + taus))[None, :]
    return acc / n_t0 / g ** len(probes)


def laplace_quadrature(fhat, taus, zpp_grid):
    """f~(z'') = int_0^inf e^{-i z'' tau} fhat(tau) dtau by trapezoid."""
    phases = np.exp(-1j * np.outer(zpp_grid, taus))
    return np.trapz(phases[:, None, :] * fhat[None, :, :], taus, axis=-1).transpose(1, 0)
