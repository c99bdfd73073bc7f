"""Single-atom spectral response functions under laser plus weak probe driving.

An atom driven by the laser and up to four weak classical probe components
(each a detuning, a polarization and a frequency sign) responds with

* stationary Bloch-vector corrections, multilinear in the probe amplitudes
  (`corrections`, `elastic_correction`), evaluated either as the explicit
  sum over probe orderings or through the equivalent subset recursion;
* two-time dipole fluctuation correlations, obtained from the quantum
  regression theorem as Laplace-domain vectors with perturbative initial
  conditions (`initial_conditions`, `inelastic_laplace`).

`BlockEvaluator` packages both for one atom of a multiple-scattering
diagram: elastic outgoing amplitudes for any subset of the probes, the
two-sided fluctuation spectral density `fluct_density`, and its exact
frequency integral `equal_time`.  Probe detunings and evaluation
frequencies may be NumPy arrays (broadcast elementwise) so that whole
quadrature meshes are evaluated in single BLAS passes.

Unit probe amplitudes are used throughout; physical coupling prefactors are
absorbed in the statistical weights applied downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .algebra import (
    NCOMP,
    ObeSystem,
    dipole_components,
    dipole_raising_components,
    project_lowering,
    project_raising,
    standard_basis,
)

TWO_PI = 2.0 * np.pi


def _acc_add(a, b):
    """a + b with (15,) vectors lifted against (15, M) batches."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim < b.ndim:
        a = a[:, None]
    elif b.ndim < a.ndim:
        b = b[:, None]
    return a + b


def _vs_mul(vec, s):
    """Bloch vector times scalar amplitude, batched over a trailing axis."""
    vec = np.asarray(vec)
    s = np.asarray(s)
    if vec.ndim == 1 and s.ndim == 1:
        return vec[:, None] * s[None, :]
    return vec * s


@dataclass(frozen=True)
class ProbeSpec:
    """One weak probe component.

    sign = -1 tags the positive-frequency component (phase e^{-i delta t},
    drawn as a solid arrow), sign = +1 its negative-frequency counterpart
    (dashed arrow).  delta may be a float or an ndarray of detunings for
    batched evaluation.
    """

    delta: object
    q: int
    sign: int

    def __post_init__(self):
        if self.q not in (-1, 0, 1):
            raise ValueError(f"polarization index must be -1, 0 or +1, got {self.q}")
        if self.sign not in (-1, 1):
            raise ValueError(f"frequency sign must be -1 or +1, got {self.sign}")

    @property
    def signed_delta(self):
        return self.sign * np.asarray(self.delta)


def zeta(probes) -> object:
    """zeta = sum_k s_k delta_k over a probe collection."""
    total = 0.0
    for p in probes:
        total = total + p.signed_delta
    return total


def canonical(probes):
    """Probe tuple sorted into a canonical order (scalar detunings only)."""
    return tuple(sorted(probes, key=lambda p: (float(p.delta), p.q, p.sign)))


# --------------------------------------------------------------------------
# Correlation matrices for the regression initial conditions
# --------------------------------------------------------------------------


@lru_cache(maxsize=None)
def correlation_matrices(kind: str, dip: int):
    """Matrices (A, L) with <Q D_r> = A <Q> + L (kind 'f') resp. <D_q^dag Q> (kind 'h').

    Derived from completeness of the operator basis with its normalization
    constant; valid for any trace-orthonormal basis choice.
    """
    basis = standard_basis()
    if kind == "f":
        D = dipole_components()[dip]
        ops = [(mu @ D) for mu in basis.ops]
    elif kind == "h":
        Dd = dipole_raising_components()[dip]
        ops = [(Dd @ mu) for mu in basis.ops]
    else:
        raise ValueError(f"kind must be 'f' or 'h', got {kind!r}")
    A = np.zeros((NCOMP, NCOMP), dtype=complex)
    L = np.zeros(NCOMP, dtype=complex)
    for i, op in enumerate(ops):
        L[i] = np.trace(op) / 4.0
        for j, nu in enumerate(basis.ops):
            A[i, j] = np.trace(nu.conj().T @ op) / basis.norm_c
    A.setflags(write=False)
    L.setflags(write=False)
    return A, L


# --------------------------------------------------------------------------
# Subset-recursion evaluator
# --------------------------------------------------------------------------


class BlockEvaluator:
    """Perturbative responses of one atom for a fixed probe set.

    Subset corrections, initial conditions and Laplace vectors are cached by
    bitmask over the probe tuple.  All entries broadcast elementwise over a
    shared trailing frequency axis when any detuning is an array.
    """

    def __init__(self, sys: ObeSystem, probes):
        self.sys = sys
        self.probes = tuple(probes)
        self.n = len(self.probes)
        if self.n > 4:
            raise ValueError("at most four probe components are supported")
        self.full = (1 << self.n) - 1
        self._zeta = {}
        self._corr = {}
        self._ic = {}

    # -- elastic corrections -------------------------------------------------

    def zeta_mask(self, mask: int):
        val = self._zeta.get(mask)
        if val is None:
            val = 0.0
            for k in range(self.n):
                if mask >> k & 1:
                    val = val + self.probes[k].signed_delta
            self._zeta[mask] = val
        return val

    def correction(self, mask: int):
        """Stationary Bloch-vector correction, multilinear in the probes of mask."""
        val = self._corr.get(mask)
        if val is not None:
            return val
        if mask == 0:
            val = self.sys.steady_state()
        else:
            acc = 0.0
            for k in range(self.n):
                if mask >> k & 1:
                    p = self.probes[k]
                    child = self.correction(mask & ~(1 << k))
                    acc = _acc_add(acc, self.sys.coupling(p.q, p.sign) @ child) if not np.isscalar(acc) else self.sys.coupling(p.q, p.sign) @ child
            val = self.sys.greens_apply(1j * np.asarray(self.zeta_mask(mask)), acc)
        self._corr[mask] = val
        return val

    def elastic_out(self, q: int, mask: int | None = None, dagger: bool = False):
        """Outgoing elastic amplitude <D_q> (or <D_q^dag>) of a subset correction."""
        v = self.correction(self.full if mask is None else mask)
        return project_raising(v, q) if dagger else project_lowering(v, q)

    # -- regression initial conditions ----------------------------------------

    def initial_condition(self, kind: str, dip: int, mask: int):
        key = (kind, dip, mask)
        val = self._ic.get(key)
        if val is not None:
            return val
        A, L = correlation_matrices(kind, dip)
        val = A @ self.correction(mask)
        if mask == 0:
            val = _acc_add(val, L)
        # subtract the factorized part, split over all ordered sub-partitions
        sub = mask
        while True:
            other = mask & ~sub
            qv = self.correction(other)
            if kind == "f":
                piece = _vs_mul(qv, project_lowering(self.correction(sub), dip))
            else:
                piece = _vs_mul(qv, project_raising(self.correction(sub), dip))
            val = _acc_add(val, -piece)
            if sub == 0:
                break
            sub = (sub - 1) & mask
        self._ic[key] = val
        return val

    # -- Laplace-domain correlation vectors -----------------------------------

    def laplace(self, kind: str, dip: int, zpp, mask: int | None = None):
        """Laplace transform of the fluctuation vector at real frequency zpp.

        Implements the recursion
        F[K](zpp) = G(i zpp + i zeta_K) (F0[K] + sum_k Delta_k F[K\\k](zpp)).
        """
        if mask is None:
            mask = self.full
        return self._laplace_rec(kind, dip, np.asarray(zpp), mask, {})

    def _laplace_rec(self, kind, dip, zpp, mask, memo):
        val = memo.get(mask)
        if val is not None:
            return val
        acc = self.initial_condition(kind, dip, mask)
        for k in range(self.n):
            if mask >> k & 1:
                p = self.probes[k]
                child = self._laplace_rec(kind, dip, zpp, mask & ~(1 << k), memo)
                acc = _acc_add(acc, self.sys.coupling(p.q, p.sign) @ child)
        z = 1j * (zpp + np.asarray(self.zeta_mask(mask)))
        val = self.sys.greens_apply(z, acc)
        memo[mask] = val
        return val

    # -- assembled block functions ---------------------------------------------

    def fluct_density(self, q_dag: int, r_low: int, nu_b):
        """Two-sided fluctuation spectral density over the solid-arrow frequency.

        Returns the density of the correlation between the outgoing
        negative-frequency component D_{q_dag}^dag and positive-frequency
        component D_{r_low}; the dashed-arrow frequency tracks
        nu_a = nu_b + zeta of the full probe set.
        """
        zfull = self.zeta_mask(self.full)
        h = self.laplace("h", q_dag, -(np.asarray(nu_b) + np.asarray(zfull)))
        f = self.laplace("f", r_low, np.asarray(nu_b))
        return (project_lowering(h, r_low) + project_raising(f, q_dag)) / TWO_PI

    def equal_time(self, q_dag: int, r_low: int):
        """Frequency integral of fluct_density: the equal-time correlation."""
        h0 = self.initial_condition("h", q_dag, self.full)
        f0 = self.initial_condition("f", r_low, self.full)
        return 0.5 * (project_lowering(h0, r_low) + project_raising(f0, q_dag))


# --------------------------------------------------------------------------
# Public operations
# --------------------------------------------------------------------------


def elastic_correction(sys: ObeSystem, probes) -> np.ndarray:
    """Stationary correction of the Bloch vector, exact sum over probe orderings.

    Equivalent to the subset recursion used internally (see
    `recursion_check`); this form follows the ordered-chain definition
    G(i zeta) Delta_{j_n} ... G(i s_{j_1} delta_{j_1}) Delta_{j_1} <Q>^(0).
    """
    probes = canonical(probes)
    if len(probes) > 4:
        raise ValueError("at most four probe components are supported")
    if not probes:
        return sys.steady_state()
    total = np.zeros(NCOMP, dtype=complex)
    for order in permutations(range(len(probes))):
        vec = sys.steady_state()
        partial = 0.0
        for k in order:
            p = probes[k]
            partial += p.sign * float(p.delta)
            vec = sys.greens_apply(1j * partial, sys.coupling(p.q, p.sign) @ vec)
        total += vec
    return total


def recursion_check(sys: ObeSystem, probes) -> float:
    """Norm of the difference between the ordered-chain sum and the recursion."""
    probes = canonical(probes)
    ev = BlockEvaluator(sys, probes)
    flat = elastic_correction(sys, probes)
    rec = ev.correction(ev.full)
    return float(np.linalg.norm(flat - rec))


def initial_conditions(sys: ObeSystem, kind: str, dip: int, probes):
    """All perturbative-order regression initial conditions, keyed by bitmask.

    Also returns the correlation matrices (A, L) entering the construction.
    """
    ev = BlockEvaluator(sys, probes)
    table = {mask: ev.initial_condition(kind, dip, mask) for mask in range(1 << ev.n)}
    A, L = correlation_matrices(kind, dip)
    return table, A, L


def split_partition_count(n: int, k: int) -> int:
    """Number of ways to route k of n probes into the dipole factor."""
    from math import comb

    return comb(n, k)


def inelastic_laplace(sys: ObeSystem, kind: str, dip: int, probes, zpp):
    """Full-order Laplace-domain fluctuation vector at real frequency zpp."""
    ev = BlockEvaluator(sys, probes)
    return ev.laplace(kind, dip, zpp)


def project_outgoing(vec, q: int, dagger: bool = False):
    """Outgoing amplitude component <D_q> (or <D_q^dag>) of a Bloch-like vector."""
    return project_raising(vec, q) if dagger else project_lowering(vec, q)
