"""Numerical kernels for resolvent application, with an optional compiled core.

The single hot operation of the whole code base is

    out[:, m] = V @ diag(1 / (z[m] - lam)) @ Vinv @ X[:, m]

applied over large batches of frequency points ``z``.  A Cython
implementation (`atomcbs._fastkern`) is used when it built successfully;
otherwise a pure-NumPy fallback does the same work through BLAS.  Set
``ATOMCBS_NO_EXT=1`` to force the fallback.  ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised only when the extension is built
    if os.environ.get("ATOMCBS_NO_EXT"):
        raise ImportError("extension disabled by ATOMCBS_NO_EXT")
    from . import _fastkern

    HAVE_EXT = True
except ImportError:  # pragma: no cover
    _fastkern = None
    HAVE_EXT = False


def _resolvent_apply_numpy(Q, Qh, T, z, X):
    """Pure-NumPy resolvent application through the Schur form.

    Computes (z - M)^{-1} X for M = Q T Q^H with unitary Q and upper
    triangular T, by back substitution of (z - T), vectorized over the
    trailing frequency axis.

    Parameters
    ----------
    Q, Qh : (n, n) complex arrays, Schur vectors and their adjoint.
    T : (n, n) complex upper triangular.
    z : scalar or (m,) array of resolvent arguments.
    X : (n,) vector or (n, m) batch, one column per z when z is an array.
    """
    X = np.asarray(X, dtype=complex)
    n = T.shape[0]
    scalar_z = np.isscalar(z) or np.asarray(z).ndim == 0
    zz = complex(z) if scalar_z else np.asarray(z, dtype=complex)
    vec_in = X.ndim == 1
    Y = Qh @ X
    if vec_in and not scalar_z:
        Y = np.broadcast_to(Y[:, None], (n, zz.shape[0])).copy()
    elif vec_in:
        Y = Y[:, None].copy()
    else:
        Y = Y.copy()
    out = np.empty_like(Y)
    for i in range(n - 1, -1, -1):
        # row i of (z - T) x = y: (z - T_ii) x_i - sum_{j>i} T_ij x_j = y_i
        acc = T[i, i + 1:] @ out[i + 1:, :] if i < n - 1 else 0.0
        out[i, :] = (Y[i, :] + acc) / (zz - T[i, i])
    res = Q @ out
    if vec_in and scalar_z:
        return res[:, 0]
    return res


def resolvent_apply(Q, Qh, T, z, X):
    if HAVE_EXT and isinstance(z, np.ndarray) and z.ndim == 1:
        if z.dtype != np.complex128 or not z.flags.c_contiguous:
            z = np.ascontiguousarray(z, dtype=np.complex128)
        if X.dtype != np.complex128:
            X = X.astype(np.complex128)
        if X.ndim == 1:
            return _fastkern.resolvent_apply_vec(Q, Qh, T, z, np.ascontiguousarray(X))
        if not X.flags.c_contiguous:
            X = np.ascontiguousarray(X)
        return _fastkern.resolvent_apply(Q, Qh, T, z, X)
    return _resolvent_apply_numpy(Q, Qh, T, z, X)
