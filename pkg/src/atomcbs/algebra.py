"""Operator algebra for a driven four-level atom with an isotropic dipole transition.

The atom has a nondegenerate ground state and three excited Zeeman sublevels:

    level 1: ground,  m = 0
    level 2: excited, m = -1
    level 3: excited, m =  0
    level 4: excited, m = +1

All frequencies are measured in units of the half linewidth ``gamma`` (the
excited sublevels decay at rate ``2*gamma``), and the drive is a circularly
polarized field coupling only the m=+1 transition.  The state of the atom is
tracked through the expectation values of a fixed orthonormal operator basis
(a 15-component "Bloch vector"); this module builds the drift matrix ``M``,
the inhomogeneity ``L``, the weak-probe coupling matrices for both frequency
signs and all three polarizations, and a cached-eigendecomposition resolvent
``G(z) = (z - M)^{-1}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .kernels import resolvent_apply

#: Spherical polarization indices, ordered.
POLARIZATIONS = (-1, 0, 1)

#: Version tag of the operator-basis ordering below.  Bump if the ordering
#: ever changes; Bloch-vector component meaning depends on it.
BASIS_VERSION = 1

DIM = 4
NCOMP = 15


class PoleProximityError(ValueError):
    """Resolvent requested too close to an eigenvalue of the drift matrix."""

    def __init__(self, z, eigenvalue):
        super().__init__(f"resolvent argument z={z} within tolerance of eigenvalue {eigenvalue}")
        self.z = z
        self.eigenvalue = eigenvalue


class DiagonalizationError(RuntimeError):
    """Eigendecomposition of the drift matrix is too ill-conditioned to trust."""

    def __init__(self, cond):
        super().__init__(f"eigenvector condition number {cond:.3e} exceeds threshold")
        self.cond = cond


def _sigma(i: int, j: int) -> np.ndarray:
    """|i><j| on the four levels, 1-based indices."""
    m = np.zeros((DIM, DIM), dtype=complex)
    m[i - 1, j - 1] = 1.0
    return m


def dipole_components() -> dict[int, np.ndarray]:
    """Spherical components D_q of the dipole lowering operator.

    D = -e_{-1} sigma_12 + e_0 sigma_13 - e_{+1} sigma_14, so that
    D_q = e_q* . D.  Entries are 0 or +-1.
    """
    return {
        -1: -_sigma(1, 2),
        0: +_sigma(1, 3),
        +1: -_sigma(1, 4),
    }


def dipole_raising_components() -> dict[int, np.ndarray]:
    """Hermitian conjugates D_q^dagger of the lowering components."""
    return {q: d.conj().T for q, d in dipole_components().items()}


# --------------------------------------------------------------------------
# Operator basis
# --------------------------------------------------------------------------

# Ordering, version 1 (do not reorder):
#   0..2   sigma_12, sigma_13, sigma_14      (optical coherences, lowering slots)
#   3..5   sigma_21, sigma_31, sigma_41      (raising slots)
#   6..11  sigma_23, sigma_24, sigma_32, sigma_34, sigma_42, sigma_43
#   12..14 traceless diagonal combinations
_OFFDIAG_ORDER = [
    (1, 2), (1, 3), (1, 4),
    (2, 1), (3, 1), (4, 1),
    (2, 3), (2, 4), (3, 2), (3, 4), (4, 2), (4, 3),
]


def _diagonal_ops() -> list[np.ndarray]:
    d1 = np.diag([1.0, -1.0, 0.0, 0.0]).astype(complex) / np.sqrt(2.0)
    d2 = np.diag([1.0, 1.0, -2.0, 0.0]).astype(complex) / np.sqrt(6.0)
    d3 = np.diag([1.0, 1.0, 1.0, -3.0]).astype(complex) / np.sqrt(12.0)
    return [d1, d2, d3]


@dataclass(frozen=True)
class OperatorBasis:
    """Fixed orthonormal basis of the traceless 4x4 operator space.

    ``tr(mu_i^dag mu_j) = c delta_ij`` with normalization constant ``c = 1``.
    Together with the identity the basis is complete:
    ``O = tr(O)/4 * 1 + sum_i mu_i tr(mu_i^dag O) / c``.
    """

    ops: tuple[np.ndarray, ...]
    conj_index: tuple[int, ...]  # index of mu_i^dagger within the basis
    norm_c: float = 1.0

    @classmethod
    def build(cls) -> "OperatorBasis":
        ops = [_sigma(i, j) for (i, j) in _OFFDIAG_ORDER] + _diagonal_ops()
        index = {(i, j): k for k, (i, j) in enumerate(_OFFDIAG_ORDER)}
        conj = [index[(j, i)] for (i, j) in _OFFDIAG_ORDER] + [12, 13, 14]
        for o in ops:
            o.setflags(write=False)
        return cls(ops=tuple(ops), conj_index=tuple(conj))

    def index_of(self, i: int, j: int) -> int:
        """Basis index of sigma_ij (i != j, 1-based)."""
        return _OFFDIAG_ORDER.index((i, j))

    def expand(self, op: np.ndarray) -> tuple[complex, np.ndarray]:
        """Coefficients (identity part tr(op)/4, traceless components)."""
        comps = np.array([np.trace(mu.conj().T @ op) for mu in self.ops])
        return np.trace(op) / 4.0, comps

    def bloch_from_rho(self, rho: np.ndarray) -> np.ndarray:
        """Expectation values <mu_i> = tr(rho mu_i)."""
        return np.array([np.trace(rho @ mu) for mu in self.ops])

    def rho_from_bloch(self, v: np.ndarray) -> np.ndarray:
        """Reconstruct the density matrix from the Bloch vector."""
        rho = np.eye(DIM, dtype=complex) / 4.0
        for j, mu in enumerate(self.ops):
            rho = rho + mu * v[self.conj_index[j]]
        return rho

    def conjugate_vector(self, v: np.ndarray) -> np.ndarray:
        """Image of the Bloch vector under Hermitian conjugation of the state.

        For a physical state (Hermitian rho) this is the identity map; for
        response corrections it implements the sign-flip/conjugation symmetry.
        """
        out = np.empty_like(v)
        for i, ci in enumerate(self.conj_index):
            out[i] = np.conj(v[ci])
        return out


@lru_cache(maxsize=1)
def standard_basis() -> OperatorBasis:
    return OperatorBasis.build()


# --------------------------------------------------------------------------
# Drive parameters and OBE system
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DriveParams:
    """Laser drive: Rabi frequency and detuning, in units of gamma (= 1)."""

    omega: float
    delta: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("Rabi frequency must be nonnegative")
        if self.gamma != 1.0:
            raise ValueError("internal units fix gamma = 1")

    @property
    def saturation(self) -> float:
        """s = Omega^2 / (2 (delta^2 + gamma^2))."""
        return 0.5 * self.omega**2 / (self.delta**2 + self.gamma**2)


def _commutator(a, b):
    return a @ b - b @ a


def _master_generator(drive: DriveParams):
    """Adjoint generator Q -> dQ/dt of the laser-only master equation."""
    D = dipole_components()
    Dd = dipole_raising_components()
    excited = sum(Dd[q] @ D[q] for q in POLARIZATIONS)
    drive_op = Dd[+1] + D[+1]

    def gen(Q):
        out = -1j * drive.delta * _commutator(excited, Q)
        out = out - 1j * (drive.omega / 2.0) * _commutator(drive_op, Q)
        for q in POLARIZATIONS:
            out = out + drive.gamma * (Dd[q] @ _commutator(Q, D[q]) + _commutator(Dd[q], Q) @ D[q])
        return out

    return gen


def _probe_generator(q: int, sign: int):
    """Adjoint generator of one unit-amplitude probe coupling.

    sign=-1 is the positive-frequency component (couples through D_q^dag),
    sign=+1 the negative-frequency one (couples through D_q).
    """
    op = dipole_raising_components()[q] if sign < 0 else dipole_components()[q]

    def gen(Q):
        return -0.5j * _commutator(op, Q)

    return gen


def _project_generator(basis: OperatorBasis, gen) -> tuple[np.ndarray, np.ndarray]:
    """Matrix and inhomogeneity of a generator in the Bloch representation."""
    mat = np.zeros((NCOMP, NCOMP), dtype=complex)
    vec = np.zeros(NCOMP, dtype=complex)
    for i, mu in enumerate(basis.ops):
        r = gen(mu)
        vec[i] = np.trace(r) / 4.0
        for j, nu in enumerate(basis.ops):
            mat[i, j] = np.trace(nu.conj().T @ r) / basis.norm_c
    return mat, vec


@dataclass(frozen=True)
class Eigendecomposition:
    """Eigenvalues of M for diagnostics; the eigenvector condition number is
    reported but the resolvent itself runs on the unitary Schur form, which
    stays accurate even when M is close to defective (which happens at
    perfectly ordinary drive strengths)."""

    eigvals: np.ndarray
    cond: float


@dataclass(frozen=True)
class ObeSystem:
    """Bloch-space representation of the driven atom.

    Immutable after construction; safe to share across workers.
    """

    drive: DriveParams
    basis: OperatorBasis
    M: np.ndarray
    L: np.ndarray
    delta_minus: dict[int, np.ndarray]
    delta_plus: dict[int, np.ndarray]
    eig: Eigendecomposition = field(repr=False)
    schur_q: np.ndarray = field(repr=False)
    schur_qh: np.ndarray = field(repr=False)
    schur_t: np.ndarray = field(repr=False)
    steady: np.ndarray = field(repr=False)
    margin: float = 0.0

    def coupling(self, q: int, sign: int) -> np.ndarray:
        return self.delta_minus[q] if sign < 0 else self.delta_plus[q]

    def greens_apply(self, z, vec):
        """G(z) @ vec with z scalar or array broadcast against vec columns."""
        self._check_pole(z)
        return resolvent_apply(self.schur_q, self.schur_qh, self.schur_t, z, vec)

    def greens_matrix(self, z: complex) -> np.ndarray:
        """Dense G(z) = (z - M)^{-1}."""
        self._check_pole(z)
        return resolvent_apply(self.schur_q, self.schur_qh, self.schur_t, z, np.eye(NCOMP, dtype=complex))

    def steady_state(self) -> np.ndarray:
        """Stationary Bloch vector G(0) L."""
        return self.steady

    def steady_rho(self) -> np.ndarray:
        return self.basis.rho_from_bloch(self.steady)

    @property
    def stability_margin(self) -> float:
        return self.margin

    def _check_pole(self, z, tol: float = 1e-12):
        # fast path: every eigenvalue lies strictly in the left half plane, so
        # arguments with Re z >= 0 (all internal evaluations are on the
        # imaginary axis) keep a distance of at least the stability margin.
        if self.margin > tol:
            if isinstance(z, np.ndarray):
                if z.dtype.kind != "c" or z.real.min() >= 0.0:
                    return
            elif complex(z).real >= 0.0:
                return
        zz = np.atleast_1d(np.asarray(z, dtype=complex))
        d = np.abs(zz[..., None] - self.eig.eigvals[None, :])
        k = int(np.argmin(d))
        if d.flat[k] < tol:
            raise PoleProximityError(zz.flat[k // NCOMP], self.eig.eigvals[k % NCOMP])


def build_obe_system(drive: DriveParams, basis: OperatorBasis | None = None) -> ObeSystem:
    """Construct drift matrix, inhomogeneity, probe couplings and resolvent cache."""
    basis = basis or standard_basis()
    M, L = _project_generator(basis, _master_generator(drive))
    dminus = {}
    dplus = {}
    for q in POLARIZATIONS:
        dm, rm = _project_generator(basis, _probe_generator(q, -1))
        dp, rp = _project_generator(basis, _probe_generator(q, +1))
        if max(np.max(np.abs(rm)), np.max(np.abs(rp))) > 1e-14:
            raise AssertionError("probe couplings must be homogeneous (commutators are traceless)")
        dm.setflags(write=False)
        dp.setflags(write=False)
        dminus[q] = dm
        dplus[q] = dp

    eigvals, right = np.linalg.eig(M)
    if not np.all(np.isfinite(right)):
        raise DiagonalizationError(np.inf)
    cond = float(np.linalg.cond(right))
    eig = Eigendecomposition(eigvals=eigvals, cond=cond)

    from scipy.linalg import schur

    T, Q = schur(M, output="complex")
    T = np.ascontiguousarray(T)
    Q = np.ascontiguousarray(Q)
    Qh = np.ascontiguousarray(Q.conj().T)

    # steady state from the null-space form M x = -L (exact also if M is defective)
    steady = np.linalg.solve(-M, L)

    for a in (M, L, steady, eigvals, T, Q, Qh):
        a.setflags(write=False)
    return ObeSystem(
        drive=drive, basis=basis, M=M, L=L,
        delta_minus=dminus, delta_plus=dplus, eig=eig,
        schur_q=Q, schur_qh=Qh, schur_t=T, steady=steady,
        margin=-float(np.max(eigvals.real)),
    )


# --------------------------------------------------------------------------
# Outgoing-amplitude slots
# --------------------------------------------------------------------------

# D_q and D_q^dag are single basis elements up to sign; record (index, coeff).
_LOWER_SLOT = {-1: (0, -1.0), 0: (1, +1.0), +1: (2, -1.0)}   # sigma_12, sigma_13, sigma_14
_RAISE_SLOT = {-1: (3, -1.0), 0: (4, +1.0), +1: (5, -1.0)}   # sigma_21, sigma_31, sigma_41


def project_lowering(vec, q: int):
    """<D_q> component of a Bloch(-like) vector; vec may have trailing axes."""
    i, c = _LOWER_SLOT[q]
    return c * vec[i]


def project_raising(vec, q: int):
    """<D_q^dag> component of a Bloch(-like) vector."""
    i, c = _RAISE_SLOT[q]
    return c * vec[i]
