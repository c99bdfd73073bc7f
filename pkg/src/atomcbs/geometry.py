"""Transverse projector elements, orientation averages and index selection rules.

Light exchanged between two atoms is projected on the plane transverse to
the line joining them.  In the spherical basis the projector matrix element
between polarizations q (emitter side) and q' (receiver side) is

    Delta_{q'q}(theta, phi) = delta_{q'q} - n_{q'} n_q^*

with n the spherical components of the joining unit vector.  Averaging
products of two such elements over the random relative orientation yields
the geometric weights of the multiple-scattering diagrams; for this
transition they are exact rationals with denominator 15, hard-coded here
and cross-checked against quadrature in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np

from .algebra import POLARIZATIONS

#: Diagram template identifiers.
TEMPLATES = ("D-ladder", "D-crossed", "T-ladder-1", "T-ladder-2", "T-crossed-1", "T-crossed-2")


@dataclass(frozen=True)
class Orientation:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")
        if not 0.0 <= self.phi < 2.0 * np.pi:
            raise ValueError("phi must lie in [0, 2 pi)")


def _n_component(q: int, theta, phi):
    """Spherical component n_q = e_q^* . n of the joining unit vector."""
    if q == 0:
        return np.cos(theta) + 0.0j
    return -q * np.sin(theta) * np.exp(-1j * q * phi) / np.sqrt(2.0)


def projector_element(qp: int, q: int, o: Orientation) -> complex:
    """e_{q'}^* . (1 - n n) . e_q at the given orientation."""
    val = (1.0 if qp == q else 0.0) - _n_component(qp, o.theta, o.phi) * np.conj(
        _n_component(q, o.theta, o.phi)
    )
    return complex(val)


# (1/2) integral_0^pi sin^{4-z} cos^z sin(theta) dtheta for z zeros among the indices
_T_INTEGRAL = {0: Fraction(8, 15), 1: Fraction(0), 2: Fraction(2, 15), 3: Fraction(0), 4: Fraction(1, 5)}


@lru_cache(maxsize=None)
def _quartic_average(a: int, b: int, c: int, d: int) -> Fraction:
    """< n_a n_b^* n_c n_d^* > over the sphere, exact."""
    if a + c != b + d:
        return Fraction(0)
    idx = (a, b, c, d)
    zeros = sum(1 for x in idx if x == 0)
    plus = sum(1 for x in idx if x == 1)
    minus = sum(1 for x in idx if x == -1)
    return Fraction(-1) ** plus * Fraction(1, 2 ** ((plus + minus) // 2)) * _T_INTEGRAL[zeros]


@lru_cache(maxsize=None)
def general_average(a: int, b: int, c: int, d: int) -> float:
    """< Delta_{ab} Delta_{cd} > over the random orientation, exact rational.

    Vanishes unless a + c = b + d (azimuthal average).
    """
    val = Fraction(0)
    if a == b and c == d:
        val += 1
    if a == b:
        val -= Fraction(1, 3) if c == d else 0
    if c == d:
        val -= Fraction(1, 3) if a == b else 0
    val += _quartic_average(a, b, c, d)
    return float(val)


@dataclass(frozen=True)
class GeometricWeight:
    value: float
    pair: tuple[int, int]


def pair_average(qp: int, q: int) -> GeometricWeight:
    """< Delta_{q'q} Delta_{qq'} > = < |Delta_{q'q}|^2 >, the co-propagating pair weight."""
    return GeometricWeight(value=general_average(qp, q, q, qp), pair=(qp, q))


def triple_weight(left_pair: tuple[int, int], right_pair: tuple[int, int]) -> float:
    """Factorized weight of a triple-scattering diagram from its two atom pairs.

    Zero unless each pair satisfies the q = q', r = r' survival condition; the
    surviving weight is the product of the two independent pair averages.
    """
    (q, qp), (r, rp) = left_pair, right_pair
    if q != qp or r != rp:
        return 0.0
    return pair_average(q, +1).value * pair_average(-1, r).value


# --------------------------------------------------------------------------
# Surviving polarization-index assignments per diagram template
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IndexAssignment:
    """One surviving set of intermediate polarization indices with its weight."""

    indices: dict
    weight: float

    def __iter__(self):
        yield self.indices
        yield self.weight


def _em_allowed(out_index: int, probe_indices: tuple[int, ...]) -> bool:
    # outgoing polarization must match the laser (+1) or one of the probes
    return out_index == +1 or out_index in probe_indices


@lru_cache(maxsize=None)
def enumerate_allowed_indices(template: str) -> tuple[IndexAssignment, ...]:
    """Intermediate-index assignments surviving both the orientation average
    and the emission selection rule, with their geometric weights."""
    if template == "D-ladder" or template == "D-crossed":
        # both intermediate arrows start at +1 (laser-driven source) and must
        # end at -1 for the final atom to radiate into the detection channel
        return (IndexAssignment(indices={}, weight=pair_average(-1, +1).value),)

    out = []
    if template == "T-ladder-1":
        # chain a -> b -> c; q: index received by b, r: index emitted by b
        for q, r in product(POLARIZATIONS, POLARIZATIONS):
            if not _em_allowed(r, (q,)):
                continue
            w = triple_weight((q, q), (r, r))
            if w != 0.0:
                out.append(IndexAssignment(indices={"q": q, "r": r}, weight=w))
    elif template == "T-ladder-2":
        # two sources feed the final atom; u, v: indices received from each
        for u, v in product(POLARIZATIONS, POLARIZATIONS):
            if not _em_allowed(-1, (u, v)):
                continue
            w = pair_average(u, +1).value * pair_average(v, +1).value
            if w != 0.0:
                out.append(IndexAssignment(indices={"u": u, "v": v}, weight=w))
    elif template == "T-crossed-1":
        # reversed-path interference; orientation average forces the dashed
        # return indices y = -q (pair a-b) and w = -r (pair b-c)
        for q, r in product(POLARIZATIONS, POLARIZATIONS):
            y, w_idx = -q, -r
            if not _em_allowed(r, (q, w_idx)) or not _em_allowed(y, (q, w_idx)):
                continue
            g = general_average(q, +1, y, -1) * general_average(-1, r, +1, w_idx)
            if g != 0.0:
                out.append(IndexAssignment(indices={"q": q, "r": r, "w": w_idx, "y": y}, weight=g))
    elif template == "T-crossed-2":
        # amplitude tree (a, b) -> hub interfering with the path b -> hub -> a;
        # orientation average forces the hub's dashed index toward a to -u
        for u, v in product(POLARIZATIONS, POLARIZATIONS):
            x = -u
            if not _em_allowed(-1, (u, v, v)) or not _em_allowed(x, (u, v, v)):
                continue
            g = general_average(u, +1, x, -1) * pair_average(v, +1).value
            if g != 0.0:
                out.append(IndexAssignment(indices={"u": u, "v": v, "x": x}, weight=g))
    else:
        raise ValueError(f"unknown diagram template {template!r}")
    return tuple(out)
