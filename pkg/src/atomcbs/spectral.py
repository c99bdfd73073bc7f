"""Frequency grids, quadrature node sets and spectral components.

A spectrum in this code is a coherent delta spike at the laser frequency
(the "elastic weight", the coefficient of delta(nu)) plus a smooth
inelastic density sampled on a symmetric frequency grid.  Intermediate
frequency integrals run over adapted node sets that resolve the
gamma-wide resonances sitting at 0 and at the generalized Rabi sidebands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConvergenceError(RuntimeError):
    """A quadrature failed its accuracy estimate; carries a refinement hint."""

    def __init__(self, message, hint=None):
        super().__init__(message if hint is None else f"{message} ({hint})")
        self.hint = hint


class GridMismatchError(ValueError):
    """Spectral components defined on different grids cannot be combined."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric detection grid, nu in units of gamma.

    Covers |nu| <= max(10, 2 Omega + 10) by default with step <= 0.05.
    """

    step: float
    half_range: float
    samples: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        n = int(round(self.half_range / self.step))
        samples = self.step * np.arange(-n, n + 1)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @classmethod
    def for_drive(cls, omega: float, step: float = 0.05) -> "FrequencyGrid":
        return cls(step=step, half_range=max(10.0, 2.0 * omega + 10.0))

    @property
    def nu_min(self) -> float:
        return -self.half_range

    @property
    def nu_max(self) -> float:
        return self.half_range

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        return FrequencyGrid(step=self.step / factor, half_range=self.half_range)


@dataclass
class SpectralComponent:
    """Elastic weight (coefficient of delta(nu)) plus inelastic density.

    Ladder components are real; the type-2 crossed component stays complex
    until it enters the final combination through twice its real part.
    """

    grid: FrequencyGrid
    elastic: complex
    inelastic: np.ndarray

    def __post_init__(self):
        self.inelastic = np.asarray(self.inelastic)
        if self.inelastic.shape != self.grid.samples.shape:
            raise GridMismatchError("density length does not match the grid")

    def integrated_inelastic(self) -> complex:
        return np.trapz(self.inelastic, self.grid.samples)

    def total(self) -> complex:
        return self.elastic + self.integrated_inelastic()

    def real_part(self) -> "SpectralComponent":
        return SpectralComponent(self.grid, np.real(self.elastic), np.real(self.inelastic))

    def scaled(self, factor) -> "SpectralComponent":
        return SpectralComponent(self.grid, factor * self.elastic, factor * self.inelastic)

    def __add__(self, other: "SpectralComponent") -> "SpectralComponent":
        if other.grid.step != self.grid.step or other.grid.half_range != self.grid.half_range:
            raise GridMismatchError("components live on different grids")
        return SpectralComponent(self.grid, self.elastic + other.elastic, self.inelastic + other.inelastic)


@dataclass(frozen=True)
class Nodes:
    """Integration nodes with trapezoid weights on a nonuniform axis."""

    x: np.ndarray
    w: np.ndarray

    @classmethod
    def from_points(cls, pts: np.ndarray) -> "Nodes":
        x = np.unique(np.round(np.asarray(pts, dtype=float), 9))
        if len(x) < 2:
            raise ValueError("need at least two nodes")
        w = np.zeros_like(x)
        dx = np.diff(x)
        w[:-1] += 0.5 * dx
        w[1:] += 0.5 * dx
        x.setflags(write=False)
        w.setflags(write=False)
        return cls(x=x, w=w)

    def __len__(self):
        return len(self.x)


def adapted_nodes(omega: float, delta: float = 0.0, fine_step: float = 0.1,
                  coarse_step: float = 0.75, refine: int = 1) -> Nodes:
    """Node set resolving the resonances of the driven atom.

    Dense windows of half width ~6 gamma around 0, +-Omega_g and +-2 Omega_g
    (Omega_g the generalized Rabi frequency), a coarse cover out to
    2 Omega_g + 12 and sparse tails to 3 Omega_g + 18 for convolution mass.
    """
    og = float(np.hypot(omega, delta))
    fine = fine_step / refine
    coarse = coarse_step / refine
    # widen the fine step once features are broad compared to gamma
    fine = max(fine, og / (160.0 * refine))
    pieces = [np.arange(-6.0, 6.0 + fine / 2, fine)]
    for center in (og, 2 * og, -og, -2 * og):
        if abs(center) > 1e-9:
            pieces.append(center + np.arange(-6.0, 6.0 + fine / 2, fine))
    span = 2 * og + 12.0
    pieces.append(np.arange(-span, span + coarse / 2, coarse))
    tail = 3 * og + 18.0
    pieces.append(np.arange(-tail, tail + 1e-9, 3 * coarse))
    return Nodes.from_points(np.concatenate(pieces))


def integrate_nodes(values: np.ndarray, nodes: Nodes):
    return np.tensordot(values, nodes.w, axes=([-1], [0]))
