"""Photon random walk in a homogeneous sphere: scattering-order statistics.

A walker enters the illuminated disk of a sphere of radius R along +z at a
uniformly distributed impact point, takes free paths with exponentially
distributed length (mean free path l) and isotropic redirection after each
scattering event, and leaves; the number of scattering events inside the
sphere is recorded.  The fractions of walkers with exactly one, two, three
and more than three events are the statistical weights of the scattering
orders.  Walkers are simulated in fixed-size batches with independent
seeded substreams, so results are reproducible for a given seed no matter
how the batches are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_BATCH = 1 << 14  # walkers per substream; fixed so results are seed-only


@dataclass(frozen=True)
class WalkConfig:
    radius: float = 0.7        # sphere radius, mm
    mean_free_path: float = 0.75  # scattering mean free path, mm
    n_walkers: int = 1_000_000
    seed: int = 20240101

    def __post_init__(self):
        if self.radius <= 0 or self.mean_free_path <= 0:
            raise ValueError("radius and mean free path must be positive")
        if self.n_walkers < 1:
            raise ValueError("need at least one walker")


@dataclass(frozen=True)
class WeightsReport:
    w1: float
    w2: float
    w3: float
    w_gt3: float
    stderr: tuple[float, float, float, float]
    n_walkers: int
    n_scattered: int
    mean_step: float
    mean_path: float
    optical_thickness: float

    def fractions(self) -> tuple[float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.w_gt3)


def _walk_batch(rng: np.random.Generator, n: int, radius: float, mfp: float):
    """Event counts and bookkeeping for one batch of walkers."""
    r = radius * np.sqrt(rng.random(n))
    phi = 2 * np.pi * rng.random(n)
    x = r * np.cos(phi)
    y = r * np.sin(phi)
    z = -np.sqrt(radius**2 - r**2)
    pos = np.stack([x, y, z], axis=1)
    direction = np.zeros((n, 3))
    direction[:, 2] = 1.0
    counts = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    step_sum = 0.0
    step_n = 0
    path = np.zeros(n)
    while np.any(alive):
        idx = np.nonzero(alive)[0]
        steps = rng.exponential(mfp, idx.size)
        step_sum += steps.sum()
        step_n += steps.size
        cand = pos[idx] + direction[idx] * steps[:, None]
        inside = np.einsum("ij,ij->i", cand, cand) <= radius**2
        hit = idx[inside]
        out = idx[~inside]
        # walkers leaving: count the in-sphere part of the final segment
        if out.size:
            p = pos[out]
            d = direction[out]
            b = np.einsum("ij,ij->i", p, d)
            c = np.einsum("ij,ij->i", p, p) - radius**2
            t_exit = -b + np.sqrt(np.maximum(b * b - c, 0.0))
            path[out] += t_exit
            alive[out] = False
        if hit.size:
            path[hit] += steps[inside]
            pos[hit] = cand[inside]
            counts[hit] += 1
            u = 2.0 * rng.random(hit.size) - 1.0
            ph = 2 * np.pi * rng.random(hit.size)
            s = np.sqrt(1.0 - u * u)
            direction[hit, 0] = s * np.cos(ph)
            direction[hit, 1] = s * np.sin(ph)
            direction[hit, 2] = u
    return counts, step_sum, step_n, path.sum()


def run_walk(cfg: WalkConfig) -> WeightsReport:
    """Scattering-order fractions over walkers with at least one event."""
    ss = np.random.SeedSequence(cfg.seed)
    n_batches = (cfg.n_walkers + _BATCH - 1) // _BATCH
    children = ss.spawn(n_batches)
    hist = np.zeros(4, dtype=np.int64)  # 1, 2, 3, >3 events
    step_sum = 0.0
    step_n = 0
    path_sum = 0.0
    done = 0
    for k in range(n_batches):
        n = min(_BATCH, cfg.n_walkers - done)
        done += n
        rng = np.random.Generator(np.random.Philox(children[k]))
        counts, s_sum, s_n, p_sum = _walk_batch(rng, n, cfg.radius, cfg.mean_free_path)
        hist[0] += int(np.count_nonzero(counts == 1))
        hist[1] += int(np.count_nonzero(counts == 2))
        hist[2] += int(np.count_nonzero(counts == 3))
        hist[3] += int(np.count_nonzero(counts > 3))
        step_sum += s_sum
        step_n += s_n
        path_sum += p_sum
    n_scattered = int(hist.sum())
    if n_scattered == 0:
        fr = np.zeros(4)
        err = np.zeros(4)
    else:
        fr = hist / n_scattered
        err = np.sqrt(fr * (1.0 - fr) / n_scattered)
    return WeightsReport(
        w1=float(fr[0]), w2=float(fr[1]), w3=float(fr[2]), w_gt3=float(fr[3]),
        stderr=tuple(float(e) for e in err),
        n_walkers=cfg.n_walkers,
        n_scattered=n_scattered,
        mean_step=float(step_sum / max(step_n, 1)),
        mean_path=float(path_sum / cfg.n_walkers),
        optical_thickness=float(2.0 * cfg.radius / cfg.mean_free_path),
    )


def hh_weights(report: WeightsReport) -> tuple[float, float]:
    """Double/triple weights used in the helicity-preserving channel.

    Single scattering is filtered by the polarization analysis, which only
    renormalizes the weights without changing their ratio; the raw
    fractions are therefore used directly.
    """
    if report.w2 == 0.0 and report.w3 == 0.0:
        raise ValueError("no multiple scattering in this report")
    return report.w2, report.w3
