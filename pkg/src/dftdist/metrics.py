"""Metric-space distances between wave functions, densities and potentials.

Wave functions and densities carry `natural' metrics; with unit-norm
stored amplitudes and particle number N they read

    D_psi = sqrt(2N - 2N |<a|b>|),        D_psi_hat = D_psi / sqrt(2N),
    D_rho = sum_j |rho1_j - rho2_j|,      D_rho_hat = D_rho / (2N),

both scaled onto [0, 1] (orthogonal states and disjoint densities sit at
the top).  Potentials are physical only up to an additive constant, so
their distances minimise over it:

    D_v^A = min_c (1/d) sum_j |v1_j - v2_j + c|      (c* = -median)
    D_v^B = min_c sqrt((1/d) sum_j (v1_j - v2_j + c)^2) = sigma(v1 - v2)

and are squashed onto [0, 1] by D / (D + 1).  The L1 minimiser is the
exact median of the differences (for even d any value between the two
middle order statistics is optimal; the lower one is reported), replacing
iterative reweighting with its closed form.  sigma is the population
standard deviation.  Reported gauge constants follow the difference
convention dv = v1 - v2: ``c_min`` for metric A is the additive constant
realising the minimum, for metric B the mean of dv.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .hilbert import ManyBodyState, overlap

__all__ = [
    "WavefunctionDistance",
    "DensityDistance",
    "PotentialDistance",
    "DistanceReport",
    "wavefunction_distance",
    "density_distance",
    "potential_distance_a",
    "potential_distance_b",
]


class WavefunctionDistance(NamedTuple):
    raw: float
    scaled: float


class DensityDistance(NamedTuple):
    raw: float
    scaled: float


class PotentialDistance(NamedTuple):
    raw: float
    scaled: float
    c_min: float


def wavefunction_distance(a: ManyBodyState, b: ManyBodyState, n_particles: int | None = None):
    """Distance between two states of the same sector, raw and scaled.

    ``n_particles`` defaults to the sector's particle number (the metric
    convention normalises wave functions to N; with unit-norm storage the
    factor enters only through the 2N scale).
    """
    o = abs(overlap(a, b))  # raises on sector mismatch
    n = a.sector.n if n_particles is None else n_particles
    if n != a.sector.n:
        raise ValueError(f"particle count {n} does not match sector ({a.sector.n})")
    gap = max(0.0, 1.0 - min(o, 1.0))
    return WavefunctionDistance(raw=float(np.sqrt(2 * n * gap)), scaled=float(np.sqrt(gap)))


def density_distance(rho1, rho2, n_particles: float):
    """L1 distance between two densities holding ``n_particles`` each."""
    r1 = np.asarray(rho1, dtype=np.float64)
    r2 = np.asarray(rho2, dtype=np.float64)
    if r1.shape != r2.shape:
        raise ValueError(f"density shapes differ: {r1.shape} vs {r2.shape}")
    for which, r in (("first", r1), ("second", r2)):
        if abs(r.sum() - n_particles) > 1e-6:
            raise ValueError(
                f"{which} density sums to {r.sum()!r}, expected {n_particles}"
            )
    raw = float(np.sum(np.abs(r1 - r2)))
    return DensityDistance(raw=raw, scaled=raw / (2.0 * n_particles))


def _deltas(v1, v2):
    a = np.asarray(v1, dtype=np.float64)
    b = np.asarray(v2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"potential shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 1 or a.size == 0:
        raise ValueError("potentials must be non-empty one-dimensional arrays")
    return a - b


def potential_distance_a(v1, v2):
    """Gauge-minimised mean absolute potential distance (metric A)."""
    dv = _deltas(v1, v2)
    # lower median: exact minimiser of the L1 location problem
    c = -float(np.sort(dv)[(len(dv) - 1) // 2])
    raw = float(np.mean(np.abs(dv + c)))
    return PotentialDistance(raw=raw, scaled=raw / (raw + 1.0), c_min=c)


def potential_distance_b(v1, v2):
    """Gauge-minimised root-mean-square potential distance (metric B):
    the population standard deviation of v1 - v2."""
    dv = _deltas(v1, v2)
    mu = float(dv.mean())
    raw = float(np.sqrt(np.mean((dv - mu) ** 2)))
    return PotentialDistance(raw=raw, scaled=raw / (raw + 1.0), c_min=mu)


@dataclass
class DistanceReport:
    """The four scaled distances of one exact-vs-approximation comparison.

    Fields are None when the corresponding quantity was not computed
    (wave-function and potential distances need a converged inversion).
    """

    d_rho_scaled: float | None = None
    d_psi_scaled: float | None = None
    d_va_scaled: float | None = None
    d_vb_scaled: float | None = None
    d_rho_raw: float | None = None
    d_psi_raw: float | None = None
    d_va_raw: float | None = None
    d_vb_raw: float | None = None
    c_min_a: float | None = None
    c_min_b: float | None = None

    @classmethod
    def from_quantities(
        cls,
        exact_state=None,
        other_state=None,
        exact_density=None,
        other_density=None,
        exact_v=None,
        other_v=None,
        n_particles=None,
    ) -> "DistanceReport":
        report = cls()
        if exact_density is not None and other_density is not None:
            rho = density_distance(exact_density, other_density, n_particles)
            report.d_rho_raw, report.d_rho_scaled = rho.raw, rho.scaled
        if exact_state is not None and other_state is not None:
            psi = wavefunction_distance(exact_state, other_state)
            report.d_psi_raw, report.d_psi_scaled = psi.raw, psi.scaled
        if exact_v is not None and other_v is not None:
            va = potential_distance_a(exact_v, other_v)
            vb = potential_distance_b(exact_v, other_v)
            report.d_va_raw, report.d_va_scaled, report.c_min_a = va.raw, va.scaled, va.c_min
            report.d_vb_raw, report.d_vb_scaled, report.c_min_b = vb.raw, vb.scaled, vb.c_min
        return report
