"""Iterative density-to-potential inversion for interacting chains.

Given a target density, an interaction strength and a spin sector, the
recursion updates the external potential site by site,

    v_raw_i  = v_i + (n_i - n_target_i) * |E| / <n_i^2>,
    v_next   = keep * v + (1 - keep) * v_raw        (keep = 0.8),

solving the interacting ground state anew at every step, until the
average per-site density error drops below the threshold (1e-8 by
default).  The factor |E| sets the step scale; when the ground energy of
the iterate sits too close to zero the potential is (virtually) shifted
by a constant so that E = -1 -- a pure gauge, invisible to densities and
removed from the returned potential, which is centred to sum zero.

Near-empty target sites make the problem ill-conditioned (the divisor
<n_i^2> vanishes together with the density, and the density-potential
map loses injectivity in that limit), so targets with sites at or below
``empty_floor`` are rejected up front.

The per-step eigensolves warm-start from the previous ground state; the
first step uses the dense oracle path when the sector is small enough,
which also screens for ground-state degeneracy before any work is done.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .eigensolver import ConvergenceError, EigenResult, ground_state
from .hamiltonian import HubbardSystem, build_hubbard, expectation_nsq_all
from .hilbert import ManyBodyState, SpinSector, as_site_field, density_of_state

__all__ = [
    "InversionResult",
    "InversionError",
    "IllConditionedTargetError",
    "DegenerateGroundStateError",
    "InversionConvergenceError",
    "invert_density",
    "build_ilda",
    "update_step",
]

DEFAULT_THRESHOLD = 1e-8
DEFAULT_KEEP_FRACTION = 0.8
DEFAULT_EMPTY_FLOOR = 1e-6
DEFAULT_ENERGY_FLOOR = 0.5
# below this dimension, dense solves beat warm-started Lanczos per step
_DENSE_STEP_DIM = 128


class InversionError(RuntimeError):
    pass


class IllConditionedTargetError(InversionError):
    """Target density has a site too close to empty."""


class DegenerateGroundStateError(InversionError):
    """Ground-state degeneracy encountered; the density-potential map is
    not guaranteed one-to-one."""


class InversionConvergenceError(InversionError):
    def __init__(self, message, trace=None, best_error=None):
        super().__init__(message)
        self.trace = trace or []
        self.best_error = best_error


@dataclass
class InversionResult:
    """Potential (centred to sum zero), state and convergence record."""

    v: np.ndarray
    state: ManyBodyState
    energy: float
    iterations: int
    final_error: float
    converged: bool
    trace: list = field(repr=False, default_factory=list)


def update_step(v, density, target, energy, nsq, keep_fraction=DEFAULT_KEEP_FRACTION,
                energy_floor=DEFAULT_ENERGY_FLOOR):
    """One potential update; returns (v_next, v_raw).

    Sites denser than the target get their raw potential raised and vice
    versa (|E| and <n^2> are positive).  ``energy_floor`` activates the
    constant-shift guard that replaces a vanishing |E| by 1.
    """
    scale = abs(energy) if abs(energy) >= energy_floor else 1.0
    v_raw = v + (density - target) * scale / nsq
    return keep_fraction * v + (1.0 - keep_fraction) * v_raw, v_raw


def _solve_iterate(system, lanczos_tol, dense_threshold, warm, max_dim):
    op = build_hubbard(system, max_dim=max_dim)
    if warm is not None and op.dimension > _DENSE_STEP_DIM:
        try:
            return ground_state(op, tol=lanczos_tol, dense_threshold=_DENSE_STEP_DIM, start=warm)
        except ConvergenceError:
            # cold restart, then the dense oracle if the sector allows it
            try:
                return ground_state(op, tol=lanczos_tol, dense_threshold=_DENSE_STEP_DIM)
            except ConvergenceError:
                if op.dimension <= dense_threshold:
                    return ground_state(op, tol=lanczos_tol, dense_threshold=dense_threshold)
                raise
    return ground_state(op, tol=lanczos_tol, dense_threshold=dense_threshold)


def invert_density(
    target,
    U: float,
    t: float,
    sector: SpinSector,
    v0=None,
    threshold: float = DEFAULT_THRESHOLD,
    max_iter: int = 10000,
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    empty_floor: float = DEFAULT_EMPTY_FLOOR,
    energy_floor: float = DEFAULT_ENERGY_FLOOR,
    lanczos_tol: float = 1e-14,
    dense_threshold: int = 2000,
    max_dim: int | None = None,
    trace_path=None,
) -> InversionResult:
    """Find the external potential whose ground state has ``target`` density.

    Stops when the average per-site density error falls below
    ``threshold``.  The returned potential is centred to sum zero (the
    physical potential class is insensitive to constants).  The trace --
    rows of (iteration, average_error, energy) -- is attached to the
    result and optionally streamed to ``trace_path`` as CSV.
    """
    d = sector.d
    target = as_site_field(target, d)
    n_expected = sector.n
    if abs(target.sum() - n_expected) > 1e-6:
        raise ValueError(
            f"target density sums to {target.sum()!r}, sector holds {n_expected} particles"
        )
    if np.any(target < 0) or np.any(target > 2):
        raise ValueError("target density entries must lie in [0, 2]")
    low = int(np.argmin(target))
    if target[low] <= empty_floor:
        raise IllConditionedTargetError(
            f"target site {low} at density {target[low]:.3e} <= empty floor "
            f"{empty_floor:g}; the density-potential map is ill-conditioned there"
        )
    if max_dim is None:
        from .hamiltonian import MAX_SECTOR_DIM
        max_dim = MAX_SECTOR_DIM

    v = np.zeros(d) if v0 is None else as_site_field(v0, d).copy()
    trace: list[tuple[int, float, float]] = []
    best_err = np.inf
    warm = None
    writer = ctx = None
    if trace_path is not None:
        ctx = open(trace_path, "w", newline="")
        writer = csv.writer(ctx)
        writer.writerow(["iteration", "average_error", "energy"])
    try:
        for k in range(max_iter + 1):
            system = HubbardSystem(d, t, U, v, sector)
            res = _solve_iterate(system, lanczos_tol, dense_threshold, warm, max_dim)
            if res.degenerate:
                raise DegenerateGroundStateError(
                    f"ground-state gap {res.gap:.3e} below 1e-10 at iteration {k}"
                )
            density, _, _ = density_of_state(res.state)
            err = float(np.mean(np.abs(density - target)))
            trace.append((k, err, res.energy))
            if writer is not None:
                writer.writerow([k, repr(err), repr(res.energy)])
            best_err = min(best_err, err)
            if err < threshold:
                shift = v.mean()
                return InversionResult(
                    v=v - shift,
                    state=res.state,
                    energy=res.energy - n_expected * shift,
                    iterations=k,
                    final_error=err,
                    converged=True,
                    trace=trace,
                )
            nsq = expectation_nsq_all(res.state)
            v, _ = update_step(
                v, density, target, res.energy, nsq,
                keep_fraction=keep_fraction, energy_floor=energy_floor,
            )
            warm = res.vector
    finally:
        if ctx is not None:
            ctx.close()
    raise InversionConvergenceError(
        f"inversion not converged after {max_iter} iterations "
        f"(best average error {best_err:.3e}, threshold {threshold:g})",
        trace=trace,
        best_error=best_err,
    )


def build_ilda(
    system: HubbardSystem,
    scf_tol: float = 1e-10,
    scf_max_iter: int = 5000,
    scf_mixing: float = 0.2,
    **inversion_opts,
):
    """KS-LDA solve followed by inversion of the LDA density.

    Returns ``(KsResult, InversionResult)``.  The inverted system shares
    the interaction operator of ``system``; the inversion starts from the
    original external potential.
    """
    from .ks_scf import solve_ks

    ks = solve_ks(system, tol=scf_tol, max_iter=scf_max_iter, mixing=scf_mixing)
    inv = invert_density(
        ks.density,
        system.U,
        system.t,
        system.sector,
        v0=system.v,
        **inversion_opts,
    )
    return ks, inv
