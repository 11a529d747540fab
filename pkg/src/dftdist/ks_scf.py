"""Self-consistent Kohn-Sham solver on the lattice.

The effective single-particle problem is the d x d tridiagonal matrix
with hopping -t off the diagonal and

    v_eff = v_ext + (U/2) n + v_xc(n, U)

on it.  Both spin channels share v_eff and differ only in how many of the
lowest orbitals they fill; for n_up = n_down the two spin densities are
the same array, which is the mechanism behind the error doubling in
non-magnetic chains.

Linear density mixing with automatic step halving: the exchange
correlation potential jumps at unit filling, which can trap the plain
iteration in a limit cycle; whenever the best residual stops improving
for a stretch of iterations the new-density fraction is halved (down to a
floor), which restores contraction in the cusp-grazing regimes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .balda import vxc
from .hamiltonian import HubbardSystem
from .hilbert import as_site_field

__all__ = [
    "KsResult",
    "ScfError",
    "FrontierDegeneracyError",
    "single_particle_solve",
    "solve_ks",
]

ORBITAL_GAP_MIN = 1e-12
_STALL_WINDOW = 30  # iterations without best-residual progress before halving


class ScfError(RuntimeError):
    """Self-consistency loop exhausted its iteration budget."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class FrontierDegeneracyError(RuntimeError):
    """Highest occupied and lowest empty orbital are degenerate."""


@dataclass
class KsResult:
    density: np.ndarray
    density_up: np.ndarray
    density_down: np.ndarray
    v_eff: np.ndarray
    orbital_energies: np.ndarray
    scf_iterations: int
    converged: bool
    residual: float
    mixing_final: float


def single_particle_solve(v_eff, d: int | None = None, t: float = 1.0):
    """Ascending spectrum and orthonormal orbitals of the KS matrix.

    The matrix is tridiagonal with diagonal ``v_eff`` and constant
    off-diagonal ``-t``; orbitals are returned as columns.
    """
    v_eff = as_site_field(v_eff, d)
    n = len(v_eff)
    if n == 1:
        return v_eff.copy(), np.ones((1, 1))
    return eigh_tridiagonal(v_eff, -t * np.ones(n - 1))


def _fill_lowest(orbitals: np.ndarray, count: int) -> np.ndarray:
    if count == 0:
        return np.zeros(orbitals.shape[0])
    return (orbitals[:, :count] ** 2).sum(axis=1)


def _check_frontier(energies: np.ndarray, count: int):
    if 0 < count < len(energies):
        gap = energies[count] - energies[count - 1]
        if gap < ORBITAL_GAP_MIN:
            raise FrontierDegeneracyError(
                f"orbital gap {gap:.3e} below {ORBITAL_GAP_MIN:g} at occupation {count}; "
                "fractional occupation is unsupported"
            )


def solve_ks(
    system: HubbardSystem,
    tol: float = 1e-10,
    max_iter: int = 5000,
    mixing: float = 0.2,
    mixing_floor: float = 0.025,
) -> KsResult:
    """Self-consistent KS-LDA density of ``system``'s sector.

    Convergence metric is the max per-site |density change| per cycle.
    Raises ScfError after ``max_iter`` cycles and FrontierDegeneracyError
    when a spin channel would have to fractionally occupy a degenerate
    orbital pair.
    """
    sector = system.sector
    if sector.n_up > system.d or sector.n_down > system.d:
        raise ValueError("sector occupations exceed the number of orbitals")
    n_tot = np.full(system.d, sector.n / system.d)
    frac = mixing
    best = np.inf
    stall = 0
    for it in range(1, max_iter + 1):
        v_eff = system.v + 0.5 * system.U * n_tot + vxc(n_tot, system.U, system.t)
        energies, orbitals = single_particle_solve(v_eff, system.d, system.t)
        _check_frontier(energies, sector.n_up)
        _check_frontier(energies, sector.n_down)
        up = _fill_lowest(orbitals, sector.n_up)
        down = up if sector.n_down == sector.n_up else _fill_lowest(orbitals, sector.n_down)
        out = up + down
        residual = float(np.max(np.abs(out - n_tot)))
        if residual < tol:
            v_out = system.v + 0.5 * system.U * out + vxc(out, system.U, system.t)
            return KsResult(
                density=out,
                density_up=up,
                density_down=down,
                v_eff=v_out,
                orbital_energies=energies,
                scf_iterations=it,
                converged=True,
                residual=residual,
                mixing_final=frac,
            )
        if residual < best - 1e-16:
            best = residual
            stall = 0
        else:
            stall += 1
            if stall >= _STALL_WINDOW and frac > mixing_floor:
                frac = max(0.5 * frac, mixing_floor)
                stall = 0
        n_tot = (1.0 - frac) * n_tot + frac * out
    raise ScfError(
        f"KS self-consistency not reached in {max_iter} iterations "
        f"(best residual {best:.3e})",
        best_residual=best,
    )
