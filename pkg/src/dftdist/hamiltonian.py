"""Sparse many-body Hamiltonian of the 1D Hubbard chain (open ends).

With spin-up creation operators ordered before spin-down ones, every
number-conserving opposite-spin string contributes a configuration
independent global sign, so the Hamiltonian factorises over species:

    H = T_up (x) 1  +  1 (x) T_down  +  diag(U * double_occ + potential)

where ``T_sigma`` is the one-species nearest-neighbour hopping operator in
that species' mask basis.  Hopping signs follow the Jordan-Wigner string
within the species: (-1)**(occupied sites strictly between the endpoints),
which is +1 for every nearest-neighbour hop.

The matrix is assembled in row-compressed form while the estimated
footprint stays below a configurable budget; larger sectors keep only the
factorised pieces and apply the operator on the fly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .hilbert import (
    Basis,
    ManyBodyState,
    SpinSector,
    as_site_field,
    basis_for,
)

__all__ = [
    "HubbardSystem",
    "HubbardOperator",
    "CapacityError",
    "build_hubbard",
    "apply",
    "expectation_energy",
    "expectation_nsq",
    "expectation_nsq_all",
    "hop_sign",
]

# sector dimensions past this raise CapacityError (covers d=20, N=8)
MAX_SECTOR_DIM = 30_000_000
# explicit CSR assembly allowed up to roughly this many stored values
EXPLICIT_NNZ_BUDGET = 40_000_000


class CapacityError(RuntimeError):
    """Sector dimension exceeds the configured memory budget."""


@dataclass(frozen=True)
class HubbardSystem:
    """Chain geometry, couplings and external potential for one sector.

    ``v`` is the spin-independent on-site potential; open boundaries are
    the only supported geometry.
    """

    d: int
    t: float
    U: float
    v: np.ndarray
    sector: SpinSector

    def __post_init__(self):
        if self.d < 2:
            raise ValueError(f"need at least 2 sites, got d={self.d}")
        if not self.t > 0:
            raise ValueError(f"hopping must be positive, got t={self.t}")
        object.__setattr__(self, "v", as_site_field(self.v, self.d))
        if self.sector.d != self.d:
            raise ValueError(
                f"sector is defined on {self.sector.d} sites, system has {self.d}"
            )

    def shifted(self, c: float) -> "HubbardSystem":
        """Same system with the potential shifted by a constant (pure gauge)."""
        return HubbardSystem(self.d, self.t, self.U, self.v + c, self.sector)


def hop_sign(mask: int, i: int, j: int) -> int:
    """Fermionic sign of a same-species hop between sites i and j.

    (-1)**popcount(occupied strictly between i and j); +1 for neighbours.
    """
    lo, hi = (i, j) if i < j else (j, i)
    between = mask & (((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1))
    return -1 if (bin(between).count("1") & 1) else 1


def _species_hopping(masks: np.ndarray, rank: dict, d: int, t: float) -> sp.csr_matrix:
    """-t * (nearest-neighbour hops) for one spin species, CSR."""
    rows, cols = [], []
    for r, m in enumerate(masks):
        m = int(m)
        for j in range(d - 1):
            pair = 0b11 << j
            occ = m & pair
            if occ == (1 << j) or occ == (1 << (j + 1)):
                target = m ^ pair
                rows.append(rank[target])
                cols.append(r)
    n = len(masks)
    data = np.full(len(rows), -t, dtype=np.float64)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


class HubbardOperator:
    """Real symmetric Hamiltonian acting on one sector.

    Exposes matrix-free application plus (when within budget) the explicit
    row-compressed matrix and a dense copy for oracle-sized problems.
    """

    def __init__(self, system: HubbardSystem, explicit_nnz_budget: int = EXPLICIT_NNZ_BUDGET):
        self.system = system
        self.basis = basis_for(system.sector)
        self.dimension = self.basis.dimension
        b = self.basis
        self.t_up = _species_hopping(b.up_masks, b._up_rank, system.d, system.t)
        self.t_down = _species_hopping(b.down_masks, b._down_rank, system.d, system.t)
        # diagonal pieces: interaction counts and per-species potential sums
        self._pot_up = b.occ_up @ system.v
        self._pot_down = b.occ_down @ system.v
        self._csr = None
        self._diag2d = None
        est_nnz = (
            self.t_up.nnz * b.dim_down
            + self.t_down.nnz * b.dim_up
            + self.dimension
        )
        if est_nnz <= explicit_nnz_budget:
            self._csr = self._assemble_csr()
        else:
            self._diag2d = (
                system.U * b.double_occupancy().astype(np.float64)
                + self._pot_up[:, None]
                + self._pot_down[None, :]
            )

    # -- construction ---------------------------------------------------

    def _assemble_csr(self) -> sp.csr_matrix:
        b = self.basis
        h = sp.kron(self.t_up, sp.identity(b.dim_down, format="csr"), format="csr")
        h = h + sp.kron(sp.identity(b.dim_up, format="csr"), self.t_down, format="csr")
        h = h + sp.diags(self.diagonal())
        return h.tocsr()

    def diagonal(self) -> np.ndarray:
        """Flat diagonal: U * doubly-occupied count + potential energy."""
        if self._diag2d is not None:
            return self._diag2d.ravel()
        b = self.basis
        diag = self.system.U * b.double_occupancy().astype(np.float64)
        diag += self._pot_up[:, None]
        diag += self._pot_down[None, :]
        return diag.ravel()

    @property
    def matrix(self) -> sp.csr_matrix:
        """Explicit CSR form; raises CapacityError beyond the budget."""
        if self._csr is None:
            raise CapacityError(
                f"dimension {self.dimension} exceeds the explicit-matrix budget"
            )
        return self._csr

    def dense(self) -> np.ndarray:
        if self.dimension > 20_000:
            raise CapacityError(f"dense copy of dimension {self.dimension} refused")
        return self.matrix.toarray()

    # -- application ----------------------------------------------------

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Matrix-vector product H @ x."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"vector has shape {x.shape}, expected ({self.dimension},)")
        if self._csr is not None:
            return self._csr @ x
        b = self.basis
        X = x.reshape(b.dim_up, b.dim_down)
        Y = self.t_up @ X
        Y += X @ self.t_down.T
        Y += self._diag2d * X
        return Y.ravel()

    def __matmul__(self, x):
        return self.apply(x)


def build_hubbard(
    system: HubbardSystem,
    max_dim: int = MAX_SECTOR_DIM,
    explicit_nnz_budget: int = EXPLICIT_NNZ_BUDGET,
) -> HubbardOperator:
    """Assemble the sector Hamiltonian of ``system``.

    Raises CapacityError when the sector dimension exceeds ``max_dim``
    (the d=30 regime needs matrix-product methods, which are out of scope
    here).
    """
    dim = system.sector.dimension
    if dim > max_dim:
        raise CapacityError(
            f"sector dimension {dim} exceeds the supported cap {max_dim}; "
            "chains at this scale need a matrix-product (DMRG-style) backend"
        )
    return HubbardOperator(system, explicit_nnz_budget=explicit_nnz_budget)


def apply(op: HubbardOperator, x: np.ndarray) -> np.ndarray:
    """Functional alias for ``op.apply(x)``."""
    return op.apply(x)


def expectation_energy(state: ManyBodyState, op: HubbardOperator) -> float:
    """<x|H|x> for a normalised state."""
    x = state.amplitudes if isinstance(state, ManyBodyState) else np.asarray(state)
    if x.shape != (op.dimension,):
        raise ValueError(f"state dimension {x.shape} does not match operator {op.dimension}")
    return float(x @ op.apply(x))


def expectation_nsq_all(state: ManyBodyState) -> np.ndarray:
    """<(n_j_up + n_j_down)^2> for every site j.

    The squared occupation is diagonal in the determinant basis, so this
    reduces to density terms plus the up-down cross correlation.
    """
    b = basis_for(state.sector)
    x2 = state.as_matrix() ** 2
    w_up = x2.sum(axis=1)
    w_down = x2.sum(axis=0)
    n_up = w_up @ b.occ_up
    n_down = w_down @ b.occ_down
    cross = np.einsum("uj,uv,vj->j", b.occ_up, x2, b.occ_down, optimize=True)
    return n_up + n_down + 2.0 * cross


def expectation_nsq(state: ManyBodyState, site: int) -> float:
    """<(n_site_up + n_site_down)^2> at one site; value lies in [0, 4]."""
    d = state.sector.d
    if not (0 <= site < d):
        raise IndexError(f"site {site} out of range for d={d}")
    return float(expectation_nsq_all(state)[site])
