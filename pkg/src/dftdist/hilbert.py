"""Occupation-number Hilbert space for spin-1/2 fermions on a chain.

A sector fixes the number of spin-up and spin-down particles on ``d``
sites.  Basis configurations are pairs of bit masks (bit ``j`` set means
site ``j`` occupied by that spin species), enumerated in ascending integer
order per species and combined lexicographically on
``(up_mask, down_mask)``: the flat index of a configuration is

    index = rank(up_mask) * n_down_configs + rank(down_mask)

This ordering is load-bearing: persisted state files and every reshape of
an amplitude vector into an (up, down) matrix depend on it.

Amplitudes are real.  States are stored with unit norm; conventions that
normalise to the particle number are applied inside the metric formulas,
not here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import NamedTuple

import numpy as np

__all__ = [
    "SpinSector",
    "Configuration",
    "Basis",
    "ManyBodyState",
    "basis_for",
    "enumerate_basis",
    "as_site_field",
    "density_of_state",
    "overlap",
    "random_state",
    "save_state",
    "load_state",
]


class SectorError(ValueError):
    """Raised for invalid spin sectors or sector mismatches."""


@dataclass(frozen=True)
class SpinSector:
    """Particle content (n_up, n_down) on a chain of d sites."""

    d: int
    n_up: int
    n_down: int

    def __post_init__(self):
        if self.d < 1:
            raise SectorError(f"site count must be >= 1, got {self.d}")
        if not (0 <= self.n_up <= self.d):
            raise SectorError(f"n_up={self.n_up} out of range for d={self.d}")
        if not (0 <= self.n_down <= self.d):
            raise SectorError(f"n_down={self.n_down} out of range for d={self.d}")

    @property
    def n(self) -> int:
        """Total particle number."""
        return self.n_up + self.n_down

    @property
    def dimension(self) -> int:
        return comb(self.d, self.n_up) * comb(self.d, self.n_down)


class Configuration(NamedTuple):
    """One determinant: occupation masks for each spin species."""

    up_mask: int
    down_mask: int


def _masks_with_popcount(d: int, k: int) -> np.ndarray:
    """All d-bit masks with k bits set, ascending (Gosper's hack)."""
    count = comb(d, k)
    out = np.empty(count, dtype=np.int64)
    if k == 0:
        out[0] = 0
        return out
    m = (1 << k) - 1
    limit = 1 << d
    for i in range(count):
        out[i] = m
        # lowest set bit trick advances to the next mask of equal popcount
        u = m & -m
        v = m + u
        m = v | (((m ^ v) // u) >> 2)
        if m >= limit and i + 1 < count:  # pragma: no cover - guarded by comb()
            raise RuntimeError("mask enumeration overran the site range")
    return out


class Basis:
    """Indexed determinant basis of one spin sector.

    Holds per-species mask tables, occupation matrices and O(1)
    mask -> rank lookups.  Immutable after construction; safe to share.
    """

    def __init__(self, sector: SpinSector):
        self.sector = sector
        self.up_masks = _masks_with_popcount(sector.d, sector.n_up)
        self.down_masks = _masks_with_popcount(sector.d, sector.n_down)
        self.dim_up = len(self.up_masks)
        self.dim_down = len(self.down_masks)
        self.dimension = self.dim_up * self.dim_down
        self._up_rank = {int(m): i for i, m in enumerate(self.up_masks)}
        self._down_rank = {int(m): i for i, m in enumerate(self.down_masks)}
        # occupation matrices: occ[r, j] = 1.0 if bit j of mask r is set
        sites = np.arange(sector.d, dtype=np.int64)
        self.occ_up = ((self.up_masks[:, None] >> sites[None, :]) & 1).astype(np.float64)
        self.occ_down = ((self.down_masks[:, None] >> sites[None, :]) & 1).astype(np.float64)

    def config_at(self, index: int) -> Configuration:
        if not (0 <= index < self.dimension):
            raise IndexError(f"index {index} out of range for dimension {self.dimension}")
        iu, idn = divmod(index, self.dim_down)
        return Configuration(int(self.up_masks[iu]), int(self.down_masks[idn]))

    def index_of(self, config: Configuration) -> int:
        try:
            iu = self._up_rank[int(config.up_mask)]
            idn = self._down_rank[int(config.down_mask)]
        except KeyError:
            raise SectorError(f"configuration {config} not in sector {self.sector}") from None
        return iu * self.dim_down + idn

    def double_occupancy(self) -> np.ndarray:
        """(dim_up, dim_down) int8 table of doubly occupied site counts."""
        docc = getattr(self, "_docc", None)
        if docc is None:
            docc = np.empty((self.dim_up, self.dim_down), dtype=np.int8)
            # chunked to keep the uint64 temporary small for large species bases
            step = max(1, 2**22 // max(1, self.dim_down))
            for lo in range(0, self.dim_up, step):
                hi = min(lo + step, self.dim_up)
                docc[lo:hi] = np.bitwise_count(
                    self.up_masks[lo:hi, None] & self.down_masks[None, :]
                )
            self._docc = docc
        return docc


@lru_cache(maxsize=64)
def basis_for(sector: SpinSector) -> Basis:
    """Cached basis constructor; bases are immutable and shareable."""
    return Basis(sector)


def enumerate_basis(sector: SpinSector) -> list[Configuration]:
    """All configurations of the sector, in index order.

    Materialises the full list; intended for small sectors (tests,
    inspection).  Large sectors should work through :class:`Basis`.
    """
    b = basis_for(sector)
    return [
        Configuration(int(u), int(dn))
        for u in b.up_masks
        for dn in b.down_masks
    ]


@dataclass
class ManyBodyState:
    """Unit-normalised real amplitude vector over a sector's basis."""

    sector: SpinSector
    amplitudes: np.ndarray
    _NORM_TOL = 1e-12

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=np.float64)
        if amp.shape != (self.sector.dimension,):
            raise ValueError(
                f"amplitude vector has shape {amp.shape}, expected ({self.sector.dimension},)"
            )
        nrm2 = float(amp @ amp)
        if abs(nrm2 - 1.0) > 3 * self._NORM_TOL:
            raise ValueError(f"state not normalised: |amp|^2 = {nrm2!r}")
        self.amplitudes = amp

    @classmethod
    def from_unnormalized(cls, sector: SpinSector, amplitudes) -> "ManyBodyState":
        amp = np.asarray(amplitudes, dtype=np.float64)
        nrm = np.linalg.norm(amp)
        if nrm == 0.0:
            raise ValueError("cannot normalise the zero vector")
        return cls(sector, amp / nrm)

    def as_matrix(self) -> np.ndarray:
        """Amplitudes reshaped to (dim_up, dim_down), sharing memory."""
        b = basis_for(self.sector)
        return self.amplitudes.reshape(b.dim_up, b.dim_down)


def as_site_field(values, d: int | None = None) -> np.ndarray:
    """Validate and return a finite real per-site vector (float64 copy)."""
    v = np.array(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"site field must be one-dimensional, got shape {v.shape}")
    if d is not None and len(v) != d:
        raise ValueError(f"site field has length {len(v)}, expected {d}")
    if not np.all(np.isfinite(v)):
        raise ValueError("site field contains non-finite entries")
    return v


def density_of_state(state: ManyBodyState):
    """Site-resolved densities ``(total, up, down)`` of a state.

    ``total[j] = <n_j_up + n_j_down>``; sums recover the sector's particle
    counts exactly (up to rounding).
    """
    b = basis_for(state.sector)
    x2 = state.as_matrix() ** 2
    w_up = x2.sum(axis=1)
    w_down = x2.sum(axis=0)
    up = w_up @ b.occ_up
    down = w_down @ b.occ_down
    return up + down, up, down


def overlap(a: ManyBodyState, b: ManyBodyState) -> float:
    """Inner product of two states over the shared configuration basis."""
    if a.sector != b.sector:
        raise SectorError(f"incompatible sectors {a.sector} and {b.sector}")
    return float(a.amplitudes @ b.amplitudes)


def random_state(sector: SpinSector, rng: np.random.Generator) -> ManyBodyState:
    """State with i.i.d. uniform [-1, 1] amplitudes, then normalised.

    Reproducible: the draw consumes exactly ``dimension`` variates from
    ``rng.uniform``.
    """
    raw = rng.uniform(-1.0, 1.0, size=sector.dimension)
    return ManyBodyState.from_unnormalized(sector, raw)


_HEADER = struct.Struct("<4q")


def save_state(path, state: ManyBodyState) -> None:
    """Binary dump: little-endian int64 header (d, n_up, n_down, dimension)
    followed by the amplitudes as little-endian float64 in basis order."""
    s = state.sector
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(s.d, s.n_up, s.n_down, s.dimension))
        fh.write(np.ascontiguousarray(state.amplitudes, dtype="<f8").tobytes())


def load_state(path) -> ManyBodyState:
    """Read a state written by :func:`save_state`."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"truncated state file {path!r}")
        d, n_up, n_down, dim = _HEADER.unpack(head)
        sector = SpinSector(int(d), int(n_up), int(n_down))
        if dim != sector.dimension:
            raise ValueError(
                f"header dimension {dim} does not match sector dimension {sector.dimension}"
            )
        amp = np.frombuffer(fh.read(8 * dim), dtype="<f8")
        if len(amp) != dim:
            raise ValueError(f"truncated amplitude payload in {path!r}")
    return ManyBodyState(sector, amp.astype(np.float64))
