"""Ground states of real symmetric operators.

Three paths behind one entry point:

* dense diagonalisation below ``dense_threshold`` (doubles as the oracle);
* Lanczos with full reorthogonalisation of the Krylov basis for sparse
  sectors (robust against ghost eigenvalues at these dimensions);
* ARPACK (implicitly restarted Lanczos) for sectors so large that storing
  the full Krylov basis would blow the memory budget.

The default start vector is the normalised all-ones vector: for the
Hubbard sectors built here the off-diagonal entries are non-positive and
the hop graph is connected, so the ground state has strictly positive
amplitudes (Perron-Frobenius) and a guaranteed overlap with it.  If the
iteration nevertheless exhausts the Krylov space without converging (the
start vector was numerically orthogonal to the ground state), it restarts
once from a seeded random vector.

Convergence is declared at ``|H x - E x| <= tol * max(1, |E|)``; the
energy-relative scale keeps the criterion meaningful at tolerances near
the floating-point floor of the matrix norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hilbert import ManyBodyState

__all__ = [
    "EigenResult",
    "ConvergenceError",
    "ground_state",
    "dense_spectrum",
]

DEGENERACY_GAP = 1e-10
_FALLBACK_SEED = 20160111  # seeded random restart, documented fixed stream


class ConvergenceError(RuntimeError):
    """Eigensolve did not reach the requested residual."""

    def __init__(self, message, best_residual=None, best_energy=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_energy = best_energy


@dataclass
class EigenResult:
    """Lowest eigenpair with convergence metadata.

    ``state`` is a ManyBodyState when the operator carries a sector basis,
    otherwise the bare eigenvector.  ``gap`` is the best available estimate
    of the distance to the second eigenvalue; ``degenerate`` is set when it
    falls below 1e-10 (the inversion scheme requires a unique ground
    state, so callers treat this as a warning).
    """

    energy: float
    state: object
    residual_norm: float
    iterations: int
    method: str
    gap: float | None = None
    degenerate: bool = False

    @property
    def vector(self) -> np.ndarray:
        if isinstance(self.state, ManyBodyState):
            return self.state.amplitudes
        return self.state


def _as_matvec(op):
    """Normalise the operator argument to (matvec, dimension, extras)."""
    if hasattr(op, "apply") and hasattr(op, "dimension"):
        return op.apply, op.dimension, op
    if sp.issparse(op):
        m = op.tocsr()
        return (lambda x: m @ x), m.shape[0], m
    a = np.asarray(op, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square operator, got shape {a.shape}")
    return (lambda x: a @ x), a.shape[0], a


def _to_dense(raw, dim):
    if isinstance(raw, np.ndarray):
        return raw
    if sp.issparse(raw):
        return raw.toarray()
    return raw.dense()


def _wrap_state(raw_op, x):
    basis = getattr(raw_op, "basis", None)
    if basis is not None:
        return ManyBodyState(basis.sector, x / np.linalg.norm(x))
    return x


def _canonical_sign(x: np.ndarray) -> np.ndarray:
    pivot = x[np.argmax(np.abs(x))]
    return -x if pivot < 0 else x


def dense_spectrum(matrix, max_size: int = 2000):
    """All eigenpairs of a small real symmetric matrix, ascending.

    Returns ``(values, vectors)`` with orthonormal columns.  Refuses
    matrices larger than ``max_size`` (this path is O(n^3) and doubles as
    the test oracle; big sectors go through :func:`ground_state`).
    """
    a = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > max_size:
        raise ValueError(f"matrix of size {a.shape[0]} exceeds dense threshold {max_size}")
    vals, vecs = sla.eigh(a)
    return vals, vecs


def _dense_ground_state(raw_op, dim, matvec, tol):
    vals, vecs = sla.eigh(_to_dense(raw_op, dim))
    e = float(vals[0])
    x = _canonical_sign(vecs[:, 0].copy())
    res = float(np.linalg.norm(matvec(x) - e * x))
    gap = float(vals[1] - vals[0]) if dim > 1 else None
    return EigenResult(
        energy=e,
        state=_wrap_state(raw_op, x),
        residual_norm=res,
        iterations=1,
        method="dense",
        gap=gap,
        degenerate=(gap is not None and gap < DEGENERACY_GAP),
    )


def _lanczos(matvec, dim, v0, tol, max_iter, ritz_history=None):
    """Full-reorthogonalisation Lanczos.

    Returns ``(E, x, res, iters, gap, invariant)`` where ``invariant``
    marks convergence through exhaustion of a proper invariant subspace
    (the eigenpair is exact for that subspace but may not be the global
    minimum if the start vector had no ground-state component).
    """
    m = min(max_iter, dim)
    V = np.empty((m, dim))
    alphas = np.empty(m)
    betas = np.empty(m)  # betas[k] couples V[k] and V[k+1]
    q = v0 / np.linalg.norm(v0)
    V[0] = q
    beta_prev = 0.0
    best = (np.inf, None, np.inf, 0, None)  # (energy, x, residual, iters, gap)
    for k in range(m):
        w = matvec(V[k])
        alphas[k] = V[k] @ w
        w -= alphas[k] * V[k]
        if k > 0:
            w -= beta_prev * V[k - 1]
        # two reorthogonalisation sweeps against the whole basis
        for _ in range(2):
            w -= V[: k + 1].T @ (V[: k + 1] @ w)
        beta = np.linalg.norm(w)
        scale_norm = np.max(np.abs(alphas[: k + 1])) + (np.max(betas[:k]) if k else 0.0)
        vals, svecs = sla.eigh_tridiagonal(
            alphas[: k + 1], betas[:k], select="i", select_range=(0, min(1, k))
        )
        theta = float(vals[0])
        if ritz_history is not None:
            ritz_history.append(theta)
        thr = tol * max(1.0, abs(theta))
        s = svecs[:, 0]
        res_est = beta * abs(s[-1])
        breakdown = beta <= 1e-13 * max(1.0, scale_norm)
        if res_est <= thr or breakdown or k == m - 1:
            x = V[: k + 1].T @ s
            x /= np.linalg.norm(x)
            res = float(np.linalg.norm(matvec(x) - theta * x))
            if res < best[2]:
                gap = float(vals[1] - vals[0]) if len(vals) > 1 else None
                best = (theta, x, res, k + 1, gap)
            if res <= thr:
                e, x, res, iters, gap = best
                return e, _canonical_sign(x), res, iters, gap, (breakdown and k + 1 < dim)
            if breakdown:
                # invariant subspace exhausted before meeting tol
                raise ConvergenceError(
                    f"Krylov space exhausted at iteration {k + 1} "
                    f"with residual {res:.3e}",
                    best_residual=res,
                    best_energy=theta,
                )
        if k + 1 < m:
            beta_prev = beta
            betas[k] = beta
            V[k + 1] = w / beta
    e, x, res, iters, gap = best
    raise ConvergenceError(
        f"Lanczos did not converge in {m} iterations (best residual {res:.3e})",
        best_residual=res,
        best_energy=e,
    )


def _arpack_ground_state(raw_op, dim, matvec, tol, max_iter, v0, ncv):
    linop = spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.float64)
    k = 2 if dim > 2 else 1
    vals, vecs = spla.eigsh(
        linop, k=k, which="SA", v0=v0, tol=max(tol, 1e-14), ncv=ncv, maxiter=max_iter
    )
    order = np.argsort(vals)
    e = float(vals[order[0]])
    x = _canonical_sign(np.ascontiguousarray(vecs[:, order[0]]))
    res = float(np.linalg.norm(matvec(x) - e * x))
    thr = tol * max(1.0, abs(e))
    if res > 10 * thr:
        raise ConvergenceError(
            f"restarted-Lanczos residual {res:.3e} above threshold {thr:.3e}",
            best_residual=res,
            best_energy=e,
        )
    gap = float(vals[order[1]] - vals[order[0]]) if k == 2 else None
    return EigenResult(
        energy=e,
        state=_wrap_state(raw_op, x),
        residual_norm=res,
        iterations=-1,  # ARPACK does not report its iteration count
        method="arpack",
        gap=gap,
        degenerate=(gap is not None and gap < DEGENERACY_GAP),
    )


def ground_state(
    op,
    tol: float = 1e-14,
    max_iter: int | None = None,
    dense_threshold: int = 2000,
    start: np.ndarray | None = None,
    basis_budget_bytes: int = 1_600_000_000,
    arpack_ncv: int = 10,
    _ritz_history: list | None = None,
) -> EigenResult:
    """Lowest eigenpair of a real symmetric operator.

    Parameters
    ----------
    op : HubbardOperator, ndarray or sparse matrix
    tol : residual tolerance, relative to max(1, |E|)
    max_iter : Lanczos iteration cap (default min(dimension, 400))
    dense_threshold : dimensions up to this use dense diagonalisation
    start : optional start vector (e.g. warm start from a previous solve)

    Raises ConvergenceError if the residual target cannot be met, carrying
    the best residual reached.  A ground-state gap below 1e-10 sets the
    ``degenerate`` flag on the result.
    """
    matvec, dim, raw = _as_matvec(op)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if dim <= dense_threshold:
        return _dense_ground_state(raw, dim, matvec, tol)
    if max_iter is None:
        max_iter = min(dim, 400)

    # full-basis storage beyond the budget: delegate to ARPACK
    if (min(max_iter, dim) + 1) * dim * 8 > basis_budget_bytes:
        affordable = basis_budget_bytes // (8 * dim)
        if affordable < 80:
            v0 = start if start is not None else np.ones(dim)
            return _arpack_ground_state(raw, dim, matvec, tol, None, v0, arpack_ncv)
        max_iter = int(affordable)

    if start is not None:
        v0 = np.asarray(start, dtype=np.float64)
        if v0.shape != (dim,):
            raise ValueError(f"start vector has shape {v0.shape}, expected ({dim},)")
        tried_default = False
    else:
        v0 = np.ones(dim)
        tried_default = True
    try:
        e, x, res, iters, gap, invariant = _lanczos(
            matvec, dim, v0, tol, max_iter, ritz_history=_ritz_history
        )
        if invariant and tried_default:
            # the all-ones vector spanned a proper invariant subspace; its
            # minimum may not be global, so cross-check from a random start
            rng = np.random.default_rng(_FALLBACK_SEED)
            e2, x2, res2, iters2, gap2, _ = _lanczos(
                matvec, dim, rng.standard_normal(dim), tol, max_iter
            )
            if e2 < e - tol:
                e, x, res, gap = e2, x2, res2, gap2
                iters = iters + iters2
    except ConvergenceError:
        if not tried_default:
            raise
        # all-ones start failed (numerically orthogonal ground state or
        # exhausted space): one seeded random restart
        rng = np.random.default_rng(_FALLBACK_SEED)
        v0 = rng.standard_normal(dim)
        e, x, res, iters, gap, _ = _lanczos(matvec, dim, v0, tol, max_iter)
    return EigenResult(
        energy=e,
        state=_wrap_state(raw, x),
        residual_norm=res,
        iterations=iters,
        method="lanczos",
        gap=gap,
        degenerate=(gap is not None and gap < DEGENERACY_GAP),
    )
