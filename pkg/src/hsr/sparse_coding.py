"""Sparse coding: recover few-atom coefficient vectors from signals.

A Dictionary is a d x n matrix of unit-norm atoms (columns). Coding finds
theta with x ~= D @ theta and few nonzeros, either by an L1-penalized
least-squares solve (BPDN, solved with accelerated iterative shrinkage)
or by a greedy orthogonal matching pursuit with a hard sparsity budget.

Coherence diagnostics quantify when L1 coding is guaranteed to find the
sparsest representation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceWarning, ValidationError

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Dictionary:
    """A d x n matrix whose columns are unit-norm atoms."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise ValidationError(f"atoms must be a d x n matrix, got shape {atoms.shape}")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(norms == 0.0):
            raise ValidationError("dictionary contains an all-zero column")
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValidationError("dictionary columns must have unit L2 norm")
        object.__setattr__(self, "atoms", atoms)

    @property
    def d(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def from_columns(cls, columns: np.ndarray) -> "Dictionary":
        """Build a dictionary by normalizing the columns of a raw matrix."""
        columns = np.asarray(columns, dtype=np.float64)
        norms = np.linalg.norm(columns, axis=0)
        if np.any(norms == 0.0):
            raise ValidationError("cannot normalize an all-zero column")
        return cls(columns / norms)


@dataclass(frozen=True)
class SparseCode:
    """Coefficient vector plus bookkeeping from the solver that produced it."""

    coeffs: np.ndarray
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.float64))

    @property
    def support(self) -> np.ndarray:
        """Indices of exactly-nonzero coefficients."""
        return np.flatnonzero(self.coeffs)

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.coeffs))


@dataclass(frozen=True)
class SolverConfig:
    """Parameters for the L1-penalized solver.

    lam is the absolute L1 weight; when None it is chosen per sample as
    lam_scale * max|D^T x|. Coefficients with magnitude below zero_clip
    are snapped to exactly zero on output.
    """

    lam: float | None = None
    lam_scale: float = 0.1
    max_iter: int = 2000
    tol: float = 1e-10
    zero_clip: float = 1e-8

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise ValidationError("lam must be >= 0")
        if self.lam_scale < 0:
            raise ValidationError("lam_scale must be >= 0")
        if self.max_iter < 1:
            raise ValidationError("max_iter must be a positive integer")
        if self.tol <= 0:
            raise ValidationError("tol must be > 0")
        if self.zero_clip < 0:
            raise ValidationError("zero_clip must be >= 0")


def coherence(D: Dictionary) -> float:
    """Largest absolute inner product between two distinct atoms, in [0, 1]."""
    if D.n == 1:
        return 0.0
    gram = np.abs(D.atoms.T @ D.atoms)
    np.fill_diagonal(gram, 0.0)
    return float(min(gram.max(), 1.0))


def recovery_bound(D: Dictionary) -> int | float:
    """Largest sparsity s with guaranteed exact L1 recovery: s < 1/2 + 1/(2C).

    Returns math.inf when the dictionary is orthonormal (C = 0), meaning
    the bound never binds.
    """
    C = coherence(D)
    if C == 0.0:
        return math.inf
    bound = 0.5 + 0.5 / C
    s = math.floor(bound)
    if s >= bound:  # strict inequality: an integer-valued bound excludes itself
        s -= 1
    return max(s, 0)


def _largest_eigenvalue(A: np.ndarray, steps: int = 50) -> float:
    """Power-iteration estimate of the largest eigenvalue of A^T A."""
    n = A.shape[1]
    v = np.full(n, 1.0 / math.sqrt(n))
    lam = 1.0
    for _ in range(steps):
        w = A.T @ (A @ v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 1.0
        v = w / lam
    return lam


def _fista_stage(A, X, AtX, L, lam, theta0, max_iter, tol):
    """One accelerated proximal-gradient run at fixed per-column lam.

    Returns (best iterate, per-column convergence mask, iterations used).
    Momentum restarts adaptively on columns whose objective went up.
    """
    thresh = lam / (2.0 * L)
    theta = theta0
    y = theta.copy()
    t = np.ones(X.shape[1])

    def objective(th):
        resid = A @ th - X
        return np.einsum("ij,ij->j", resid, resid) + lam * np.abs(th).sum(axis=0)

    obj = objective(theta)
    best, best_obj = theta.copy(), obj.copy()
    converged = np.zeros(X.shape[1], dtype=bool)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        grad = A.T @ (A @ y) - AtX
        z = y - grad / L
        theta_next = np.sign(z) * np.maximum(np.abs(z) - thresh, 0.0)
        obj_next = objective(theta_next)

        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = theta_next + ((t - 1.0) / t_next) * (theta_next - theta)
        increased = obj_next > obj
        if increased.any():
            y[:, increased] = theta_next[:, increased]
            t_next[increased] = 1.0
        t = t_next

        improved = obj_next < best_obj
        if improved.any():
            best[:, improved] = theta_next[:, improved]
            best_obj[improved] = obj_next[improved]

        denom = np.maximum(obj, 1e-300)
        converged = np.abs(obj - obj_next) <= tol * denom
        theta, obj = theta_next, obj_next
        if converged.all():
            break

    return best, converged, iterations


def fista_l1(
    A: np.ndarray,
    X: np.ndarray,
    lam: np.ndarray | float,
    max_iter: int = 2000,
    tol: float = 1e-10,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Minimize ||A @ theta - x||_2^2 + lam * ||theta||_1 per column of X.

    Accelerated iterative shrinkage with step 1/L, L being the top
    eigenvalue of A^T A estimated by 50 power iterations. Small penalties
    are reached by continuation: solve at a large lam first, then decay it
    tenfold per stage with warm starts, which keeps iterates sparse and
    avoids the slow grind of shrinking null-space mass at the target lam.

    Returns (theta matrix, per-column convergence mask, total iterations).
    max_iter caps the iteration total across all stages.
    """
    A = np.asarray(A, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(np.asarray(X, dtype=np.float64).T).T  # columns are samples
    n, b = A.shape[1], X.shape[1]
    lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (b,)).astype(np.float64)

    L = _largest_eigenvalue(A) * (1.0 + 1e-6)  # slack keeps the step contractive
    AtX = A.T @ X
    # lam0 is where the solution first leaves zero; no stage needs to start higher
    lam0 = np.abs(AtX).max(axis=0, initial=0.0)
    with np.errstate(divide="ignore"):
        decades = np.log10(np.maximum(lam0, 1e-300)) - np.log10(lam)
    finite = decades[np.isfinite(decades)]
    n_stages = 1 + min(12, max(0, int(np.ceil(finite.max()))) if finite.size else 0)

    theta = np.zeros((n, b))
    converged = np.zeros(b, dtype=bool)
    used = 0
    for stage in range(n_stages, 0, -1):
        # stage k solves at max(target, lam0 * 10^-(n_stages - k)) per column
        stage_lam = np.maximum(lam, lam0 * 10.0 ** (stage - n_stages))
        if stage == 1:
            stage_lam = lam
        theta, converged, iters = _fista_stage(
            A, X, AtX, L, stage_lam, theta, max_iter - used, tol
        )
        used += iters
        if used >= max_iter:
            break

    if single:
        theta = theta[:, 0]
    return theta, converged, used


def bpdn_encode(D: Dictionary, x: np.ndarray, cfg: SolverConfig = SolverConfig()) -> SparseCode:
    """Basis-pursuit denoising: min ||D theta - x||_2^2 + lam ||theta||_1.

    A non-converged solve (iteration cap hit first) still returns the best
    iterate, flagged via SparseCode.converged and a warning.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (D.d,):
        raise ValidationError(f"x must have shape ({D.d},), got {x.shape}")
    theta, mask, iters = _bpdn_batch(D, x[:, None], cfg)
    code = SparseCode(theta[:, 0], converged=bool(mask[0]), iterations=iters)
    if not code.converged:
        warnings.warn(
            f"BPDN stopped at max_iter={cfg.max_iter} above tol={cfg.tol}",
            NonConvergenceWarning,
        )
    return code


def _bpdn_batch(
    D: Dictionary, X: np.ndarray, cfg: SolverConfig
) -> tuple[np.ndarray, np.ndarray, int]:
    """Column-batched BPDN used by the pipeline. X is d x b."""
    if cfg.lam is None:
        lam = cfg.lam_scale * np.abs(D.atoms.T @ X).max(axis=0, initial=0.0)
    else:
        lam = np.full(X.shape[1], float(cfg.lam))
    theta, mask, iters = fista_l1(D.atoms, X, lam, max_iter=cfg.max_iter, tol=cfg.tol)
    theta[np.abs(theta) < cfg.zero_clip] = 0.0
    return theta, mask, iters


def omp_encode(D: Dictionary, x: np.ndarray, s: int) -> SparseCode:
    """Orthogonal matching pursuit with a hard sparsity budget.

    Greedily picks the atom most correlated with the residual (lowest index
    wins ties), then refits by least squares on the whole support, so the
    residual stays orthogonal to every selected atom.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (D.d,):
        raise ValidationError(f"x must have shape ({D.d},), got {x.shape}")
    if not 1 <= s <= min(D.d, D.n):
        raise ValidationError(f"s must be in [1, {min(D.d, D.n)}], got {s}")
    theta = omp_encode_batch(D, x[:, None], s)[:, 0]
    return SparseCode(theta, converged=True, iterations=s)


def omp_encode_batch(D: Dictionary, X: np.ndarray, s: int, rtol: float = 1e-12) -> np.ndarray:
    """OMP over the columns of X; returns an n x b coefficient matrix.

    Stops a column early when its residual falls below rtol relative to
    ||x||, which keeps already-exact columns from collecting noise atoms.
    """
    A = D.atoms
    n, b = D.n, X.shape[1]
    theta = np.zeros((n, b))
    supports = [[] for _ in range(b)]
    norms = np.linalg.norm(X, axis=0)
    active = norms > 0
    resid = X.copy()

    for _ in range(s):
        if not active.any():
            break
        corr = np.abs(A.T @ resid[:, active])
        cols = np.flatnonzero(active)
        for j, col in enumerate(cols):
            corr[supports[col], j] = -1.0  # never re-pick a selected atom
        picks = corr.argmax(axis=0)
        for j, col in enumerate(cols):
            supports[col].append(int(picks[j]))
            sub = A[:, supports[col]]
            coef, *_ = np.linalg.lstsq(sub, X[:, col], rcond=None)
            theta[:, col] = 0.0
            theta[supports[col], col] = coef
            resid[:, col] = X[:, col] - sub @ coef
        active[cols] = np.linalg.norm(resid[:, cols], axis=0) > rtol * norms[cols]

    return theta


def bpdn_objective(D: Dictionary, x: np.ndarray, theta: np.ndarray, lam: float) -> float:
    """The BPDN objective ||D theta - x||^2 + lam ||theta||_1."""
    resid = D.atoms @ theta - x
    return float(resid @ resid + lam * np.abs(theta).sum())


# enumerating all supports is affordable up to this many candidate subsets
EXACT_CODING_LIMIT = 512


def exact_encode(D: Dictionary, x: np.ndarray, s: int) -> SparseCode:
    """Optimal s-sparse code by enumerating every size-s support.

    Exact vector selection: minimizes the residual over all C(n, s)
    supports, so it cannot misassign atoms the way greedy pursuit can on
    coherent dictionaries. Only usable while C(n, s) stays small.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (D.d,):
        raise ValidationError(f"x must have shape ({D.d},), got {x.shape}")
    theta = exact_encode_batch(D, x[:, None], s)[:, 0]
    return SparseCode(theta, converged=True, iterations=0)


def exact_encode_batch(D: Dictionary, X: np.ndarray, s: int) -> np.ndarray:
    """Best-subset coding over the columns of X; returns n x b coefficients."""
    from itertools import combinations

    s = min(s, D.d, D.n)
    count = math.comb(D.n, s)
    if count > EXACT_CODING_LIMIT:
        raise ValidationError(
            f"C({D.n}, {s}) = {count} supports exceed the enumeration limit"
        )
    best_err = np.full(X.shape[1], np.inf)
    theta = np.zeros((D.n, X.shape[1]))
    for support in combinations(range(D.n), s):
        sub = D.atoms[:, support]
        coef, *_ = np.linalg.lstsq(sub, X, rcond=None)
        resid = np.linalg.norm(X - sub @ coef, axis=0)
        better = resid < best_err - 1e-15
        if better.any():
            theta[:, better] = 0.0
            for row, k in enumerate(support):
                theta[k, better] = coef[row, better]
            best_err[better] = resid[better]
    return theta
