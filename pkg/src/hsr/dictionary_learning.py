"""Learn a dictionary of unit-norm atoms by two-step alternation.

Each outer iteration sparse-codes every sample against the current atoms
(greedy pursuit with a hard sparsity budget), then refits the atoms with
one of two update rules: a single least-squares solve for the whole
matrix (MOD), or a per-atom rank-1 refit of the usage-restricted residual
(k-SVD). Atoms that no sample uses are re-seeded from the worst
reconstructed sample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataWarning, ValidationError
from .sparse_coding import (
    EXACT_CODING_LIMIT,
    Dictionary,
    exact_encode_batch,
    omp_encode_batch,
)

UPDATER_MOD = "mod"
UPDATER_KSVD = "ksvd"

INIT_DATA_COLUMNS = "data"
INIT_RANDOM_GAUSSIAN = "gaussian"
INIT_RAY_CLUSTERS = "rays"

# collinearity clustering caps its pairwise-cosine matrix at this many samples
_RAY_INIT_SAMPLE_CAP = 4000

# past this condition number the normal equations are solved by pseudoinverse
PINV_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class DlConfig:
    n: int
    s: int
    updater: str = UPDATER_KSVD
    outer_iters: int = 30
    init: str = INIT_DATA_COLUMNS
    seed: int = 0
    replace_unused: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.s < 1:
            raise ValidationError("s must be >= 1")
        if self.outer_iters < 1:
            raise ValidationError("outer_iters must be >= 1")
        if self.updater not in (UPDATER_MOD, UPDATER_KSVD):
            raise ValidationError(f"unknown updater {self.updater!r}")
        if self.init not in (INIT_DATA_COLUMNS, INIT_RANDOM_GAUSSIAN, INIT_RAY_CLUSTERS):
            raise ValidationError(f"unknown init {self.init!r}")


@dataclass
class DlReport:
    """Training diagnostics: per-iteration Frobenius error and atom churn."""

    errors: list[float] = field(default_factory=list)
    atoms_replaced: int = 0
    final_coherence: float = 0.0
    degenerate: bool = False


def _rank_below_two(X: np.ndarray) -> bool:
    """True when every column is a multiple of one direction."""
    norms = np.linalg.norm(X, axis=0)
    lead = X[:, int(np.argmax(norms))]
    lead = lead / np.linalg.norm(lead)
    resid = X - np.outer(lead, lead @ X)
    return bool(np.linalg.norm(resid) <= 1e-9 * max(np.linalg.norm(X), 1e-30))


def _ray_cluster_atoms(X: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Seed atoms from clusters of mutually collinear samples.

    Samples generated as 1-sparse combinations sit exactly on atom rays, so
    the largest collinear groups point at atoms. When no collinear group is
    left, the remaining atoms are farthest-point picks, which also serves
    as the fallback for data with no ray structure at all.
    """
    m = X.shape[1]
    if m > _RAY_INIT_SAMPLE_CAP:
        X = X[:, rng.choice(m, size=_RAY_INIT_SAMPLE_CAP, replace=False)]
        m = _RAY_INIT_SAMPLE_CAP
    U = X / np.linalg.norm(X, axis=0)
    collinear = np.abs(U.T @ U) > 1.0 - 1e-8
    avail = np.ones(m, dtype=bool)
    atoms: list[np.ndarray] = []
    for _ in range(n):
        if not avail.any():
            break
        counts = (collinear & avail[None, :] & avail[:, None]).sum(axis=1)
        counts[~avail] = -1
        k = int(np.argmax(counts))
        if counts[k] <= 1 and atoms:
            chosen = np.column_stack(atoms)
            nearest = np.abs(chosen.T @ U).max(axis=0)
            nearest[~avail] = np.inf
            k = int(np.argmin(nearest))
        atoms.append(U[:, k])
        avail &= ~collinear[k]
        avail[k] = False
    while len(atoms) < n:  # degenerate data: fewer distinct directions than atoms
        atoms.append(atoms[len(atoms) % max(len(atoms), 1)])
    return np.column_stack(atoms)


def _init_atoms(X: np.ndarray, cfg: DlConfig) -> np.ndarray:
    d, m = X.shape
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == INIT_RANDOM_GAUSSIAN:
        atoms = rng.standard_normal((d, cfg.n))
    elif cfg.init == INIT_RAY_CLUSTERS:
        atoms = _ray_cluster_atoms(X, cfg.n, rng)
    else:
        if m < cfg.n:
            raise ValidationError(
                f"data-column init needs at least n={cfg.n} samples, got {m}"
            )
        picks = rng.choice(m, size=cfg.n, replace=False)
        atoms = X[:, picks].copy()
    return atoms / np.linalg.norm(atoms, axis=0)


def mod_solve(X: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Least-squares optimal atoms for fixed codes: X theta^T (theta theta^T)^-1.

    Columns are NOT normalized; this is the raw minimizer of the Frobenius
    reconstruction error. Falls back to the pseudoinverse when the code
    Gram matrix is ill-conditioned or singular.
    """
    gram = theta @ theta.T
    cov = X @ theta.T
    if np.linalg.cond(gram) > PINV_CONDITION_LIMIT:
        return cov @ np.linalg.pinv(gram)
    return np.linalg.solve(gram.T, cov.T).T


def mod_update(X: np.ndarray, theta: np.ndarray, prev: Dictionary | None = None) -> Dictionary:
    """MOD dictionary update: least-squares refit, columns renormalized.

    Atoms whose code row is all zero have no least-squares direction; they
    keep their previous value when prev is given, else a basis vector.
    """
    raw = mod_solve(np.asarray(X, dtype=np.float64), np.asarray(theta, dtype=np.float64))
    norms = np.linalg.norm(raw, axis=0)
    dead = norms <= 1e-12
    if dead.any():
        for k in np.flatnonzero(dead):
            if prev is not None:
                raw[:, k] = prev.atoms[:, k]
            else:
                raw[:, k] = 0.0
                raw[k % raw.shape[0], k] = 1.0
        norms = np.linalg.norm(raw, axis=0)
    return Dictionary(raw / norms)


def rank1_svd(E: np.ndarray, tol: float = 1e-10, max_steps: int = 200):
    """Leading singular triple (u, sigma, v) by alternating power iteration."""
    norms = np.linalg.norm(E, axis=0)
    u = E[:, int(np.argmax(norms))]
    nu = np.linalg.norm(u)
    if nu == 0.0:
        u = np.zeros(E.shape[0])
        u[0] = 1.0
    else:
        u = u / nu
    sigma = 0.0
    for _ in range(max_steps):
        v = E.T @ u
        sv = np.linalg.norm(v)
        if sv == 0.0:
            return u, 0.0, np.zeros(E.shape[1])
        v /= sv
        u = E @ v
        sigma_next = np.linalg.norm(u)
        u /= sigma_next
        if abs(sigma_next - sigma) <= tol * max(sigma_next, 1e-30):
            sigma = sigma_next
            break
        sigma = sigma_next
    return u, float(sigma), v


def _worst_sample(X: np.ndarray, atoms: np.ndarray, theta: np.ndarray) -> np.ndarray:
    resid = X - atoms @ theta
    j = int(np.argmax(np.linalg.norm(resid, axis=0)))
    col = X[:, j]
    return col / np.linalg.norm(col)


def ksvd_update(
    D: Dictionary, X: np.ndarray, theta: np.ndarray, replace_unused: bool = True
) -> tuple[Dictionary, np.ndarray]:
    """One k-SVD sweep: refit every atom and its code row in place.

    For each atom, the residual of the samples that use it (with the atom's
    own contribution added back) is approximated by its leading rank-1
    factorization; the atom becomes the left factor and the code row on
    those samples becomes sigma times the right factor. Unused atoms are
    re-seeded from the worst-reconstructed sample when replace_unused.
    """
    X = np.asarray(X, dtype=np.float64)
    atoms = D.atoms.copy()
    theta = np.asarray(theta, dtype=np.float64).copy()
    for k in range(atoms.shape[1]):
        usage = np.flatnonzero(theta[k, :])
        if usage.size == 0:
            if replace_unused:
                atoms[:, k] = _worst_sample(X, atoms, theta)
            continue
        E = X[:, usage] - atoms @ theta[:, usage] + np.outer(atoms[:, k], theta[k, usage])
        u, sigma, v = rank1_svd(E)
        if sigma == 0.0:
            continue
        atoms[:, k] = u
        theta[k, usage] = sigma * v
    return Dictionary(atoms / np.linalg.norm(atoms, axis=0)), theta


def learn_dictionary(
    X: np.ndarray, cfg: DlConfig
) -> tuple[Dictionary, np.ndarray, DlReport]:
    """Alternate sparse coding and atom refitting for cfg.outer_iters rounds.

    X holds one sample per column. Returns the learned dictionary, the
    final n x m code matrix (every column at most cfg.s-sparse), and a
    report with the per-iteration Frobenius reconstruction errors.

    The coding step enumerates all supports exactly while C(n, s) stays
    small; coherent small dictionaries are unrecoverable under greedy
    pursuit because its misassignments pollute the update step even at the
    true dictionary. Larger problems fall back to orthogonal matching
    pursuit.
    """
    from .sparse_coding import coherence  # local import avoids cycle at module load

    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise ValidationError("X must be a nonempty d x m matrix")
    keep = np.linalg.norm(X, axis=0) > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} all-zero sample columns")
        X = X[:, keep]
        if X.shape[1] == 0:
            raise ValidationError("all samples were zero")

    report = DlReport()
    if cfg.n > 1 and _rank_below_two(X):
        warnings.warn(
            "training data has rank < 2; dictionary atoms will be redundant",
            DegenerateDataWarning,
        )
        report.degenerate = True

    d, m = X.shape
    s = min(cfg.s, d, cfg.n)
    exact = math.comb(cfg.n, s) <= EXACT_CODING_LIMIT
    atoms = _init_atoms(X, cfg)
    D = Dictionary(atoms)
    theta = np.zeros((cfg.n, m))

    for _ in range(cfg.outer_iters):
        theta = exact_encode_batch(D, X, s) if exact else omp_encode_batch(D, X, s)
        if cfg.updater == UPDATER_MOD:
            D = mod_update(X, theta, prev=D)
            # keep D @ theta invariant under the renormalization inside mod_update
            raw = mod_solve(X, theta)
            norms = np.linalg.norm(raw, axis=0)
            ok = norms > 1e-12
            theta[ok, :] *= norms[ok, None]
            unused = np.flatnonzero(np.all(theta == 0.0, axis=1))
            if cfg.replace_unused and unused.size:
                new_atoms = D.atoms.copy()
                for k in unused:
                    new_atoms[:, k] = _worst_sample(X, D.atoms, theta)
                D = Dictionary(new_atoms)
                report.atoms_replaced += int(unused.size)
        else:
            unused = int(np.sum(np.all(theta == 0.0, axis=1)))
            D, theta = ksvd_update(D, X, theta, replace_unused=cfg.replace_unused)
            if cfg.replace_unused:
                report.atoms_replaced += unused
        report.errors.append(float(np.linalg.norm(X - D.atoms @ theta)))

    report.final_coherence = coherence(D)
    return D, theta, report


def match_atoms(learned: Dictionary, truth: Dictionary) -> tuple[np.ndarray, np.ndarray]:
    """Greedy bipartite matching of atoms by absolute cosine.

    Learned dictionaries are only defined up to column permutation and sign,
    so recovery is scored after matching. Returns (assignment, cosines)
    where assignment[j] is the learned column matched to truth column j.
    """
    cos = np.abs(learned.atoms.T @ truth.atoms)
    n_l, n_t = cos.shape
    assignment = np.full(n_t, -1, dtype=int)
    cosines = np.zeros(n_t)
    work = cos.copy()
    for _ in range(min(n_l, n_t)):
        i, j = np.unravel_index(int(np.argmax(work)), work.shape)
        assignment[j] = i
        cosines[j] = cos[i, j]
        work[i, :] = -1.0
        work[:, j] = -1.0
    return assignment, cosines
