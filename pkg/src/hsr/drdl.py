"""The circuit element: a learned dictionary chained with a random projection.

Encoding sparse-codes a signal against the dictionary and compresses the
coefficients through the measurement matrix; decoding inverts both stages
(L1 decompression, then the dictionary map). On signals that really are
sparse in the dictionary the two directions are mutual inverses, which is
the element's defining property: dimension reduction without losing the
ability to reconstruct.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dictionary_learning import DlConfig, DlReport, learn_dictionary
from .dimension_reduction import (
    KIND_SPARSE,
    RipMatrix,
    check_rip,
    compress,
    decompress_batch,
    make_rip,
)
from .errors import RipDegradedWarning, ValidationError
from .sparse_coding import Dictionary, SolverConfig, _bpdn_batch

# measured distortion above this marks a projection as degraded
RIP_DELTA_THRESHOLD = 0.5


@dataclass(frozen=True)
class RipConfig:
    """How train_node sizes, draws, and validates its projection."""

    kind: str = KIND_SPARSE
    c_factor: float = 4.0
    seed: int = 0
    check_trials: int = 500

    def __post_init__(self):
        if self.c_factor <= 0:
            raise ValidationError("c_factor must be > 0")
        if self.check_trials < 1:
            raise ValidationError("check_trials must be >= 1")


@dataclass(frozen=True)
class DrdlNode:
    """One trained circuit element: dictionary, projection, solver, sparsity."""

    dict: Dictionary
    rip: RipMatrix
    solver: SolverConfig
    s: int
    report: DlReport | None = None

    def __post_init__(self):
        if self.rip.n != self.dict.n:
            raise ValidationError(
                f"projection expects {self.rip.n} coefficients, dictionary has {self.dict.n} atoms"
            )
        if self.rip.delta_estimate is None:
            raise ValidationError("node projection must be validated (run check_rip) before use")
        if self.s < 1:
            raise ValidationError("s must be >= 1")

    @property
    def input_dim(self) -> int:
        return self.dict.d

    @property
    def output_dim(self) -> int:
        return self.rip.m


def node_from_dictionary(
    D: Dictionary,
    s: int,
    rip_cfg: RipConfig = RipConfig(),
    solver: SolverConfig = SolverConfig(),
    rip: RipMatrix | None = None,
) -> DrdlNode:
    """Assemble and validate a node around an existing dictionary.

    The projection is drawn by the sizing rule unless one is supplied.
    Validation always measures the distortion at sparsity 2s (the
    pairwise distance-preservation regime) and warns when it exceeds
    RIP_DELTA_THRESHOLD.
    """
    if rip is None:
        rip = make_rip(D.n, s, kind=rip_cfg.kind, seed=rip_cfg.seed, c_factor=rip_cfg.c_factor)
    delta = check_rip(rip, 2 * s, trials=rip_cfg.check_trials, seed=rip_cfg.seed + 1)
    if delta > RIP_DELTA_THRESHOLD:
        warnings.warn(
            f"projection distortion {delta:.3f} exceeds {RIP_DELTA_THRESHOLD}",
            RipDegradedWarning,
        )
    return DrdlNode(dict=D, rip=rip, solver=solver, s=s)


def train_node(
    X: np.ndarray,
    cfg: DlConfig,
    rip_cfg: RipConfig = RipConfig(),
    solver: SolverConfig = SolverConfig(),
) -> DrdlNode:
    """Learn the dictionary from samples, then attach a checked projection."""
    D, _, report = learn_dictionary(X, cfg)
    node = node_from_dictionary(D, cfg.s, rip_cfg=rip_cfg, solver=solver)
    return DrdlNode(dict=node.dict, rip=node.rip, solver=node.solver, s=node.s, report=report)


def encode(node: DrdlNode, x: np.ndarray) -> np.ndarray:
    """Sparse-code x against the dictionary, then project: u = A theta."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (node.input_dim,):
        raise ValidationError(f"x must have shape ({node.input_dim},), got {x.shape}")
    return encode_batch(node, x[:, None])[0][:, 0]


def encode_batch(node: DrdlNode, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Encode columns of X; returns (m x b outputs, per-column converged mask)."""
    theta, mask, _ = _bpdn_batch(node.dict, X, node.solver)
    return node.rip.entries @ theta, mask


def decode(node: DrdlNode, u: np.ndarray) -> np.ndarray:
    """Invert the element: decompress u by L1, then map through the dictionary."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (node.output_dim,):
        raise ValidationError(f"u must have shape ({node.output_dim},), got {u.shape}")
    return decode_batch(node, u[:, None])[0][:, 0]


def decode_batch(node: DrdlNode, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Decode columns of U; returns (d x b signal estimates, converged mask)."""
    theta, mask, _ = decompress_batch(node.rip, U, node.solver)
    return node.dict.atoms @ theta, mask


def encode_theta_batch(node: DrdlNode, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode columns of X keeping the intermediate codes.

    Returns (n x b codes, m x b outputs, converged mask); the pipeline
    retains codes for diagnostics.
    """
    theta, mask, _ = _bpdn_batch(node.dict, X, node.solver)
    return theta, node.rip.entries @ theta, mask
