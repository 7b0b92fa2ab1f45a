"""Complex-to-real machinery behind the rank-one recovery.

The stationarity conditions of the rank-one fitting problem couple a complex
matrix equation in h with its conjugate.  Splitting real and imaginary parts
turns them into a real symmetric eigenvalue problem over the leading block
(``z_a``) plus a linear fill-in map for the trailing entries (``z_b``).
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np


def sym(m: np.ndarray) -> np.ndarray:
    """Symmetrize a square complex matrix: returns M^T + M (no conjugation)."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"sym expects a square matrix, got shape {m.shape}")
    return m.T + m


def phi(m: np.ndarray) -> np.ndarray:
    """Real block map [[Re, -Im], [-Im, -Re]] of a complex p x q matrix.

    For complex symmetric M the image is real symmetric with zero trace, so
    its spectrum comes in +/- pairs and the top eigenvalue is nonnegative.
    The map turns an equation of the form ``M x = c * conj(x)`` into the
    real eigen-like relation ``phi(M) [Re x; Im x] = c [Re x; Im x]``.
    """
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    re, im = m.real, m.imag
    return np.block([[re, -im], [-im, -re]])


@dataclass(frozen=True)
class RealifiedSystem:
    """Real-domain operators extracted from a matrix-level channel estimate.

    ``z_a`` is the 2K x 2K real symmetric matrix whose top eigenpair carries
    the leading K channel entries; ``z_b`` is the 2(N-K) x 2K map recovering
    the remaining entries.  For K = N, ``z_b`` is empty.
    """

    z_a: np.ndarray
    z_b: np.ndarray
    pilot_count: int
    n_antennas: int


def build_realified(h_hat_matrix: np.ndarray, pilot_count: int) -> RealifiedSystem:
    """Split an N x K matrix estimate into the (z_a, z_b) operator pair.

    The head block feeds ``z_a = phi(sym(conj(head)))``; the trailing rows
    are conjugated before mapping so that, for a noiseless rank-one input
    built from h, ``[Re h_K; Im h_K]`` is an eigenvector of ``z_a`` with
    eigenvalue ``2 * ||h_K||**2`` and ``z_b`` reproduces the tail exactly.
    """
    m = np.asarray(h_hat_matrix, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {m.shape}")
    n, k = m.shape
    if pilot_count != k:
        raise ValueError(f"pilot_count={pilot_count} does not match {k} columns")
    if k > n:
        raise ValueError(f"pilot_count={k} exceeds n_antennas={n}")
    head = m[:k, :]
    tail = m[k:, :]
    z_a = phi(sym(head.conj()))
    z_b = phi(tail.conj())
    return RealifiedSystem(z_a=z_a, z_b=z_b, pilot_count=k, n_antennas=n)


def top_eigenpair(z_a: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and unit eigenvector of a real symmetric matrix."""
    w, v = np.linalg.eigh(z_a)
    vec = v[:, -1]
    return float(w[-1]), vec / np.linalg.norm(vec)
