"""Algebra of Majorana correlation matrices.

Conventions: mode r owns Majorana operators c[2r] = a_r + a_r^dag and
c[2r+1] = (a_r - a_r^dag)/i, and <c_j c_k> = delta_jk + i G_jk with G real
antisymmetric.  An empty mode has the block [[0, 1], [-1, 0]].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


class NotConverged(RuntimeError):
    """Raised when an iterative routine exceeds its sweep budget."""


@dataclass(frozen=True)
class MajoranaCorrelation:
    """Validated wrapper around a 2M x 2M real antisymmetric matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.matrix, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
            raise ValueError(f"expected a square matrix of even size, got {g.shape}")
        if not np.array_equal(g, -g.T):
            raise ValueError("correlation matrix must be exactly antisymmetric")
        object.__setattr__(self, "matrix", g)

    @property
    def mode_count(self) -> int:
        return self.matrix.shape[0] // 2

    @classmethod
    def from_array(cls, g, check_spectrum=True, tol=1e-12):
        g = antisymmetrize(g)
        if check_spectrum and g.size:
            smax = np.linalg.norm(g, 2)
            if smax > 1 + tol:
                raise ValueError(f"singular value {smax} exceeds 1")
        return cls(g)


def antisymmetrize(g):
    g = np.asarray(g, dtype=float)
    return 0.5 * (g - g.T)


def as_matrix(g):
    return g.matrix if isinstance(g, MajoranaCorrelation) else np.asarray(g, dtype=float)


def majorana_indices(modes):
    """Majorana indices (2r, 2r+1) for each mode r, in order."""
    modes = np.asarray(modes, dtype=int).reshape(-1)
    return np.stack([2 * modes, 2 * modes + 1], axis=1).reshape(-1)


def canonical_block(v, orientation=None):
    """Direct sum of v_r J (times the orientation signs)."""
    v = np.asarray(v, dtype=float)
    if orientation is not None:
        v = v * np.asarray(orientation)
    out = np.zeros((2 * len(v), 2 * len(v)))
    for r, x in enumerate(v):
        out[2 * r, 2 * r + 1] = x
        out[2 * r + 1, 2 * r] = -x
    return out


@dataclass
class ModeSpectrum:
    """Canonical form V G V^T = (+)_r s_r v_r J.

    v is sorted descending.  orientation s_r is +1 except that the block with
    the smallest v may carry -1 when det V = +1 demands it (a pure state with
    odd fermion parity in this frame).
    """

    v: np.ndarray
    V: np.ndarray
    orientation: np.ndarray
    sweeps: int = 0
    residual: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.v)

    def canonical(self):
        return canonical_block(self.v, self.orientation)


def extract_submatrix(gamma, modes):
    """Principal submatrix on the Majorana pairs of the listed modes."""
    g = as_matrix(gamma)
    modes = [int(m) for m in modes]
    m_count = g.shape[0] // 2
    if len(set(modes)) != len(modes):
        raise ValueError("duplicate mode indices")
    if any(m < 0 or m >= m_count for m in modes):
        raise IndexError(f"mode index out of range 0..{m_count - 1}")
    idx = majorana_indices(modes)
    return g[np.ix_(idx, idx)]


def block_diagonalize(gamma_block, tol=1e-12, max_sweeps=100) -> ModeSpectrum:
    """Canonical (block diagonal) form of an antisymmetric correlation block."""
    g = as_matrix(gamma_block)
    n = g.shape[0] // 2
    if n == 0:
        return ModeSpectrum(np.zeros(0), np.zeros((0, 0)), np.zeros(0))
    x, V, sweeps, res = kernels.skew_jacobi(g, tol, max_sweeps)
    scale = max(1.0, float(np.abs(g).max()))
    if res > tol * scale:
        raise NotConverged(f"skew Jacobi residual {res:.3e} after {sweeps} sweeps")
    # positive orientation for every block: swapping the two rows flips the sign
    neg = x < 0
    for r in np.nonzero(neg)[0]:
        V[[2 * r, 2 * r + 1]] = V[[2 * r + 1, 2 * r]]
    v = np.abs(x)
    order = np.argsort(-v, kind="stable")
    v = v[order]
    rows = majorana_indices(order)
    V = V[rows]
    orient = np.ones(n)
    if neg.sum() % 2:
        # det V = -1: flip one row, choosing a v = 0 block if present
        zero = np.nonzero(v <= 1e-15)[0]
        r = zero[-1] if len(zero) else n - 1
        V[2 * r + 1] *= -1
        if not len(zero):
            orient[r] = -1.0
    return ModeSpectrum(v, V, orient, sweeps, res)


def binary_entropy_terms(v):
    v = np.clip(np.abs(np.asarray(v, dtype=float)), 0.0, 1.0)
    p = 0.5 * (1 + v)
    q = 0.5 * (1 - v)
    out = np.zeros_like(v)
    m = q > 0
    out[m] = -p[m] * np.log2(p[m]) - q[m] * np.log2(q[m])
    return out


def block_entropy(spectrum) -> float:
    """Entanglement entropy in bits: sum of binary entropies of (1 + v)/2."""
    v = spectrum.v if isinstance(spectrum, ModeSpectrum) else spectrum
    v = np.asarray(v, dtype=float)
    if np.any(v < -1e-12) or np.any(v > 1 + 1e-9):
        raise ValueError("v values must lie in [0, 1]")
    return float(binary_entropy_terms(v).sum())


def entropy_of(gamma_block) -> float:
    """Entropy of a correlation block via singular values (no rotation needed)."""
    g = as_matrix(gamma_block)
    if g.size == 0:
        return 0.0
    s = np.linalg.svd(g, compute_uv=False)
    # singular values come in degenerate pairs
    return float(binary_entropy_terms(s[::2]).sum())


def project_out_pure(gamma_block, spectrum: ModeSpectrum, keep: int):
    """Keep the `keep` most mixed modes of a block.

    Returns the canonical correlation matrix of the kept modes (ordered from
    most mixed) and the mixedness 1 - v of every removed mode.
    """
    n = spectrum.size
    if not 1 <= keep <= n:
        raise ValueError(f"keep must lie in 1..{n}")
    g = as_matrix(gamma_block)
    c = spectrum.V @ g @ spectrum.V.T
    kept = list(range(n - 1, n - 1 - keep, -1))
    idx = majorana_indices(kept)
    removed = spectrum.v[: n - keep]
    return antisymmetrize(c[np.ix_(idx, idx)]), 1.0 - removed


def product_eigenvalues(v):
    """All 2^L products prod_r (1 +- v_r)/2, sorted descending."""
    out = np.ones(1)
    for x in np.asarray(v, dtype=float):
        out = np.concatenate([out * 0.5 * (1 + x), out * 0.5 * (1 - x)])
    return np.sort(out)[::-1]


def many_body_oracle(gamma_block, tol=1e-10):
    """Reduced density matrix eigenvalues computed two ways.

    (a) from the canonical spectrum, (b) by building the dense density matrix
    from Wick's theorem and diagonalizing it.  Raises if they disagree.
    """
    from .oracle import wick_density_matrix

    g = as_matrix(gamma_block)
    L = g.shape[0] // 2
    if L > 8:
        raise ValueError("many-body oracle limited to L <= 8 modes")
    a = product_eigenvalues(block_diagonalize(g).v)
    rho = wick_density_matrix(g)
    b = np.sort(np.linalg.eigvalsh(rho))[::-1]
    err = float(np.abs(a - b).max())
    if err > tol:
        raise AssertionError(f"oracle routes disagree by {err:.3e}")
    return a
