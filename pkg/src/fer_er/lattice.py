"""Quadratic fermion lattice models and their exact Gaussian ground states.

H = sum_<r,s> [ (a_r^dag a_s + h.c.)/2 + gamma (a_r^dag a_s^dag + a_s a_r)/2 ] - lam sum_r n_r

on periodic chains (D=1) and square lattices (D=2).  Each bond is directed
r -> r + e_axis; the pairing term is odd under swapping its ends, so the
direction matters.  In Majorana form H = (i/4) sum_jk A_jk c_j c_k + offset.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .gaussian import J2

ZERO_MODE_CONVENTIONS = ("occupy", "antiperiodic")
ZERO_TOL = 1e-10


class DegenerateGroundState(RuntimeError):
    pass


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class ModelSpec:
    dimension: int
    sites_per_dim: int
    modes_per_site: int = 1
    gamma: float = 1.0
    lam: float = 1.0
    boundary: str = "periodic"
    zero_mode: str = "occupy"

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")
        if self.zero_mode not in ZERO_MODE_CONVENTIONS:
            raise ValueError(f"zero_mode must be one of {ZERO_MODE_CONVENTIONS}")
        p = self.grouping
        if p ** self.dimension != self.modes_per_site:
            raise ValueError(f"modes_per_site={self.modes_per_site} is not a perfect {self.dimension}-th power")
        n = self.sites_per_dim
        if n % p or not _is_pow2(n // p):
            raise ValueError(f"sites_per_dim/p = {n}/{p} must be a power of two")

    @property
    def grouping(self) -> int:
        return int(round(self.modes_per_site ** (1.0 / self.dimension)))

    @property
    def mode_count(self) -> int:
        return self.sites_per_dim**self.dimension

    @property
    def grouped_sites(self) -> int:
        """Grouped sites along each axis."""
        return self.sites_per_dim // self.grouping

    @property
    def twist(self):
        """Boundary sign per axis: -1 on the first axis in the antiperiodic sector."""
        tw = [1] * self.dimension
        if self.zero_mode == "antiperiodic":
            tw[0] = -1
        return tuple(tw)

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


@dataclass
class HamiltonianMajorana:
    A: np.ndarray
    constant_offset: float
    mode_count: int


def coupling_blocks(gamma, lam, dimension):
    """2x2 blocks A(d) = A[site 0, site d] of the translation-invariant couplings."""
    z = (0,) * dimension
    bond = np.array([[0.0, 0.5 * (1 - gamma)], [-0.5 * (1 + gamma), 0.0]])
    blocks = {z: -lam * J2}
    for ax in range(dimension):
        e = [0] * dimension
        e[ax] = 1
        blocks[tuple(e)] = bond.copy()
        e[ax] = -1
        blocks[tuple(e)] = -bond.T
    return blocks


def majorana_coefficients(spec: ModelSpec) -> HamiltonianMajorana:
    """Majorana coefficient matrix in lattice mode order (x*n + y in 2D)."""
    n = spec.sites_per_dim
    D = spec.dimension
    M = spec.mode_count
    A = np.zeros((2 * M, 2 * M))
    bond = np.array([[0.0, 0.5 * (1 - spec.gamma)], [-0.5 * (1 + spec.gamma), 0.0]])
    tw = spec.twist
    coords = np.array(np.unravel_index(np.arange(M), (n,) * D)).T
    for r, c in enumerate(coords):
        A[2 * r:2 * r + 2, 2 * r:2 * r + 2] += -spec.lam * J2
        for ax in range(D):
            t = c.copy()
            t[ax] += 1
            sign = tw[ax] if t[ax] == n else 1
            t[ax] %= n
            s = int(np.ravel_multi_index(tuple(t), (n,) * D))
            A[2 * r:2 * r + 2, 2 * s:2 * s + 2] += sign * bond
            A[2 * s:2 * s + 2, 2 * r:2 * r + 2] -= sign * bond.T
    A = 0.5 * (A - A.T)
    return HamiltonianMajorana(A, -0.5 * spec.lam * M, M)


def _momenta(spec):
    n = spec.sites_per_dim
    shifts = [0.5 if t == -1 else 0.0 for t in spec.twist]
    axes = [2 * np.pi * (np.arange(n) + s) / n for s in shifts]
    return np.meshgrid(*axes, indexing="ij"), shifts


def dispersion(spec: ModelSpec, k) -> float:
    """Single-particle energy Lambda(k) >= 0."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.shape[-1] != spec.dimension:
        raise ValueError(f"momentum must have {spec.dimension} components")
    xi = np.cos(k).sum(axis=-1) - spec.lam
    delta = spec.gamma * np.sin(k).sum(axis=-1)
    out = np.sqrt(xi**2 + delta**2)
    return float(out) if out.ndim == 0 else out


def exact_gs_energy_density(spec: ModelSpec) -> float:
    """Closed form (1/2) mean_k (xi_k - Lambda_k) on the spec's momentum grid."""
    grids, _ = _momenta(spec)
    k = np.stack(grids, axis=-1)
    xi = np.cos(k).sum(axis=-1) - spec.lam
    return float(0.5 * np.mean(xi - dispersion(spec, k)))


def _sign_of(H, zero_tol):
    """-i sign(iA) per momentum (leading axes), resolving zero levels by particle number."""
    w, X = np.linalg.eigh(H)
    zero = np.abs(w) <= zero_tol
    sgn = np.where(zero, 0.0, np.sign(w))
    G = -1j * np.einsum("...ik,...k,...jk->...ij", X, sgn, X.conj())
    nzero = int(zero.sum())
    if nzero:
        # inside the zero space use the particle-number form: occupy at ties
        Nform = np.kron(np.eye(H.shape[-1] // 2), 1j * (-J2))
        for kidx in zip(*np.nonzero(zero.any(axis=-1))):
            P0 = X[kidx][:, zero[kidx]]
            w2, Y = np.linalg.eigh(P0.conj().T @ Nform @ P0)
            if np.any(np.abs(w2) <= zero_tol):
                raise DegenerateGroundState(f"zero level at momentum index {kidx} not fixed by particle number")
            Z = P0 @ Y
            G[kidx] += -1j * (Z * np.sign(w2)) @ Z.conj().T
    return G, nzero


def ground_state_blocks(spec: ModelSpec, return_info=False):
    """Translation-invariant ground state G[d] = Gamma[mode 0, mode d], d on the n^D grid.

    The boundary sign applies outside the grid: G[d + n e_ax] = twist[ax] G[d].
    """
    n = spec.sites_per_dim
    D = spec.dimension
    grids, shifts = _momenta(spec)
    Ah = np.zeros((n,) * D + (2, 2), complex)
    for d, B in coupling_blocks(spec.gamma, spec.lam, D).items():
        ph = np.exp(1j * sum(g * di for g, di in zip(grids, d)))
        Ah += ph[..., None, None] * B
    Gh, nzero = _sign_of(1j * Ah, ZERO_TOL)
    Gd = np.fft.fftn(Gh, axes=tuple(range(D))) / n**D
    if any(shifts):
        ds = np.meshgrid(*([np.arange(n)] * D), indexing="ij")
        ph = np.exp(-2j * np.pi * sum(s * d for s, d in zip(shifts, ds)) / n)
        Gd = Gd * ph[..., None, None]
    if np.abs(Gd.imag).max() > 1e-10:
        raise RuntimeError("momentum-space ground state is not real")
    Gd = Gd.real
    if return_info:
        return Gd, {"zero_levels": nzero, "convention": spec.zero_mode}
    return Gd


def twisted_block(G, d, twist):
    """G[d] for any integer displacement d (tuple), applying boundary signs."""
    shape = G.shape[: len(twist)]
    sign = 1
    idx = []
    for di, n, t in zip(d, shape, twist):
        q, r = divmod(int(di), n)
        if q % 2 and t == -1:
            sign = -sign
        idx.append(r)
    return sign * G[tuple(idx)]


def dense_from_blocks(G, twist):
    """Dense matrix in lattice order from translation-invariant 2x2 (or site) blocks."""
    D = len(twist)
    shape = G.shape[:D]
    m = G.shape[-1]
    N = int(np.prod(shape))
    coords = np.array(np.unravel_index(np.arange(N), shape)).T
    out = np.zeros((N * m, N * m))
    for a in range(N):
        for b in range(N):
            d = coords[b] - coords[a]
            out[a * m:(a + 1) * m, b * m:(b + 1) * m] = twisted_block(G, d, twist)
    return out


def ground_state_correlation(spec: ModelSpec, return_info=False):
    """Dense ground-state correlation matrix in lattice mode order."""
    Gd, info = ground_state_blocks(spec, return_info=True)
    G = dense_from_blocks(Gd, spec.twist)
    G = 0.5 * (G - G.T)
    return (G, info) if return_info else G


def dense_ground_state(ham: HamiltonianMajorana, zero_tol=1e-9):
    """Reference ground state from the real-space coefficient matrix."""
    G, _ = _sign_of(1j * ham.A[None], zero_tol)
    G = G[0]
    if np.abs(G.imag).max() > 1e-10:
        raise RuntimeError("ground state correlation is not real")
    G = G.real
    return 0.5 * (G - G.T)


def energy_density(gamma_matrix, ham: HamiltonianMajorana) -> float:
    """<H>/M = (-1/4 sum_jk A_jk G_jk + offset)/M."""
    g = getattr(gamma_matrix, "matrix", gamma_matrix)
    g = np.asarray(g)
    if g.shape != ham.A.shape:
        raise ValueError(f"shape mismatch {g.shape} vs {ham.A.shape}")
    return float((-0.25 * np.sum(ham.A * g) + ham.constant_offset) / ham.mode_count)


def site_order(spec: ModelSpec):
    """Mode permutation from lattice order to grouped-site order.

    Grouped site s (row-major over the (n/p)^D site grid) holds its p^D modes
    contiguously, row-major inside the site.
    """
    n = spec.sites_per_dim
    p = spec.grouping
    if spec.dimension == 1:
        return np.arange(n)
    ns = n // p
    out = []
    for a in range(ns):
        for b in range(ns):
            for i in range(p):
                for j in range(p):
                    out.append((a * p + i) * n + b * p + j)
    return np.array(out)


def finite_size_extrapolate(values, sizes):
    """Richardson extrapolation assuming error ~ c / M^2 (gapless, periodic)."""
    values = np.asarray(values, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    out = values.copy()
    for _ in range(len(values) - 1):
        ratio = (sizes[1:] / sizes[:-1]) ** 2
        out = (ratio * out[1:] - out[:-1]) / (ratio - 1)
        sizes = sizes[1:]
    return float(out[-1])


def entropy_fit_slope(Ls, S):
    """Slope of S_L against log2 L (least squares)."""
    x = np.log2(np.asarray(Ls, dtype=float))
    return float(np.polyfit(x, np.asarray(S, dtype=float), 1)[0])

