"""Disentangler and isometry optimization for one RG layer.

The cost is the summed purity of the modes projected out of the central
block.  It is maximized by alternating an exact isometry update (canonical
form of the disentangled block) with a polar update of the disentangler.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .gaussian import J2, antisymmetrize, block_diagonalize, majorana_indices

UPDATE_SCHEMES = ("polar", "givens")


@dataclass
class OptimizerOptions:
    max_iters: int = 2000
    tol: float = 1e-12
    update: str = "polar"            # "polar" (Givens fallback) or "givens"
    det_policy: str = "flip-smallest"
    use_disentanglers: bool = True
    min_iters: int = 5
    givens_grid: int = 256
    kept_weight: float = 1e-5        # weight of the kept modes' purity (tie-break)

    def __post_init__(self):
        if self.update not in UPDATE_SCHEMES:
            raise ValueError(f"update must be one of {UPDATE_SCHEMES}")
        if self.det_policy != "flip-smallest":
            raise ValueError("only the flip-smallest det policy is implemented")
        if self.max_iters < 0 or self.tol <= 0:
            raise ValueError("max_iters must be >= 0 and tol > 0")
        if not 0.0 <= self.kept_weight < 1.0:
            raise ValueError("kept_weight must lie in [0, 1)")

    def to_dict(self):
        return asdict(self)


@dataclass
class Disentangler:
    matrix: np.ndarray
    placement: str = "boundary pairs"


@dataclass
class Isometry:
    R: np.ndarray
    keep: int

    @property
    def L(self) -> int:
        return self.R.shape[0] // 2

    @property
    def Y(self):
        return mask(self.L, self.keep)

    @property
    def W(self):
        return self.R @ self.Y

    @property
    def W_kept(self):
        return self.W[:, : 2 * self.keep]

    @property
    def W_removed(self):
        return (self.R @ (mask(self.L, self.L) - self.Y))[:, 2 * self.keep:]


@dataclass
class OptimizationTrace:
    iterations: int = 0
    costs: list = field(default_factory=list)
    converged: bool = False
    max_mixedness: float = float("nan")
    fallback_sweeps: int = 0
    removed_purity: list = field(default_factory=list)


def mask(L, keep):
    """Y_keep: L 2x2 blocks, J on the first `keep`, zero on the rest."""
    y = np.zeros((2 * L, 2 * L))
    for r in range(keep):
        y[2 * r:2 * r + 2, 2 * r:2 * r + 2] = J2
    return y


def purity_cost(removed, mask_matrix=None) -> float:
    """(1/2) tr(removed Y^T): the summed purities of the removed modes."""
    removed = np.asarray(removed)
    if mask_matrix is None:
        mask_matrix = mask(removed.shape[0] // 2, removed.shape[0] // 2)
    if removed.shape != mask_matrix.shape:
        raise ValueError("dimension mismatch")
    return 0.5 * float(np.trace(removed @ mask_matrix.T))


def optimal_isometry_given_disentanglers(central_block, keep) -> Isometry:
    """Exact R-update: kept columns are the `keep` most mixed modes, in ascending v."""
    spec = block_diagonalize(central_block)
    L = spec.size
    if not 1 <= keep <= L:
        raise ValueError(f"keep must lie in 1..{L}")
    order = np.arange(L)[::-1]
    R = spec.V[majorana_indices(order)].T.copy()
    return Isometry(R, keep)


def _removed_purity(gc, R, keep):
    rr = R[:, 2 * keep:]
    g = rr.T @ gc @ rr
    return float(np.sum(np.diag(g, 1)[::2]))


def _weighted_purity(gc, R, keep, mu):
    d = np.diag(R.T @ gc @ R, 1)[::2]
    return float(d[keep:].sum() + mu * d[:keep].sum())


class _Window:
    """Active part of a window reordered so the disentanglers are block diagonal."""

    def __init__(self, gamma_w, slots, central, mu=0.0):
        perm = np.concatenate(slots)
        inv = np.empty(len(perm), int)
        inv[perm] = np.arange(len(perm))
        self.g = gamma_w[np.ix_(perm, perm)]
        self.cen = inv[central]
        self.k = len(slots)
        self.m = len(slots[0])
        self.mu = mu

    def dis(self, U):
        return np.kron(np.eye(self.k), U)

    def central(self, U):
        d = self.dis(U)[:, self.cen]
        return antisymmetrize(d.T @ self.g @ d)

    def cost(self, U, R, keep):
        """Objective: removed-mode purity plus mu times kept-mode purity."""
        return _weighted_purity(self.central(U), R, keep, self.mu)

    def removed(self, U, R, keep):
        return _removed_purity(self.central(U), R, keep)

    def environment(self, U, R, keep):
        L = len(self.cen) // 2
        w = np.r_[np.full(keep, self.mu), np.ones(L - keep)]
        z = R @ np.kron(np.diag(w), J2.T) @ R.T
        zt = np.zeros_like(self.g)
        zt[np.ix_(self.cen, self.cen)] = z
        gm = self.g @ self.dis(U) @ zt
        m = self.m
        return sum(gm[i * m:(i + 1) * m, i * m:(i + 1) * m] for i in range(self.k))


def _polar_so(E):
    X, s, Yt = np.linalg.svd(E)
    U = X @ Yt
    if np.linalg.det(U) < 0:
        # flip the singular direction with the smallest singular value
        X[:, -1] *= -1
        U = X @ Yt
    return U


def _givens(m, i, j, t):
    g = np.eye(m)
    c, s = np.cos(t), np.sin(t)
    g[i, i] = c
    g[j, j] = c
    g[i, j] = -s
    g[j, i] = s
    return g


def givens_sweep(win, U, R, keep, grid=256):
    """One sweep of single-plane rotations; each accepted only if it raises the cost."""
    m = U.shape[0]
    f0 = win.cost(U, R, keep)
    th = 2 * np.pi * np.arange(5) / 5
    basis = lambda t: np.stack([np.ones_like(t), np.cos(t), np.sin(t), np.cos(2 * t), np.sin(2 * t)], -1)
    fit = np.linalg.inv(basis(th))
    tg = 2 * np.pi * np.arange(grid) / grid
    bg = basis(tg)
    for i in range(m):
        for j in range(i + 1, m):
            vals = np.array([win.cost(U @ _givens(m, i, j, t), R, keep) for t in th])
            coef = fit @ vals
            best = tg[int(np.argmax(bg @ coef))]
            # refine between the neighbouring grid points
            tf = best + (2 * np.pi / grid) * np.linspace(-1, 1, 65)
            best = tf[int(np.argmax(basis(tf) @ coef))]
            if abs(best) < 1e-15:
                continue
            cand = U @ _givens(m, i, j, best)
            fc = win.cost(cand, R, keep)
            if fc > f0:
                U, f0 = cand, fc
    return U, f0


def _reorthonormalize(U, tol=1e-10):
    if np.abs(U @ U.T - np.eye(len(U))).max() > tol:
        U = _polar_so(U)
    return U


def optimize_layer(window_matrix, window, keep, options=None, initial=None):
    """Alternating maximization of the removed-mode purity.

    `window` supplies the disentangler slots and central-block positions
    (see geometry.window_indices).  `initial` is an optional starting
    disentangler (identity by default).  Returns (Disentangler, Isometry, trace).
    """
    opts = options or OptimizerOptions()
    g = np.asarray(window_matrix)
    active = window.active
    if g.shape[0] < len(active):
        raise ValueError("window matrix smaller than the geometry's active region")
    m = len(window.slots[0])
    if any(len(s) != m for s in window.slots):
        raise ValueError("disentangler slots differ in size")
    win = _Window(g[np.ix_(active, active)], window.slots, window.central, opts.kept_weight)
    L = len(window.central) // 2
    if not 1 <= keep <= L:
        raise ValueError(f"keep must lie in 1..{L}")
    U = np.eye(m) if initial is None else _reorthonormalize(np.asarray(initial, dtype=float))
    if U.shape != (m, m):
        raise ValueError(f"initial disentangler must be {m}x{m}")
    iso = optimal_isometry_given_disentanglers(win.central(U), keep)
    R = iso.R
    f = win.cost(U, R, keep)
    trace = OptimizationTrace(costs=[f], removed_purity=[win.removed(U, R, keep)])
    fmax = L - keep + opts.kept_weight * keep
    if not opts.use_disentanglers or keep == L:
        trace.converged = True
    else:
        for it in range(opts.max_iters):
            if opts.update == "polar":
                Un = _polar_so(win.environment(U, R, keep))
                fn = win.cost(Un, R, keep)
                if fn < f:
                    Un, fn = givens_sweep(win, U, R, keep, opts.givens_grid)
                    trace.fallback_sweeps += 1
            else:
                Un, fn = givens_sweep(win, U, R, keep, opts.givens_grid)
            U = _reorthonormalize(Un)
            R = optimal_isometry_given_disentanglers(win.central(U), keep).R
            fn = win.cost(U, R, keep)
            if fn < f - 1e-12 * max(1.0, abs(f)):
                raise AssertionError(f"cost decreased: {f!r} -> {fn!r}")
            trace.costs.append(fn)
            trace.removed_purity.append(win.removed(U, R, keep))
            trace.iterations = it + 1
            gain = fn - f
            f = max(f, fn)
            if gain < opts.tol and (trace.iterations >= opts.min_iters or f >= fmax - opts.tol):
                trace.converged = True
                break
    iso = Isometry(R, keep)
    rem = removed_from_central(win.central(U), iso)
    if rem.size:
        trace.max_mixedness = float(1 - block_diagonalize(rem).v.min())
    else:
        trace.max_mixedness = 0.0
    return Disentangler(U), iso, trace


def removed_from_central(gc, iso: Isometry):
    wr = iso.W_removed
    return antisymmetrize(wr.T @ gc @ wr)


def kept_from_central(gc, iso: Isometry):
    wk = iso.W_kept
    return antisymmetrize(wk.T @ gc @ wk)


def disentangled_central(window_matrix, window, U):
    g = np.asarray(window_matrix)
    active = window.active
    win = _Window(g[np.ix_(active, active)], window.slots, window.central)
    return win.central(U.matrix if isinstance(U, Disentangler) else U)


def coarse_grain_window(window_matrix, window, U, iso: Isometry):
    """Effective-site correlation matrix W^T (U+U)^T G (U+U) W of the kept modes."""
    return kept_from_central(disentangled_central(window_matrix, window, U), iso)


def removed_mode_correlation(window_matrix, window, U, iso: Isometry):
    """Correlation matrix of the modes projected out of the central block."""
    return removed_from_central(disentangled_central(window_matrix, window, U), iso)
