"""Translation-invariant representation of lattice correlation matrices.

A state on S^D sites with 2P Majoranas per site is stored as blocks
G[d] = Gamma[site 0, site d] for d on the S^D grid.  Displacements outside
the grid pick up the boundary sign: G[d + S e_ax] = twist[ax] G[d].
A layer then costs O(S^D P^3) instead of O((S^D P)^3).
"""
from __future__ import annotations

import itertools

import numpy as np


def take(G, disp, twist):
    """Blocks G[d] for an (N, D) integer array of displacements."""
    D = len(twist)
    shape = np.array(G.shape[:D])
    disp = np.asarray(disp, dtype=int).reshape(-1, D)
    q, r = np.divmod(disp, shape)
    sign = np.ones(len(disp))
    for ax, t in enumerate(twist):
        if t == -1:
            sign *= np.where(q[:, ax] % 2, -1.0, 1.0)
    return sign[:, None, None] * G[tuple(r.T)]


def offsets(D):
    return np.array(list(itertools.product((0, 1), repeat=D)), dtype=int)


def grid(S, D):
    return np.array(list(itertools.product(range(S), repeat=D)), dtype=int)


def group_modes(Gmode, p, twist):
    """Mode-level blocks (n^D, 2, 2) -> site-level blocks ((n/p)^D, 2P, 2P)."""
    D = len(twist)
    n = Gmode.shape[0]
    S = n // p
    offs = np.array(list(itertools.product(range(p), repeat=D)), dtype=int)
    P = len(offs)
    cells = grid(S, D)
    out = np.zeros((len(cells), 2 * P, 2 * P))
    for i, oi in enumerate(offs):
        for j, oj in enumerate(offs):
            out[:, 2 * i:2 * i + 2, 2 * j:2 * j + 2] = take(Gmode, p * cells + oj - oi, twist)
    return out.reshape((S,) * D + (2 * P, 2 * P))


def gather(G, sites, twist):
    """Dense matrix over a list of (unwrapped) site coordinates."""
    D = len(twist)
    sites = np.asarray(sites, dtype=int).reshape(-1, D)
    m = G.shape[-1]
    k = len(sites)
    disp = (sites[None, :, :] - sites[:, None, :]).reshape(-1, D)
    blocks = take(G, disp, twist).reshape(k, k, m, m)
    return blocks.transpose(0, 2, 1, 3).reshape(k * m, k * m)


def to_dense(G, twist):
    D = len(twist)
    S = G.shape[0]
    return gather(G, grid(S, D), twist)


def from_dense(gamma, S, D, m):
    """Blocks Gamma[site 0, site d] of a site-ordered dense matrix."""
    return gamma[:m].reshape(m, S**D, m).transpose(1, 0, 2).reshape((S,) * D + (m, m)).copy()


def _cells(G, twist):
    """Site blocks -> 2^D-site cell blocks, cell c holding sites 2c + offsets.

    The result does not depend on where the cells start, only on the pairing.
    """
    D = len(twist)
    S = G.shape[0]
    m = G.shape[-1]
    offs = offsets(D)
    k = len(offs)
    C = grid(S // 2, D)
    H = np.zeros((len(C), k * m, k * m))
    for a, ea in enumerate(offs):
        for b, eb in enumerate(offs):
            H[:, a * m:(a + 1) * m, b * m:(b + 1) * m] = take(G, 2 * C + eb - ea, twist)
    return H


def _shift_cells(H, m, twist, shift):
    """Re-cell a period-2 state: cells at 2c - 1 + e (plaquettes) -> 2c + e (blocks)
    when shift = +1, or the reverse when shift = -1.
    """
    D = len(twist)
    nc = round(H.shape[0] ** (1.0 / D))
    Hg = H.reshape((nc,) * D + H.shape[1:])
    offs = offsets(D)
    k = len(offs)
    C = grid(nc, D)
    out = np.zeros_like(H)
    for a, ea in enumerate(offs):
        for b, eb in enumerate(offs):
            # site coordinates in the source cell frame
            xa = ea + shift
            xb = 2 * C + eb + shift
            ca, sa = np.divmod(xa, 2)
            cb, sb = np.divmod(xb, 2)
            ia = int(np.ravel_multi_index(tuple(sa), (2,) * D))
            ib = np.ravel_multi_index(tuple(sb.T), (2,) * D)
            blocks = take(Hg, cb - ca, twist)
            for slot in range(k):
                sel = ib == slot
                if sel.any():
                    out[sel, a * m:(a + 1) * m, b * m:(b + 1) * m] = blocks[sel][:, ia * m:(ia + 1) * m, slot * m:(slot + 1) * m]
    return out


def apply_layer(G, U, W_kept, W_removed, twist):
    """One layer on TI blocks.  Returns (new site blocks, removed block of cell 0)."""
    D = len(twist)
    S = G.shape[0]
    m = G.shape[-1]
    H = _cells(G, twist)
    H = np.matmul(np.matmul(U.T, H), U)
    # plaquette cells start at 2c - 1; block cells at 2c: shift by +1
    B = _shift_cells(H, m, twist, 1)
    Gn = np.matmul(np.matmul(W_kept.T, B), W_kept)
    rem = W_removed.T @ B[0] @ W_removed
    shape = (S // 2,) * D + Gn.shape[1:]
    return Gn.reshape(shape), 0.5 * (rem - rem.T)


def conjugate(G, q):
    return np.matmul(np.matmul(q, G), q.T)


def origin_sites(S, D, k):
    k = min(k, S)
    return grid(k, D)
