"""Residual per-site gauge freedom of coarse-grained correlation matrices.

A renormalized state is only defined up to an orthogonal rotation q of the
Majorana operators on each effective site (the same q on every site).  Two
tools: a deterministic canonical frame, and a Procrustes alignment that
searches the rotation bringing one state onto another.
"""
from __future__ import annotations

import itertools

import numpy as np



def site_blocks(gamma, m):
    """View a site-ordered matrix as (site, site) blocks of size m."""
    n = gamma.shape[0] // m
    return gamma.reshape(n, m, n, m).transpose(0, 2, 1, 3)


def conjugate_sites(gamma, q):
    """(I (x) q) gamma (I (x) q)^T for a site-ordered matrix."""
    m = q.shape[0]
    b = site_blocks(gamma, m)
    b = np.einsum("ij,abjk,lk->abil", q, b, q)
    n = b.shape[0]
    return b.transpose(0, 2, 1, 3).reshape(n * m, n * m)


def _covariants(onsite, couplings):
    """Matrices transforming as X -> q X q^T under a site rotation q."""
    xs = [onsite]
    for c in couplings:
        xs += [c, c.T, onsite @ c, c @ onsite, c @ c]
    return [x / max(np.linalg.norm(x), 1e-300) for x in xs]


def _clusters(w, tol):
    groups, cur = [], [0]
    for i in range(1, len(w)):
        if abs(w[i] - w[cur[-1]]) <= tol:
            cur.append(i)
        else:
            groups.append(cur)
            cur = [i]
    groups.append(cur)
    return groups


def canonical_frame(onsite, *couplings, tol=1e-3, probe_floors=(1e-2, 1e-4, 1e-7)):
    """Deterministic rotation q (det +1) of the per-site Majorana frame.

    The frame depends only on the state: if every block X is replaced by
    g X g^T with g in SO(m), the returned frame becomes q g^T, up to a
    global sign.  Basis vectors are eigenvectors of a fixed generic
    combination of symmetric covariants.  Inside a degenerate eigenspace
    the basis is built by Gram-Schmidt on probe vectors X a, where a runs
    over already fixed basis vectors, which also fixes every sign.  An exact
    degeneracy of the first eigenspace is a symmetry of the state, so its
    internal basis does not affect the canonical matrix.
    """
    onsite = np.asarray(onsite, dtype=float)
    couplings = [np.asarray(c, dtype=float) for c in couplings]
    m = onsite.shape[0]
    xs = _covariants(onsite, couplings)
    syms = [x @ x.T for x in xs] + [x.T @ x for x in xs[1:]]
    syms += [x + x.T for x in xs[1:]]
    S = sum(np.sqrt(k + 2.0) * s for k, s in enumerate(syms))
    w, E = np.linalg.eigh(S)
    order = np.argsort(-w, kind="stable")
    w, E = w[order], E[:, order]
    scale = max(np.abs(w).max(), 1e-300)
    rows = []
    for g in _clusters(w, tol * scale):
        B = E[:, g]
        if not rows:
            if len(g) == 2:
                # rotations of a symmetric pair are free, its orientation is not
                A = sum(np.sqrt(k + 1.0) * (x - x.T) for k, x in enumerate(xs))
                if B[:, 0] @ A @ B[:, 1] < 0:
                    B = B * np.array([1.0, -1.0])
            rows.extend(B.T)
            continue
        basis = []
        # probes are unit-normalized covariants applied to unit vectors, so an
        # absolute floor separates real couplings from noise
        for floor in probe_floors:
            for a in rows:
                for x in xs:
                    if len(basis) == len(g):
                        break
                    p = B.T @ (x @ a)
                    for _ in range(2):  # twice: small probes lose orthogonality
                        for b in basis:
                            p = p - (b @ p) * b
                    if np.linalg.norm(p) > floor:
                        basis.append(p / np.linalg.norm(p))
        # directions no probe reaches decouple from the rest; any basis works
        for i in range(len(g)):
            if len(basis) == len(g):
                break
            p = np.eye(len(g))[i]
            for b in basis:
                p = p - (b @ p) * b
            if np.linalg.norm(p) > 1e-6:
                basis.append(p / np.linalg.norm(p))
        rows.extend((B @ np.array(basis).T).T)
    # nearest orthogonal matrix; commutes with q -> q g^T, so covariance survives
    q = _polar(np.array(rows))
    if np.linalg.det(q) < 0:
        q[-1] *= -1
    return q


def _frame(onsite):
    """Eigen-based canonical frame, used only to seed the alignment search."""
    m = onsite.shape[0]
    w, X = np.linalg.eigh(1j * onsite)
    top = np.argsort(-w)[: m // 2]
    V = np.zeros((m, m))
    for r, k in enumerate(top):
        V[2 * r] = np.sqrt(2) * X[:, k].imag
        V[2 * r + 1] = np.sqrt(2) * X[:, k].real
    return V


def _polar(E):
    X, _, Yt = np.linalg.svd(E)
    return X @ Yt


def procrustes_align(a_blocks, b_blocks, random_starts=8, iters=1000, seed=0):
    """Orthogonal q maximizing sum_d tr(q a_d q^T b_d^T).

    The search runs polar iterations from seeds built from the canonical
    frames of both on-site blocks (every sign/reflection choice per 2x2
    block) plus a few random rotations, and keeps the seed whose result
    has the smallest max-norm mismatch.  Returns (q, mismatch).
    """
    A = [np.asarray(x) for x in a_blocks]
    B = [np.asarray(x) for x in b_blocks]
    m = A[0].shape[0]
    n = m // 2

    def value(q):
        return sum(float(np.sum((q @ x @ q.T) * y)) for x, y in zip(A, B))

    def mismatch(q):
        return max(float(np.abs(q @ x @ q.T - y).max()) for x, y in zip(A, B))

    va, vb = _frame(A[0]), _frame(B[0])
    choices = [np.eye(2), -np.eye(2), np.diag([1.0, -1.0]), np.diag([-1.0, 1.0])]
    seeds = []
    combos = itertools.product(range(4), repeat=n) if n <= 4 else [(0,) * n, (1,) * n]
    for combo in combos:
        d = np.zeros((m, m))
        for r, c in enumerate(combo):
            d[2 * r:2 * r + 2, 2 * r:2 * r + 2] = choices[c]
        seeds.append(vb.T @ d @ va)
    rng = np.random.default_rng(seed)
    seeds.append(np.eye(m))
    for _ in range(random_starts):
        seeds.append(np.linalg.qr(rng.normal(size=(m, m)))[0])
    best_q, best = None, np.inf
    for q in seeds:
        fq = value(q)
        for _ in range(iters):
            E = sum(y @ q @ x.T + y.T @ q @ x for x, y in zip(A, B))
            qn = _polar(E)
            fn = value(qn)
            # the objective gain is quadratic in the residual, so stop on step size
            if fn < fq - 1e-12 * max(1.0, abs(fq)):
                break
            step = float(np.abs(qn - q).max())
            q, fq = qn, fn
            if step < 1e-14:
                break
        d = mismatch(q)
        if d < best:
            best_q, best = q, d
    return best_q, best


def random_site_gauge(gamma, m, rng):
    """Apply one random orthogonal rotation to every site (control experiments)."""
    q = np.linalg.qr(rng.normal(size=(m, m)))[0]
    return conjugate_sites(gamma, q), q


def window_blocks(gamma, m):
    """All (i, j) site blocks of a site-ordered window, as a flat list."""
    b = site_blocks(gamma, m)
    return [b[i, j] for i in range(b.shape[0]) for j in range(b.shape[1])]

