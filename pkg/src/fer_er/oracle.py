"""Dense many-body reference calculations for a handful of modes.

Everything here works in the 2^M dimensional Fock space and shares no code
with the correlation-matrix route, so it serves as an independent check.
Basis state index bits: bit (M-1-r) is the occupation of mode r.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations

import numpy as np


def _jw_signs(M):
    states = np.arange(2**M)
    occ = (states[:, None] >> (M - 1 - np.arange(M))[None, :]) & 1
    return states, occ


@lru_cache(maxsize=16)
def majorana_monomials(M):
    """Majorana operators as (perm, phase): (c psi)[perm[i]] = phase[i] psi[i]."""
    states, occ = _jw_signs(M)
    ops = []
    for r in range(M):
        flip = states ^ (1 << (M - 1 - r))
        parity = (-1.0) ** occ[:, :r].sum(axis=1)
        n = occ[:, r]
        # a^dag + a and (a - a^dag)/i
        x_phase = parity.astype(complex)
        y_phase = np.where(n == 1, 1.0, -1.0) * parity / 1j
        ops.append((flip, x_phase))
        ops.append((flip, y_phase.astype(complex)))
    return tuple(ops)


def monomial_to_dense(op, M):
    perm, phase = op
    out = np.zeros((2**M, 2**M), complex)
    out[perm, np.arange(2**M)] = phase
    return out


def majorana_dense(M):
    return [monomial_to_dense(op, M) for op in majorana_monomials(M)]


def annihilators(M):
    c = majorana_dense(M)
    return [0.5 * (c[2 * r] + 1j * c[2 * r + 1]) for r in range(M)]


def _compose(a, b):
    # (a b) psi = a (b psi)
    pa, fa = a
    pb, fb = b
    return pa[pb], fa[pb] * fb


def _pfaffian_table(g, idx_sets):
    memo = {(): 1.0}

    def pf(s):
        if s in memo:
            return memo[s]
        first = s[0]
        total = 0.0
        for k in range(1, len(s)):
            rest = s[1:k] + s[k + 1:]
            total += (-1) ** (k - 1) * g[first, s[k]] * pf(rest)
        memo[s] = total
        return total

    return {s: pf(s) for s in idx_sets}


def wick_density_matrix(gamma):
    """Dense density matrix of the Gaussian state with correlation matrix gamma.

    rho = 2^-L sum_S conj(<c_S>) c_S over even ordered subsets S, where
    <c_S> = i^(|S|/2) Pf(gamma_S).
    """
    g = np.asarray(gamma, dtype=float)
    n2 = g.shape[0]
    L = n2 // 2
    ops = majorana_monomials(L)
    dim = 2**L
    rho = np.zeros((dim, dim), complex)
    subsets = [s for k in range(0, n2 + 1, 2) for s in combinations(range(n2), k)]
    pf = _pfaffian_table(g, subsets)
    ident = (np.arange(dim), np.ones(dim, complex))
    cols = np.arange(dim)
    for s in subsets:
        val = pf[s]
        if val == 0.0:
            continue
        op = ident
        for j in s:
            op = _compose(op, ops[j])
        coef = np.conj(1j ** (len(s) // 2) * val)
        rho[op[0], cols] += coef * op[1]
    return rho / dim


def quadratic_hamiltonian(T, D, M=None):
    """H = sum T_rs a_r^dag a_s + 1/2 sum (D_rs a_r^dag a_s^dag + h.c.)."""
    T = np.asarray(T)
    D = np.asarray(D)
    M = T.shape[0] if M is None else M
    a = annihilators(M)
    ad = [x.conj().T for x in a]
    H = np.zeros((2**M, 2**M), complex)
    for r in range(M):
        for s in range(M):
            if T[r, s] != 0:
                H += T[r, s] * ad[r] @ a[s]
            if D[r, s] != 0:
                term = 0.5 * D[r, s] * ad[r] @ ad[s]
                H += term + term.conj().T
    return H


def chain_couplings(M, gamma, lam):
    """Hopping/pairing tables for the periodic chain, bonds r -> r+1."""
    T = np.zeros((M, M))
    D = np.zeros((M, M))
    for r in range(M):
        s = (r + 1) % M
        T[r, s] += 0.5
        T[s, r] += 0.5
        D[r, s] += 0.5 * gamma
        D[s, r] -= 0.5 * gamma
    T -= lam * np.eye(M)
    return T, D


def square_couplings(n, gamma, lam):
    """Same for an n x n periodic square lattice, mode index x*n + y."""
    M = n * n
    T = np.zeros((M, M))
    D = np.zeros((M, M))
    for x in range(n):
        for y in range(n):
            r = x * n + y
            for s in (((x + 1) % n) * n + y, x * n + (y + 1) % n):
                T[r, s] += 0.5
                T[s, r] += 0.5
                D[r, s] += 0.5 * gamma
                D[s, r] -= 0.5 * gamma
    T -= lam * np.eye(M)
    return T, D


def ground_state(H, M, tol=1e-9):
    """Lowest eigenvector; inside a degenerate ground space take max particle number."""
    w, X = np.linalg.eigh(H)
    deg = np.abs(w - w[0]) < tol
    P0 = X[:, deg]
    if P0.shape[1] > 1:
        a = annihilators(M)
        N = sum(x.conj().T @ x for x in a)
        wn, Y = np.linalg.eigh(P0.conj().T @ N @ P0)
        if wn.shape[0] > 1 and abs(wn[-1] - wn[-2]) < tol:
            raise ValueError("particle number does not resolve the ground space")
        psi = P0 @ Y[:, -1]
    else:
        psi = P0[:, 0]
    return w[0], psi


def correlation_from_state(psi, M):
    c = majorana_dense(M)
    g = np.zeros((2 * M, 2 * M))
    for j in range(2 * M):
        for k in range(2 * M):
            if j != k:
                g[j, k] = np.real(-1j * (psi.conj() @ c[j] @ c[k] @ psi))
    return g


def correlation_from_density(rho, M):
    c = majorana_dense(M)
    g = np.zeros((2 * M, 2 * M))
    for j in range(2 * M):
        for k in range(2 * M):
            if j != k:
                g[j, k] = np.real(-1j * np.trace(rho @ c[j] @ c[k]))
    return g
