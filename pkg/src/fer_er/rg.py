"""Real-space RG flow by entanglement renormalization.

Each level: cut the optimization window around block 0, optimize one
disentangler and one isometry, apply them to every block of the lattice
(disentanglers first), and report truncation errors and entropies.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ti
from .gauge import (
    canonical_frame,
    conjugate_sites,
    procrustes_align,
    window_blocks,
)
from .gaussian import J2, antisymmetrize, block_diagonalize, entropy_of
from .geometry import BlockGeometry, build_geometry, window_indices
from .lattice import (
    ModelSpec,
    energy_density,
    exact_gs_energy_density,
    ground_state_blocks,
    majorana_coefficients,
    site_order,
)
from .optimizer import Disentangler, Isometry, OptimizationTrace, OptimizerOptions, mask, optimize_layer

METHODS = ("dense", "ti")
GAUGES = ("canonical", "none")
DENSE_LIMIT = 4096  # largest mode count we reconstruct densely


@dataclass
class LevelState:
    """Correlations of one RG level, dense (site order) or translation invariant."""

    dimension: int
    sites: int
    modes_per_site: int
    twist: tuple
    matrix: np.ndarray | None = None
    blocks: np.ndarray | None = None

    @property
    def m(self) -> int:
        return 2 * self.modes_per_site

    @property
    def mode_count(self) -> int:
        return self.sites**self.dimension * self.modes_per_site

    def dense(self):
        if self.matrix is None:
            self.matrix = ti.to_dense(self.blocks, self.twist)
        return self.matrix

    def ti_blocks(self):
        if self.blocks is None:
            self.blocks = ti.from_dense(self.matrix, self.sites, self.dimension, self.m)
        return self.blocks

    def gather(self, sites):
        """Dense correlation matrix of the listed (unwrapped) sites."""
        if self.blocks is not None:
            return ti.gather(self.blocks, sites, self.twist)
        geom = self.geometry()
        idx, sgn = [], []
        for s in sites:
            a, b = geom.site_majoranas(tuple(s))
            idx.append(a)
            sgn.append(b)
        idx = np.concatenate(idx)
        sgn = np.concatenate(sgn)
        return self.matrix[np.ix_(idx, idx)] * np.outer(sgn, sgn)

    def geometry(self) -> BlockGeometry:
        if self.sites >= 4 and self.sites % 2 == 0:
            return build_geometry(self.dimension, self.sites, self.modes_per_site, self.twist)
        return BlockGeometry(self.dimension, self.sites, self.modes_per_site, self.twist)

    def block(self, L=2):
        """Sites of an L (1D) or L x L (2D) block at the origin."""
        return ti.origin_sites(self.sites, self.dimension, L)


@dataclass
class MeraLayer:
    level: int
    disentangler: Disentangler
    isometry: Isometry
    geometry: BlockGeometry
    P_in: int
    P_out: int
    trace: OptimizationTrace


@dataclass
class RGReport:
    level: int
    eps_max: float = float("nan")
    eps_mean: float = float("nan")
    entropies: dict = field(default_factory=dict)
    S_block: float = float("nan")
    energy_density: float = float("nan")
    energy_err_rel: float = float("nan")
    fp_distance: float = float("nan")
    fp_distance_aligned: float = float("nan")
    iterations: int = 0
    converged: bool = True
    fallback_sweeps: int = 0
    wall_time: float = 0.0


@dataclass
class RGTrajectory:
    spec: ModelSpec
    method: str
    states: list
    reports: list
    layers: list
    options: dict = field(default_factory=dict)

    @property
    def levels(self) -> int:
        return len(self.layers)


def initial_state(spec: ModelSpec, method="dense") -> LevelState:
    """Ground state grouped into sites of P modes."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    Gmode = ground_state_blocks(spec)
    blocks = ti.group_modes(Gmode, spec.grouping, spec.twist)
    st = LevelState(spec.dimension, spec.grouped_sites, spec.modes_per_site, spec.twist, blocks=blocks)
    if method == "dense":
        st.matrix = antisymmetrize(ti.to_dense(blocks, spec.twist))
        st.blocks = None
    return st


def fine_to_lattice(gamma_sites, spec: ModelSpec):
    """Site-ordered fine-level matrix -> lattice mode order."""
    order = site_order(spec)
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    idx = np.stack([2 * inv, 2 * inv + 1], 1).reshape(-1)
    return gamma_sites[np.ix_(idx, idx)]


def _cell_perm(geom: BlockGeometry, cells):
    idx, sgn = [], []
    for cell in cells:
        for s in cell:
            a, b = geom.site_majoranas(s)
            idx.append(a)
            sgn.append(b)
    return np.concatenate(idx), np.concatenate(sgn).astype(float)


def _conj_cells(X, perm, sgn, U):
    """O^T X O where O acts as U on every cell listed by perm."""
    m = U.shape[0]
    k = len(perm) // m
    Y = X[np.ix_(perm, perm)] * np.outer(sgn, sgn)
    Y = np.matmul(U.T, Y.reshape(k, m, k * m)).reshape(k * m, k * m)
    Y = np.matmul(Y.reshape(k * m, k, m), U).reshape(k * m, k * m)
    out = np.empty_like(X)
    out[np.ix_(perm, perm)] = Y * np.outer(sgn, sgn)
    return out


def apply_layer_dense(gamma, geom: BlockGeometry, U, iso: Isometry):
    """Global layer on a dense site-ordered matrix.  Returns (coarse, removed block 0)."""
    pp, ps = _cell_perm(geom, geom.disentanglers)
    g1 = _conj_cells(gamma, pp, ps, U)
    bp, _ = _cell_perm(geom, geom.blocks)
    nb = len(geom.blocks)
    L2 = iso.R.shape[0]
    Y = g1[np.ix_(bp, bp)].reshape(nb, L2, nb, L2)
    wk = iso.W_kept
    wr = iso.W_removed
    Gn = np.einsum("ai,paqb,bj->piqj", wk, Y, wk, optimize=True)
    k2 = wk.shape[1]
    rem = wr.T @ Y[0, :, 0, :] @ wr
    return antisymmetrize(Gn.reshape(nb * k2, nb * k2)), antisymmetrize(rem)


def descend_dense(gamma_coarse, geom: BlockGeometry, U, iso: Isometry):
    """Inverse of apply_layer_dense with removed modes inserted as pure."""
    nb = len(geom.blocks)
    wk = iso.W_kept
    wr = iso.W_removed
    k2 = wk.shape[1]
    L2 = iso.R.shape[0]
    X = gamma_coarse.reshape(nb, k2, nb, k2)
    Y = np.einsum("ia,paqb,jb->piqj", wk, X, wk, optimize=True)
    pure = wr @ np.kron(np.eye(wr.shape[1] // 2), J2) @ wr.T
    for p in range(nb):
        Y[p, :, p, :] += pure
    bp, _ = _cell_perm(geom, geom.blocks)
    g1 = np.zeros((nb * L2, nb * L2))
    g1[np.ix_(bp, bp)] = Y.reshape(nb * L2, nb * L2)
    pp, ps = _cell_perm(geom, geom.disentanglers)
    return antisymmetrize(_conj_cells(g1, pp, ps, U.T))


def _fold_gauge(iso: Isometry, q):
    """Isometry whose kept output is rotated by q (det q = +1)."""
    k = iso.keep
    yk = mask(k, k)
    rot = np.eye(iso.R.shape[0])
    rot[: 2 * k, : 2 * k] = yk @ q.T @ yk.T
    return Isometry(iso.R @ rot, k)


def _probe_sites(D):
    sites = [(0,) * D]
    for ax in reversed(range(D)):
        for d in (1, 2):
            e = [0] * D
            e[ax] = d
            sites.append(tuple(e))
    return np.array(sites)


def canonical_gauge(state: LevelState):
    """Per-site rotation q putting the state in its canonical frame.

    Built from the on-site block and the couplings to the first and second
    neighbours along every axis.
    """
    sites = _probe_sites(state.dimension)
    g = state.gather(sites)
    m = state.m
    blocks = [g[:m, k * m:(k + 1) * m] for k in range(1, len(sites))]
    return canonical_frame(g[:m, :m], *blocks)


def apply_site_gauge(state: LevelState, q):
    if state.matrix is not None:
        state.matrix = antisymmetrize(conjugate_sites(state.matrix, q))
    if state.blocks is not None:
        state.blocks = ti.conjugate(state.blocks, q)
    return state


def rg_step(state: LevelState, keep=None, options=None, gauge="canonical"):
    """One RG level.  Returns (coarse state, MeraLayer, partial RGReport)."""
    if gauge not in GAUGES:
        raise ValueError(f"gauge must be one of {GAUGES}")
    t0 = time.perf_counter()
    opts = options or OptimizerOptions()
    if state.sites < 4:
        raise ValueError(f"lattice of {state.sites} sites per axis is too small to coarse-grain")
    geom = state.geometry()
    L = 2**state.dimension * state.modes_per_site
    keep = state.modes_per_site if keep is None else (L if keep == "all" else int(keep))
    win = window_indices(geom, 0)
    gw = state.gather(win.sites)
    dis, iso, trace = optimize_layer(gw, win, keep, opts)
    U = dis.matrix
    if state.blocks is not None:
        Gn, rem = ti.apply_layer(state.blocks, U, iso.W_kept, iso.W_removed, state.twist)
        new = LevelState(state.dimension, state.sites // 2, keep, state.twist, blocks=Gn)
    else:
        Gn, rem = apply_layer_dense(state.matrix, geom, U, iso)
        new = LevelState(state.dimension, state.sites // 2, keep, state.twist, matrix=Gn)
    if gauge == "canonical" and new.sites >= 2:
        q = canonical_gauge(new)
        apply_site_gauge(new, q)
        iso = _fold_gauge(iso, q)
    eps = 1 - block_diagonalize(rem).v if rem.size else np.zeros(1)
    layer = MeraLayer(0, dis, iso, geom, state.modes_per_site, keep, trace)
    rep = RGReport(
        level=0,
        eps_max=float(eps.max()),
        eps_mean=float(eps.mean()),
        iterations=trace.iterations,
        converged=trace.converged,
        fallback_sweeps=trace.fallback_sweeps,
    )
    rep.wall_time = time.perf_counter() - t0
    return new, layer, rep


def block_entropy_of_state(state: LevelState, L=2):
    L = min(L, state.sites)
    return entropy_of(state.gather(state.block(L)))


def entropy_scan(gamma, ladder, dimension=1, modes_per_site=1, twist=None):
    """(L, S_L) for blocks of L sites (1D) or L x L sites (2D) at the origin.

    `gamma` is a dense site-ordered matrix, TI blocks, or a LevelState.
    """
    if isinstance(gamma, LevelState):
        st = gamma
    else:
        g = np.asarray(gamma)
        tw = tuple(twist) if twist is not None else (1,) * dimension
        m = 2 * modes_per_site
        if g.ndim == 2:
            n_sites = g.shape[0] // m
            S = round(n_sites ** (1.0 / dimension))
            st = LevelState(dimension, S, modes_per_site, tw, matrix=g)
        else:
            st = LevelState(dimension, g.shape[0], modes_per_site, tw, blocks=g)
    out = []
    for L in ladder:
        if L > st.sites:
            raise ValueError(f"block of {L} exceeds lattice of {st.sites}")
        out.append((int(L), entropy_of(st.gather(st.block(L)))))
    return out


def origin_window(state: LevelState, k=4):
    return state.gather(state.block(k))


def fixed_point_distance(a, b, align=False, site_dim=None, **kw):
    """Max-norm distance between two equal-size site-ordered windows.

    With align=True the residual per-site rotation is optimized out first
    (orthogonal Procrustes over one shared on-site rotation).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"size mismatch {a.shape} vs {b.shape}")
    if not align:
        return float(np.abs(a - b).max()) if a.size else 0.0
    if site_dim is None:
        raise ValueError("align=True needs site_dim (Majoranas per site)")
    _, d = procrustes_align(window_blocks(a, site_dim), window_blocks(b, site_dim), **kw)
    return float(d)


def _fp(prev: LevelState, new: LevelState, k, align):
    if prev.m != new.m:
        return float("nan"), float("nan")
    k = min(k, prev.sites, new.sites)
    wa = origin_window(prev, k)
    wb = origin_window(new, k)
    d = fixed_point_distance(wa, wb)
    da = fixed_point_distance(wa, wb, align=True, site_dim=new.m) if align else float("nan")
    return d, da


def rg_flow(spec: ModelSpec, levels, keep=None, options=None, method="dense", gauge="canonical",
            ladder=(1, 2, 4), energy=True, align=False, fp_window=4, keep_states=True) -> RGTrajectory:
    """Run `levels` RG steps from the exact ground state of `spec`."""
    opts = options or OptimizerOptions()
    state = initial_state(spec, method)
    S0 = state.sites
    if levels < 0 or (levels and S0 // 2 ** (levels - 1) < 4):
        raise ValueError(f"{S0} sites per axis do not admit {levels} halvings")
    e_exact = exact_gs_energy_density(spec)
    ham = majorana_coefficients(spec) if energy and spec.mode_count <= DENSE_LIMIT else None
    r0 = RGReport(level=0)
    r0.S_block = block_entropy_of_state(state)
    r0.entropies = {L: entropy_of(state.gather(state.block(L))) for L in ladder if L <= state.sites}
    if ham is not None:
        r0.energy_density = energy_density(fine_to_lattice(state.dense(), spec), ham)
        r0.energy_err_rel = abs(r0.energy_density - e_exact) / abs(e_exact)
    traj = RGTrajectory(spec, method, [state], [r0], [], {"optimizer": opts.to_dict(), "keep": keep, "gauge": gauge})
    for lev in range(1, levels + 1):
        new, layer, rep = rg_step(state, keep=keep, options=opts, gauge=gauge)
        layer.level = lev
        rep.level = lev
        rep.S_block = block_entropy_of_state(new)
        rep.entropies = {L: entropy_of(new.gather(new.block(L))) for L in ladder if L <= new.sites}
        rep.fp_distance, rep.fp_distance_aligned = _fp(state, new, fp_window, align)
        traj.layers.append(layer)
        traj.states.append(new)
        traj.reports.append(rep)
        if ham is not None:
            fine = reconstruct(traj, lev)
            rep.energy_density = energy_density(fine, ham)
            rep.energy_err_rel = abs(rep.energy_density - e_exact) / abs(e_exact)
        if not keep_states and len(traj.states) > 2:
            traj.states[-3] = None
        state = new
    return traj


def reconstruct(traj: RGTrajectory, level, lattice_order=True):
    """Fine-lattice correlation matrix implied by the MERA truncated at `level`."""
    if not 0 <= level <= traj.levels:
        raise ValueError(f"level must lie in 0..{traj.levels}")
    g = traj.states[level].dense()
    for lay in traj.layers[:level][::-1]:
        g = descend_dense(g, lay.geometry, lay.disentangler.matrix, lay.isometry)
    return fine_to_lattice(g, traj.spec) if lattice_order else g


def correlators(gamma, pairs):
    """<a_r^dag a_s> and <a_r a_s> from a lattice-order correlation matrix."""
    g = np.asarray(gamma)
    M = g.shape[0] // 2
    hop, pair = [], []
    for r, s in pairs:
        if not (0 <= r < M and 0 <= s < M):
            raise IndexError(f"pair ({r}, {s}) outside lattice of {M} modes")
        xx, xy = g[2 * r, 2 * s], g[2 * r, 2 * s + 1]
        yx, yy = g[2 * r + 1, 2 * s], g[2 * r + 1, 2 * s + 1]
        d = 1.0 if r == s else 0.0
        hop.append(0.25 * (2 * d + 1j * (xx + yy) - xy + yx))
        pair.append(0.25 * (1j * (xx - yy) - xy - yx))
    return np.array(hop), np.array(pair)


def reconstruct_correlators(traj: RGTrajectory, level, pairs):
    return correlators(reconstruct(traj, level), pairs)


def report_rows(traj: RGTrajectory):
    for rep in traj.reports:
        yield rep


def _arr(x):
    return None if x is None else {"shape": list(x.shape), "data": x.ravel().tolist()}


def _unarr(d):
    return None if d is None else np.array(d["data"], dtype=float).reshape(d["shape"])


def trajectory_to_dict(traj: RGTrajectory, with_states=True):
    levels = []
    for st, rep in zip(traj.states, traj.reports):
        item = {"report": {k: (v if not isinstance(v, dict) else {str(a): b for a, b in v.items()}) for k, v in asdict(rep).items()}}
        if st is not None:
            item.update(dimension=st.dimension, sites=st.sites, modes_per_site=st.modes_per_site, twist=list(st.twist))
            if with_states:
                item["matrix"] = _arr(st.matrix)
                item["blocks"] = _arr(st.blocks)
        levels.append(item)
    layers = []
    for lay in traj.layers:
        layers.append({
            "level": lay.level,
            "U": _arr(lay.disentangler.matrix),
            "R": _arr(lay.isometry.R),
            "keep": lay.isometry.keep,
            "P_in": lay.P_in,
            "P_out": lay.P_out,
            "geometry": lay.geometry.to_dict(),
            "trace": {"iterations": lay.trace.iterations, "converged": lay.trace.converged,
                      "max_mixedness": lay.trace.max_mixedness, "fallback_sweeps": lay.trace.fallback_sweeps,
                      "costs": lay.trace.costs, "removed_purity": lay.trace.removed_purity},
        })
    return {"format": "fer-er-trajectory", "version": 1, "spec": traj.spec.to_dict(), "method": traj.method,
            "options": traj.options, "levels": levels, "layers": layers}


def save_trajectory(traj: RGTrajectory, path, with_states=True):
    with open(path, "w") as fh:
        json.dump(trajectory_to_dict(traj, with_states), fh)


def load_trajectory(path) -> RGTrajectory:
    with open(path) as fh:
        d = json.load(fh)
    if d.get("format") != "fer-er-trajectory":
        raise ValueError("not a trajectory file")
    spec = ModelSpec.from_dict(d["spec"])
    states, reports, layers = [], [], []
    for item in d["levels"]:
        rd = dict(item["report"])
        rd["entropies"] = {int(k): v for k, v in rd["entropies"].items()}
        reports.append(RGReport(**rd))
        if "sites" in item:
            states.append(LevelState(item["dimension"], item["sites"], item["modes_per_site"], tuple(item["twist"]),
                                     matrix=_unarr(item.get("matrix")), blocks=_unarr(item.get("blocks"))))
        else:
            states.append(None)
    for ld in d["layers"]:
        g = ld["geometry"]
        geom = build_geometry(g["dimension"], g["sites_per_axis"], g["modes_per_site"], tuple(g["twist"]))
        tr = OptimizationTrace(**ld["trace"])
        layers.append(MeraLayer(ld["level"], Disentangler(_unarr(ld["U"])), Isometry(_unarr(ld["R"]), ld["keep"]),
                                geom, ld["P_in"], ld["P_out"], tr))
    return RGTrajectory(spec, d["method"], states, reports, layers, d.get("options", {}))
