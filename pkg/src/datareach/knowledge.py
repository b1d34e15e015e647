"""Data-driven differential inclusion for unknown control-affine dynamics.

A sampled trajectory of ``xdot = f(x) + G(x) u`` plus Lipschitz bounds (and
optional further side information) is turned into interval-valued maps
``f_over`` / ``G_over`` such that the true vector field is guaranteed to
satisfy ``xdot in f_over(x) + G_over(x) u`` everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import EmptyIntersection, InconsistentSample
from .intervals import IMatrix, ITensor3, Interval, IVector, clamp_into, imat_vec, meet


# crossings below this (relative) size are float artifacts of touching
# intervals, not data inconsistencies
_MEET_TOL = 1e-8
# relative outward padding absorbing per-cut rounding so that repeated
# contraction passes cannot erode soundness (kept small enough that even
# division-amplified pads stay below golden-test endpoint tolerances)
_PAD = 1e-14
# contracting a G column divides by u_l, amplifying rounding by 1/|u_l|;
# below this magnitude the column is left untouched (no information anyway)
_U_ZERO_TOL = 1e-5


@dataclass(frozen=True)
class Sample:
    """One trajectory data point: state, state derivative and applied control."""

    x: np.ndarray
    xdot: np.ndarray
    u: np.ndarray
    t: Optional[float] = None

    def __post_init__(self):
        for name in ("x", "xdot", "u"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.x.shape != self.xdot.shape:
            raise ValueError("x and xdot must have the same length")


@dataclass(frozen=True)
class LipschitzBounds:
    """Upper bounds on the componentwise Lipschitz constants of f and G."""

    L_f: np.ndarray  # (n,)
    L_G: np.ndarray  # (n, m)

    def __post_init__(self):
        object.__setattr__(self, "L_f", np.asarray(self.L_f, dtype=float))
        object.__setattr__(self, "L_G", np.asarray(self.L_G, dtype=float))
        if self.L_f.ndim != 1 or self.L_G.ndim != 2:
            raise ValueError("L_f must be a vector and L_G a matrix")
        if self.L_G.shape[0] != self.L_f.shape[0]:
            raise ValueError("L_f and L_G disagree on the state dimension")
        if np.any(self.L_f < 0) or np.any(self.L_G < 0):
            raise ValueError("Lipschitz bounds must be nonnegative")

    @property
    def n(self) -> int:
        return self.L_f.shape[0]

    @property
    def m(self) -> int:
        return self.L_G.shape[1]


@dataclass(frozen=True)
class VectorFieldBounds:
    """Known supersets of the ranges of f and G over a state box."""

    region: IVector
    f_range: IVector
    G_range: IMatrix


@dataclass(frozen=True)
class GradientBounds:
    """Per-entry interval bounds on Jacobian components, e.g. monotonicity."""

    f: Dict[Tuple[int, int], Interval] = field(default_factory=dict)
    G: Dict[Tuple[int, int, int], Interval] = field(default_factory=dict)


@dataclass(frozen=True)
class Decoupling:
    """Boolean dependency masks; a False entry means the derivative is identically 0.

    ``f_depends[k, p]`` tells whether f_k may depend on state p, and
    ``G_depends[k, l, p]`` the same for G_{k,l}.
    """

    f_depends: np.ndarray  # (n, n) bool
    G_depends: np.ndarray  # (n, m, n) bool

    def __post_init__(self):
        object.__setattr__(self, "f_depends", np.asarray(self.f_depends, dtype=bool))
        object.__setattr__(self, "G_depends", np.asarray(self.G_depends, dtype=bool))


# User-supplied constraint hook: contracts (f enclosure, G enclosure, Jf, JG)
# over a state/control box.  Jf / JG may be None when the caller only needs
# the vector-field enclosures.
Contractor = Callable[
    [IVector, IVector, IVector, IMatrix, Optional[IMatrix], Optional[ITensor3]],
    Tuple[IVector, IMatrix, Optional[IMatrix], Optional[ITensor3]],
]


@dataclass(frozen=True)
class PartialDynamics:
    """Known additive part of the dynamics plus bounds for the unknown residual."""

    f_known: Callable[[np.ndarray], np.ndarray]
    G_known: Callable[[np.ndarray], np.ndarray]
    f_known_iv: Callable[[IVector], IVector]
    G_known_iv: Callable[[IVector], IMatrix]
    jac_f_known_iv: Callable[[IVector], IMatrix]
    jac_G_known_iv: Callable[[IVector], ITensor3]
    lip: LipschitzBounds  # bounds for the unknown residual only


@dataclass(frozen=True)
class SideInfoSet:
    """Optional structural knowledge used to tighten the inclusion."""

    vf_bounds: Optional[VectorFieldBounds] = None
    grad_bounds: Optional[GradientBounds] = None
    decoupling: Optional[Decoupling] = None
    algebraic_contractor: Optional[Contractor] = None
    partial_dynamics: Optional[PartialDynamics] = None


@dataclass(frozen=True)
class KnowledgeEntry:
    """A state together with contracted enclosures of f and G at that state."""

    x: np.ndarray
    C_F: IVector
    C_G: IMatrix


class _QueryCache:
    """Stacked entry arrays and dependency groups for vectorized queries."""

    def __init__(self, entries, lip: LipschitzBounds, side: SideInfoSet):
        n, m = lip.n, lip.m
        self.xs = np.array([e.x for e in entries])            # (N, n)
        self.cf_lo = np.array([e.C_F.lo for e in entries])    # (N, n)
        self.cf_hi = np.array([e.C_F.hi for e in entries])
        self.cg_lo = np.array([e.C_G.lo for e in entries])    # (N, n, m)
        self.cg_hi = np.array([e.C_G.hi for e in entries])

        dec = side.decoupling
        f_masks = dec.f_depends if dec is not None else np.ones((n, n), bool)
        g_masks = dec.G_depends if dec is not None else np.ones((n, m, n), bool)
        masks = {}

        def mask_id(mask):
            key = mask.tobytes()
            if key not in masks:
                masks[key] = (len(masks), mask.copy())
            return masks[key][0]

        self.f_group = np.array([mask_id(f_masks[k]) for k in range(n)])
        self.g_group = np.array(
            [[mask_id(g_masks[k, l]) for l in range(m)] for k in range(n)]
        )
        self.masks = [mask for _, mask in sorted(masks.values())]

    def dists_point(self, x):
        """Per-group Euclidean distances |x - x_i| over dependent coordinates."""
        diff = self.xs - x[None, :]
        return [
            np.sqrt((diff[:, mask] ** 2).sum(axis=1)) for mask in self.masks
        ]

    def dists_sup(self, X: IVector):
        """Per-group upper bounds of |y - x_i| over all y in the box X."""
        far = np.maximum(np.abs(X.lo[None, :] - self.xs), np.abs(X.hi[None, :] - self.xs))
        return [np.sqrt((far[:, mask] ** 2).sum(axis=1)) for mask in self.masks]


@dataclass(frozen=True)
class KnowledgeBase:
    """The set of contracted enclosures defining the differential inclusion.

    ``lip`` bounds the part learned from data (the residual when partial
    dynamics are known); ``lip_total`` bounds the full system and is what
    step-size conditions must use.
    """

    entries: tuple
    lip: LipschitzBounds
    lip_total: LipschitzBounds
    side: SideInfoSet = field(default_factory=SideInfoSet)

    def __post_init__(self):
        if len(self.entries) == 0:
            raise ValueError("a knowledge base needs at least its seed entry")
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(
            self, "_cache", _QueryCache(self.entries, self.lip, self.side)
        )

    @property
    def n(self) -> int:
        return self.lip.n

    @property
    def m(self) -> int:
        return self.lip.m

    def with_entries(self, entries) -> "KnowledgeBase":
        return KnowledgeBase(tuple(entries), self.lip, self.lip_total, self.side)


# ---------------------------------------------------------------------------
# contraction at a data point
# ---------------------------------------------------------------------------

def contract_fg(s: Sample, F: IVector, G: IMatrix) -> Tuple[IVector, IMatrix]:
    """Contract enclosures of f(x) and G(x) against xdot = f(x) + G(x) u.

    Sequential two-step forward/backward pruning: first the f-enclosure is cut
    with xdot - G u, then each column of G is cut in turn while a running
    interval tracks the part of G u not yet attributed.  A near-zero control
    component leaves its column untouched (no information, and dividing by it
    would amplify rounding).
    """
    n, m = G.shape
    u = s.u
    try:
        Gu = imat_vec(G, u)
        C_F = clamp_into(meet(F, s.xdot - Gu, _MEET_TOL, _PAD), F)
        srun = meet(IVector.point(s.xdot) - C_F, Gu, _MEET_TOL, _PAD)
        cg_lo = np.array(G.lo)
        cg_hi = np.array(G.hi)
        # suffix sums over columns l+1..m-1 of G u
        col_lo = np.minimum(G.lo * u[None, :], G.hi * u[None, :])
        col_hi = np.maximum(G.lo * u[None, :], G.hi * u[None, :])
        for l in range(m):
            tail_lo = col_lo[:, l + 1 :].sum(axis=1)
            tail_hi = col_hi[:, l + 1 :].sum(axis=1)
            tail = IVector(tail_lo, tail_hi)
            if abs(u[l]) > _U_ZERO_TOL:
                num = meet(srun - tail, IVector(col_lo[:, l], col_hi[:, l]), _MEET_TOL)
                a, b = num.lo / u[l], num.hi / u[l]
                # dividing amplifies rounding by 1/|u_l|; pad accordingly
                div_pad = 1e-14 * (1.0 + np.maximum(np.abs(num.lo), np.abs(num.hi))) / abs(u[l])
                cg_lo[:, l] = np.clip(np.minimum(a, b) - div_pad, G.lo[:, l], G.hi[:, l])
                cg_hi[:, l] = np.clip(np.maximum(a, b) + div_pad, cg_lo[:, l], G.hi[:, l])
            used_lo = np.minimum(cg_lo[:, l] * u[l], cg_hi[:, l] * u[l])
            used_hi = np.maximum(cg_lo[:, l] * u[l], cg_hi[:, l] * u[l])
            srun = meet(IVector(srun.lo - used_hi, srun.hi - used_lo), tail, _MEET_TOL, _PAD)
    except EmptyIntersection as exc:
        raise InconsistentSample(
            f"data point contradicts the current enclosures ({exc})",
            component=exc.index,
        ) from exc
    return C_F, IMatrix(cg_lo, cg_hi)


# ---------------------------------------------------------------------------
# over-approximation queries
# ---------------------------------------------------------------------------

def _unknown_f(kb: KnowledgeBase, dists) -> Tuple[np.ndarray, np.ndarray]:
    c = kb._cache
    D = np.stack([dists[g] for g in c.f_group], axis=1)  # (N, n)
    slack = kb.lip.L_f[None, :] * D
    lo = (c.cf_lo - slack).max(axis=0)
    hi = (c.cf_hi + slack).min(axis=0)
    return lo, hi


def _unknown_G(kb: KnowledgeBase, dists) -> Tuple[np.ndarray, np.ndarray]:
    c = kb._cache
    n, m = kb.n, kb.m
    dist_stack = np.stack(dists, axis=0)                 # (ngroups, N)
    D = dist_stack[c.g_group.reshape(-1)]                # (n*m, N)
    D = D.reshape(n, m, -1).transpose(2, 0, 1)           # (N, n, m)
    slack = kb.lip.L_G[None, :, :] * D
    lo = (c.cg_lo - slack).max(axis=0)
    hi = (c.cg_hi + slack).min(axis=0)
    return lo, hi


def _settle(lo, hi, what):
    """Absorb float-level crossings of the entry intersection; raise on real ones."""
    gap = lo - hi
    scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    if np.any(gap > 0.0):
        genuine = gap > _MEET_TOL * scale
        if np.any(genuine):
            idx = tuple(int(i) for i in np.argwhere(genuine)[0])
            raise EmptyIntersection(
                f"{what}-enclosure empty at component {idx}: Lipschitz bounds and "
                "data are mutually inconsistent",
                index=idx,
            )
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    margin = _PAD * scale
    return lo - margin, hi + margin


def f_over(x: np.ndarray, kb: KnowledgeBase) -> IVector:
    """Interval enclosure of f(x) from the knowledge base (Lipschitz envelope)."""
    x = np.asarray(x, dtype=float)
    dists = kb._cache.dists_point(x)
    lo, hi = _settle(*_unknown_f(kb, dists), "f")
    enc = IVector(lo, hi)
    pd = kb.side.partial_dynamics
    if pd is not None:
        enc = enc + pd.f_known(x)
    vb = kb.side.vf_bounds
    if vb is not None and vb.region.contains(x):
        enc = meet(enc, vb.f_range, _MEET_TOL, _PAD)
    return enc


def G_over(x: np.ndarray, kb: KnowledgeBase) -> IMatrix:
    """Interval enclosure of G(x) from the knowledge base."""
    x = np.asarray(x, dtype=float)
    dists = kb._cache.dists_point(x)
    lo, hi = _settle(*_unknown_G(kb, dists), "G")
    enc = IMatrix(lo, hi)
    pd = kb.side.partial_dynamics
    if pd is not None:
        enc = enc + pd.G_known(x)
    vb = kb.side.vf_bounds
    if vb is not None and vb.region.contains(x):
        enc = meet(enc, vb.G_range, _MEET_TOL, _PAD)
    return enc


def f_over_iv(X: IVector, kb: KnowledgeBase) -> IVector:
    """Inclusion-isotone interval extension of f_over to state boxes."""
    dists = kb._cache.dists_sup(X)
    lo, hi = _settle(*_unknown_f(kb, dists), "f")
    enc = IVector(lo, hi)
    pd = kb.side.partial_dynamics
    if pd is not None:
        enc = enc + pd.f_known_iv(X)
    vb = kb.side.vf_bounds
    if vb is not None and vb.region.encloses(X):
        enc = meet(enc, vb.f_range, _MEET_TOL, _PAD)
    return enc


def G_over_iv(X: IVector, kb: KnowledgeBase) -> IMatrix:
    """Inclusion-isotone interval extension of G_over to state boxes."""
    dists = kb._cache.dists_sup(X)
    lo, hi = _settle(*_unknown_G(kb, dists), "G")
    enc = IMatrix(lo, hi)
    pd = kb.side.partial_dynamics
    if pd is not None:
        enc = enc + pd.G_known_iv(X)
    vb = kb.side.vf_bounds
    if vb is not None and vb.region.encloses(X):
        enc = meet(enc, vb.G_range, _MEET_TOL, _PAD)
    return enc


# ---------------------------------------------------------------------------
# knowledge-base construction
# ---------------------------------------------------------------------------

def _residual_sample(s: Sample, pd: Optional[PartialDynamics]) -> Sample:
    if pd is None:
        return s
    resid = s.xdot - (pd.f_known(s.x) + pd.G_known(s.x) @ s.u)
    return Sample(s.x, resid, s.u, s.t)


def _residual_queries(kb: KnowledgeBase, x) -> Tuple[IVector, IMatrix]:
    """Enclosures of the learned (residual) part at a point, range bounds applied."""
    dists = kb._cache.dists_point(np.asarray(x, dtype=float))
    flo, fhi = _settle(*_unknown_f(kb, dists), "f")
    glo, ghi = _settle(*_unknown_G(kb, dists), "G")
    F, G = IVector(flo, fhi), IMatrix(glo, ghi)
    vb = kb.side.vf_bounds
    if vb is not None and vb.region.contains(x):
        pd = kb.side.partial_dynamics
        fb, gb = vb.f_range, vb.G_range
        if pd is not None:
            fb = fb - pd.f_known(np.asarray(x, float))
            gb = gb - pd.G_known(np.asarray(x, float))
        F = meet(F, fb, _MEET_TOL, _PAD)
        G = meet(G, gb, _MEET_TOL, _PAD)
    return F, G


def _seed_entry(side: SideInfoSet, samples, n, m, M) -> KnowledgeEntry:
    vb = side.vf_bounds
    pd = side.partial_dynamics
    if vb is not None:
        x0 = vb.region.mid
        CF0, CG0 = vb.f_range, vb.G_range
        if pd is not None:
            CF0 = CF0 - pd.f_known(x0)
            CG0 = CG0 - pd.G_known(x0)
    else:
        x0 = samples[0].x
        CF0 = IVector(np.full(n, -M), np.full(n, M))
        CG0 = IMatrix(np.full((n, m), -M), np.full((n, m), M))
    return KnowledgeEntry(np.asarray(x0, float), CF0, CG0)


def _max_change(old: KnowledgeEntry, new: KnowledgeEntry) -> float:
    return max(
        float(np.max(np.abs(new.C_F.lo - old.C_F.lo), initial=0.0)),
        float(np.max(np.abs(new.C_F.hi - old.C_F.hi), initial=0.0)),
        float(np.max(np.abs(new.C_G.lo - old.C_G.lo), initial=0.0)),
        float(np.max(np.abs(new.C_G.hi - old.C_G.hi), initial=0.0)),
    )


def build_knowledge(
    traj,
    lip: LipschitzBounds,
    side: Optional[SideInfoSet] = None,
    M: float = 1e3,
    fixpoint_tol: float = 1e-9,
    max_fixpoint_iters: int = 50,
) -> KnowledgeBase:
    """Contract the trajectory into a knowledge base, iterating to invariance.

    Each data point is first processed against the base built so far, then the
    whole base is re-contracted until no endpoint moves by more than
    ``fixpoint_tol`` (widths are monotone non-increasing, so this terminates).
    ``M`` must genuinely bound |f| and |G| on the domain for the result to be
    sound when no range bounds are supplied.
    """
    side = side or SideInfoSet()
    pd = side.partial_dynamics
    qlip = pd.lip if pd is not None else lip
    dec = side.decoupling
    if dec is not None and (
        dec.f_depends.shape != (qlip.n, qlip.n)
        or dec.G_depends.shape != (qlip.n, qlip.m, qlip.n)
    ):
        raise ValueError("decoupling mask shapes do not match the system dimensions")
    samples = [_residual_sample(s, pd) for s in traj]
    if not samples and side.vf_bounds is None:
        raise ValueError("need at least one sample or vector-field bounds")

    kb = KnowledgeBase(
        (_seed_entry(side, samples, qlip.n, qlip.m, M),), qlip, lip, side
    )
    for idx, s in enumerate(samples):
        kb = kb.with_entries(kb.entries + (_contract_against(kb, s, idx),))
    return _iterate_to_invariance(kb, samples, fixpoint_tol, max_fixpoint_iters)


def _contract_against(kb: KnowledgeBase, s: Sample, idx) -> KnowledgeEntry:
    F, G = _residual_queries(kb, s.x)
    try:
        CF, CG = contract_fg(s, F, G)
    except InconsistentSample as exc:
        raise InconsistentSample(
            f"sample {idx} contradicts the enclosures at component "
            f"{exc.component}", sample_index=idx, component=exc.component
        ) from exc
    return KnowledgeEntry(s.x, CF, CG)


def _iterate_to_invariance(kb, samples, tol, max_iters) -> KnowledgeBase:
    for _ in range(max_iters):
        entries = [kb.entries[0]]
        change = 0.0
        for idx, s in enumerate(samples):
            new = _contract_against(kb, s, idx)
            change = max(change, _max_change(kb.entries[idx + 1], new))
            entries.append(new)
        kb = kb.with_entries(entries)
        if change < tol:
            break
    return kb


def append_sample(kb: KnowledgeBase, sample: Sample) -> KnowledgeBase:
    """Add one data point with a single query-and-contract pass.

    The incremental update leaves older entries untouched, so its cost is
    linear in the base size; use `rebuild` for a periodic full refresh.
    """
    s = _residual_sample(sample, kb.side.partial_dynamics)
    idx = len(kb.entries) - 1
    return kb.with_entries(kb.entries + (_contract_against(kb, s, idx),))


def rebuild(kb: KnowledgeBase, samples, fixpoint_tol=1e-9, max_fixpoint_iters=50):
    """Full invariance re-run against an externally kept list of raw samples."""
    side_samples = [_residual_sample(s, kb.side.partial_dynamics) for s in samples]
    if len(side_samples) != len(kb.entries) - 1:
        raise ValueError("sample list does not match the knowledge base")
    return _iterate_to_invariance(kb, side_samples, fixpoint_tol, max_fixpoint_iters)


# ---------------------------------------------------------------------------
# Jacobian interval extensions
# ---------------------------------------------------------------------------

def jacobian_extensions(
    kb: KnowledgeBase, state_box: Optional[IVector] = None
) -> Tuple[IMatrix, ITensor3]:
    """Interval Jacobians of f and G from Lipschitz bounds and side information.

    Baseline entries are L [-1,1]; decoupling masks zero entries, gradient
    bounds intersect them, and known partial dynamics contribute their exact
    Jacobian evaluated over ``state_box``.
    """
    n, m = kb.n, kb.m
    lf, lg = kb.lip.L_f, kb.lip.L_G

    jf_hi = np.repeat(lf[:, None], n, axis=1)
    jg_hi = np.repeat(lg[:, :, None], n, axis=2)
    dec = kb.side.decoupling
    if dec is not None:
        jf_hi = np.where(dec.f_depends, jf_hi, 0.0)
        jg_hi = np.where(dec.G_depends, jg_hi, 0.0)
    jf_lo, jg_lo = -jf_hi, -jg_hi

    gb = kb.side.grad_bounds
    if gb is not None:
        jf_lo, jf_hi = jf_lo.copy(), jf_hi.copy()
        jg_lo, jg_hi = jg_lo.copy(), jg_hi.copy()
        for (k, p), iv in gb.f.items():
            jf_lo[k, p] = max(jf_lo[k, p], iv.lo)
            jf_hi[k, p] = min(jf_hi[k, p], iv.hi)
        for (k, l, p), iv in gb.G.items():
            jg_lo[k, l, p] = max(jg_lo[k, l, p], iv.lo)
            jg_hi[k, l, p] = min(jg_hi[k, l, p], iv.hi)
        if np.any(jf_lo > jf_hi) or np.any(jg_lo > jg_hi):
            raise EmptyIntersection("gradient bounds contradict Lipschitz bounds")

    Jf = IMatrix(jf_lo, jf_hi)
    JG = ITensor3(jg_lo, jg_hi)
    pd = kb.side.partial_dynamics
    if pd is not None:
        if state_box is None:
            raise ValueError(
                "state_box is required when partial dynamics are declared"
            )
        Jf = pd.jac_f_known_iv(state_box) + Jf
        JG = pd.jac_G_known_iv(state_box) + JG
    return Jf, JG
