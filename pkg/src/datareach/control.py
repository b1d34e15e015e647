"""One-step near-optimal control over the data-driven over-approximation.

The next-state over-approximation is linearized into control-affine interval
models; minimizing through them yields a box-constrained QP (idealistic) or a
small family of coupled QPs (optimistic), with a computable bound on the gap
to the optimum under known dynamics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import AllOrthantsInfeasible, NonConvexAssembly, StepTooLarge
from .intervals import (
    IMatrix,
    IVector,
    imat_imat,
    imat_vec,
    real_mat_iv,
    tensor_transpose,
    tensor_vec,
    tensorT_vec,
)
from .knowledge import KnowledgeBase, f_over_iv, G_over_iv, jacobian_extensions
from .qpsolve import (
    BoxQP,
    OptimisticQP,
    OrthantQP,
    QPOptions,
    solve_idealistic,
    solve_optimistic,
)
from .reach import beta_of, rough_enclosure_explicit


@dataclass(frozen=True)
class QuadraticCost:
    """Convex quadratic one-step cost c(x, u, y) = [y;u]' [[Q,S],[S',R]] [y;u] + [q;r]'[y;u].

    Only (u, y) enter the value; the current state is irrelevant to the cost.
    """

    Q: np.ndarray
    R: np.ndarray
    S: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        R = np.asarray(self.R, dtype=float)
        S = np.asarray(self.S, dtype=float)
        q = np.asarray(self.q, dtype=float)
        r = np.asarray(self.r, dtype=float)
        n, m = q.shape[0], r.shape[0]
        if Q.shape != (n, n) or R.shape != (m, m) or S.shape != (n, m):
            raise ValueError("cost matrix shapes are inconsistent")
        if not np.allclose(Q, Q.T, atol=1e-10) or not np.allclose(R, R.T, atol=1e-10):
            raise ValueError("Q and R must be symmetric")
        Q = 0.5 * (Q + Q.T)
        R = 0.5 * (R + R.T)
        joint = np.block([[Q, S], [S.T, R]])
        if float(np.linalg.eigvalsh(joint).min()) < -1e-9:
            raise ValueError("joint cost matrix must be positive semidefinite")
        for name, val in (("Q", Q), ("R", R), ("S", S), ("q", q), ("r", r)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def m(self) -> int:
        return self.r.shape[0]

    def value(self, u: np.ndarray, y: np.ndarray) -> float:
        return float(
            y @ self.Q @ y + 2.0 * y @ self.S @ u + u @ self.R @ u
            + self.q @ y + self.r @ u
        )


def setpoint_cost(n: int, m: int, index: int, target: float, weight: float = 0.5
                  ) -> Tuple[QuadraticCost, float]:
    """Cost weight*(y[index] - target)^2 in (Q, S, R, q, r) form plus its constant."""
    Q = np.zeros((n, n))
    Q[index, index] = weight
    q = np.zeros(n)
    q[index] = -2.0 * weight * target
    cost = QuadraticCost(Q, np.zeros((m, m)), np.zeros((n, m)), q, np.zeros(m))
    return cost, weight * target * target


def norm_cost(n: int, m: int, weight: float = 0.5) -> QuadraticCost:
    """Cost weight * ||y||_2^2."""
    return QuadraticCost(
        weight * np.eye(n), np.zeros((m, m)), np.zeros((n, m)),
        np.zeros(n), np.zeros(m),
    )


@dataclass(frozen=True)
class AffineOverApprox:
    """Control-affine interval model of the next state: (B + A+ u) cap (B + A- u)."""

    B: IVector
    Aplus: IMatrix
    Aminus: IMatrix
    t: float
    dt: float


def linearize(
    R: IVector,
    kb: KnowledgeBase,
    U: IVector,
    dt: float,
    t: float = 0.0,
) -> AffineOverApprox:
    """Control-affine linearization of the next-step over-approximation.

    The rough enclosure is the explicit one evaluated with the whole control
    set, so the model is valid for every constant control in U.
    """
    n = len(R)
    beta = beta_of(kb.lip_total, U.mag)
    if math.sqrt(n) * beta * dt >= 1.0:
        raise StepTooLarge(dt, 1.0 / (math.sqrt(n) * beta))

    fR = f_over_iv(R, kb)
    GR = G_over_iv(R, kb)
    hook = kb.side.algebraic_contractor
    if hook is not None:
        fR, GR, _, _ = hook(R, U, fR, GR, None, None)
    h = fR + imat_vec(GR, U)
    S = rough_enclosure_explicit(R, kb, U, dt, h=h)
    fS = f_over_iv(S, kb)
    GS = G_over_iv(S, kb)
    Jf, JG = jacobian_extensions(kb, state_box=S)
    if hook is not None:
        fS, GS, Jf, JG = hook(S, U, fS, GS, Jf, JG)

    half_dt2 = 0.5 * dt * dt
    JGt = tensor_transpose(JG)
    B = R + fR * dt + imat_vec(Jf, fS) * half_dt2
    Aplus = GR * dt + (
        imat_imat(Jf + tensor_vec(JG, U), GS) + tensorT_vec(JGt, fS)
    ) * half_dt2
    Aminus = GR * dt + (
        imat_imat(Jf, GS) + tensorT_vec(JGt, fS + imat_vec(GS, U))
    ) * half_dt2
    return AffineOverApprox(B, Aplus, Aminus, t, dt)


# ---------------------------------------------------------------------------
# idealistic relaxation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdealisticQP:
    Qi: np.ndarray
    qi: np.ndarray
    pi: float
    A_ide: np.ndarray
    b_ide: np.ndarray
    wplus: float
    wminus: float


def idealistic_coeffs(
    aff: AffineOverApprox, wplus: float, wminus: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted endpoint selection of one affine trajectory inside the model."""
    if not (0.0 <= wplus <= 1.0 and 0.0 <= wminus <= 1.0):
        raise ValueError("weights must lie in [0, 1]")
    B, Ap, Am = aff.B, aff.Aplus, aff.Aminus
    b_ide = 0.5 * (
        wplus * B.hi + (1.0 - wplus) * B.lo + wminus * B.hi + (1.0 - wminus) * B.lo
    )
    A_ide = 0.5 * (
        wplus * Ap.hi + (1.0 - wplus) * Ap.lo
        + wminus * Am.hi + (1.0 - wminus) * Am.lo
    )
    return A_ide, b_ide


def assemble_idealistic(
    cost: QuadraticCost,
    A_ide: np.ndarray,
    b_ide: np.ndarray,
    wplus: float = 0.5,
    wminus: float = 0.5,
) -> IdealisticQP:
    """Substitute y = b + A u into the cost; the result is a convex box QP."""
    Q, S, Rm, q, r = cost.Q, cost.S, cost.R, cost.q, cost.r
    Qi = 2.0 * A_ide.T @ Q @ A_ide + 4.0 * A_ide.T @ S + 2.0 * Rm
    Qi = 0.5 * (Qi + Qi.T)
    qi = 2.0 * (S + Q @ A_ide).T @ b_ide + A_ide.T @ q + r
    pi = float(b_ide @ Q @ b_ide + q @ b_ide)
    eigs = np.linalg.eigvalsh(Qi) if Qi.size else np.zeros(0)
    if eigs.size and float(eigs.min()) < -1e-8:
        raise NonConvexAssembly(
            f"idealistic Hessian has eigenvalue {float(eigs.min()):g}; "
            "the quadratic cost is not jointly convex"
        )
    if eigs.size and float(eigs.min()) < 0.0:
        # clip the numeric negatives to zero
        w, V = np.linalg.eigh(Qi)
        Qi = (V * np.maximum(w, 0.0)) @ V.T
        Qi = 0.5 * (Qi + Qi.T)
    return IdealisticQP(Qi, qi, pi, A_ide, b_ide, wplus, wminus)


# ---------------------------------------------------------------------------
# optimistic relaxation
# ---------------------------------------------------------------------------

def _split_orthants(U: IVector):
    pieces_per_axis = []
    for l in range(len(U)):
        lo, hi = U.lo[l], U.hi[l]
        if lo < 0.0 < hi:
            pieces_per_axis.append([(lo, 0.0), (0.0, hi)])
        else:
            pieces_per_axis.append([(lo, hi)])
    out = [[]]
    for axis in pieces_per_axis:
        out = [prefix + [piece] for prefix in out for piece in axis]
    return [IVector([p[0] for p in box], [p[1] for p in box]) for box in out]


def assemble_optimistic(
    cost: QuadraticCost, aff: AffineOverApprox, U: IVector, X: IVector
) -> OptimisticQP:
    """Split U into sign orthants and pick endpoint matrices per the sign rule."""
    orthants = []
    for box in _split_orthants(U):
        nonneg = box.lo >= 0.0
        A_s_plus = np.where(nonneg[None, :], aff.Aplus.hi, aff.Aplus.lo)
        A_l_plus = np.where(nonneg[None, :], aff.Aplus.lo, aff.Aplus.hi)
        A_s_minus = np.where(nonneg[None, :], aff.Aminus.hi, aff.Aminus.lo)
        A_l_minus = np.where(nonneg[None, :], aff.Aminus.lo, aff.Aminus.hi)
        orthants.append(OrthantQP(A_s_plus, A_l_plus, A_s_minus, A_l_minus, box))
    return OptimisticQP(tuple(orthants), cost, aff.B, X)


# ---------------------------------------------------------------------------
# suboptimality bound
# ---------------------------------------------------------------------------

def _K_of(cost: QuadraticCost, B: IVector, A: IMatrix, U: IVector, X: IVector) -> float:
    SU_abs = real_mat_iv(cost.S, U).mag
    reach = B + imat_vec(A, U)
    term_reach = 2.0 * SU_abs + cost.q + 2.0 * real_mat_iv(cost.Q, reach).mag
    term_domain = 2.0 * SU_abs + cost.q + 2.0 * real_mat_iv(cost.Q, X).mag
    return float(min(np.linalg.norm(term_reach), np.linalg.norm(term_domain)))


def subopt_bound(
    cost: QuadraticCost, aff: AffineOverApprox, U: IVector, X: IVector
) -> float:
    """Bound on |c* - c| for either relaxation, driven by the model widths."""
    Uabs = U.mag
    tp = float(np.linalg.norm(aff.B.width + aff.Aplus.width @ Uabs))
    tm = float(np.linalg.norm(aff.B.width + aff.Aminus.width @ Uabs))
    return max(
        tp * _K_of(cost, aff.B, aff.Aplus, U, X),
        tm * _K_of(cost, aff.B, aff.Aminus, U, X),
    )


# ---------------------------------------------------------------------------
# per-step orchestration
# ---------------------------------------------------------------------------

@dataclass
class StepDiagnostics:
    bound: float
    model_cost: float
    realized_cost: Optional[float]
    iters: int
    micros: float
    mode_used: str
    mu_estimate: Optional[float]
    wplus: float
    wminus: float
    sigma_effect: float
    converged: bool
    fell_back: bool
    aff: AffineOverApprox


def datacontrol_step(
    kb: KnowledgeBase,
    x: np.ndarray,
    cost: QuadraticCost,
    U: IVector,
    X: IVector,
    dt: float,
    mode: str = "idealistic",
    opts: Optional[QPOptions] = None,
    wplus: float = 0.5,
    wminus: float = 0.5,
    u_prev: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, StepDiagnostics]:
    """Compute the control to apply over [t, t+dt] from the current state.

    Builds the control-affine model at the singleton {x}, then solves the
    selected convex relaxation.  When every optimistic orthant is infeasible
    the step falls back to the idealistic problem with a diagnostic flag.
    """
    if mode not in ("idealistic", "optimistic"):
        raise ValueError(f"unknown mode {mode!r}")
    opts = opts or QPOptions()
    started = time.perf_counter()
    R = IVector.point(np.asarray(x, dtype=float))
    aff = linearize(R, kb, U, dt)
    bound = subopt_bound(cost, aff, U, X)

    fell_back = False
    sigma_effect = 0.0
    mu_est = None
    if mode == "optimistic":
        try:
            u_hat, x_hat, val, info = solve_optimistic(
                assemble_optimistic(cost, aff, U, X), opts, with_info=True
            )
            iters = info.iters
            sigma_effect = info.sigma_effect
            converged = True
            mode_used = "optimistic"
        except AllOrthantsInfeasible:
            fell_back = True
            mode_used = "idealistic(fallback)"
        else:
            micros = (time.perf_counter() - started) * 1e6
            diag = StepDiagnostics(
                bound, val, None, iters, micros, mode_used, mu_est,
                wplus, wminus, sigma_effect, converged, fell_back, aff,
            )
            return u_hat, diag

    A_ide, b_ide = idealistic_coeffs(aff, wplus, wminus)
    qp_def = assemble_idealistic(cost, A_ide, b_ide, wplus, wminus)
    qp = BoxQP(qp_def.Qi, qp_def.qi, U, qp_def.pi)
    u_hat, info = solve_idealistic(qp, opts, y0=u_prev, with_info=True)
    micros = (time.perf_counter() - started) * 1e6
    diag = StepDiagnostics(
        bound,
        qp.value(u_hat),
        None,
        info.iters,
        micros,
        "idealistic" if not fell_back else "idealistic(fallback)",
        info.mu_estimate,
        wplus,
        wminus,
        sigma_effect,
        info.converged,
        fell_back,
        aff,
    )
    return u_hat, diag
