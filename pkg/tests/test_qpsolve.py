import math

import numpy as np
import pytest

from datareach.control import AffineOverApprox, QuadraticCost, assemble_optimistic
from datareach.errors import AllOrthantsInfeasible
from datareach.intervals import IMatrix, IVector
from datareach.qpsolve import (
    AdaResConfig,
    BoxQP,
    QPOptions,
    adares,
    box_project,
    oracle_boxqp,
    smoothness_constant,
    solve_idealistic,
    solve_optimistic,
)

EPS = 1e-8


def random_boxqp(rng):
    m = int(rng.integers(1, 4))
    A = rng.normal(size=(m, m + 1))
    Qi = A @ A.T * rng.uniform(0.1, 4)
    if rng.random() < 0.25:
        Qi = np.zeros((m, m))  # degenerate box LP
    qi = rng.normal(size=m) * rng.uniform(0.5, 3)
    lo = rng.uniform(-3, 0, m)
    hi = lo + rng.uniform(0.5, 4, m)
    return BoxQP(Qi, qi, IVector(lo, hi))


class TestBoxProject:
    def test_inside_is_identity(self):
        box = IVector([-1.0, 0.0], [1.0, 2.0])
        v = np.array([0.5, 1.0])
        assert np.array_equal(box_project(v, box), v)

    def test_clamps(self):
        box = IVector([-1.0, -1.0], [1.0, 1.0])
        assert np.array_equal(box_project(np.array([-9.0, 9.0]), box), [-1.0, 1.0])

    def test_degenerate_box(self):
        box = IVector([0.3], [0.3])
        assert box_project(np.array([7.0]), box) == pytest.approx([0.3])


class TestOracle:
    def test_separable_hand_case(self):
        qp = BoxQP(2.0 * np.eye(2), np.array([-4.0, 0.0]), IVector([-1, -1], [1, 1]))
        u, val = oracle_boxqp(qp)
        assert u == pytest.approx([1.0, 0.0])
        assert val == pytest.approx(-3.0)

    def test_linear_case(self):
        qp = BoxQP(np.zeros((1, 1)), np.array([1.0]), IVector([-1.0], [1.0]))
        u, val = oracle_boxqp(qp)
        assert u == pytest.approx([-1.0])
        assert val == pytest.approx(-1.0)


class TestAdaRes:
    def test_interior_optimum(self):
        qp = BoxQP(np.array([[1.0]]), np.array([0.0]), IVector([-1.0], [1.0]))
        u = solve_idealistic(qp, y0=np.array([0.5]))
        assert abs(u[0]) <= 1e-4  # eps-optimal in objective => |u| <= sqrt(2 eps)
        assert qp.value(u) <= EPS

    def test_active_bound(self):
        qp = BoxQP(np.array([[1.0]]), np.array([-2.0]), IVector([-1.0], [1.0]))
        u = solve_idealistic(qp)
        assert u[0] == pytest.approx(1.0, abs=1e-6)

    def test_linear_sign_rule(self):
        qp = BoxQP(np.zeros((2, 2)), np.array([1.0, -1.0]), IVector([-1, -1], [1, 1]))
        u = solve_idealistic(qp)
        assert u == pytest.approx([-1.0, 1.0], abs=1e-9)

    def test_feasibility_always(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            qp = random_boxqp(rng)
            u = solve_idealistic(qp)
            assert np.all(u >= qp.box.lo - 1e-15)
            assert np.all(u <= qp.box.hi + 1e-15)

    def test_eps_optimality_100_random(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            qp = random_boxqp(rng)
            _, l_star = oracle_boxqp(qp)
            u, info = solve_idealistic(qp, QPOptions(eps=EPS), with_info=True)
            assert info.converged
            assert qp.value(u) - l_star <= EPS

    def test_iteration_bound(self):
        """N_hat stays under the certified cap whenever mu0 <= measured mu."""
        rng = np.random.default_rng(123)
        checked = 0
        mu0 = 1.0
        for _ in range(100):
            qp = random_boxqp(rng)
            _, l_star = oracle_boxqp(qp)
            u, info = solve_idealistic(qp, QPOptions(eps=EPS, mu0=mu0), with_info=True)
            if not (info.converged and mu0 <= info.mu_estimate):
                continue
            delta = qp.value(qp.box.mid) - l_star
            if 16 * delta / (EPS * mu0) < math.e:
                continue  # bound degenerates for already-optimal starts
            K0 = math.ceil(2 * math.sqrt(math.e / mu0) - 1)
            cap = K0 * math.ceil(math.log(16 * delta / (EPS * mu0)))
            assert info.iters <= cap
            checked += 1
        assert checked >= 20  # the property must actually bite

    def test_restart_objective_monotone(self):
        rng = np.random.default_rng(5)
        qp = random_boxqp(rng)
        seen = []
        orig_val = qp.value

        def spy_objective(u):
            v = orig_val(u)
            seen.append(v)
            return v

        cfg = AdaResConfig(EPS, 1.0, smoothness_constant(qp), qp.box.mid)
        adares(qp.gradient, spy_objective, lambda v: box_project(v, qp.box), cfg)
        # objective at successive restart evaluations never increases much
        assert all(b <= a + 1e-12 for a, b in zip(seen, seen[1:]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            qp = random_boxqp(rng)
            u = rng.uniform(qp.box.lo, qp.box.hi)
            g = qp.gradient(u)
            fd = np.empty_like(g)
            h = 1e-6
            for i in range(len(u)):
                e = np.zeros_like(u)
                e[i] = h
                fd[i] = (qp.value(u + e) - qp.value(u - e)) / (2 * h)
            scale = 1.0 + np.abs(g).max()
            assert np.allclose(g, fd, atol=1e-6 * scale, rtol=1e-6)

    def test_iteration_cap_returns_best(self):
        qp = BoxQP(np.diag([100.0, 1.0]), np.array([1.0, -1.0]),
                   IVector([-1, -1], [1, 1]))
        u, info = solve_idealistic(
            qp, QPOptions(eps=1e-14, max_total_iters=8), with_info=True
        )
        assert not info.converged
        assert np.all(u >= qp.box.lo) and np.all(u <= qp.box.hi)


# ---------------------------------------------------------------------------
# optimistic relaxation
# ---------------------------------------------------------------------------

def _inner_min(cost, B, Ap, Am, X, Ug):
    """Closed-form inner minimization over x for each candidate u (Q diagonal)."""
    dQ = np.diag(cost.Q)
    best, ubest = np.inf, None
    for u in Ug:
        def colbnd(A):
            lo = np.where(u[None, :] >= 0, A.lo, A.hi) @ u
            hi = np.where(u[None, :] >= 0, A.hi, A.lo) @ u
            return lo, hi

        lp, hp = colbnd(Ap)
        lm, hm = colbnd(Am)
        xlo = np.maximum.reduce([B.lo + lp, B.lo + lm, X.lo])
        xhi = np.minimum.reduce([B.hi + hp, B.hi + hm, X.hi])
        if np.any(xlo > xhi + 1e-12):
            continue
        lin = 2 * cost.S @ u + cost.q
        xs = np.where(
            dQ > 1e-12, np.clip(-lin / (2 * dQ), xlo, xhi),
            np.where(lin > 0, xlo, xhi),
        )
        v = cost.value(u, xs)
        if v < best:
            best, ubest = v, u
    return best, ubest


def grid_oracle(cost, aff, U, X, n_grid=101):
    """Dense u-grid with one refinement pass around the winner."""
    B, Ap, Am = aff.B, aff.Aplus, aff.Aminus
    axes = [np.linspace(U.lo[l], U.hi[l], n_grid) for l in range(len(U))]
    Ug = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    best, ubest = _inner_min(cost, B, Ap, Am, X, Ug)
    span = [(U.hi[l] - U.lo[l]) / (n_grid - 1) for l in range(len(U))]
    axes = [
        np.linspace(max(U.lo[l], ubest[l] - 2 * span[l]),
                    min(U.hi[l], ubest[l] + 2 * span[l]), n_grid)
        for l in range(len(U))
    ]
    Ug = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    best2, _ = _inner_min(cost, B, Ap, Am, X, Ug)
    return min(best, best2)


class TestOptimistic:
    def test_orthant_count(self):
        cost = QuadraticCost(np.eye(2), np.eye(2), np.zeros((2, 2)),
                             np.zeros(2), np.zeros(2))
        aff = AffineOverApprox(IVector.point([0.0, 0.0]),
                               IMatrix.point(np.eye(2)), IMatrix.point(np.eye(2)),
                               0.0, 0.1)
        X = IVector([-5.0, -5.0], [5.0, 5.0])
        assert len(assemble_optimistic(cost, aff, IVector([0, 0], [1, 2]), X).orthants) == 1
        assert len(assemble_optimistic(cost, aff, IVector([-1, 0], [1, 2]), X).orthants) == 2
        assert len(assemble_optimistic(cost, aff, IVector([-1, -1], [1, 2]), X).orthants) == 4

    def test_degenerate_matches_idealistic(self):
        from datareach.control import assemble_idealistic, idealistic_coeffs

        rng = np.random.default_rng(2)
        A = rng.normal(size=(4, 5))
        M = A @ A.T / 4
        cost = QuadraticCost(M[:2, :2], M[2:, 2:], M[:2, 2:],
                             rng.normal(size=2), rng.normal(size=2))
        B = IVector.point(rng.normal(size=2))
        Amat = IMatrix.point(rng.normal(size=(2, 2)))
        aff = AffineOverApprox(B, Amat, Amat, 0.0, 0.1)
        U = IVector([-1.0, -1.0], [1.0, 1.0])
        X = IVector([-50.0, -50.0], [50.0, 50.0])
        u_o, x_o, c_o = solve_optimistic(assemble_optimistic(cost, aff, U, X))
        A_ide, b_ide = idealistic_coeffs(aff, 0.3, 0.8)  # weights moot at width 0
        qpd = assemble_idealistic(cost, A_ide, b_ide)
        u_i = solve_idealistic(BoxQP(qpd.Qi, qpd.qi, U, qpd.pi))
        assert c_o == pytest.approx(cost.value(u_i, b_ide + A_ide @ u_i), abs=1e-6)
        assert np.allclose(u_o, u_i, atol=1e-4)

    def test_disjoint_boxes_infeasible(self):
        cost = QuadraticCost(np.eye(1), np.eye(1), np.zeros((1, 1)),
                             np.zeros(1), np.zeros(1))
        aff = AffineOverApprox(IVector([0.0], [1.0]),
                               IMatrix.point([[0.1]]), IMatrix.point([[0.1]]),
                               0.0, 0.1)
        U = IVector([0.0], [1.0])
        X = IVector([10.0], [11.0])  # unreachable next-state box
        with pytest.raises(AllOrthantsInfeasible):
            solve_optimistic(assemble_optimistic(cost, aff, U, X))

    def test_random_instances_match_grid_oracle(self):
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(12):
            n, m = 2, int(rng.integers(1, 3))
            cost = QuadraticCost(
                np.diag(rng.uniform(0.1, 2, n)), np.diag(rng.uniform(0.05, 1, m)),
                np.zeros((n, m)), rng.normal(size=n), rng.normal(size=m),
            )
            Blo = rng.normal(size=n)
            B = IVector(Blo, Blo + rng.uniform(0, 0.5, n))
            Alo = rng.normal(size=(n, m))
            Ap = IMatrix(Alo, Alo + rng.uniform(0, 0.4, (n, m)))
            Alo2 = Ap.lo - rng.uniform(0, 0.2, (n, m))
            Am = IMatrix(Alo2, Alo2 + rng.uniform(0, 0.6, (n, m)))
            U = IVector(rng.uniform(-2, -0.5, m), rng.uniform(0.5, 2, m))
            X = IVector(np.full(n, -20.0), np.full(n, 20.0))
            aff = AffineOverApprox(B, Ap, Am, 0.0, 0.1)
            try:
                _, _, c_o = solve_optimistic(assemble_optimistic(cost, aff, U, X))
            except AllOrthantsInfeasible:
                continue
            assert abs(c_o - grid_oracle(cost, aff, U, X)) <= 1e-4
            checked += 1
        assert checked >= 8
