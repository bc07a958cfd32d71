"""End-to-end acceptance checks.

Each test prints one ACCEPTANCE line (PASS/FAIL) and asserts the same
condition. The line is printed with capture disabled, so the verdicts are
visible in the run log even when they pass.
The heavy trajectory solves are shared through module-scoped fixtures.

The pendulum runs use the two-phase scheme (annealed diffusion, then a
zero-noise polish with the multipliers carried over): annealing alone
plateaus around ||h||^2 ~ 1e-4 because the weakly observable multiplier
modes decay at only ~alpha*mu*s^2/4 per iteration, while the rollout-
deviation bound needs ||h||^2 ~ 1e-8.
"""

import time

import numpy as np
import pytest

import langopt.autodiff as ad
from langopt import (
    BaselineConfig,
    SolverConfig,
    bfgs_penalty,
    gradient_descent_cdo,
    solve,
    solve_batch,
)
from langopt.autodiff import Exact, FiniteDifference, check_gradient, gradient, jacobian
from langopt.nlp import DecisionVector, Layout, rollout, unpack
from langopt.problems import (
    BugTrapGeometry,
    TOY_KKT_SOLUTION,
    get_problem,
    toy_kkt_problem,
    trap_bounding_box,
)
from langopt.solver import barrier_value, drift

N_SEEDS = 10
ANNEAL = SolverConfig(seed=0)
POLISH = SolverConfig(seed=0, alpha=0.03, sigma0=0.0, sigma_min=0.0, iterations=60000)


@pytest.fixture
def verdict(capfd):
    def _verdict(num, name, ok, detail=""):
        line = f"ACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        with capfd.disabled():
            print("\n" + line, flush=True)
        assert ok, line

    return _verdict


def guesses(bundle, n):
    return [bundle.guess(np.random.default_rng([s, 0xA5])) for s in range(n)]


def two_phase(nlp, x0s, mu=10.0, polish_iters=60000):
    annealed = solve_batch(nlp, x0s, SolverConfig(seed=0, mu=mu))
    polish = SolverConfig(
        seed=0, mu=mu, alpha=0.03, sigma0=0.0, sigma_min=0.0, iterations=polish_iters
    )
    return solve_batch(
        nlp, [s.xbar for s in annealed], polish, lambda0s=[s.lam for s in annealed]
    )


@pytest.fixture(scope="module")
def pendulum():
    return get_problem("pendulum")


@pytest.fixture(scope="module")
def swingup_solutions(pendulum):
    return two_phase(pendulum.nlp, guesses(pendulum, N_SEEDS))


class TestKktOracle:
    def test_criterion_1(self, verdict):
        nlp = toy_kkt_problem()
        xstar, lamstar = TOY_KKT_SOLUTION
        x0s = [np.random.default_rng([s, 0xA5]).uniform(-2.0, 2.0, 2) for s in range(10)]
        t0 = time.perf_counter()
        sols = solve_batch(nlp, x0s, SolverConfig(seed=0))
        wall = time.perf_counter() - t0
        hits = sum(
            np.max(np.abs(s.xbar - xstar)) <= 1e-2
            and np.max(np.abs(s.lam - lamstar)) <= 5e-2
            for s in sols
        )
        verdict(
            1,
            "KKT oracle",
            hits == 10 and wall < 5.0,
            f"{hits}/10 within tolerance, {wall:.2f} s",
        )


class TestPenaltySweep:
    def test_criterion_2(self, pendulum, verdict):
        x0 = guesses(pendulum, 1)[0]
        t0 = time.perf_counter()
        final = {}
        for mu in (0.01, 0.1, 1.0, 10.0):
            (sol,) = two_phase(pendulum.nlp, [x0], mu=mu, polish_iters=40000)
            final[mu] = sol.hsq
        wall = time.perf_counter() - t0
        ok = (
            final[1.0] <= 1e-3
            and final[10.0] <= 1e-3
            and final[0.01] >= 100.0 * final[10.0]
            and wall < 120.0
        )
        detail = ", ".join(f"mu={m}: {v:.1e}" for m, v in final.items()) + f", {wall:.0f} s"
        verdict(2, "penalty sweep", ok, detail)


class TestSwingup:
    def test_criterion_3(self, pendulum, swingup_solutions, verdict):
        ocp = pendulum.ocp
        layout = Layout(ocp.K, ocp.nx, ocp.nu)
        passes = 0
        for sol in swingup_solutions:
            U, X = unpack(DecisionVector(sol.xbar, layout))
            theta_K, theta_dot_K = X[-1]
            passes += (
                abs(theta_K) <= 0.15
                and abs(theta_dot_K) <= 0.3
                and np.all(np.abs(U) < 1.0)
                and U.max() >= 0.9
                and U.min() <= -0.9
            )
        verdict(3, "swingup", passes >= 8, f"{passes}/{N_SEEDS} seeds")


class TestTrapEscape:
    def test_criterion_4(self, verdict):
        bundle = get_problem("bugtrap")
        geom = BugTrapGeometry()
        layout = Layout(geom.K, 3, 2)
        goal = np.asarray(geom.goal)
        box = trap_bounding_box(geom, inflate=0.5)
        x0s = guesses(bundle, N_SEEDS)

        def final_position(sol):
            _, X = unpack(DecisionVector(sol.xbar, layout))
            return X[-1, :2]

        def in_trap(sol):
            p = final_position(sol)
            return bool(np.all((p >= box[:, 0]) & (p <= box[:, 1])))

        t0 = time.perf_counter()
        gd_stuck = sum(
            in_trap(gradient_descent_cdo(bundle.nlp, x0, None, BaselineConfig(seed=i, iterations=4000)))
            for i, x0 in enumerate(x0s)
        )
        bfgs_stuck = sum(
            in_trap(bfgs_penalty(bundle.nlp, x0, BaselineConfig(seed=i, mu=100.0, iterations=2000)))
            for i, x0 in enumerate(x0s)
        )
        # hot hold with a taper down to 0.8 (escape attempts while the basin
        # statistics sharpen), then a cold anneal that skips the band where
        # escaped chains fall back into the trap
        taper = SolverConfig(
            seed=0, sigma0=1.5, hold=10000, iterations=25000,
            gamma=(0.8 / 1.5) ** (1.0 / 15000.0), sigma_min=0.8,
        )
        held = solve_batch(bundle.nlp, x0s, taper)
        anneal = SolverConfig(seed=1, sigma0=0.3, iterations=20000)
        sols = solve_batch(
            bundle.nlp, [h.xbar for h in held], anneal, lambda0s=[h.lam for h in held]
        )
        reached = sum(np.linalg.norm(final_position(s) - goal) <= 0.5 for s in sols)
        wall = time.perf_counter() - t0
        ok = gd_stuck == 10 and bfgs_stuck == 10 and reached >= 7 and wall < 300.0
        verdict(
            4,
            "trap escape",
            ok,
            f"gd stuck {gd_stuck}/10, bfgs stuck {bfgs_stuck}/10, "
            f"diffusion reached {reached}/10, {wall:.0f} s",
        )


class TestRolloutConsistency:
    def test_criterion_5(self, pendulum, swingup_solutions, verdict):
        ocp = pendulum.ocp
        layout = Layout(ocp.K, ocp.nx, ocp.nu)
        checked, worst = 0, 0.0
        for sol in swingup_solutions:
            if sol.hsq > 1e-3:
                continue
            checked += 1
            U, X = unpack(DecisionVector(sol.xbar, layout))
            dev = float(np.max(np.abs(rollout(ocp, U) - X)))
            worst = max(worst, dev)
        verdict(
            5,
            "rollout consistency",
            checked > 0 and worst <= 0.2,
            f"{checked} feasible solves, worst deviation {worst:.3f}",
        )


def interior_points(nlp, n_points, spread, seed):
    rng = np.random.default_rng(seed)
    lo = np.where(np.isfinite(nlp.lower), nlp.lower, -spread)
    hi = np.where(np.isfinite(nlp.upper), nlp.upper, spread)
    width = hi - lo
    return rng.uniform(lo + 0.05 * width, hi - 0.05 * width, size=(n_points, nlp.n))


def jac_rel_error(nlp, x):
    J = nlp.jacobian(x)
    J_fd = jacobian(nlp.constraints, x, FiniteDifference())
    num = np.max(np.abs(J - J_fd), axis=1)
    den = np.maximum(1.0, np.max(np.abs(J), axis=1))
    return float(np.max(num / den))


class TestGradientSuite:
    def test_criterion_6(self, verdict):
        worst_g, worst_j, worst_d = 0.0, 0.0, 0.0
        for name in ("pendulum", "bugtrap"):
            nlp = get_problem(name).nlp
            pts = interior_points(nlp, 100, 3.0, seed=0)
            rng = np.random.default_rng(1)
            for i, x in enumerate(pts):
                worst_g = max(worst_g, check_gradient(nlp.cost, x))
                worst_j = max(worst_j, jac_rel_error(nlp, x))
                if i % 10 == 0:  # the 1e-10 drift identity is cheap but exact; spot-check
                    lam = rng.standard_normal(nlp.m)
                    mu, beta = 10.0, 1e-3

                    def merit(z):
                        h = nlp.constraints(z)
                        return (
                            nlp.cost(z)
                            + ad.asum(h * lam, axis=-1)
                            + 0.5 * mu * ad.asum(h * h, axis=-1)
                            + beta * barrier_value(z, nlp.lower, nlp.upper)
                        )

                    g_exact = gradient(merit, x, Exact())
                    g_drift = drift(nlp, x, lam, mu, beta)
                    rel = np.max(np.abs(g_drift - g_exact)) / max(
                        1.0, float(np.max(np.abs(g_exact)))
                    )
                    worst_d = max(worst_d, float(rel))
        ok = worst_g <= 1e-5 and worst_j <= 1e-5 and worst_d <= 1e-10
        verdict(
            6,
            "gradient suite",
            ok,
            f"cost {worst_g:.1e}, jacobian {worst_j:.1e}, drift-vs-merit {worst_d:.1e}",
        )


class TestReduction:
    def test_criterion_7(self, verdict):
        iters = 2000
        ok = True
        details = []
        for name in ("toy_kkt", "pendulum", "bugtrap"):
            bundle = get_problem(name)
            x0 = guesses(bundle, 1)[0]
            bc = BaselineConfig(iterations=iters)
            sc = SolverConfig(
                alpha=bc.alpha,
                mu=bc.mu,
                sigma0=0.0,
                gamma=1.0,
                sigma_min=0.0,
                iterations=iters,
                barrier_weight=bc.barrier_weight,
            )
            a = gradient_descent_cdo(bundle.nlp, x0, None, bc)
            b = solve(bundle.nlp, x0, None, sc)
            same = (
                np.array_equal(a.trace.cost, b.trace.cost)
                and np.array_equal(a.trace.hsq, b.trace.hsq)
                and np.array_equal(a.trace.energy, b.trace.energy)
                and np.array_equal(a.xbar, b.xbar)
            )
            ok &= same
            details.append(f"{name}: {'identical' if same else 'DIFFERS'}")
        verdict(7, "zero-noise reduction", ok, ", ".join(details))


class TestBatch:
    def test_criterion_8(self, pendulum, verdict):
        import io

        x0s = guesses(pendulum, 64)
        cfg = SolverConfig(seed=0)
        t0 = time.perf_counter()
        first = solve_batch(pendulum.nlp, x0s, cfg, threads=1)
        wall = time.perf_counter() - t0
        second = solve_batch(pendulum.nlp, x0s, cfg, threads=1)

        def csv_bytes(sol):
            buf = io.StringIO()
            sol.trace.to_csv(buf)
            return buf.getvalue().encode()

        reproducible = all(
            np.array_equal(a.xbar, b.xbar) and csv_bytes(a) == csv_bytes(b)
            for a, b in zip(first, second)
        )
        # thread invariance is seed plumbing, not numerics: verify on short runs
        short = SolverConfig(seed=0, iterations=2000)
        t1 = solve_batch(pendulum.nlp, x0s, short, threads=1)
        t4 = solve_batch(pendulum.nlp, x0s, short, threads=4)
        thread_invariant = all(
            np.array_equal(a.xbar, b.xbar) and np.array_equal(a.trace.hsq, b.trace.hsq)
            for a, b in zip(t1, t4)
        )
        ok = wall < 600.0 and reproducible and thread_invariant
        verdict(
            8,
            "batch determinism",
            ok,
            f"64 chains in {wall:.0f} s, byte-reproducible={reproducible}, "
            f"thread-invariant={thread_invariant}",
        )
