import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import langopt.autodiff as ad
from langopt import (
    DecisionVector,
    Layout,
    OcpDefinition,
    pack,
    rollout,
    transcribe,
    unpack,
)
from langopt.problems import pendulum_ocp, unicycle_dynamics


def scalar_ocp(K=1, x_init=0.0):
    """f(x, u) = x + u with trivial costs, for hand-checkable transcription."""
    return OcpDefinition(
        K=K,
        nx=1,
        nu=1,
        dynamics=lambda x, u: x + u,
        running_cost=lambda x, u: ad.asum(u**2.0, axis=-1),
        terminal_cost=lambda x: ad.asum(x**2.0, axis=-1),
        x_init=np.array([x_init]),
    )


class TestPackUnpack:
    def test_layout_order(self):
        v = pack([[3.0]], [[1.0], [2.0]])
        assert np.array_equal(v.data, [3.0, 1.0, 2.0])

    def test_unpack_inverse(self):
        U, X = unpack(DecisionVector(np.array([3.0, 1.0, 2.0]), Layout(1, 1, 1)))
        assert np.array_equal(U, [[3.0]])
        assert np.array_equal(X, [[1.0], [2.0]])

    def test_zero_controls_rejected(self):
        with pytest.raises(ValueError):
            pack(np.zeros((0, 1)), np.zeros((1, 1)))

    def test_missing_layout(self):
        with pytest.raises(ValueError):
            unpack(DecisionVector(np.zeros(3)))

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            DecisionVector(np.zeros(4), Layout(1, 1, 1))

    @given(
        K=st.integers(1, 5),
        nx=st.integers(1, 3),
        nu=st.integers(1, 3),
        seed=st.integers(0, 2**31),
    )
    @settings(max_examples=30, deadline=None)
    def test_roundtrip(self, K, nx, nu, seed):
        rng = np.random.default_rng(seed)
        U = rng.standard_normal((K, nu))
        X = rng.standard_normal((K + 1, nx))
        U2, X2 = unpack(pack(U, X))
        assert np.array_equal(U, U2)
        assert np.array_equal(X, X2)


class TestTranscribe:
    def test_dimensions_pendulum(self):
        ocp = pendulum_ocp()
        # spot-check a small horizon against n = K*nu + (K+1)*nx, m = (K+1)*nx
        small = OcpDefinition(
            K=2,
            nx=2,
            nu=1,
            dynamics=ocp.dynamics,
            running_cost=ocp.running_cost,
            terminal_cost=ocp.terminal_cost,
            x_init=ocp.x_init,
        )
        nlp = transcribe(small)
        assert (nlp.n, nlp.m) == (8, 6)

    def test_hand_computed_residual(self):
        nlp = transcribe(scalar_ocp())
        # point (u0=1, x0=0, x1=2): defect x1 - (x0+u0) = 1, then x0 - 0 = 0
        h = nlp.constraints(np.array([1.0, 0.0, 2.0]))
        assert np.allclose(h, [1.0, 0.0])

    def test_constraint_ordering(self):
        nlp = transcribe(scalar_ocp(K=2, x_init=5.0))
        # all-zero point: defects are -f(0,0) = 0, init block is 0 - 5
        h = nlp.constraints(np.zeros(nlp.n))
        assert np.allclose(h, [0.0, 0.0, -5.0])

    def test_cost_preserved(self):
        ocp = pendulum_ocp()
        nlp = transcribe(ocp)
        rng = np.random.default_rng(1)
        U = rng.uniform(-1, 1, (ocp.K, 1))
        X = rng.standard_normal((ocp.K + 1, 2))
        direct = sum(
            float(ocp.running_cost(X[k], U[k])) for k in range(ocp.K)
        ) + float(ocp.terminal_cost(X[-1]))
        assert np.isclose(float(nlp.cost(pack(U, X).data)), direct, rtol=1e-14)

    def test_bounds_replicated(self):
        ocp = pendulum_ocp()
        nlp = transcribe(ocp)
        assert np.all(nlp.lower[: ocp.K] == -1.0)
        assert np.all(nlp.upper[: ocp.K] == 1.0)
        assert np.all(np.isinf(nlp.lower[ocp.K :]))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            OcpDefinition(
                K=1,
                nx=2,
                nu=1,
                dynamics=lambda x, u: x,
                running_cost=lambda x, u: 0.0,
                terminal_cost=lambda x: 0.0,
                x_init=np.zeros(3),
            )

    @given(seed=st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_exact_rollout_zero_defects(self, seed):
        ocp = pendulum_ocp()
        nlp = transcribe(ocp)
        rng = np.random.default_rng(seed)
        U = rng.uniform(-1, 1, (ocp.K, 1))
        v = pack(U, rollout(ocp, U))
        assert np.max(np.abs(nlp.constraints(v.data))) <= 1e-12


class TestRollout:
    def test_pendulum_equilibrium(self):
        ocp = pendulum_ocp()
        X = rollout(ocp, np.zeros((ocp.K, 1)), np.array([np.pi, 0.0]))
        assert np.allclose(X, np.tile([np.pi, 0.0], (ocp.K + 1, 1)), atol=1e-12)

    def test_unicycle_straight_line(self):
        x = unicycle_dynamics(np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0]), dt=0.1)
        assert np.allclose(x, [0.1, 0.0, 0.0])

    def test_wrong_control_count(self):
        ocp = pendulum_ocp()
        with pytest.raises(ValueError):
            rollout(ocp, np.zeros((ocp.K + 1, 1)))
