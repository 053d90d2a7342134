#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from parsimony.exceptions import UnstableLaw
from parsimony.macromodels import LinearLaw, impulse_response, simulate, to_long_format


@pytest.fixture
def ar1_law():
    return LinearLaw(
        transition=[[0.9]],
        impact=[[1.0]],
        observation=[[1.0], [2.0]],
        shock_cov=[[1.0]],
        variables=("y", "twice"),
        shocks=("e",),
    )


class TestLinearLaw:
    """laws.LinearLaw"""

    def test_moments(self, ar1_law):
        assert ar1_law.variance()["y"] == pytest.approx(1 / 0.19)
        assert ar1_law.variance()["twice"] == pytest.approx(4 / 0.19)
        assert ar1_law.covariance(2).loc["y", "y"] == pytest.approx(0.81 / 0.19)
        assert ar1_law.correlation("y", "twice") == pytest.approx(1.0)

    def test_names_must_match(self):
        with pytest.raises(ValueError):
            LinearLaw([[0.5]], [[1.0]], [[1.0]], [[1.0]], ("y", "z"), ("e",))
        with pytest.raises(ValueError):
            LinearLaw([[0.5]], [[1.0]], [[1.0]], [[1.0]], ("y",), ("e", "u"))

    def test_unstable(self):
        law = LinearLaw([[1.0]], [[1.0]], [[1.0]], [[1.0]], ("y",), ("e",))
        with pytest.raises(UnstableLaw):
            law.variance()
        with pytest.raises(UnstableLaw):
            impulse_response(law, "e")

    def test_unknown_shock(self, ar1_law):
        with pytest.raises(ValueError):
            impulse_response(ar1_law, "u")


class TestImpulseResponse:
    """laws.impulse_response, laws.to_long_format"""

    def test_ar1(self, ar1_law):
        frame = impulse_response(ar1_law, "e", horizon=5, scale=0.01)
        np.testing.assert_allclose(frame["y"], 0.01 * 0.9 ** np.arange(5))
        np.testing.assert_allclose(frame["twice"], 2 * frame["y"])
        assert frame.index.name == "period"

    def test_shock_vector(self, ar1_law):
        frame = impulse_response(ar1_law, [2.0], horizon=2)
        np.testing.assert_allclose(frame["y"], [2.0, 1.8])

    def test_long_format(self, ar1_law):
        long = to_long_format(impulse_response(ar1_law, "e", horizon=3))
        assert list(long.columns) == ["period", "variable", "value"]
        assert len(long) == 6
        first = long[(long["variable"] == "y") & (long["period"] == 1)]
        assert first["value"].iloc[0] == pytest.approx(90.0)


class TestSimulate:
    """laws.simulate"""

    def test_same_seed_same_path(self, ar1_law):
        first = simulate(ar1_law, 200, seed=3)
        second = simulate(ar1_law, 200, seed=3)
        np.testing.assert_array_equal(first.to_numpy(), second.to_numpy())
        assert not np.allclose(first.to_numpy(), simulate(ar1_law, 200, seed=4).to_numpy())

    def test_initial_state(self, ar1_law):
        path = simulate(ar1_law, 3, seed=1, initial=np.array([5.0]))
        assert path.loc[0, "y"] == 5.0
        np.testing.assert_allclose(path["twice"], 2 * path["y"])

    def test_degenerate_shocks(self):
        law = LinearLaw(
            np.diag([0.5, 0.9]), np.eye(2), np.eye(2), np.diag([0.0, 1.0]), ("k", "a"), ("x", "e")
        )
        path = simulate(law, 50, seed=0, initial=np.zeros(2))
        np.testing.assert_allclose(path["k"], 0.0, atol=1e-12)
