import numpy as np
import pytest

from qtransfer.channel import identity_channel, swap_channel
from qtransfer.constraints import check_constraint
from qtransfer.errors import CastroViolated, ConstraintNotSatisfied, DegenerateStates, StatesCommute
from qtransfer.memory import memory_table
from qtransfer.optimizer import OptimizerConfig
from qtransfer.scenarios import (
    COUNTEREXAMPLE_THRESHOLD,
    EXAMPLE_CHI,
    EXAMPLE_RHO,
    example_setup,
    load_golden,
    make_two_state_setup,
    real_part_memory,
    sample_two_state_diagonal_channels,
    search_two_state_nondiagonal_counterexample,
    verify_golden,
    verify_real_part_claim,
    verify_two_state_diagonal_theorem,
)


class TestSetup:
    def test_example(self):
        s = example_setup()
        assert s.relation_residual <= 1e-12
        assert s.commutator_norm > 1e-9
        assert EXAMPLE_RHO[0, 0] * EXAMPLE_CHI[0, 1] == pytest.approx(0.03125)

    def test_degenerate(self):
        with pytest.raises(DegenerateStates):
            make_two_state_setup(EXAMPLE_RHO, EXAMPLE_RHO)

    def test_commuting(self):
        with pytest.raises(StatesCommute):
            make_two_state_setup(np.diag([0.3, 0.7]), np.diag([0.6, 0.4]))

    def test_relation_violated(self):
        with pytest.raises(CastroViolated):
            make_two_state_setup(EXAMPLE_RHO, [[0.25, 0.1], [0.1, 0.75]])

    def test_dimension(self):
        with pytest.raises(ValueError):
            make_two_state_setup(np.eye(3) / 3, np.eye(3) / 3)


class TestDiagonalTheorem:
    def test_swap(self):
        rep = verify_two_state_diagonal_theorem(example_setup(), [swap_channel(2)])
        assert rep.max_theta_12 == 0 and rep.holds

    def test_identity_excluded(self):
        with pytest.raises(ConstraintNotSatisfied):
            verify_two_state_diagonal_theorem(example_setup(), [identity_channel(2)])

    @pytest.mark.parametrize("dc", [1, 2])
    def test_sampled(self, dc):
        s = example_setup()
        chans = sample_two_state_diagonal_channels(s, 10, dc, seed=100)
        rep = verify_two_state_diagonal_theorem(s, chans)
        assert rep.channels == 10
        assert rep.max_residual <= 1e-10
        assert rep.max_theta_12 <= 1e-7
        assert rep.max_structural_zero <= 1e-7


class TestCounterexample:
    def test_swap_is_admissible_with_zero_memory(self):
        tc = example_setup().nondiagonal_constraint()
        assert check_constraint(swap_channel(2), tc) <= 1e-15
        assert memory_table(swap_channel(2)).entries[(1, 2)] == 0

    def test_search(self):
        cfg = OptimizerConfig(dc=2, restarts=6)
        res = search_two_state_nondiagonal_counterexample(example_setup(), cfg)
        assert res.constraint_residual <= 1e-8
        assert res.achieved >= COUNTEREXAMPLE_THRESHOLD
        again = search_two_state_nondiagonal_counterexample(example_setup(), cfg)
        np.testing.assert_array_equal(res.channel.c, again.channel.c)

    def test_golden(self):
        doc = load_golden()
        check = verify_golden(doc)
        assert check.ok
        assert doc["config"]["dc"] == 2 and doc["config"]["restarts"] == 32


class TestRealPart:
    def test_swap(self):
        assert real_part_memory(swap_channel(2), 1, 2) == (0.0, 0.0, 0.0)

    def test_sampled(self):
        rep = verify_real_part_claim(2, 1, 2, 1, 5)
        assert rep.max_residual <= 1e-10
        assert rep.holds
        assert rep.real_memory > 0.1
