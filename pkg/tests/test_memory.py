import numpy as np
import pytest
from hypothesis import given, strategies as st

from qtransfer.bounds import build_saturating_diagonal, build_saturating_nondiagonal
from qtransfer.channel import apply_channel, identity_channel, random_isometry_channel, swap_channel
from qtransfer.errors import StepTooSmall
from qtransfer.memory import NORM_CEILING, memory_table, theta_tensor, wirtinger_fd
from qtransfer.qcore import sample_density


class TestThetaTensor:
    def test_identity(self):
        th = theta_tensor(identity_channel(3))
        for r in range(1, 4):
            for p in range(1, 4):
                expected = np.zeros((3, 3))
                expected[p - 1, r - 1] = 1
                np.testing.assert_array_equal(th.block(r, p), expected)

    def test_swap(self):
        th = theta_tensor(swap_channel(3))
        e11 = np.diag([1.0, 0, 0])
        for r in range(1, 4):
            for p in range(1, 4):
                np.testing.assert_array_equal(th.block(r, p), e11 if r == p else 0)

    @pytest.mark.parametrize("n,dc", [(2, 1), (3, 2), (3, 4)])
    def test_reconstructs_source_state(self, n, dc):
        ch = random_isometry_channel(n, dc, 21)
        th = theta_tensor(ch)
        for seed in range(10):
            lam = sample_density(n, seed)
            np.testing.assert_allclose(th.final_source_state(lam.mat), apply_channel(ch, lam)[0].mat, atol=1e-12)

    @given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 10**6))
    def test_hermiticity_pairing(self, n, dc, seed):
        th = theta_tensor(random_isometry_channel(n, dc, seed)).theta
        np.testing.assert_allclose(th, th.transpose(1, 0, 3, 2).conj(), atol=1e-12)


class TestMemoryTable:
    def test_identity(self):
        t = memory_table(identity_channel(3))
        assert all(v == pytest.approx(1.0) for v in t.entries.values())
        assert all(v == pytest.approx(np.sqrt(2)) for v in t.diag_diff.values())

    def test_swap(self):
        t = memory_table(swap_channel(3))
        for (a, c), v in t.entries.items():
            assert v == (1.0 if a == c else 0.0)

    def test_saturating_diagonal(self):
        e1, e2 = 0.9, 0.1
        t = memory_table(build_saturating_diagonal(3, e1, e2))
        assert t.entries[(1, 2)] == pytest.approx(0.3, abs=1e-12)
        assert t.entries[(1, 3)] == pytest.approx(np.sqrt(1 - e1), abs=1e-12)
        assert t.entries[(1, 1)] == pytest.approx(1.0, abs=1e-12)

    def test_nondiagonal_construction(self):
        t = memory_table(build_saturating_nondiagonal(2, 0.6))
        assert t.entries[(2, 1)] == pytest.approx(0.8, abs=1e-12)

    @given(st.integers(2, 4), st.integers(1, 3), st.integers(0, 10**6))
    def test_norm_ceiling_and_symmetry(self, n, dc, seed):
        t = memory_table(random_isometry_channel(n, dc, seed))
        assert max(t.entries.values()) <= NORM_CEILING
        for (a, c), v in t.entries.items():
            assert v == pytest.approx(t.entries[(c, a)], abs=1e-14)

    def test_csv(self):
        text = memory_table(swap_channel(2)).to_csv().splitlines()
        assert text[0] == "a,c,norm,kind"
        assert "1,2,0.0,offdiag" in text
        assert any(line.endswith("diag_diff") for line in text)

    def test_json(self):
        d = memory_table(swap_channel(2)).to_dict()
        assert d["n"] == 2
        assert {r["kind"] for r in d["rows"]} == {"diag", "offdiag", "diag_diff"}


class TestWirtinger:
    def test_swap_zero(self):
        np.testing.assert_allclose(wirtinger_fd(swap_channel(2), 1, 2), 0, atol=1e-10)

    def test_identity(self):
        fd = wirtinger_fd(identity_channel(2), 1, 2)
        expected = np.array([[0, 0], [1, 0]])  # Theta[2, 1] = |1><2| transposed into lam_tilde[1, 2]
        np.testing.assert_allclose(fd, theta_tensor(identity_channel(2)).block(2, 1), atol=1e-10)
        assert np.linalg.norm(fd) == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(fd, expected.T, atol=1e-10)

    def test_random_channel(self):
        ch = random_isometry_channel(3, 2, 5)
        th = theta_tensor(ch)
        for a in range(1, 4):
            for c in range(1, 4):
                if a != c:
                    np.testing.assert_allclose(wirtinger_fd(ch, a, c), th.block(c, a), atol=1e-6)

    @pytest.mark.parametrize("h", [1e-3, 1e-5, 1e-7])
    def test_step_sizes(self, h):
        ch = random_isometry_channel(2, 2, 9)
        np.testing.assert_allclose(wirtinger_fd(ch, 2, 1, h), theta_tensor(ch).block(1, 2), atol=1e-6)

    def test_step_too_small(self):
        with pytest.raises(StepTooSmall):
            wirtinger_fd(swap_channel(2), 1, 2, h=1e-13)

    def test_diagonal_rejected(self):
        with pytest.raises(ValueError):
            wirtinger_fd(swap_channel(2), 1, 1)
