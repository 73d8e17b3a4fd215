import numpy as np
import pytest

from qfeedback.exceptions import DimensionMismatchError, NotHermitianError
from qfeedback.matops import eig_hermitian, partial_trace, partial_transpose, tensor, tensor_all

from .conftest import PHI_PLUS


def rand_c(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def rand_dm(rng, d):
    g = rand_c(rng, d, d)
    m = g @ g.conj().T
    m = m / np.trace(m).real
    return 0.5 * (m + m.conj().T)


class TestTensor:
    def test_identity(self):
        np.testing.assert_array_equal(tensor(np.eye(2), np.eye(2)), np.eye(4))

    def test_basis_bookkeeping(self):
        np.testing.assert_array_equal(tensor(np.diag([1, 0]), np.diag([0, 1])), np.diag([0, 1, 0, 0]))

    def test_index_formula_oracle(self, rng):
        a, b = rand_c(rng, 2, 2), rand_c(rng, 2, 2)
        expected = np.empty((4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    for l in range(2):
                        expected[i * 2 + k, j * 2 + l] = a[i, j] * b[k, l]
        out = tensor(a, b)
        np.testing.assert_allclose(out, expected, atol=1e-14)
        assert np.trace(out) == pytest.approx(np.trace(a) * np.trace(b), abs=1e-12)

    def test_rectangular_shape(self, rng):
        assert tensor(rand_c(rng, 2, 3), rand_c(rng, 4, 1)).shape == (8, 3)

    @pytest.mark.parametrize("seed", range(5))
    def test_associativity(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = rand_c(rng, 2, 3), rand_c(rng, 3, 2), rand_c(rng, 2, 2)
        np.testing.assert_allclose(tensor(tensor(a, b), c), tensor(a, tensor(b, c)), atol=1e-12, rtol=0)
        np.testing.assert_allclose(tensor_all([a, b, c]), tensor(a, tensor(b, c)), atol=1e-12, rtol=0)


class TestPartialTrace:
    def test_product_marginal(self, rng):
        r, s = rand_dm(rng, 2), rand_dm(rng, 3)
        np.testing.assert_allclose(partial_trace(np.kron(r, s), [2, 3], {0}), r, atol=1e-14)
        np.testing.assert_allclose(partial_trace(np.kron(r, s), [2, 3], {1}), s, atol=1e-14)

    def test_bell_marginal(self):
        phi = np.outer(PHI_PLUS, PHI_PLUS.conj())
        np.testing.assert_allclose(partial_trace(phi, [2, 2], {1}), np.eye(2) / 2, atol=1e-15)

    def test_three_qubit_against_explicit_sum(self, rng):
        m = rand_dm(rng, 8)
        t = m.reshape(2, 2, 2, 2, 2, 2)
        expected = np.zeros((4, 4), dtype=complex)
        for a in range(2):
            for c in range(2):
                for a2 in range(2):
                    for c2 in range(2):
                        expected[a * 2 + c, a2 * 2 + c2] = sum(t[a, b, c, a2, b, c2] for b in range(2))
        out = partial_trace(m, [2, 2, 2], {0, 2})
        np.testing.assert_allclose(out, expected, atol=1e-14)
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.eigvalsh(out).min() >= -1e-12

    def test_trace_everything(self, rng):
        m = rand_c(rng, 6, 6)
        out = partial_trace(m, [2, 3], [])
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(np.trace(m), abs=1e-12)

    def test_trace_preserved(self, rng):
        m = rand_dm(rng, 12)
        for keep in ({0}, {1}, {2}, {0, 2}, {1, 2}):
            assert np.trace(partial_trace(m, [2, 3, 2], keep)) == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            partial_trace(np.eye(4), [2, 3], {0})


class TestPartialTranspose:
    def test_product(self, rng):
        r, s = rand_dm(rng, 2), rand_dm(rng, 3)
        np.testing.assert_allclose(partial_transpose(np.kron(r, s), [2, 3], 1), np.kron(r, s.T), atol=1e-15)
        np.testing.assert_allclose(partial_transpose(np.kron(r, s), [2, 3], 0), np.kron(r.T, s), atol=1e-15)

    def test_bell_state_is_half_swap(self):
        phi = np.outer(PHI_PLUS, PHI_PLUS.conj())
        swap = np.zeros((4, 4))
        for i in range(2):
            for j in range(2):
                swap[i * 2 + j, j * 2 + i] = 1
        out = partial_transpose(phi, [2, 2], 1)
        np.testing.assert_allclose(out, swap / 2, atol=1e-15)
        assert np.linalg.eigvalsh(out).min() == pytest.approx(np.linalg.eigvalsh(swap / 2).min())
        assert np.linalg.eigvalsh(out).min() == pytest.approx(-0.5)

    def test_involution_and_structure(self, rng):
        m = rand_dm(rng, 6)
        once = partial_transpose(m, [2, 3], 1)
        np.testing.assert_array_equal(partial_transpose(once, [2, 3], 1), m)
        assert np.trace(once) == np.trace(m)
        np.testing.assert_array_equal(once, once.conj().T)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            partial_transpose(np.eye(5), [2, 2], 1)


class TestEig:
    def test_diagonal(self):
        w, _ = eig_hermitian(np.diag([0.75, 0.25]))
        np.testing.assert_allclose(w, [0.25, 0.75], atol=1e-15)

    def test_projector(self):
        plus = np.full((2, 2), 0.5)
        w, v = eig_hermitian(plus)
        np.testing.assert_allclose(w, [0.0, 1.0], atol=1e-15)
        assert abs(abs(v[:, 1] @ np.array([1, 1]) / np.sqrt(2)) - 1) < 1e-12

    @pytest.mark.parametrize("d", [1, 2, 3, 4, 8, 16])
    def test_reconstruction(self, rng, d):
        g = rand_c(rng, d, d)
        h = g + g.conj().T
        w, v = eig_hermitian(h)
        assert np.all(np.diff(w) >= 0)
        assert np.max(np.abs(v @ np.diag(w) @ v.conj().T - h)) <= 1e-9
        assert np.max(np.abs(v.conj().T @ v - np.eye(d))) <= 1e-9
        assert w.sum() == pytest.approx(np.trace(h).real, abs=1e-10)

    def test_psd_nonnegative(self, rng):
        for _ in range(20):
            g = rand_c(rng, 5, 3)
            assert eig_hermitian(g @ g.conj().T)[0].min() >= -1e-10

    def test_degenerate(self):
        w, v = eig_hermitian(np.eye(4) * 0.25)
        np.testing.assert_allclose(w, [0.25] * 4)
        np.testing.assert_allclose(v.conj().T @ v, np.eye(4), atol=1e-12)

    def test_not_hermitian(self):
        with pytest.raises(NotHermitianError):
            eig_hermitian(np.array([[0, 1], [0, 0]]))
