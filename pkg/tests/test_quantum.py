import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfeedback.channels import random_pure_state, random_state
from qfeedback.exceptions import DimensionMismatchError, InvariantError, PartitionError
from qfeedback.quantum import (
    CQState,
    DensityMatrix,
    Ensemble,
    conditional_entropy,
    conditional_mutual_information,
    cq_conditional_mutual_information,
    cq_memory_mutual_information,
    cq_mutual_information,
    entropy,
    mutual_information,
    product_state,
    relative_entropy,
    shannon_entropy,
)

from .conftest import KET0, KET1, PHI_PLUS, PLUS, dm

seeds = st.integers(min_value=0, max_value=2**63 - 1)


def h2(x):
    return -sum(p * math.log2(p) for p in (x, 1 - x) if p > 0)


class TestDensityMatrix:
    def test_rejects_bad_trace(self):
        with pytest.raises(InvariantError):
            DensityMatrix(np.eye(2))

    def test_rejects_non_hermitian(self):
        with pytest.raises(InvariantError):
            DensityMatrix([[0.5, 0.1], [0.0, 0.5]])

    def test_rejects_negative(self):
        with pytest.raises(InvariantError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_tolerates_rounding(self):
        DensityMatrix(np.diag([1 + 5e-11, -5e-11]))

    def test_dims_must_multiply(self):
        with pytest.raises(DimensionMismatchError):
            DensityMatrix(np.eye(4) / 4, (2, 3))

    def test_immutable(self):
        rho = DensityMatrix.maximally_mixed(2)
        with pytest.raises(ValueError):
            rho.mat[0, 0] = 1


class TestEntropy:
    def test_maximally_mixed(self):
        assert entropy(DensityMatrix.maximally_mixed(2)) == pytest.approx(1.0, abs=1e-12)

    def test_pure(self):
        assert entropy(dm(1, 0)) == pytest.approx(0.0, abs=1e-12)

    def test_hand_evaluation(self):
        # -0.25 log2 0.25 - 0.75 log2 0.75
        expected = 0.25 * 2 + 0.75 * math.log2(4 / 3)
        assert expected == pytest.approx(0.8112781244591328, abs=1e-15)
        assert entropy(DensityMatrix(np.diag([0.25, 0.75]))) == pytest.approx(expected, abs=1e-12)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_range(self, seed):
        rho = random_state(3, seed)
        assert -1e-12 <= entropy(rho) <= math.log2(3) + 1e-9

    @given(seeds)
    @settings(max_examples=100, deadline=None)
    def test_additivity_on_products(self, seed):
        rng = np.random.default_rng(seed)
        a, b = random_state(2, rng), random_state(3, rng)
        assert abs(entropy(product_state(a, b)) - entropy(a) - entropy(b)) <= 1e-9


class TestRelativeEntropy:
    def test_self(self):
        rho = random_state(3, 1)
        assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-9)

    def test_pure_vs_mixed(self):
        # eigenbasis of I/2 is any basis: tr |0><0| (log 1 - log 1/2) = 1
        assert relative_entropy(dm(1, 0), DensityMatrix.maximally_mixed(2)) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_support(self):
        assert relative_entropy(dm(1, 0), dm(0, 1)) == math.inf

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            relative_entropy(dm(1, 0), DensityMatrix.maximally_mixed(3))

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_klein(self, seed):
        rng = np.random.default_rng(seed)
        assert relative_entropy(random_state(3, rng), random_state(3, rng)) >= -1e-9


class TestMutualInformation:
    def test_product(self):
        rho = product_state(random_state(2, 1), random_state(2, 2))
        assert mutual_information(rho, ([0], [1])) == pytest.approx(0.0, abs=1e-9)

    def test_bell(self):
        assert mutual_information(DensityMatrix.from_ket(PHI_PLUS, (2, 2)), ([0], [1])) == pytest.approx(2.0, abs=1e-9)

    def test_classical_correlation(self):
        rho = DensityMatrix(np.diag([0.5, 0, 0, 0.5]), (2, 2))
        # S(A) = S(B) = 1, S(AB) = 1
        assert mutual_information(rho, ([0], [1])) == pytest.approx(1 + 1 - 1, abs=1e-12)

    def test_invalid_partition(self):
        rho = DensityMatrix.from_ket(PHI_PLUS, (2, 2))
        with pytest.raises(PartitionError):
            mutual_information(rho, ([0], []))
        with pytest.raises(PartitionError):
            mutual_information(rho, ([0], [0]))

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_bounds(self, seed):
        rho = random_state(6, seed, dims=(2, 3))
        mi = mutual_information(rho, ([0], [1]))
        assert -1e-9 <= mi <= 2 * min(math.log2(2), math.log2(3)) + 1e-9


class TestConditionalMutualInformation:
    def test_product(self):
        rng = np.random.default_rng(0)
        rho = product_state(random_state(2, rng), random_state(2, rng), random_state(2, rng))
        assert conditional_mutual_information(rho, ([0], [1], [2])) == pytest.approx(0.0, abs=1e-9)

    def test_bell_with_uncorrelated_c(self):
        rho = product_state(DensityMatrix.from_ket(PHI_PLUS, (2, 2)), random_state(2, 3))
        assert conditional_mutual_information(rho, ([0], [1], [2])) == pytest.approx(2.0, abs=1e-9)

    @given(seeds)
    @settings(max_examples=200, deadline=None)
    def test_strong_subadditivity_and_chain_rule(self, seed):
        rho = random_state(8, seed, dims=(2, 2, 2))
        cmi = conditional_mutual_information(rho, ([0], [1], [2]))
        assert cmi >= -1e-9
        chain = mutual_information(rho, ([0], [2])) + cmi
        assert mutual_information(rho, ([0], [1, 2])) == pytest.approx(chain, abs=1e-9)

    @given(seeds)
    @settings(max_examples=50, deadline=None)
    def test_conditioning_reduces_entropy(self, seed):
        rho = random_state(4, seed, dims=(2, 2))
        assert conditional_entropy(rho, [1], [0]) <= entropy(rho.reduce([1])) + 1e-9


class TestConcavity:
    @given(seeds, st.integers(min_value=2, max_value=5))
    @settings(max_examples=60, deadline=None)
    def test_conditional_entropy_concave(self, seed, n):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(n))
        states = [random_state(4, rng, dims=(2, 2)) for _ in range(n)]
        avg = DensityMatrix(sum(p * s.mat for p, s in zip(probs, states)), (2, 2))
        lhs = conditional_entropy(avg, [0], [1])
        rhs = sum(p * conditional_entropy(s, [0], [1]) for p, s in zip(probs, states))
        assert lhs >= rhs - 1e-9


def _embedded_mi(s: CQState, subset):
    """Oracle: mutual information of the explicit block-diagonal embedding."""
    full = s.to_density_matrix()
    return mutual_information(full, ([0], [k + 1 for k in subset]))


class TestCQ:
    def test_identical_branches(self):
        rho = random_state(2, 5)
        s = CQState([(0.3, "a", rho), (0.7, "b", rho)])
        assert cq_mutual_information(s, [0]) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_branches(self):
        s = CQState([(0.5, 0, DensityMatrix.from_ket(KET0)), (0.5, 1, DensityMatrix.from_ket(KET1))])
        assert cq_mutual_information(s, [0]) == pytest.approx(1.0, abs=1e-12)

    def test_non_orthogonal_pair(self):
        s = CQState([(0.5, 0, DensityMatrix.from_ket(KET0)), (0.5, 1, DensityMatrix.from_ket(PLUS))])
        oracle = _embedded_mi(s, [0])
        # pure branches: the information is the entropy of the average, whose
        # eigenvalues are cos^2(pi/8) and sin^2(pi/8)
        assert oracle == pytest.approx(h2(math.cos(math.pi / 8) ** 2), abs=1e-12)
        assert cq_mutual_information(s, [0]) == pytest.approx(oracle, abs=1e-9)
        assert cq_mutual_information(s, [0]) == pytest.approx(0.600876, abs=1e-6)

    def test_empty_subset(self):
        s = CQState([(1.0, 0, DensityMatrix.from_ket(KET0))])
        with pytest.raises(PartitionError):
            cq_mutual_information(s, [])

    def test_labels_distinct(self):
        with pytest.raises(InvariantError):
            CQState([(0.5, 0, dm(1, 0)), (0.5, 0, dm(0, 1))])

    def test_probabilities_sum(self):
        with pytest.raises(InvariantError):
            CQState([(0.5, 0, dm(1, 0)), (0.6, 1, dm(0, 1))])

    @given(seeds, st.integers(min_value=2, max_value=5))
    @settings(max_examples=60, deadline=None)
    def test_matches_embedding_and_holevo_bounds(self, seed, n):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(n))
        s = CQState((p, i, random_state(4, rng, dims=(2, 2))) for i, p in enumerate(probs))
        for subset in ([0], [1], [0, 1]):
            val = cq_mutual_information(s, subset)
            assert val == pytest.approx(_embedded_mi(s, subset), abs=1e-9)
            assert val <= shannon_entropy(probs) + 1e-9
            assert val <= math.log2(2 ** len(subset)) + 1e-9
        full = s.to_density_matrix()
        assert cq_memory_mutual_information(s, [0], [1]) == pytest.approx(
            mutual_information(full, ([0, 1], [2])), abs=1e-9)
        assert cq_conditional_mutual_information(s, [1], [0]) == pytest.approx(
            conditional_mutual_information(full, ([0], [2], [1])), abs=1e-9)

    def test_ensemble_average(self):
        e = Ensemble([(0.5, dm(1, 0)), (0.5, dm(0, 1))])
        np.testing.assert_allclose(e.average().mat, np.eye(2) / 2)
        with pytest.raises(DimensionMismatchError):
            Ensemble([(0.5, dm(1, 0)), (0.5, random_pure_state(3, 0))])
