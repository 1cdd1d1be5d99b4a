import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vitalwatch.kernels import KernelKind, KernelSpec, gram_matrix, kernel_eval, kernel_vector

from _oracles import oracle_kernel

SPEC = KernelSpec(KernelKind.GAUSSIAN, 1.0)


def test_zero_distance_is_one():
    x = np.array([3.0, -1.5, 0.25])
    assert kernel_eval(SPEC, x, x) == 1.0


def test_unit_distance_closed_form():
    # exp(-1 / 2) for x=(0,0), y=(1,0), sigma=1
    got = kernel_eval(SPEC, np.array([0.0, 0.0]), np.array([1.0, 0.0]))
    assert got == pytest.approx(0.6065306597126334, abs=1e-12)


def test_symmetry_random_pairs():
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.normal(size=4)
        y = rng.normal(size=4)
        assert kernel_eval(SPEC, x, y) == kernel_eval(SPEC, y, x)


def test_bounds_and_equality_condition():
    rng = np.random.default_rng(12)
    for _ in range(200):
        x = rng.normal(size=3)
        y = rng.normal(size=3)
        k = kernel_eval(SPEC, x, y)
        assert 0.0 < k <= 1.0
        if not np.array_equal(x, y):
            assert k < 1.0


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        kernel_eval(SPEC, np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        kernel_vector(SPEC, np.zeros((2, 3)), np.zeros(2))


def test_bandwidth_must_be_positive():
    with pytest.raises(ValueError):
        KernelSpec(KernelKind.GAUSSIAN, 0.0)
    with pytest.raises(ValueError):
        KernelSpec(KernelKind.GAUSSIAN, -1.0)


def test_kernel_vector_singleton_and_empty():
    x = np.array([1.0, 2.0])
    assert kernel_vector(SPEC, x[None, :], x).tolist() == [1.0]
    assert kernel_vector(SPEC, np.zeros((0, 2)), x).shape == (0,)


def test_kernel_vector_matches_elementwise_eval():
    rng = np.random.default_rng(13)
    basis = rng.normal(size=(3, 2))
    x = rng.normal(size=2)
    got = kernel_vector(SPEC, basis, x)
    want = [kernel_eval(SPEC, b, x) for b in basis]
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_matches_independent_oracle():
    rng = np.random.default_rng(14)
    for sigma in (0.5, 1.0, 2.5):
        spec = KernelSpec(KernelKind.GAUSSIAN, sigma)
        for _ in range(50):
            x = rng.normal(size=5)
            y = rng.normal(size=5)
            assert kernel_eval(spec, x, y) == pytest.approx(
                oracle_kernel(x, y, sigma), abs=1e-14
            )


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=2, max_value=6),
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=0, max_value=2**31 - 1),
    st.floats(min_value=0.3, max_value=3.0),
)
def test_gram_positive_semidefinite(m, d, seed, sigma):
    rng = np.random.default_rng(seed)
    basis = rng.normal(size=(m, d))
    gram = gram_matrix(KernelSpec(KernelKind.GAUSSIAN, sigma), basis)
    eigvals = np.linalg.eigvalsh(gram)
    assert eigvals.min() >= -1e-9
