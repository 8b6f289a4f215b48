import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphereheat.errors import InvalidParams, MatrixTooLarge, TruncationExceeded, UsageError
from sphereheat.exact import ExactKernelParams, TruncationPolicy, k_exact, sweet_spot_time
from sphereheat.kernels import (
    KernelKind,
    KernelSpec,
    cross_kernel,
    gram_matrix,
    kernel_eval,
    psd_check,
    read_gram_csv,
    write_gram_csv,
)


def random_counts(m, n, seed=0):
    return np.random.default_rng(seed).poisson(2.0, size=(m, n)).astype(float) + 0.01


def all_specs(n):
    t = sweet_spot_time(n)
    return [
        KernelSpec("lin"),
        KernelSpec("rbf", gamma=0.1),
        KernelSpec("cos", map="sqrt-l1"),
        KernelSpec("prx", map="sqrt-l1", t=t),
        KernelSpec("ext", map="sqrt-l1", t=t),
    ]


def test_spec_validation():
    with pytest.raises(UsageError):
        KernelSpec("lin", map="sqrt-l1")
    with pytest.raises(UsageError):
        KernelSpec("cos")
    with pytest.raises(InvalidParams):
        KernelSpec("rbf")
    with pytest.raises(InvalidParams):
        KernelSpec("ext", map="l2")
    assert KernelKind("prx").spherical and not KernelKind("prx").mercer


def test_spec_round_trip():
    spec = KernelSpec("ext", map="l2", t=0.1, n=7, truncation=TruncationPolicy(rel_tol=1e-10))
    assert KernelSpec.from_dict(spec.to_dict()) == spec


def test_kernel_eval_examples():
    assert kernel_eval(KernelSpec("lin"), [1, 2], [3, 4]) == 11
    assert kernel_eval(KernelSpec("rbf", gamma=0.25), [1, 2], [1, 2]) == 1
    assert kernel_eval(KernelSpec("cos", map="sqrt-l1"), [1, 0, 0], [0, 1, 0]) == 0
    spec = KernelSpec("ext", map="sqrt-l1", t=0.3)
    x = np.array([1.0, 2.0, 3.0])
    assert kernel_eval(spec, x, x) == 1.0
    w = float(np.sqrt(x / 6) @ np.sqrt(x[::-1] / 6))
    assert kernel_eval(spec, x, x[::-1]) == pytest.approx(k_exact(w, ExactKernelParams(3, 0.3)), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 50), st.floats(0.1, 50), st.sampled_from(["cos", "prx", "ext"]))
def test_spherical_kernels_ignore_scale(lam, mu, kind):
    rng = np.random.default_rng(1)
    x, y = rng.random(6) + 0.1, rng.random(6) + 0.1
    spec = KernelSpec(kind, map="sqrt-l1", t=None if kind == "cos" else 0.2)
    assert kernel_eval(spec, lam * x, mu * y) == pytest.approx(kernel_eval(spec, x, y), rel=1e-12, abs=1e-14)


def test_gram_identical_samples_cosine():
    gram = gram_matrix(KernelSpec("cos", map="sqrt-l1"), np.ones((3, 4)))
    np.testing.assert_allclose(gram.entries, np.ones((3, 3)), rtol=1e-15)


@pytest.mark.parametrize("index", range(5))
def test_gram_matches_cross_kernel_and_is_symmetric(index):
    X = random_counts(30, 8)
    spec = all_specs(8)[index]
    gram = gram_matrix(spec, X)
    np.testing.assert_array_equal(gram.entries, gram.entries.T)
    np.testing.assert_allclose(gram.entries, cross_kernel(spec, X, X), rtol=1e-12, atol=1e-14)
    if spec.kind.spherical or spec.kind is KernelKind.RBF:
        np.testing.assert_array_equal(np.diag(gram.entries), 1.0)


def test_gram_permutation_equivariant():
    X = random_counts(25, 6, seed=3)
    spec = KernelSpec("ext", map="sqrt-l1", t=0.2)
    perm = np.random.default_rng(0).permutation(25)
    np.testing.assert_allclose(gram_matrix(spec, X[perm]).entries, gram_matrix(spec, X).entries[np.ix_(perm, perm)])


def test_gram_threads_do_not_change_output():
    X = random_counts(60, 10, seed=5)
    spec = KernelSpec("ext", map="sqrt-l1", t=0.1)
    np.testing.assert_array_equal(gram_matrix(spec, X, threads=4).entries, gram_matrix(spec, X).entries)


@pytest.mark.parametrize("index", [0, 1, 2, 4])
def test_mercer_kernels_are_psd(index):
    X = random_counts(50, 8, seed=2)
    assert psd_check(gram_matrix(all_specs(8)[index], X)).passed


def test_psd_examples():
    rep = psd_check(gram_matrix(KernelSpec("lin"), np.eye(4)))
    assert rep.lambda_min == pytest.approx(1) and rep.lambda_max == pytest.approx(1)
    X = np.array([[1.0, 2.0], [1.0, 2.0], [0.5, 3.0]])
    assert abs(psd_check(gram_matrix(KernelSpec("lin"), X)).lambda_min) < 1e-10
    with pytest.raises(MatrixTooLarge):
        psd_check(np.eye(2001))


def test_parametrix_psd_failure_is_a_warning():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((200, 3))
    gram = gram_matrix(KernelSpec("prx", map="l2", t=1.0), X)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = psd_check(gram)
    assert not rep.passed
    assert caught


def test_large_t_gram_is_all_ones():
    X = random_counts(20, 30)
    gram = gram_matrix(KernelSpec("ext", map="sqrt-l1", t=5 * math.log(30)), X)
    assert np.max(np.abs(gram.entries - 1)) < 1e-8


def test_failure_names_the_pair():
    X = random_counts(5, 4)
    spec = KernelSpec("ext", map="sqrt-l1", t=1e-4, truncation=TruncationPolicy(l_max=20))
    with pytest.raises(TruncationExceeded, match=r"pair \d+, \d+"):
        gram_matrix(spec, X)


def test_csv_round_trip(tmp_path):
    gram = gram_matrix(KernelSpec("cos", map="sqrt-l1"), random_counts(6, 5), sample_ids=list("abcdef"))
    path = tmp_path / "g.csv"
    write_gram_csv(gram, path)
    ids, K = read_gram_csv(path)
    assert ids == list("abcdef")
    np.testing.assert_array_equal(K, gram.entries)
    buf = io.StringIO()
    write_gram_csv(gram, buf)
    assert buf.getvalue() == path.read_text()
