import numpy as np
import scipy.linalg

from iidgen.expm import expm_batch


def test_matches_scipy_on_mixed_scales():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(200, 4, 4)) * rng.uniform(1e-3, 30, size=(200, 1, 1))
    got = expm_batch(M)
    for k in range(0, 200, 7):
        want = scipy.linalg.expm(M[k])
        assert np.linalg.norm(got[k] - want) <= 1e-11 * max(1.0, np.linalg.norm(want))


def test_single_matrix_and_zero():
    R = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.allclose(expm_batch(R * np.pi / 2), [[0, 1], [-1, 0]], atol=1e-15)
    assert np.allclose(expm_batch(np.zeros((3, 2, 2))), np.eye(2), rtol=0, atol=1e-15)
