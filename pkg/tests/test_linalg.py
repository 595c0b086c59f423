"""Signed log-determinants against numpy references."""

import numpy as np
import pytest

from dppmle.errors import SingularL0Matrix
from dppmle.linalg import chol_logdet, signed_logdet


def random_symmetric(rng, n, shift=0.0):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T) + shift * np.eye(n)


class TestCholLogdet:
    def test_spd(self):
        rng = np.random.default_rng(0)
        a = random_symmetric(rng, 8, shift=10.0)
        assert chol_logdet(a) == pytest.approx(np.linalg.slogdet(a)[1])

    def test_indefinite_returns_none(self):
        assert chol_logdet(np.diag([1.0, -2.0])) is None


class TestSignedLogdet:
    def test_empty(self):
        assert signed_logdet(np.zeros((0, 0))) == (1, 0.0)

    def test_matches_slogdet_spd(self):
        rng = np.random.default_rng(1)
        for n in (1, 5, 40):
            a = random_symmetric(rng, n, shift=2.0 * n)
            s, v = signed_logdet(a)
            assert s == 1
            assert v == pytest.approx(np.linalg.slogdet(a)[1], rel=1e-12)

    def test_matches_slogdet_indefinite(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = random_symmetric(rng, 12)
            s, v = signed_logdet(a)
            s_ref, v_ref = np.linalg.slogdet(a)
            assert s == int(s_ref)
            assert v == pytest.approx(v_ref, rel=1e-9, abs=1e-9)

    def test_negative_determinant_sign(self):
        a = np.diag([2.0, -3.0, 1.5])
        s, v = signed_logdet(a)
        assert s == -1
        assert v == pytest.approx(np.log(9.0))

    def test_singular_raises(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(SingularL0Matrix):
            signed_logdet(a)
