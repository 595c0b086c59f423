"""Determinant helpers for symmetric likelihood matrices.

The likelihood matrices here are symmetric but not always positive
definite (torus wrapping can push them indefinite), so the determinant
sign is part of the answer.  Fast path is a Cholesky attempt; fallback
is an LDL^T factorization whose block-diagonal D carries the sign, with
an independent LU-based cross-check.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import SingularL0Matrix

__all__ = ["signed_logdet", "chol_logdet"]


def chol_logdet(a: np.ndarray) -> float | None:
    """log det for symmetric positive definite a, else None."""
    try:
        c = scipy.linalg.cholesky(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        return None
    d = np.diag(c)
    if np.any(d <= 0.0):
        return None
    return 2.0 * float(np.log(d).sum())


def _ldl_signed_logdet(a: np.ndarray) -> tuple[int, float]:
    lu, d, _ = scipy.linalg.ldl(a, check_finite=False)
    sign = 1
    log_abs = 0.0
    n = d.shape[0]
    i = 0
    while i < n:
        if i + 1 < n and d[i, i + 1] != 0.0:
            # 2x2 block from a symmetric pivot
            det = d[i, i] * d[i + 1, i + 1] - d[i, i + 1] * d[i + 1, i]
            if det == 0.0:
                return 0, -np.inf
            if det < 0.0:
                sign = -sign
            log_abs += np.log(abs(det))
            i += 2
        else:
            v = d[i, i]
            if v == 0.0:
                return 0, -np.inf
            if v < 0.0:
                sign = -sign
            log_abs += np.log(abs(v))
            i += 1
    return sign, log_abs


def signed_logdet(a: np.ndarray) -> tuple[int, float]:
    """(sign, log|det|) of a symmetric matrix.

    Cross-checks the symmetric LDL^T route against numpy's LU slogdet and
    raises SingularL0Matrix when the two disagree materially, or when the
    matrix is singular to working precision.
    """
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return 1, 0.0
    fast = chol_logdet(a)
    if fast is not None:
        return 1, fast
    sign_ldl, log_ldl = _ldl_signed_logdet(a)
    sign_lu, log_lu = np.linalg.slogdet(a)
    sign_lu = int(round(sign_lu))
    if sign_ldl == 0 or sign_lu == 0 or not np.isfinite(log_ldl):
        raise SingularL0Matrix("likelihood matrix is numerically singular")
    scale = max(abs(log_ldl), abs(log_lu), 1.0)
    if sign_ldl != sign_lu or abs(log_ldl - log_lu) > 1e-6 * scale:
        raise SingularL0Matrix(
            "determinant factorizations disagree: "
            f"ldl=({sign_ldl}, {log_ldl:.12g}) lu=({sign_lu}, {log_lu:.12g})")
    return sign_ldl, log_ldl
