"""Dense complex linear algebra kernels.

Everything in the library passes plain ``numpy.ndarray`` values around;
operators and density matrices are ``(d, d)`` complex arrays, superoperators
are ``(d*d, d*d)`` complex arrays acting on column-stacked vectorizations.

Vectorization convention (fixed project-wide, exposed in CSV dumps):
column stacking, ``vec(rho)[j*d + i] = rho[i, j]``, so that

    vec(X @ rho @ Y) == kron(Y.T, X) @ vec(rho).
"""
from __future__ import annotations

import numpy as np

from .errors import (
    DimensionMismatch,
    NoConvergence,
    NonFinite,
    NotHermitian,
    NotPSD,
)

__all__ = [
    "vec",
    "unvec",
    "dag",
    "frobenius",
    "is_hermitian",
    "is_unitary",
    "is_psd",
    "sandwich_superop",
    "hermitian_eigendecompose",
    "matrix_exponential",
    "psd_sqrt",
]


def vec(matrix):
    """Column-stack a matrix into a vector."""
    return np.asarray(matrix).T.reshape(-1)


def unvec(vector, dim=None):
    """Inverse of :func:`vec`. ``dim`` defaults to the square root of the size."""
    vector = np.asarray(vector)
    if dim is None:
        dim = int(round(np.sqrt(vector.size)))
    return vector.reshape(dim, dim).T


def dag(a):
    return np.conj(np.asarray(a).T)


def frobenius(a):
    return float(np.linalg.norm(np.asarray(a)))


def is_hermitian(a, tol=1e-10):
    a = np.asarray(a)
    return frobenius(a - dag(a)) <= tol


def is_unitary(a, tol=1e-10):
    a = np.asarray(a)
    eye = np.eye(a.shape[0])
    return frobenius(dag(a) @ a - eye) <= tol


def is_psd(a, tol=1e-10):
    """Positive semidefinite within ``tol``. Implies Hermitian within ``tol``."""
    a = np.asarray(a)
    if not is_hermitian(a, tol):
        return False
    w, _ = hermitian_eigendecompose(a, tol)
    return bool(w.min() >= -tol)


def sandwich_superop(x, y):
    """Superoperator of ``rho -> X rho Y`` under column stacking: ``kron(Y.T, X)``."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if x.shape != y.shape or x.shape[0] != x.shape[1]:
        raise DimensionMismatch(
            f"sandwich factors must be square and equal-sized, got {x.shape} and {y.shape}"
        )
    return np.kron(y.T, x)


# ---------------------------------------------------------------------------
# Hermitian eigendecomposition: cyclic Jacobi with complex rotations
# ---------------------------------------------------------------------------

_JACOBI_MAX_SWEEPS = 60


def _offdiag_norm(a):
    off = a - np.diag(np.diag(a))
    return np.linalg.norm(off)


def hermitian_eigendecompose(a, tol=1e-10):
    """Eigendecompose a Hermitian matrix with the cyclic Jacobi method.

    Returns ``(w, v)`` with eigenvalues ``w`` ascending and orthonormal
    eigenvector columns ``v`` such that ``a ~= v @ diag(w) @ v.conj().T``.

    Each (p, q) rotation first absorbs the phase of ``a[p, q]`` into column q
    and then applies the classic real rotation, so Hermiticity is preserved
    exactly and the accumulated transform is unitary to machine precision.

    Raises
    ------
    NotHermitian
        if ``|a - a^dagger|_F > tol``.
    NoConvergence
        if the off-diagonal norm has not collapsed after 60 sweeps.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    defect = frobenius(a - dag(a))
    if defect > tol:
        raise NotHermitian(f"|A - A^dagger|_F = {defect:.3e} exceeds tol {tol:.3e}")

    n = a.shape[0]
    work = 0.5 * (a + dag(a))
    v = np.eye(n, dtype=complex)
    if n == 1:
        return np.array([work[0, 0].real]), v

    scale = max(np.linalg.norm(work), 1.0)
    target = 1e-14 * scale

    for _ in range(_JACOBI_MAX_SWEEPS):
        if _offdiag_norm(work) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                r = abs(work[p, q])
                if r <= 1e-18 * scale:
                    continue
                phase = work[p, q] / r
                # absorb the phase so the 2x2 pivot block is real symmetric
                work[:, q] *= np.conj(phase)
                work[q, :] *= phase
                v[:, q] *= np.conj(phase)

                app = work[p, p].real
                aqq = work[q, q].real
                theta = 0.5 * (aqq - app) / r
                t = np.sign(theta) / (abs(theta) + np.hypot(1.0, theta))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.hypot(1.0, t)
                s = t * c

                for m in (work, v):
                    col_p = m[:, p].copy()
                    m[:, p] = c * col_p - s * m[:, q]
                    m[:, q] = s * col_p + c * m[:, q]
                row_p = work[p, :].copy()
                work[p, :] = c * row_p - s * work[q, :]
                work[q, :] = s * row_p + c * work[q, :]
                work[p, q] = 0.0
                work[q, p] = 0.0
    else:
        if _offdiag_norm(work) > target:
            raise NoConvergence(
                f"Jacobi sweeps exhausted with off-diagonal norm {_offdiag_norm(work):.3e}"
            )

    w = np.diag(work).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


# ---------------------------------------------------------------------------
# Matrix exponential: scaling and squaring with diagonal Pade approximants
# ---------------------------------------------------------------------------

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}

# 1-norm thresholds below which the order-m approximant meets double precision
_PADE_THETA = (
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
)


def _pade_step(a, m):
    n = a.shape[0]
    c = _PADE_COEFFS[m]
    eye = np.eye(n, dtype=complex)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a2 @ a4
        u = a @ (a6 @ (c[13] * a6 + c[11] * a4 + c[9] * a2)
                 + c[7] * a6 + c[5] * a4 + c[3] * a2 + c[1] * eye)
        v = (a6 @ (c[12] * a6 + c[10] * a4 + c[8] * a2)
             + c[6] * a6 + c[4] * a4 + c[2] * a2 + c[0] * eye)
    else:
        pows = [eye, a2]
        for _ in range(m // 2 - 1):
            pows.append(pows[-1] @ a2)
        u = np.zeros_like(a)
        v = np.zeros_like(a)
        for k in range(m, 0, -2):
            u = u + c[k] * pows[k // 2]
        u = a @ u
        for k in range(m - 1, -1, -2):
            v = v + c[k] * pows[(k + 1) // 2]
    return np.linalg.solve(v - u, v + u)


def matrix_exponential(a):
    """exp(A) by scaling-and-squaring with diagonal Pade approximants.

    Order and scaling follow the usual 1-norm thresholds; relative accuracy
    is at the rounding level for ``|A| <~ 10``, which covers every generator
    step this library takes.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise NonFinite("matrix contains NaN or Inf entries")

    norm = np.linalg.norm(a, 1)
    for m, theta in _PADE_THETA:
        if norm <= theta:
            return _pade_step(a, m)
    squarings = max(0, int(np.ceil(np.log2(norm / _PADE_THETA[-1][1]))))
    f = _pade_step(a / (2.0 ** squarings), 13)
    for _ in range(squarings):
        f = f @ f
    return f


def psd_sqrt(a, tol=1e-10):
    """Positive semidefinite square root via eigendecomposition.

    Eigenvalues in ``[-tol, 0)`` are clamped to zero; anything below ``-tol``
    raises :class:`NotPSD`.
    """
    a = np.asarray(a, dtype=complex)
    w, v = hermitian_eigendecompose(a, tol)
    if w.min() < -tol:
        raise NotPSD(f"minimum eigenvalue {w.min():.3e} below -tol")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ dag(v)
