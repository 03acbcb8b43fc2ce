"""Independent reference implementations used only by the test suite.

These deliberately avoid the library's code paths: explicit scalar loops,
a cyclic-Jacobi eigensolver, and an arbitrary-precision integer model of the
fixed-point datapath. They are slow and simple on purpose.
"""

from __future__ import annotations

import numpy as np


def gram_triple_loop(Y):
    """Entrywise conjugate-multiply Gram computation."""
    B, n = Y.shape
    G = np.zeros((n, n), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            acc = 0.0 + 0.0j
            for b in range(B):
                acc += np.conj(Y[b, i]) * Y[b, j]
            G[i, j] = acc
    return G


def jacobi_eigenvalues(H, tol=1e-13, max_sweeps=60):
    """Eigenvalues of a complex Hermitian matrix by cyclic Jacobi rotations.

    Each rotation first strips the phase of the targeted off-diagonal entry,
    then applies the classic real symmetric 2x2 rotation. Returns the
    eigenvalues sorted ascending.
    """
    A = np.array(H, dtype=np.complex128)
    n = A.shape[0]
    norm = np.linalg.norm(A)
    if norm == 0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(A - np.diag(np.diag(A))) ** 2))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                a = A[p, q]
                if abs(a) <= tol * norm / (10 * n):
                    continue
                phi = np.angle(a)
                app = A[p, p].real
                aqq = A[q, q].real
                r = abs(a)
                tau = (aqq - app) / (2.0 * r)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # V = D @ R restricted to (p, q), D = diag(1, e^{-i phi})
                V = np.eye(n, dtype=np.complex128)
                V[p, p] = c
                V[p, q] = s
                V[q, p] = -s * np.exp(-1j * phi)
                V[q, q] = c * np.exp(-1j * phi)
                A = V.conj().T @ A @ V
    return np.sort(np.real(np.diag(A)))


def prox_iteration_scalar(Ghat, s_prev, rho, re_bound, im_bound, s_check):
    """One solver iteration with explicit scalar loops.

    Matrix-vector product entry by entry, then the per-component clip onto
    the hull, then the pilot-slot overwrite. ``im_bound`` of 0 models the
    real-line hull (imaginary part collapses to zero).
    """
    n = len(s_prev)
    q = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        acc = 0.0 + 0.0j
        for j in range(n):
            acc += Ghat[k, j] * s_prev[j]
        q[k] = acc
    s_new = np.zeros(n, dtype=np.complex128)
    for k in range(n):
        v = rho * q[k]
        re = min(max(v.real, -re_bound), re_bound)
        im = min(max(v.imag, -im_bound), im_bound)
        s_new[k] = re + 1j * im
    s_new[0] = s_check
    return q, s_new


# ---------------------------------------------------------------------------
# Arbitrary-precision integer model of the fixed-point datapath
# ---------------------------------------------------------------------------

def int_wrap(v: int, bits: int) -> int:
    half = 1 << (bits - 1)
    return ((v + half) % (1 << bits)) - half


def int_sat(v: int, bits: int) -> int:
    half = 1 << (bits - 1)
    return max(-half, min(half - 1, v))


def int_quantize(x: float, word_bits: int, frac_bits: int, saturate: bool) -> int:
    import math

    raw = math.floor(x * (1 << frac_bits))
    return int_sat(raw, word_bits) if saturate else int_wrap(raw, word_bits)


def int_mac(acc_re, acc_im, g_re, g_im, s_re, s_im):
    """One complex multiply-accumulate on raw integers.

    Products are exact; each partial drops 3 fraction LSBs (floor shift),
    the cross-term add/sub wraps at 15 bits, the accumulation saturates at
    15 bits.
    """
    prr = (g_re * s_re) >> 3
    pii = (g_im * s_im) >> 3
    pri = (g_re * s_im) >> 3
    pir = (g_im * s_re) >> 3
    cross_re = int_wrap(prr - pii, 15)
    cross_im = int_wrap(pri + pir, 15)
    return int_sat(acc_re + cross_re, 15), int_sat(acc_im + cross_im, 15)


def int_projection(qbar: int, rho_log2: int, inv_rho: int) -> int:
    """Raw 15-bit MAC output -> raw 6-bit hull-clipped iterate."""
    hi = int_sat(qbar - inv_rho, 15)
    lo = int_sat(qbar + inv_rho, 15)
    if hi >= 0:
        return 8
    if lo < 0:
        return -8
    shifted = int_sat(qbar << rho_log2, 15)
    return shifted >> 8
