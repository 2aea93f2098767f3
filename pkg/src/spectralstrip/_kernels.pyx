# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: block LDL* inertia sweep and RK4 Riccati propagation.

Mirrors spectralstrip._kernels_py exactly (same status codes, same arithmetic
order for the RK4 stages); the pure module is the executable reference.
"""

import numpy as np

from libc.math cimport sqrt, isfinite

COMPILED = True

DEF MAX_DIM = 32

cdef double PIVOT_RTOL = 1e-13


def inertia_count(const double complex[:, :, ::1] V, double h, double shift):
    """Eigenvalue count below `shift` for the interior-node block tridiagonal
    operator with diagonal blocks (2/h^2) I + V(x_i) and coupling -1/h^2 I.

    Returns (count, status, node): status 1 flags a pivot breakdown at `node`.
    """
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t N = V.shape[1]
    if N > MAX_DIM:
        raise ValueError(f"matrix dimension {N} exceeds the compiled limit {MAX_DIM}")
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double coupling = inv_h2 * inv_h2
    cdef double diag_base = 2.0 * inv_h2 - shift
    cdef double scale = 2.0 * inv_h2 + (shift if shift >= 0 else -shift)

    T_arr = np.empty((N, N), dtype=np.complex128)
    L_arr = np.empty((N, N), dtype=np.complex128)
    S_arr = np.empty((N, N), dtype=np.complex128)
    y_arr = np.empty(N, dtype=np.complex128)
    d_arr = np.empty(N, dtype=np.float64)
    cdef double complex[:, ::1] T = T_arr
    cdef double complex[:, ::1] L = L_arr
    cdef double complex[:, ::1] Sinv = S_arr
    cdef double complex[::1] y = y_arr
    cdef double[::1] d = d_arr

    cdef Py_ssize_t i, j, k, r, c
    cdef long count = 0
    cdef int have_prev = 0
    cdef int bad = 0
    cdef double piv, tol, amax, av
    cdef double complex z, acc

    with nogil:
        for i in range(1, n - 1):
            # T = (2/h^2 - shift) I + V[i] - (1/h^4) * Sinv_prev
            for r in range(N):
                for c in range(N):
                    z = V[i, r, c]
                    if have_prev:
                        z = z - coupling * Sinv[r, c]
                    if r == c:
                        z = z + diag_base
                    T[r, c] = z
            # breakdown tolerance relative to the block magnitude
            amax = scale
            for r in range(N):
                for c in range(N):
                    av = abs(T[r, c])
                    if av > amax:
                        amax = av
            tol = PIVOT_RTOL * amax
            # unpivoted LDL*: negatives of d give the block inertia
            for j in range(N):
                piv = T[j, j].real
                if (piv if piv >= 0 else -piv) <= tol:
                    bad = 1
                    break
                d[j] = piv
                if piv < 0.0:
                    count += 1
                for r in range(j + 1, N):
                    L[r, j] = T[r, j] / piv
                for r in range(j + 1, N):
                    for c in range(j + 1, r + 1):
                        T[r, c] = T[r, c] - piv * L[r, j] * L[c, j].conjugate()
                        T[c, r] = T[r, c].conjugate()
            if bad:
                break
            # Sinv = T^{-1} column by column: solve L y = e_k, z = y/d, back-solve L* x = z
            for k in range(N):
                for r in range(N):
                    acc = 1.0 + 0j if r == k else 0.0 + 0j
                    for c in range(r):
                        acc = acc - L[r, c] * y[c]
                    y[r] = acc
                for r in range(N - 1, -1, -1):
                    acc = y[r] / d[r]
                    for c in range(r + 1, N):
                        acc = acc - L[c, r].conjugate() * Sinv[c, k]
                    Sinv[r, k] = acc
            have_prev = 1
    if bad:
        return 0, 1, int(i)
    return int(count), 0, 0


def riccati_sweep(const double complex[:, :, ::1] V, double h, double lam, double cap,
                  int substeps, Py_ssize_t n_stop):
    """RK4 sweep of F' = V + lam*I - F^2 from F(x_min) = sqrt(lam)*I.

    Linear interpolation of V at stage points, re-hermitization after every
    substep (worst pre-projection Frobenius defect reported), Frobenius cap
    check for blow-up.  Returns (F, status, node, max_defect) with status
    0 complete / 1 blown up / 2 non-finite.
    """
    cdef Py_ssize_t n = V.shape[0]
    cdef Py_ssize_t N = V.shape[1]
    if N > MAX_DIM:
        raise ValueError(f"matrix dimension {N} exceeds the compiled limit {MAX_DIM}")
    if n_stop > n:
        n_stop = n
    cdef double s = sqrt(lam)
    cdef double dt = h / substeps
    cdef double cap2 = cap * cap
    cdef double max_defect = 0.0

    F_arr = np.zeros((n_stop, N, N), dtype=np.complex128)
    cdef double complex[:, :, ::1] F = F_arr
    Fi_arr = np.zeros((N, N), dtype=np.complex128)
    G_arr = np.empty((N, N), dtype=np.complex128)
    K1_arr = np.empty((N, N), dtype=np.complex128)
    K2_arr = np.empty((N, N), dtype=np.complex128)
    K3_arr = np.empty((N, N), dtype=np.complex128)
    K4_arr = np.empty((N, N), dtype=np.complex128)
    cdef double complex[:, ::1] Fi = Fi_arr
    cdef double complex[:, ::1] G = G_arr
    cdef double complex[:, ::1] K1 = K1_arr
    cdef double complex[:, ::1] K2 = K2_arr
    cdef double complex[:, ::1] K3 = K3_arr
    cdef double complex[:, ::1] K4 = K4_arr

    cdef Py_ssize_t i, j, r, c, k
    cdef int status = 0
    cdef Py_ssize_t stop_node = 0
    cdef double frac, fro2, dre, dim_, defect
    cdef double complex acc, z

    for r in range(N):
        Fi[r, r] = s
        F[0, r, r] = s

    with nogil:
        for i in range(n_stop - 1):
            for j in range(substeps):
                # k1 at stage offset j/substeps
                frac = (j + 0.0) / substeps
                _stage(V, i, frac, lam, Fi, K1, N)
                for r in range(N):
                    for c in range(N):
                        G[r, c] = Fi[r, c] + 0.5 * dt * K1[r, c]
                frac = (j + 0.5) / substeps
                _stage(V, i, frac, lam, G, K2, N)
                for r in range(N):
                    for c in range(N):
                        G[r, c] = Fi[r, c] + 0.5 * dt * K2[r, c]
                _stage(V, i, frac, lam, G, K3, N)
                for r in range(N):
                    for c in range(N):
                        G[r, c] = Fi[r, c] + dt * K3[r, c]
                frac = (j + 1.0) / substeps
                _stage(V, i, frac, lam, G, K4, N)
                for r in range(N):
                    for c in range(N):
                        Fi[r, c] = Fi[r, c] + (dt / 6.0) * (
                            K1[r, c] + 2.0 * K2[r, c] + 2.0 * K3[r, c] + K4[r, c])
                # hermiticity defect then projection
                defect = 0.0
                for r in range(N):
                    for c in range(N):
                        z = Fi[r, c] - Fi[c, r].conjugate()
                        defect += z.real * z.real + z.imag * z.imag
                defect = sqrt(defect)
                if defect > max_defect:
                    max_defect = defect
                for r in range(N):
                    for c in range(r, N):
                        z = 0.5 * (Fi[r, c] + Fi[c, r].conjugate())
                        Fi[r, c] = z
                        Fi[c, r] = z.conjugate()
                fro2 = 0.0
                for r in range(N):
                    for c in range(N):
                        dre = Fi[r, c].real
                        dim_ = Fi[r, c].imag
                        fro2 += dre * dre + dim_ * dim_
                if not isfinite(fro2):
                    status = 2
                    stop_node = i + 1
                    break
                if fro2 > cap2:
                    status = 1
                    stop_node = i + 1
                    break
            if status != 0:
                break
            for r in range(N):
                for c in range(N):
                    F[i + 1, r, c] = Fi[r, c]
    return F_arr, status, int(stop_node), max_defect


cdef inline void _stage(const double complex[:, :, ::1] V, Py_ssize_t i, double frac,
                        double lam, double complex[:, ::1] Fin,
                        double complex[:, ::1] out, Py_ssize_t N) noexcept nogil:
    """out = V_interp + lam*I - Fin @ Fin with V interpolated at i + frac."""
    cdef Py_ssize_t r, c, k
    cdef double complex acc
    for r in range(N):
        for c in range(N):
            acc = 0
            for k in range(N):
                acc = acc + Fin[r, k] * Fin[k, c]
            out[r, c] = V[i, r, c] + frac * (V[i + 1, r, c] - V[i, r, c]) - acc
            if r == c:
                out[r, c] = out[r, c] + lam
