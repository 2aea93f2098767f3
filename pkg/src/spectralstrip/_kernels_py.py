"""Pure-Python (numpy) kernels: the fallback path for the compiled core.

Two hot recurrences live here:

* ``inertia_count`` -- number of eigenvalues of the Dirichlet block-tridiagonal
  discretization below a shift, from the node-by-node block LDL* factorization
  (Sylvester inertia).
* ``riccati_sweep`` -- classical RK4 propagation of the matrix Riccati flow
  F' = V + lam*I - F^2 across the grid with per-step re-hermitization and
  norm-cap blow-up detection.

Both loops march node by node, so numpy cannot vectorize along the grid; the
compiled sibling in ``_kernels.pyx`` implements the same arithmetic in C.
Status codes are shared with the compiled module:

    riccati_sweep: 0 complete, 1 blown up at `node`, 2 non-finite at `node`
    inertia_count: 0 ok, 1 pivot breakdown at `node`
"""

import numpy as np

COMPILED = False

_PIVOT_RTOL = 1e-13


def _block_inertia_inv(T, scale):
    """Unpivoted LDL* of a hermitian block: (negatives, inverse, ok_flag).

    Sylvester inertia of the Schur-complement chain only needs pivot signs;
    a pivot below the breakdown tolerance means the shift is effectively an
    eigenvalue of a leading section and the caller must perturb and retry.
    """
    N = T.shape[0]
    A = T.copy()
    tol = _PIVOT_RTOL * max(scale, float(np.max(np.abs(T))), 1e-290)
    neg = 0
    L = np.eye(N, dtype=np.complex128)
    d = np.empty(N)
    for j in range(N):
        piv = A[j, j].real
        if abs(piv) <= tol:
            return 0, None, False
        d[j] = piv
        if piv < 0.0:
            neg += 1
        if j + 1 < N:
            col = A[j + 1 :, j] / piv
            L[j + 1 :, j] = col
            A[j + 1 :, j + 1 :] -= piv * np.outer(col, col.conj())
    # T^{-1} = L^{-*} D^{-1} L^{-1} via triangular solves on the identity
    Linv = np.linalg.solve(L, np.eye(N, dtype=np.complex128))
    Tinv = Linv.conj().T @ (Linv / d[:, None])
    return neg, Tinv, True


def inertia_count(V, h, shift):
    """Eigenvalues of the interior-node block-tridiagonal operator below `shift`.

    Diagonal blocks are (2/h^2) I + V(x_i) on interior nodes, off-diagonal
    coupling -1/h^2 I.  Returns (count, status, node).
    """
    n, N = V.shape[0], V.shape[1]
    inv_h2 = 1.0 / (h * h)
    coupling = inv_h2 * inv_h2
    base = (2.0 * inv_h2 - shift) * np.eye(N, dtype=np.complex128)
    scale = 2.0 * inv_h2 + abs(shift)
    count = 0
    Sinv = None
    for i in range(1, n - 1):
        T = base + V[i]
        if Sinv is not None:
            T = T - coupling * Sinv
        neg, Sinv, ok = _block_inertia_inv(T, scale)
        if not ok:
            return 0, 1, i
        count += neg
    return count, 0, 0


def riccati_sweep(V, h, lam, cap, substeps=4, n_stop=None):
    """RK4 sweep of F' = V + lam*I - F^2 from the left end.

    V is interpolated linearly at substep stage points.  F is re-hermitized
    after every substep; the worst pre-projection defect is reported.  The
    Frobenius norm is checked against `cap` each substep: exceeding it stops
    the sweep with status 1 (blow-up) at the interval's right node.

    Returns (F, status, node, max_defect) with F of shape (n_stop, N, N);
    samples past a blow-up node are zero.
    """
    n, N = V.shape[0], V.shape[1]
    if n_stop is None:
        n_stop = n
    s = np.sqrt(lam)
    eye = np.eye(N, dtype=np.complex128)
    F = np.zeros((n_stop, N, N), dtype=np.complex128)
    Fi = s * eye
    F[0] = Fi
    dt = h / substeps
    lam_eye = lam * eye
    cap2 = cap * cap
    max_defect = 0.0
    for i in range(n_stop - 1):
        V0 = V[i]
        dV = V[i + 1] - V0
        for j in range(substeps):
            Va = V0 + ((j + 0.0) / substeps) * dV
            Vm = V0 + ((j + 0.5) / substeps) * dV
            Vb = V0 + ((j + 1.0) / substeps) * dV
            k1 = Va + lam_eye - Fi @ Fi
            G = Fi + (0.5 * dt) * k1
            k2 = Vm + lam_eye - G @ G
            G = Fi + (0.5 * dt) * k2
            k3 = Vm + lam_eye - G @ G
            G = Fi + dt * k3
            k4 = Vb + lam_eye - G @ G
            Fi = Fi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            defect = float(np.linalg.norm(Fi - Fi.conj().T))
            if defect > max_defect:
                max_defect = defect
            Fi = 0.5 * (Fi + Fi.conj().T)
            fro2 = float(np.sum(Fi.real * Fi.real + Fi.imag * Fi.imag))
            if not np.isfinite(fro2):
                return F, 2, i + 1, max_defect
            if fro2 > cap2:
                return F, 1, i + 1, max_defect
        F[i + 1] = Fi
    return F, 0, 0, max_defect
