"""Matrix Riccati propagation, ground-state shooting, and the commutation
transform V -> V - 2F'.

Conventions.  Trial energies are the positive magnitudes lam (the operator
eigenvalue is -lam).  F is the logarithmic derivative in the M'(x) M(x)^{-1}
ordering, the unique one that satisfies F' + F^2 = V + lam*I together with
hermiticity.  The flow starts from the exact free fixed point sqrt(lam)*I at
the left end; a bound state at -lam shows up as F developing the eigenvalue
-sqrt(lam) at the right support edge, and for trial energies below the ground
state the flow has a pole (blow-up), which the shooter treats as a negative
sign.

The transformed potential is evaluated algebraically as 2F^2 - V - 2*lam*I
(identical to V - 2F' on Riccati solutions).  Past the support edge the raw
flow is unstable around the bound eigenvalue -sqrt(lam) (any rounding is
amplified like e^{2 sqrt(lam) x}), so the transform switches there to the
free-region closed form evaluated spectrally, with eigenvalues inside the
degeneracy tolerance of -sqrt(lam) pinned to the fixed point.  That keeps the
output exactly zero outside the support in the fully degenerate case and
exponentially decaying otherwise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import (
    BracketError,
    InvalidStateError,
    NumericalError,
    ParameterError,
)
from .lattice import Grid, MatrixField, MatrixPotential

STATUS_COMPLETE = "complete"
STATUS_BLOWN_UP = "blown_up"

#: |g| tolerance and bracket-width floor for the shooting bisection
SHOOT_G_TOL = 1e-10
SHOOT_WIDTH_TOL = 1e-12

#: Frobenius-norm threshold triggering QR renormalization of (M, M')
M_RENORM_THRESHOLD = 1e8


def default_degeneracy_tol(lam: float) -> float:
    return 1e-5 * math.sqrt(lam)


@dataclass(frozen=True)
class RiccatiField:
    """Grid-sampled hermitian F(x) for one trial energy."""

    lam: float
    grid: Grid
    dim: int
    F_samples: np.ndarray  # (n, N, N); zero past a blow-up node
    status: str
    blow_node: int | None
    max_hermiticity_defect: float
    norm_cap: float

    @property
    def complete(self) -> bool:
        return self.status == STATUS_COMPLETE

    @property
    def valid_nodes(self) -> int:
        return self.grid.n_points if self.complete else self.blow_node

    @cached_property
    def eigenvalue_braid(self) -> np.ndarray:
        """(valid_nodes, N) sorted eigenvalues of F at each valid node."""
        return np.linalg.eigvalsh(self.F_samples[: self.valid_nodes])


def riccati_norm_cap(V: MatrixField, lam: float) -> float:
    """Coarse a-priori bound 10*sqrt(lam) + max||V||_2^(1/2) used as blow-up detector."""
    return 10.0 * math.sqrt(lam) + math.sqrt(V.max_spectral_norm)


def propagate_riccati(V: MatrixField, lam: float, n_stop: int | None = None) -> RiccatiField:
    """Integrate F' = V + lam*I - F^2 with classical RK4, 4 substeps per grid
    interval, V linearly interpolated at stage points, starting from
    F(x_min) = sqrt(lam)*I, re-hermitizing after every substep."""
    if lam <= 0.0:
        raise ParameterError(f"lam must be > 0, got {lam}")
    cap = riccati_norm_cap(V, lam)
    F, status, node, defect = kernels.riccati_sweep(
        V.samples, V.grid.h, lam, cap, 4, n_stop if n_stop is not None else V.grid.n_points
    )
    if status == 2:
        raise NumericalError(f"non-finite Riccati arithmetic at node {node} (lam={lam!r})")
    return RiccatiField(
        lam=lam,
        grid=V.grid,
        dim=V.dim,
        F_samples=F,
        status=STATUS_COMPLETE if status == 0 else STATUS_BLOWN_UP,
        blow_node=None if status == 0 else int(node),
        max_hermiticity_defect=float(defect),
        norm_cap=cap,
    )


def support_edge_index(V: MatrixField) -> int:
    """First node index at and beyond which every sample vanishes (the
    evaluation point x0 for edge eigenvalues: equals the node at x = a when
    the sample there is zero, one node further when the edge carries the
    jump-mean value)."""
    nonzero = np.flatnonzero(np.linalg.norm(V.samples, axis=(1, 2)) > 0.0)
    if len(nonzero) == 0:
        return V.grid.n_points // 2
    edge = int(nonzero[-1]) + 1
    if edge >= V.grid.n_points:
        raise ParameterError("potential has no free region at the right grid end")
    return edge


@dataclass(frozen=True)
class GroundState:
    """Converged ground multiplet: lam_1, degeneracy K, and the Riccati field."""

    lambda1: float
    K: int
    F: RiccatiField
    edge_eigenvalues: np.ndarray  # N eigenvalues of F at the support edge x0
    edge_index: int
    degeneracy_tol: float


def shoot_ground_state(
    V: MatrixField, bracket: tuple, degeneracy_tol: float | None = None
) -> GroundState:
    """Bisection on g(lam) = min eig F_lam(x0) + sqrt(lam).

    g is positive above the ground multiplet and negative (or the flow blows
    up, treated as negative) just below it.  Converges to |g| <= 1e-10 with
    g >= 0, or to bracket width 1e-12, keeping the upper (complete-flow) end.
    K counts edge eigenvalues within the degeneracy tolerance of -sqrt(lam).
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0.0 < lo < hi):
        raise BracketError(f"need 0 < lam_lo < lam_hi, got {bracket!r}")
    edge = support_edge_index(V)
    n_stop = edge + 1

    def g_of(lam):
        fld = propagate_riccati(V, lam, n_stop=n_stop)
        if not fld.complete:
            return None, fld
        nu_min = float(np.linalg.eigvalsh(fld.F_samples[edge])[0])
        return nu_min + math.sqrt(lam), fld

    g_hi, _ = g_of(hi)
    if g_hi is None:
        raise BracketError(f"Riccati flow blows up at the upper bracket end lam={hi!r}")
    if g_hi < 0.0:
        raise BracketError(f"g({hi!r}) = {g_hi!r} < 0: bracket does not straddle the ground state")
    g_lo, _ = g_of(lo)
    if g_lo is not None and g_lo >= 0.0:
        raise BracketError(f"g has the same sign at both bracket ends (g({lo!r}) = {g_lo!r} >= 0)")

    lam_hat = hi
    while hi - lo > SHOOT_WIDTH_TOL:
        mid = 0.5 * (lo + hi)
        g_mid, _ = g_of(mid)
        if g_mid is not None and 0.0 <= g_mid <= SHOOT_G_TOL:
            lam_hat = mid
            break
        if g_mid is None or g_mid < 0.0:
            lo = mid
        else:
            hi = mid
            lam_hat = hi
    else:
        lam_hat = hi

    field = propagate_riccati(V, lam_hat)
    if not field.complete:
        raise NumericalError(
            f"converged flow unexpectedly blew up at node {field.blow_node} (lam={lam_hat!r})"
        )
    s = math.sqrt(lam_hat)
    tol = degeneracy_tol if degeneracy_tol is not None else default_degeneracy_tol(lam_hat)
    evals = np.linalg.eigvalsh(field.F_samples[edge])
    K = int(np.sum(np.abs(evals + s) <= tol))
    if K < 1:
        raise NumericalError(f"no edge eigenvalue within {tol!r} of -sqrt(lam) after convergence")
    if K > V.dim:
        raise NumericalError(f"degeneracy {K} exceeds the matrix dimension {V.dim}")
    return GroundState(
        lambda1=lam_hat,
        K=K,
        F=field,
        edge_eigenvalues=evals,
        edge_index=edge,
        degeneracy_tol=tol,
    )


def _free_eigenvalue_flow(nu0: np.ndarray, s: float, dx: np.ndarray) -> np.ndarray:
    """Closed-form free flow of F eigenvalues: nu -> s(s*t + nu)/(s + t*nu)
    with t = tanh(s*dx); -s and +s are exact fixed points.  Shapes broadcast
    to (len(dx), len(nu0))."""
    t = np.tanh(s * dx)[:, None]
    nu = nu0[None, :]
    pinned = nu0 == -s
    # ratio first: for nu0 = -s and |t| < 1 the quotient is -1 bit-exactly;
    # once tanh saturates to 1.0 the quotient is 0/0, so the pinned directions
    # are written explicitly.  Values above +s are legitimate for forward
    # evolution (they relax down to +s); only nu0 < -s would hit a pole.
    with np.errstate(invalid="ignore", divide="ignore"):
        out = s * ((s * t + nu) / (s + t * nu))
    out[:, pinned] = -s
    return out


def closed_form_F_free(F_at_x0: np.ndarray, lam: float, dx: float) -> np.ndarray:
    """Free-region evolution of F over a signed offset dx, evaluated
    spectrally (diagonalize, map eigenvalues, reassemble)."""
    if lam <= 0.0:
        raise ParameterError(f"lam must be > 0, got {lam}")
    s = math.sqrt(lam)
    nu0, U = np.linalg.eigh(np.asarray(F_at_x0, dtype=np.complex128))
    if np.max(np.abs(nu0)) > s + 1e-8:
        raise NumericalError(
            f"eigenvalue {nu0[np.argmax(np.abs(nu0))]!r} of F(x0) outside [-sqrt(lam), sqrt(lam)]"
        )
    nu0 = np.clip(nu0, -s, s)
    nu = _free_eigenvalue_flow(nu0, s, np.array([float(dx)]))[0]
    return (U * nu) @ U.conj().T


def darboux_transform(V: MatrixPotential, gs: GroundState) -> MatrixField:
    """Transformed potential V - 2F', computed as 2F^2 - V - 2*lam*I.

    Up to the support edge the integrated field is used directly.  Beyond it
    the free-region closed form takes over, with edge eigenvalues inside the
    degeneracy tolerance of -sqrt(lam) pinned to the fixed point; the output
    is exactly zero left of the support, exactly zero right of it when the
    multiplet fills the matrix dimension (K = N), and exponentially decaying
    otherwise.
    """
    if not gs.F.complete:
        raise InvalidStateError("darboux_transform requires a complete Riccati field")
    F = gs.F.F_samples
    s = math.sqrt(gs.lambda1)
    s2 = s * s
    edge = gs.edge_index
    grid = V.grid
    N = V.dim

    W = np.empty_like(V.samples)
    head = slice(0, edge + 1)
    W[head] = 2.0 * (F[head] @ F[head]) - V.samples[head]
    idx = np.arange(N)
    W[head, idx, idx] -= 2.0 * s2

    # pin the bound directions to the fixed point; eigenvalues above +s (which
    # occur for non-sign-definite inputs) relax forward on their own
    nu0, U = np.linalg.eigh(F[edge])
    nu0 = np.where(np.abs(nu0 + s) <= gs.degeneracy_tol, -s, np.maximum(nu0, -s))
    if edge + 1 < grid.n_points:
        dx = grid.nodes[edge + 1 :] - grid.nodes[edge]
        nu = _free_eigenvalue_flow(nu0, s, dx)        # (m, N)
        diag = 2.0 * (nu * nu - s2)                   # exactly 0 in pinned directions
        W[edge + 1 :] = np.einsum("jk,mk,lk->mjl", U, diag, U.conj())
        W[edge + 1 :] -= V.samples[edge + 1 :]
    W = 0.5 * (W + W.conj().swapaxes(1, 2))
    return MatrixField(grid=grid, dim=N, samples=W)


def trace_identity_residual(V: MatrixField, V_new: MatrixField, gs: GroundState) -> float:
    """Residual of the exact identity
    int Tr(V_new^2) - int Tr(V^2) + (16/3) K lam_1^{3/2} = 0."""
    h = V.grid.h
    q_new = float(np.trapezoid(V_new.trace_values(2), dx=h))
    q_old = float(np.trapezoid(V.trace_values(2), dx=h))
    return q_new - q_old + (16.0 / 3.0) * gs.K * gs.lambda1 ** 1.5


def riccati_residual(field: RiccatiField, V: MatrixField) -> float:
    """Max interior-node Frobenius norm of (central-difference F') - (V + lam*I - F^2).

    Independent consistency check of the integrator: should shrink like h^2.
    """
    if not field.complete:
        raise InvalidStateError("residual check requires a complete field")
    F = field.F_samples
    h = field.grid.h
    dF = (F[2:] - F[:-2]) / (2.0 * h)
    rhs = V.samples[1:-1] + field.lam * np.eye(field.dim) - F[1:-1] @ F[1:-1]
    return float(np.max(np.linalg.norm(dF - rhs, axis=(1, 2))))


# ---------------------------------------------------------------------------
# matrix solution M and the independent cross-check path

@dataclass(frozen=True)
class MatrixSolutionField:
    """Solution pair (M, M') of -M'' + V M = -lam M with QR renormalization.

    The displayed samples are the renormalized pair; the true solution is
    displayed-M times the accumulated right factors, so F = M' M^{-1} and the
    relative Wronskian check are renormalization-invariant as computed.
    """

    lam: float
    grid: Grid
    dim: int
    M_samples: np.ndarray
    P_samples: np.ndarray  # M'
    renorm_log: tuple      # ((node, R) ...) in application order

    def F_samples(self) -> np.ndarray:
        """F = M' M^{-1} at every node."""
        MT = self.M_samples.conj().swapaxes(1, 2)
        PT = self.P_samples.conj().swapaxes(1, 2)
        return np.linalg.solve(MT, PT).conj().swapaxes(1, 2)

    def wronskian_max_drift(self) -> float:
        """max_x ||M*M' - M'*M||_F / ||M*M'||_F (zero for the boundary data used)."""
        W = self.M_samples.conj().swapaxes(1, 2) @ self.P_samples
        anti = W - W.conj().swapaxes(1, 2)
        num = np.linalg.norm(anti, axis=(1, 2))
        den = np.maximum(np.linalg.norm(W, axis=(1, 2)), 1e-300)
        return float(np.max(num / den))

    def logdet_magnitude(self) -> np.ndarray:
        """log|det M_true(x)| per node, unwinding the renormalizations."""
        sign, logdet = np.linalg.slogdet(self.M_samples)
        out = logdet.astype(float)
        for node, R in self.renorm_log:
            _, ld = np.linalg.slogdet(R)
            out[node:] += ld
        return out


def propagate_M(V: MatrixField, lam: float, A: np.ndarray) -> MatrixSolutionField:
    """RK4 propagation of M'' = (V + lam) M as a first-order system, initial
    data M = e^{sqrt(lam) x_min} A, M' = sqrt(lam) M, with QR renormalization
    of the stacked pair whenever ||M||_F exceeds 1e8."""
    if lam <= 0.0:
        raise ParameterError(f"lam must be > 0, got {lam}")
    A = np.asarray(A, dtype=np.complex128)
    N = V.dim
    if A.shape != (N, N):
        raise ParameterError(f"A must be {N}x{N}, got {A.shape}")
    if np.linalg.cond(A) >= 1e8:
        raise ParameterError("A is singular or too ill-conditioned (cond >= 1e8)")

    grid = V.grid
    n = grid.n_points
    s = math.sqrt(lam)
    substeps = 4
    dt = grid.h / substeps
    eye = np.eye(N)

    M = np.empty((n, N, N), dtype=np.complex128)
    P = np.empty_like(M)
    Mi = math.exp(s * grid.x_min) * A
    Pi = s * Mi
    M[0], P[0] = Mi, Pi
    renorms = []
    Vs = V.samples
    for i in range(n - 1):
        V0 = Vs[i]
        dV = Vs[i + 1] - V0
        for j in range(substeps):
            Va = V0 + ((j + 0.0) / substeps) * dV + lam * eye
            Vm = V0 + ((j + 0.5) / substeps) * dV + lam * eye
            Vb = V0 + ((j + 1.0) / substeps) * dV + lam * eye
            k1m, k1p = Pi, Va @ Mi
            m2, p2 = Mi + 0.5 * dt * k1m, Pi + 0.5 * dt * k1p
            k2m, k2p = p2, Vm @ m2
            m3, p3 = Mi + 0.5 * dt * k2m, Pi + 0.5 * dt * k2p
            k3m, k3p = p3, Vm @ m3
            m4, p4 = Mi + dt * k3m, Pi + dt * k3p
            k4m, k4p = p4, Vb @ m4
            Mi = Mi + (dt / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
            Pi = Pi + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if not np.all(np.isfinite(Mi)) or not np.all(np.isfinite(Pi)):
            raise NumericalError(f"non-finite M propagation at node {i + 1} (lam={lam!r})")
        if np.linalg.norm(Mi) > M_RENORM_THRESHOLD:
            Q, R = np.linalg.qr(np.vstack([Mi, Pi]))
            Mi, Pi = Q[:N].copy(), Q[N:].copy()
            renorms.append((i + 1, R))
        M[i + 1], P[i + 1] = Mi, Pi
    return MatrixSolutionField(
        lam=lam, grid=grid, dim=N, M_samples=M, P_samples=P, renorm_log=tuple(renorms)
    )


# ---------------------------------------------------------------------------
# factorization and adjoint-kernel diagnostics

def make_trial_vectors(grid: Grid, dim: int, count: int, seed: int = 0) -> list:
    """Seeded smooth C^N-valued trial functions vanishing at both grid ends."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    u = (x - grid.x_min) / grid.width
    envelope = np.exp(-0.5 * ((x - 0.5 * (grid.x_min + grid.x_max)) / (0.2 * grid.width)) ** 2)
    trials = []
    for _ in range(count):
        phi = np.zeros((grid.n_points, dim), dtype=np.complex128)
        for c in range(dim):
            coeff = rng.standard_normal(5) + 1j * rng.standard_normal(5)
            for m, cm in enumerate(coeff, start=1):
                phi[:, c] += cm * np.sin(m * math.pi * u)
        phi *= envelope[:, None]
        phi[0] = 0.0
        phi[-1] = 0.0
        nrm = math.sqrt(float(np.trapezoid(np.sum(np.abs(phi) ** 2, axis=1), dx=grid.h)))
        trials.append(phi / nrm)
    return trials


def factorization_residual(V: MatrixField, gs: GroundState, trials) -> float:
    """max over trial vectors of |<phi,(H+lam)phi> - ||phi' - F phi||^2| / ||phi||^2,
    with phi' by central differences and both quadratic forms by trapezoid."""
    F = gs.F.F_samples
    lam = gs.lambda1
    h = V.grid.h
    worst = 0.0
    for phi in trials:
        if np.max(np.abs(phi[0])) != 0.0 or np.max(np.abs(phi[-1])) != 0.0:
            raise ParameterError("trial vectors must vanish at both grid ends")
        dphi = np.gradient(phi, h, axis=0)
        vphi = np.einsum("ijk,ik->ij", V.samples, phi)
        q_form = float(
            np.trapezoid(np.sum(np.abs(dphi) ** 2, axis=1), dx=h)
            + np.trapezoid(np.sum((phi.conj() * vphi).real, axis=1), dx=h)
            + lam * np.trapezoid(np.sum(np.abs(phi) ** 2, axis=1), dx=h)
        )
        dphi_f = dphi - np.einsum("ijk,ik->ij", F, phi)
        q_fact = float(np.trapezoid(np.sum(np.abs(dphi_f) ** 2, axis=1), dx=h))
        nrm = float(np.trapezoid(np.sum(np.abs(phi) ** 2, axis=1), dx=h))
        worst = max(worst, abs(q_form - q_fact) / nrm)
    return worst


def adjoint_kernel_growth(gs: GroundState) -> float:
    """Backward-propagate Psi' = -F Psi from the right end with identity data
    and return the max/min ratio of the node Frobenius norms.  A bound-state
    F forces exponential variation at rate sqrt(lam) across the free stretch,
    the numerical footprint of D* having no normalizable kernel."""
    F = gs.F.F_samples
    grid = gs.F.grid
    n = grid.n_points
    substeps = 4
    dt = grid.h / substeps
    Psi = np.eye(gs.F.dim, dtype=np.complex128)
    norms = np.empty(n)
    norms[-1] = float(np.linalg.norm(Psi))
    for i in range(n - 1, 0, -1):
        F1 = F[i]
        dF = F[i - 1] - F1
        for j in range(substeps):
            Fa = F1 + ((j + 0.0) / substeps) * dF
            Fm = F1 + ((j + 0.5) / substeps) * dF
            Fb = F1 + ((j + 1.0) / substeps) * dF
            k1 = Fa @ Psi
            k2 = Fm @ (Psi + 0.5 * dt * k1)
            k3 = Fm @ (Psi + 0.5 * dt * k2)
            k4 = Fb @ (Psi + dt * k3)
            Psi = Psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        norms[i - 1] = float(np.linalg.norm(Psi))
    return float(np.max(norms) / np.min(norms))


def write_braid_csv(field: RiccatiField, path) -> None:
    """Node, eigenvalues of F(x): the eigenvalue braid of the flow."""
    braid = field.eigenvalue_braid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x"] + [f"f{k + 1}" for k in range(field.dim)])
        for x, row in zip(field.grid.nodes[: field.valid_nodes], braid):
            w.writerow([repr(float(x))] + [repr(float(v)) for v in row])
