"""Negative spectrum of H = -d^2/dx^2 (x) I + V with Dirichlet walls.

The operator is discretized with second-order central differences on the
interior nodes, giving a hermitian block-tridiagonal matrix whose inertia
under shifts is computable in one sweep.  Eigenvalues below zero are located
by bisection on that count and clustered into multiplets; no full
diagonalization ever happens.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import NumericalError, ParameterError
from .lattice import Grid, MatrixField

#: multiplier on the Dirichlet-box resolution (pi/width)^2 below which an
#: eigenvalue magnitude is flagged as continuum-marginal
MARGINAL_FLOOR_FACTOR = 10.0


@dataclass(frozen=True)
class DiscreteHamiltonian:
    """Block-tridiagonal form: diagonal blocks (2/h^2) I + V(x_i) on interior
    nodes, off-diagonal blocks -1/h^2 I."""

    potential: MatrixField

    @property
    def grid(self) -> Grid:
        return self.potential.grid

    @property
    def dim(self) -> int:
        return self.potential.dim

    @property
    def size(self) -> int:
        return (self.grid.n_points - 2) * self.dim

    def dense(self) -> np.ndarray:
        """Assemble the full matrix; only sensible for small test grids."""
        n_int = self.grid.n_points - 2
        N = self.dim
        inv_h2 = 1.0 / self.grid.h ** 2
        H = np.zeros((n_int * N, n_int * N), dtype=np.complex128)
        eye = np.eye(N)
        for i in range(n_int):
            sl = slice(i * N, (i + 1) * N)
            H[sl, sl] = 2.0 * inv_h2 * eye + self.potential.samples[i + 1]
            if i + 1 < n_int:
                sr = slice((i + 1) * N, (i + 2) * N)
                H[sl, sr] = -inv_h2 * eye
                H[sr, sl] = -inv_h2 * eye
        return H

    def banded(self) -> np.ndarray:
        """Lower-banded storage (for scipy solve_banded ab format, full bands)."""
        n_int = self.grid.n_points - 2
        N = self.dim
        inv_h2 = 1.0 / self.grid.h ** 2
        size = n_int * N
        ab = np.zeros((2 * N + 1, size), dtype=np.complex128)
        for i in range(n_int):
            block = 2.0 * inv_h2 * np.eye(N) + self.potential.samples[i + 1]
            for r in range(N):
                for c in range(N):
                    row, col = i * N + r, i * N + c
                    ab[N + row - col, col] = block[r, c]
        for col in range(size - N):
            ab[2 * N, col] = -inv_h2          # sub-diagonal block (identity coupling)
            ab[0, col + N] = -inv_h2          # super-diagonal block
        return ab


def assemble(V: MatrixField) -> DiscreteHamiltonian:
    if V.grid.n_points < 3:
        raise ParameterError("grid too small to have interior nodes")
    return DiscreteHamiltonian(potential=V)


def count_below(Hd: DiscreteHamiltonian, shift: float) -> int:
    """Number of eigenvalues strictly below `shift` (Sylvester inertia of the
    block LDL* factorization of Hd - shift*I, processed node by node)."""
    samples = Hd.potential.samples
    h = Hd.grid.h
    for attempt in range(4):
        s = shift + attempt * 1e-12 * max(abs(shift), 1.0)
        count, status, _node = kernels.inertia_count(samples, h, s)
        if status == 0:
            return int(count)
    raise NumericalError(f"pivot breakdown persisted near shift {shift!r} after 3 perturbation retries")


@dataclass(frozen=True)
class Multiplet:
    lam: float            # eigenvalue is -lam, lam > 0
    multiplicity: int
    marginal: bool = False


@dataclass(frozen=True)
class Spectrum:
    """Negative eigenvalues -lam_j clustered into multiplets, ground first."""

    multiplets: tuple
    raw_eigenvalues: tuple  # lam values before clustering, descending
    marginal_floor: float

    @property
    def total_count(self) -> int:
        return sum(m.multiplicity for m in self.multiplets)

    @property
    def is_empty(self) -> bool:
        return not self.multiplets

    def lambdas(self) -> list:
        return [m.lam for m in self.multiplets]


def default_cluster_tol(lam: float) -> float:
    return max(1e-8, 1e-6 * lam)


def negative_spectrum(V: MatrixField, cluster_tol: float | None = None) -> Spectrum:
    """Locate every eigenvalue below 0 by bisection on count_below.

    Raw eigenvalues are resolved to absolute tolerance 1e-10 * max(1, depth
    scale) and merged into a multiplet when consecutive gaps fall below the
    clustering tolerance (default max(1e-8, 1e-6*lam)).
    """
    Hd = assemble(V)
    width = V.grid.width
    floor = MARGINAL_FLOOR_FACTOR * (math.pi / width) ** 2
    total = count_below(Hd, 0.0)
    if total == 0:
        return Spectrum(multiplets=(), raw_eigenvalues=(), marginal_floor=floor)

    vmax = max(V.max_spectral_norm, 1e-30)
    tol = 1e-10 * max(1.0, vmax)
    lo = -vmax * (1.0 + 1e-12) - 1e-12
    c_lo = count_below(Hd, lo)
    for _ in range(8):
        if c_lo == 0:
            break
        lo *= 2.0
        c_lo = count_below(Hd, lo)
    if c_lo != 0:
        raise NumericalError("could not find a shift below the whole spectrum")

    # interval subdivision: (a, b] holds cb - ca eigenvalues
    eigs: list[float] = []
    stack = [(lo, 0.0, 0, total)]
    while stack:
        a, b, ca, cb = stack.pop()
        if cb == ca:
            continue
        if b - a <= tol:
            eigs.extend([0.5 * (a + b)] * (cb - ca))
            continue
        m = 0.5 * (a + b)
        cm = count_below(Hd, m)
        stack.append((a, m, ca, cm))
        stack.append((m, b, cm, cb))

    eigs.sort()                      # ascending eigenvalues: ground state first
    lams = [-e for e in eigs]        # descending lam

    multiplets = []
    i = 0
    while i < len(lams):
        j = i + 1
        acc = [lams[i]]
        while j < len(lams):
            ct = cluster_tol if cluster_tol is not None else default_cluster_tol(lams[i])
            if abs(lams[j] - acc[-1]) < ct:
                acc.append(lams[j])
                j += 1
            else:
                break
        lam = float(np.mean(acc))
        multiplets.append(Multiplet(lam=lam, multiplicity=len(acc), marginal=lam < floor))
        i = j

    return Spectrum(multiplets=tuple(multiplets), raw_eigenvalues=tuple(lams), marginal_floor=floor)


def ground_energy(V: MatrixField) -> float | None:
    """Magnitude lam_1 of the lowest eigenvalue, or None if the spectrum is empty.

    Single bisection for the smallest eigenvalue; cheaper than the full
    spectrum when only a shooting bracket is needed.
    """
    Hd = assemble(V)
    if count_below(Hd, 0.0) == 0:
        return None
    vmax = max(V.max_spectral_norm, 1e-30)
    lo = -vmax * (1.0 + 1e-12) - 1e-12
    for _ in range(8):
        if count_below(Hd, lo) == 0:
            break
        lo *= 2.0
    hi = 0.0
    tol = 1e-12 * max(1.0, vmax)
    while hi - lo > tol:
        m = 0.5 * (lo + hi)
        if count_below(Hd, m) >= 1:
            hi = m
        else:
            lo = m
    return -0.5 * (lo + hi)


def lt_moment(s: Spectrum, p: float) -> float:
    """Sum over multiplets of multiplicity * lam^p."""
    if p <= 0.0:
        raise ParameterError(f"moment power must be > 0, got {p}")
    return float(sum(m.multiplicity * m.lam ** p for m in s.multiplets))


def potential_moment(field: MatrixField, power: int) -> float:
    """Trapezoidal integral of Tr(V(x)^power) over the grid, power in {1, 2}."""
    vals = field.trace_values(power)
    return float(np.trapezoid(vals, dx=field.grid.h))


def ground_vector(V: MatrixField, lam: float, n_iter: int = 6, seed: int = 0) -> np.ndarray:
    """Inverse-iteration eigenvector of the discrete operator near -lam.

    Internal helper for the factorization check; (n, N) array, vanishing at
    the Dirichlet ends, normalized to unit trapezoidal L^2 norm.
    """
    Hd = assemble(V)
    N = V.dim
    n = V.grid.n_points
    shift = -lam * (1.0 + 1e-9) - 1e-13
    ab = Hd.banded()
    ab[N, :] -= shift
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(Hd.size) + 1j * rng.standard_normal(Hd.size)
    v /= np.linalg.norm(v)
    for _ in range(n_iter):
        v = scipy.linalg.solve_banded((N, N), ab, v)
        v /= np.linalg.norm(v)
    phi = np.zeros((n, N), dtype=np.complex128)
    phi[1:-1] = v.reshape(n - 2, N)
    nrm = math.sqrt(float(np.trapezoid(np.sum(np.abs(phi) ** 2, axis=1), dx=V.grid.h)))
    return phi / nrm


# ---------------------------------------------------------------------------
# export

def spectrum_to_dict(s: Spectrum) -> dict:
    return {
        "multiplets": [{"lambda": m.lam, "multiplicity": m.multiplicity} for m in s.multiplets],
        "L": s.total_count,
    }


def write_spectrum_csv(s: Spectrum, path) -> None:
    """One row per eigenvalue (multiplicities expanded), ground first."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "lambda", "multiplicity"])
        j = 1
        for m in s.multiplets:
            for _ in range(m.multiplicity):
                w.writerow([j, repr(m.lam), m.multiplicity])
                j += 1
