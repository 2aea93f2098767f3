"""Grids, matrix potential fields, generators, truncation and serialization.

A potential is stored as dense per-node N x N hermitian samples on a uniform
grid that truncates the line to a computational box.  Generators produce
negative-semidefinite, compactly supported fields; transformed fields (which
decay but need not be supported or sign-definite) use the weaker MatrixField
container.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DecayError, ParameterError

HERMITICITY_RTOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform lattice x_i = x_min + i*h on [x_min, x_max]."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 3:
            raise ParameterError(f"n_points must be >= 3, got {self.n_points}")
        if not self.x_min < self.x_max:
            raise ParameterError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.x_min + np.arange(self.n_points) * self.h
        x.setflags(write=False)
        return x

    def index_near(self, x: float) -> int:
        i = int(round((x - self.x_min) / self.h))
        return min(max(i, 0), self.n_points - 1)

    def contains_support(self, a: float) -> bool:
        return self.x_min < -a and self.x_max > a


def make_uniform_grid(x_min: float, x_max: float, n_points: int) -> Grid:
    return Grid(float(x_min), float(x_max), int(n_points))


def _check_hermitian(samples: np.ndarray, what: str) -> float:
    defect = np.linalg.norm(samples - samples.conj().swapaxes(-1, -2), axis=(1, 2))
    scale = np.maximum(1.0, np.linalg.norm(samples, axis=(1, 2)))
    worst = float(np.max(defect / scale)) if len(defect) else 0.0
    if worst > HERMITICITY_RTOL:
        raise ParameterError(f"{what}: hermiticity defect {worst:.3e} exceeds {HERMITICITY_RTOL:.0e}")
    return worst


@dataclass(frozen=True)
class MatrixField:
    """Grid-sampled hermitian N x N matrix field (no support constraint)."""

    grid: Grid
    dim: int
    samples: np.ndarray  # (n_points, dim, dim) complex128

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError(f"dim must be >= 1, got {self.dim}")
        samples = np.ascontiguousarray(self.samples, dtype=np.complex128)
        expected = (self.grid.n_points, self.dim, self.dim)
        if samples.shape != expected:
            raise ParameterError(f"samples shape {samples.shape} != {expected}")
        _check_hermitian(samples, type(self).__name__)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @cached_property
    def node_norms(self) -> np.ndarray:
        """Frobenius norm of the sample at each node."""
        return np.linalg.norm(self.samples, axis=(1, 2))

    @cached_property
    def max_spectral_norm(self) -> float:
        """max_x ||V(x)||_2 (hermitian samples: largest |eigenvalue|)."""
        if self.dim == 1:
            return float(np.max(np.abs(self.samples[:, 0, 0].real)))
        eigs = np.linalg.eigvalsh(self.samples)
        return float(np.max(np.abs(eigs)))

    def trace_values(self, power: int = 1) -> np.ndarray:
        """Re Tr(V(x)^power) per node, power in {1, 2}."""
        if power == 1:
            return np.einsum("ijj->i", self.samples).real.copy()
        if power == 2:
            return np.einsum("ijk,ikj->i", self.samples, self.samples).real.copy()
        raise ParameterError(f"power must be 1 or 2, got {power}")


@dataclass(frozen=True)
class MatrixPotential(MatrixField):
    """Compactly supported field: samples vanish identically for |x| > a."""

    support_half_width: float = 0.0  # a

    def __post_init__(self):
        super().__post_init__()
        a = self.support_half_width
        if not a > 0.0:
            raise ParameterError(f"support_half_width must be > 0, got {a}")
        if not self.grid.contains_support(a):
            raise ParameterError(
                f"grid [{self.grid.x_min}, {self.grid.x_max}] does not strictly contain [-{a}, {a}]"
            )
        outside = np.abs(self.grid.nodes) > a
        if np.any(self.samples[outside] != 0.0):
            raise ParameterError("samples must vanish exactly at nodes with |x| > a")


def zero_potential(dim: int, a: float, grid: Grid) -> MatrixPotential:
    samples = np.zeros((grid.n_points, dim, dim), dtype=np.complex128)
    return MatrixPotential(grid=grid, dim=dim, samples=samples, support_half_width=a)


def square_well(depth: float, a: float, dim: int, grid: Grid) -> MatrixPotential:
    """V(x) = -depth * I for |x| < a, zero outside.

    A node falling exactly on |x| = a gets the jump mean -depth/2: on-node
    discontinuities sampled at the mean keep both the finite-difference
    operator and the interpolated ODE propagation second-order accurate.
    """
    if depth <= 0.0:
        raise ParameterError(f"depth must be > 0, got {depth}")
    return diagonal_well([depth] * dim, a, grid)


def diagonal_well(depths, a: float, grid: Grid) -> MatrixPotential:
    """diag(-depths) * chi_[-a,a], with the same edge-node mean convention."""
    depths = np.asarray(depths, dtype=float)
    if depths.ndim != 1 or depths.size < 1:
        raise ParameterError("depths must be a non-empty 1D sequence")
    if np.any(depths <= 0.0):
        raise ParameterError("all well depths must be > 0")
    if not a > 0.0:
        raise ParameterError(f"a must be > 0, got {a}")
    if not grid.contains_support(a):
        raise ParameterError(f"support [-{a}, {a}] exceeds grid [{grid.x_min}, {grid.x_max}]")
    dim = depths.size
    x = grid.nodes
    edge_tol = 1e-12 * max(1.0, a)
    profile = np.where(np.abs(x) < a - edge_tol, 1.0, 0.0)
    profile[np.abs(np.abs(x) - a) <= edge_tol] = 0.5
    samples = np.zeros((grid.n_points, dim, dim), dtype=np.complex128)
    for k, d in enumerate(depths):
        samples[:, k, k] = -d * profile
    return MatrixPotential(grid=grid, dim=dim, samples=samples, support_half_width=a)


def bump(t: np.ndarray) -> np.ndarray:
    """Standard C-infinity bump exp(-1/(1-t^2)) for |t| < 1, zero outside."""
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - ti * ti))
    return out


def random_potential(
    seed: int,
    dim: int,
    a: float,
    strength: float,
    grid: Grid,
    diagonal: bool = False,
) -> MatrixPotential:
    """Seeded smooth random potential V(x) = -strength * eta(x/a) * B(x) B(x)*.

    B entries are low-order trigonometric polynomials with coefficients drawn
    from numpy's seeded default generator, entry (0,0) first, so the scalar
    generator and the (1,1) entry of a diagonal construction share draws.
    """
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    if strength <= 0.0:
        raise ParameterError(f"strength must be > 0, got {strength}")
    if not a > 0.0:
        raise ParameterError(f"a must be > 0, got {a}")
    if not grid.contains_support(a):
        raise ParameterError(f"support [-{a}, {a}] exceeds grid [{grid.x_min}, {grid.x_max}]")

    rng = np.random.default_rng(seed)
    x = grid.nodes
    n_harm = 3  # constant + two harmonics per entry
    omega = math.pi / (2.0 * a)
    basis = [np.ones_like(x)]
    for m in range(1, n_harm):
        basis.append(np.cos(m * omega * x))
        basis.append(np.sin(m * omega * x))
    basis = np.stack(basis)  # (2*n_harm - 1, n)
    n_coeff = basis.shape[0]
    # dim-independent entry scale: the (0,0) entry of a diagonal construction
    # is draw-for-draw identical to the scalar generator with the same seed
    norm = 1.0 / math.sqrt(n_coeff)

    def draw_entry():
        c = rng.standard_normal(n_coeff) + 1j * rng.standard_normal(n_coeff)
        return norm * (c @ basis)

    B = np.zeros((grid.n_points, dim, dim), dtype=np.complex128)
    if diagonal:
        for j in range(dim):
            B[:, j, j] = draw_entry()
    else:
        for j in range(dim):
            for k in range(dim):
                B[:, j, k] = draw_entry()

    envelope = strength * bump(x / a)
    samples = -envelope[:, None, None] * (B @ B.conj().swapaxes(1, 2))
    # exact zeros outside the support despite rounding in B
    samples[np.abs(x) >= a] = 0.0
    samples = 0.5 * (samples + samples.conj().swapaxes(1, 2))
    return MatrixPotential(grid=grid, dim=dim, samples=samples, support_half_width=a)


def truncate_support(field: MatrixField, threshold: float):
    """Zero a decaying field outside the smallest symmetric interval [-c, c].

    Returns (potential, cutoff_radius, tail_mass) where tail_mass is the
    discarded quadratic mass integral of Tr(field^2) over |x| > c.  Raises
    DecayError when the field has not decayed below the threshold inside the
    grid (outer-10%-of-nodes guard on each side).
    """
    if threshold <= 0.0:
        raise ParameterError(f"threshold must be > 0, got {threshold}")
    grid = field.grid
    x = grid.nodes
    norms = field.node_norms
    k = max(1, int(0.1 * grid.n_points))
    outer = np.concatenate([norms[:k], norms[-k:]])
    if np.max(outer) >= 10.0 * threshold:
        raise DecayError(
            f"field norm {np.max(outer):.3e} in the outer nodes exceeds 10*threshold; domain too small"
        )
    above = norms >= threshold
    if not np.any(above):
        c = 0.0
    else:
        c = float(np.max(np.abs(x[above])))
    if c >= min(-grid.x_min, grid.x_max):
        raise DecayError("no symmetric cutoff interval lies strictly inside the grid")

    outside = np.abs(x) > c
    tr2 = field.trace_values(2)
    tail = np.where(outside, tr2, 0.0)
    tail_mass = float(np.trapezoid(tail, dx=grid.h))

    samples = field.samples.copy()
    samples[outside] = 0.0
    a_out = max(c, grid.h)
    pot = MatrixPotential(grid=grid, dim=field.dim, samples=samples, support_half_width=a_out)
    return pot, c, tail_mass


# ---------------------------------------------------------------------------
# serialization

def potential_to_dict(V: MatrixPotential) -> dict:
    n, N = V.grid.n_points, V.dim
    flat = V.samples.reshape(n, N * N)
    return {
        "grid": {"x_min": V.grid.x_min, "x_max": V.grid.x_max, "n_points": V.grid.n_points},
        "dim": V.dim,
        "a": V.support_half_width,
        "samples": [[[z.real, z.imag] for z in row] for row in flat],
    }


def potential_from_dict(doc: dict) -> MatrixPotential:
    try:
        g = doc["grid"]
        grid = make_uniform_grid(g["x_min"], g["x_max"], g["n_points"])
        dim = int(doc["dim"])
        a = float(doc["a"])
        raw = np.asarray(doc["samples"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParameterError(f"malformed potential document: {exc}") from exc
    if raw.shape != (grid.n_points, dim * dim, 2):
        raise ParameterError(f"samples array has shape {raw.shape}, expected ({grid.n_points}, {dim * dim}, 2)")
    samples = (raw[..., 0] + 1j * raw[..., 1]).reshape(grid.n_points, dim, dim)
    return MatrixPotential(grid=grid, dim=dim, samples=samples, support_half_width=a)


def save_potential(V: MatrixPotential, path) -> None:
    with open(path, "w") as fh:
        json.dump(potential_to_dict(V), fh)


def load_potential(path) -> MatrixPotential:
    with open(path) as fh:
        return potential_from_dict(json.load(fh))


def write_potential_csv(field: MatrixField, path) -> None:
    """Per-node x, Tr V, Tr V^2 for plotting."""
    tr1 = field.trace_values(1)
    tr2 = field.trace_values(2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "trace", "trace_sq"])
        for x, t1, t2 in zip(field.grid.nodes, tr1, tr2):
            w.writerow([repr(float(x)), repr(float(t1)), repr(float(t2))])
