"""Negative spectra of one-dimensional matrix Schrodinger operators,
commutation-method eigenvalue stripping, and sharp Lieb-Thirring checks."""

from .errors import (
    BracketError,
    DecayError,
    EmptySpectrumSignal,
    InvalidStateError,
    NumericalError,
    ParameterError,
    SpectralStripError,
)
from .kernels import BACKEND
from .lattice import (
    Grid,
    MatrixField,
    MatrixPotential,
    diagonal_well,
    load_potential,
    make_uniform_grid,
    random_potential,
    save_potential,
    square_well,
    truncate_support,
    zero_potential,
)
from .spectral import (
    DiscreteHamiltonian,
    Multiplet,
    Spectrum,
    assemble,
    count_below,
    ground_energy,
    lt_moment,
    negative_spectrum,
    potential_moment,
)
from .darboux import (
    GroundState,
    MatrixSolutionField,
    RiccatiField,
    closed_form_F_free,
    darboux_transform,
    factorization_residual,
    propagate_M,
    propagate_riccati,
    shoot_ground_state,
    trace_identity_residual,
)
from .stripping import (
    StripStep,
    StrippingTrace,
    half_moment_bounds,
    strip_all,
    strip_once,
    verify_theorem1,
)

__version__ = "0.1.0"
