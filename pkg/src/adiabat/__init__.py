"""Adiabatic approximation for weakly open quantum systems.

Simulation library and CLI for time-dependent Lindblad dynamics: exact
evolution, the projector-filtered adiabatic approximation, its rotated-frame
block form and Lindblad re-factorization, complete-positivity certification,
and the two shipped model systems (a holonomic rotation gate exposed to
decoherence, and a random rotating-frame decoherence model).
"""

from . import errors
from .errors import *  # noqa: F401,F403  (exception types)
from .linalg import (
    hermitian_eigendecompose,
    is_hermitian,
    is_psd,
    is_unitary,
    matrix_exponential,
    psd_sqrt,
    sandwich_superop,
    unvec,
    vec,
)
from .spectral import (
    HamiltonianFamily,
    SpectralDecomposition,
    TransportFrame,
    build_transport_frame,
    decompose_at,
    decompose_on_grid,
    geometric_term,
    projector_derivative,
)
from .resonance import (
    CrossingCase,
    ResonanceTensor,
    compute_resonance_tensor,
    gap_function,
)
from .generators import (
    ApproximateGenerator,
    ExactGenerator,
    LindbladDissipator,
    LindbladFactorization,
    approximate_generator,
    choi_matrix,
    cp_check,
    exact_generator,
    filtered_dissipator_superop,
    lindblad_factorize,
    rotated_block_generator,
)
from .propagation import (
    Trajectory,
    hs_error_max,
    intensity_loss,
    normalized_fidelity,
    propagate_piecewise_exp,
    propagate_rk4,
)
from . import models

__version__ = "0.1.0"
