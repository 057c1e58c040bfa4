"""Speed limits on quantum fidelity for time-dependent target subspaces.

A numerical library and CLI that evaluates fidelity speed-limit bounds
(general targets, adiabatic eigenpaths, generator and gap routes, the
uncertainty-function route, Loschmidt echo pairs) and checks them against
exact dense-matrix Schrödinger dynamics at small dimension.
"""

__version__ = "0.1.0"

from . import bounds, dynamics, linalg, projectors, scenarios, verify  # noqa: F401
from .bounds import (  # noqa: F401
    BoundReport,
    UncertaintyInput,
    bound_adiabatic,
    bound_gap,
    bound_general,
    bound_generator,
    bound_loschmidt,
    bound_pfeifer,
    integrand_gap,
    integrand_general,
    integrand_generator,
    integrand_pure,
    threshold_time,
    uncertainty_f,
)
from .dynamics import (  # noqa: F401
    FidelitySeries,
    OperatorPath,
    TimeGrid,
    Trajectory,
    fidelity_series,
    propagate_density,
    propagate_state,
    propagate_unitary,
)
from .projectors import (  # noqa: F401
    ProjectorPath,
    StatePath,
    eigenprojector_path,
    eigenstate_path,
    fictitious_generator,
    interaction_picture_path,
    projector_derivative,
    rank1_derivative_norm,
    static_projector,
    unitary_generated,
)
from .scenarios import (  # noqa: F401
    LoschmidtPair,
    Scenario,
    make_block_rotors,
    make_constant_two_level,
    make_free,
    make_landau_zener,
    make_loschmidt_pair,
    make_random_smooth,
    make_rotating_field,
)
