"""Time-domain meshless Maxwell solver for Drude-dispersive 2D cavities.

Fields are expanded either in divergence-free matrix-valued RBF shape
functions or in ordinary scalar RBF shapes, marched with leapfrog curl
updates and closed with auxiliary-differential-equation recursions.
"""

from .config import ExperimentConfig, bundled_config, load_config, parse_config, serialize_config
from .constants import C0, EPS0, MU0
from .diagnostics import (
    ChargeField,
    Peak,
    SpectrumResult,
    charge_density,
    concentration_ratio,
    relative_error,
    spectrum,
    spurious_mode_scan,
)
from .drude import (
    AdeCoefficients,
    DrudeMaterial,
    compute_coefficients,
    eval_drude_permeability,
    eval_drude_permittivity,
    update_E_from_D,
    update_H_from_B,
)
from .errors import *  # noqa: F401,F403
from .experiment import compare_modes, run_experiment
from .kernel import KernelParams
from .nodes import NodeCloud, Region, SupportTable, build_cavity_cloud, neighbors
from .shapes import (
    CurlStencils,
    DivergenceFreeRBFInterpolator,
    ScalarRBFInterpolator,
    ScalarShapeSet,
    VectorShapeSet,
    assemble_curl_stencils,
    build_scalar_shapes,
    build_stencils,
    build_vector_shapes,
)
from .solver import FieldState, ProbeRecord, SolverConfig, SourceSpec, estimate_stable_dt, run, step

__version__ = "0.1.0"
