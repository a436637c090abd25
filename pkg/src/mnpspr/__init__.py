"""Symmetrized boundary-operator spectra and surface-plasmon localization.

Library layout:
  surface    - star-shaped grids, harmonic transforms, surface calculus
  specfun    - radial special functions, vector spherical harmonics
  potentials - layer-potential assembly, subspace operator actions
  spectral   - symmetrized eigensolves, grams, identity residuals
  mie        - closed-form sphere backend (the oracle layer)
  plasmon    - weak-resonance modes, fields, localization statistics
  scatter    - scaled transmission system and resonance sweeps
  cli        - batch front end (python -m mnpspr.cli)
"""

__version__ = "1.0.0"

from .surface import (
    ShCoeffs,
    SurfaceGrid,
    TangentField,
    build_surface,
    perturbed_sphere,
    sh_analysis,
    sh_synthesis,
    sphere_surface,
    surface_diff,
    tubular_distance,
)
from .specfun import RadialKind, VectorHarmonic, radial, radial_asymptotic_ratio, vector_sph, ynm
from .potentials import (
    MaterialConfig,
    OperatorMatrix,
    apply_N,
    apply_Q,
    assemble_correction,
    assemble_scalar,
    mnp_curl_apply,
    mnp_grad_apply,
    offboundary_eval,
    scalar_operators,
)
from .spectral import (
    SpectralSet,
    calderon_residual,
    gram,
    mnp_spectra,
    norm_equivalence_report,
    np_spectrum,
    self_adjointness_residual,
    subspace_spectrum,
)
from .mie import SphereMode, exact_sphere_potential, mode_tangent_field, multipole, sphere_mnp_eigenvalue
from .plasmon import (
    DecayReport,
    PlasmonMode,
    almost_sure_statistic,
    localization_scan,
    plasmon_field,
    resonance_tau,
)
from .scatter import (
    BlockSystem,
    RHSVector,
    assemble_system,
    dipole_incident_trace,
    eval_scattered_fields,
    solve_scatter,
    weak_resonance_indicator,
)
