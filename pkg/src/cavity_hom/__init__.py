"""Single-photon emission, HOM interference and drive optimisation for cavity-QED sources."""

from .dynamics import (
    CoherenceMatrix,
    PhotonWavefunction,
    TimeGrid,
    Trajectory,
    evolve,
    first_order_coherence,
    lindblad_rhs,
    photon_wavefunction,
    simulate,
)
from .interference import HOMResult, hom_correlation, normalize_coherence, visibility
from .models import (
    GaussianDrive,
    LambdaParams,
    ModelSpec,
    PiecewiseLinearDrive,
    TwoLevelParams,
    ZeroDrive,
    build_lambda,
    build_two_level,
    drive_eval,
)
from .optimizer import OptimizationResult, OptimizerConfig, optimize_drive

__version__ = "0.1.0"
