"""Co-prime array DOA estimation toolkit.

Simulates co-prime array snapshots, extracts difference-coarray
pseudo-spectrum features, and trains deterministic and variational
(Bayesian) neural networks that map pseudo-spectra to multi-hot spatial
spectra on an angle grid.
"""

from .array_model import (
    CoprimeGeometry,
    SnapshotMatrix,
    SourceScenario,
    build_geometry,
    simulate_snapshots,
    steering_vector,
)
from .coarray import (
    AngleGrid,
    CoarrayVector,
    CovarianceMatrix,
    PseudoSpectrum,
    VirtualManifold,
    analytic_covariance,
    analytic_pseudo_spectrum,
    extract_features,
    normalize_spectrum,
    pseudo_spectrum,
    sample_covariance,
    select_coarray,
    spectrum_to_csv,
    vectorize_covariance,
    virtual_manifold,
)

__version__ = "0.1.0"
