from ._core import (
    BodyMoments,
    DiscretePerturbation,
    PerturbedFamily,
    PiecewiseAffineDensity,
    PolyperturbError,
    Polytope,
    SignedAtomicMeasure,
    build_family,
    canonical_density,
    generalized_wasserstein,
    generic_direction,
    isotropic_constant,
    isotropy_defect,
    moments,
    pair,
    stability_report,
    to_isotropic,
    tv_norm,
    wasserstein,
    wasserstein_norm,
)

__all__ = [
    "BodyMoments",
    "DiscretePerturbation",
    "PerturbedFamily",
    "PiecewiseAffineDensity",
    "PolyperturbError",
    "Polytope",
    "SignedAtomicMeasure",
    "build_family",
    "canonical_density",
    "generalized_wasserstein",
    "generic_direction",
    "isotropic_constant",
    "isotropy_defect",
    "moments",
    "pair",
    "stability_report",
    "to_isotropic",
    "tv_norm",
    "wasserstein",
    "wasserstein_norm",
]
