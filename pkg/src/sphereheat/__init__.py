"""Heat kernels on hyperspheres and a kernel SVM pipeline built on them."""

__version__ = "0.1.0"

from .exact import (
    ExactKernelParams,
    TruncationPolicy,
    g_exact,
    k_exact,
    pde_oracle,
    self_similarity_bound_check,
    sweet_spot_time,
)
from .geometry import SphereMap, cosine_similarity, geodesic_distance, sphere_map, surface_area
from .kernels import GramMatrix, KernelKind, KernelSpec, gram_matrix, kernel_eval, psd_check
from .parametrix import ParametrixParams, g_prx, k_prx, u0, u1, u2
from .svm import SvmModel, SvmProblem, generalization_bound, predict, train, train_multiclass, vc_estimate

__all__ = [
    "ExactKernelParams",
    "GramMatrix",
    "KernelKind",
    "KernelSpec",
    "ParametrixParams",
    "SphereMap",
    "SvmModel",
    "SvmProblem",
    "TruncationPolicy",
    "cosine_similarity",
    "g_exact",
    "g_prx",
    "generalization_bound",
    "geodesic_distance",
    "gram_matrix",
    "k_exact",
    "k_prx",
    "kernel_eval",
    "pde_oracle",
    "predict",
    "psd_check",
    "self_similarity_bound_check",
    "sphere_map",
    "surface_area",
    "sweet_spot_time",
    "train",
    "train_multiclass",
    "u0",
    "u1",
    "u2",
    "vc_estimate",
]
