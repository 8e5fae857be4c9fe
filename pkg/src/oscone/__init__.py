"""Tensor products of finite-dimensional operator systems.

Schur and maximal tensor cones, certified cone membership through a built-in
conic solver, factorization of maximal-cone elements through matrix algebras,
and a nuclearity detector.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionMismatch,
    Malformed,
    NotHermitian,
    NotInMaxCone,
    NotPositive,
    NotSelfAdjoint,
    OsconeError,
    PreconditionViolated,
    SizeMismatch,
)
from .verdict import ConeVerdict, Verdict  # noqa: E402
from .opsys import (  # noqa: E402
    DualSystem,
    OperatorSystem,
    SystemMatrix,
    builtin_system,
    level_positive,
    make_system,
)
from .tensor import (  # noqa: E402
    MaxConeCertificate,
    MaxConeWitness,
    SchurDecomposition,
    TensorElement,
    compress_kron,
    decompose_as_schur,
    kron_as_schur,
    schur_product,
)
from .membership import (  # noqa: E402
    NormBracket,
    max_cone_membership,
    max_cone_membership_level,
    min_cone_membership,
    osy_max_norm,
    schur_contraction_check,
)
from .factorization import (  # noqa: E402
    FactorizationPair,
    factor_through_matrices,
    nuclearity_test,
    reconstruct_membership,
)

__all__ = [
    "__version__",
    "ConeVerdict",
    "DimensionMismatch",
    "DualSystem",
    "FactorizationPair",
    "Malformed",
    "MaxConeCertificate",
    "MaxConeWitness",
    "NormBracket",
    "NotHermitian",
    "NotInMaxCone",
    "NotPositive",
    "NotSelfAdjoint",
    "OperatorSystem",
    "OsconeError",
    "PreconditionViolated",
    "SchurDecomposition",
    "SizeMismatch",
    "SystemMatrix",
    "TensorElement",
    "Verdict",
    "builtin_system",
    "compress_kron",
    "decompose_as_schur",
    "factor_through_matrices",
    "kron_as_schur",
    "level_positive",
    "make_system",
    "max_cone_membership",
    "max_cone_membership_level",
    "min_cone_membership",
    "nuclearity_test",
    "osy_max_norm",
    "reconstruct_membership",
    "schur_contraction_check",
    "schur_product",
]
