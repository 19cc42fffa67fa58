from .types import (
    MultiVector,
    Precision,
    SimilarityKind,
    Vector,
    l2_normalize_rows,
    validate_multivector,
    validate_vector,
)
