from .index_file import (
    DocRecord,
    IndexHandle,
    IndexHeader,
    build_index,
    load_index,
)
from .projection import (
    ProjectionMatrix,
    apply_projection,
    fit_projection,
    truncate_dims,
)
from .quantization import QuantizedTokens, quantize_tokens
from .storage import (
    MODEL_PRESETS,
    StorageEstimate,
    estimate_model_storage,
    estimate_storage,
    storage_multiplier,
    storage_ratio,
    storage_table,
)
