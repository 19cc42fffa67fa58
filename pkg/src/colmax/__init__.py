# -*- coding: utf-8 -*-
from .model import MultiVector, Precision, SimilarityKind

__all__ = ["MultiVector", "Precision", "SimilarityKind"]

__author__ = "colmax developers"
__email__ = "colmax-dev@users.noreply.github.com"
__uri__ = "https://github.com/colmax/colmax"
__license__ = "MIT"
__description__ = "Late-interaction multi-vector retrieval and data curation at desk scale"  # noqa: E501
__copyright__ = "Copyright 2026 colmax developers"
__contributors__ = "https://github.com/colmax/colmax/graphs/contributors"
