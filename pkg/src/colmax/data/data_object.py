import logging
from abc import ABC

from ..logger import LOGGER_NAME
from .data_utils import sizeof

logger = logging.getLogger(LOGGER_NAME)


class DataObject(ABC):
    """Something colmax persists to disk and reads back."""

    @classmethod
    def load(cls, fpath: str):
        raise NotImplementedError()

    def save(self, fpath: str) -> str:
        raise NotImplementedError()

    @property
    def mem_size(self):
        if not hasattr(self, "_mem"):
            self._mem = sizeof(self)
        return self._mem
