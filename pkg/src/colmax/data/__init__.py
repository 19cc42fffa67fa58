from .data_object import DataObject
from .data_utils import load_json, save_json
from .qrels import Qrels, RunResult
