import json
import pickle
from math import floor, log
from typing import Dict, Optional, Union

from ..errors import IoFailure


def save_json(fpath: str, data_dict: Dict):
    try:
        with open(fpath, "w") as f:
            json.dump(data_dict, fp=f, indent=2)
    except OSError as e:
        raise IoFailure(f"cannot write {fpath}: {e}") from e


def load_json(fpath: str) -> Dict:
    try:
        with open(fpath, "r") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise IoFailure(f"cannot read {fpath}: {e}") from e


def format_bytes_to_human_readable(bytes):
    lg = 0 if bytes <= 0 else min(floor(log(bytes, 1024)), 5)
    units = ["B", "KiB", "MiB", "GiB", "TiB", "PiB"]
    return f"{round(bytes / 1024 ** lg, 2)} {units[int(lg)]}"


def sizeof(obj, human_readable: Optional[bool] = True) -> Union[str, int]:
    """Estimates total memory usage of (possibly nested) `obj`.
    Does NOT handle circular object references!
    """
    bytes = len(pickle.dumps(obj))
    if human_readable:
        return format_bytes_to_human_readable(bytes)  # str
    else:
        return bytes  # int
