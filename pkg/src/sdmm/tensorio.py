"""Reading and writing integer tensors for the command-line tools.

Two formats are accepted: numpy ``.npy`` files and JSON documents of the form
``{"shape": [...], "values": [...]}`` with values in row-major order.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class TensorFormatError(ValueError):
    """A tensor file is unreadable or holds values of the wrong kind."""


def load_tensor(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        if path.suffix == ".npy":
            arr = np.load(path, allow_pickle=False)
        elif path.suffix == ".json":
            doc = json.loads(path.read_text())
            arr = np.array(doc["values"]).reshape(doc["shape"])
        else:
            raise TensorFormatError(f"{path}: expected a .npy or .json tensor")
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise TensorFormatError(f"{path}: malformed tensor file ({exc})") from exc
    except ValueError as exc:
        if isinstance(exc, TensorFormatError):
            raise
        raise TensorFormatError(f"{path}: malformed tensor file ({exc})") from exc
    if arr.dtype.kind not in "iub":
        if arr.dtype.kind == "f" and arr.size and np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        elif arr.size:
            raise TensorFormatError(f"{path}: tensor must hold integers, found {arr.dtype}")
    return arr.astype(np.int64)


def check_signed_range(arr: np.ndarray, bits: int, what: str):
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise TensorFormatError(f"{what} must lie in [{lo}, {hi}] for {bits}-bit values; "
                                f"found [{arr.min()}, {arr.max()}]")


def save_tensor(path, arr: np.ndarray):
    path = Path(path)
    arr = np.asarray(arr, dtype=np.int64)
    if path.suffix == ".json":
        doc = {"shape": list(arr.shape), "values": arr.ravel().tolist()}
        path.write_text(json.dumps(doc, sort_keys=True) + "\n")
    else:
        np.save(path, arr, allow_pickle=False)
