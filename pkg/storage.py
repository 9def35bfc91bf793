"""
Checkpoint container shared by parameter sets ("BCPM") and optimizer states ("BCPO").

Layout, little-endian: magic (4 bytes), format version (u32), record count (u32), then
per record: name length (u32), UTF-8 name, rank (u32), dims (u64 each), float64 values.
"""
import os
import struct
from collections import OrderedDict
from typing import Dict, Tuple

import numpy as np

from config import settings
from exceptions import StorageError
from models.optim import OptState, opt_state_from_records, opt_state_records
from models.params import ParamSet

PARAMS_MAGIC = b"BCPM"
OPTIMIZER_MAGIC = b"BCPO"


def encode_records(records: Dict[str, np.ndarray], magic: bytes = PARAMS_MAGIC) -> bytes:
    chunks = [magic, struct.pack("<II", settings.CHECKPOINT_FORMAT_VERSION, len(records))]
    for name, values in records.items():
        encoded_name = name.encode("utf-8")
        array = np.ascontiguousarray(values, dtype="<f8")
        chunks.append(struct.pack("<I", len(encoded_name)))
        chunks.append(encoded_name)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(array.tobytes(order="C"))
    return b"".join(chunks)


def decode_records(data: bytes, magic: bytes = PARAMS_MAGIC, path: str = "<memory>") -> "OrderedDict[str, np.ndarray]":
    if data[:4] != magic:
        raise StorageError(f"Bad magic in {path}", path=path, code="BAD_MAGIC")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != settings.CHECKPOINT_FORMAT_VERSION:
            raise StorageError(f"Unsupported checkpoint version {version} in {path}", path=path, code="BAD_VERSION")
        offset = 12
        records: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for _ in range(count):
            (name_length,) = struct.unpack_from("<I", data, offset)
            offset += 4
            name = data[offset:offset + name_length].decode("utf-8")
            offset += name_length
            (rank,) = struct.unpack_from("<I", data, offset)
            offset += 4
            dims: Tuple[int, ...] = struct.unpack_from(f"<{rank}Q", data, offset)
            offset += 8 * rank
            size = int(np.prod(dims)) if rank else 1
            if offset + 8 * size > len(data):
                raise StorageError(f"Truncated record '{name}' in {path}", path=path, code="TRUNCATED")
            values = np.frombuffer(data, dtype="<f8", count=size, offset=offset).astype(np.float64).reshape(dims)
            offset += 8 * size
            records[name] = values
    except (struct.error, UnicodeDecodeError) as error:
        raise StorageError(f"Corrupt checkpoint {path}: {error}", path=path, code="CORRUPT") from None
    if offset != len(data):
        raise StorageError(f"Trailing bytes in {path}", path=path, code="CORRUPT")
    return records


def encode_params(params: ParamSet) -> bytes:
    return encode_records(params.records, PARAMS_MAGIC)


def decode_params(data: bytes, path: str = "<memory>") -> ParamSet:
    params = ParamSet()
    for name, values in decode_records(data, PARAMS_MAGIC, path).items():
        params.add(name, values)
    return params


def _write_atomic(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    temporary = f"{path}.tmp"
    with open(temporary, "wb") as handle:
        handle.write(data)
    os.replace(temporary, path)


def _read(path: str) -> bytes:
    try:
        with open(path, "rb") as handle:
            return handle.read()
    except OSError as error:
        raise StorageError(f"Cannot read {path}: {error.strerror}", path=path, code="MISSING_FILE") from None


def save_params(params: ParamSet, path: str) -> str:
    params.validate()
    _write_atomic(path, encode_params(params))
    return path


def load_params(path: str) -> ParamSet:
    return decode_params(_read(path), path)


def save_opt_state(opt: OptState, path: str) -> str:
    _write_atomic(path, encode_records(opt_state_records(opt), OPTIMIZER_MAGIC))
    return path


def load_opt_state(path: str) -> OptState:
    return opt_state_from_records(decode_records(_read(path), OPTIMIZER_MAGIC, path))


def save_text(text: str, path: str) -> str:
    _write_atomic(path, text.encode("utf-8"))
    return path


def load_text(path: str) -> str:
    try:
        return _read(path).decode("utf-8")
    except UnicodeDecodeError:
        raise StorageError(f"{path} is not UTF-8 text", path=path, code="CORRUPT") from None
