#!/usr/bin/python3
# -----------------------------------------------------------
# Binary checkpoints
#
# layout: magic bytes, format version (uint32 LE), header size (uint64 LE),
# JSON header {config, step, tensors: [{name, dtype, shape, offset, nbytes}]},
# then the raw little-endian tensor data
# -----------------------------------------------------------
import json
import os
import struct
import tempfile
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from app.exceptions import CheckpointError, CheckpointVersionMismatch, CorruptCheckpoint
from app.log import logger


MAGIC = b"NRFFCKPT"
FORMAT_VERSION = 1
PREFIX = struct.Struct("<8sIQ")


@dataclass
class Checkpoint:
    """
    config: dict snapshot of the run configuration
    step: training step the tensors were saved at
    tensors: name -> numpy array (parameters, Adam moments, RNG state)
    """
    config: dict
    step: int
    tensors: Dict[str, np.ndarray] = field(default_factory=OrderedDict)
    version: int = FORMAT_VERSION


def save_checkpoint(path, checkpoint):
    """
    writes `checkpoint` atomically: a temporary file in the same folder renamed over `path`
    """
    table, offset = [], 0
    blobs = []
    for name, array in checkpoint.tensors.items():
        array = np.ascontiguousarray(array)
        data = array.astype(array.dtype.newbyteorder("<"), copy=False).tobytes()
        table.append({"name": name, "dtype": array.dtype.name, "shape": list(array.shape),
                      "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"config": checkpoint.config, "step": int(checkpoint.step),
                         "tensors": table}).encode("utf-8")

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    try:
        with tempfile.NamedTemporaryFile(dir=directory, prefix=".ckpt-", delete=False) as f_out:
            tmp_path = f_out.name
            f_out.write(PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)))
            f_out.write(header)
            for data in blobs:
                f_out.write(data)
        os.replace(tmp_path, path)
    except OSError as error:
        raise CheckpointError(f"cannot write {path}: {error}") from error
    logger.debug("checkpoint at step %s written to %s (%s tensors)", checkpoint.step, path, len(table))


def load_checkpoint(path):
    """
    reads a checkpoint written by save_checkpoint, rejecting other format versions and damaged files
    """
    try:
        with open(path, "rb") as f_in:
            content = f_in.read()
    except OSError as error:
        raise CheckpointError(f"cannot read {path}: {error}") from error

    if len(content) < PREFIX.size:
        raise CorruptCheckpoint(path, "file shorter than its header")
    magic, version, header_size = PREFIX.unpack_from(content)
    if magic != MAGIC:
        raise CorruptCheckpoint(path, "bad magic bytes")
    if version != FORMAT_VERSION:
        raise CheckpointVersionMismatch(path, version, FORMAT_VERSION)
    data_start = PREFIX.size + header_size
    if data_start > len(content):
        raise CorruptCheckpoint(path, "truncated header")
    try:
        header = json.loads(content[PREFIX.size:data_start].decode("utf-8"))
        entries = header["tensors"]
        step = int(header["step"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as error:
        raise CorruptCheckpoint(path, f"unreadable header: {error}") from error

    data = memoryview(content)[data_start:]
    tensors = OrderedDict()
    for entry in entries:
        try:
            dtype = np.dtype(entry["dtype"]).newbyteorder("<")
            shape = tuple(entry["shape"])
            offset, nbytes = int(entry["offset"]), int(entry["nbytes"])
        except (KeyError, TypeError, ValueError) as error:
            raise CorruptCheckpoint(path, f"bad tensor table entry {entry}: {error}") from error
        if nbytes != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize:
            raise CorruptCheckpoint(path, f"tensor {entry['name']} declares {nbytes} bytes for shape {shape}")
        if offset < 0 or offset + nbytes > len(data):
            raise CorruptCheckpoint(path, f"tensor {entry['name']} runs past the end of the file")
        array = np.frombuffer(data[offset:offset + nbytes], dtype=dtype).reshape(shape)
        tensors[entry["name"]] = array.astype(dtype.newbyteorder("="), copy=True)
    return Checkpoint(config=header.get("config", {}), step=step, tensors=tensors, version=version)
