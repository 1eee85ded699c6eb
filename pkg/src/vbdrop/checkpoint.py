"""Checkpoint container: named parameter arrays plus a versioned JSON header.

Stored as an npz archive.  Float64 arrays round-trip bit-exactly; the header
carries the format version, the layer widths, and the variant needed to
rebuild the network skeleton before the arrays are copied in.
"""

import json

import numpy as np

from .errors import DataFormatError
from .variants import Variant, build_network

FORMAT_VERSION = 1


def save_checkpoint(network, variant, path):
    meta = {
        "format_version": FORMAT_VERSION,
        "widths": network.widths,
        "regularizer": network.regularizer,
        "variant": variant.asdict(),
    }
    arrays = {"__meta__": np.array(json.dumps(meta, sort_keys=True))}
    for (i, name), arr, _ in network.parameters():
        arrays[f"layer{i}.{name}"] = arr
    np.savez(path, **arrays)


def load_checkpoint(path):
    """Rebuild (network, variant) from a checkpoint file."""
    with np.load(path, allow_pickle=False) as data:
        if "__meta__" not in data:
            raise DataFormatError(f"{path}: not a checkpoint (missing header)")
        meta = json.loads(str(data["__meta__"]))
        version = meta.get("format_version")
        if version != FORMAT_VERSION:
            raise DataFormatError(
                f"{path}: unsupported checkpoint format version {version}"
            )
        variant = Variant(**meta["variant"])
        network = build_network(meta["widths"], variant, seed=0)
        for (i, name), arr, _ in network.parameters():
            key = f"layer{i}.{name}"
            if key not in data:
                raise DataFormatError(f"{path}: missing array {key}")
            stored = data[key]
            if stored.shape != arr.shape:
                raise DataFormatError(
                    f"{path}: {key} has shape {stored.shape}, expected {arr.shape}"
                )
            arr[...] = stored
    return network, variant
