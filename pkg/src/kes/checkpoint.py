"""Model checkpoints.

A checkpoint is an uncompressed zip archive readable by ``numpy.load``:

* ``meta.json`` holds ``format_version``, the model dims and the list of
  tensor names with shapes;
* every tensor is stored as ``<name>.npy`` (float64, little endian).

Entry timestamps are fixed so that equal parameters give byte-identical
files.
"""

from __future__ import annotations

import io
import json
import zipfile

import numpy as np

from .model import ClassifierParams, ModelParams
from .rgcn import EncoderParams, GcnLayer
from .text_encoder import BaselineEncoderParams

FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


class CheckpointError(ValueError):
    pass


def _write_entry(zf: zipfile.ZipFile, name: str, data: bytes):
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_checkpoint(path, params: ModelParams, extra: dict | None = None) -> None:
    tensors = params.named_tensors()
    meta = {
        "format_version": FORMAT_VERSION,
        "dims": params.dims(),
        "tensors": {k: list(v.shape) for k, v in tensors.items()},
    }
    if extra:
        meta["extra"] = extra
    with zipfile.ZipFile(path, "w") as zf:
        _write_entry(zf, "meta.json", json.dumps(meta, sort_keys=True, indent=1).encode())
        for name, arr in tensors.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr, dtype="<f8"), allow_pickle=False)
            _write_entry(zf, f"{name}.npy", buf.getvalue())


def read_meta(path) -> dict:
    with zipfile.ZipFile(path) as zf:
        return json.loads(zf.read("meta.json"))


def load_checkpoint(path) -> ModelParams:
    try:
        zf = zipfile.ZipFile(path)
    except (zipfile.BadZipFile, OSError) as exc:
        raise CheckpointError(f"{path}: not a checkpoint ({exc})") from None
    with zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format_version") != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {meta.get('format_version')}")
        t = {}
        for name in meta["tensors"]:
            with zf.open(f"{name}.npy") as fh:
                t[name] = np.lib.format.read_array(io.BytesIO(fh.read()), allow_pickle=False)
    dims = meta["dims"]
    graph = None
    if dims["use_graph"]:
        layers = []
        for i in range(dims["num_layers"]):
            layers.append(GcnLayer({r: t[f"graph.layer{i}.{r}"] for r in dims["edge_types"]}))
        graph = EncoderParams(layers, t["graph.post_linear"], t["graph.readout"], dims["post_linear_position"])
    return ModelParams(BaselineEncoderParams(t["text.projection"]), graph,
                       ClassifierParams(t["classifier.hidden"], t["classifier.output"]))


def check_compatible(params: ModelParams, expected: dict) -> None:
    """Raise :class:`CheckpointError` if any dim in ``expected`` differs."""
    dims = params.dims()
    bad = {k: (dims.get(k), v) for k, v in expected.items() if dims.get(k) != v}
    if bad:
        detail = ", ".join(f"{k}: checkpoint {a!r} vs config {b!r}" for k, (a, b) in sorted(bad.items()))
        raise CheckpointError(f"incompatible checkpoint dims ({detail})")
