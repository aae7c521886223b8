"""Self-describing binary persistence for trained policies.

Layout: 8 magic bytes, uint32 format version, uint32 header length, a JSON
header describing each network (layer sizes, head, extra parameter shapes)
plus deployment constants, then all parameters as little-endian float64 in
declaration order. A JSON manifest sidecar records hyperparameters and the
training seed.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .nets import DenseNet

MAGIC = b"SHEPPOL1"
FORMAT_VERSION = 1


class PolicyBundle:
    """Named networks plus free parameter arrays and deployment constants."""

    def __init__(self, algorithm: str, nets: dict[str, DenseNet],
                 extras: dict[str, np.ndarray] | None = None,
                 constants: dict | None = None):
        self.algorithm = algorithm
        self.nets = nets
        self.extras = extras or {}
        self.constants = constants or {}

    def __eq__(self, other):
        if not isinstance(other, PolicyBundle):
            return NotImplemented
        if self.algorithm != other.algorithm or self.constants != other.constants:
            return False
        if set(self.nets) != set(other.nets) or set(self.extras) != set(other.extras):
            return False
        for k, net in self.nets.items():
            o = other.nets[k]
            if net.sizes != o.sizes or net.head != o.head:
                return False
            for a, b in zip(net.params, o.params):
                if not np.array_equal(a, b):
                    return False
        return all(np.array_equal(self.extras[k], other.extras[k])
                   for k in self.extras)


def save_policy(path, bundle: PolicyBundle, manifest: dict | None = None):
    path = Path(path)
    header = {
        "algorithm": bundle.algorithm,
        "constants": bundle.constants,
        "nets": [
            {"name": name, "sizes": net.sizes, "head": net.head}
            for name, net in bundle.nets.items()
        ],
        "extras": [
            {"name": name, "shape": list(arr.shape)}
            for name, arr in bundle.extras.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for net in bundle.nets.values():
            for p in net.params:
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
        for arr in bundle.extras.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    if manifest is not None:
        with open(manifest_path(path), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_policy(path) -> PolicyBundle:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path} is not a policy weights file")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported weights format version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        raw = fh.read()
    data = np.frombuffer(raw, dtype="<f8")
    pos = 0
    nets = {}
    for spec in header["nets"]:
        sizes = list(spec["sizes"])
        ws, bs = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            ws.append(data[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in).copy())
            pos += fan_out * fan_in
            bs.append(data[pos:pos + fan_out].copy())
            pos += fan_out
        nets[spec["name"]] = DenseNet(sizes, ws, bs, spec["head"])
    extras = {}
    for spec in header["extras"]:
        n = int(np.prod(spec["shape"])) if spec["shape"] else 1
        extras[spec["name"]] = data[pos:pos + n].reshape(spec["shape"]).copy()
        pos += n
    if pos != data.size:
        raise ValueError("trailing bytes in weights file")
    return PolicyBundle(header["algorithm"], nets, extras, header["constants"])


def manifest_path(weights_path) -> Path:
    return Path(str(weights_path) + ".manifest.json")


def load_manifest(weights_path) -> dict:
    with open(manifest_path(weights_path)) as fh:
        return json.load(fh)
