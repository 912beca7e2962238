"""Model bundle persistence.

A bundle collects the fitted basis, the per-latent GPR recognition model,
the likelihood network (plus its input scaler) and provenance metadata in a
single file.  The container is a small custom binary format: a magic tag, a
JSON header with sorted keys, then the raw float64 array payload.  Nothing
in it depends on write time, so retraining with the same seed produces a
byte-identical file.

Cached GPR factorizations are not stored; they are recomputed on load from
the stored hyperparameters and training data, which reproduces them
exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gpr import ArdSeKernel, build_gpr_model
from .liknet import LikelihoodNet, MlpArchitecture, Scaler
from .pod import PodBasis
from .recognition import LatentRecognition

__all__ = ["ModelBundle", "BundleFormatError", "save_bundle", "load_bundle"]

_MAGIC = b"CGB1"
_FORMAT = 1
VERSION = "0.1.0"


class BundleFormatError(ValueError):
    """Unreadable or inconsistent bundle file."""


@dataclass(frozen=True, eq=False)
class ModelBundle:
    pod: PodBasis
    recognition: LatentRecognition
    net: LikelihoodNet
    discrete_net: LikelihoodNet | None = None
    meta: dict | None = None

    def __post_init__(self):
        if self.pod.k != self.recognition.k:
            raise ValueError("basis rank and recognition rank disagree")
        object.__setattr__(self, "meta", dict(self.meta or {}))


class _Writer:
    def __init__(self):
        self.names: list[str] = []
        self.shapes: dict[str, list[int]] = {}
        self.blobs: list[bytes] = []

    def add(self, name: str, arr: np.ndarray):
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        self.names.append(name)
        self.shapes[name] = list(arr.shape)
        self.blobs.append(arr.tobytes())


def _net_to_writer(w: _Writer, prefix: str, net: LikelihoodNet):
    for i, (weight, bias) in enumerate(zip(net.weights, net.biases)):
        w.add(f"{prefix}_w{i}", weight)
        w.add(f"{prefix}_b{i}", bias)
    if net.scaler is not None:
        w.add(f"{prefix}_scaler_shift", net.scaler.shift)
        w.add(f"{prefix}_scaler_scale", net.scaler.scale)


def _net_meta(net: LikelihoodNet) -> dict:
    return {
        "input_dim": net.arch.input_dim,
        "hidden": list(net.arch.hidden),
        "output_dim": net.arch.output_dim,
        "head": net.head,
        "has_scaler": net.scaler is not None,
        "target_shift": net.target_shift,
        "target_scale": net.target_scale,
    }


def save_bundle(bundle: ModelBundle, path) -> None:
    w = _Writer()
    w.add("pod_mean", bundle.pod.mean_row)
    w.add("pod_basis", bundle.pod.basis)
    w.add("pod_eigenvalues", bundle.pod.eigenvalues)

    recog = bundle.recognition
    inputs = recog.models[0].train_inputs
    targets = np.column_stack([m.train_targets for m in recog.models])
    hyper = np.vstack([
        np.concatenate([[m.kernel.signal_sigma], m.kernel.lengthscales, [m.noise_sigma]])
        for m in recog.models
    ])
    w.add("recog_inputs", inputs)
    w.add("recog_targets", targets)
    w.add("recog_hyper", hyper)
    w.add("recog_shift", recog.latent_shift)
    w.add("recog_scale", recog.latent_scale)

    _net_to_writer(w, "net", bundle.net)
    if bundle.discrete_net is not None:
        _net_to_writer(w, "disc", bundle.discrete_net)

    meta = {
        "format": _FORMAT,
        "version": VERSION,
        "pod_k": bundle.pod.k,
        "param_dim": inputs.shape[1],
        "net": _net_meta(bundle.net),
        "discrete": _net_meta(bundle.discrete_net) if bundle.discrete_net else None,
        "provenance": bundle.meta,
    }
    offset = 0
    arrays = {}
    for name, blob in zip(w.names, w.blobs):
        arrays[name] = {"shape": w.shapes[name], "offset": offset, "nbytes": len(blob)}
        offset += len(blob)
    header = json.dumps({"meta": meta, "arrays": arrays},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(Path(path), "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in w.blobs:
            fh.write(blob)


def _read_array(payload: bytes, entry: dict) -> np.ndarray:
    start, n = entry["offset"], entry["nbytes"]
    arr = np.frombuffer(payload[start : start + n], dtype=np.float64)
    return arr.reshape(entry["shape"]).copy()


def _net_from_meta(meta: dict, arrays: dict, payload: bytes, prefix: str) -> LikelihoodNet:
    arch = MlpArchitecture(meta["input_dim"], tuple(meta["hidden"]), meta["output_dim"])
    n_layers = len(arch.hidden) + 1
    weights = [_read_array(payload, arrays[f"{prefix}_w{i}"]) for i in range(n_layers)]
    biases = [_read_array(payload, arrays[f"{prefix}_b{i}"]) for i in range(n_layers)]
    scaler = None
    if meta["has_scaler"]:
        scaler = Scaler(
            _read_array(payload, arrays[f"{prefix}_scaler_shift"]),
            _read_array(payload, arrays[f"{prefix}_scaler_scale"]),
        )
    net = LikelihoodNet(arch, weights, biases, head=meta["head"], scaler=scaler)
    net.target_shift = float(meta.get("target_shift", 0.0))
    net.target_scale = float(meta.get("target_scale", 1.0))
    return net


def load_bundle(path) -> ModelBundle:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise BundleFormatError(f"{path}: not a model bundle")
    header_len = int.from_bytes(raw[4:12], "little")
    try:
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleFormatError(f"{path}: corrupt header") from exc
    payload = raw[12 + header_len :]
    meta = header["meta"]
    arrays = header["arrays"]
    if meta.get("format") != _FORMAT:
        raise BundleFormatError(f"{path}: unsupported bundle format {meta.get('format')}")

    pod = PodBasis(
        _read_array(payload, arrays["pod_mean"]),
        _read_array(payload, arrays["pod_basis"]),
        _read_array(payload, arrays["pod_eigenvalues"]),
        meta["pod_k"],
    )
    inputs = _read_array(payload, arrays["recog_inputs"])
    targets = _read_array(payload, arrays["recog_targets"])
    hyper = _read_array(payload, arrays["recog_hyper"])
    d = meta["param_dim"]
    models = []
    for j in range(meta["pod_k"]):
        kernel = ArdSeKernel(hyper[j, 0], hyper[j, 1 : 1 + d])
        models.append(build_gpr_model(kernel, hyper[j, 1 + d], inputs, targets[:, j]))
    recog = LatentRecognition(
        tuple(models),
        _read_array(payload, arrays["recog_shift"]),
        _read_array(payload, arrays["recog_scale"]),
    )
    net = _net_from_meta(meta["net"], arrays, payload, "net")
    discrete = None
    if meta.get("discrete"):
        discrete = _net_from_meta(meta["discrete"], arrays, payload, "disc")
    return ModelBundle(pod, recog, net, discrete, meta.get("provenance") or {})
