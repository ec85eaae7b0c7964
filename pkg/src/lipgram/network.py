"""Whole-network Lipschitz bounds from per-layer bounds.

The network bound is the product of its top-level layer bounds. A residual
block ``x -> x + F(x)`` counts as one layer of bound ``1 + Lip(F)``, where
``Lip(F)`` is the product of the bounds of the layers inside the branch.
"""

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lipk
from .conv import ConvKernel, conv_power_iteration, exact_conv_spectrum, gram_conv
from .dense import gram_rescaled, power_iteration, svd_exact
from .errors import FormatError, LipError

ESTIMATORS = ("gram", "exact", "power")
ACTIVATIONS = ("relu", "sigmoid", "tanh")
KINDS = ("conv", "dense", "activation", "custom_activation", "maxpool", "batchnorm", "residual_block")


class UnknownActivationError(LipError, ValueError):
    """Activation without a known Lipschitz constant."""


@dataclass
class LayerSpec:
    """One layer of a network.

    ``params`` depends on ``kind``:

    - conv: ``kernel`` (a ConvKernel), optional ``method``
    - dense: ``matrix``, optional ``method``
    - activation: ``name``
    - custom_activation: ``lipschitz``
    - maxpool: ``k``, ``stride``, ``n``
    - batchnorm: ``gamma``, ``var``, ``eps``
    - residual_block: ``layers`` (list of LayerSpec)
    """

    kind: str
    params: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FormatError(f"unknown layer kind {self.kind!r}")
        p = self.params
        if self.kind == "maxpool":
            for key in ("k", "stride", "n"):
                if int(p[key]) != p[key] or p[key] < 1:
                    raise FormatError(f"maxpool {key} must be a positive integer, got {p[key]!r}")
        elif self.kind == "batchnorm":
            var = np.asarray(p["var"], dtype=float)
            gamma = np.asarray(p["gamma"], dtype=float)
            if var.shape != gamma.shape or var.ndim != 1 or var.size == 0:
                raise FormatError("batchnorm gamma and var must be equal-length vectors")
            if np.any(var < 0):
                raise FormatError("batchnorm variances must be non-negative")
            if not p.get("eps", 0) > 0:
                raise FormatError("batchnorm eps must be positive")
        elif self.kind == "custom_activation":
            if not p["lipschitz"] >= 0:
                raise FormatError("custom_activation lipschitz must be non-negative")
        elif self.kind == "residual_block" and not p.get("layers"):
            raise FormatError("residual_block needs a non-empty layers list")


@dataclass
class NetworkSpec:
    layers: list
    name: str = "network"

    def __post_init__(self):
        if not self.layers:
            raise FormatError("a network needs at least one layer")


@dataclass
class NetworkBoundReport:
    total: float
    per_layer: list
    method: str

    def to_dict(self):
        return {"total": self.total, "method": self.method, "per_layer": self.per_layer}


def maxpool_bound(k, stride, n):
    return math.ceil(min(k, n - k + 1) / stride) ** 2


def batchnorm_bound(gamma, var, eps):
    gamma = np.asarray(gamma, dtype=float)
    var = np.asarray(var, dtype=float)
    return float(np.max(np.abs(gamma) / np.sqrt(var + eps)))


def _conv_bound(kernel, method, n_iter, seed):
    if method == "gram":
        return gram_conv(kernel, n_iter).value
    if method == "exact":
        return exact_conv_spectrum(kernel).value
    if method == "power":
        return conv_power_iteration(kernel, n_iter, seed).value
    raise ValueError(f"unknown estimator {method!r}")


def _dense_bound(matrix, method, n_iter, seed):
    if method == "gram":
        return gram_rescaled(matrix, n_iter).value
    if method == "exact":
        return svd_exact(matrix).value
    if method == "power":
        return power_iteration(matrix, n_iter, seed).value
    raise ValueError(f"unknown estimator {method!r}")


def layer_bound(layer, estimator="gram", n_iter=7, seed=0):
    """Lipschitz bound of a single layer."""
    p = layer.params
    kind = layer.kind
    if kind == "conv":
        return _conv_bound(p["kernel"], p.get("method") or estimator, n_iter, seed)
    if kind == "dense":
        return _dense_bound(p["matrix"], p.get("method") or estimator, n_iter, seed)
    if kind == "activation":
        if p["name"] not in ACTIVATIONS:
            raise UnknownActivationError(
                f"activation {p['name']!r} has no known constant; declare it as custom_activation"
            )
        return 1.0
    if kind == "custom_activation":
        return float(p["lipschitz"])
    if kind == "maxpool":
        return float(maxpool_bound(p["k"], p["stride"], p["n"]))
    if kind == "batchnorm":
        return batchnorm_bound(p["gamma"], p["var"], p["eps"])
    if kind == "residual_block":
        inner = 1.0
        for sub in p["layers"]:
            inner *= layer_bound(sub, estimator, n_iter, seed)
        return 1.0 + inner
    raise FormatError(f"unknown layer kind {kind!r}")


def _describe(layer):
    p = layer.params
    if layer.kind == "conv":
        return "x".join(str(d) for d in p["kernel"].filter.shape)
    if layer.kind == "dense":
        return "x".join(str(d) for d in np.shape(p["matrix"]))
    if layer.kind == "activation":
        return p["name"]
    if layer.kind == "maxpool":
        return f"k{p['k']} s{p['stride']}"
    if layer.kind == "batchnorm":
        return f"{len(p['gamma'])} ch"
    if layer.kind == "residual_block":
        return f"{len(p['layers'])} inner"
    return ""


def network_bound(net, estimator="gram", n_iter=7, seed=0):
    """Product of top-level layer bounds, with a per-layer breakdown."""
    per_layer = []
    total = 1.0
    for index, layer in enumerate(net.layers):
        start = time.perf_counter()
        try:
            bound = layer_bound(layer, estimator, n_iter, seed)
        except LipError as exc:
            raise type(exc)(f"layer {index} ({layer.kind}): {exc}") from exc
        per_layer.append({
            "index": index,
            "kind": layer.kind,
            "label": layer.label,
            "shape": _describe(layer),
            "bound": bound,
            "elapsed_seconds": time.perf_counter() - start,
        })
        total *= bound
    return NetworkBoundReport(total, per_layer, estimator)


# --------------------------------------------------------------------------
# JSON description

_FIELDS = {
    "conv": ({"weights", "n"}, {"method", "padding", "label"}),
    "dense": ({"weights"}, {"method", "label"}),
    "activation": ({"name"}, {"label"}),
    "custom_activation": ({"lipschitz"}, {"label"}),
    "maxpool": ({"k", "stride", "n"}, {"label"}),
    "batchnorm": ({"gamma", "var", "eps"}, {"label"}),
    "residual_block": ({"layers"}, {"label"}),
}


def _parse_layer(doc, base, where):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise FormatError(f"{where}: each layer must be an object with a 'kind'")
    kind = doc["kind"]
    if kind not in _FIELDS:
        raise FormatError(f"{where}: unknown layer kind {kind!r}")
    required, optional = _FIELDS[kind]
    keys = set(doc) - {"kind"}
    if required - keys:
        raise FormatError(f"{where}: {kind} layer missing {sorted(required - keys)}")
    if keys - required - optional:
        raise FormatError(f"{where}: unknown fields {sorted(keys - required - optional)}")
    label = doc.get("label", "")
    params = {k: v for k, v in doc.items() if k not in ("kind", "label", "weights", "layers")}
    try:
        if kind == "conv":
            filt = lipk.read(base / doc["weights"])
            params = {
                "kernel": ConvKernel(filt, doc["n"], doc.get("padding", "circular")),
                "method": doc.get("method"),
            }
        elif kind == "dense":
            params = {"matrix": lipk.read_matrix(base / doc["weights"]), "method": doc.get("method")}
        elif kind == "residual_block":
            params = {
                "layers": [
                    _parse_layer(sub, base, f"{where}.layers[{i}]")
                    for i, sub in enumerate(doc["layers"])
                ]
            }
        return LayerSpec(kind, params, label)
    except FileNotFoundError as exc:
        raise FormatError(f"{where}: weight file not found: {exc.filename}") from exc
    except LipError as exc:
        if isinstance(exc, FormatError) and str(exc).startswith(where):
            raise
        raise FormatError(f"{where}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from exc


def parse_network(doc, base="."):
    """Build a NetworkSpec from a decoded JSON document.

    Weight paths are resolved relative to ``base``.
    """
    if not isinstance(doc, dict):
        raise FormatError("network description must be a JSON object")
    extra = set(doc) - {"name", "layers"}
    if extra:
        raise FormatError(f"unknown top-level fields {sorted(extra)}")
    layers = doc.get("layers")
    if not isinstance(layers, list) or not layers:
        raise FormatError("'layers' must be a non-empty list")
    base = Path(base)
    parsed = [_parse_layer(layer, base, f"layers[{i}]") for i, layer in enumerate(layers)]
    return NetworkSpec(parsed, doc.get("name", "network"))


def load_network(path):
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc
    return parse_network(doc, path.parent)
