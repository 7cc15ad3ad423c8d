"""Model checkpoints: a single .npz holding parameter tensors plus a JSON
metadata blob (model kind, configs, training stats, ablation flags)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .losses import LossConfig
from .network import Model, NetworkConfig, build_mlp_net, build_voxel_net

KIND_VOXEL = "voxel_net"
KIND_MLP = "mlp_net"


def save_checkpoint(
    path,
    model: Model,
    *,
    kind: str,
    net_config: NetworkConfig | None = None,
    hidden_widths: tuple[int, ...] | None = None,
    layer_norm: bool = True,
    loss_config: LossConfig | None = None,
    metadata: dict | None = None,
) -> None:
    """Write the model parameters and enough metadata to rebuild it."""
    if kind not in (KIND_VOXEL, KIND_MLP):
        raise ConfigError(f"unknown checkpoint kind {kind!r}")
    meta = {
        "kind": kind,
        "input_kind": model.input_kind,
        "input_shape": list(model.input_shape),
        "net_config": net_config.to_dict() if net_config else None,
        "hidden_widths": list(hidden_widths) if hidden_widths else None,
        "layer_norm": layer_norm,
        "loss_config": loss_config.to_dict() if loss_config else None,
        "metadata": metadata or {},
    }
    arrays = {f"param_{i:04d}": p.value for i, p in enumerate(model.parameters())}
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)
    tmp.replace(path)


def load_checkpoint(path) -> tuple[Model, dict]:
    """Rebuild the model from a checkpoint; returns (model, metadata dict)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        n_params = sum(1 for k in data.files if k.startswith("param_"))
        state = [data[f"param_{i:04d}"] for i in range(n_params)]
    if meta["kind"] == KIND_VOXEL:
        model = build_voxel_net(
            NetworkConfig.from_dict(meta["net_config"]), tuple(meta["input_shape"])
        )
    elif meta["kind"] == KIND_MLP:
        model = build_mlp_net(
            input_dim=meta["input_shape"][0],
            hidden_widths=tuple(meta["hidden_widths"]),
            layer_norm=meta.get("layer_norm", True),
        )
    else:
        raise ConfigError(f"unknown checkpoint kind {meta['kind']!r}")
    model.set_state(state)
    return model, meta
