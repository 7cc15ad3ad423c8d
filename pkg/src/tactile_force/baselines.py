"""Reference models: the per-axis linear electrode model and an MLP baseline.

The linear model predicts each force axis as a scale factor times the
electrode-weighted sum of electrode orientations along that axis; the scale
factors are fit by per-axis least squares through the origin. The MLP
baseline stands in for earlier feed-forward approaches whose exact internals
are not published; it is a plain fully connected regressor on (e, s_c)
trained with an unweighted squared-error loss and is labeled "MLP-baseline"
in reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, SchemaError
from .sensor import N_ELECTRODES, ElectrodeLayout

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class LinearModel:
    """Per-axis scale factors over electrode-orientation features."""

    scale: np.ndarray  # (3,), per-axis factors
    layout: ElectrodeLayout

    def __post_init__(self):
        s = np.asarray(self.scale, dtype=float)
        if s.shape != (3,):
            raise SchemaError(f"scale must be a 3-vector, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise SchemaError("scale factors must be finite")
        object.__setattr__(self, "scale", s)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"S": self.scale.tolist()}, fh)

    @classmethod
    def from_json(cls, path, layout: ElectrodeLayout) -> "LinearModel":
        with open(path) as fh:
            data = json.load(fh)
        return cls(scale=np.array(data["S"], dtype=float), layout=layout)


def electrode_features(layout: ElectrodeLayout, e: np.ndarray) -> np.ndarray:
    """Per-axis sums of electrode values weighted by electrode orientations."""
    e = np.asarray(e, dtype=float)
    if e.shape[-1] != N_ELECTRODES:
        raise SchemaError(f"expected {N_ELECTRODES} electrode values, got shape {e.shape}")
    return e @ layout.normals


def linear_predict(model: LinearModel, e: np.ndarray) -> np.ndarray:
    """Predicted 3-D force: scale * per-axis electrode-orientation sum."""
    return model.scale * electrode_features(model.layout, e)


def linear_fit(
    e_samples: np.ndarray, f_samples: np.ndarray, layout: ElectrodeLayout
) -> LinearModel:
    """Fit the per-axis scale factors by least squares through the origin.

    Requires at least 3 samples and nonzero feature variance on every axis;
    a constant feature column leaves that axis unidentifiable.
    """
    e_samples = np.asarray(e_samples, dtype=float)
    f_samples = np.asarray(f_samples, dtype=float)
    if e_samples.ndim != 2 or f_samples.shape != (e_samples.shape[0], 3):
        raise SchemaError("expected (n, 19) electrode samples and (n, 3) forces")
    if e_samples.shape[0] < 3:
        raise DegenerateInputError(
            f"need at least 3 samples to fit, got {e_samples.shape[0]}"
        )
    features = electrode_features(layout, e_samples)  # (n, 3)
    scale = np.empty(3)
    for axis in range(3):
        x = features[:, axis]
        if np.var(x) < 1e-18:
            raise DegenerateInputError(
                f"zero feature variance on axis {AXES[axis]}; fit is degenerate"
            )
        scale[axis] = float(x @ f_samples[:, axis]) / float(x @ x)
    return LinearModel(scale=scale, layout=layout)
