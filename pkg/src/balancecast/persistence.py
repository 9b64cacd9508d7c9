"""Model files: a JSON envelope tagging the kind and forecast horizon.

Floats survive the round trip exactly because json serializes Python floats
via their shortest repr.
"""

from __future__ import annotations

import json
from pathlib import Path

from .baseline import NaiveModel
from .ebm import EbmModel, ebm_from_dict, ebm_to_dict
from .errors import UnsupportedModelError
from .gbt import GbtModel, gbt_from_dict, gbt_to_dict
from .stacking import StackedModel, stacked_from_dict, stacked_to_dict

MODEL_KINDS = ("naive", "gbt", "ebm", "stacked")


def model_kind(model) -> str:
    if isinstance(model, NaiveModel):
        return "naive"
    if isinstance(model, GbtModel):
        return "gbt"
    if isinstance(model, EbmModel):
        return "ebm"
    if isinstance(model, StackedModel):
        return "stacked"
    raise UnsupportedModelError(f"cannot persist {type(model).__name__}")


def save_model(model, horizon_steps: int, path) -> None:
    kind = model_kind(model)
    if kind == "naive":
        payload = {"horizon_steps": model.horizon_steps}
    elif kind == "gbt":
        payload = gbt_to_dict(model)
    elif kind == "ebm":
        payload = ebm_to_dict(model)
    else:
        payload = stacked_to_dict(model)
    doc = {"kind": kind, "horizon_steps": int(horizon_steps), "model": payload}
    with Path(path).open("w", newline="") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def load_model(path):
    """Returns (kind, horizon_steps, model)."""
    with Path(path).open("r") as fh:
        doc = json.load(fh)
    kind = doc.get("kind")
    horizon = int(doc["horizon_steps"])
    payload = doc["model"]
    if kind == "naive":
        return kind, horizon, NaiveModel(horizon_steps=int(payload["horizon_steps"]))
    if kind == "gbt":
        return kind, horizon, gbt_from_dict(payload)
    if kind == "ebm":
        return kind, horizon, ebm_from_dict(payload)
    if kind == "stacked":
        return kind, horizon, stacked_from_dict(payload)
    raise UnsupportedModelError(f"unknown model kind {kind!r} in {path}")
