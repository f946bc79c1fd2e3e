"""Bundled single-axis vehicle tracking study.

A craft moving on a line must reach a fixed destination while keeping the
quadratic energy cost small.  Working in the shifted coordinate
x = position - destination, the plant is a scalar integrator driven by the
sum of an on-board velocity command and a ground-station velocity command,
plus unit-variance disturbance.  The craft starts 30 units short of the
destination, so the shifted initial mean is -30 (baked into the bundled
config).  Weights: state 0.01, each input 5; zero terminal weight; default
horizon 100.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import json

from .model import NcsModel, model_from_dict

DEFAULT_HORIZON = 100


def uav_config_dict() -> dict:
    text = importlib.resources.files("ncslqg.data").joinpath("uav.json").read_text()
    return json.loads(text)


def uav_model(p: float | None = None) -> NcsModel:
    """The bundled study model, optionally with the drop probability overridden."""
    model = model_from_dict(uav_config_dict())
    if p is not None:
        model = dataclasses.replace(model, p=float(p))
    return model
