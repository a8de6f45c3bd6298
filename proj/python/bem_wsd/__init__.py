"""Bi-encoder word sense disambiguation: Python bindings over the C++ core."""

import json

from ._core import (
    BemError,
    Inventory,
    Model,
    bem_loss,
    bem_loss_grad,
    lr_at,
    pca,
    run_cli,
    softmax,
)
from . import _core

__all__ = [
    "BemError",
    "Inventory",
    "Model",
    "bem_loss",
    "bem_loss_grad",
    "lr_at",
    "pca",
    "run_cli",
    "softmax",
    "prepare",
    "synth",
    "train",
    "evaluate",
    "export_embeddings",
]


def _run(name, options):
    _core.run_command(name, json.dumps(options))


def prepare(**options):
    _run("prepare", options)


def synth(**options):
    _run("synth", options)


def train(**options):
    _run("train", options)


def evaluate(**options):
    """Run the scorer; returns the parsed report.json."""
    _run("eval", options)
    with open(f"{options['out']}/report.json", encoding="utf-8") as f:
        return json.load(f)


def export_embeddings(**options):
    """Write an embedding dump; returns (header, rows)."""
    _run("export-embeddings", options)
    with open(options["out"], encoding="utf-8") as f:
        lines = [json.loads(line) for line in f if line.strip()]
    return lines[0], lines[1:]
