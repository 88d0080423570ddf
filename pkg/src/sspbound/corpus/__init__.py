"""Bundled example models."""
from __future__ import annotations

from pathlib import Path

from ..frontend import load_model_file
from ..semantics import ModelIR

CORPUS_DIR = Path(__file__).resolve().parent

#: the five models of the experimental table, in table order
TABLE_MODELS = ("gambler", "robot2d", "multi_robot", "mini_roulette", "american_roulette")
ALL_MODELS = TABLE_MODELS + ("log",)


def path(name: str) -> Path:
    p = CORPUS_DIR / f"{name}.smdp"
    if not p.exists():
        raise KeyError(f"no corpus model named {name!r}")
    return p


def load(name: str) -> ModelIR:
    return load_model_file(path(name))
