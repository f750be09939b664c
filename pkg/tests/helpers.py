"""Shared test utilities."""

from importlib import resources


def bundled_model_text() -> str:
    return resources.files("telewalk").joinpath("data/desk_biped.yaml").read_text()


def bundled_path(relative: str):
    return resources.files("telewalk").joinpath(relative)


def scenario_path(name: str):
    return resources.files("telewalk").joinpath(f"data/scenarios/{name}")
