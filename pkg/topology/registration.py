"""Preset registry.

Presets are registered by id with a "module:function" entry point and
built lazily by `make`, so listing them imports nothing heavy.
"""
from importlib import import_module

from topology.errors import InputError

registry = {}


def register(id, entry_point, **kwargs):
    if id in registry:
        raise Exception(f"[error] Preset {id} is already registered!")
    registry[id] = {"entry_point": entry_point, "kwargs": kwargs}


def make(id, **kwargs):
    if id not in registry:
        raise InputError(f"[error] Unknown preset {id}!")
    entry = registry[id]
    module, function = entry["entry_point"].split(":")
    options = dict(entry["kwargs"])
    options.update(kwargs)
    return getattr(import_module(module), function)(**options)


def list_presets():
    return sorted(registry)


# Surfaces
register(
    id="s2_two_points",
    entry_point="z2forms.presets:s2_two_points"
)

register(
    id="pillowcase",
    entry_point="z2forms.presets:pillowcase",
    n=8
)

register(
    id="flat_torus",
    entry_point="z2forms.presets:flat_torus",
    n=8
)

# 3-spheres with links
register(
    id="s3_unknot",
    entry_point="z2forms.presets:s3_link",
    link="unknot"
)

register(
    id="s3_hopf",
    entry_point="z2forms.presets:s3_link",
    link="hopf"
)

register(
    id="s3_unlink",
    entry_point="z2forms.presets:s3_link",
    link="unlink"
)

register(
    id="star_tree",
    entry_point="z2forms.presets:star_tree"
)

register(
    id="star_pair",
    entry_point="z2forms.presets:star_tree",
    disks=2
)

register(
    id="lens_space_21",
    entry_point="z2forms.presets:lens_space"
)
