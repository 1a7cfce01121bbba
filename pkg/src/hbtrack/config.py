"""INI-style scenario files. Every key mirrors a CLI flag; flags win.

Example::

    [array]
    elements = 256

    [link]
    snr_db = 10
    no_noise = false

    [walk]
    qi = 1, 2, 5, 10

    [tracker]
    tracker = proposed, level8, fct
    sigma_e = 0, 0.5
    pilots_per_level = 2,2,4,4,4,4,4,4
    refine_depth = 3

    [run]
    episodes = 1000
    seed = 0
"""

from __future__ import annotations

import configparser
from typing import Any

from .codebook import ArrayConfig
from .errors import ConfigurationError
from .geometry import RoomConfig, Point2D
from .sim import FULL_SCALE_EPISODES, ScenarioConfig


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(";", ",").split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


# section -> key -> (scenario option, parser)
_KEYS = {
    "array": {
        "elements": ("elements", int),
        "spacing_ratio": ("spacing_ratio", float),
        "carrier_frequency": ("carrier_frequency", float),
    },
    "link": {
        "snr_db": ("snr_db", float),
        "no_noise": ("no_noise", "bool"),
        "snr_reference": ("snr_reference", str),
    },
    "walk": {
        "qi": ("qi", _ints),
        "step_length": ("step_length", float),
        "num_original_steps": ("num_original_steps", int),
        "start_disk_radius": ("start_disk_radius", float),
        "room_width": ("room_width", float),
        "room_height": ("room_height", float),
        "ap_x": ("ap_x", float),
        "ap_y": ("ap_y", float),
    },
    "tracker": {
        "tracker": ("tracker", _names),
        "sigma_e": ("sigma_e", _floats),
        "pilots_per_level": ("pilots_per_level", _ints),
        "refine_depth": ("refine_depth", int),
        "fallback": ("fallback", str),
        "fallback_floor": ("fallback_floor", int),
    },
    "run": {
        "episodes": ("episodes", int),
        "seed": ("seed", int),
        "workers": ("workers", int),
        "full_scale": ("full_scale", "bool"),
    },
}


def read_config(path: str) -> dict[str, Any]:
    """Parse a scenario file into flat option names (the CLI dest names)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    opts: dict[str, Any] = {}
    for section in parser.sections():
        if section not in _KEYS:
            raise ConfigurationError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _KEYS[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            name, conv = _KEYS[section][key]
            try:
                opts[name] = parser.getboolean(section, key) if conv == "bool" else conv(raw)
            except ValueError as exc:
                raise ConfigurationError(f"bad value for {section}.{key}: {raw!r}") from exc
    return opts


def array_from_options(opts: dict[str, Any]) -> ArrayConfig:
    o = {k: v for k, v in opts.items() if v is not None}
    return ArrayConfig(
        n_elements=o.get("elements", 256),
        spacing_ratio=o.get("spacing_ratio", 0.5),
        carrier_frequency=o.get("carrier_frequency", 275e9),
    )


def scenario_from_options(opts: dict[str, Any]) -> ScenarioConfig:
    """Build a ScenarioConfig from flat options; missing keys keep defaults."""
    o = {k: v for k, v in opts.items() if v is not None}
    try:
        array = array_from_options(o)
        width, height = o.get("room_width", 5.0), o.get("room_height", 5.0)
        ap = None
        if "ap_x" in o or "ap_y" in o:
            ap = Point2D(o.get("ap_x", 0.0), o.get("ap_y", height / 2))
        room = RoomConfig(width, height, ap)
        episodes = FULL_SCALE_EPISODES if o.get("full_scale") else o.get("episodes", 1000)
        kwargs = dict(
            room=room,
            array=array,
            snr_db=o.get("snr_db", 10.0),
            no_noise=bool(o.get("no_noise", False)),
            snr_reference=o.get("snr_reference", "level"),
            q_i=tuple(o.get("qi", (10,))),
            sigma_e=tuple(o.get("sigma_e", (0.0,))),
            trackers=tuple(o.get("tracker", ("proposed",))),
            pilots_per_level=o.get("pilots_per_level"),
            refine_depth=o.get("refine_depth", 3),
            fallback=o.get("fallback", "keep"),
            fallback_floor=o.get("fallback_floor", 1),
            episodes=episodes,
            base_seed=o.get("seed", 0),
            workers=o.get("workers", 1),
        )
        for key in ("step_length", "num_original_steps", "start_disk_radius"):
            if key in o:
                kwargs[key] = o[key]
        return ScenarioConfig(**kwargs)
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
