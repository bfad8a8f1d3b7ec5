"""Run configuration files.

A config is an INI-style text file with sections ``[file] [radio]
[scheme] [topology] [adversary] [run]`` and ``key = value`` lines. Every
key is optional; an empty file yields the default urban scenario. Unknown
sections or keys are errors.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import replace

from .engine import RunConfig
from .schemes import Scheme


class ConfigError(ValueError):
    """Malformed or out-of-range configuration."""


def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    return float(text)


def _rate(text: str):
    if text.strip().lower() in ("inf", "infinite", "infinity"):
        return math.inf
    value = float(text)
    return int(value) if value == int(value) else value


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _optional_int(text: str):
    return None if text.strip().lower() in ("none", "") else int(text)


def _text(text: str) -> str:
    return text.strip()


def _optional_text(text: str):
    return None if text.strip().lower() in ("none", "") else text.strip()


# section -> key -> (parser, config group, field name)
SCHEMA = {
    "file": {
        "k": (_int, "file", "k"),
        "packet_bytes": (_int, "file", "packet_bytes"),
        "signature_bytes": (_int, "overhead", "signature_bytes"),
        "hash_bytes": (_int, "overhead", "hash_bytes"),
    },
    "radio": {
        "tx_range_m": (_float, "radio", "tx_range_m"),
        "interference_range_m": (_float, "radio", "interference_range_m"),
        "epsilon": (_float, "radio", "erasure_prob"),
        "packets_per_slot": (_int, "radio", "packets_per_slot"),
        "slot_seconds": (_float, "radio", "slot_seconds"),
        "mac": (_text, "run", "mac"),
    },
    "scheme": {
        "name": (Scheme.parse, "scheme", "scheme"),
        "M": (_rate, "file", "M"),
        "hash_first_slots": (_optional_int, "scheme", "hash_first_slots"),
        "hash_forward_prob": (_float, "scheme", "hash_forward_prob"),
        "seed_multiplier": (_float, "scheme", "seed_multiplier"),
        "seeding_rate_pps": (_float, "scheme", "seeding_rate_pps"),
        "verify": (_bool, "scheme", "verify"),
        "quarantine_capacity": (_optional_int, "scheme", "quarantine_capacity"),
    },
    "topology": {
        "kind": (_text, "topology", "kind"),
        "d": (_int, "topology", "d"),
        "spacing_m": (_float, "topology", "spacing_m"),
        "rows": (_int, "topology", "rows"),
        "cols": (_int, "topology", "cols"),
        "block_m": (_float, "topology", "block_m"),
        "turn_bias": (_float, "topology", "turn_bias"),
        "vehicles": (_int, "topology", "vehicles"),
        "sources": (_int, "topology", "sources"),
        "road_graph": (_optional_text, "topology", "road_graph"),
    },
    "adversary": {
        "malicious_fraction": (_float, "run", "malicious_fraction"),
    },
    "run": {
        "seed": (_int, "run", "seed"),
        "horizon_slots": (_int, "run", "horizon_slots"),
        "stall_slots": (_optional_int, "run", "stall_slots"),
        "model": (_text, "run", "model"),
    },
}

_GROUPS = {
    "file": lambda c: c.file,
    "overhead": lambda c: c.overhead,
    "radio": lambda c: c.radio,
    "scheme": lambda c: c.scheme,
    "topology": lambda c: c.topology,
}


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str  # keep "M" distinct from "m"
    return cp


def parse_config_text(text: str, overrides=(), source: str = "<config>") -> RunConfig:
    cp = _parser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        if lineno is None and getattr(exc, "errors", None):
            lineno = exc.errors[0][0]
        where = f"{source}: line {lineno}" if lineno else source
        if not isinstance(exc, configparser.MissingSectionHeaderError) and getattr(exc, "errors", None):
            detail = f"cannot parse {exc.errors[0][1].strip()}"
        else:
            detail = str(exc).splitlines()[0]
        raise ConfigError(f"{where}: {detail}") from None
    raw: dict[str, dict[str, str]] = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, value in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            raw.setdefault(section, {})[key] = value
    for item in overrides:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"override names unknown key {name.strip()!r}")
        raw.setdefault(section, {})[key] = value.strip()
    return build_config(raw)


def build_config(raw: dict) -> RunConfig:
    """Turn ``{section: {key: text}}`` into a validated :class:`RunConfig`."""
    changes: dict[str, dict] = {}
    for section, items in raw.items():
        for key, text in items.items():
            parse, group, field_name = SCHEMA[section][key]
            try:
                value = parse(text)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: cannot parse {text!r} ({exc})") from None
            changes.setdefault(group, {})[field_name] = (value, f"{section}.{key}")
    base = RunConfig()
    parts = {}
    for group, getter in _GROUPS.items():
        fields = changes.get(group, {})
        try:
            parts[group] = replace(getter(base), **{f: v for f, (v, _) in fields.items()})
        except (ValueError, TypeError) as exc:
            keys = ", ".join(label for _, label in fields.values())
            raise ConfigError(f"invalid value in {keys}: {exc}") from None
    run_fields = {f: v for f, (v, _) in changes.get("run", {}).items()}
    try:
        return replace(base, file=parts["file"], overhead=parts["overhead"],
                       radio=parts["radio"], scheme=parts["scheme"],
                       topology=parts["topology"], **run_fields)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None


def load_config(path, overrides=()) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {str(path)!r}: {exc.strerror}") from None
    return parse_config_text(text, overrides, source=str(path))


def describe_defaults() -> str:
    """One line per config key with its default value, for ``--help``."""
    base = RunConfig()
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (_, group, field_name) in keys.items():
            obj = base if group == "run" else _GROUPS[group](base)
            value = getattr(obj, field_name)
            if isinstance(value, Scheme):
                value = value.value
            lines.append(f"  {key} = {value}")
    return "\n".join(lines)

