"""Scenario configuration files: flat INI sections with typed keys.

Sections are ``[scenario]``, ``[channel]``, ``[treecode]``, ``[detector]``,
and ``[output]``.  Unknown sections or keys are rejected, never ignored.
Loading resolves every derived quantity (sub-seeds, transmit power from an
SNR value) so the returned dictionary is a complete, self-contained
snapshot: serializing it back and reloading reproduces the identical
experiment.
"""

from __future__ import annotations

import configparser
import io
import math

from . import streams
from .channel import MODES, ChannelParams
from .codebook import DEFAULT_MAX_BYTES
from .detector import POLICIES, DetectorConfig
from .errors import ConfigError
from .simulate import ScenarioConfig
from .streams import DOMAIN_CHANNEL_SPEC, DOMAIN_PARITY
from .treecode import DEFAULT_MAX_PATHS, TreeCodeSpec

_INT = "int"
_FLOAT = "float"
_STR = "str"
_BOOL = "bool"
_INT_LIST = "int_list"
_FLOAT_LIST = "float_list"
_STR_LIST = "str_list"
_OPT_INT = "opt_int"
_OPT_FLOAT = "opt_float"

# key -> (type, default); REQUIRED means the config must supply it
REQUIRED = object()

SCHEMA = {
    "scenario": {
        "k_tot": (_INT, 0),  # 0 means "2 * k_a"
        "k_a": (_INT, REQUIRED),
        "m": (_INT_LIST, REQUIRED),
        "d": (_INT, REQUIRED),
        "n_k": (_INT, 1),
        "g": (_OPT_FLOAT, None),
        "snr_db": (_OPT_FLOAT, None),
        "sigma2": (_FLOAT, 1.0),
        "trials": (_INT, 1),
        "master_seed": (_INT, 0),
        "workers": (_INT, 1),
        "snr_grid_db": (_FLOAT_LIST, ()),
        "codebook_normalized": (_BOOL, False),
        "codebook_max_bytes": (_INT, DEFAULT_MAX_BYTES),
    },
    "channel": {
        "mode": (_STR_LIST, ("iid",)),
        "rho_r": (_FLOAT, 0.0),
        "rho_t": (_FLOAT, 0.0),
        "rician_k": (_FLOAT, 0.0),
        "seed": (_OPT_INT, None),
    },
    "treecode": {
        "w": (_INT, REQUIRED),
        "s": (_INT, REQUIRED),
        "j": (_INT, REQUIRED),
        "profile": (_INT_LIST, REQUIRED),
        "parity_seed": (_OPT_INT, None),
    },
    "detector": {
        "q_total": (_INT, REQUIRED),
        "q_mod": (_INT, REQUIRED),
        "zeta": (_OPT_FLOAT, None),
        "zeta_rel": (_OPT_FLOAT, None),
        "policy": (_STR, "bla"),
        "resync_period": (_INT, 10_000),
        "max_paths": (_INT, DEFAULT_MAX_PATHS),
        "policies": (_STR_LIST, ("bla", "random")),
    },
    "output": {
        "dir": (_STR, ""),
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_value(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _STR:
            return raw
        if kind == _BOOL:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == _OPT_INT:
            return int(raw) if raw else None
        if kind == _OPT_FLOAT:
            return float(raw) if raw else None
        if kind == _INT_LIST:
            return tuple(int(tok) for tok in raw.replace(",", " ").split()) if raw else ()
        if kind == _FLOAT_LIST:
            return tuple(float(tok) for tok in raw.replace(",", " ").split()) if raw else ()
        if kind == _STR_LIST:
            return tuple(tok for tok in raw.replace(",", " ").split()) if raw else ()
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}: {exc}") from exc
    raise ConfigError(f"{where}: unknown value kind {kind!r}")


def _format_value(kind: str, value) -> str:
    if value is None:
        return ""
    if kind in (_FLOAT, _OPT_FLOAT):
        return f"{float(value):.17g}"
    if kind == _FLOAT_LIST:
        return ", ".join(f"{float(v):.17g}" for v in value)
    if kind in (_INT_LIST, _STR_LIST):
        return ", ".join(str(v) for v in value)
    if kind == _BOOL:
        return "true" if value else "false"
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse INI text into the typed, fully-resolved config dictionary."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    cfg: dict = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        cfg[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in section [{section}]")
            kind, _ = SCHEMA[section][key]
            cfg[section][key] = _parse_value(kind, raw, f"{source} [{section}] {key}")

    for section, keys in SCHEMA.items():
        cfg.setdefault(section, {})
        for key, (kind, default) in keys.items():
            if key not in cfg[section]:
                if default is REQUIRED:
                    raise ConfigError(f"{source}: missing required key {key!r} in [{section}]")
                cfg[section][key] = default
    _resolve(cfg, source)
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))


def _resolve(cfg: dict, source: str) -> None:
    """Fill every derived field so the dict is a complete run description."""
    sc = cfg["scenario"]
    if sc["k_tot"] == 0:
        sc["k_tot"] = 2 * sc["k_a"]
    if sc["g"] is None and sc["snr_db"] is None:
        if not sc["snr_grid_db"]:
            raise ConfigError(f"{source}: set scenario.g or scenario.snr_db (or an snr grid)")
        sc["snr_db"] = sc["snr_grid_db"][0]
    if sc["g"] is None and sc["snr_db"] is not None:
        sc["g"] = sc["sigma2"] * 10.0 ** (sc["snr_db"] / 10.0)
    if sc["snr_db"] is None:
        sc["snr_db"] = 10.0 * math.log10(sc["g"] / sc["sigma2"])

    ch = cfg["channel"]
    for mode in ch["mode"]:
        if mode not in MODES:
            raise ConfigError(f"{source}: unknown channel mode {mode!r}")

    det = cfg["detector"]
    if det["zeta"] is None and det["zeta_rel"] is None:
        raise ConfigError(f"{source}: set detector.zeta or detector.zeta_rel")
    if det["zeta"] is not None and det["zeta_rel"] is not None:
        raise ConfigError(f"{source}: detector.zeta and detector.zeta_rel are mutually exclusive")
    if det["policy"] not in POLICIES:
        raise ConfigError(f"{source}: unknown detector policy {det['policy']!r}")
    for policy in det["policies"]:
        if policy not in POLICIES:
            raise ConfigError(f"{source}: unknown convergence policy {policy!r}")


def apply_overrides(cfg: dict, overrides) -> dict:
    """New config dict with ``section.key=value`` strings applied."""
    out = {section: dict(keys) for section, keys in cfg.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        target, _, raw = item.partition("=")
        if "." not in target:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        section, _, key = target.partition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"override {item!r} names an unknown key")
        kind, _ = SCHEMA[section][key]
        out[section][key] = _parse_value(kind, raw, f"override {item!r}")
        # power and SNR are two views of one quantity: the override wins
        if section == "scenario" and key == "snr_db":
            out["scenario"]["g"] = None
        elif section == "scenario" and key == "g":
            out["scenario"]["snr_db"] = None
    _resolve(out, "<overrides>")
    return out


def finalize_config(cfg: dict) -> dict:
    """Copy with every derived sub-seed made concrete (manifest-ready)."""
    out = {section: dict(keys) for section, keys in cfg.items()}
    master = out["scenario"]["master_seed"]
    if out["channel"]["seed"] is None:
        out["channel"]["seed"] = streams.derived_seed(master, DOMAIN_CHANNEL_SPEC)
    if out["treecode"]["parity_seed"] is None:
        out["treecode"]["parity_seed"] = streams.derived_seed(master, DOMAIN_PARITY)
    return out


def config_from_jsonable(obj) -> dict:
    """Rebuild the typed config dict from its JSON form (lists -> tuples)."""
    cfg: dict = {}
    for section, keys in SCHEMA.items():
        if section not in obj:
            raise ConfigError(f"stored config is missing section [{section}]")
        cfg[section] = {}
        for key, (kind, _) in keys.items():
            if key not in obj[section]:
                raise ConfigError(f"stored config is missing key {key!r} in [{section}]")
            value = obj[section][key]
            if kind in (_INT_LIST, _FLOAT_LIST, _STR_LIST) and value is not None:
                value = tuple(value)
            cfg[section][key] = value
        for key in obj[section]:
            if key not in keys:
                raise ConfigError(f"stored config has unknown key {key!r} in [{section}]")
    _resolve(cfg, "<stored config>")
    return cfg


def config_to_text(cfg: dict) -> str:
    """Serialize the resolved dictionary back to INI (round-trip exact)."""
    buf = io.StringIO()
    for section in SCHEMA:
        buf.write(f"[{section}]\n")
        for key, (kind, _) in SCHEMA[section].items():
            buf.write(f"{key} = {_format_value(kind, cfg[section][key])}\n")
        buf.write("\n")
    return buf.getvalue()


def scenario_from_config(cfg: dict, m: int | None = None, mode: str | None = None) -> ScenarioConfig:
    """Build the ScenarioConfig for one (m, channel mode) grid cell.

    ``m`` / ``mode`` select among the configured axis values; both default
    to the first (and usually only) entry.
    """
    cfg = finalize_config(cfg)
    sc, ch, tc, det = cfg["scenario"], cfg["channel"], cfg["treecode"], cfg["detector"]
    m_values = sc["m"]
    if m is None:
        m = m_values[0]
    elif m not in m_values:
        raise ConfigError(f"m={m} is not among the configured values {m_values}")
    if mode is None:
        mode = ch["mode"][0]
    elif mode not in ch["mode"]:
        raise ConfigError(f"mode={mode!r} is not among the configured values {ch['mode']}")

    tree = TreeCodeSpec(
        w=tc["w"], s=tc["s"], j=tc["j"], profile=tc["profile"], parity_seed=tc["parity_seed"]
    )
    channel = ChannelParams(
        mode=mode,
        m=m,
        n_k=sc["n_k"],
        rho_r=ch["rho_r"],
        rho_t=ch["rho_t"],
        rician_k=ch["rician_k"],
        seed=ch["seed"],
    )
    detector = DetectorConfig(
        q_total=det["q_total"],
        q_mod=det["q_mod"],
        zeta=det["zeta"] if det["zeta"] is not None else 0.0,
        policy=det["policy"],
        sigma2=sc["sigma2"],
        resync_period=det["resync_period"],
    )
    scenario = ScenarioConfig(
        k_tot=sc["k_tot"],
        k_a=sc["k_a"],
        m=m,
        d=sc["d"],
        n_k=sc["n_k"],
        g=sc["g"],
        sigma2=sc["sigma2"],
        tree=tree,
        channel=channel,
        detector=detector,
        trials=sc["trials"],
        master_seed=sc["master_seed"],
        zeta_rel=det["zeta_rel"],
        max_paths=det["max_paths"],
        workers=sc["workers"],
        codebook_normalized=sc["codebook_normalized"],
        codebook_max_bytes=sc["codebook_max_bytes"],
    )
    scenario.validate()
    return scenario
