"""Run configuration: an INI document with flat ``[lattice]``, ``[geometry]``,
``[initial]`` and ``[run]`` sections.

Every key, its type and default is listed in ``KEYS``; unknown sections or
keys are rejected. :func:`dump_config` writes a complete echo (defaults
included) that parses back to an equal :class:`RunConfig`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .geometry import GeometryPreset, OpticalGeometry, couplings_from_g
from .lattice import InitialState, LatticeSpec, StateKind
from .trajectory import DEFAULT_CADENCE, DEFAULT_EPSILON, StopRule


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _float(text: str) -> float:
    return float(text)


def _complex(text: str) -> complex:
    return complex(text.replace(" ", ""))


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        return None if text.strip().lower() in ("", "none") else conv(text)

    return parse


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


# section -> key -> (parser, default); None default means required
KEYS: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "lattice": {
        "n_atoms": (int, None),
        "n_sites": (int, None),
        "pattern": (str, "contiguous"),  # contiguous | alternating | full | explicit
        "n_illuminated": (_optional(int), None),
        "mask": (_int_list, ()),
    },
    "geometry": {
        "preset": (str, None),  # diffraction_maximum | diffraction_minimum | mirror_probe
        "kappa": (_float, 1.0),
        "detuning": (_float, 0.0),
        "u10": (_float, 1.0),
        "u11": (_optional(_float), None),
        "a0": (_complex, 1 + 0j),
        "eta": (_complex, 1 + 0j),
        "g0": (_optional(_float), None),
        "g1": (_optional(_float), None),
        "atom_detuning": (_optional(_float), None),
    },
    "initial": {
        "kind": (str, "superfluid"),  # superfluid | mott
    },
    "run": {
        "mode": (str, "trajectory"),  # trajectory | ensemble | oracle-check
        "seed": (int, 1),
        "n_traj": (int, 1000),
        "max_time": (_optional(_float), None),
        "max_tau": (_optional(_float), None),
        "epsilon": (_float, DEFAULT_EPSILON),
        "stop_on_collapse": (_bool, False),
        "snapshots": (_float_list, ()),
        "cadence": (int, DEFAULT_CADENCE),
        "oracle_records": (int, 50),
        "oracle_checkpoints": (int, 20),
    },
}

# keys whose default of None means "not given" rather than "required"
OPTIONAL_KEYS = {
    ("lattice", "n_illuminated"),
    ("geometry", "u11"),
    ("geometry", "g0"),
    ("geometry", "g1"),
    ("geometry", "atom_detuning"),
    ("run", "max_time"),
    ("run", "max_tau"),
}
MODES = ("trajectory", "ensemble", "oracle-check")


@dataclass(frozen=True)
class RunConfig:
    lattice: dict[str, Any] = field(default_factory=dict)
    geometry: dict[str, Any] = field(default_factory=dict)
    initial: dict[str, Any] = field(default_factory=dict)
    run: dict[str, Any] = field(default_factory=dict)

    def section(self, name: str) -> dict[str, Any]:
        return getattr(self, name)

    def with_run(self, **updates: Any) -> RunConfig:
        run = dict(self.run)
        for k, v in updates.items():
            if v is not None:
                run[k] = v
        cfg = RunConfig(dict(self.lattice), dict(self.geometry), dict(self.initial), run)
        validate(cfg)
        return cfg

    # builders -------------------------------------------------------------

    def build_lattice(self) -> LatticeSpec:
        c = self.lattice
        n, m, pattern = c["n_atoms"], c["n_sites"], c["pattern"]
        if pattern == "contiguous":
            k = c["n_illuminated"] if c["n_illuminated"] is not None else m
            return LatticeSpec.contiguous(n, m, k)
        if pattern == "alternating":
            return LatticeSpec.alternating(n, m)
        if pattern == "full":
            return LatticeSpec.full(n, m)
        return LatticeSpec(n, m, tuple(bool(x) for x in c["mask"]))

    def couplings(self) -> tuple[float, float]:
        c = self.geometry
        if c["g0"] is not None:
            return couplings_from_g(c["g0"], c["g1"], c["atom_detuning"])
        preset = GeometryPreset(c["preset"])
        default_u11 = 1.0 if preset is GeometryPreset.MIRROR_PROBE else 0.0
        return c["u10"], default_u11 if c["u11"] is None else c["u11"]

    def build_geometry(self, lattice: LatticeSpec | None = None) -> OpticalGeometry:
        c = self.geometry
        lattice = lattice or self.build_lattice()
        u10, u11 = self.couplings()
        preset = GeometryPreset(c["preset"])
        if preset is GeometryPreset.MIRROR_PROBE:
            return OpticalGeometry.mirror_probe(
                lattice, eta=c["eta"], u11=u11, detuning=c["detuning"], kappa=c["kappa"]
            )
        return OpticalGeometry.from_preset(
            preset, lattice, u10=u10, a0=c["a0"], detuning=c["detuning"], kappa=c["kappa"], u11=u11
        )

    def build_initial(self) -> InitialState:
        return InitialState(StateKind(self.initial["kind"]))

    def stop_rule(self) -> StopRule:
        r = self.run
        return StopRule(r["max_time"], r["max_tau"], r["epsilon"], r["stop_on_collapse"])


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises:
        ConfigError: for unknown or missing keys, unparsable values and
            violated constraints; the error names the key.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # type: ignore[assignment]
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<document>", str(exc)) from None
    for name in parser.sections():
        if name not in KEYS:
            raise ConfigError(name, "unknown section")
    values: dict[str, dict[str, Any]] = {}
    for name, spec in KEYS.items():
        given = dict(parser[name]) if parser.has_section(name) else {}
        for key in given:
            if key not in spec:
                raise ConfigError(f"{name}.{key}", "unknown key")
        sec: dict[str, Any] = {}
        for key, (conv, default) in spec.items():
            if key in given:
                try:
                    sec[key] = conv(given[key])
                except ValueError as exc:
                    raise ConfigError(f"{name}.{key}", f"cannot parse {given[key]!r} ({exc})") from None
            elif default is None and (name, key) not in OPTIONAL_KEYS:
                raise ConfigError(f"{name}.{key}", "required key missing")
            else:
                sec[key] = default
        values[name] = sec
    cfg = RunConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    lat, geo, ini, run = cfg.lattice, cfg.geometry, cfg.initial, cfg.run

    def need(ok: bool, key: str, msg: str) -> None:
        if not ok:
            raise ConfigError(key, msg)

    for sec_name in KEYS:
        for key, val in cfg.section(sec_name).items():
            if isinstance(val, (float, complex)):
                need(math.isfinite(abs(val)), f"{sec_name}.{key}", "must be finite")
            if isinstance(val, tuple):
                need(all(math.isfinite(x) for x in val), f"{sec_name}.{key}", "must be finite")
    need(lat["n_atoms"] >= 1, "lattice.n_atoms", "must be >= 1")
    need(lat["n_sites"] >= 1, "lattice.n_sites", "must be >= 1")
    need(lat["pattern"] in ("contiguous", "alternating", "full", "explicit"), "lattice.pattern",
         "must be contiguous, alternating, full or explicit")
    if lat["pattern"] == "contiguous" and lat["n_illuminated"] is not None:
        need(1 <= lat["n_illuminated"] <= lat["n_sites"], "lattice.n_illuminated", "need 1 <= K <= M")
    if lat["pattern"] == "alternating":
        need(lat["n_sites"] % 2 == 0, "lattice.pattern", "alternating pattern requires even n_sites")
    if lat["pattern"] == "explicit":
        need(len(lat["mask"]) == lat["n_sites"] and set(lat["mask"]) <= {0, 1} and any(lat["mask"]),
             "lattice.mask", "need n_sites entries of 0/1 with at least one 1")
    need(geo["preset"] in ("diffraction_maximum", "diffraction_minimum", "mirror_probe"), "geometry.preset",
         "must be diffraction_maximum, diffraction_minimum or mirror_probe")
    need(geo["kappa"] > 0, "geometry.kappa", "must be > 0")
    g_given = [geo[k] is not None for k in ("g0", "g1", "atom_detuning")]
    need(all(g_given) or not any(g_given), "geometry.g0", "g0, g1 and atom_detuning go together")
    if all(g_given):
        need(geo["atom_detuning"] != 0, "geometry.atom_detuning", "must be non-zero")
    if geo["preset"] == "mirror_probe":
        need(geo["eta"] != 0, "geometry.eta", "mirror probing needs eta != 0")
    else:
        need(geo["a0"] != 0, "geometry.a0", "transverse probing needs a0 != 0")
        need(cfg.couplings()[0] != 0, "geometry.u10", "transverse probing needs u10 != 0")
    need(ini["kind"] in ("superfluid", "mott"), "initial.kind", "must be superfluid or mott")
    if ini["kind"] == "mott":
        need(lat["n_atoms"] % lat["n_sites"] == 0, "initial.kind", "mott state requires N divisible by M")
    need(run["mode"] in MODES, "run.mode", f"must be one of {', '.join(MODES)}")
    need(run["n_traj"] >= 1, "run.n_traj", "must be >= 1")
    need(run["max_time"] is not None or run["max_tau"] is not None, "run.max_time",
         "give max_time or max_tau")
    if run["max_time"] is not None:
        need(run["max_time"] > 0, "run.max_time", "must be > 0")
    if run["max_tau"] is not None:
        need(run["max_tau"] > 0, "run.max_tau", "must be > 0")
        need(geo["preset"] != "mirror_probe", "run.max_tau", "tau is only defined for transverse probing")
    need(0 < run["epsilon"] < 1, "run.epsilon", "must lie in (0, 1)")
    need(run["cadence"] >= 0, "run.cadence", "must be >= 0")
    need(all(x >= 0 for x in run["snapshots"]), "run.snapshots", "must be >= 0")
    need(run["oracle_records"] >= 1, "run.oracle_records", "must be >= 1")
    need(run["oracle_checkpoints"] >= 1, "run.oracle_checkpoints", "must be >= 1")


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, complex):
        return repr(value).strip("()")
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def dump_config(cfg: RunConfig) -> str:
    """Complete configuration echo, defaults included."""
    lines = []
    for name, spec in KEYS.items():
        lines.append(f"[{name}]")
        sec = cfg.section(name)
        for key in spec:
            lines.append(f"{key} = {_format(sec[key])}")
        lines.append("")
    return "\n".join(lines)
