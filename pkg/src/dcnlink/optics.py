"""Optical components, component sequences, and dB-domain power propagation.

Powers are plain floats in dBm, wavelengths in nm. Passive insertion losses
are stored as positive dB and subtracted; amplifier gain is positive dB and
added. All types are immutable and all operations are pure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import ConfigError, SequenceError


class ComponentKind(Enum):
    # S covers both power splitter and combiner, M both mux and demux.
    POWER_SPLIT = "power_split"
    WAVELENGTH_MUX = "wavelength_mux"
    AMPLIFIER = "amplifier"


PASSIVE_KINDS = (ComponentKind.POWER_SPLIT, ComponentKind.WAVELENGTH_MUX)

_LETTER_TO_KIND = {
    "S": ComponentKind.POWER_SPLIT,
    "M": ComponentKind.WAVELENGTH_MUX,
}
_KIND_TO_LETTER = {v: k for k, v in _LETTER_TO_KIND.items()}

#: An ordered chain of passive components.
ComponentSequence = tuple[ComponentKind, ...]


def parse_sequence(text: str) -> ComponentSequence:
    """Parse letter notation ('S' = splitter/combiner, 'M' = mux/demux).

    The placeholder '-' and the empty string both mean an empty chain.
    Raises SequenceError naming the first bad character (1-based position).
    """
    if text in ("", "-"):
        return ()
    kinds = []
    for i, ch in enumerate(text, start=1):
        kind = _LETTER_TO_KIND.get(ch.upper())
        if kind is None:
            raise SequenceError(text, i, ch)
        kinds.append(kind)
    return tuple(kinds)


def sequence_text(seq: ComponentSequence) -> str:
    """Inverse of parse_sequence; '-' for the empty chain."""
    if not seq:
        return "-"
    return "".join(_KIND_TO_LETTER[k] for k in seq)


def component_counts(seq: ComponentSequence) -> tuple[int, int]:
    """Occurrence counts (n_splitters, n_muxes)."""
    n_s = sum(1 for k in seq if k is ComponentKind.POWER_SPLIT)
    return n_s, len(seq) - n_s


@dataclass(frozen=True)
class ComponentSpec:
    """Per-wavelength dB effect of one component kind.

    The value is an insertion loss for passive kinds and a gain for the
    amplifier; either way it must be a positive, finite dB figure.
    """

    kind: ComponentKind
    db_by_wavelength: Mapping[float, float]

    def __post_init__(self):
        norm = {}
        for wl, db in self.db_by_wavelength.items():
            wl = float(wl)
            db = float(db)
            if not (wl > 0):
                raise ConfigError(f"wavelength must be positive, got {wl}")
            if not (math.isfinite(db) and db > 0):
                raise ConfigError(
                    f"{self.kind.value} effect at {wl} nm must be a positive "
                    f"finite dB value, got {db}"
                )
            norm[wl] = db
        object.__setattr__(self, "db_by_wavelength", norm)

    def effect_db(self, wavelength_nm: float) -> float:
        try:
            return self.db_by_wavelength[float(wavelength_nm)]
        except KeyError:
            raise ConfigError(
                f"no {self.kind.value} entry for {wavelength_nm} nm"
            ) from None


#: Component kind -> spec. Only passive kinds are consulted by propagate();
#: the amplifier spec travels inside the LinkDesign itself.
ComponentLibrary = dict[ComponentKind, ComponentSpec]


@dataclass(frozen=True)
class LinkDesign:
    """A candidate link: passive chains around an optional amplifier.

    Without an amplifier the whole chain sits in ``left`` and ``right`` must
    be empty. With an amplifier ``left`` must be non-empty; ``right`` may be
    empty (amplifier output patched straight to the receiver).
    """

    left: ComponentSequence
    amplifier: ComponentSpec | None
    right: ComponentSequence
    launch_dbm: float
    wavelength_nm: float

    def __post_init__(self):
        if not math.isfinite(self.launch_dbm):
            raise ConfigError(f"launch power must be finite, got {self.launch_dbm}")
        if not self.wavelength_nm > 0:
            raise ConfigError(f"wavelength must be positive, got {self.wavelength_nm}")
        for seq in (self.left, self.right):
            if any(k not in PASSIVE_KINDS for k in seq):
                raise ConfigError("component chains may contain passive kinds only")
        if self.amplifier is None:
            if self.right:
                raise ConfigError("a design without an amplifier cannot have a right chain")
        else:
            if self.amplifier.kind is not ComponentKind.AMPLIFIER:
                raise ConfigError("amplifier slot must hold an amplifier spec")
            if not self.left:
                raise ConfigError("the chain before the amplifier cannot be empty")

    @property
    def total_components(self) -> int:
        return len(self.left) + (1 if self.amplifier else 0) + len(self.right)


@dataclass(frozen=True)
class PowerTrace:
    """Power at every component boundary, starting at the launch stage.

    ``preamp_index`` points at the stage immediately before the amplifier,
    or is None when the design has none.
    """

    stages: tuple[tuple[str, float], ...]
    preamp_index: int | None = None


def propagate(design: LinkDesign, library: ComponentLibrary) -> PowerTrace:
    """Run the launch power through the design, one component at a time.

    Each passive component subtracts its library loss at the design
    wavelength; the amplifier (if any) adds its own gain. Raises ConfigError
    when the library lacks a kind or a wavelength entry.
    """
    wl = design.wavelength_nm
    stages = [("launch", design.launch_dbm)]
    power = design.launch_dbm
    preamp_index = None
    position = 0

    def passive_step(kind: ComponentKind) -> float:
        spec = library.get(kind)
        if spec is None:
            raise ConfigError(f"component library has no entry for {kind.value}")
        return spec.effect_db(wl)

    for kind in design.left:
        position += 1
        power -= passive_step(kind)
        stages.append((f"{_KIND_TO_LETTER[kind]}{position}", power))
    if design.amplifier is not None:
        preamp_index = len(stages) - 1
        power += design.amplifier.effect_db(wl)
        stages.append(("amp", power))
        for kind in design.right:
            position += 1
            power -= passive_step(kind)
            stages.append((f"{_KIND_TO_LETTER[kind]}{position}", power))
    return PowerTrace(stages=tuple(stages), preamp_index=preamp_index)


def preamp_power(trace: PowerTrace) -> float | None:
    """Power at the amplifier input, or None for amplifier-free traces."""
    if trace.preamp_index is None:
        return None
    return trace.stages[trace.preamp_index][1]


def rx_power(trace: PowerTrace) -> float:
    """Power at the receiver (the last stage)."""
    return trace.stages[-1][1]


# ---------------------------------------------------------------------------
# Component-library config files
# ---------------------------------------------------------------------------
# JSON document mapping kind name -> {"loss_db" | "gain_db": {"<nm>": value}}.
# A "rules" key may sit alongside in the same file (see rules.load_rules).

_EFFECT_KEY = {
    ComponentKind.POWER_SPLIT: "loss_db",
    ComponentKind.WAVELENGTH_MUX: "loss_db",
    ComponentKind.AMPLIFIER: "gain_db",
}


def library_from_json(obj: dict) -> ComponentLibrary:
    if not isinstance(obj, dict):
        raise ConfigError("component library must be a JSON object")
    known = {k.value: k for k in ComponentKind}
    library: ComponentLibrary = {}
    for name, entry in obj.items():
        if name == "rules":
            continue
        kind = known.get(name)
        if kind is None:
            raise ConfigError(f"unknown component kind {name!r} in library")
        key = _EFFECT_KEY[kind]
        if not isinstance(entry, dict) or key not in entry:
            raise ConfigError(f"library entry {name!r} must carry a {key!r} map")
        try:
            table = {float(wl): float(db) for wl, db in entry[key].items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {key} map for {name!r}: {exc}") from None
        library[kind] = ComponentSpec(kind, table)
    if not library:
        raise ConfigError("component library defines no components")
    return library


def library_to_json(library: ComponentLibrary) -> dict:
    out = {}
    for kind, spec in library.items():
        key = _EFFECT_KEY[kind]
        out[kind.value] = {key: {repr(wl): db for wl, db in sorted(spec.db_by_wavelength.items())}}
    return out


def load_library(path) -> ComponentLibrary:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read component library {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"component library {path} is not valid JSON: {exc}") from None
    return library_from_json(obj)


def save_library(library: ComponentLibrary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(library_to_json(library), fh, indent=2, sort_keys=True)
        fh.write("\n")
