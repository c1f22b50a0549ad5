"""Loss calibration and combinatorial design-space exploration.

Calibration fits per-component losses to passive-link measurements in least
squares; exploration walks every candidate chain in a bounded space, keeps
the designs that clear the power floors, and ranks them.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator

import numpy as np

from .datasets import Dataset, table1
from .errors import ConfigError, UnidentifiableError
from .optics import (
    ComponentKind,
    ComponentLibrary,
    ComponentSequence,
    ComponentSpec,
    LinkDesign,
    PowerTrace,
    component_counts,
    preamp_power,
    propagate,
    rx_power,
    sequence_text,
)
from .rules import (
    PassFail,
    ThresholdRuleSet,
    Verdict,
    classify_no_amp,
    classify_with_amp,
)

_PARAM_NAMES = ("launch", "loss_S", "loss_M")

# Margins are quantized this finely when ranking, so that designs whose
# margins are mathematically equal (same components, different order) tie
# exactly and fall through to the lexicographic tie-break.
_MARGIN_QUANTUM_DECIMALS = 9


@dataclass(frozen=True)
class CalibrationResult:
    """Least-squares per-component losses plus an estimated launch power.

    The measurement tables are not exactly consistent with a linear loss
    model, so a nonzero residual_rms_db is expected on real data.
    """

    wavelength_nm: float
    launch_dbm: float
    loss_s_db: float
    loss_m_db: float
    residual_rms_db: float
    residuals: tuple[tuple[str, float], ...]


def calibrate_losses(ds: Dataset, wavelength_nm: float) -> CalibrationResult:
    """Fit (launch, loss_S, loss_M) to the passive records at one wavelength.

    Minimizes sum_i (rx_i - launch + nS_i * loss_S + nM_i * loss_M)^2.
    Raises UnidentifiableError when the design matrix is rank deficient,
    listing the dependent parameter columns.
    """
    rows = [
        r
        for r in ds
        if not r.has_amplifier
        and r.rx_dbm is not None
        and r.wavelength_nm == float(wavelength_nm)
    ]
    scenarios = [r.scenario for r in rows]
    counts = [component_counts(r.left_seq + r.right_seq) for r in rows]
    a = np.array([[1.0, -ns, -nm] for ns, nm in counts], dtype=float).reshape(-1, 3)
    y = np.array([r.rx_dbm for r in rows], dtype=float)

    rank = np.linalg.matrix_rank(a) if len(rows) else 0
    if rank < 3:
        dependent = []
        for j, name in enumerate(_PARAM_NAMES):
            reduced = np.delete(a, j, axis=1)
            if len(rows) and np.linalg.matrix_rank(reduced) == rank:
                dependent.append(name)
        raise UnidentifiableError(dependent or _PARAM_NAMES)

    solution, _, _, _ = np.linalg.lstsq(a, y, rcond=None)
    launch, loss_s, loss_m = (float(v) for v in solution)
    residuals = y - a @ solution
    return CalibrationResult(
        wavelength_nm=float(wavelength_nm),
        launch_dbm=launch,
        loss_s_db=loss_s,
        loss_m_db=loss_m,
        residual_rms_db=float(np.sqrt(np.mean(residuals**2))),
        residuals=tuple(zip(scenarios, (float(r) for r in residuals))),
    )


@lru_cache(maxsize=1)
def _default_calibrations() -> tuple[CalibrationResult, ...]:
    ds = table1()
    wavelengths = sorted({r.wavelength_nm for r in ds})
    return tuple(calibrate_losses(ds, wl) for wl in wavelengths)


def default_library() -> ComponentLibrary:
    """Passive library calibrated from the built-in passive-link table."""
    cals = _default_calibrations()
    return {
        ComponentKind.POWER_SPLIT: ComponentSpec(
            ComponentKind.POWER_SPLIT,
            {c.wavelength_nm: c.loss_s_db for c in cals},
        ),
        ComponentKind.WAVELENGTH_MUX: ComponentSpec(
            ComponentKind.WAVELENGTH_MUX,
            {c.wavelength_nm: c.loss_m_db for c in cals},
        ),
    }


# ---------------------------------------------------------------------------
# Design spaces
# ---------------------------------------------------------------------------


class AmplifierMode(Enum):
    REQUIRED = "required"
    FORBIDDEN = "forbidden"
    OPTIONAL = "optional"


@dataclass(frozen=True)
class DesignSpace:
    """Bounds for enumeration: chain lengths, amplifier policy, launch."""

    max_left: int
    max_right: int
    amplifier: AmplifierMode
    launch_dbm: float
    wavelength_nm: float
    gain_db: float | None = None

    def __post_init__(self):
        if self.max_left < 0 or self.max_right < 0:
            raise ConfigError("chain length bounds must be nonnegative")
        if self.amplifier is AmplifierMode.FORBIDDEN and self.max_right != 0:
            raise ConfigError("max_right must be 0 when the amplifier is forbidden")
        if self.gain_db is not None and not self.gain_db > 0:
            raise ConfigError(f"amplifier gain must be positive, got {self.gain_db}")


def load_design_space(path) -> DesignSpace:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read design space {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"design space {path} is not valid JSON: {exc}") from None
    try:
        amp = obj.get("amplifier", {})
        mode = AmplifierMode(amp.get("mode", "forbidden"))
        gain = amp.get("gain_db")
        return DesignSpace(
            max_left=int(obj["max_left"]),
            max_right=int(obj.get("max_right", 0)),
            amplifier=mode,
            launch_dbm=float(obj["launch_dbm"]),
            wavelength_nm=float(obj["wavelength_nm"]),
            gain_db=None if gain is None else float(gain),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad design space document: {exc}") from None


_ALPHABET = (ComponentKind.POWER_SPLIT, ComponentKind.WAVELENGTH_MUX)


def _sequences(max_len: int, min_len: int = 0) -> Iterator[ComponentSequence]:
    # Shortlex: shorter chains first, S before M at each slot.
    for length in range(min_len, max_len + 1):
        yield from itertools.product(_ALPHABET, repeat=length)


def _amp_spec(space: DesignSpace) -> ComponentSpec:
    if space.gain_db is None:
        raise ConfigError("amplifier gain is required to enumerate amplified designs")
    return ComponentSpec(ComponentKind.AMPLIFIER, {space.wavelength_nm: space.gain_db})


def enumerate_designs(space: DesignSpace) -> Iterator[LinkDesign]:
    """Every design in the space, in deterministic shortlex order.

    Amplifier-free designs stream first (when allowed), then amplified
    designs in left-major order. Amplified designs always have a non-empty
    left chain; the right chain may be empty.
    """
    if space.amplifier in (AmplifierMode.FORBIDDEN, AmplifierMode.OPTIONAL):
        for left in _sequences(space.max_left):
            yield LinkDesign(
                left=left,
                amplifier=None,
                right=(),
                launch_dbm=space.launch_dbm,
                wavelength_nm=space.wavelength_nm,
            )
    if space.amplifier in (AmplifierMode.REQUIRED, AmplifierMode.OPTIONAL):
        if space.max_left < 1:
            return
        amp = _amp_spec(space)
        for left in _sequences(space.max_left, min_len=1):
            for right in _sequences(space.max_right):
                yield LinkDesign(
                    left=left,
                    amplifier=amp,
                    right=right,
                    launch_dbm=space.launch_dbm,
                    wavelength_nm=space.wavelength_nm,
                )


def evaluate_design(
    design: LinkDesign, library: ComponentLibrary, rules: ThresholdRuleSet
) -> tuple[PowerTrace, Verdict]:
    """Propagate and apply the floors appropriate to the design shape."""
    trace = propagate(design, library)
    if design.amplifier is None:
        verdict = classify_no_amp(rx_power(trace), rules)
    else:
        verdict = classify_with_amp(preamp_power(trace), rx_power(trace), rules)
    return trace, verdict


@dataclass(frozen=True)
class FeasibleDesign:
    design: LinkDesign
    trace: PowerTrace
    verdict: Verdict
    min_margin_db: float


def _seq_key(seq: ComponentSequence) -> tuple:
    return (len(seq), tuple(_ALPHABET.index(k) for k in seq))


def _rank_key(fd: FeasibleDesign) -> tuple:
    return (
        fd.design.total_components,
        -round(fd.min_margin_db, _MARGIN_QUANTUM_DECIMALS),
        _seq_key(fd.design.left),
        _seq_key(fd.design.right),
        fd.design.amplifier is not None,
    )


def explore(
    space: DesignSpace, library: ComponentLibrary, rules: ThresholdRuleSet
) -> list[FeasibleDesign]:
    """All passing designs in the space, best first.

    Ranking: fewest total components, then largest minimum margin, then
    shortlex on the chains. Exhaustive up to a sound prune: passive
    components only lose power, so once a chain prefix falls below the
    applicable floor every extension of it is skipped.
    """
    losses = {}
    for kind in _ALPHABET:
        spec = library.get(kind)
        if spec is None:
            raise ConfigError(f"component library has no entry for {kind.value}")
        losses[kind] = spec.effect_db(space.wavelength_nm)

    feasible: list[FeasibleDesign] = []

    def keep(left: ComponentSequence, amp: ComponentSpec | None, right: ComponentSequence):
        design = LinkDesign(
            left=left,
            amplifier=amp,
            right=right,
            launch_dbm=space.launch_dbm,
            wavelength_nm=space.wavelength_nm,
        )
        trace, verdict = evaluate_design(design, library, rules)
        if verdict.decision is PassFail.PASS:
            feasible.append(
                FeasibleDesign(
                    design=design,
                    trace=trace,
                    verdict=verdict,
                    min_margin_db=min(verdict.margins.values()),
                )
            )

    def walk_passive(prefix: ComponentSequence, power: float, max_len: int, floor: float, emit):
        if power < floor:
            return  # every extension only loses more power
        emit(prefix, power)
        if len(prefix) < max_len:
            for kind in _ALPHABET:
                walk_passive(prefix + (kind,), power - losses[kind], max_len, floor, emit)

    if space.amplifier in (AmplifierMode.FORBIDDEN, AmplifierMode.OPTIONAL):
        walk_passive(
            (),
            space.launch_dbm,
            space.max_left,
            rules.rx_floor_no_amp,
            lambda left, _power: keep(left, None, ()),
        )

    if space.amplifier in (AmplifierMode.REQUIRED, AmplifierMode.OPTIONAL) and space.max_left >= 1:
        amp = _amp_spec(space)
        gain = amp.effect_db(space.wavelength_nm)

        def emit_left(left: ComponentSequence, preamp: float):
            if not left:
                return
            walk_passive(
                (),
                preamp + gain,
                space.max_right,
                rules.rx_floor_with_amp,
                lambda right, _power: keep(left, amp, right),
            )

        walk_passive((), space.launch_dbm, space.max_left, rules.preamp_floor, emit_left)

    feasible.sort(key=_rank_key)
    return feasible


def results_to_csv(results: list[FeasibleDesign], fh) -> None:
    """`rank,left_seq,right_seq,amp,rx_dbm,preamp_dbm,min_margin_db` rows."""
    fh.write("rank,left_seq,right_seq,amp,rx_dbm,preamp_dbm,min_margin_db\n")
    for rank, fd in enumerate(results, start=1):
        pre = preamp_power(fd.trace)
        fh.write(
            f"{rank},{sequence_text(fd.design.left)},{sequence_text(fd.design.right)},"
            f"{1 if fd.design.amplifier else 0},{rx_power(fd.trace):.6f},"
            f"{'' if pre is None else f'{pre:.6f}'},{fd.min_margin_db:.6f}\n"
        )
