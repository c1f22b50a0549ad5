"""Pass/fail decision rules: BER labeling, threshold stumps, power floors.

The empirical model is deliberately tiny: a link passes when its measured
(or predicted) powers clear fixed dBm floors, and those floors are learned
from labeled measurements with a depth-1 decision tree (a stump).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .errors import (
    ConfigError,
    DegenerateTrainingError,
    NoSplitError,
)


class PassFail(Enum):
    PASS = "pass"
    FAIL = "fail"


def label_from_ber(log10_ber: float, tolerance_log10: float) -> PassFail:
    """Pass iff the BER is strictly below the tolerance (log10 comparison)."""
    if not (math.isfinite(log10_ber) and math.isfinite(tolerance_log10)):
        raise ConfigError("BER and tolerance must be finite log10 values")
    return PassFail.PASS if log10_ber < tolerance_log10 else PassFail.FAIL


@dataclass(frozen=True)
class LabeledSample:
    scenario: str
    features: Mapping[str, float]
    label: PassFail


@dataclass(frozen=True)
class DecisionStump:
    """One feature, one threshold; values <= threshold route to the low leaf."""

    feature: str
    threshold: float
    low_label: PassFail
    high_label: PassFail
    low_count: int
    high_count: int
    impurity: float
    misclassified: int

    def predict(self, value: float) -> PassFail:
        return self.low_label if value <= self.threshold else self.high_label

    def to_json(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "low_label": self.low_label.value,
            "high_label": self.high_label.value,
            "counts": {"low": self.low_count, "high": self.high_count},
            "impurity": self.impurity,
            "misclassified": self.misclassified,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DecisionStump":
        try:
            return cls(
                feature=str(obj["feature"]),
                threshold=float(obj["threshold"]),
                low_label=PassFail(obj["low_label"]),
                high_label=PassFail(obj["high_label"]),
                low_count=int(obj["counts"]["low"]),
                high_count=int(obj["counts"]["high"]),
                impurity=float(obj["impurity"]),
                misclassified=int(obj["misclassified"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad stump document: {exc}") from None


def _gini(n_fail: int, n_pass: int) -> float:
    n = n_fail + n_pass
    if n == 0:
        return 0.0
    pf = n_fail / n
    pp = n_pass / n
    return 1.0 - pf * pf - pp * pp


def _majority(n_fail: int, n_pass: int) -> PassFail:
    # Ties go to Fail: the conservative call for an accept/reject gate.
    return PassFail.PASS if n_pass > n_fail else PassFail.FAIL


def learn_stump(data: Sequence[LabeledSample], feature: str) -> DecisionStump:
    """Exhaustive minimum-Gini threshold search over one feature.

    Candidate thresholds are midpoints of adjacent distinct sorted feature
    values. Impurity ties keep the lowest threshold; leaf-majority ties
    label the leaf Fail.
    """
    pairs = []
    for s in data:
        if feature not in s.features:
            raise ConfigError(f"sample {s.scenario!r} lacks feature {feature!r}")
        pairs.append((float(s.features[feature]), s.label))

    labels = {lab for _, lab in pairs}
    if len(labels) < 2:
        raise DegenerateTrainingError(
            f"training data for {feature!r} contains a single class"
        )
    pairs.sort(key=lambda p: p[0])
    values = [v for v, _ in pairs]
    if values[0] == values[-1]:
        raise NoSplitError(f"feature {feature!r} has a single distinct value")

    n = len(pairs)
    total_fail = sum(1 for _, lab in pairs if lab is PassFail.FAIL)
    total_pass = n - total_fail

    best = None  # (impurity, threshold, low_fail, low_pass)
    low_fail = low_pass = 0
    for i in range(n - 1):
        if pairs[i][1] is PassFail.FAIL:
            low_fail += 1
        else:
            low_pass += 1
        if values[i] == values[i + 1]:
            continue
        threshold = (values[i] + values[i + 1]) / 2.0
        n_low = low_fail + low_pass
        impurity = (
            n_low * _gini(low_fail, low_pass)
            + (n - n_low) * _gini(total_fail - low_fail, total_pass - low_pass)
        ) / n
        if best is None or impurity < best[0]:
            best = (impurity, threshold, low_fail, low_pass)

    impurity, threshold, low_fail, low_pass = best
    high_fail = total_fail - low_fail
    high_pass = total_pass - low_pass
    low_label = _majority(low_fail, low_pass)
    high_label = _majority(high_fail, high_pass)
    misclassified = (
        (low_pass if low_label is PassFail.FAIL else low_fail)
        + (high_pass if high_label is PassFail.FAIL else high_fail)
    )
    return DecisionStump(
        feature=feature,
        threshold=threshold,
        low_label=low_label,
        high_label=high_label,
        low_count=low_fail + low_pass,
        high_count=high_fail + high_pass,
        impurity=impurity,
        misclassified=misclassified,
    )


# ---------------------------------------------------------------------------
# Fixed power-floor rules
# ---------------------------------------------------------------------------

_RULE_FIELDS = (
    "rx_floor_no_amp",
    "preamp_floor",
    "rx_floor_with_amp",
    "ber_tolerance_log10",
)


@dataclass(frozen=True)
class ThresholdRuleSet:
    """Empirical dBm floors; a link passes at or above each applicable floor."""

    rx_floor_no_amp: float = -16.25
    preamp_floor: float = -26.38
    rx_floor_with_amp: float = -12.25
    ber_tolerance_log10: float = -12.0

    def __post_init__(self):
        for name in _RULE_FIELDS[:3]:
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not self.ber_tolerance_log10 < 0:
            raise ConfigError("ber_tolerance_log10 must be negative")


@dataclass(frozen=True)
class Verdict:
    """Outcome of applying the floors, with per-rule margins in dB."""

    decision: PassFail
    margins: Mapping[str, float]
    failed_rules: tuple[str, ...] = ()


def _verdict(margins: dict[str, float]) -> Verdict:
    failed = tuple(name for name, m in margins.items() if m < 0)
    decision = PassFail.FAIL if failed else PassFail.PASS
    return Verdict(decision=decision, margins=margins, failed_rules=failed)


def classify_no_amp(rx_dbm: float, rules: ThresholdRuleSet) -> Verdict:
    """Amplifier-free link: pass iff rx power is at or above the rx floor."""
    return _verdict({"rx_floor_no_amp": rx_dbm - rules.rx_floor_no_amp})


def classify_with_amp(preamp_dbm: float, rx_dbm: float, rules: ThresholdRuleSet) -> Verdict:
    """Amplified link: both the amplifier-input and receiver floors must hold."""
    return _verdict(
        {
            "preamp_floor": preamp_dbm - rules.preamp_floor,
            "rx_floor_with_amp": rx_dbm - rules.rx_floor_with_amp,
        }
    )


@dataclass(frozen=True)
class RuleAccuracy:
    correct: int
    total: int
    errors: tuple[str, ...] = ()


def evaluate_rule_accuracy(
    rules: ThresholdRuleSet, data: Iterable[LabeledSample]
) -> RuleAccuracy:
    """Score the fixed floors against labeled measurements.

    Rule applicability follows the features a sample carries: a "preamp"
    value invokes the amplifier-input floor (plus the with-amp receiver
    floor when "rx" is also present); a bare "rx" value invokes the
    amplifier-free receiver floor.
    """
    correct = 0
    total = 0
    errors = []
    for s in data:
        has_preamp = "preamp" in s.features
        has_rx = "rx" in s.features
        if has_preamp:
            ok = s.features["preamp"] >= rules.preamp_floor and (
                not has_rx or s.features["rx"] >= rules.rx_floor_with_amp
            )
        elif has_rx:
            ok = s.features["rx"] >= rules.rx_floor_no_amp
        else:
            raise ConfigError(
                f"sample {s.scenario!r} carries neither a preamp nor an rx feature"
            )
        predicted = PassFail.PASS if ok else PassFail.FAIL
        total += 1
        if predicted is s.label:
            correct += 1
        else:
            errors.append(s.scenario)
    return RuleAccuracy(correct=correct, total=total, errors=tuple(errors))


def rules_from_json(obj: dict) -> ThresholdRuleSet:
    if "rules" in obj:
        obj = obj["rules"]
    if not isinstance(obj, dict):
        raise ConfigError("rules section must be a JSON object")
    unknown = set(obj) - set(_RULE_FIELDS)
    if unknown:
        raise ConfigError(f"unknown rule fields: {sorted(unknown)}")
    try:
        kwargs = {k: float(v) for k, v in obj.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad rule value: {exc}") from None
    return ThresholdRuleSet(**kwargs)


def load_rules(path) -> ThresholdRuleSet:
    """Read floors from a config file (standalone or alongside a library).

    The document either carries a "rules" object or consists purely of rule
    fields at the top level.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read rules file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"rules file {path} is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError("rules file must hold a JSON object")
    if "rules" not in obj and not set(obj) <= set(_RULE_FIELDS):
        raise ConfigError(f"no rules section found in {path}")
    return rules_from_json(obj)
