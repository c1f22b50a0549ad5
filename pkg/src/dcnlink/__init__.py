"""Power-budget feasibility modeling for short-reach optical DCN links."""

from .berstats import (
    BerValue,
    MixtureFit,
    ber_from_q,
    estimate_ber,
    fit_mixture,
    q_factor,
    read_samples,
)
from .datasets import (
    Dataset,
    MeasurementRecord,
    load_csv,
    save_csv,
    table1,
    table2,
    to_labeled,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    DcnLinkError,
    DegenerateFitError,
    DegenerateTrainingError,
    NoSplitError,
    SequenceError,
    UnidentifiableError,
)
from .explorer import (
    AmplifierMode,
    CalibrationResult,
    DesignSpace,
    FeasibleDesign,
    calibrate_losses,
    default_library,
    enumerate_designs,
    evaluate_design,
    explore,
)
from .optics import (
    ComponentKind,
    ComponentSpec,
    LinkDesign,
    PowerTrace,
    component_counts,
    load_library,
    parse_sequence,
    preamp_power,
    propagate,
    rx_power,
    save_library,
    sequence_text,
)
from .rules import (
    DecisionStump,
    LabeledSample,
    PassFail,
    RuleAccuracy,
    ThresholdRuleSet,
    Verdict,
    classify_no_amp,
    classify_with_amp,
    evaluate_rule_accuracy,
    label_from_ber,
    learn_stump,
    load_rules,
)

__version__ = "0.1.0"
