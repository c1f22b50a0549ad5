"""Built-in measurement tables and measurement-file ingestion.

Two measurement campaigns ship with the package: an amplifier-free table
(5 component chains, each driven at 1510 and 1550 nm) and an amplified
table (23 scenarios with the power at the amplifier input). BER is stored
as log10 throughout so far-tail magnitudes survive uniformly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import DataError, SequenceError
from .optics import ComponentSequence, parse_sequence, sequence_text
from .rules import LabeledSample, label_from_ber

CSV_HEADER = (
    "scenario",
    "left_seq",
    "right_seq",
    "wavelength_nm",
    "launch_dbm",
    "preamp_dbm",
    "rx_dbm",
    "ber",
)

#: Feature names accepted by to_labeled, mapped to record fields.
FEATURE_FIELDS = {"preamp": "preamp_dbm", "rx": "rx_dbm", "launch": "launch_dbm"}


@dataclass(frozen=True)
class MeasurementRecord:
    """One experimental scenario.

    A trailing '*' in the scenario id marks the row that was asterisked in
    the source table. ``note`` carries provenance remarks and is excluded
    from equality so CSV round trips compare clean.
    """

    scenario: str
    left_seq: ComponentSequence
    right_seq: ComponentSequence
    has_amplifier: bool
    ber_log10: float
    wavelength_nm: float | None = None
    launch_dbm: float | None = None
    preamp_dbm: float | None = None
    rx_dbm: float | None = None
    note: str = field(default="", compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.ber_log10) and self.ber_log10 < 0):
            raise DataError(
                f"{self.scenario}: BER must be in (0, 1); got log10 {self.ber_log10}"
            )
        if self.has_amplifier:
            if self.preamp_dbm is None:
                raise DataError(f"{self.scenario}: amplified scenario lacks preamp power")
            if not self.left_seq:
                raise DataError(f"{self.scenario}: amplified scenario needs a left chain")
        else:
            if self.rx_dbm is None:
                raise DataError(f"{self.scenario}: passive scenario lacks rx power")
            if self.right_seq:
                raise DataError(f"{self.scenario}: passive scenario cannot have a right chain")
            if self.preamp_dbm is not None:
                raise DataError(f"{self.scenario}: passive scenario cannot have preamp power")

    @property
    def flagged(self) -> bool:
        return self.scenario.endswith("*")


@dataclass(frozen=True)
class Dataset:
    records: tuple[MeasurementRecord, ...]
    provenance: str

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.scenario in seen:
                raise DataError(f"duplicate scenario id {r.scenario!r}")
            seen.add(r.scenario)

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


# ---------------------------------------------------------------------------
# Built-in tables (transcribed cell by cell from the source measurements)
# ---------------------------------------------------------------------------

# chain, wavelength nm, rx dBm, BER
_TABLE1_CELLS = (
    (1, "SS", 1510, -16.25, 4.08e-21),
    (1, "SS", 1550, -16.65, 1.9e-08),
    (2, "MM", 1510, -11.45, 1.22e-21),
    (2, "MM", 1550, -10.55, 2.24e-15),
    (3, "SMMS", 1510, -17.15, 2.43e-06),
    (3, "SMMS", 1550, -18.95, 3.57e-09),
    (4, "SMSSMS", 1510, -28.15, 4.20e-04),
    (4, "SMSSMS", 1550, -25.65, 1.48e-05),
    (5, "SMSMMSMS", 1510, -29.65, 4.23e-03),
    (5, "SMSMMSMS", 1550, -32.25, 1.81e-03),
)

# row, left chain, right chain, preamp dBm, BER, launch dBm (prose) or None
_TABLE2_CELLS = (
    (1, "M", "-", -20.38, 3.01e-15, None),
    (2, "MM", "-", -12.37, 4.76e-38, None),
    (3, "MM", "-", -24.24, 8.47e-21, None),
    (4, "MM", "S", -3.97, 9.35e-15, -1.63),
    (5, "MM", "S", -26.62, 3.57e-03, -22.2),
    (6, "MS", "-", -29.99, 9.13e-08, None),
    (7, "MS", "-", -21.53, 2.38e-74, None),
    (8, "MS", "M", -8.53, 1.51e-14, None),
    (9, "MS", "S", -6.58, 1.44e-22, None),
    (10, "MS", "S", -29.93, 6.47e-03, None),
    (11, "MS", "S", -29.99, 1.67e-04, None),
    (12, "S", "-", -18.66, 2.11e-17, None),
    (13, "SM", "M", -7.23, 1.05e-133, None),
    (14, "SM", "M", -23.94, 4.41e-22, None),
    (15, "SM", "M", -24.05, 8.50e-30, None),
    (16, "SM", "M", -26.64, 4.89e-17, -19.28),
    (17, "SM", "S", -11.24, 9.38e-07, None),  # asterisked in the source
    (18, "SM", "S", -11.25, 4.42e-35, None),
    (19, "SM", "S", -21.53, 2.63e-29, None),
    (20, "SM", "S", -26.38, 6.18e-26, None),
    (21, "SS", "-", -12.13, 2.94e-59, None),
    (22, "SS", "-", -31.76, 3.48e-10, None),
    (23, "SS", "M", -10.26, 5.24e-28, None),
)

_TABLE2_FLAGGED_ROWS = {17}

#: Threshold splits published alongside the source measurements, kept for
#: side-by-side comparison with freshly learned stumps.
TABLE1_REFERENCE_SPLIT = {"feature": "rx", "threshold_dbm": -16.25}
TABLE2_REFERENCE_SPLIT = {
    "feature": "preamp",
    "threshold_dbm": -26.38,
    "low_count": 7,
    "high_count": 16,
}


@lru_cache(maxsize=1)
def table1() -> Dataset:
    """Amplifier-free scenarios: 5 chains x 2 wavelengths."""
    records = tuple(
        MeasurementRecord(
            scenario=f"t1r{row}-{wl}",
            left_seq=parse_sequence(seq),
            right_seq=(),
            has_amplifier=False,
            wavelength_nm=float(wl),
            rx_dbm=rx,
            ber_log10=math.log10(ber),
        )
        for row, seq, wl, rx, ber in _TABLE1_CELLS
    )
    return Dataset(records=records, provenance="built-in passive-link measurement table")


@lru_cache(maxsize=1)
def table2() -> Dataset:
    """Amplified scenarios: 23 rows with power at the amplifier input."""
    records = []
    for row, left, right, preamp, ber, launch in _TABLE2_CELLS:
        records.append(
            MeasurementRecord(
                scenario=f"t2r{row}" + ("*" if row in _TABLE2_FLAGGED_ROWS else ""),
                left_seq=parse_sequence(left),
                right_seq=parse_sequence(right),
                has_amplifier=True,
                preamp_dbm=preamp,
                launch_dbm=launch,
                ber_log10=math.log10(ber),
                note="launch power taken from the source prose" if launch is not None else "",
            )
        )
    return Dataset(records=tuple(records), provenance="built-in amplified-link measurement table")


BUILTIN_TABLES = {"table1": table1, "table2": table2}


# ---------------------------------------------------------------------------
# CSV ingestion and export
# ---------------------------------------------------------------------------

def _fmt_opt(value: float | None) -> str:
    return "" if value is None else repr(value)


def save_csv(ds: Dataset, file) -> None:
    """Write the schema CSV; BER is emitted in scientific notation."""
    own = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, "w", encoding="utf-8", newline="") if own else file
    try:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in ds:
            writer.writerow(
                [
                    r.scenario,
                    sequence_text(r.left_seq),
                    sequence_text(r.right_seq),
                    _fmt_opt(r.wavelength_nm),
                    _fmt_opt(r.launch_dbm),
                    _fmt_opt(r.preamp_dbm),
                    _fmt_opt(r.rx_dbm),
                    f"{10 ** r.ber_log10:.17e}",
                ]
            )
    finally:
        if own:
            fh.close()


def dataset_to_csv_text(ds: Dataset) -> str:
    buf = io.StringIO()
    save_csv(ds, buf)
    return buf.getvalue()


def _parse_opt_float(cell: str, row_no: int, column: str) -> float | None:
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"row {row_no}: {column} is not a number: {cell!r}") from None


def load_csv(path_or_file, provenance: str | None = None) -> Dataset:
    """Parse a measurement CSV; malformed rows are rejected with row numbers.

    The amplifier flag is implied by the preamp column: an amplified link
    is exactly one with a measured power at the amplifier input.
    """
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    if own:
        try:
            fh = open(path_or_file, "r", encoding="utf-8", newline="")
        except OSError as exc:
            raise DataError(f"cannot read dataset {path_or_file}: {exc}") from None
        if provenance is None:
            provenance = str(path_or_file)
    else:
        fh = path_or_file
        if provenance is None:
            provenance = "<stream>"
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("dataset file is empty") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise DataError(
                f"header mismatch: expected {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        records = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DataError(f"row {row_no}: expected {len(CSV_HEADER)} cells, got {len(row)}")
            scenario, left, right, wl, launch, preamp, rx, ber = [c.strip() for c in row]
            if not scenario:
                raise DataError(f"row {row_no}: scenario id is empty")
            try:
                left_seq = parse_sequence(left)
                right_seq = parse_sequence(right)
            except SequenceError as exc:
                raise DataError(f"row {row_no}: {exc}") from None
            try:
                ber_value = float(ber)
            except ValueError:
                raise DataError(f"row {row_no}: ber is not a number: {ber!r}") from None
            if not (ber_value > 0):
                raise DataError(f"row {row_no}: ber must be positive (log10 undefined)")
            preamp_val = _parse_opt_float(preamp, row_no, "preamp_dbm")
            try:
                records.append(
                    MeasurementRecord(
                        scenario=scenario,
                        left_seq=left_seq,
                        right_seq=right_seq,
                        has_amplifier=preamp_val is not None,
                        wavelength_nm=_parse_opt_float(wl, row_no, "wavelength_nm"),
                        launch_dbm=_parse_opt_float(launch, row_no, "launch_dbm"),
                        preamp_dbm=preamp_val,
                        rx_dbm=_parse_opt_float(rx, row_no, "rx_dbm"),
                        ber_log10=math.log10(ber_value),
                    )
                )
            except DataError as exc:
                raise DataError(f"row {row_no}: {exc}") from None
        return Dataset(records=tuple(records), provenance=provenance)
    finally:
        if own:
            fh.close()


def to_labeled(ds: Dataset, features, tolerance_log10: float) -> list[LabeledSample]:
    """One labeled sample per record; labels come from the BER tolerance."""
    names = list(features)
    unknown = [f for f in names if f not in FEATURE_FIELDS]
    if unknown:
        raise DataError(f"unknown features {unknown}; choose from {sorted(FEATURE_FIELDS)}")
    samples = []
    for r in ds:
        values = {}
        for name in names:
            value = getattr(r, FEATURE_FIELDS[name])
            if value is None:
                raise DataError(f"record {r.scenario!r} lacks feature {name!r}")
            values[name] = value
        samples.append(
            LabeledSample(
                scenario=r.scenario,
                features=values,
                label=label_from_ber(r.ber_log10, tolerance_log10),
            )
        )
    return samples


def dataset_fingerprint(ds: Dataset) -> str:
    """SHA-256 over a canonical cell serialization; pins transcriptions."""
    h = hashlib.sha256()
    for r in ds:
        cells = (
            r.scenario,
            sequence_text(r.left_seq),
            sequence_text(r.right_seq),
            str(r.has_amplifier),
            _fmt_opt(r.wavelength_nm),
            _fmt_opt(r.launch_dbm),
            _fmt_opt(r.preamp_dbm),
            _fmt_opt(r.rx_dbm),
            repr(r.ber_log10),
        )
        h.update("|".join(cells).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()
