import io
import math

import pytest

from dcnlink.datasets import (
    CSV_HEADER,
    Dataset,
    MeasurementRecord,
    dataset_fingerprint,
    dataset_to_csv_text,
    load_csv,
    save_csv,
    table1,
    table2,
    to_labeled,
)
from dcnlink.errors import DataError
from dcnlink.optics import parse_sequence, sequence_text
from dcnlink.rules import PassFail

TOL = -12.0

# Frozen transcription checksums; any edit to a table cell must be deliberate.
TABLE1_SHA256 = "da40ff40a12277690e8b80940103c079f7a82abebe9edb4ad00b3f91d73f11e5"
TABLE2_SHA256 = "80e86b6425c68dd03023c6b4c33d6712128f9d8082e80ab9515aed5d5f85f84c"


def roundtrip(ds: Dataset) -> Dataset:
    return load_csv(io.StringIO(dataset_to_csv_text(ds)), provenance=ds.provenance)


class TestTable1:
    def test_count(self):
        assert len(table1()) == 10

    def test_ss_1510(self):
        rec = next(r for r in table1() if r.scenario == "t1r1-1510")
        assert sequence_text(rec.left_seq) == "SS"
        assert rec.rx_dbm == -16.25
        assert rec.ber_log10 == pytest.approx(math.log10(4.08e-21), abs=1e-12)
        assert not rec.has_amplifier

    def test_longest_chain_1550(self):
        rec = next(r for r in table1() if r.scenario == "t1r5-1550")
        assert sequence_text(rec.left_seq) == "SMSMMSMS"
        assert rec.rx_dbm == -32.25
        assert rec.ber_log10 == pytest.approx(math.log10(1.81e-3), abs=1e-12)

    def test_wavelengths(self):
        assert {r.wavelength_nm for r in table1()} == {1510.0, 1550.0}

    def test_fingerprint(self):
        assert dataset_fingerprint(table1()) == TABLE1_SHA256


class TestTable2:
    def test_count(self):
        assert len(table2()) == 23

    def test_row13(self):
        rec = next(r for r in table2() if r.scenario == "t2r13")
        assert sequence_text(rec.left_seq) == "SM"
        assert sequence_text(rec.right_seq) == "M"
        assert rec.preamp_dbm == -7.23
        assert rec.ber_log10 == pytest.approx(math.log10(1.05e-133), abs=1e-12)

    def test_row22_empty_right(self):
        rec = next(r for r in table2() if r.scenario == "t2r22")
        assert sequence_text(rec.left_seq) == "SS"
        assert rec.right_seq == ()
        assert rec.preamp_dbm == -31.76
        assert rec.ber_log10 == pytest.approx(math.log10(3.48e-10), abs=1e-12)

    def test_row17_is_flagged(self):
        flagged = [r for r in table2() if r.flagged]
        assert [r.scenario for r in flagged] == ["t2r17*"]

    def test_prose_launch_values(self):
        launches = {r.scenario: r.launch_dbm for r in table2() if r.launch_dbm is not None}
        assert launches == {"t2r4": -1.63, "t2r5": -22.2, "t2r16": -19.28}
        assert all(r.note for r in table2() if r.launch_dbm is not None)

    def test_fingerprint(self):
        assert dataset_fingerprint(table2()) == TABLE2_SHA256


class TestCsvRoundTrip:
    def test_table2_round_trip_identity(self):
        assert roundtrip(table2()) == table2()

    def test_table1_round_trip_identity(self):
        assert roundtrip(table1()) == table1()

    def test_save_to_path(self, tmp_path):
        path = tmp_path / "t1.csv"
        save_csv(table1(), path)
        assert load_csv(path, provenance=table1().provenance) == table1()


def csv_doc(rows, header=",".join(CSV_HEADER)):
    return io.StringIO(header + "\n" + "\n".join(rows) + "\n")


class TestLoadCsvErrors:
    def test_zero_ber_rejected(self):
        with pytest.raises(DataError, match="log10"):
            load_csv(csv_doc(["a,SS,-,1510,,,-16.25,0"]))

    def test_bad_sequence_letter(self):
        with pytest.raises(DataError, match="row 2"):
            load_csv(csv_doc(["a,SXS,-,1510,,,-16.25,1e-5"]))

    def test_header_mismatch(self):
        with pytest.raises(DataError, match="header"):
            load_csv(csv_doc(["a,SS,-,1510,,,-16.25,1e-5"], header="x,y"))

    def test_duplicate_ids(self):
        with pytest.raises(DataError, match="duplicate"):
            load_csv(csv_doc(["a,SS,-,1510,,,-16.25,1e-5", "a,MM,-,1510,,,-11.45,1e-5"]))

    def test_unparsable_number(self):
        with pytest.raises(DataError, match="row 2"):
            load_csv(csv_doc(["a,SS,-,1510,,,abc,1e-5"]))

    def test_wrong_cell_count(self):
        with pytest.raises(DataError, match="row 2"):
            load_csv(csv_doc(["a,SS,-,1510"]))

    def test_right_chain_without_preamp(self):
        with pytest.raises(DataError, match="row 2"):
            load_csv(csv_doc(["a,SS,M,1510,,,-16.25,1e-5"]))


class TestRecordInvariants:
    def test_amplified_needs_preamp(self):
        with pytest.raises(DataError):
            MeasurementRecord("x", parse_sequence("S"), (), True, -10.0)

    def test_passive_needs_rx(self):
        with pytest.raises(DataError):
            MeasurementRecord("x", parse_sequence("S"), (), False, -10.0)

    def test_nonnegative_log10_rejected(self):
        with pytest.raises(DataError):
            MeasurementRecord("x", parse_sequence("S"), (), False, 0.5, rx_dbm=-1.0)


class TestToLabeled:
    def test_amplified_table_fail_count(self):
        samples = to_labeled(table2(), ["preamp"], TOL)
        assert len(samples) == 23
        fails = [s.scenario for s in samples if s.label is PassFail.FAIL]
        assert fails == ["t2r5", "t2r6", "t2r10", "t2r11", "t2r17*", "t2r22"]

    def test_passive_table_fail_count(self):
        samples = to_labeled(table1(), ["rx"], TOL)
        assert len(samples) == 10
        assert sum(1 for s in samples if s.label is PassFail.FAIL) == 7

    def test_empty_dataset(self):
        assert to_labeled(Dataset((), "none"), ["rx"], TOL) == []

    def test_order_preserved(self):
        samples = to_labeled(table2(), ["preamp"], TOL)
        assert [s.scenario for s in samples] == [r.scenario for r in table2()]

    def test_missing_feature_names_record(self):
        with pytest.raises(DataError, match="t2r1"):
            to_labeled(table2(), ["rx"], TOL)

    def test_unknown_feature(self):
        with pytest.raises(DataError):
            to_labeled(table1(), ["snr"], TOL)
