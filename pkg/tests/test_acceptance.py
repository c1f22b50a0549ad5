"""Acceptance gate: one pass/fail line per criterion (run with -s to see them).

Each criterion is checked at a pinned tolerance and a pinned runtime budget.
"""

import contextlib
import io
import itertools
import json
import math
from time import perf_counter

import mpmath
import numpy as np
import pytest

from dcnlink.berstats import ber_from_q, fit_mixture, q_factor
from dcnlink.cli import main
from dcnlink.datasets import (
    Dataset,
    MeasurementRecord,
    dataset_fingerprint,
    dataset_to_csv_text,
    load_csv,
    table1,
    table2,
    to_labeled,
)
from dcnlink.explorer import (
    AmplifierMode,
    DesignSpace,
    calibrate_losses,
    default_library,
    explore,
)
from dcnlink.optics import ComponentKind, parse_sequence, sequence_text
from dcnlink.rules import (
    PassFail,
    ThresholdRuleSet,
    evaluate_rule_accuracy,
    learn_stump,
)

mpmath.mp.dps = 40

S = ComponentKind.POWER_SPLIT
M = ComponentKind.WAVELENGTH_MUX


def gate(name: str, budget_s: float, fn):
    t0 = perf_counter()
    try:
        fn()
    except BaseException as exc:
        print(f"[FAIL] {name}: {type(exc).__name__}: {exc}")
        raise
    elapsed = perf_counter() - t0
    if elapsed >= budget_s:
        print(f"[FAIL] {name}: ran {elapsed:.2f}s, budget {budget_s:.0f}s")
        pytest.fail(f"{name} exceeded its {budget_s:.0f}s budget ({elapsed:.2f}s)")
    print(f"[PASS] {name} ({elapsed:.2f}s)")


def test_criterion_1_passive_rule_reproduction():
    def check():
        stump = learn_stump(to_labeled(table1(), ["rx"], -12.0), "rx")
        assert stump.misclassified == 0
        assert -16.65 < stump.threshold <= -16.25
        assert stump.low_label is PassFail.FAIL
        assert stump.high_label is PassFail.PASS

    gate("criterion 1: passive-table rule reproduction", 1.0, check)


def test_criterion_2_amplified_rule_reproduction():
    def check():
        stump = learn_stump(to_labeled(table2(), ["preamp"], -12.0), "preamp")
        assert -26.64 <= stump.threshold <= -26.38
        assert stump.misclassified <= 3
        # the learn report must show the published reference split alongside
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            code = main(["learn", "--table", "table2", "--feature", "preamp"])
        assert code == 0
        payload = json.loads(buf.getvalue())
        assert abs(payload["reference"]["threshold_dbm"]) == pytest.approx(26.38)
        assert payload["reference"]["low_count"] == 7
        assert payload["reference"]["high_count"] == 16

    gate("criterion 2: amplified-table rule reproduction", 1.0, check)


def test_criterion_3_fixed_rule_accuracy():
    def check():
        acc = evaluate_rule_accuracy(
            ThresholdRuleSet(), to_labeled(table2(), ["preamp"], -12.0)
        )
        assert (acc.correct, acc.total) == (21, 23)
        assert set(acc.errors) == {"t2r16", "t2r17*"}

    gate("criterion 3: fixed preamp rule scores 21/23", 1.0, check)


def test_criterion_4_ber_math():
    def check():
        assert ber_from_q(0.0).prob == 0.5  # erfc(0) = 1 exactly

        for q in np.linspace(0.0, 10.0, 1000):
            want = float(mpmath.erfc(mpmath.mpf(float(q)) / mpmath.sqrt(2)) / 2)
            got = ber_from_q(float(q)).prob
            assert abs(got - want) <= 1e-9 * want

        for q in np.linspace(10.0, 40.0, 301):
            want = float(
                mpmath.log10(mpmath.erfc(mpmath.mpf(float(q)) / mpmath.sqrt(2)) / 2)
            )
            assert abs(ber_from_q(float(q)).log10 - want) <= 1e-6

        grid = [ber_from_q(float(q)).log10 for q in np.linspace(0.0, 40.0, 1000)]
        assert all(b < a for a, b in zip(grid, grid[1:]))

        # q = 7.0345 inverts the tolerance boundary (oracle-derived)
        assert ber_from_q(7.0345).prob == pytest.approx(1.0e-12, rel=0.02)

    gate("criterion 4: BER math vs high-precision oracle", 30.0, check)


def test_criterion_5_mixture_recovery():
    for true_q, seed in ((4.0, 101), (7.0, 102), (10.0, 103)):
        def check(true_q=true_q, seed=seed):
            sigma = 1.0 / (2.0 * true_q)
            rng = np.random.default_rng(seed)
            x = np.concatenate(
                [rng.normal(0.0, sigma, 50_000), rng.normal(1.0, sigma, 50_000)]
            )
            fit = fit_mixture(x)
            q = q_factor(fit)
            assert abs(q - true_q) <= 0.02 * true_q
            hist = fit.loglik_history
            assert len(hist) >= 2
            for before, after in zip(hist, hist[1:]):
                assert after >= before - 1e-9 * (1.0 + abs(before))

        gate(f"criterion 5: mixture recovery at Q={true_q:g}", 10.0, check)


def test_criterion_6_calibration():
    def check():
        # exact recovery on a consistent synthetic system
        chains = ["S", "M", "SM", "SSM", "MMS"]
        truth = (-2.5, 3.7, 1.4)
        records = []
        for i, chain in enumerate(chains):
            seq = parse_sequence(chain)
            n_s = sum(1 for k in seq if k is S)
            n_m = len(seq) - n_s
            records.append(
                MeasurementRecord(
                    scenario=f"syn{i}",
                    left_seq=seq,
                    right_seq=(),
                    has_amplifier=False,
                    wavelength_nm=1510.0,
                    rx_dbm=truth[0] - n_s * truth[1] - n_m * truth[2],
                    ber_log10=-20.0,
                )
            )
        cal = calibrate_losses(Dataset(tuple(records), "synthetic"), 1510.0)
        assert cal.residual_rms_db <= 1e-9
        assert cal.launch_dbm == pytest.approx(truth[0], abs=1e-9)
        assert cal.loss_s_db == pytest.approx(truth[1], abs=1e-9)
        assert cal.loss_m_db == pytest.approx(truth[2], abs=1e-9)

        # table fit matches an independent normal-equation solve and is optimal
        rng = np.random.default_rng(4242)
        for wl in (1510.0, 1550.0):
            rows = [r for r in table1() if r.wavelength_nm == wl]
            a = np.array(
                [
                    [
                        1.0,
                        -sum(1 for k in r.left_seq if k is S),
                        -sum(1 for k in r.left_seq if k is M),
                    ]
                    for r in rows
                ]
            )
            y = np.array([r.rx_dbm for r in rows])
            oracle = np.linalg.solve(a.T @ a, a.T @ y)
            cal = calibrate_losses(table1(), wl)
            x0 = np.array([cal.launch_dbm, cal.loss_s_db, cal.loss_m_db])
            assert np.max(np.abs(x0 - oracle)) <= 1e-9
            base = float(np.sum((y - a @ x0) ** 2))
            for _ in range(1000):
                delta = rng.uniform(-1.0, 1.0, 3)
                assert float(np.sum((y - a @ (x0 + delta)) ** 2)) >= base

    gate("criterion 6: calibration oracle match and optimality", 10.0, check)


def _oracle_explore(space, loss_s, loss_m, rules):
    """Independent enumerate-propagate-filter-rank over letter strings."""

    def chains(max_len, min_len=0):
        for n in range(min_len, max_len + 1):
            yield from ("".join(c) for c in itertools.product("SM", repeat=n))

    def drop(chain):
        return sum(loss_s if c == "S" else loss_m for c in chain)

    rows = []
    if space.amplifier in (AmplifierMode.FORBIDDEN, AmplifierMode.OPTIONAL):
        for left in chains(space.max_left):
            margin = (space.launch_dbm - drop(left)) - rules.rx_floor_no_amp
            if margin >= 0:
                rows.append((left, "", False, margin, len(left)))
    if space.amplifier in (AmplifierMode.REQUIRED, AmplifierMode.OPTIONAL):
        for left in chains(space.max_left, min_len=1):
            pre = space.launch_dbm - drop(left)
            for right in chains(space.max_right):
                rx = pre + space.gain_db - drop(right)
                margin = min(pre - rules.preamp_floor, rx - rules.rx_floor_with_amp)
                if margin >= 0:
                    rows.append((left, right, True, margin, len(left) + 1 + len(right)))

    def seq_key(text):
        return (len(text), tuple(0 if c == "S" else 1 for c in text))

    rows.sort(key=lambda r: (r[4], -round(r[3], 9), seq_key(r[0]), seq_key(r[1]), r[2]))
    return rows


def test_criterion_7_explorer_oracle_equivalence():
    def check():
        lib = default_library()
        rules = ThresholdRuleSet()
        loss_s = lib[S].effect_db(1510.0)
        loss_m = lib[M].effect_db(1510.0)

        spaces = []
        for launch in (-20.0, -8.0, 0.0):
            for max_left in range(0, 5):
                spaces.append(DesignSpace(max_left, 0, AmplifierMode.FORBIDDEN, launch, 1510.0))
            for gain in (8.0, 16.0):
                for max_left in range(0, 4):
                    for max_right in range(0, 3):
                        if max_left + 1 + max_right > 4:
                            continue
                        for mode in (AmplifierMode.REQUIRED, AmplifierMode.OPTIONAL):
                            spaces.append(
                                DesignSpace(max_left, max_right, mode, launch, 1510.0, gain_db=gain)
                            )
        for space in spaces:
            expected = _oracle_explore(space, loss_s, loss_m, rules)
            got = explore(space, lib, rules)
            assert len(got) == len(expected), space
            for fd, (left, right, has_amp, margin, total) in zip(got, expected):
                assert sequence_text(fd.design.left) == (left or "-")
                assert sequence_text(fd.design.right) == (right or "-")
                assert (fd.design.amplifier is not None) == has_amp
                assert abs(fd.min_margin_db - margin) <= 1e-9
                assert fd.design.total_components == total

        # launch-power monotonicity of the feasible set over random spaces
        rng = np.random.default_rng(777)
        for _ in range(1000):
            max_left = int(rng.integers(0, 4))
            max_right = int(rng.integers(0, 2))
            mode = (AmplifierMode.FORBIDDEN, AmplifierMode.REQUIRED, AmplifierMode.OPTIONAL)[
                int(rng.integers(0, 3))
            ]
            if mode is AmplifierMode.FORBIDDEN:
                max_right = 0
            gain = float(rng.uniform(5.0, 20.0))
            launch = float(rng.uniform(-30.0, 0.0))
            bump = float(rng.uniform(0.1, 6.0))
            lo = DesignSpace(max_left, max_right, mode, launch, 1510.0, gain_db=gain)
            hi = DesignSpace(max_left, max_right, mode, launch + bump, 1510.0, gain_db=gain)

            def keys(space):
                return {
                    (
                        sequence_text(fd.design.left),
                        sequence_text(fd.design.right),
                        fd.design.amplifier is not None,
                    )
                    for fd in explore(space, lib, rules)
                }

            assert keys(lo) <= keys(hi)

    gate("criterion 7: explorer equals brute-force oracle", 30.0, check)


def test_criterion_8_dataset_integrity():
    def check():
        t1, t2 = table1(), table2()
        assert len(t1) == 10
        assert len(t2) == 23
        assert dataset_fingerprint(t1) == (
            "da40ff40a12277690e8b80940103c079f7a82abebe9edb4ad00b3f91d73f11e5"
        )
        assert dataset_fingerprint(t2) == (
            "80e86b6425c68dd03023c6b4c33d6712128f9d8082e80ab9515aed5d5f85f84c"
        )
        r1 = next(r for r in t1 if r.scenario == "t1r1-1510")
        assert r1.rx_dbm == -16.25
        assert r1.ber_log10 == pytest.approx(math.log10(4.08e-21), abs=1e-12)
        r13 = next(r for r in t2 if r.scenario == "t2r13")
        assert r13.preamp_dbm == -7.23
        assert r13.ber_log10 == pytest.approx(math.log10(1.05e-133), abs=1e-12)
        for ds in (t1, t2):
            again = load_csv(io.StringIO(dataset_to_csv_text(ds)), provenance=ds.provenance)
            assert again == ds

    gate("criterion 8: dataset integrity and CSV round trip", 5.0, check)
