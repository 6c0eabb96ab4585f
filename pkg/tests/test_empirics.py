import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mevauction.empirics import (
    CSV_COLUMNS,
    BundleRecord,
    bergemann_threshold,
    bribe_schedule,
    decompose,
    estimate_gamma,
    ingest,
    iter_bundles,
    validate_bergemann_rule,
    write_bundles,
)
from mevauction.errors import (
    ConfigurationError,
    DomainError,
    IngestError,
    SchemaError,
    ThinSampleError,
)
from mevauction.profiles import MevType


def record(tip, profit, mev_type=MevType.NAKED_ARB, block=1, builder="b0",
           searcher="s0", tx="0x0"):
    return BundleRecord(tx_hash=tx, block_number=block, mev_type=mev_type,
                        builder=builder, searcher=searcher, tip=tip, profit=profit)


def synthetic_records(n, rng, mev_type=MevType.NAKED_ARB, share=None):
    values = np.exp(rng.normal(1.0, 1.5, size=n))
    shares = np.full(n, share) if share is not None else rng.uniform(0.3, 0.9, size=n)
    return [
        record(tip=s * v, profit=(1 - s) * v, mev_type=mev_type, block=i, tx=f"0x{i:x}")
        for i, (v, s) in enumerate(zip(values, shares))
    ]


class TestRecord:
    def test_extracted_value_and_share(self):
        rec = record(tip=3.0, profit=0.15)
        assert rec.extracted_value == pytest.approx(3.15)
        assert rec.bribe_share == pytest.approx(3.0 / 3.15)

    def test_share_undefined_for_nonpositive_value(self):
        assert record(tip=1.0, profit=-2.0).bribe_share is None


class TestIngest:
    def test_round_trip_identity(self, tmp_path):
        rng = np.random.default_rng(5)
        records = synthetic_records(50, rng)
        path = tmp_path / "bundles.csv"
        write_bundles(path, records)
        back, report = ingest(path)
        assert report.malformed == 0
        assert [r.tx_hash for r in back] == [r.tx_hash for r in records]
        np.testing.assert_allclose([r.tip for r in back], [r.tip for r in records],
                                   rtol=1e-11)
        # write -> read -> write is byte stable
        path2 = tmp_path / "again.csv"
        write_bundles(path2, back)
        assert path.read_text() == path2.read_text()

    def test_empty_file_is_empty_stream(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text(",".join(CSV_COLUMNS) + "\n")
        records, report = ingest(path)
        assert records == []
        assert report.rows_read == 0

    def test_header_mismatch_is_hard_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("tx_hash,block,type\n")
        with pytest.raises(SchemaError) as err:
            list(iter_bundles(path))
        assert "missing" in str(err.value)

    def test_malformed_rows_counted_not_fatal(self, tmp_path):
        path = tmp_path / "m.csv"
        rows = [",".join(CSV_COLUMNS)]
        rows += [f"0x{i:x},{i},naked_arb,b,s,1.0,0.5" for i in range(2000)]
        rows[500] = "0xbad,notanint,naked_arb,b,s,1.0,0.5"
        path.write_text("\n".join(rows) + "\n")
        records, report = ingest(path)
        assert report.malformed == 1
        assert len(records) == 1999

    def test_threshold_breach_aborts_with_samples(self, tmp_path):
        path = tmp_path / "t.csv"
        rows = [",".join(CSV_COLUMNS)]
        rows += [f"0x{i:x},{i},naked_arb,b,s,1.0,0.5" for i in range(100)]
        rows += ["junk,row"] * 5
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(IngestError) as err:
            list(iter_bundles(path))
        assert "samples" in str(err.value)

    def test_unknown_type_is_malformed(self, tmp_path):
        path = tmp_path / "u.csv"
        good = "\n".join(f"0x{i:x},{i},backrun,b,s,2.0,1.0" for i in range(999))
        path.write_text(",".join(CSV_COLUMNS) + "\n" + good
                        + "\n0xz,5,cex_dex,b,s,1.0,0.5\n")
        records, report = ingest(path)
        assert report.malformed == 1
        assert len(records) == 999


class TestBribeSchedule:
    def test_constant_share(self):
        rng = np.random.default_rng(1)
        records = synthetic_records(2000, rng, share=0.8)
        schedule = bribe_schedule(records, MevType.NAKED_ARB)
        assert len(schedule.bins) == 50
        for b in schedule.bins:
            assert b.mean_bribe_share == pytest.approx(0.8)
            assert b.std_bribe_share == pytest.approx(0.0, abs=1e-12)

    def test_bin_balance(self):
        rng = np.random.default_rng(2)
        schedule = bribe_schedule(synthetic_records(5309, rng), MevType.NAKED_ARB)
        counts = [b.count for b in schedule.bins]
        assert sum(counts) == 5309
        assert max(counts) - min(counts) <= 1

    def test_bins_ordered_by_value(self):
        rng = np.random.default_rng(3)
        schedule = bribe_schedule(synthetic_records(1000, rng), MevType.NAKED_ARB)
        his = [b.value_hi for b in schedule.bins]
        assert all(a <= b for a, b in zip(his, his[1:]))

    def test_thin_type_falls_back_with_warning(self):
        rng = np.random.default_rng(4)
        records = synthetic_records(300, rng)
        with pytest.warns(UserWarning, match="thin"):
            schedule = bribe_schedule(records, MevType.NAKED_ARB)
        assert len(schedule.bins) == max(10, 300 // 20)

    def test_too_few_records_raises(self):
        rng = np.random.default_rng(5)
        with pytest.raises(ThinSampleError, match="naked_arb"):
            bribe_schedule(synthetic_records(7, rng), MevType.NAKED_ARB)

    def test_nonpositive_values_excluded_and_counted(self):
        rng = np.random.default_rng(6)
        records = synthetic_records(600, rng)
        records += [record(tip=1.0, profit=-3.0, block=10_000 + i) for i in range(5)]
        schedule = bribe_schedule(records, MevType.NAKED_ARB)
        assert schedule.excluded_nonpositive == 5
        assert sum(b.count for b in schedule.bins) == 600

    @given(st.integers(60, 400), st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_bin_counts_always_balanced(self, n, seed):
        rng = np.random.default_rng(seed)
        records = synthetic_records(n, rng)
        with pytest.warns(UserWarning):
            schedule = bribe_schedule(records, MevType.NAKED_ARB)
        counts = [b.count for b in schedule.bins]
        assert sum(counts) == n
        assert max(counts) - min(counts) <= 1


class TestEstimateGamma:
    def test_plateau_is_top_fifth(self):
        rng = np.random.default_rng(7)
        schedule = bribe_schedule(synthetic_records(5000, rng), MevType.NAKED_ARB)
        est = estimate_gamma(schedule)
        assert len(est.plateau_bins) == 10
        assert est.plateau_bins == schedule.bins[-10:]

    def test_constant_plateau_recovered_exactly(self):
        rng = np.random.default_rng(8)
        records = synthetic_records(4000, rng, share=0.63)
        est = estimate_gamma(bribe_schedule(records, MevType.NAKED_ARB))
        assert est.gamma_hat == pytest.approx(0.63)
        assert est.dispersion == pytest.approx(0.0, abs=1e-12)

    def test_needs_ten_bins(self):
        rng = np.random.default_rng(9)
        schedule = bribe_schedule(synthetic_records(900, rng), MevType.NAKED_ARB)
        trimmed = type(schedule)(mev_type=schedule.mev_type, bins=schedule.bins[:5],
                                 excluded_nonpositive=0, shares_above_one=0)
        with pytest.raises(ThinSampleError):
            estimate_gamma(trimmed)

    def test_shares_above_one_kept_and_flagged(self):
        recs = [record(tip=2.0, profit=-0.5, block=i, tx=f"0x{i:x}") for i in range(40)]
        rng = np.random.default_rng(10)
        recs += synthetic_records(40, rng)
        with pytest.warns(UserWarning):
            schedule = bribe_schedule(recs, MevType.NAKED_ARB)
        assert schedule.shares_above_one == 40


class TestDecompose:
    def test_positive_part(self):
        recs = [record(tip=5.0, profit=1.0)]  # tip above gamma * value
        report = decompose(recs, {MevType.NAKED_ARB: 0.7})
        assert report.total_foregone == 0.0

    def test_exact_gamma_bids_leave_nothing(self):
        rng = np.random.default_rng(11)
        records = synthetic_records(500, rng, share=0.74)
        report = decompose(records, {MevType.NAKED_ARB: 0.74})
        assert report.total_foregone == pytest.approx(0.0, abs=1e-9)

    def test_additivity_and_positivity(self):
        rng = np.random.default_rng(12)
        records = synthetic_records(800, rng)
        records += synthetic_records(400, rng, mev_type=MevType.SANDWICH)
        gammas = {MevType.NAKED_ARB: 0.74, MevType.SANDWICH: 0.95}
        report = decompose(records, gammas)
        assert report.total_foregone >= 0
        assert report.total_foregone == pytest.approx(
            sum(t.foregone_surplus for t in report.per_type))
        assert all(t.foregone_surplus >= 0 for t in report.per_type)

    def test_missing_gamma_is_configuration_error(self):
        recs = [record(tip=1.0, profit=1.0, mev_type=MevType.BACKRUN)]
        with pytest.raises(ConfigurationError, match="backrun"):
            decompose(recs, {MevType.NAKED_ARB: 0.74})

    def test_hand_computed_example(self):
        recs = [record(tip=3.0, profit=7.0), record(tip=9.0, profit=1.0)]
        report = decompose(recs, {MevType.NAKED_ARB: 0.8})
        # first: 0.8*10 - 3 = 5; second: 0.8*10 - 9 < 0 -> 0
        assert report.total_foregone == pytest.approx(5.0)
        assert report.total_tips == pytest.approx(12.0)
        assert report.total_ratio == pytest.approx(5.0 / 12.0)


class TestBergemann:
    def test_default_rule_monotone(self):
        vals = [bergemann_threshold(n) for n in (2, 5, 20, 100)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_constant_rule_allowed(self):
        assert bergemann_threshold(7, rule=lambda n: 0.4) == 0.4

    def test_any_rule_must_be_monotone_in_range(self):
        with pytest.raises(ConfigurationError):
            bergemann_threshold(5, rule=lambda n: 1.0 / n)
        with pytest.raises(ConfigurationError):
            bergemann_threshold(5, rule=lambda n: n * 1.0)

    def test_small_market_rejected(self):
        with pytest.raises(DomainError):
            bergemann_threshold(1)

    def test_named_rule_lookup(self):
        assert bergemann_threshold(4, rule="one_minus_inverse_n") == pytest.approx(0.75)
        with pytest.raises(ConfigurationError):
            bergemann_threshold(4, rule="no_such_rule")

    def test_validate_exposed(self):
        validate_bergemann_rule(lambda n: 1 - 1 / n)
