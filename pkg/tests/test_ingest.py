"""Parsing, eligibility and the canonical checkpoint round trip."""

from __future__ import annotations

import datetime as dt
import zipfile

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdedup.checkpoints import read_checkpoint, write_checkpoint
from specdedup.errors import IngestError
from specdedup.ingest import (
    ColumnMapping,
    ParseStats,
    is_eligible,
    load_mapping_file,
    parse_event_date,
    parse_source,
)
from specdedup.records import SpecimenRecord

from .strategies import specimen_records


class TestParseEventDate:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("2013-06-09", dt.date(2013, 6, 9)),
            ("1964-06-19", dt.date(1964, 6, 19)),
            ("20130609", dt.date(2013, 6, 9)),
            ("2013-06-09T14:02:11", dt.date(2013, 6, 9)),
            ("2013-06-09T00:00:00Z", dt.date(2013, 6, 9)),
            (" 2013-06-09 ", dt.date(2013, 6, 9)),
        ],
    )
    def test_day_precise_forms(self, raw, expected):
        assert parse_event_date(raw) == expected

    @pytest.mark.parametrize(
        "raw",
        [
            "1964",
            "1964-06",
            "1964-06-19/1964-06-21",
            "junk",
            "",
            "2013-6-9",
            "2013-02-30",
            "99999999",
            "2013/06/09",
        ],
    )
    def test_not_day_precise(self, raw):
        assert parse_event_date(raw) is None


class TestEligibility:
    def _record(self, recorded_by="P. F. Zika", number="26185", date=dt.date(2013, 6, 9)):
        return SpecimenRecord(
            record_id="r1",
            recorded_by=recorded_by,
            record_number_raw=number,
            event_date_raw=date.isoformat() if date else "",
            event_date=date,
        )

    def test_table_row_is_eligible(self):
        assert is_eligible(self._record())

    def test_sine_numero_is_not(self):
        assert not is_eligible(self._record(number="s.n."))

    def test_blank_collector_is_not(self):
        assert not is_eligible(self._record(recorded_by="   "))

    def test_missing_date_is_not(self):
        assert not is_eligible(self._record(date=None))

    @given(specimen_records())
    def test_pure_function(self, record):
        assert is_eligible(record) == is_eligible(record)

    @given(specimen_records())
    def test_degrading_fields_is_monotone(self, record):
        before = is_eligible(record)
        blank_collector = _with(record, recorded_by="")
        no_digits = _with(
            record,
            record_number_raw="".join(
                c for c in record.record_number_raw if not c.isdigit()
            ),
        )
        year_only = _with(record, event_date=None, event_date_raw="1990")
        for degraded in (blank_collector, no_digits, year_only):
            if not before:
                assert not is_eligible(degraded)


def _with(record: SpecimenRecord, **changes) -> SpecimenRecord:
    values = {f: getattr(record, f) for f in record.__dataclass_fields__}
    values.update(changes)
    return SpecimenRecord(**values)


HEADER = "occurrenceID\trecordedBy\trecordNumber\teventDate\tinstitutionCode"


class TestParseDelimited:
    def test_table_row(self, tmp_path):
        path = tmp_path / "rows.tsv"
        path.write_text(
            HEADER + "\nZ1\tZika, P.F.\t26185\t2013-06-09\tK\n", encoding="utf-8"
        )
        stats = ParseStats()
        records = list(parse_source(path, stats=stats))
        assert len(records) == 1
        r = records[0]
        assert r.recorded_by == "Zika, P.F."
        assert r.record_number_raw == "26185"
        assert r.event_date == dt.date(2013, 6, 9)
        assert r.institution_code == "K"
        assert (stats.rows_read, stats.rows_skipped) == (1, 0)

    def test_header_only_is_empty(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text(HEADER + "\n", encoding="utf-8")
        stats = ParseStats()
        assert list(parse_source(path, stats=stats)) == []
        assert (stats.rows_read, stats.rows_skipped) == (0, 0)

    def test_short_row_skipped(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text(
            HEADER + "\na\tb\tc\nZ1\tZika\t1\t2000-01-01\tK\n", encoding="utf-8"
        )
        stats = ParseStats()
        records = list(parse_source(path, stats=stats))
        assert len(records) == 1
        assert stats.rows_skipped == 1
        assert stats.rows_read == 2

    def test_missing_mandatory_column_raises(self, tmp_path):
        path = tmp_path / "cols.tsv"
        path.write_text("occurrenceID\trecordedBy\nr\tx\n", encoding="utf-8")
        with pytest.raises(IngestError, match="not found"):
            list(parse_source(path))

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(IngestError):
            list(parse_source(tmp_path / "absent.tsv"))

    def test_record_id_synthesized(self, tmp_path):
        path = tmp_path / "noid.tsv"
        path.write_text(
            HEADER + "\n\tZika\t1\t2000-01-01\tK\n", encoding="utf-8"
        )
        records = list(parse_source(path))
        assert records[0].record_id == f"{path}:1"

    def test_headerless_with_indices(self, tmp_path):
        path = tmp_path / "plain.tsv"
        path.write_text("Zika\t1\t2000-01-01\tK\n", encoding="utf-8")
        mapping = ColumnMapping(
            columns={
                "recorded_by": "0",
                "record_number_raw": "1",
                "event_date_raw": "2",
                "institution_code": "3",
            },
            has_header=False,
        )
        records = list(parse_source(path, mapping))
        assert records[0].recorded_by == "Zika"
        assert records[0].institution_code == "K"

    def test_comma_delimited(self, tmp_path):
        path = tmp_path / "rows.csv"
        path.write_text(
            HEADER.replace("\t", ",") + '\nZ1,"Zika, P.F.",26185,2013-06-09,K\n',
            encoding="utf-8",
        )
        mapping = ColumnMapping(delimiter=",")
        records = list(parse_source(path, mapping))
        assert records[0].recorded_by == "Zika, P.F."

    def test_coordinate_validation(self, tmp_path):
        path = tmp_path / "coords.tsv"
        header = HEADER + "\tdecimalLatitude\tdecimalLongitude"
        path.write_text(
            header
            + "\nr1\tZ\t1\t2000-01-01\tK\t10.5\t-70.25"
            + "\nr2\tZ\t2\t2000-01-01\tK\t95.0\t10.0"
            + "\nr3\tZ\t3\t2000-01-01\tK\t10.0\t\n",
            encoding="utf-8",
        )
        records = list(parse_source(path))
        assert (records[0].latitude, records[0].longitude) == (10.5, -70.25)
        assert (records[1].latitude, records[1].longitude) == (None, None)
        assert (records[2].latitude, records[2].longitude) == (None, None)

    def test_country_code_normalized(self, tmp_path):
        path = tmp_path / "cc.tsv"
        header = HEADER + "\tcountryCode"
        path.write_text(
            header + "\nr1\tZ\t1\t2000-01-01\tK\tus\nr2\tZ\t2\t2000-01-01\tK\tUSA\n",
            encoding="utf-8",
        )
        records = list(parse_source(path))
        assert records[0].country_code == "US"
        assert records[1].country_code is None

    @settings(max_examples=60)
    @given(
        shape=st.lists(
            st.tuples(st.booleans(), st.integers(min_value=0, max_value=30)),
            max_size=30,
        )
    )
    def test_cardinality_conservation(self, shape, tmp_path_factory):
        tmp_path = tmp_path_factory.mktemp("cardinality")
        path = tmp_path / "rows.tsv"
        lines = [HEADER]
        for well_formed, seed in shape:
            if well_formed:
                lines.append(f"id{seed}\tname\t{seed}\t2000-01-01\tK")
            else:
                lines.append("too\tshort")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        stats = ParseStats()
        emitted = sum(1 for _ in parse_source(path, stats=stats))
        assert emitted + stats.rows_skipped == stats.rows_read == len(shape)


class TestParseArchive:
    META = """<archive xmlns="http://rs.tdwg.org/dwc/text/">
  <core encoding="UTF-8" fieldsTerminatedBy="\\t" linesTerminatedBy="\\n"
        fieldsEnclosedBy="" ignoreHeaderLines="1"
        rowType="http://rs.tdwg.org/dwc/terms/Occurrence">
    <files><location>occurrence.txt</location></files>
    <id index="0"/>
    <field index="1" term="http://rs.tdwg.org/dwc/terms/recordedBy"/>
    <field index="2" term="http://rs.tdwg.org/dwc/terms/recordNumber"/>
    <field index="3" term="http://rs.tdwg.org/dwc/terms/eventDate"/>
    <field index="4" term="http://rs.tdwg.org/dwc/terms/institutionCode"/>
    <field index="5" term="http://rs.tdwg.org/dwc/terms/scientificName"/>
  </core>
</archive>"""

    def _write_archive(self, path, core_text, meta=None):
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("meta.xml", meta or self.META)
            zf.writestr("occurrence.txt", core_text)

    def test_core_rows(self, tmp_path):
        archive = tmp_path / "dwca.zip"
        core = (
            "id\trecordedBy\trecordNumber\teventDate\tinstitutionCode\tscientificName\n"
            "occ:1\tZika, P.F.\t26185\t2013-06-09\tK\tSedum citrinum Zika\n"
        )
        self._write_archive(archive, core)
        records = list(parse_source(archive))
        assert len(records) == 1
        assert records[0].record_id == "occ:1"
        assert records[0].scientific_name == "Sedum citrinum Zika"
        assert records[0].event_date == dt.date(2013, 6, 9)

    def test_archive_without_core_raises(self, tmp_path):
        archive = tmp_path / "broken.zip"
        meta = self.META.replace("<files><location>occurrence.txt</location></files>", "<files/>")
        with zipfile.ZipFile(archive, "w") as zf:
            zf.writestr("meta.xml", meta)
        with pytest.raises(IngestError, match="core data file"):
            list(parse_source(archive))

    def test_archive_without_meta_raises(self, tmp_path):
        archive = tmp_path / "nometa.zip"
        with zipfile.ZipFile(archive, "w") as zf:
            zf.writestr("something.txt", "x")
        with pytest.raises(IngestError, match="meta.xml"):
            list(parse_source(archive))


class TestMappingFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "mapping.conf"
        path.write_text(
            "# comment\n"
            "recorded_by=collector\n"
            "record_number_raw=number\n"
            "event_date_raw=date\n"
            "institution_code=inst\n"
            "delimiter=comma\n"
            "header=true\n",
            encoding="utf-8",
        )
        mapping = load_mapping_file(path)
        assert mapping.columns["recorded_by"] == "collector"
        assert mapping.delimiter == ","

    def test_missing_mandatory_rejected(self, tmp_path):
        path = tmp_path / "mapping.conf"
        path.write_text("recorded_by=collector\n", encoding="utf-8")
        with pytest.raises(IngestError, match="mandatory"):
            load_mapping_file(path)

    def test_unknown_field_rejected(self):
        with pytest.raises(IngestError, match="unknown"):
            ColumnMapping(columns={"bogus": "x"}).validate()


class TestCheckpointRoundTrip:
    @settings(max_examples=50)
    @given(records=st.lists(specimen_records(), max_size=20))
    def test_records_survive(self, records, tmp_path_factory):
        tmp_path = tmp_path_factory.mktemp("checkpoint")
        path = tmp_path / "canonical.tsv"
        unique = {r.record_id: r for r in records}
        originals = [
            r for r in unique.values() if not _has_control_chars(r)
        ]
        write_checkpoint(path, ((r, ()) for r in originals))
        loaded = [record for record, _ in read_checkpoint(path)]
        assert loaded == originals


def _has_control_chars(record: SpecimenRecord) -> bool:
    # Tab/newline inside values round-trip via csv quoting, but NUL cannot.
    return any(
        "\0" in str(getattr(record, f) or "") for f in record.__dataclass_fields__
    )
