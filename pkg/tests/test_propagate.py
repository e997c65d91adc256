"""Annotation flags, per-group propagation state and corpus totals,
cross-checked against the published worked-example counts."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdedup.propagate import (
    ANNOTATION_CLASSES,
    AnnotationFlags,
    compute_annotation_flags,
    find_propagable,
    has_type_status,
    load_type_vocabulary,
    summarize,
)
from specdedup.records import SpecimenRecord

from .conftest import hutchison_records, zika_records
from .oracles import naive_propagation_totals
from .strategies import specimen_records


class TestAnnotationFlags:
    def test_georeferenced_typed_unimaged_row(self):
        # The CAS sheet of the first worked example.
        record = zika_records()[0]
        flags = compute_annotation_flags(record)
        assert flags == AnnotationFlags(georef=True, typestatus=True, image=False)

    def test_null_island_not_georeferenced(self):
        record = SpecimenRecord(record_id="r", latitude=0.0, longitude=0.0)
        assert not compute_annotation_flags(record).georef

    def test_out_of_range_not_georeferenced(self):
        record = SpecimenRecord(record_id="r", latitude=95.0, longitude=10.0)
        assert not compute_annotation_flags(record).georef

    def test_half_present_not_georeferenced(self):
        record = SpecimenRecord(record_id="r", latitude=10.0, longitude=None)
        assert not compute_annotation_flags(record).georef

    @pytest.mark.parametrize(
        "status,expected",
        [
            ("isotype", True),
            ("Holotype", True),
            ("ISOLECTOTYPE", True),
            ("isotype of Sedum citrinum", True),
            ("NotAType", False),
            ("not a type", False),
            ("", False),
            (None, False),
            ("possible type", True),
        ],
    )
    def test_type_vocabulary(self, status, expected):
        assert has_type_status(status) == expected

    def test_custom_vocabulary(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_text("# custom terms\nclonotype\n", encoding="utf-8")
        vocabulary = load_type_vocabulary(path)
        assert has_type_status("Clonotype", vocabulary)
        assert not has_type_status("isotype", vocabulary)

    def test_image_from_media_refs(self):
        record = SpecimenRecord(record_id="r", media_refs=("img:1",))
        assert compute_annotation_flags(record).image


class TestFindPropagable:
    def test_zika_group_counts(self):
        # 5/8 georeferenced, 4/8 typed, 3/8 imaged.
        result = find_propagable(zika_records(), group_id=1)
        assert result.georef.propagable and result.georef.count_without == 3
        assert result.typestatus.propagable and result.typestatus.count_without == 4
        assert result.image.propagable and result.image.count_without == 5
        assert not result.name_divergent

    def test_hutchison_group_counts(self):
        # 3/7 georeferenced, 5/7 typed, 5/7 imaged; three distinct names.
        result = find_propagable(hutchison_records(), group_id=2)
        assert result.georef.count_without == 4
        assert result.typestatus.count_without == 2
        assert result.image.count_without == 2
        assert result.name_divergent

    def test_saturated_class_not_propagable(self):
        members = [
            SpecimenRecord(record_id=f"r{i}", latitude=1.0, longitude=2.0)
            for i in range(3)
        ]
        result = find_propagable(members)
        assert result.georef.any_set and result.georef.all_set
        assert not result.georef.propagable

    def test_empty_group_rejected(self):
        with pytest.raises(ValueError):
            find_propagable([])

    @given(members=st.lists(specimen_records(), min_size=1, max_size=9))
    @settings(max_examples=300)
    def test_count_invariants(self, members):
        result = find_propagable(members)
        for annotation_class in ANNOTATION_CLASSES:
            state = result.for_class(annotation_class)
            assert state.count_with + state.count_without == len(members)
            assert state.propagable == (state.any_set and not state.all_set)
            if state.propagable:
                assert state.count_with >= 1 and state.count_without >= 1

    @given(members=st.lists(specimen_records(), min_size=1, max_size=9))
    @settings(max_examples=200)
    def test_propagation_idempotent(self, members):
        # Granting the annotation to every receiver saturates the class.
        result = find_propagable(members)
        flags = [compute_annotation_flags(m) for m in members]
        for annotation_class in ANNOTATION_CLASSES:
            if not result.for_class(annotation_class).propagable:
                continue
            patched = [
                AnnotationFlags(
                    georef=f.georef or annotation_class == "georef",
                    typestatus=f.typestatus or annotation_class == "typestatus",
                    image=f.image or annotation_class == "image",
                )
                for f in flags
            ]
            again = find_propagable(members, flags=patched)
            assert not again.for_class(annotation_class).propagable

    @given(member=specimen_records())
    @settings(max_examples=200)
    def test_singletons_never_divergent(self, member):
        assert not find_propagable([member]).name_divergent


class TestSummarize:
    def test_two_fixture_groups(self):
        groups = [
            find_propagable(zika_records(), 1),
            find_propagable(hutchison_records(), 2),
        ]
        summary = summarize(groups)
        assert summary.typestatus.groups_propagable == 2
        assert summary.typestatus.specimens_receivable == 6
        assert summary.georef.groups_propagable == 2
        assert summary.georef.specimens_receivable == 7
        assert summary.image.groups_propagable == 2
        assert summary.image.specimens_receivable == 7
        assert summary.groups_divergent == 1
        assert summary.specimens_in_divergent_groups == 7

    def test_empty(self):
        summary = summarize([])
        for annotation_class in ANNOTATION_CLASSES:
            assert summary.for_class(annotation_class).groups_propagable == 0
            assert summary.for_class(annotation_class).specimens_receivable == 0
        assert summary.groups_divergent == 0

    def test_single_group_identity(self):
        group = find_propagable(zika_records(), 1)
        summary = summarize([group])
        assert summary.georef.specimens_receivable == group.georef.count_without
        assert summary.typestatus.groups_propagable == 1

    @given(
        corpus=st.lists(
            st.lists(specimen_records(), min_size=1, max_size=6), max_size=12
        )
    )
    @settings(max_examples=150)
    def test_summary_invariants(self, corpus):
        propagations = [find_propagable(g, i) for i, g in enumerate(corpus)]
        summary = summarize(propagations)
        total_groups = len(corpus)
        total_specimens = sum(len(g) for g in corpus)
        for annotation_class in ANNOTATION_CLASSES:
            stats = summary.for_class(annotation_class)
            assert stats.groups_propagable <= total_groups
            # Every propagable group keeps at least one annotated member.
            assert stats.specimens_receivable <= total_specimens - stats.groups_propagable

    def test_matches_naive_oracle_on_random_corpora(self):
        rng = random.Random(5)
        for _ in range(40):
            corpus = []
            for gid in range(rng.randint(1, 20)):
                size = rng.randint(1, 7)
                members = [
                    SpecimenRecord(
                        record_id=f"g{gid}m{i}",
                        latitude=rng.uniform(-80, 80) if rng.random() < 0.5 else None,
                        longitude=rng.uniform(-170, 170) if rng.random() < 0.5 else None,
                        type_status_raw=rng.choice(["isotype", None, "notatype"]),
                        media_refs=("img:x",) if rng.random() < 0.4 else (),
                    )
                    for i in range(size)
                ]
                corpus.append(members)
            propagations = [find_propagable(g, i) for i, g in enumerate(corpus)]
            summary = summarize(propagations)
            oracle = naive_propagation_totals(
                [
                    [
                        (f.georef, f.typestatus, f.image)
                        for f in (compute_annotation_flags(m) for m in members)
                    ]
                    for members in corpus
                ]
            )
            for annotation_class in ANNOTATION_CLASSES:
                stats = summary.for_class(annotation_class)
                assert (
                    stats.groups_propagable,
                    stats.specimens_receivable,
                ) == oracle[annotation_class]
