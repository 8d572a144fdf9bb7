from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relreward.core import RelationLabel
from relreward.sampler import (
    SamplerConfig,
    corpus_stats,
    largest_remainder,
    sample_test_set,
    sample_training_set,
    split_corpus,
)
from tests.conftest import episode


def corpus(positives=0, no_rel=0, cross=0, labels=("r:a", "r:b")):
    eps = []
    for i in range(positives):
        label = labels[i % len(labels)]
        eps.append(episode(f"p{i}", label, label))
    for i in range(no_rel):
        label = labels[i % len(labels)]
        eps.append(episode(f"n{i}", label, "no_relation"))
    for i in range(cross):
        support = labels[i % len(labels)]
        test = labels[(i + 1) % len(labels)]
        eps.append(episode(f"c{i}", support, test))
    return eps


class TestSplitCorpus:
    def test_three_predicates(self):
        eps = [
            episode("a", "r:x", "r:x"),
            episode("b", "r:x", "no_relation"),
            episode("c", "r:x", "r:y"),
        ]
        split = split_corpus(eps)
        assert [e.id for e in split.positives] == ["a"]
        assert [e.id for e in split.neg_no_relation] == ["b"]
        assert [e.id for e in split.neg_cross] == ["c"]

    def test_partition_is_exact(self):
        eps = corpus(positives=7, no_rel=5, cross=3)
        split = split_corpus(eps)
        recombined = list(split.positives) + list(split.neg_no_relation) + list(split.neg_cross)
        assert sorted(e.id for e in recombined) == sorted(e.id for e in eps)

    def test_double_no_relation_counts_as_matched_pair(self):
        split = split_corpus([episode("a", "no_relation", "no_relation")])
        assert len(split.positives) == 1

    def test_no_relation_support_with_real_test_is_cross(self):
        split = split_corpus([episode("a", "no_relation", "r:x")])
        assert len(split.neg_cross) == 1


class TestLargestRemainder:
    def test_exact_apportionment(self):
        assert largest_remainder({"a": 50, "b": 50}, 10) == {"a": 5, "b": 5}

    def test_remainders_go_to_largest_fraction(self):
        result = largest_remainder({"a": 11, "b": 5, "c": 4}, 10)
        assert sum(result.values()) == 10
        assert result["a"] == 6  # 5.5 rounds up before 2.5 and 2.0

    def test_tie_breaks_lexicographically(self):
        result = largest_remainder({"b": 5, "a": 5, "c": 5}, 4)
        assert result == {"a": 2, "b": 1, "c": 1}

    def test_target_exceeding_population_rejected(self):
        with pytest.raises(ValueError):
            largest_remainder({"a": 3}, 4)

    @given(
        st.dictionaries(st.text("abcdef", min_size=1, max_size=3),
                        st.integers(0, 50), min_size=1, max_size=8),
        st.data(),
    )
    def test_within_one_of_exact_share(self, sizes, data):
        total = sum(sizes.values())
        target = data.draw(st.integers(0, total))
        result = largest_remainder(sizes, target)
        assert sum(result.values()) == target
        for key, size in sizes.items():
            exact = size * target / total if total else 0
            assert abs(result[key] - exact) < 1
            assert 0 <= result[key] <= size


class TestSampleTrainingSet:
    def test_keeps_all_when_under_cap(self):
        split = split_corpus(corpus(positives=3, labels=("r:a",)))
        cfg = SamplerConfig(max_positives_per_label=10, cross_sample_count=0)
        assert len(sample_training_set(split, cfg)) == 3

    def test_caps_positives_per_label(self):
        split = split_corpus(corpus(positives=100, labels=("r:a",)))
        cfg = SamplerConfig(max_positives_per_label=10, cross_sample_count=0, seed=3)
        sampled = sample_training_set(split, cfg)
        assert len(sampled) == 10
        assert sample_training_set(split, cfg) == sampled  # replayable

    def test_zero_quotas_and_zero_cross_keep_positives_only(self):
        split = split_corpus(corpus(positives=4, no_rel=6, cross=6))
        cfg = SamplerConfig(
            max_positives_per_label=99,
            cross_sample_count=0,
            quotas={RelationLabel("r:a"): 0, RelationLabel("r:b"): 0},
        )
        sampled = sample_training_set(split, cfg)
        assert sorted(e.id for e in sampled) == [f"p{i}" for i in range(4)]

    def test_quota_or_all_if_fewer(self):
        split = split_corpus(corpus(no_rel=3, labels=("r:a",)))
        cfg = SamplerConfig(
            max_positives_per_label=0,
            cross_sample_count=0,
            quotas={RelationLabel("r:a"): 10},
        )
        assert len(sample_training_set(split, cfg)) == 3

    def test_proportional_quotas_from_total(self):
        eps = []
        for i in range(30):
            eps.append(episode(f"a{i}", "r:a", "no_relation"))
        for i in range(10):
            eps.append(episode(f"b{i}", "r:b", "no_relation"))
        cfg = SamplerConfig(
            max_positives_per_label=0, cross_sample_count=0, no_relation_total=8
        )
        sampled = sample_training_set(split_corpus(eps), cfg)
        by_support = Counter(e.support.relation.raw for e in sampled)
        assert by_support == {"r:a": 6, "r:b": 2}

    def test_cross_strata_preserve_pair_distribution(self):
        eps = []
        for i in range(40):
            eps.append(episode(f"x{i}", "r:a", "r:b"))
        for i in range(10):
            eps.append(episode(f"y{i}", "r:b", "r:c"))
        cfg = SamplerConfig(max_positives_per_label=0, cross_sample_count=10, seed=1)
        sampled = sample_training_set(split_corpus(eps), cfg)
        pairs = Counter((e.support.relation.raw, e.test.relation.raw) for e in sampled)
        assert pairs == {("r:a", "r:b"): 8, ("r:b", "r:c"): 2}

    def test_output_is_subset_without_duplicates(self):
        eps = corpus(positives=20, no_rel=20, cross=20)
        split = split_corpus(eps)
        cfg = SamplerConfig(max_positives_per_label=5, cross_sample_count=7, seed=9)
        sampled = sample_training_set(split, cfg)
        ids = [e.id for e in sampled]
        assert len(ids) == len(set(ids))
        assert set(ids) <= {e.id for e in eps}

    def test_determinism_across_calls(self):
        split = split_corpus(corpus(positives=50, no_rel=50, cross=50))
        cfg = SamplerConfig(max_positives_per_label=7, cross_sample_count=11, seed=123)
        assert sample_training_set(split, cfg) == sample_training_set(split, cfg)


class TestSampleTestSet:
    def test_full_size_is_a_permutation(self):
        eps = corpus(positives=6, no_rel=4, cross=2)
        sampled = sample_test_set(eps, len(eps), seed=0)
        assert sorted(e.id for e in sampled) == sorted(e.id for e in eps)

    def test_ninety_percent_stratum_lands_within_one(self):
        eps = []
        for i in range(900):
            eps.append(episode(f"n{i}", "r:a", "no_relation"))
        for i in range(100):
            eps.append(episode(f"p{i}", "r:a", "r:a"))
        sampled = sample_test_set(eps, 100, seed=4)
        no_rel = sum(1 for e in sampled if e.test.relation.is_no_relation)
        assert abs(no_rel - 90) <= 1

    def test_zero_target(self):
        assert sample_test_set(corpus(positives=3), 0, seed=0) == []

    def test_oversized_target_rejected(self):
        with pytest.raises(ValueError):
            sample_test_set(corpus(positives=3), 99, seed=0)

    def test_seeded_determinism(self):
        eps = corpus(positives=30, no_rel=30, cross=30)
        assert sample_test_set(eps, 30, seed=7) == sample_test_set(eps, 30, seed=7)


class TestCorpusStats:
    def test_one_to_seven_ratio(self):
        eps = corpus(positives=2, no_rel=10, cross=4)
        stats = corpus_stats(eps)
        assert stats.positives == 2
        assert stats.negatives == 14
        assert stats.ratio == (1, 7)

    def test_empty_corpus(self):
        stats = corpus_stats([])
        assert stats.total == 0
        assert stats.ratio is None
        assert stats.no_relation_share == 0.0
        assert stats.to_dict()["ratio"] is None

    def test_appendix_shaped_counts_reproduced(self):
        eps = corpus(positives=2583, no_rel=14834, cross=2583)
        stats = corpus_stats(eps)
        assert stats.positives == 2583
        assert stats.neg_no_relation == 14834
        assert stats.neg_cross == 2583
        assert stats.per_label["no_relation"] == 14834

    def test_counts_sum_to_corpus_size(self):
        eps = corpus(positives=5, no_rel=6, cross=7)
        stats = corpus_stats(eps)
        assert stats.positives + stats.negatives == stats.total == len(eps)
        assert sum(stats.per_label.values()) == len(eps)


@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 30), st.integers())
@settings(max_examples=30)
def test_training_sample_respects_caps(positives, no_rel, cross, seed):
    eps = corpus(positives=positives, no_rel=no_rel, cross=cross)
    cfg = SamplerConfig(max_positives_per_label=3, cross_sample_count=5, seed=seed)
    sampled = sample_training_set(split_corpus(eps), cfg)
    per_label = Counter(
        e.support.relation.raw for e in sampled if e.support.relation == e.test.relation
    )
    assert all(count <= 3 for count in per_label.values())
    ids = [e.id for e in sampled]
    assert len(ids) == len(set(ids))
