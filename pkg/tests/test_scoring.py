import numpy as np
import pytest

from oracles import prevalence_oracle
from tagrisk.errors import DataError
from tagrisk.model import (
    ListeningHistory,
    GenreCluster,
    GenreClusterSet,
    TagAssignment,
    TagVocabulary,
    TrackRecord,
    Window,
)
from tagrisk.scoring import (
    build_score_table,
    emotion_prevalence,
    genre_prevalence,
    group_tag_scores,
    rank_tags,
    tag_association,
    track_association,
)

WINDOW = Window("2020-01-01", 3)


def track(track_id, *tags):
    ordered = tuple(sorted(tags, key=lambda t: (-t[1], t[0])))
    return TrackRecord(track_id, "a", "s", tuple(TagAssignment(t, w) for t, w in ordered))


def history(user_id, *entries):
    return ListeningHistory(user_id, tuple(entries), WINDOW, top_n=500)


class TestTrackAssociation:
    def test_single_filtered_tag(self):
        vocab = TagVocabulary({"sad": "Sadness"})
        assoc = track_association(track("t", ("sad", 100)), vocab)
        assert assoc == {"Sadness": 1.0}

    def test_direct_ratio(self):
        vocab = TagVocabulary({"sad": "Sadness", "calm": "Peacefulness"})
        assoc = track_association(track("t", ("sad", 60), ("calm", 40)), vocab)
        assert assoc == pytest.approx({"Sadness": 0.6, "Peacefulness": 0.4})

    def test_three_tags_two_categories(self):
        vocab = TagVocabulary({"x": "A", "y": "A", "z": "B"})
        # weights 50/30/20 in categories A, A, B -> {A: 0.8, B: 0.2}
        assoc = track_association(track("t", ("x", 50), ("y", 30), ("z", 20)), vocab)
        assert assoc == pytest.approx({"A": 0.8, "B": 0.2})

    def test_no_vocabulary_tags_is_a_signal_not_an_error(self):
        vocab = TagVocabulary({"sad": "Sadness"})
        assert track_association(track("t", ("guitar", 80)), vocab) is None

    def test_association_shares_sum_to_one(self):
        rng = np.random.default_rng(5)
        vocab = TagVocabulary({f"t{i}": f"c{i % 3}" for i in range(12)})
        for _ in range(200):
            n = int(rng.integers(1, 8))
            picks = rng.choice(12, size=n, replace=False)
            tags = [(f"t{i}", int(rng.integers(0, 101))) for i in picks]
            if sum(w for _, w in tags) == 0:
                continue
            assoc = track_association(track("t", *tags), vocab)
            assert sum(assoc.values()) == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance_in_weights(self):
        vocab = TagVocabulary({"sad": "Sadness", "calm": "Peacefulness"})
        a = track_association(track("t", ("sad", 30), ("calm", 20)), vocab)
        b = track_association(track("t", ("sad", 90), ("calm", 60)), vocab)
        assert a == pytest.approx(b, abs=1e-12)


class TestEmotionPrevalence:
    def test_single_fully_tagged_track(self):
        assoc = {"t1": {"Sadness": 1.0}}
        row = emotion_prevalence(history("u", ("t1", 10)), assoc, ("Sadness",))
        assert row.tolist() == [1.0]

    def test_untagged_mass_excluded_from_numerator_only(self):
        assoc = {"t1": {"Sadness": 1.0}}
        row = emotion_prevalence(history("u", ("t1", 10), ("t2", 10)), assoc, ("Sadness",))
        assert row.sum() == pytest.approx(0.5)

    def test_two_track_hand_computation(self):
        assoc = {"t1": {"A": 0.5, "B": 0.5}, "t2": {"A": 1.0}}
        row = emotion_prevalence(history("u", ("t1", 3), ("t2", 1)), assoc, ("A", "B"))
        assert row.tolist() == pytest.approx([0.625, 0.375])

    def test_empty_history_is_data_error(self):
        empty = ListeningHistory("u", (), WINDOW, top_n=5)
        with pytest.raises(DataError):
            emotion_prevalence(empty, {}, ("A",))

    def test_playcount_scale_invariance(self):
        assoc = {"t1": {"A": 0.7, "B": 0.3}, "t2": {"B": 1.0}}
        one = emotion_prevalence(history("u", ("t1", 3), ("t2", 5)), assoc, ("A", "B"))
        five = emotion_prevalence(history("u", ("t1", 15), ("t2", 25)), assoc, ("A", "B"))
        assert one.tolist() == pytest.approx(five.tolist(), abs=1e-12)

    def test_matches_double_loop_oracle_on_random_fixtures(self):
        rng = np.random.default_rng(17)
        categories = tuple(f"c{i}" for i in range(4))
        for _ in range(100):
            n_tags = int(rng.integers(1, 15))
            vocab_tags = {f"tag{i}": categories[int(rng.integers(4))] for i in range(n_tags)}
            vocab = TagVocabulary(vocab_tags)
            n_tracks = int(rng.integers(1, 20))
            tracks = {}
            raw_tags = {}
            for t in range(n_tracks):
                k = int(rng.integers(0, min(6, n_tags) + 1))
                picks = rng.choice(n_tags, size=k, replace=False) if k else []
                tags = [(f"tag{i}", int(rng.integers(1, 101))) for i in picks]
                if rng.random() < 0.3:
                    tags.append(("unfiltered", int(rng.integers(1, 50))))
                tracks[f"t{t}"] = track(f"t{t}", *tags) if tags else track(f"t{t}")
                raw_tags[f"t{t}"] = tags
            assoc = {}
            for tid, tr in tracks.items():
                a = track_association(tr, vocab)
                if a is not None:
                    assoc[tid] = a
            m = int(rng.integers(1, 10))
            chosen = rng.choice(n_tracks, size=min(m, n_tracks), replace=False)
            entries = tuple((f"t{i}", int(rng.integers(1, 50))) for i in chosen)
            h = history("u", *entries)
            row = emotion_prevalence(h, assoc, categories)
            expected = prevalence_oracle(list(h.entries), raw_tags, vocab_tags)
            for i, c in enumerate(categories):
                assert row[i] == pytest.approx(expected.get(c, 0.0), abs=1e-12)


class TestGenrePrevalence:
    CLUSTERS = GenreClusterSet(
        clusters=(
            GenreCluster(1, ("ga", "gb")),
            GenreCluster(2, ("gc", "gd")),
        )
    )
    GENRES = {"ga", "gb", "gc", "gd"}

    def test_single_cluster_only(self):
        tracks = {"t1": track("t1", ("ga", 50), ("gb", 30))}
        h = history("u", ("t1", 7))
        row = genre_prevalence(h, tracks, self.CLUSTERS, self.GENRES)
        assert row == pytest.approx({1: 1.0, 2: 0.0})

    def test_filter_noop_when_category_on_all_tracks(self):
        tracks = {
            "t1": track("t1", ("ga", 50), ("sad", 10)),
            "t2": track("t2", ("gc", 20), ("sad", 5)),
        }
        h = history("u", ("t1", 2), ("t2", 6))
        plain = genre_prevalence(h, tracks, self.CLUSTERS, self.GENRES)
        filtered = genre_prevalence(h, tracks, self.CLUSTERS, self.GENRES, {"sad"})
        assert plain == pytest.approx(filtered)

    def test_hand_computation(self):
        tracks = {
            "t1": track("t1", ("ga", 40)),
            "t2": track("t2", ("gc", 90)),
        }
        h = history("u", ("t1", 1), ("t2", 3))
        row = genre_prevalence(h, tracks, self.CLUSTERS, self.GENRES)
        assert row == pytest.approx({1: 0.25, 2: 0.75})

    def test_empty_restriction_omits_user(self, caplog):
        tracks = {"t1": track("t1", ("ga", 40))}
        h = history("u", ("t1", 3))
        import logging

        with caplog.at_level(logging.WARNING):
            row = genre_prevalence(h, tracks, self.CLUSTERS, self.GENRES, {"sad"})
        assert row is None
        assert "omitted" in caplog.text


class TestGroupTagScores:
    def test_single_user_single_tag(self):
        vocab = TagVocabulary({"sad": "Sadness"})
        tracks = {"t1": track("t1", ("sad", 42))}
        scores = group_tag_scores([history("u", ("t1", 5))], tracks, vocab)
        assert scores["sad"] == pytest.approx(1.0)

    def test_absent_tag_scores_zero(self):
        vocab = TagVocabulary({"sad": "Sadness", "low": "Sadness"})
        tracks = {"t1": track("t1", ("sad", 42))}
        scores = group_tag_scores([history("u", ("t1", 5))], tracks, vocab)
        assert scores["low"] == 0.0

    def test_two_users_hand_computation(self):
        vocab = TagVocabulary({"sad": "Sadness", "calm": "Peacefulness"})
        tracks = {"t1": track("t1", ("sad", 10)), "t2": track("t2", ("calm", 99))}
        histories = [history("u1", ("t1", 2)), history("u2", ("t2", 8))]
        scores = group_tag_scores(histories, tracks, vocab)
        assert scores == pytest.approx({"sad": 0.2, "calm": 0.8})

    def test_empty_group_is_error(self):
        with pytest.raises(DataError):
            group_tag_scores([], {}, TagVocabulary({"sad": "Sadness"}))


class TestRankTags:
    def test_identical_scores_alphabetical(self):
        vocab = TagVocabulary({"sad": "Sadness", "low": "Sadness", "blue": "Sadness"})
        g = {"sad": 0.5, "low": 0.1, "blue": 0.2}
        ranked = rank_tags(g, dict(g), vocab, "Sadness")
        assert [t for t, _ in ranked] == ["blue", "low", "sad"]
        assert all(d == 0.0 for _, d in ranked)

    def test_delta_ordering(self):
        vocab = TagVocabulary({"sad": "Sadness", "low": "Sadness"})
        ranked = rank_tags({"sad": 0.4, "low": 0.2}, {"sad": 0.1, "low": 0.1}, vocab, "Sadness")
        assert [t for t, _ in ranked] == ["sad", "low"]

    def test_matches_brute_force_sort(self):
        rng = np.random.default_rng(23)
        tags = [f"t{i}" for i in range(5)]
        vocab = TagVocabulary({t: "Sadness" for t in tags})
        a = {t: float(rng.random()) for t in tags}
        b = {t: float(rng.random()) for t in tags}
        ranked = rank_tags(a, b, vocab, "Sadness")
        expected = sorted(((t, abs(a[t] - b[t])) for t in tags), key=lambda r: (-r[1], r[0]))
        assert ranked == expected


class TestScoreTable:
    def test_rows_in_sorted_user_order(self):
        vocab = TagVocabulary({"sad": "Sadness"})
        tracks = {"t1": track("t1", ("sad", 10))}
        histories = [history("zed", ("t1", 1)), history("abe", ("t1", 2))]
        table = build_score_table(histories, tracks, vocab, ("Sadness",))
        assert table.rows == ("abe", "zed")
        assert table.values.shape == (2, 1)
