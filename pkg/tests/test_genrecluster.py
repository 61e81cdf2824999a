import numpy as np
import pytest

from oracles import ward_naive
from tagrisk.errors import ConfigError, DataError, ValidationError
from tagrisk.genrecluster import (
    Dendrogram,
    SimilarityMatrix,
    TermDocMatrix,
    build_term_doc,
    dynamic_cut,
    label_clusters,
    similarity,
    ward_linkage,
)
from tagrisk.model import TagAssignment, TrackRecord


def track(track_id, *tags):
    ordered = tuple(sorted(tags, key=lambda t: (-t[1], t[0])))
    return TrackRecord(track_id, "a", "s", tuple(TagAssignment(t, w) for t, w in ordered))


def sim_from_values(values):
    n = values.shape[0]
    z = np.zeros((n, n), dtype=np.int64)
    return SimilarityMatrix(tuple(f"g{i}" for i in range(n)), values, z, z, z, z)


def random_similarity(rng, n):
    vals = rng.random((n, n))
    vals = (vals + vals.T) / 2
    np.fill_diagonal(vals, 1.0)
    return sim_from_values(vals)


def planted_similarity(n_clusters=3, size=10, within=0.9, across=0.1, jitter=0.02, seed=0):
    """Block-diagonal similarity: high within planted clusters, low across."""
    rng = np.random.default_rng(seed)
    n = n_clusters * size
    vals = np.full((n, n), across)
    for c in range(n_clusters):
        block = slice(c * size, (c + 1) * size)
        vals[block, block] = within
    vals = vals + rng.uniform(-jitter, jitter, size=(n, n))
    vals = (vals + vals.T) / 2
    vals = vals.clip(0.0, 1.0)
    np.fill_diagonal(vals, 1.0)
    labels = np.repeat(np.arange(n_clusters), size)
    return sim_from_values(vals), labels


class TestTermDoc:
    def test_single_track_single_tag(self):
        tdm = build_term_doc([track("t1", ("house", 40))], ["house"])
        assert tdm.matrix.tolist() == [[1]]
        assert tdm.tags == ("house",)

    def test_zero_weight_is_absence(self):
        tdm = build_term_doc([track("t1", ("house", 0), ("punk", 3))], ["house", "punk"])
        assert tdm.tags == ("punk",)  # house occurs nowhere with positive weight

    def test_three_track_hand_matrix(self):
        tracks = [
            track("t1", ("house", 10), ("punk", 5)),
            track("t2", ("punk", 7)),
            track("t3", ("house", 2)),
        ]
        tdm = build_term_doc(tracks, ["house", "punk"])
        assert tdm.tags == ("house", "punk")
        assert tdm.matrix.tolist() == [[1, 1], [0, 1], [1, 0]]

    def test_unused_genre_tags_dropped_with_warning(self, caplog):
        import logging

        with caplog.at_level(logging.WARNING):
            tdm = build_term_doc([track("t1", ("house", 4))], ["house", "zydeco"])
        assert tdm.tags == ("house",)
        assert "zydeco" in caplog.text

    def test_empty_intersection_is_data_error(self):
        with pytest.raises(DataError):
            build_term_doc([track("t1", ("house", 4))], ["zydeco"])


class TestSimilarity:
    def test_perfect_cooccurrence(self):
        tracks = [
            track("t1", ("a", 1), ("b", 1)),
            track("t2", ("a", 1), ("b", 1)),
            track("t3", ("c", 1)),
            track("t4", ("c", 1)),
        ]
        sim = similarity(build_term_doc(tracks, ["a", "b", "c"]))
        i, j = sim.tags.index("a"), sim.tags.index("b")
        assert sim.values[i, j] == pytest.approx(1.0)

    def test_never_cooccurring_is_zero(self):
        tracks = [track("t1", ("a", 1)), track("t2", ("b", 1))]
        sim = similarity(build_term_doc(tracks, ["a", "b"]))
        assert sim.values[0, 1] == 0.0

    def test_balanced_2x2_gives_quarter(self):
        # a=b=c=d=1 -> 1*1/sqrt(2*2*2*2) = 0.25
        tracks = [
            track("t1", ("a", 1), ("b", 1)),
            track("t2", ("a", 1)),
            track("t3", ("b", 1)),
            track("t4", ("c", 1)),
        ]
        sim = similarity(build_term_doc(tracks, ["a", "b", "c"]))
        i, j = sim.tags.index("a"), sim.tags.index("b")
        assert sim.a[i, j] == 1 and sim.b[i, j] == 1 and sim.c[i, j] == 1 and sim.d[i, j] == 1
        assert sim.values[i, j] == pytest.approx(0.25)

    def test_diagonal_one_for_occurring_tags(self):
        tracks = [track("t1", ("a", 1), ("b", 2)), track("t2", ("b", 1))]
        sim = similarity(build_term_doc(tracks, ["a", "b"]))
        assert np.diag(sim.values).tolist() == [1.0, 1.0]

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(1)
        tracks = []
        for t in range(12):
            tags = [(g, 1) for g in ["a", "b", "c", "d"] if rng.random() < 0.5]
            if not tags:
                tags = [("a", 1)]
            tracks.append(track(f"t{t:02d}", *tags))
        sim1 = similarity(build_term_doc(tracks, ["a", "b", "c", "d"]))
        shuffled = [tracks[i] for i in rng.permutation(len(tracks))]
        sim2 = similarity(build_term_doc(shuffled, ["a", "b", "c", "d"]))
        assert np.array_equal(sim1.values, sim2.values)

    def test_bounds_on_exhaustive_count_sweep(self):
        # all 2x2 tables with a,b,c,d <= 4 via explicit incidence columns
        for a in range(5):
            for b in range(5):
                for c in range(5):
                    for d in range(5):
                        n = a + b + c + d
                        if n == 0:
                            continue
                        col_i = np.array([1] * a + [1] * b + [0] * c + [0] * d, dtype=np.int8)
                        col_j = np.array([1] * a + [0] * b + [1] * c + [0] * d, dtype=np.int8)
                        tdm = TermDocMatrix(
                            track_ids=tuple(f"t{k}" for k in range(n)),
                            tags=("i", "j"),
                            matrix=np.column_stack([col_i, col_j]),
                        )
                        sim = similarity(tdm)
                        value = sim.values[0, 1]
                        assert 0.0 <= value <= 1.0, (a, b, c, d, value)
                        if b == 0 and c == 0 and a > 0 and d > 0:
                            assert value == pytest.approx(1.0)
                        else:
                            assert value < 1.0 or (a == 0 or d == 0)


class TestWard:
    def test_two_separated_pairs_merge_first(self):
        vals = np.array(
            [
                [1.0, 0.9, 0.1, 0.1],
                [0.9, 1.0, 0.1, 0.1],
                [0.1, 0.1, 1.0, 0.9],
                [0.1, 0.1, 0.9, 1.0],
            ]
        )
        dend = ward_linkage(sim_from_values(vals))
        first_two = {(m[0], m[1]) for m in dend.merges[:2]}
        assert first_two == {(0, 1), (2, 3)}

    def test_two_leaves_single_merge_at_delta(self):
        vals = np.array([[1.0, 0.75], [0.75, 1.0]])
        dend = ward_linkage(sim_from_values(vals))
        assert len(dend.merges) == 1
        assert dend.merges[0][2] == pytest.approx(0.25)

    def test_matches_naive_oracle_on_random_matrices(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(2, 33))
            sim = random_similarity(rng, n)
            dend = ward_linkage(sim)
            oracle = ward_naive(1.0 - sim.values)
            assert len(dend.merges) == len(oracle)
            for ours, theirs in zip(dend.merges, oracle):
                assert ours[0] == theirs[0] and ours[1] == theirs[1]
                assert ours[2] == pytest.approx(theirs[2], abs=1e-9)
                assert ours[3] == theirs[3]

    def test_heights_non_decreasing(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            sim = random_similarity(rng, int(rng.integers(2, 25)))
            heights = [m[2] for m in ward_linkage(sim).merges]
            assert all(b >= a - 1e-12 for a, b in zip(heights, heights[1:]))

    def test_sqrt_transform_flag(self):
        vals = np.array([[1.0, 0.75], [0.75, 1.0]])
        dend = ward_linkage(sim_from_values(vals), transform="sqrt_one_minus")
        assert dend.merges[0][2] == pytest.approx(0.5)
        with pytest.raises(ConfigError):
            ward_linkage(sim_from_values(vals), transform="cube")

    def test_single_leaf_rejected(self):
        with pytest.raises(DataError):
            ward_linkage(sim_from_values(np.array([[1.0]])))


class TestDynamicCut:
    def test_recovers_three_planted_clusters(self):
        from sklearn.metrics import adjusted_rand_score

        sim, truth = planted_similarity()
        dend = ward_linkage(sim)
        cut = dynamic_cut(dend, min_cluster_size=5)
        assert len(cut.clusters) == 3
        predicted = [cut.assignments[f"g{i}"] for i in range(len(truth))]
        assert adjusted_rand_score(truth, predicted) == 1.0

    def test_star_dendrogram_single_cluster(self):
        # chain of merges all at the same height: nothing to split
        leaves = tuple(f"g{i}" for i in range(6))
        merges = [(0, 1, 0.4, 2)] + [(k, 4 + k, 0.4, k + 1) for k in range(2, 6)]
        dend = Dendrogram(leaves=leaves, merges=tuple(merges))
        cut = dynamic_cut(dend, min_cluster_size=10)
        assert len(cut.clusters) == 1
        assert set(cut.clusters[0].members) == set(leaves)

    def test_min_cluster_size_validated(self):
        sim, _ = planted_similarity()
        dend = ward_linkage(sim)
        with pytest.raises(ConfigError):
            dynamic_cut(dend, min_cluster_size=0)

    def test_clusters_disjoint_and_respect_min_size(self):
        rng = np.random.default_rng(4)
        for trial in range(10):
            sim = random_similarity(rng, int(rng.integers(6, 30)))
            cut = dynamic_cut(ward_linkage(sim), min_cluster_size=3)
            seen = set()
            for cluster in cut.clusters:
                assert not seen.intersection(cluster.members)
                seen.update(cluster.members)
                if len(cut.clusters) > 1:
                    assert len(cluster.members) >= 3
            assert seen.union(cut.unassigned) <= set(sim.tags)

    def test_deep_split_is_at_least_as_fine(self):
        sim, _ = planted_similarity(within=0.8, across=0.3, jitter=0.05, seed=5)
        dend = ward_linkage(sim)
        shallow = dynamic_cut(dend, min_cluster_size=4, deep_split=False)
        deep = dynamic_cut(dend, min_cluster_size=4, deep_split=True)
        assert len(deep.clusters) >= len(shallow.clusters)


class TestLabels:
    def test_singleton_cluster_label_is_its_tag(self):
        sim, _ = planted_similarity(n_clusters=2, size=3)
        from tagrisk.model import GenreCluster, GenreClusterSet

        clusters = GenreClusterSet(clusters=(GenreCluster(1, ("g0",)),))
        labeled = label_clusters(clusters, sim)
        assert labeled.clusters[0].label_tags == ("g0",)

    def test_highest_mean_similarity_ranks_first(self):
        vals = np.array(
            [
                [1.0, 0.9, 0.8],
                [0.9, 1.0, 0.5],
                [0.8, 0.5, 1.0],
            ]
        )
        sim = sim_from_values(vals)
        from tagrisk.model import GenreCluster, GenreClusterSet

        clusters = GenreClusterSet(clusters=(GenreCluster(1, ("g0", "g1", "g2")),))
        labeled = label_clusters(clusters, sim, top_k=3)
        assert labeled.clusters[0].label_tags[0] == "g0"  # mean 0.85 beats 0.7 and 0.65

    def test_core_matches_brute_force_ranking(self):
        rng = np.random.default_rng(6)
        sim = random_similarity(rng, 6)
        from tagrisk.model import GenreCluster, GenreClusterSet

        members = tuple(sim.tags)
        labeled = label_clusters(GenreClusterSet(clusters=(GenreCluster(1, members),)), sim, top_k=5)
        means = {}
        for i, tag in enumerate(sim.tags):
            means[tag] = np.mean([sim.values[i, j] for j in range(6) if j != i])
        expected = [t for t, _ in sorted(means.items(), key=lambda kv: (-kv[1], kv[0]))][:5]
        assert list(labeled.clusters[0].label_tags) == expected


class TestDendrogramType:
    def test_merge_count_validated(self):
        with pytest.raises(ValidationError):
            Dendrogram(leaves=("a", "b", "c"), merges=((0, 1, 0.5, 2),))

    def test_height_monotonicity_validated(self):
        with pytest.raises(ValidationError):
            Dendrogram(
                leaves=("a", "b", "c"),
                merges=((0, 1, 0.5, 2), (2, 3, 0.2, 3)),
            )
