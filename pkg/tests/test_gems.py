import math

import numpy as np
import pytest

from tagrisk.errors import ConfigError, ValidationError
from tagrisk.gems import (
    assign_category,
    build_vocabulary,
    category_centroids,
    load_gems_table,
)
from tagrisk.model import GEMS_CATEGORIES, EmotionPoint


@pytest.fixture(scope="module")
def gems_vad():
    return load_gems_table(space="VAD")


@pytest.fixture(scope="module")
def gems_va():
    return load_gems_table(space="VA")


class TestTable:
    def test_nine_categories_forty_terms(self, gems_vad):
        assert len(gems_vad.categories) == 9
        assert len(gems_vad.terms()) == 40
        assert {c.name for c in gems_vad.categories} == set(GEMS_CATEGORIES)

    def test_every_category_has_a_defining_term(self, gems_vad):
        for c in gems_vad.categories:
            assert max(l for _, l in c.terms) == 1.0
            assert all(0 < l <= 1 for _, l in c.terms)

    def test_default_centroids_from_shipped_config(self, gems_vad, gems_va):
        assert gems_vad.centroids()["Sadness"].coords == (2.99, 4.19, 3.89)
        assert gems_va.centroids()["Sadness"].coords == (2.81, 3.61)

    def test_umbrellas(self, gems_vad):
        umbrella = {c.name: c.umbrella for c in gems_vad.categories}
        assert umbrella["Sadness"] == "Unease"
        assert umbrella["Power"] == "Vitality"
        assert umbrella["Wonder"] == "Sublimity"


class TestCentroids:
    def test_single_term_identity(self, gems_vad):
        points = {t: EmotionPoint((4.0, 5.0, 6.0)) for t in gems_vad.terms()}
        points["sad"] = EmotionPoint((2.0, 4.0, 4.0))
        points["sorrowful"] = EmotionPoint((2.0, 4.0, 4.0))
        result = category_centroids(points, gems_vad)
        assert result["Sadness"].coords == pytest.approx((2.0, 4.0, 4.0))

    def test_sadness_weighted_mean_by_hand(self, gems_vad):
        # sad loading 1.0 at (2,4,4); sorrowful loading 0.82 at (4,5,4):
        # ((2 + 0.82*4)/1.82, (4 + 0.82*5)/1.82, 4)
        points = {t: EmotionPoint((5.0, 5.0, 5.0)) for t in gems_vad.terms()}
        points["sad"] = EmotionPoint((2.0, 4.0, 4.0))
        points["sorrowful"] = EmotionPoint((4.0, 5.0, 4.0))
        result = category_centroids(points, gems_vad)
        expected = ((2 + 0.82 * 4) / 1.82, (4 + 0.82 * 5) / 1.82, 4.0)
        assert result["Sadness"].coords == pytest.approx(expected, abs=1e-9)
        assert result["Sadness"].coords == pytest.approx((2.901, 4.451, 4.0), abs=1e-3)

    def test_missing_term_is_config_error(self, gems_vad):
        points = {t: EmotionPoint((5.0, 5.0, 5.0)) for t in gems_vad.terms()[:-2]}
        with pytest.raises(ConfigError, match="sorrowful"):
            category_centroids(points, gems_vad)

    def test_centroid_inside_convex_hull_of_terms(self, gems_vad):
        rng = np.random.default_rng(4)
        points = {
            t: EmotionPoint(tuple(rng.uniform(2, 8, size=3))) for t in gems_vad.terms()
        }
        result = category_centroids(points, gems_vad)
        for category in gems_vad.categories:
            coords = np.array([points[t].coords for t, _ in category.terms])
            centroid = np.array(result[category.name].coords)
            assert np.all(centroid >= coords.min(axis=0) - 1e-12)
            assert np.all(centroid <= coords.max(axis=0) + 1e-12)

    def test_mixed_spaces_rejected(self, gems_vad):
        points = {t: EmotionPoint((5.0, 5.0, 5.0)) for t in gems_vad.terms()}
        points["sad"] = EmotionPoint((5.0, 5.0))
        with pytest.raises(ValidationError):
            category_centroids(points, gems_vad)


class TestAssign:
    def test_exact_centroid_hits_itself(self, gems_vad):
        centroids = gems_vad.centroids()
        assert assign_category(centroids["Wonder"], centroids) == "Wonder"

    def test_tie_breaks_lexicographically(self):
        centroids = {
            "Power": EmotionPoint((4.0, 5.0, 5.0)),
            "Wonder": EmotionPoint((6.0, 5.0, 5.0)),
        }
        assert assign_category(EmotionPoint((5.0, 5.0, 5.0)), centroids) == "Power"

    def test_sad_corner_point(self, gems_vad):
        centroids = gems_vad.centroids()
        point = EmotionPoint((2.9, 4.1, 3.9))
        distances = {name: point.distance(c) for name, c in centroids.items()}
        assert min(distances, key=distances.get) == "Sadness"  # exhaustive check
        assert assign_category(point, centroids) == "Sadness"

    def test_translation_invariance(self, gems_vad):
        rng = np.random.default_rng(9)
        centroids = gems_vad.centroids()
        for _ in range(50):
            coords = rng.uniform(2, 8, size=3)
            shift = rng.uniform(-0.5, 0.5, size=3)
            before = assign_category(EmotionPoint(tuple(coords)), centroids)
            shifted_centroids = {
                name: EmotionPoint(tuple(np.array(c.coords) + shift))
                for name, c in centroids.items()
            }
            after = assign_category(EmotionPoint(tuple(coords + shift)), shifted_centroids)
            assert before == after


class TestVocabulary:
    def test_single_tag(self, gems_vad):
        vocab = build_vocabulary({"sad": EmotionPoint((2.9, 4.1, 3.9))}, gems_vad.centroids())
        assert len(vocab) == 1
        assert vocab.category_of["sad"] == "Sadness"

    def test_all_tags_at_one_centroid(self, gems_vad):
        c = gems_vad.centroids()["Tension"]
        vocab = build_vocabulary({f"t{i}": c for i in range(5)}, gems_vad.centroids())
        assert vocab.tags_in("Tension") == {f"t{i}" for i in range(5)}

    def test_nine_tags_at_nine_centroids(self, gems_vad):
        centroids = gems_vad.centroids()
        points = {f"tag_{name}": c for name, c in centroids.items()}
        vocab = build_vocabulary(points, centroids)
        for name in GEMS_CATEGORIES:
            assert vocab.tags_in(name) == {f"tag_{name}"}

    def test_partition_property(self, gems_vad):
        rng = np.random.default_rng(13)
        points = {f"t{i}": EmotionPoint(tuple(rng.uniform(1, 9, 3))) for i in range(200)}
        vocab = build_vocabulary(points, gems_vad.centroids())
        total = sum(len(vocab.tags_in(c)) for c in GEMS_CATEGORIES)
        assert total == len(points)

    def test_empty_rejected(self, gems_vad):
        with pytest.raises(ValidationError):
            build_vocabulary({}, gems_vad.centroids())
