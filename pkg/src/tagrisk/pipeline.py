"""End-to-end orchestration of the tag-to-risk pipeline.

Stages write their artifacts under the output directory and later stages
load them back (verifying the config-hash stamp) when invoked standalone,
so the CLI subcommands compose incrementally. `run_all` executes the whole
grid: both emotion spaces and every (top-n, window) combination.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from . import classify as classify_mod
from . import gems as gems_mod
from . import genrecluster as gc
from . import induction, report, scoring, stats, tagfilter
from .config import PipelineConfig
from .errors import DataError
from .ingest import dump_fixture, load_fixture
from .model import GEMS_CATEGORIES, EmotionPoint, RiskLabel, ScoreTable, TagVocabulary

log = logging.getLogger(__name__)

SIGNIFICANCE = 0.05


class Engine:
    """Holds the resolved config plus lazily computed stage results."""

    def __init__(self, config: PipelineConfig, out_dir):
        self.config = config
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.stamp = report.stamp(config.hash(), config.seed)
        self._cohort = None
        self._resources = None
        self._filtered = None
        self._induced: dict[str, tuple] = {}
        self._vocab: dict[str, TagVocabulary] = {}
        self._clusters = None
        self._genre_tags = None

    # -- ingest ------------------------------------------------------------

    def cohort(self):
        if self._cohort is None:
            participants, histories, tracks = load_fixture(self.config.paths["fixture"])
            tracks_by_id = {t.track_id: t for t in tracks}
            self._cohort = (participants, histories, tracks_by_id)
        return self._cohort

    def run_ingest(self):
        participants, histories, tracks_by_id = self.cohort()
        dump_fixture(participants, histories, list(tracks_by_id.values()), self.out / "cohort.jsonl")
        manifest = {
            "config_hash": self.config.hash(),
            "seed": self.config.seed,
            "participants": len(participants),
            "histories": len(histories),
            "tracks": len(tracks_by_id),
        }
        (self.out / "run.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest

    # -- tag filtering -----------------------------------------------------

    def resources(self):
        if self._resources is None:
            p = self.config.paths
            self._resources = tagfilter.load_resources(
                p["stopwords"], p["wordlist"], p["pos_lexicon"], p["blocklist"]
            )
        return self._resources

    def run_filter(self) -> set[str]:
        path = self.out / "filter" / "vocabulary_tags.csv"
        if self._filtered is None and path.is_file():
            _, _, rows = report.read_csv(path, self.stamp)
            self._filtered = {row[0] for row in rows}
        if self._filtered is None:
            _, _, tracks_by_id = self.cohort()
            raw = [a.tag for tid in sorted(tracks_by_id) for a in tracks_by_id[tid].tags]
            kept, rep = tagfilter.filter_tags(raw, self.resources())
            self._filtered = kept
            path.parent.mkdir(parents=True, exist_ok=True)
            report.write_csv(path, ["tag"], [[t] for t in sorted(kept)], self.stamp)
            report.write_csv(
                self.out / "filter" / "filter_report.csv",
                ["stage", "dropped"],
                [[s, rep.stage_counts.get(s, 0)] for s in tagfilter.STAGES],
                self.stamp,
            )
            report.write_csv(
                self.out / "filter" / "dropped_tags.csv",
                ["tag", "stage"],
                sorted(rep.dropped.items()),
                self.stamp,
            )
        return self._filtered

    # -- induction and mapping ----------------------------------------------

    def run_induce(self, space: str):
        if space in self._induced:
            return self._induced[space]
        space_dir = self.out / space
        points_path = space_dir / "tag_points.csv"
        regressor_path = space_dir / "regressor.txt"
        if points_path.is_file() and regressor_path.is_file():
            _, header, rows = report.read_csv(points_path, self.stamp)
            points = {
                row[0]: EmotionPoint(tuple(float(v) for v in row[1:])) for row in rows
            }
            regressor = induction.load_regressor(regressor_path)
            self._induced[space] = (regressor, points)
            return self._induced[space]

        tags = self.run_filter()
        table = induction.load_embeddings(
            self.config.paths["embeddings"],
            self.config.paths.get("subword_embeddings"),
        )
        lexicon = induction.load_lexicon(self.config.paths["lexicon"])
        cfg = induction.TrainConfig(
            hidden=self.config.hidden,
            out_dim=2 if space == "VA" else 3,
            seed=self.config.seed,
            lr=self.config.lr,
            epochs=self.config.epochs,
            batch_size=self.config.batch_size,
            val_fraction=self.config.val_fraction,
            patience=self.config.patience,
        )
        regressor = induction.train_regressor(lexicon, table, cfg)
        points = induction.induce_tag_points(tags, table, regressor)
        if not points:
            raise DataError("no filtered tag could be embedded; check the embeddings path")

        space_dir.mkdir(parents=True, exist_ok=True)
        induction.save_regressor(regressor, regressor_path)
        axes = ["valence", "arousal"] + (["dominance"] if space == "VAD" else [])
        report.write_csv(
            points_path,
            ["tag"] + axes,
            [[t] + [float(c) for c in points[t].coords] for t in sorted(points)],
            self.stamp,
        )
        rows = [["val_loss", regressor.meta["val_loss"]], ["epochs_run", regressor.meta["epochs_run"]]]
        rows += [
            [f"val_pearson_{axes[d]}", regressor.meta["val_pearson"][d]] for d in range(len(axes))
        ]
        report.write_csv(space_dir / "training.csv", ["metric", "value"], rows, self.stamp)
        self._induced[space] = (regressor, points)
        return self._induced[space]

    def run_map(self, space: str) -> TagVocabulary:
        if space in self._vocab:
            return self._vocab[space]
        space_dir = self.out / space
        vocab_path = space_dir / "vocabulary.csv"
        if vocab_path.is_file():
            _, _, rows = report.read_csv(vocab_path, self.stamp)
            self._vocab[space] = TagVocabulary(category_of={r[0]: r[1] for r in rows})
            return self._vocab[space]

        regressor, points = self.run_induce(space)
        gems = gems_mod.load_gems_table(self.config.paths.get("gems"), space=space)
        if self.config.centroid_mode == "recompute":
            table = induction.load_embeddings(
                self.config.paths["embeddings"],
                self.config.paths.get("subword_embeddings"),
            )
            term_points = _induce_term_points(gems, table, regressor)
            centroids = gems_mod.category_centroids(term_points, gems)
        else:
            centroids = gems.centroids()
        vocabulary = gems_mod.build_vocabulary(points, centroids)

        space_dir.mkdir(parents=True, exist_ok=True)
        report.write_csv(
            vocab_path,
            ["tag", "category"],
            sorted(vocabulary.category_of.items()),
            self.stamp,
        )
        axes = ["valence", "arousal"] + (["dominance"] if space == "VAD" else [])
        report.write_csv(
            space_dir / "centroids.csv",
            ["category"] + axes,
            [[name] + [float(c) for c in centroids[name].coords] for name in sorted(centroids)],
            self.stamp,
        )
        figures = space_dir / "figures"
        figures.mkdir(exist_ok=True)
        report.centroid_scatter(centroids, points, figures / "centroids.png")
        self._vocab[space] = vocabulary
        return vocabulary

    # -- per-cell stages -----------------------------------------------------

    def cell_dir(self, space: str, t: int, n: int) -> Path:
        d = self.out / "cells" / f"{space.lower()}_t{t}_n{n}"
        d.mkdir(parents=True, exist_ok=True)
        return d

    def cell_histories(self, t: int, n: int):
        _, histories, _ = self.cohort()
        selected = [h for h in histories if h.window.half_width_months == t]
        if not selected:
            raise DataError(f"no histories with a {t}-month window in the fixture")
        return [h.top(n) for h in selected]

    def run_score(self, space: str, t: int, n: int) -> ScoreTable:
        cell = self.cell_dir(space, t, n)
        path = cell / "scores.csv"
        if path.is_file():
            _, header, rows = report.read_csv(path, self.stamp)
            return ScoreTable(
                rows=tuple(r[0] for r in rows),
                cols=tuple(header[1:]),
                values=np.array([[float(v) for v in r[1:]] for r in rows]),
            )
        vocabulary = self.run_map(space)
        participants, _, tracks_by_id = self.cohort()
        table = scoring.build_score_table(
            self.cell_histories(t, n), tracks_by_id, vocabulary, GEMS_CATEGORIES
        )
        report.write_csv(
            path,
            ["user_id"] + list(table.cols),
            [[u] + [float(v) for v in table.values[i]] for i, u in enumerate(table.rows)],
            self.stamp,
        )
        figures = cell / "figures"
        figures.mkdir(exist_ok=True)
        risk_of = {p.user_id: p.risk for p in participants}
        report.scores_boxplot(table, risk_of, figures / "scores_boxplot.png")
        return table

    def run_test(self, space: str, t: int, n: int) -> list[stats.CategoryTest]:
        table = self.run_score(space, t, n)
        participants, _, _ = self.cohort()
        results = stats.group_difference_report(
            table,
            participants,
            GEMS_CATEGORIES,
            iterations=self.config.iterations,
            seed=self.config.seed,
            alpha=SIGNIFICANCE,
            mode=self.config.bootstrap_mode,
        )
        rows = []
        for r in results:
            rows.append(
                [
                    r.category,
                    r.mwu.u_statistic,
                    r.mwu.mean_rank_x,
                    r.mwu.mean_rank_y,
                    r.mwu.p_value,
                    r.bootstrap.p_value if r.bootstrap else "",
                    r.direction,
                ]
            )
        report.write_csv(
            self.cell_dir(space, t, n) / "group_test.csv",
            ["category", "u", "mean_rank_norisk", "mean_rank_atrisk", "p_mwu", "p_bootstrap", "direction"],
            rows,
            self.stamp,
        )
        return results

    def flagged(self, results: list[stats.CategoryTest]) -> list[stats.CategoryTest]:
        return [
            r
            for r in results
            if r.bootstrap is not None and r.bootstrap.p_value < SIGNIFICANCE
        ]

    def run_rank(self, space: str, t: int, n: int, results=None) -> dict[str, list]:
        if results is None:
            results = self.run_test(space, t, n)
        vocabulary = self.run_map(space)
        participants, _, tracks_by_id = self.cohort()
        risk_of = {p.user_id: p.risk for p in participants}
        histories = self.cell_histories(t, n)
        norisk = [h for h in histories if risk_of.get(h.user_id) is RiskLabel.NO_RISK]
        atrisk = [h for h in histories if risk_of.get(h.user_id) is RiskLabel.AT_RISK]
        ranked = {}
        for result in self.flagged(results):
            g_norisk = scoring.group_tag_scores(norisk, tracks_by_id, vocabulary)
            g_atrisk = scoring.group_tag_scores(atrisk, tracks_by_id, vocabulary)
            rows = scoring.rank_tags(g_norisk, g_atrisk, vocabulary, result.category)
            ranked[result.category] = rows
            slug = result.category.replace(" ", "_").lower()
            report.write_csv(
                self.cell_dir(space, t, n) / f"rank_{slug}.csv",
                ["tag", "abs_difference", "score_norisk", "score_atrisk"],
                [
                    [tag, delta, g_norisk.get(tag, 0.0), g_atrisk.get(tag, 0.0)]
                    for tag, delta in rows
                ],
                self.stamp,
            )
        return ranked

    # -- genre clustering ----------------------------------------------------

    def genre_tags(self) -> set[str]:
        if self._genre_tags is None:
            with open(self.config.paths["genre_tags"], encoding="utf-8") as fh:
                self._genre_tags = {line.strip() for line in fh if line.strip()}
        return self._genre_tags

    def run_cluster(self):
        if self._clusters is not None:
            return self._clusters
        _, _, tracks_by_id = self.cohort()
        tdm = gc.build_term_doc(list(tracks_by_id.values()), sorted(self.genre_tags()))
        sim = gc.similarity(tdm)
        dendrogram = gc.ward_linkage(sim, transform=self.config.dissim_transform)
        cut = gc.dynamic_cut(
            dendrogram,
            min_cluster_size=self.config.min_cluster_size,
            deep_split=self.config.deep_split,
        )
        labeled = gc.label_clusters(cut, sim, top_k=self.config.label_top_k)

        cluster_dir = self.out / "cluster"
        cluster_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for cluster in labeled.clusters:
            core = set(cluster.label_tags)
            for tag in cluster.members:
                rows.append([tag, cluster.cluster_id, int(tag in core), cluster.label])
        for tag in labeled.unassigned:
            rows.append([tag, 0, 0, ""])
        report.write_csv(
            cluster_dir / "genre_clusters.csv",
            ["tag", "cluster_id", "is_core", "cluster_label"],
            rows,
            self.stamp,
        )
        figures = cluster_dir / "figures"
        figures.mkdir(exist_ok=True)
        report.dendrogram_figure(dendrogram, figures / "dendrogram.png")
        self._clusters = (sim, dendrogram, labeled)
        return self._clusters

    def run_genre_scores(self, space: str, t: int, n: int, results=None):
        """Genre prevalence per cluster (overall and per flagged category) plus
        point-biserial correlation of each cluster's scores with risk."""
        if results is None:
            results = self.run_test(space, t, n)
        _, _, labeled = self.run_cluster()
        vocabulary = self.run_map(space)
        participants, _, tracks_by_id = self.cohort()
        histories = self.cell_histories(t, n)
        risk_of = {p.user_id: p.risk for p in participants}
        genre_tags = self.genre_tags()
        cell = self.cell_dir(space, t, n)

        filters: list[tuple[str, set[str] | None]] = [("all", None)]
        filters += [
            (r.category, vocabulary.tags_in(r.category)) for r in self.flagged(results)
        ]
        cluster_ids = labeled.cluster_ids()
        score_rows = []
        corr_rows = []
        labels_of = {c.cluster_id: c.label for c in labeled.clusters}
        mean_by_group: dict[str, list[float]] = {}
        for filter_name, filter_tags in filters:
            per_user: dict[str, dict[int, float]] = {}
            for history in sorted(histories, key=lambda h: h.user_id):
                row = scoring.genre_prevalence(
                    history, tracks_by_id, labeled, genre_tags, filter_tags
                )
                if row is not None:
                    per_user[history.user_id] = row
                    score_rows.append(
                        [filter_name, history.user_id] + [row[cid] for cid in cluster_ids]
                    )
            tested = [
                u for u in per_user if risk_of.get(u) in (RiskLabel.NO_RISK, RiskLabel.AT_RISK)
            ]
            labels = [1 if risk_of[u] is RiskLabel.AT_RISK else 0 for u in tested]
            if filter_name == "all":
                for group, code in (("NoRisk", 0), ("AtRisk", 1)):
                    members = [u for u, lab in zip(tested, labels) if lab == code]
                    mean_by_group[group] = [
                        float(np.mean([per_user[u][cid] for u in members])) if members else 0.0
                        for cid in cluster_ids
                    ]
            for cid in cluster_ids:
                scores = [per_user[u][cid] for u in tested]
                if len(set(labels)) < 2 or np.std(scores) == 0:
                    r = float("nan")
                else:
                    r = stats.point_biserial(scores, labels)
                corr_rows.append([filter_name, cid, labels_of[cid], r])

        report.write_csv(
            cell / "genre_scores.csv",
            ["filter", "user_id"] + [f"c{cid}" for cid in cluster_ids],
            score_rows,
            self.stamp,
        )
        report.write_csv(
            cell / "genre_correlation.csv",
            ["filter", "cluster_id", "cluster_label", "r_biserial"],
            corr_rows,
            self.stamp,
        )
        figures = cell / "figures"
        figures.mkdir(exist_ok=True)
        report.genre_prevalence_bars(
            [f"c{cid}" for cid in cluster_ids],
            mean_by_group.get("NoRisk", [0.0] * len(cluster_ids)),
            mean_by_group.get("AtRisk", [0.0] * len(cluster_ids)),
            figures / "genre_prevalence.png",
        )
        return corr_rows

    # -- classification --------------------------------------------------------

    def run_classify(self, space: str, t: int, n: int):
        vocabulary = self.run_map(space)
        participants, _, tracks_by_id = self.cohort()
        table = induction.load_embeddings(
            self.config.paths["embeddings"],
            self.config.paths.get("subword_embeddings"),
        )
        associations = {}
        for track_id, track in tracks_by_id.items():
            shares = scoring.tag_association(track, vocabulary.tags)
            if shares is not None:
                associations[track_id] = shares
        risk_of = {p.user_id: p.risk for p in participants}
        histories = [
            h
            for h in self.cell_histories(t, n)
            if risk_of.get(h.user_id) in (RiskLabel.NO_RISK, RiskLabel.AT_RISK)
        ]
        histories.sort(key=lambda h: h.user_id)
        features = [
            classify_mod.user_embedding(h, vocabulary, associations, table) for h in histories
        ]
        x = np.stack([f.vector for f in features])
        y = np.array(
            [1 if risk_of[h.user_id] is RiskLabel.AT_RISK else 0 for h in histories]
        )
        cv = classify_mod.cross_validate(
            x,
            y,
            folds=self.config.folds,
            seed=self.config.seed,
            C=self.config.svm_c,
            gamma=self.config.svm_gamma,
            lam=self.config.lam,
            ids=[h.user_id for h in histories],
        )
        rows = [["mean", cv.mean_accuracy, "", ""]]
        rows += [
            [f"fold{i}", acc, cv.fold_selected[i], cv.lam_used[i]]
            for i, acc in enumerate(cv.fold_accuracies)
        ]
        report.write_csv(
            self.cell_dir(space, t, n) / "classify.csv",
            ["fold", "accuracy", "selected_dims", "lambda"],
            rows,
            self.stamp,
        )
        return cv

    # -- validity and the full grid ---------------------------------------------

    def run_validity(self):
        participants, _, _ = self.cohort()
        rows = []
        for group, label in (("NoRisk", RiskLabel.NO_RISK), ("AtRisk", RiskLabel.AT_RISK)):
            members = [p for p in participants if p.risk is label]
            if len(members) < 4:
                continue
            healthy = [p.hums_healthy for p in members]
            unhealthy = [p.hums_unhealthy for p in members]
            k10 = [float(p.k10) for p in members]
            rows.append([group, "healthy_vs_unhealthy", stats.partial_correlation(healthy, unhealthy, [k10])])
            rows.append([group, "k10_vs_healthy", stats.partial_correlation(k10, healthy, [unhealthy])])
            rows.append([group, "k10_vs_unhealthy", stats.partial_correlation(k10, unhealthy, [healthy])])
        report.write_csv(
            self.out / "validity.csv", ["group", "pair", "partial_r"], rows, self.stamp
        )
        return rows

    def run_all(self):
        """The whole grid; returns the table2-style summary rows."""
        self.run_ingest()
        self.run_filter()
        self.run_validity()
        self.run_cluster()
        summary = []
        for space in self.config.spaces:
            self.run_map(space)
            for t in self.config.window_months:
                for n in self.config.top_n:
                    results = self.run_test(space, t, n)
                    self.run_rank(space, t, n, results)
                    self.run_genre_scores(space, t, n, results)
                    self.run_classify(space, t, n)
                    for r in self.flagged(results):
                        summary.append(
                            [
                                space,
                                t,
                                n,
                                r.category,
                                r.mwu.u_statistic,
                                r.mwu.p_value,
                                r.bootstrap.p_value,
                                r.direction,
                            ]
                        )
        report.write_csv(
            self.out / "table2_style.csv",
            ["space", "window_months", "top_n", "category", "u", "p_mwu", "p_bootstrap", "direction"],
            summary,
            self.stamp,
        )
        return summary


def _induce_term_points(gems, table, regressor):
    """Project GEMS terms; multiword terms use the mean of their word vectors."""
    points = {}
    for term in gems.terms():
        words = tagfilter.normalize(term).split()
        vectors = [v for v in (induction.embed(table, w) for w in words) if v is not None]
        if vectors:
            points[term] = induction.predict(regressor, np.mean(vectors, axis=0))
    return points
