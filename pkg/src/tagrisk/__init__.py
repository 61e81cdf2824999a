"""Social music tag analytics: from listening histories to depression-risk signals."""

from .model import (
    EmotionCategory,
    EmotionPoint,
    GenreCluster,
    GenreClusterSet,
    ListeningHistory,
    Participant,
    RiskLabel,
    ScoreTable,
    TagAssignment,
    TagVocabulary,
    TrackRecord,
    Window,
    classify_risk,
)

__version__ = "0.1.0"

__all__ = [
    "EmotionCategory",
    "EmotionPoint",
    "GenreCluster",
    "GenreClusterSet",
    "ListeningHistory",
    "Participant",
    "RiskLabel",
    "ScoreTable",
    "TagAssignment",
    "TagVocabulary",
    "TrackRecord",
    "Window",
    "classify_risk",
    "__version__",
]
