"""Listening-history acquisition: a Last.fm-style HTTP client and offline fixtures.

The client speaks the public audioscrobbler JSON shape (user.getTopTracks /
track.getTopTags) against a configurable base URL, throttles itself to the
configured request rate, retries with exponential backoff, and memoizes raw
response bodies in an append-only JSONL cache so repeated fetches never
touch the network. Offline cohorts load from a line-delimited fixture file
holding participant, history and track records.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import requests

from .errors import NotFoundError, ParseError, TransportError, ValidationError
from .model import (
    ListeningHistory,
    Participant,
    TagAssignment,
    TrackRecord,
    Window,
    MAX_TAGS_PER_TRACK,
)
from .tagfilter import normalize

log = logging.getLogger(__name__)

API_KEY_ENV = "TAGRISK_API_KEY"
SECONDS_PER_MONTH = 30 * 24 * 3600  # fixed 30-day months keep windows reproducible
LASTFM_NOT_FOUND = 6


@dataclass
class ApiConfig:
    base_url: str = "https://ws.audioscrobbler.com/2.0/"
    api_key: str = field(default_factory=lambda: os.environ.get(API_KEY_ENV, ""))
    rate_limit: float = 4.0  # requests per second
    max_attempts: int = 3
    backoff_base: float = 0.5

    def __post_init__(self):
        if self.rate_limit <= 0:
            raise ValidationError("rate_limit must be > 0")
        if self.max_attempts < 1:
            raise ValidationError("max_attempts must be >= 1")


class Cache:
    """Append-only JSONL response cache; concurrent readers, serialized writers."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[str, str] = {}
        if self.path.is_file():
            with open(self.path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                        self._index[record["key"]] = record["payload"]
                    except (json.JSONDecodeError, KeyError) as exc:
                        raise ParseError(f"{self.path}:{lineno}: bad cache record ({exc})") from None

    def get(self, key: str) -> str | None:
        return self._index.get(key)

    def put(self, key: str, payload: str) -> None:
        record = {
            "key": key,
            "payload": payload,
            "fetched_at": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            self._index[key] = payload
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


def _window_bounds(window: Window) -> tuple[int, int]:
    center = datetime.fromisoformat(window.center)
    if center.tzinfo is None:
        center = center.replace(tzinfo=timezone.utc)
    half = window.half_width_months * SECONDS_PER_MONTH
    ts = int(center.timestamp())
    return ts - half, ts + half


class LastfmClient:
    def __init__(self, config: ApiConfig, cache: Cache | None = None, session=None):
        self.config = config
        self.cache = cache
        self.session = session or requests.Session()
        self._last_request = 0.0
        self._throttle = threading.Lock()

    def _cache_key(self, params: dict) -> str:
        public = {k: v for k, v in params.items() if k not in ("api_key", "format")}
        blob = json.dumps(public, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def _request(self, params: dict) -> dict:
        key = self._cache_key(params)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return json.loads(hit)
        full = dict(params)
        full["api_key"] = self.config.api_key
        full["format"] = "json"
        last_error = None
        for attempt in range(self.config.max_attempts):
            if attempt:
                time.sleep(self.config.backoff_base * (2 ** (attempt - 1)))
            with self._throttle:
                wait = self._last_request + 1.0 / self.config.rate_limit - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
                self._last_request = time.monotonic()
            try:
                response = self.session.get(self.config.base_url, params=full, timeout=30)
                response.raise_for_status()
            except requests.RequestException as exc:
                last_error = exc
                continue
            payload = response.text
            data = json.loads(payload)
            if isinstance(data, dict) and "error" in data:
                if data["error"] == LASTFM_NOT_FOUND:
                    raise NotFoundError(data.get("message", "not found"))
                last_error = TransportError(f"api error {data['error']}: {data.get('message')}")
                continue
            if self.cache is not None:
                self.cache.put(key, payload)
            return data
        raise TransportError(f"request failed after {self.config.max_attempts} attempts: {last_error}")

    def fetch_top_tracks(self, user_id: str, n: int, window: Window) -> ListeningHistory:
        """Up to n tracks with the highest playcounts inside the window,
        sorted by playcount descending with ties broken by ascending track id."""
        if n < 1:
            raise ValidationError("n must be >= 1")
        start, end = _window_bounds(window)
        data = self._request(
            {
                "method": "user.gettoptracks",
                "user": user_id,
                "limit": n,
                "from": start,
                "to": end,
            }
        )
        try:
            raw_tracks = data["toptracks"]["track"]
        except (KeyError, TypeError):
            raise ParseError("payload missing field toptracks.track") from None
        entries = []
        for item in raw_tracks:
            try:
                track_id = item.get("mbid") or f"{item['artist']['name']}::{item['name']}"
                playcount = int(item["playcount"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad track entry, offending field: {exc}") from None
            entries.append((track_id, playcount))
        entries.sort(key=lambda e: (-e[1], e[0]))
        return ListeningHistory(
            user_id=user_id, entries=tuple(entries[:n]), window=window, top_n=n
        )

    def fetch_track_tags(self, track_id: str) -> TrackRecord:
        """The track's top tags (at most 50) sorted by weight descending."""
        data = self._request({"method": "track.gettoptags", "mbid": track_id})
        try:
            raw = data["toptags"]
        except (KeyError, TypeError):
            raise ParseError("payload missing field toptags") from None
        attr = raw.get("@attr", {}) if isinstance(raw, dict) else {}
        tags = []
        for item in raw.get("tag", []):
            try:
                name = normalize(item["name"])
                count = int(item.get("count", 0))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad tag entry, offending field: {exc}") from None
            if not name:
                log.warning("tag %r on track %s normalizes to nothing, dropped", item.get("name"), track_id)
                continue
            tags.append((name, count))
        return TrackRecord(
            track_id=track_id,
            artist=str(attr.get("artist", "")),
            title=str(attr.get("track", "")),
            tags=_assemble_tags(tags),
        )


def _assemble_tags(pairs: list[tuple[str, int]]) -> tuple[TagAssignment, ...]:
    """Merge duplicate normalized tags (summing weights), sort, keep the top 50."""
    merged: dict[str, int] = {}
    for name, weight in pairs:
        merged[name] = merged.get(name, 0) + weight
    ranked = sorted(merged.items(), key=lambda p: (-p[1], p[0]))[:MAX_TAGS_PER_TRACK]
    return tuple(TagAssignment(tag=t, weight=w) for t, w in ranked)


# ---------------------------------------------------------------------------
# offline fixtures


def load_fixture(path) -> tuple[list[Participant], list[ListeningHistory], list[TrackRecord]]:
    """Read a line-delimited fixture of participant / history / track records.

    Every history entry must resolve to a track record; schema problems are
    reported with the offending line number.
    """
    participants: list[Participant] = []
    histories: list[ListeningHistory] = []
    tracks: list[TrackRecord] = []
    history_lines: list[tuple[int, ListeningHistory]] = []
    track_ids: set[str] = set()

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid json ({exc})") from None
            kind = record.get("kind")
            try:
                if kind == "participant":
                    participants.append(
                        Participant.from_scores(
                            record["user_id"],
                            record["k10"],
                            record["hums_healthy"],
                            record["hums_unhealthy"],
                            record["personality"],
                        )
                    )
                elif kind == "history":
                    window = Window(
                        center=record["window"]["center"],
                        half_width_months=record["window"]["half_width_months"],
                    )
                    history = ListeningHistory(
                        user_id=record["user_id"],
                        entries=tuple((str(t), int(p)) for t, p in record["entries"]),
                        window=window,
                        top_n=record["top_n"],
                    )
                    histories.append(history)
                    history_lines.append((lineno, history))
                elif kind == "track":
                    pairs = []
                    for name, weight in record["tags"]:
                        clean = normalize(str(name))
                        if not clean:
                            log.warning("%s:%d: tag %r normalizes to nothing, dropped", path, lineno, name)
                            continue
                        pairs.append((clean, int(weight)))
                    track = TrackRecord(
                        track_id=record["track_id"],
                        artist=record.get("artist", ""),
                        title=record.get("title", ""),
                        tags=_assemble_tags(pairs),
                    )
                    tracks.append(track)
                    track_ids.add(track.track_id)
                else:
                    raise ParseError(f"{path}:{lineno}: unknown record kind {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            except ValidationError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None

    for lineno, history in history_lines:
        for track_id, _ in history.entries:
            if track_id not in track_ids:
                raise ParseError(
                    f"{path}:{lineno}: history for {history.user_id} references "
                    f"unknown track {track_id!r}"
                )
    return participants, histories, tracks


def dump_fixture(participants, histories, tracks, path) -> None:
    """Write a cohort in the fixture format (one JSON object per line)."""
    lines = []
    for p in participants:
        lines.append(
            json.dumps(
                {
                    "kind": "participant",
                    "user_id": p.user_id,
                    "k10": p.k10,
                    "hums_healthy": p.hums_healthy,
                    "hums_unhealthy": p.hums_unhealthy,
                    "personality": list(p.personality),
                },
                sort_keys=True,
            )
        )
    for h in histories:
        lines.append(
            json.dumps(
                {
                    "kind": "history",
                    "user_id": h.user_id,
                    "entries": [[t, p] for t, p in h.entries],
                    "window": {"center": h.window.center, "half_width_months": h.window.half_width_months},
                    "top_n": h.top_n,
                },
                sort_keys=True,
            )
        )
    for t in tracks:
        lines.append(
            json.dumps(
                {
                    "kind": "track",
                    "track_id": t.track_id,
                    "artist": t.artist,
                    "title": t.title,
                    "tags": [[a.tag, a.weight] for a in t.tags],
                },
                sort_keys=True,
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
