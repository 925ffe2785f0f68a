"""Durable per-session storage: envelope, append-only event log, tokens.

Layout under the store root, one directory per session:

    <session_id>/envelope.json    config + kind, written once (+ expiry flag)
    <session_id>/events.jsonl     answer events, fsynced before ack
    <session_id>/tokens.jsonl     issued stimulus tokens (no SNR content)
    <session_id>/snapshot.json    advisory state snapshot; replay wins
    <session_id>/stimuli/         rendered audio served to the client

The event log is the source of truth; everything else is derivable.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class UnknownSessionError(KeyError):
    pass


def _fsync_write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
        handle.flush()
        os.fsync(handle.fileno())


def _fsync_append(path: Path, line: str) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(line + "\n")
        handle.flush()
        os.fsync(handle.fileno())


class SessionStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, session_id: str) -> Path:
        # Session ids are generated tokens; refuse anything path-like.
        if not session_id or any(c in session_id for c in "/\\."):
            raise UnknownSessionError(session_id)
        return self.root / session_id

    def exists(self, session_id: str) -> bool:
        try:
            return (self._dir(session_id) / "envelope.json").is_file()
        except UnknownSessionError:
            return False

    def list_ids(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(
            p.name for p in self.root.iterdir() if (p / "envelope.json").is_file()
        )

    def create(self, session_id: str, envelope: dict) -> None:
        directory = self._dir(session_id)
        if directory.exists():
            raise FileExistsError(f"session {session_id} already exists")
        (directory / "stimuli").mkdir(parents=True)
        _fsync_write(
            directory / "envelope.json",
            json.dumps(envelope, indent=2, sort_keys=True) + "\n",
        )
        (directory / "events.jsonl").touch()

    def load_envelope(self, session_id: str) -> dict:
        path = self._dir(session_id) / "envelope.json"
        if not path.is_file():
            raise UnknownSessionError(session_id)
        return json.loads(path.read_text(encoding="utf-8"))

    def update_envelope(self, session_id: str, envelope: dict) -> None:
        if not self.exists(session_id):
            raise UnknownSessionError(session_id)
        _fsync_write(
            self._dir(session_id) / "envelope.json",
            json.dumps(envelope, indent=2, sort_keys=True) + "\n",
        )

    def append_event(self, session_id: str, event: dict) -> None:
        """Durable append; callers must not acknowledge an answer before
        this returns."""
        if not self.exists(session_id):
            raise UnknownSessionError(session_id)
        _fsync_append(
            self._dir(session_id) / "events.jsonl",
            json.dumps(event, sort_keys=True),
        )

    def load_events(self, session_id: str) -> list[dict]:
        path = self._dir(session_id) / "events.jsonl"
        if not path.is_file():
            if not self.exists(session_id):
                raise UnknownSessionError(session_id)
            return []
        events = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line:
                events.append(json.loads(line))
        return events

    def append_token(self, session_id: str, record: dict) -> None:
        _fsync_append(
            self._dir(session_id) / "tokens.jsonl", json.dumps(record, sort_keys=True)
        )

    def load_tokens(self, session_id: str) -> list[dict]:
        path = self._dir(session_id) / "tokens.jsonl"
        if not path.is_file():
            return []
        return [
            json.loads(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]

    def append_serve(self, session_id: str, record: dict) -> None:
        """Replay-count log; not fsynced, losing entries is acceptable."""
        with open(self._dir(session_id) / "serves.jsonl", "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")

    def load_serves(self, session_id: str) -> list[dict]:
        path = self._dir(session_id) / "serves.jsonl"
        if not path.is_file():
            return []
        return [
            json.loads(line)
            for line in path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]

    def write_snapshot(self, session_id: str, state: dict) -> None:
        """Advisory snapshot for auditability; replay remains authoritative."""
        _fsync_write(
            self._dir(session_id) / "snapshot.json",
            json.dumps(state, indent=2, sort_keys=True) + "\n",
        )

    def load_snapshot(self, session_id: str) -> dict | None:
        path = self._dir(session_id) / "snapshot.json"
        if not path.is_file():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def stimulus_path(self, session_id: str, token: str) -> Path:
        return self._dir(session_id) / "stimuli" / f"{token}.wav"
