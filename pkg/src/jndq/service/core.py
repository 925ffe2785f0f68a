"""Session service logic, independent of the HTTP layer.

Sessions are event-sourced state machines persisted by SessionStore.
Stimuli are rendered on demand from the registered source set using the
per-session noise seeds carried in each trial spec, written under the
session directory, and served through opaque tokens so a client can never
learn which position holds the reference or compare file names across
trials. Mutations are serialized per session; distinct sessions are fully
independent.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import secrets
import threading
from pathlib import Path

from ..audio import AudioBuffer, load_wav, mix_at_snr, save_wav
from ..screening import Screening, ScreeningConfig
from ..staircase import ConfigError, Staircase, StaircaseConfig
from ..trials import ANSWERS, StimulusSpec
from .store import SessionStore, UnknownSessionError

KIND_STAIRCASE = "staircase"
KIND_SCREENING = "screening"
KINDS = (KIND_STAIRCASE, KIND_SCREENING)

_SNAPSHOT_EVERY = 10


class ServiceError(Exception):
    """Service failure with a wire-level error code and HTTP status."""

    def __init__(self, code: str, message: str, http_status: int = 400):
        self.code = code
        self.http_status = http_status
        super().__init__(message)

    @property
    def message(self) -> str:
        return str(self)


def _unknown_session(session_id: str) -> ServiceError:
    return ServiceError("unknown_session", f"no session {session_id!r}", 404)


class _LiveSession:
    def __init__(self, machine):
        self.machine = machine
        self.lock = threading.Lock()
        self.events_since_snapshot = 0


class SessionService:
    """Thread-safe session manager over a stimulus manifest and data root."""

    def __init__(
        self,
        manifest_path: str | Path,
        data_root: str | Path,
        gate_on_fail: bool = False,
    ):
        manifest_path = Path(manifest_path)
        if not manifest_path.is_file():
            raise ServiceError(
                "missing_stimulus_set",
                f"stimulus manifest not found: {manifest_path}",
                500,
            )
        self.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        self.stimulus_root = manifest_path.parent
        self.gate_on_fail = gate_on_fail
        self.store = SessionStore(Path(data_root) / "sessions")
        self._registry_lock = threading.Lock()
        self._sessions: dict[str, _LiveSession] = {}
        self._sources: dict[str, AudioBuffer] = {}
        self._source_files = {
            entry["source_id"]: self.stimulus_root / entry["file"]
            for entry in self.manifest.get("sources", [])
        }
        if not self._source_files:
            raise ServiceError(
                "missing_stimulus_set", "manifest lists no sources", 500
            )
        # token -> (session_id, spec fields); rebuilt from disk on startup.
        self._tokens: dict[str, dict] = {}
        for session_id in self.store.list_ids():
            for record in self.store.load_tokens(session_id):
                self._tokens[record["token"]] = record

    # -- configuration ----------------------------------------------------

    @property
    def source_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._source_files))

    def _build_config(self, kind: str, overrides: dict):
        overrides = dict(overrides or {})
        overrides.setdefault("order_seed", secrets.randbits(64))
        overrides["source_ids"] = self.source_ids
        if kind == KIND_STAIRCASE:
            cls = StaircaseConfig
        elif kind == KIND_SCREENING:
            cls = ScreeningConfig
        else:
            raise ServiceError("unknown_kind", f"unknown session kind {kind!r}", 400)
        allowed = set(cls.__dataclass_fields__)
        unknown = set(overrides) - allowed
        if unknown:
            raise ServiceError(
                "invalid_config", f"unknown config fields: {sorted(unknown)}", 400
            )
        try:
            for key in ("dynamic_bounds_db", "source_ids"):
                if key in overrides:
                    overrides[key] = tuple(overrides[key])
            config = cls(**overrides)
            config.validate()
        except (ConfigError, TypeError, ValueError) as exc:
            raise ServiceError("invalid_config", str(exc), 400) from exc
        return config

    @staticmethod
    def _machine_for(kind: str, config):
        return Staircase(config) if kind == KIND_STAIRCASE else Screening(config)

    # -- session lifecycle -------------------------------------------------

    def create_session(self, kind: str, config_overrides: dict | None = None) -> dict:
        if kind not in KINDS:
            raise ServiceError("unknown_kind", f"unknown session kind {kind!r}", 400)
        config = self._build_config(kind, config_overrides or {})
        session_id = secrets.token_urlsafe(24)
        envelope = {
            "session_id": session_id,
            "kind": kind,
            "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "config": config.to_dict(),
            "expired": False,
            "gate_on_fail": self.gate_on_fail,
        }
        self.store.create(session_id, envelope)
        machine = self._machine_for(kind, config)
        with self._registry_lock:
            self._sessions[session_id] = _LiveSession(machine)
        payload = {
            "session_id": session_id,
            "kind": kind,
            "total_trials": config.n_questions if kind == KIND_SCREENING else None,
            "max_trials": config.n_questions
            if kind == KIND_SCREENING
            else config.max_trials,
        }
        return payload

    def _replay(self, envelope: dict) -> object:
        kind = envelope["kind"]
        answers = [
            event["answer"]
            for event in self.store.load_events(envelope["session_id"])
            if event.get("type") == "answer"
        ]
        if kind == KIND_STAIRCASE:
            return Staircase.replay(StaircaseConfig.from_dict(envelope["config"]), answers)
        return Screening.replay(ScreeningConfig.from_dict(envelope["config"]), answers)

    def _live(self, session_id: str, allow_expired: bool = False) -> _LiveSession:
        with self._registry_lock:
            live = self._sessions.get(session_id)
        if live is None:
            try:
                envelope = self.store.load_envelope(session_id)
            except UnknownSessionError:
                raise _unknown_session(session_id) from None
            machine = self._replay(envelope)
            with self._registry_lock:
                live = self._sessions.setdefault(session_id, _LiveSession(machine))
        if not allow_expired and self._envelope(session_id).get("expired"):
            raise ServiceError(
                "session_expired", f"session {session_id!r} has expired", 410
            )
        return live

    def _envelope(self, session_id: str) -> dict:
        try:
            return self.store.load_envelope(session_id)
        except UnknownSessionError:
            raise _unknown_session(session_id) from None

    def expire_session(self, session_id: str) -> None:
        """Administrative: deny all further access to a session's stimuli."""
        envelope = self._envelope(session_id)
        envelope["expired"] = True
        self.store.update_envelope(session_id, envelope)

    @staticmethod
    def _n_answered(machine) -> int:
        return len(machine.trials if isinstance(machine, Staircase) else machine.answers)

    # -- trial flow ----------------------------------------------------------

    def _token_for(self, session_id: str, trial_index: int, position: int) -> str:
        digest = hashlib.blake2b(
            f"{session_id}:{trial_index}:{position}".encode(), digest_size=16
        )
        return digest.hexdigest()

    def get_next_trial(self, session_id: str) -> dict:
        live = self._live(session_id)
        with live.lock:
            if live.machine.is_complete:
                raise ServiceError(
                    "session_complete", "session is complete; fetch the result", 409
                )
            spec = live.machine.current_trial()
            urls = {}
            for position, stimulus in ((1, spec.first), (2, spec.second)):
                token = self._token_for(session_id, spec.trial_index, position)
                if token not in self._tokens:
                    record = {
                        "token": token,
                        "session_id": session_id,
                        "trial_index": spec.trial_index,
                        "position": position,
                        "source_id": stimulus.source_id,
                        "snr_db": stimulus.snr_db,
                        "noise_seed": stimulus.noise_seed,
                    }
                    self.store.append_token(session_id, record)
                    with self._registry_lock:
                        self._tokens[token] = record
                urls[position] = f"/v1/stimuli/{token}"
            return {
                "trial_index": spec.trial_index,
                "stimulus_a_url": urls[1],
                "stimulus_b_url": urls[2],
                "allow_not_detectable": True,
            }

    def post_answer(self, session_id: str, trial_index: int, answer: str) -> dict:
        if answer not in ANSWERS:
            raise ServiceError(
                "invalid_answer", f"answer must be one of {ANSWERS}", 400
            )
        live = self._live(session_id)
        with live.lock:
            if live.machine.is_complete:
                raise ServiceError(
                    "session_complete", "session is complete; fetch the result", 409
                )
            expected = self._n_answered(live.machine) + 1
            if trial_index != expected:
                raise ServiceError(
                    "stale_trial",
                    f"expected answer for trial {expected}, got {trial_index}",
                    409,
                )
            # Durability contract: the event hits disk before the state
            # machine moves and before the caller sees an acknowledgement.
            self.store.append_event(
                session_id,
                {"type": "answer", "trial_index": trial_index, "answer": answer},
            )
            live.machine.submit_answer(answer)
            live.events_since_snapshot += 1
            if live.machine.is_complete or live.events_since_snapshot >= _SNAPSHOT_EVERY:
                self.store.write_snapshot(session_id, live.machine.to_dict())
                live.events_since_snapshot = 0
            return {
                "complete": live.machine.is_complete,
                "next_available": not live.machine.is_complete,
            }

    def get_result(self, session_id: str) -> dict:
        live = self._live(session_id)
        with live.lock:
            machine = live.machine
            if not machine.is_complete:
                raise ServiceError(
                    "session_not_complete",
                    f"session has {self._n_answered(machine)} answers; not complete",
                    409,
                )
            if isinstance(machine, Staircase):
                result = machine.threshold()
                return {
                    "kind": KIND_STAIRCASE,
                    "threshold_snr_db": result.threshold_snr_db,
                    "jnd_db": result.jnd_db,
                    "n_reversals_used": result.n_reversals_used,
                    "valid": result.valid,
                    "n_trials": len(machine.trials),
                }
            verdict = machine.final_verdict()
            envelope = self._envelope(session_id)
            return {
                "kind": KIND_SCREENING,
                "verdict": verdict,
                "n_correct": machine.n_correct,
                "n_questions": machine.config.n_questions,
                "acceptance_k": machine.config.acceptance_k,
                "proceed_to_rating": (not envelope.get("gate_on_fail", False))
                or verdict == "pass",
            }

    def audit(self, session_id: str) -> dict:
        """Full session document including reference positions; only
        available once the session can no longer be gamed."""
        live = self._live(session_id, allow_expired=True)
        with live.lock:
            if not live.machine.is_complete:
                raise ServiceError(
                    "session_not_complete", "audit available after completion", 409
                )
            serves: dict[str, int] = {}
            for entry in self.store.load_serves(session_id):
                serves[entry["token"]] = serves.get(entry["token"], 0) + 1
            return {
                "session": live.machine.to_dict(),
                "stimulus_serve_counts": serves,
            }

    # -- stimulus delivery ---------------------------------------------------

    def _source_buffer(self, source_id: str) -> AudioBuffer:
        with self._registry_lock:
            cached = self._sources.get(source_id)
        if cached is not None:
            return cached
        path = self._source_files.get(source_id)
        if path is None or not path.is_file():
            raise ServiceError(
                "missing_stimulus_set", f"source {source_id!r} not available", 500
            )
        buffer = load_wav(path)
        with self._registry_lock:
            self._sources[source_id] = buffer
        return buffer

    def open_stimulus(self, token: str) -> Path:
        """Resolve a token to its rendered file, rendering on first use.

        Identical tokens always yield identical bytes: rendering is a pure
        function of the recorded (source, snr, seed) recipe.
        """
        record = self._tokens.get(token)
        if record is None:
            raise ServiceError("unknown_stimulus", "unknown stimulus token", 404)
        session_id = record["session_id"]
        if self._envelope(session_id).get("expired"):
            raise ServiceError(
                "session_expired", "stimulus belongs to an expired session", 410
            )
        path = self.store.stimulus_path(session_id, token)
        if not path.is_file():
            spec = StimulusSpec(
                source_id=record["source_id"],
                snr_db=record["snr_db"],
                noise_seed=record["noise_seed"],
            )
            source = self._source_buffer(spec.source_id)
            save_wav(mix_at_snr(source, spec.snr_db, spec.noise_seed).buffer, path)
        self.store.append_serve(session_id, {"token": token})
        return path
