"""Session service: remote staircase/screening sessions over HTTP+JSON.

State is event-sourced: every acknowledged answer is fsynced to an
append-only per-session log before the in-memory machine moves, so a
crash never loses acknowledged work and a restart replays to the exact
pre-crash state.
"""

from .core import ServiceError, SessionService
from .store import SessionStore

__all__ = ["ServiceError", "SessionService", "SessionStore"]
