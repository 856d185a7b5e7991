"""Dziennik zdarzeń silnika."""

from __future__ import annotations

import enum
import logging
from datetime import datetime, timezone

from pydantic import BaseModel, Field


class EventStatus(str, enum.Enum):
    """Status zdarzenia silnika."""

    success = "success"
    warning = "warning"
    error = "error"


class EngineEvent(BaseModel):
    """Pojedynczy wpis dziennika."""

    created_at: datetime = Field(default_factory=lambda: datetime.now(tz=timezone.utc))
    component: str
    event_type: str
    status: EventStatus
    detail: str | None = None


_LEVELS = {
    EventStatus.success: logging.INFO,
    EventStatus.warning: logging.WARNING,
    EventStatus.error: logging.ERROR,
}


class EngineLogger:
    """Przekazuje zdarzenia do loggera standardowego i przechowuje je w dzienniku."""

    def __init__(self, name: str = "photoba") -> None:
        self._logger = logging.getLogger(name)
        self._events: list[EngineEvent] = []

    @property
    def events(self) -> list[EngineEvent]:
        return list(self._events)

    def log(
        self,
        *,
        component: str,
        event_type: str,
        status: EventStatus,
        detail: str | None = None,
    ) -> None:
        """Dodaje wpis dziennika, przy zachowaniu odporności na błędy."""
        try:
            entry = EngineEvent(component=component, event_type=event_type, status=status, detail=detail)
            self._events.append(entry)
            self._logger.log(_LEVELS[status], "%s.%s %s", component, event_type, detail or "")
        except Exception:
            # Dziennik nie może przerwać obliczeń.
            pass

    def debug(self, *, component: str, event_type: str, detail: str) -> None:
        """Wpis diagnostyczny: tylko logger standardowy, bez dziennika."""
        self._logger.debug("%s.%s %s", component, event_type, detail)

    def dump(self) -> list[dict]:
        """Zwraca dziennik w postaci gotowej do zapisu jako JSON."""
        return [event.model_dump(mode="json") for event in self._events]
