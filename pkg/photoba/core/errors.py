"""Wyjątki silnika wraz z kodami wyjścia CLI."""

from __future__ import annotations

from collections.abc import Sequence


class EngineError(Exception):
    """Bazowy wyjątek silnika."""

    exit_code: int = 2

    def __init__(self, message: str, detail: str | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.detail = detail or message


class InvalidInputError(EngineError):
    """Dane wejściowe łamią warunki wstępne operacji."""

    exit_code = 1


class EmptyCostError(InvalidInputError):
    """Brak poprawnych pikseli, na których można policzyć wynik."""


class InvalidSceneError(InvalidInputError):
    """Scena syntetyczna lub jej zaburzenie jest niepoprawne."""


class UsageError(InvalidInputError):
    """Nieznana flaga, klucz konfiguracji albo brakujący argument."""


class NumericalError(EngineError):
    """Wartość nieskończona lub NaN w obliczeniach."""

    exit_code = 2

    def __init__(self, message: str, detail: str | None = None, trace: Sequence[float] | None = None) -> None:
        super().__init__(message, detail)
        self.trace = list(trace) if trace is not None else []


class FileFormatError(EngineError):
    """Plik wejściowy ma nieprawidłowy lub nieobsługiwany format."""

    exit_code = 3

    def __init__(self, message: str, offset: int | None = None) -> None:
        detail = message if offset is None else f"{message} (bajt {offset})"
        super().__init__(detail, detail)
        self.offset = offset
