from collections.abc import Iterator
from contextlib import contextmanager
from http import HTTPStatus

from fastapi import HTTPException

from photoba.core.config import Settings, get_settings
from photoba.core.errors import EngineError, InvalidInputError, NumericalError


def get_app_settings() -> Settings:
    """Dostarcza ustawienia aplikacji."""
    return get_settings()


def enforce_pixel_limit(width: int, height: int, settings: Settings) -> None:
    """Odrzuca żądania, których obraz przekracza limit pikseli."""
    if width * height > settings.max_api_pixels:
        raise HTTPException(
            status_code=HTTPStatus.REQUEST_ENTITY_TOO_LARGE,
            detail=f"Obraz {width}x{height} przekracza limit {settings.max_api_pixels} pikseli.",
        )


@contextmanager
def engine_errors() -> Iterator[None]:
    """Tłumaczy wyjątki silnika na odpowiedzi HTTP."""
    try:
        yield
    except InvalidInputError as exc:
        raise HTTPException(status_code=HTTPStatus.UNPROCESSABLE_ENTITY, detail=exc.message) from exc
    except NumericalError as exc:
        raise HTTPException(status_code=HTTPStatus.INTERNAL_SERVER_ERROR, detail=exc.message) from exc
    except EngineError as exc:
        raise HTTPException(status_code=HTTPStatus.INTERNAL_SERVER_ERROR, detail=exc.message) from exc
