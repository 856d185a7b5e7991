from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from photoba.api.routes import evaluation, health, scenes, solve, upsampling
from photoba import __version__
from photoba.core.config import get_settings


def create_app() -> FastAPI:
    """Buduje instancję FastAPI."""
    settings = get_settings()
    settings.apply_thread_limit()
    app = FastAPI(
        title=settings.app_name,
        version=__version__,
        openapi_url="/openapi.json",
        docs_url="/docs",
        redoc_url="/redoc",
    )

    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.api_cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    app.include_router(health.router)
    app.include_router(scenes.router)
    app.include_router(evaluation.router)
    app.include_router(upsampling.router)
    app.include_router(solve.router)

    return app


app = create_app()
