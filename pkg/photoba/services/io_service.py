"""Formaty plików: PGM/PPM, PFM, parametry kamery, pozy i konfiguracja `klucz = wartość`."""

from __future__ import annotations

import json
import logging
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from photoba.core.errors import FileFormatError, InvalidInputError, UsageError
from photoba.schemas.config import RunConfig
from photoba.services.geometry import DepthMap, ImageGrid, Intrinsics, RigidPose, ValidityMask
from photoba.services.logging_service import EngineLogger, EventStatus

logger = logging.getLogger(__name__)

_WHITESPACE = b" \t\r\n\v\f"


# region binary raster helpers ----------------------------------------------------


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Zwraca (token, początek tokenu, pozycja za tokenem); pomija białe znaki i komentarze."""
    size = len(data)
    while pos < size:
        if data[pos : pos + 1] == b"#":
            while pos < size and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif data[pos] in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < size and data[pos] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FileFormatError("Niekompletny nagłówek", offset=start)
    return data[start:pos], start, pos


def _int_token(data: bytes, pos: int, what: str) -> tuple[int, int]:
    token, start, end = _next_token(data, pos)
    try:
        return int(token.decode("ascii")), end
    except (UnicodeDecodeError, ValueError):
        raise FileFormatError(f"Niepoprawna wartość pola {what}: {token!r}", offset=start) from None


def _payload_start(data: bytes, pos: int) -> int:
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FileFormatError("Brak separatora przed danymi", offset=pos)
    return pos + 1


def _read_bytes(path: str | Path) -> bytes:
    return Path(path).read_bytes()


# endregion -----------------------------------------------------------------------


def decode_netpbm(data: bytes) -> ImageGrid:
    magic, _, pos = _next_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise FileFormatError(f"Nieobsługiwany format {magic!r}, oczekiwano P5 lub P6", offset=0)
    channels = 1 if magic == b"P5" else 3
    width, pos = _int_token(data, pos, "szerokość")
    height, pos = _int_token(data, pos, "wysokość")
    _, maxval_offset, _ = _next_token(data, pos)
    maxval, pos = _int_token(data, pos, "maxval")
    if width <= 0 or height <= 0:
        raise FileFormatError("Wymiary obrazu muszą być dodatnie", offset=maxval_offset)
    if not 0 < maxval <= 65535:
        raise FileFormatError(f"Nieobsługiwana wartość maxval {maxval}", offset=maxval_offset)
    pos = _payload_start(data, pos)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    needed = count * dtype.itemsize
    if len(data) - pos < needed:
        raise FileFormatError(f"Ucięte dane obrazu: brakuje {needed - (len(data) - pos)} bajtów", offset=len(data))
    values = np.frombuffer(data, dtype=dtype, count=count, offset=pos).astype(np.float64)
    if values.max(initial=0) > maxval:
        position = int(np.argmax(values > maxval))
        raise FileFormatError(f"Wartość piksela większa niż maxval {maxval}", offset=pos + position * dtype.itemsize)
    return ImageGrid((values / maxval).reshape(height, width, channels))


def load_image(path: str | Path) -> ImageGrid:
    """Binary PGM (P5) or PPM (P6), 8 or 16 bit, normalised to [0, 1]."""
    return decode_netpbm(_read_bytes(path))


def encode_netpbm(image: ImageGrid, bits: int = 8) -> bytes:
    if bits not in (8, 16):
        raise InvalidInputError("Obsługiwana głębia bitowa to 8 lub 16.")
    maxval = 255 if bits == 8 else 65535
    magic = "P5" if image.channels == 1 else "P6"
    header = f"{magic}\n{image.width} {image.height}\n{maxval}\n".encode("ascii")
    values = np.rint(image.data * maxval)
    dtype = np.dtype("u1") if bits == 8 else np.dtype(">u2")
    return header + values.astype(dtype).tobytes()


def save_image(path: str | Path, image: ImageGrid, bits: int = 8) -> Path:
    target = Path(path)
    target.write_bytes(encode_netpbm(image, bits))
    return target


def save_mask(path: str | Path, mask: ValidityMask) -> Path:
    return save_image(path, ImageGrid(mask.flags.astype(np.float64)))


def decode_pfm(data: bytes, events: EngineLogger | None = None) -> DepthMap:
    magic, _, pos = _next_token(data, 0)
    if magic != b"Pf":
        raise FileFormatError(f"Nieobsługiwany format {magic!r}, oczekiwano Pf", offset=0)
    width, pos = _int_token(data, pos, "szerokość")
    height, pos = _int_token(data, pos, "wysokość")
    scale_token, scale_offset, pos = _next_token(data, pos)
    try:
        scale = float(scale_token.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise FileFormatError(f"Niepoprawna skala {scale_token!r}", offset=scale_offset) from None
    if scale >= 0:
        raise FileFormatError("Obsługiwany jest tylko zapis little-endian (ujemna skala)", offset=scale_offset)
    if width <= 0 or height <= 0:
        raise FileFormatError("Wymiary mapy muszą być dodatnie", offset=scale_offset)
    pos = _payload_start(data, pos)
    needed = width * height * 4
    if len(data) - pos < needed:
        raise FileFormatError(f"Ucięte dane PFM: brakuje {needed - (len(data) - pos)} bajtów", offset=len(data))
    values = np.frombuffer(data, dtype="<f4", count=width * height, offset=pos).reshape(height, width)
    # Wiersze PFM zapisane są od dołu do góry.
    values = values[::-1].astype(np.float64)
    finite = np.isfinite(values)
    suspicious = int((~np.isnan(values) & ~(finite & (values > 0))).sum())
    if suspicious and events is not None:
        events.log(
            component="io",
            event_type="invalid_depth",
            status=EventStatus.warning,
            detail=f"{suspicious} pixels with non-positive or infinite depth marked invalid",
        )
    valid = finite & (values > 0)
    return DepthMap(np.where(valid, values, 0.0), valid)


def load_depth(path: str | Path, events: EngineLogger | None = None) -> DepthMap:
    return decode_pfm(_read_bytes(path), events)


def encode_pfm(depth: DepthMap) -> bytes:
    header = f"Pf\n{depth.width} {depth.height}\n-1.0\n".encode("ascii")
    values = depth.masked().astype("<f4")[::-1]
    return header + np.ascontiguousarray(values).tobytes()


def save_depth(path: str | Path, depth: DepthMap) -> Path:
    """PFM z NaN w niepoprawnych pikselach."""
    target = Path(path)
    target.write_bytes(encode_pfm(depth))
    return target


def parse_intrinsics(text: str) -> Intrinsics:
    tokens = [token for line in text.splitlines() for token in line.split("#", 1)[0].split()]
    if len(tokens) != 4:
        raise FileFormatError(f"Plik parametrów kamery wymaga 4 liczb (fx fy cx cy), otrzymano {len(tokens)}")
    try:
        fx, fy, cx, cy = (float(token) for token in tokens)
    except ValueError:
        raise FileFormatError(f"Niepoprawne liczby w parametrach kamery: {' '.join(tokens)}") from None
    return Intrinsics(fx, fy, cx, cy)


def load_intrinsics(path: str | Path) -> Intrinsics:
    return parse_intrinsics(Path(path).read_text(encoding="utf-8"))


def save_intrinsics(path: str | Path, intrinsics: Intrinsics) -> Path:
    target = Path(path)
    target.write_text(" ".join(repr(float(value)) for value in intrinsics.as_tuple()) + "\n", encoding="utf-8")
    return target


def _pose_line(pose: RigidPose) -> str:
    return " ".join(repr(float(value)) for value in pose.as_vector())


def save_poses(path: str | Path, consecutive: Sequence[RigidPose], absolute: Sequence[RigidPose] = ()) -> Path:
    """Wektory (rx ry rz tx ty tz), najpierw pary kolejne, potem pozy względem klatki 0."""
    lines = ["# consecutive"]
    lines += [_pose_line(pose) for pose in consecutive]
    if absolute:
        lines.append("# absolute")
        lines += [_pose_line(pose) for pose in absolute]
    target = Path(path)
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target


def load_poses(path: str | Path) -> tuple[list[RigidPose], list[RigidPose]]:
    sections: dict[str, list[RigidPose]] = {"consecutive": [], "absolute": []}
    current = "consecutive"
    for number, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("#"):
            name = stripped.lstrip("#").strip()
            if name in sections:
                current = name
            continue
        if not stripped:
            continue
        try:
            values = [float(token) for token in stripped.split()]
        except ValueError:
            raise FileFormatError(f"Niepoprawna liczba w wierszu {number} pliku póz") from None
        if len(values) != 6:
            raise FileFormatError(f"Wiersz {number} pliku póz wymaga 6 liczb, otrzymano {len(values)}")
        sections[current].append(RigidPose.from_vector(values))
    return sections["consecutive"], sections["absolute"]


def parse_config_text(text: str) -> dict[str, str]:
    """Płaski format `klucz = wartość`; `#` rozpoczyna komentarz."""
    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        key, separator, value = content.partition("=")
        key = key.strip()
        if not separator or not key:
            raise FileFormatError(f"Wiersz {number} konfiguracji nie ma postaci `klucz = wartość`: {raw.strip()}")
        if key in values:
            raise FileFormatError(f"Klucz {key} powtórzony w wierszu {number}")
        values[key] = value.strip()
    return values


def load_config(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def build_run_config(file_values: Mapping[str, Any] | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Łączy wartości z pliku i z linii poleceń (te drugie mają pierwszeństwo)."""
    merged: dict[str, Any] = dict(file_values or {})
    merged.update({key: value for key, value in (overrides or {}).items() if value is not None})
    unknown = sorted(set(merged) - set(RunConfig.model_fields))
    if unknown:
        raise UsageError(f"Nieznane klucze konfiguracji: {', '.join(unknown)}")
    try:
        return RunConfig(**merged)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "config"
        raise InvalidInputError(f"Niepoprawna konfiguracja ({location}): {first['msg']}", detail=str(exc)) from exc


def write_json(path: str | Path, payload: BaseModel | Mapping[str, Any] | list[Any]) -> Path:
    target = Path(path)
    if isinstance(payload, BaseModel):
        target.write_text(payload.model_dump_json(indent=2) + "\n", encoding="utf-8")
    else:
        target.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return target
