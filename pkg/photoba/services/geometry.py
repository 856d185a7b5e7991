"""Model kamery otworkowej, przekształcenia sztywne, rzutowanie i próbkowanie dwuliniowe.

Typy danych są niemutowalne (tablice numpy tylko do odczytu). Operacje na
pojedynczych pikselach i na całych obrazach korzystają z tych samych jąder
torch, z których buduje się funkcja celu, więc równania warpowania istnieją
w jednym miejscu.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import torch
from scipy.spatial.transform import Rotation

from photoba.core.errors import InvalidInputError

Z_MIN = 1e-3
DTYPE = torch.float64


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


# region types -------------------------------------------------------------------


@dataclass(frozen=True)
class Intrinsics:
    """Parametry wewnętrzne kamery (macierz K)."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        values = (self.fx, self.fy, self.cx, self.cy)
        if not all(math.isfinite(value) for value in values):
            raise InvalidInputError("Parametry kamery muszą być skończone.")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("Ogniskowe fx i fy muszą być dodatnie.")

    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def scaled(self, level: int) -> "Intrinsics":
        """Intrinsics of pyramid level `level` (0 = full resolution), pixel-centre convention."""
        factor = float(2**level)
        return Intrinsics(
            fx=self.fx / factor,
            fy=self.fy / factor,
            cx=(self.cx + 0.5) / factor - 0.5,
            cy=(self.cy + 0.5) / factor - 0.5,
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.fx, self.fy, self.cx, self.cy)


@dataclass(frozen=True, eq=False)
class RigidPose:
    """Przekształcenie SE(3): obrót jako wektor osi-kąta i translacja."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(rotation)) and np.all(np.isfinite(translation))):
            raise InvalidInputError("Poza musi mieć skończone składowe.")
        if np.linalg.norm(rotation) > math.pi:
            # Kąt sprowadzany do [0, pi].
            rotation = Rotation.from_rotvec(rotation).as_rotvec()
        object.__setattr__(self, "rotation", _frozen(rotation))
        object.__setattr__(self, "translation", _frozen(translation))

    @classmethod
    def identity(cls) -> "RigidPose":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, vector: Sequence[float] | np.ndarray) -> "RigidPose":
        """Rotation first, translation second."""
        values = np.asarray(vector, dtype=np.float64).reshape(6)
        return cls(values[:3], values[3:])

    @classmethod
    def from_matrix(cls, rotation_matrix: np.ndarray, translation: np.ndarray) -> "RigidPose":
        rotvec = Rotation.from_matrix(np.array(rotation_matrix, dtype=np.float64)).as_rotvec()
        return cls(rotvec, translation)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.rotation, self.translation])

    def as_rotation(self) -> Rotation:
        # scipy nie przyjmuje buforów tylko do odczytu.
        return Rotation.from_rotvec(np.array(self.rotation))

    def rotation_matrix(self) -> np.ndarray:
        return self.as_rotation().as_matrix()

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation_matrix()
        out[:3, 3] = self.translation
        return out

    def angle(self) -> float:
        return float(np.linalg.norm(self.rotation))

    def inverse(self) -> "RigidPose":
        rot_t = self.rotation_matrix().T
        return RigidPose(-self.rotation, -rot_t @ self.translation)

    def compose(self, other: "RigidPose") -> "RigidPose":
        """Najpierw self, potem other."""
        rot_self = self.rotation_matrix()
        rot_other = other.rotation_matrix()
        return RigidPose.from_matrix(rot_other @ rot_self, rot_other @ self.translation + other.translation)

    def __repr__(self) -> str:
        return f"RigidPose(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


@dataclass(frozen=True)
class PixelCoord:
    u: float
    v: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise InvalidInputError("Współrzędne piksela muszą być skończone.")


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Raster (H, W, C) o wartościach w [0, 1]."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise InvalidInputError(f"Obraz musi mieć kształt (H, W, 1|3), otrzymano {data.shape}.")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInputError("Obraz nie może być pusty.")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("Obraz zawiera wartości nieskończone.")
        if data.min() < 0.0 or data.max() > 1.0:
            raise InvalidInputError("Wartości obrazu muszą leżeć w [0, 1].")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def gray(self) -> np.ndarray:
        return self.data.mean(axis=2)

    def to_tensor(self) -> torch.Tensor:
        """Tensor (C, H, W)."""
        return torch.from_numpy(np.array(self.data.transpose(2, 0, 1))).to(DTYPE)


@dataclass(frozen=True, eq=False)
class ValidityMask:
    flags: np.ndarray

    def __post_init__(self) -> None:
        flags = np.asarray(self.flags, dtype=bool)
        if flags.ndim != 2:
            raise InvalidInputError("Maska musi być dwuwymiarowa.")
        object.__setattr__(self, "flags", _frozen(flags))

    @property
    def height(self) -> int:
        return int(self.flags.shape[0])

    @property
    def width(self) -> int:
        return int(self.flags.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def count(self) -> int:
        return int(self.flags.sum())


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Głębokość per piksel z flagami poprawności."""

    data: np.ndarray
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidInputError("Mapa głębi musi być dwuwymiarowa.")
        if self.valid is None:
            valid = np.isfinite(data) & (data > 0)
        else:
            valid = np.asarray(self.valid, dtype=bool)
            if valid.shape != data.shape:
                raise InvalidInputError("Rozmiar flag nie zgadza się z mapą głębi.")
            picked = data[valid]
            if picked.size and not (np.all(np.isfinite(picked)) and np.all(picked > 0)):
                raise InvalidInputError("Poprawne głębokości muszą być dodatnie i skończone.")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "valid", _frozen(valid))

    @classmethod
    def from_disparity(cls, disparity: np.ndarray, valid: np.ndarray | None = None) -> "DepthMap":
        disparity = np.asarray(disparity, dtype=np.float64)
        mask = np.isfinite(disparity) & (disparity > 0)
        if valid is not None:
            mask &= np.asarray(valid, dtype=bool)
        depth = np.where(mask, 1.0 / np.where(mask, disparity, 1.0), 0.0)
        return cls(depth, mask)

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def disparity(self) -> np.ndarray:
        """Odwrotność głębokości; zero poza poprawnymi pikselami."""
        return np.where(self.valid, 1.0 / np.where(self.valid, self.data, 1.0), 0.0)

    def masked(self) -> np.ndarray:
        """Głębokości z NaN w niepoprawnych pikselach."""
        return np.where(self.valid, self.data, np.nan)

    def scaled(self, factor: float) -> "DepthMap":
        return DepthMap(np.where(self.valid, self.data * factor, 0.0), self.valid)


@dataclass(frozen=True, eq=False)
class Snippet:
    """Uporządkowana sekwencja N klatek o wspólnej kamerze."""

    frames: tuple[ImageGrid, ...]
    intrinsics: Intrinsics
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise InvalidInputError("Sekwencja musi mieć co najmniej dwie klatki.")
        first = frames[0]
        for frame in frames[1:]:
            if frame.shape != first.shape or frame.channels != first.channels:
                raise InvalidInputError("Wszystkie klatki muszą mieć ten sam rozmiar i liczbę kanałów.")
        object.__setattr__(self, "frames", frames)

    @property
    def size(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    @property
    def channels(self) -> int:
        return self.frames[0].channels

    def reversed(self) -> "Snippet":
        """Sekwencja wsteczna (odwrócona kolejność klatek)."""
        return Snippet(tuple(reversed(self.frames)), self.intrinsics, dict(self.metadata))

    def to_tensor(self) -> torch.Tensor:
        """Tensor (N, C, H, W)."""
        return torch.stack([frame.to_tensor() for frame in self.frames])


def reverse_poses(poses: Sequence[RigidPose]) -> list[RigidPose]:
    """Pozy kolejnych par dla sekwencji odwróconej."""
    return [pose.inverse() for pose in reversed(poses)]


def ensure_same_shape(first: Any, second: Any, what: str = "Rozmiary") -> None:
    if first.shape != second.shape:
        raise InvalidInputError(f"{what} nie są zgodne: {first.shape} != {second.shape}.")


# endregion -----------------------------------------------------------------------


# region torch kernels ------------------------------------------------------------


def skew(vectors: torch.Tensor) -> torch.Tensor:
    """Macierze antysymetryczne (B, 3, 3) dla wektorów (B, 3)."""
    zeros = torch.zeros_like(vectors[..., 0])
    x, y, z = vectors.unbind(-1)
    rows = [
        torch.stack([zeros, -z, y], dim=-1),
        torch.stack([z, zeros, -x], dim=-1),
        torch.stack([-y, x, zeros], dim=-1),
    ]
    return torch.stack(rows, dim=-2)


def rodrigues(rotvec: torch.Tensor) -> torch.Tensor:
    """Axis-angle (B, 3) -> rotation matrices (B, 3, 3); differentiable at zero rotation."""
    theta2 = (rotvec * rotvec).sum(-1)
    small = theta2 < 1e-6
    safe_theta2 = torch.where(small, torch.ones_like(theta2), theta2)
    theta = torch.sqrt(safe_theta2)
    coef_a = torch.where(small, 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0, torch.sin(theta) / theta)
    coef_b = torch.where(
        small,
        0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        (1.0 - torch.cos(theta)) / safe_theta2,
    )
    k = skew(rotvec)
    eye = torch.eye(3, dtype=rotvec.dtype).expand_as(k)
    return eye + coef_a[..., None, None] * k + coef_b[..., None, None] * (k @ k)


def pose_matrices(pose_params: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(B, 6) -> (R (B, 3, 3), t (B, 3))."""
    return rodrigues(pose_params[:, :3]), pose_params[:, 3:]


def invert_poses(rotations: torch.Tensor, translations: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    rot_t = rotations.transpose(-1, -2)
    return rot_t, -(rot_t @ translations[..., None])[..., 0]


def chain_poses(
    rotations: torch.Tensor,
    translations: torch.Tensor,
    pairs: Sequence[tuple[int, int]],
) -> tuple[torch.Tensor, torch.Tensor]:
    """Złożenia T_{i->j} = T_{j-1->j} o ... o T_{i->i+1} dla par (i, j), i < j."""
    out_rot: list[torch.Tensor] = []
    out_trans: list[torch.Tensor] = []
    for start, end in pairs:
        rot = rotations[start]
        trans = translations[start]
        for k in range(start + 1, end):
            trans = rotations[k] @ trans + translations[k]
            rot = rotations[k] @ rot
        out_rot.append(rot)
        out_trans.append(trans)
    return torch.stack(out_rot), torch.stack(out_trans)


def pixel_grid(height: int, width: int) -> tuple[torch.Tensor, torch.Tensor]:
    v, u = torch.meshgrid(
        torch.arange(height, dtype=DTYPE),
        torch.arange(width, dtype=DTYPE),
        indexing="ij",
    )
    return u, v


def backproject_grid(
    depth: torch.Tensor,
    u: torch.Tensor,
    v: torch.Tensor,
    intrinsics: tuple[float, float, float, float],
) -> torch.Tensor:
    """D(p) K^-1 p dla każdego piksela; wynik (..., 3)."""
    fx, fy, cx, cy = intrinsics
    return torch.stack([depth * (u - cx) / fx, depth * (v - cy) / fy, depth], dim=-1)


def warp_coordinates(
    depth: torch.Tensor,
    intrinsics: tuple[float, float, float, float],
    rotations: torch.Tensor,
    translations: torch.Tensor,
    *,
    u: torch.Tensor | None = None,
    v: torch.Tensor | None = None,
    z_min: float = Z_MIN,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """p_hat ~ K T D(p) K^-1 p for depth (B, H, W).

    Returns target coordinates (u', v'), transformed depth z and the flag z > z_min.
    The displacement is formed as (Y_x - r_x z) / z so the identity pose maps every
    pixel onto itself bit-exactly.
    """
    if u is None or v is None:
        u, v = pixel_grid(depth.shape[-2], depth.shape[-1])
    fx, fy, cx, cy = intrinsics
    ray_x = (u - cx) / fx
    ray_y = (v - cy) / fy
    rays = torch.stack([ray_x, ray_y, torch.ones_like(ray_x)], dim=-1)
    points = depth[..., None] * rays
    moved = torch.einsum("bij,bhwj->bhwi", rotations, points) + translations[:, None, None, :]
    z = moved[..., 2]
    in_front = z > z_min
    safe_z = torch.where(in_front, z, torch.ones_like(z))
    target_u = u + fx * (moved[..., 0] - ray_x * z) / safe_z
    target_v = v + fy * (moved[..., 1] - ray_y * z) / safe_z
    return target_u, target_v, z, in_front


def gather_cells(u: torch.Tensor, v: torch.Tensor, height: int, width: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Lower corner (ceil(x) - 1) of the interpolation cell, clamped to the image."""
    x0 = torch.clamp(torch.ceil(u.detach()) - 1, 0, max(width - 2, 0))
    y0 = torch.clamp(torch.ceil(v.detach()) - 1, 0, max(height - 2, 0))
    return x0, y0


def bilinear_gather(
    values: torch.Tensor,
    u: torch.Tensor,
    v: torch.Tensor,
    corner_valid: torch.Tensor | None = None,
    *,
    cells: tuple[torch.Tensor, torch.Tensor] | None = None,
    fill_invalid: bool = True,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Bilinear sampling of values (B, C, H, W) at (B, H', W') coordinates.

    The lower-left corner is ceil(x) - 1 clamped to the image, so integer coordinates
    reproduce pixel values exactly and cell boundaries take the derivative from below.
    A sample is valid when it lies in [0, W-1] x [0, H-1] and, if `corner_valid`
    (B, H, W) is given, every corner with non-zero weight is valid. Invalid samples are 0
    unless `fill_invalid` is off; then they hold the interpolation extended from the
    chosen cell. `cells` replaces the computed lower corners.
    """
    batch, channels, height, width = values.shape
    x0, y0 = gather_cells(u, v, height, width) if cells is None else cells
    x1 = torch.clamp(x0 + 1, max=width - 1)
    y1 = torch.clamp(y0 + 1, max=height - 1)
    wx = u - x0
    wy = v - y0
    valid = (u >= 0) & (u <= width - 1) & (v >= 0) & (v <= height - 1)

    flat = values.reshape(batch, channels, height * width)
    corners = (
        (y0, x0, (1 - wx) * (1 - wy)),
        (y0, x1, wx * (1 - wy)),
        (y1, x0, (1 - wx) * wy),
        (y1, x1, wx * wy),
    )
    out = torch.zeros((batch, channels) + u.shape[1:], dtype=values.dtype)
    for cy, cx, weight in corners:
        index = (cy * width + cx).long().reshape(batch, 1, -1).expand(batch, channels, -1)
        sampled = torch.gather(flat, 2, index).reshape(out.shape)
        out = out + weight[:, None] * sampled
        if corner_valid is not None:
            flags = torch.gather(corner_valid.reshape(batch, -1), 1, index[:, 0]).reshape(u.shape)
            valid = valid & (flags | (weight.detach() == 0))
    if fill_invalid:
        out = torch.where(valid[:, None], out, torch.zeros_like(out))
    return out, valid


# endregion -----------------------------------------------------------------------


# region reference operations -----------------------------------------------------


def _check_depth(depth: float) -> None:
    if not math.isfinite(depth) or depth <= 0:
        raise InvalidInputError(f"Głębokość musi być dodatnia i skończona, otrzymano {depth}.")


def _pose_tensors(pose: RigidPose) -> tuple[torch.Tensor, torch.Tensor]:
    params = torch.from_numpy(pose.as_vector()).to(DTYPE)[None]
    return pose_matrices(params)


def backproject(p: PixelCoord, depth: float, intrinsics: Intrinsics) -> np.ndarray:
    """Punkt 3D X taki, że rzut X daje p."""
    _check_depth(depth)
    point = backproject_grid(
        torch.tensor(depth, dtype=DTYPE),
        torch.tensor(p.u, dtype=DTYPE),
        torch.tensor(p.v, dtype=DTYPE),
        intrinsics.as_tuple(),
    )
    return point.numpy()


def project_pinhole(point: np.ndarray, intrinsics: Intrinsics) -> PixelCoord:
    x, y, z = np.asarray(point, dtype=np.float64)
    if z <= Z_MIN:
        raise InvalidInputError("Punkt leży za kamerą.")
    return PixelCoord(intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy)


def transform_point(point: np.ndarray, pose: RigidPose) -> np.ndarray:
    """R X + t."""
    return pose.rotation_matrix() @ np.asarray(point, dtype=np.float64) + pose.translation


def project_warp(p: PixelCoord, depth: float, intrinsics: Intrinsics, pose: RigidPose) -> tuple[PixelCoord, bool]:
    """Rzut piksela p o głębi depth do kamery po przekształceniu pose.

    Punkt za kamerą (z <= Z_MIN) zwraca flagę False zamiast wyjątku.
    """
    _check_depth(depth)
    rotations, translations = _pose_tensors(pose)
    target_u, target_v, _, in_front = warp_coordinates(
        torch.full((1, 1, 1), depth, dtype=DTYPE),
        intrinsics.as_tuple(),
        rotations,
        translations,
        u=torch.full((1, 1), p.u, dtype=DTYPE),
        v=torch.full((1, 1), p.v, dtype=DTYPE),
    )
    return PixelCoord(float(target_u), float(target_v)), bool(in_front)


def bilinear_sample(image: ImageGrid, p: PixelCoord) -> tuple[float | np.ndarray, bool]:
    """Wartość obrazu w punkcie ciągłym; poza obrazem (0, False)."""
    values, valid = bilinear_gather(
        image.to_tensor()[None],
        torch.full((1, 1, 1), p.u, dtype=DTYPE),
        torch.full((1, 1, 1), p.v, dtype=DTYPE),
    )
    sample = values[0, :, 0, 0].numpy()
    if image.channels == 1:
        return float(sample[0]), bool(valid)
    return sample, bool(valid)


def _depth_tensors(depth: DepthMap) -> tuple[torch.Tensor, torch.Tensor]:
    valid = torch.from_numpy(np.array(depth.valid))
    values = torch.from_numpy(np.where(depth.valid, depth.data, 1.0)).to(DTYPE)
    return values, valid


def synthesize_view(
    target: ImageGrid,
    depth: DepthMap,
    intrinsics: Intrinsics,
    pose: RigidPose,
) -> tuple[ImageGrid, ValidityMask]:
    """Rekonstruuje widok I_t z obrazu target przez warpowanie głębią depth i pozą pose."""
    ensure_same_shape(target, depth, "Rozmiary obrazu i mapy głębi")
    depth_values, depth_valid = _depth_tensors(depth)
    rotations, translations = _pose_tensors(pose)
    with torch.no_grad():
        target_u, target_v, _, in_front = warp_coordinates(
            depth_values[None], intrinsics.as_tuple(), rotations, translations
        )
        sampled, inside = bilinear_gather(target.to_tensor()[None], target_u, target_v)
    mask = (inside & in_front & depth_valid[None])[0]
    image = torch.where(mask[None], sampled[0], torch.zeros_like(sampled[0]))
    return ImageGrid(np.clip(image.numpy().transpose(1, 2, 0), 0.0, 1.0)), ValidityMask(mask.numpy())


def transform_depth(depth: DepthMap, intrinsics: Intrinsics, pose: RigidPose) -> DepthMap:
    """Współrzędna z punktów po przekształceniu sztywnym (D_{t->t+n})."""
    depth_values, depth_valid = _depth_tensors(depth)
    rotations, translations = _pose_tensors(pose)
    with torch.no_grad():
        _, _, z, in_front = warp_coordinates(depth_values[None], intrinsics.as_tuple(), rotations, translations)
    valid = (in_front[0] & depth_valid).numpy()
    return DepthMap(np.where(valid, z[0].numpy(), 0.0), valid)


def sample_depth(depth: DepthMap, coords: np.ndarray, coords_valid: np.ndarray | None = None) -> DepthMap:
    """Interpolacja dwuliniowa głębi w punktach coords (H', W', 2) = (u, v)."""
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 3 or coords.shape[2] != 2:
        raise InvalidInputError("Współrzędne muszą mieć kształt (H, W, 2).")
    depth_values, depth_valid = _depth_tensors(depth)
    with torch.no_grad():
        sampled, valid = bilinear_gather(
            depth_values[None, None],
            torch.from_numpy(coords[None, ..., 0]),
            torch.from_numpy(coords[None, ..., 1]),
            corner_valid=depth_valid[None],
        )
    flags = valid[0].numpy()
    if coords_valid is not None:
        flags = flags & np.asarray(coords_valid, dtype=bool)
    return DepthMap(np.where(flags, sampled[0, 0].numpy(), 0.0), flags)


def warp_grid(depth: DepthMap, intrinsics: Intrinsics, pose: RigidPose) -> tuple[np.ndarray, np.ndarray]:
    """Współrzędne docelowe (H, W, 2) i flagi poprawności dla całej mapy głębi."""
    depth_values, depth_valid = _depth_tensors(depth)
    rotations, translations = _pose_tensors(pose)
    with torch.no_grad():
        target_u, target_v, _, in_front = warp_coordinates(
            depth_values[None], intrinsics.as_tuple(), rotations, translations
        )
    coords = torch.stack([target_u[0], target_v[0]], dim=-1).numpy()
    return coords, (in_front[0] & depth_valid).numpy()


def compose_poses(chain: Sequence[RigidPose]) -> RigidPose:
    """Składa pozy od lewej do prawej: pierwsza w łańcuchu działa pierwsza."""
    if not chain:
        raise InvalidInputError("Łańcuch póz nie może być pusty.")
    result = chain[0]
    for pose in chain[1:]:
        result = result.compose(pose)
    return result


# endregion -----------------------------------------------------------------------
