"""Pinhole camera model: orbit extrinsics, fixed-focal intrinsics, projection.

World frame: z up, y is the object's frontal axis, x completes a right-handed
basis. The camera always faces the object at the world origin; its optical
axis z' points from the origin out to the camera position, so visible points
have negative camera-space z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attributes import AttributeVector


class DegenerateCameraError(ValueError):
    """Camera position coincides with the object center."""


class BehindCameraError(ValueError):
    """Point has non-positive depth after the camera transform."""


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_length: float = 1.0  # world units
    resolution_scale: float = 64.0  # pixels per unit at unit depth
    image_width: int = 64
    image_height: int = 64

    def __post_init__(self):
        if self.focal_length <= 0 or self.resolution_scale <= 0:
            raise ValueError("focal length and resolution scale must be > 0")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be >= 1")

    @property
    def gamma_f(self) -> float:
        return self.resolution_scale * self.focal_length


@dataclass(frozen=True)
class PlacementMapping:
    """Maps the normalized 0-100 height/distance attributes to world units.

    ``distance_offset`` keeps the orbit radius strictly positive even when
    the distance attribute is 0, so the camera never lands on the object
    center or exactly on the up-axis for default configurations.
    """

    height_scale: float = 0.05
    distance_scale: float = 0.08
    height_offset: float = 0.0
    distance_offset: float = 0.5

    def __post_init__(self):
        if self.height_scale <= 0 or self.distance_scale <= 0:
            raise ValueError("scales must be strictly positive")

    def world_height(self, height_attr: float) -> float:
        return height_attr * self.height_scale + self.height_offset

    def world_distance(self, distance_attr: float) -> float:
        return self.distance_offset + distance_attr * self.distance_scale


@dataclass(frozen=True)
class CameraExtrinsics:
    rotation: np.ndarray  # 3x3, world -> camera
    translation: np.ndarray  # 3-vector

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation is not right-handed")

    @property
    def camera_position(self) -> np.ndarray:
        return -self.rotation.T @ self.translation


_WORLD_UP = np.array([0.0, 0.0, 1.0])
_UP_FALLBACK = np.array([0.0, 1.0, 0.0])  # overhead pose tie-break


def _wrap_degrees(angle: float) -> float:
    """Wrap to [0, 360) such that ``angle`` and ``angle + 360`` map to the
    bit-identical double.

    A single ``% 360.0`` is not enough: ``fl(a + 360) - 360`` differs from
    ``a`` in the last bits, so poses at ``a`` and ``a + 360`` would not be
    exactly equal. Wrapping twice lands both on the common grid of
    ``ulp(a + 360)``.
    """
    return ((angle % 360.0) + 360.0) % 360.0


def extrinsics(
    azimuth: float,
    height: float,
    distance: float,
    in_plane: float,
    mapping: PlacementMapping = PlacementMapping(),
) -> CameraExtrinsics:
    """Orbit pose looking at the origin, then roll about the optical axis.

    Camera position is (d_w sin a, d_w cos a, h_w) with d_w/h_w the mapped
    world distance and height.
    """
    a = math.radians(_wrap_degrees(azimuth))
    d_w = mapping.world_distance(distance)
    h_w = mapping.world_height(height)
    p = np.array([d_w * math.sin(a), d_w * math.cos(a), h_w])
    r = np.linalg.norm(p)
    if r < 1e-12:
        raise DegenerateCameraError("camera position coincides with object center")
    z_axis = p / r
    up = _WORLD_UP if abs(d_w) > 1e-12 else _UP_FALLBACK
    x_axis = np.cross(up, z_axis)
    x_axis /= np.linalg.norm(x_axis)
    y_axis = np.cross(z_axis, x_axis)
    base = np.vstack([x_axis, y_axis, z_axis])
    t = math.radians(_wrap_degrees(in_plane))
    c, s = math.cos(t), math.sin(t)
    roll = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    R = roll @ base
    return CameraExtrinsics(rotation=R, translation=-R @ p)


def extrinsics_from_attrs(
    attrs: AttributeVector, mapping: PlacementMapping = PlacementMapping()
) -> CameraExtrinsics:
    return extrinsics(
        attrs.azimuth,
        attrs.camera_height,
        attrs.camera_distance,
        attrs.in_plane_rotation,
        mapping,
    )


def projection_matrix(
    intr: CameraIntrinsics, extr: CameraExtrinsics
) -> np.ndarray:
    """3x4 product of the diagonal intrinsic matrix and [R | T]."""
    gf = intr.gamma_f
    K = np.diag([gf, gf, 1.0])
    RT = np.hstack([extr.rotation, extr.translation.reshape(3, 1)])
    return K @ RT


def project(
    M: np.ndarray, point: np.ndarray, intr: CameraIntrinsics
) -> np.ndarray:
    """Pixel coordinates of a world point; origin top-left, +y down."""
    y = M @ np.append(np.asarray(point, dtype=float), 1.0)
    depth = -y[2]  # optical axis points away from the scene
    if depth <= 0:
        raise BehindCameraError(f"point has non-positive depth {depth}")
    u = y[0] / depth
    v = y[1] / depth
    return np.array(
        [intr.image_width / 2.0 + u, intr.image_height / 2.0 - v]
    )


def viewpoint_direction(
    azimuth: float,
    height: float,
    distance: float,
    mapping: PlacementMapping = PlacementMapping(),
) -> np.ndarray:
    """Unit vector from the object center toward the camera position."""
    a = math.radians(_wrap_degrees(azimuth))
    d_w = mapping.world_distance(distance)
    h_w = mapping.world_height(height)
    p = np.array([d_w * math.sin(a), d_w * math.cos(a), h_w])
    r = np.linalg.norm(p)
    if r < 1e-12:
        raise DegenerateCameraError("camera position coincides with object center")
    return p / r
