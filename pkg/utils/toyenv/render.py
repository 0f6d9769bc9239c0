"""
Software rasterizer of the toy scene

Draws a checkered table plane by ray casting, the target pad as a flat
disc on the table and objects and the gripper as depth sorted billboards.
There is no lighting.
"""

import logging

import numpy as np

from utils.toyenv.camera import WRIST_VIEW
from utils.toyenv.camera import VIEW_AZIMUTHS
from utils.toyenv.camera import focal_length
from utils.toyenv.camera import orbit_camera_frame
from utils.toyenv.camera import project_points
from utils.toyenv.camera import wrist_camera_frame
from utils.toyenv.scene import GRIPPER_CLOSED_COLOR
from utils.toyenv.scene import GRIPPER_OPEN_COLOR
from utils.toyenv.scene import OBJECT_RADIUS
from utils.toyenv.scene import TARGET_PAD_COLOR
from utils.toyenv.scene import TARGET_PAD_RADIUS


IMAGE_SIDES = (64, 96)

BACKGROUND_COLOR = np.array([0.15, 0.17, 0.22])
TABLE_COLORS = (np.array([0.78, 0.7, 0.55]), np.array([0.66, 0.58, 0.45]))
TABLE_HALF_EXTENT = 0.8
CHECKER_SIZE = 0.1
GRIPPER_HALF_SIZE = 0.06


# -----------------------------------------------------------------------------
def _ray_directions(frame, side):
    """Unnormalized view ray of every pixel center, shape (side, side, 3)"""
    centers = (np.arange(side) + 0.5 - side / 2.0) / focal_length(side)
    x = centers[np.newaxis, :, np.newaxis]
    y = -centers[:, np.newaxis, np.newaxis]
    return frame.forward + x * frame.right + y * frame.up


def _draw_table(image, frame, side, scene):
    directions = _ray_directions(frame, side)
    dz = directions[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dz < -1e-9, -frame.position[2] / dz, np.inf)
    hits = frame.position + t[..., np.newaxis] * directions
    hit_x = np.where(np.isfinite(t), hits[..., 0], np.inf)
    hit_y = np.where(np.isfinite(t), hits[..., 1], np.inf)

    on_table = (np.abs(hit_x) <= TABLE_HALF_EXTENT) & \
        (np.abs(hit_y) <= TABLE_HALF_EXTENT)
    checker = (np.floor(np.where(on_table, hit_x, 0) / CHECKER_SIZE) +
               np.floor(np.where(on_table, hit_y, 0) / CHECKER_SIZE)) % 2
    image[on_table & (checker == 0)] = TABLE_COLORS[0]
    image[on_table & (checker == 1)] = TABLE_COLORS[1]

    if scene.target_pad is not None:
        pad_distance = np.hypot(
            np.where(on_table, hit_x, np.inf) - scene.target_pad[0],
            np.where(on_table, hit_y, np.inf) - scene.target_pad[1])
        image[pad_distance <= TARGET_PAD_RADIUS] = TARGET_PAD_COLOR


def _billboards(scene, include_gripper):
    """(position, half size, color, shape) of every upright primitive"""
    items = []
    for position, color in zip(scene.objects, scene.object_colors):
        items.append((position, OBJECT_RADIUS, color, "disc"))
    if include_gripper:
        color = GRIPPER_CLOSED_COLOR if scene.grasped else GRIPPER_OPEN_COLOR
        items.append((scene.gripper, GRIPPER_HALF_SIZE, color, "quad"))
    return items


def _draw_billboards(image, frame, side, items):
    if not items:
        return
    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    points = np.stack([np.asarray(item[0], dtype=np.float64)
                       for item in items])
    center_rows, center_cols, depths = project_points(points, frame, side)
    f = focal_length(side)

    # Painter's order, farthest first
    for index in np.argsort(-depths, kind="stable"):
        if depths[index] <= 1e-3:
            continue
        _, half_size, color, shape = items[index]
        radius = half_size * f / depths[index]
        d_row = rows - center_rows[index]
        d_col = cols - center_cols[index]
        if shape == "disc":
            mask = d_row ** 2 + d_col ** 2 <= radius ** 2
        else:
            mask = np.maximum(np.abs(d_row), np.abs(d_col)) <= radius
        image[mask] = color


def render_frame(scene, frame, side, include_gripper=True):
    """
    Rasterize the scene seen from an explicit camera frame

    Parameters
    ----------
    scene : SceneState
    frame : CameraFrame
    side : int
    include_gripper : bool
        The wrist camera does not see its own gripper

    Returns
    -------
    ndarray of shape (side, side, 3), float32 in [0, 1]
    """

    image = np.empty((side, side, 3), dtype=np.float64)
    image[...] = BACKGROUND_COLOR
    _draw_table(image, frame, side, scene)
    _draw_billboards(image, frame, side,
                     _billboards(scene, include_gripper))
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def render_view(scene, camera, side, view="front"):
    """
    Render one named view of the scene

    Parameters
    ----------
    scene : SceneState
    camera : CameraPose or None
        Orbit pose of the view, ignored for the wrist view
    side : int
        64 or 96 pixels
    view : str
        View name selecting the orbit azimuth or the wrist camera

    Returns
    -------
    ndarray of shape (side, side, 3), float32 in [0, 1]
    """

    logger = logging.getLogger(__name__).getChild("render_view")

    if side not in IMAGE_SIDES:
        raise ValueError("Image side must be one of {}, got {}".format(
            IMAGE_SIDES, side))

    if view == WRIST_VIEW:
        frame = wrist_camera_frame(scene.gripper)
        return render_frame(scene, frame, side, include_gripper=False)

    try:
        azimuth = VIEW_AZIMUTHS[view]
    except KeyError:
        raise ValueError("Unknown view '{}'".format(view))
    values = np.array(list(camera.as_dict().values()), dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError("Camera pose must be finite: {}".format(camera))
    logger.debug("Rendering {} at {}".format(view, camera))
    return render_frame(scene, orbit_camera_frame(camera, azimuth), side)
