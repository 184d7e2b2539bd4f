"""
Travel times of robots moving over a translating ROI.

All positions live in the ROI's co-moving frame. A robot with ground speed
S_r that wants to achieve relative displacement d in time T must fly at
ground velocity d/T + v_p, so |d/T + v_p| = S_r fixes T.
"""

import math

from core.errors import ParameterError
from core.models import Direction


def check_speeds(S_r: float, S_p: float) -> None:
    """Reject speed pairs where the robot cannot outrun the ROI."""
    if S_p < 0:
        raise ParameterError(f"ROI speed must be non-negative, got S_p={S_p}")
    if S_r <= S_p:
        raise ParameterError(f"Robot speed must exceed ROI speed, got S_r={S_r}, S_p={S_p}")


def relative_travel_time(dx: float, dy: float, S_r: float, S_p: float,
                         translation_dir: Direction) -> float:
    """
    Time to cover displacement (dx, dy) in the ROI frame.

    Args:
        dx, dy: Displacement in the co-moving frame (cell units)
        S_r: Robot speed
        S_p: ROI speed
        translation_dir: Direction the ROI translates in

    Returns:
        Travel time; 0 for a zero displacement
    """
    check_speeds(S_r, S_p)
    dist_sq = dx * dx + dy * dy
    if dist_sq == 0:
        return 0.0
    # d . v_p, positive when moving with the ROI
    along = (dx * translation_dir.dx + dy * translation_dir.dy) * S_p
    inverse = (-along + math.sqrt(along * along + dist_sq * (S_r * S_r - S_p * S_p))) / dist_sq
    return 1.0 / inverse


def traversal_time(direction: Direction, S_r: float, S_p: float,
                   translation_dir: Direction) -> float:
    """
    Time to traverse one unit edge of the grid in ``direction``.

    With the translation: 1/(S_r - S_p); against it: 1/(S_r + S_p);
    perpendicular: 1/sqrt(S_r^2 - S_p^2).
    """
    check_speeds(S_r, S_p)
    if direction is translation_dir:
        return 1.0 / (S_r - S_p)
    if direction.dx == -translation_dir.dx and direction.dy == -translation_dir.dy:
        return 1.0 / (S_r + S_p)
    return 1.0 / math.sqrt(S_r * S_r - S_p * S_p)


def direction_between(source: tuple, target: tuple) -> Direction:
    """Direction of a unit step between two 4-adjacent cells."""
    step = (target[0] - source[0], target[1] - source[1])
    for direction in Direction:
        if direction.value == step:
            return direction
    raise ParameterError(f"Cells {source} and {target} are not 4-adjacent")
