"""
Grid geometry, UAV kinematics, rotary-wing propulsion energy and the air-to-ground channel.

Every function here is pure. Cells are indexed 1..L row-major from the origin corner, so
index 1 sits at ``origin`` and index ``cols`` at the end of the first row.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from skyrsma import constants_utils as cu
from skyrsma.constants_utils import InvalidCell, ZeroDuration, InvalidKinematics, InvalidGeometry, BadConfig


@dataclass(frozen=True)
class AreaGrid:
    cols: int
    rows: int
    x_s: float
    y_s: float
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise BadConfig("Grid needs at least one column and one row")
        if self.x_s <= 0 or self.y_s <= 0:
            raise BadConfig("Grid spacing must be positive")

    @property
    def num_cells(self):
        return self.cols * self.rows

    @property
    def extent(self):
        """(xmin, xmax, ymin, ymax) of the area covered by the cells."""
        ox, oy = self.origin
        return (ox - self.x_s / 2, ox + (self.cols - 0.5) * self.x_s,
                oy - self.y_s / 2, oy + (self.rows - 0.5) * self.y_s)

    @property
    def diagonal(self):
        xmin, xmax, ymin, ymax = self.extent
        return math.hypot(xmax - xmin, ymax - ymin)

    def contains(self, point):
        xmin, xmax, ymin, ymax = self.extent
        return xmin <= point[0] <= xmax and ymin <= point[1] <= ymax

    def col_row(self, idx):
        if not 1 <= idx <= self.num_cells:
            raise InvalidCell("Cell {} outside 1..{}".format(idx, self.num_cells))
        return (idx - 1) % self.cols, (idx - 1) // self.cols

    def index(self, col, row):
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            raise InvalidCell("Column/row ({}, {}) outside grid".format(col, row))
        return row * self.cols + col + 1

    def neighbour(self, idx, move):
        """
        Adjacent cell for a move in MOVES, or None if the move leaves the area.

        N increases y, E increases x.
        """
        col, row = self.col_row(idx)
        dcol, drow = {"N": (0, 1), "S": (0, -1), "E": (1, 0), "W": (-1, 0), "I": (0, 0)}[move]
        col += dcol
        row += drow
        if not (0 <= col < self.cols and 0 <= row < self.rows):
            return None
        return self.index(col, row)


@dataclass(frozen=True)
class UavPose:
    cell: int
    alt_level: int
    time_level: int


@dataclass(frozen=True)
class MissionBounds:
    h_min: float
    h_max: float
    t_min: float
    t_max: float
    vmax_h: float
    vmax_v: float
    start_pose: UavPose
    end_pose: UavPose
    n_slots: int
    alt_levels: int = 20
    time_levels: int = 5

    def __post_init__(self):
        if not 0 < self.h_min <= self.h_max:
            raise BadConfig("Need 0 < h_min <= h_max")
        if not 0 < self.t_min <= self.t_max:
            raise BadConfig("Need 0 < t_min <= t_max")
        if self.vmax_h <= 0 or self.vmax_v <= 0:
            raise BadConfig("Speed limits must be positive")
        if self.n_slots < 1:
            raise BadConfig("Need at least one slot")
        if self.delta_h <= 0 or self.delta_t <= 0:
            raise BadConfig("Level spacing floor(max / levels) is zero")

    @property
    def delta_h(self):
        return math.floor(self.h_max / self.alt_levels)

    @property
    def delta_t(self):
        return math.floor(self.t_max / self.time_levels)

    def altitude(self, pose):
        return pose.alt_level * self.delta_h

    def duration(self, pose):
        return pose.time_level * self.delta_t

    def altitude_ok(self, alt_level):
        return self.h_min <= alt_level * self.delta_h <= self.h_max

    def duration_ok(self, time_level):
        return self.t_min <= time_level * self.delta_t <= self.t_max

    def valid_alt_levels(self):
        return [lv for lv in range(1, self.alt_levels + 1) if self.altitude_ok(lv)]

    def valid_time_levels(self):
        return [lv for lv in range(1, self.time_levels + 1) if self.duration_ok(lv)]


@dataclass(frozen=True)
class PropulsionParams:
    w0: float = cu.BLADE_PROFILE_POWER
    w1: float = cu.INDUCED_POWER
    w2: float = cu.CLIMB_POWER
    tip_speed: float = cu.TIP_SPEED
    v_bar: float = cu.MEAN_INDUCED_VELOCITY
    f0: float = cu.FUSELAGE_DRAG_RATIO
    solidity: float = cu.ROTOR_SOLIDITY
    rho: float = cu.AIR_DENSITY
    disc_area: float = cu.ROTOR_DISC_AREA

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise BadConfig("Propulsion parameter {} must be positive".format(name))


@dataclass(frozen=True)
class ChannelParams:
    alpha: float = cu.LOS_ALPHA
    beta: float = cu.LOS_BETA
    zeta_los: float = cu.ZETA_LOS_DB
    zeta_nlos: float = cu.ZETA_NLOS_DB
    f_c: float = cu.CARRIER_FREQUENCY
    c_light: float = cu.SPEED_OF_LIGHT
    bandwidth: float = cu.BANDWIDTH
    n0: float = cu.dbm_per_hz_to_watts(cu.NOISE_DBM_PER_HZ)

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise BadConfig("Environment constants must be positive")
        if self.zeta_nlos < self.zeta_los:
            raise BadConfig("NLoS excess loss below LoS excess loss")
        if self.bandwidth <= 0 or self.n0 <= 0:
            raise BadConfig("Bandwidth and noise density must be positive")

    @property
    def a1(self):
        return self.zeta_los - self.zeta_nlos

    @property
    def a2(self):
        return 20 * math.log10(4 * math.pi * self.f_c / self.c_light) + self.zeta_nlos

    @property
    def noise_power(self):
        return self.bandwidth * self.n0


@dataclass(frozen=True)
class GroundTerminal:
    id: int
    position: tuple
    task_cycles: float
    task_bits: float
    f_g: float = cu.F_LOCAL

    def __post_init__(self):
        if self.task_cycles <= 0 or self.task_bits <= 0:
            raise BadConfig("GT {} needs a positive task".format(self.id))


class SlotSpeeds(NamedTuple):
    v_h: float
    v_v: float
    over_h: bool
    over_v: bool


def cell_center(grid, idx):
    col, row = grid.col_row(idx)
    return grid.origin[0] + col * grid.x_s, grid.origin[1] + row * grid.y_s


def slot_speeds(pose_n, pose_next, grid, bounds):
    """
    Horizontal and vertical speed needed to fly pose_n -> pose_next in pose_n's slot.

    :return: SlotSpeeds with the speed-limit flags for C4/C5
    """
    duration = bounds.duration(pose_n)
    if duration <= 0:
        raise ZeroDuration("Slot duration is zero for time level {}".format(pose_n.time_level))
    x0, y0 = cell_center(grid, pose_n.cell)
    x1, y1 = cell_center(grid, pose_next.cell)
    v_h = math.hypot(x1 - x0, y1 - y0) / duration
    v_v = abs(pose_next.alt_level - pose_n.alt_level) * bounds.delta_h / duration
    return SlotSpeeds(v_h, v_v, v_h > bounds.vmax_h, v_v > bounds.vmax_v)


def slot_propulsion_energy(v_h, v_v, duration, p):
    if duration == 0:
        raise ZeroDuration("Zero slot duration")
    if v_h < 0 or v_v < 0 or duration < 0:
        raise InvalidKinematics("Negative speed or duration ({}, {}, {})".format(v_h, v_v, duration))
    blade = p.w0 * (1 + 3 * v_h ** 2 / p.tip_speed ** 2)
    parasite = 0.5 * p.f0 * p.rho * p.solidity * p.disc_area * v_h ** 3
    ratio = v_h ** 2 / (2 * p.v_bar ** 2)
    induced = p.w1 * math.sqrt(math.sqrt(1 + ratio ** 2) - ratio)
    climb = p.w2 * v_v
    return duration * (blade + parasite + induced + climb)


def trajectory_energy(poses, grid, bounds, p):
    if len(poses) < 2:
        raise InvalidKinematics("A trajectory needs at least two poses")
    total = 0.0
    for pose_n, pose_next in zip(poses[:-1], poses[1:]):
        speeds = slot_speeds(pose_n, pose_next, grid, bounds)
        total += slot_propulsion_energy(speeds.v_h, speeds.v_v, bounds.duration(pose_n), p)
    return total


def elevation_degrees(h, l):
    return math.degrees(math.atan2(h, l))


def los_probability(h, l, ch):
    if h <= 0:
        raise InvalidGeometry("UAV altitude must be positive, got {}".format(h))
    if l < 0:
        raise InvalidGeometry("Horizontal distance must be non-negative, got {}".format(l))
    theta = elevation_degrees(h, l)
    return 1.0 / (1.0 + ch.alpha * math.exp(-ch.beta * (theta - ch.alpha)))


def pathloss_db(h, l, ch):
    if h <= 0 or l < 0 or math.hypot(h, l) <= 0:
        raise InvalidGeometry("Non-positive link distance for h={}, l={}".format(h, l))
    return 20 * math.log10(math.hypot(h, l)) + ch.a1 * los_probability(h, l, ch) + ch.a2


def channel_gain(d_db):
    return 10.0 ** (-d_db / 10.0)


def pose_gains(pose, gts, grid, bounds, ch):
    """Power gains from every GT to the UAV at ``pose``, as an array ordered like ``gts``."""
    x, y = cell_center(grid, pose.cell)
    h = bounds.altitude(pose)
    return np.array([channel_gain(pathloss_db(h, math.hypot(x - gt.position[0], y - gt.position[1]), ch))
                     for gt in gts])
