import csv
import logging
import os

import numpy as np

log = logging.getLogger("skyrsma")
log.setLevel(logging.INFO)

if not log.handlers:
    ch = logging.StreamHandler()
    ch.setLevel(logging.DEBUG)
    ch.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(ch)

VERSION = "0.3.0"


class SkyRsmaError(Exception):
    pass


class InvalidCell(SkyRsmaError, ValueError):
    pass


class ZeroDuration(SkyRsmaError, ValueError):
    pass


class InvalidKinematics(SkyRsmaError, ValueError):
    pass


class InvalidGeometry(SkyRsmaError, ValueError):
    pass


class IncompleteOrder(SkyRsmaError, ValueError):
    pass


class OracleTooLarge(SkyRsmaError):
    pass


class ZeroEnergy(SkyRsmaError, ValueError):
    pass


class EpisodeFinished(SkyRsmaError):
    pass


class EmptyEpisode(SkyRsmaError, ValueError):
    pass


class ShapeMismatch(SkyRsmaError, ValueError):
    pass


class NoForwardCache(SkyRsmaError):
    pass


class BadSchedule(SkyRsmaError, ValueError):
    pass


class BadConfig(SkyRsmaError, ValueError):
    pass


class UnknownAxis(SkyRsmaError, KeyError):
    pass


class ConfigError(SkyRsmaError, ValueError):
    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__("{}: {}".format(pointer or "/", message))


# Reference scenario (SI units unless noted)
CARRIER_FREQUENCY = 2.4e9
LOS_ALPHA = 12.08
LOS_BETA = 0.11
ZETA_LOS_DB = 1.6
ZETA_NLOS_DB = 23.0
SPEED_OF_LIGHT = 3e8
BANDWIDTH = 1e6
NOISE_DBM_PER_HZ = -174.0

P_MAX = 5e-3
R_MIN = 0.2
SUB_MESSAGES = 2
F_LOCAL = 5.0
F_UAV_RANGE = (100.0, 500.0)
TASK_CYCLES_RANGE = (500.0, 2500.0)
TASK_BITS_RANGE = (1000.0, 1500.0)
NUM_GTS_RANGE = (2, 5)

T_MIN = 1.0
T_MAX = 5.0
H_MIN = 100.0
H_MAX = 200.0
VMAX_H = 10.0
VMAX_V = 10.0

BLADE_PROFILE_POWER = 79.9
INDUCED_POWER = 88.6
CLIMB_POWER = 11.46
TIP_SPEED = 120.0
MEAN_INDUCED_VELOCITY = 4.03
FUSELAGE_DRAG_RATIO = 0.6
ROTOR_SOLIDITY = 0.05
AIR_DENSITY = 1.225
ROTOR_DISC_AREA = 0.503

AREA_SIDE = 1000.0
CELL_SPACING = 10.0

MOVES = ("N", "S", "E", "W", "I")
CLIMBS = ("U", "D", "I")

ACCESS_SCHEMES = ("rsma", "noma", "fdma")
DECODING_POLICIES = ("priority", "random", "oracle")
AGENTS = ("gdrs", "dqn", "random")


def dbm_per_hz_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def write_csv(path, header, rows):
    """
    Writes rows with a header line (RFC 4180 quoting, UTF-8, LF endings).

    Floats go through repr so reruns are byte-identical.
    """
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(value) for value in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as file:
        reader = csv.reader(file)
        header = next(reader)
        return header, [row for row in reader]


def _csv_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value
