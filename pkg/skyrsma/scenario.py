import logging
from dataclasses import dataclass, field

import numpy as np

from skyrsma import constants_utils as cu
from skyrsma.constants_utils import BadConfig
from skyrsma.physics import AreaGrid, MissionBounds, PropulsionParams, ChannelParams, GroundTerminal, UavPose
from skyrsma.access import RsmaConfig, ComputeParams, ORACLE_MAX_PAIRS

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Immutable world description shared by the environment, the agents and the harness."""
    grid: AreaGrid
    bounds: MissionBounds
    propulsion: PropulsionParams
    channel: ChannelParams
    gts: tuple
    rsma: RsmaConfig
    compute: ComputeParams
    access: str = "rsma"
    decoding: str = "priority"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.access not in cu.ACCESS_SCHEMES:
            raise BadConfig("Unknown access scheme {}".format(self.access))
        if self.decoding not in cu.DECODING_POLICIES:
            raise BadConfig("Unknown decoding policy {}".format(self.decoding))
        if len(self.gts) != self.rsma.num_gts:
            raise BadConfig("{} GTs but split ratios for {}".format(len(self.gts), self.rsma.num_gts))
        if self.access == "rsma" and self.decoding == "oracle" and \
                len(self.gts) * self.rsma.sub_messages > ORACLE_MAX_PAIRS:
            raise BadConfig("Oracle decoding needs K*I <= {}".format(ORACLE_MAX_PAIRS))
        for gt in self.gts:
            if not self.grid.contains(gt.position):
                raise BadConfig("GT {} at {} lies outside the grid".format(gt.id, gt.position))
        for pose in (self.bounds.start_pose, self.bounds.end_pose):
            self.grid.col_row(pose.cell)
            if not self.bounds.altitude_ok(pose.alt_level) or not self.bounds.duration_ok(pose.time_level):
                raise BadConfig("Start/end pose {} outside mission bounds".format(pose))

    @property
    def num_gts(self):
        return len(self.gts)

    @property
    def sub_messages(self):
        return self.rsma.sub_messages

    def with_access(self, access, decoding=None):
        return ScenarioConfig(self.grid, self.bounds, self.propulsion, self.channel, self.gts, self.rsma,
                              self.compute, access, decoding or self.decoding, dict(self.metadata))


def _draw(rng, value):
    lo, hi = (value, value) if np.isscalar(value) else value
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


def place_gts(grid, num_gts, placement_seed, cycles=cu.TASK_CYCLES_RANGE, bits=cu.TASK_BITS_RANGE,
              f_g=cu.F_LOCAL, positions=None):
    """
    Ground terminals with uniform-random positions inside the grid (unless ``positions``
    is given) and tasks drawn from the cycle/bit ranges, all from one placement seed.
    """
    rng = np.random.default_rng(placement_seed)
    xmin, xmax, ymin, ymax = grid.extent
    gts = []
    for k in range(num_gts):
        if positions is not None:
            position = (float(positions[k][0]), float(positions[k][1]))
        else:
            position = (float(rng.uniform(xmin, xmax)), float(rng.uniform(ymin, ymax)))
        gts.append(GroundTerminal(k, position, _draw(rng, cycles), _draw(rng, bits), f_g))
    log.debug("Placed %d GTs from seed %s: %s", num_gts, placement_seed,
              ", ".join("({:.1f}, {:.1f})".format(*gt.position) for gt in gts))
    return tuple(gts)


def reference_scenario(num_gts=2, placement_seed=0, n_slots=100, f_u=300.0, access="rsma", decoding="priority",
                       cols=None, rows=None, spacing=cu.CELL_SPACING, positions=None):
    """The reference scenario: 1 km square of 10 m cells, UAV starting over the origin at 200 m."""
    cols = cols or int(cu.AREA_SIDE / spacing) + 1
    rows = rows or int(cu.AREA_SIDE / spacing) + 1
    grid = AreaGrid(cols, rows, spacing, spacing, (0.0, 0.0))
    start = UavPose(1, 20, 1)
    bounds = MissionBounds(cu.H_MIN, cu.H_MAX, cu.T_MIN, cu.T_MAX, cu.VMAX_H, cu.VMAX_V, start, start, n_slots,
                           alt_levels=20, time_levels=5)
    gts = place_gts(grid, num_gts, placement_seed, positions=positions)
    rsma = RsmaConfig.uniform(num_gts, cu.SUB_MESSAGES, cu.P_MAX, cu.R_MIN)
    return ScenarioConfig(grid, bounds, PropulsionParams(), ChannelParams(), gts, rsma, ComputeParams(f_u),
                          access, decoding)
