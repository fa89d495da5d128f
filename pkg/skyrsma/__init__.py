from skyrsma.constants_utils import *
from skyrsma.physics import AreaGrid, UavPose, MissionBounds, PropulsionParams, ChannelParams, GroundTerminal
from skyrsma.access import RsmaConfig, ComputeParams, priority_order, oracle_best_order, submessage_rates
from skyrsma.scenario import ScenarioConfig, reference_scenario, place_gts
from skyrsma.mdp import EnvState, EnvAction, RewardConfig, UavMecEnv, step, episode_metrics
from skyrsma.nn import DenseNet, Optimizer, grad_check
