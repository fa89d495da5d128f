from skyrsma.agent.diffusion import DiffusionSchedule, DiffusionActor, build_schedule, sample_action
from skyrsma.agent.replay import ReplayBuffer, Batch
from skyrsma.agent.sac import SacHyper, GdrsAgent
from skyrsma.agent.dqn import DqnHyper, DqnAgent
from skyrsma.agent.training import train, dqn_train, random_run, evaluate, TrainResult
