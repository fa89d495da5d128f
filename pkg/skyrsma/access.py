"""
Uplink multiple access at the UAV and the offloaded-computing model.

Arrays are indexed by GT ``k`` (0-based) and sub-message ``i`` (0-based): gains have shape
(K,), powers and split ratios (K, I), offload decisions (K,) with entries in {0, 1}.
A decoding order is a tuple of (k, i) pairs, earliest decoded first.
"""
import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from skyrsma.constants_utils import IncompleteOrder, OracleTooLarge, ZeroEnergy, BadConfig

ORACLE_MAX_PAIRS = 8
OBJECTIVES = ("sum_processed", "feasible_count")


@dataclass(frozen=True, eq=False)
class RsmaConfig:
    sub_messages: int
    mu: np.ndarray
    p_max: float
    r_min: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if self.sub_messages < 1:
            raise BadConfig("Need at least one sub-message per GT")
        if mu.ndim != 2 or mu.shape[1] != self.sub_messages:
            raise BadConfig("Split ratios must have shape (K, {})".format(self.sub_messages))
        if np.any(mu < 0) or not np.allclose(mu.sum(axis=1), 1.0):
            raise BadConfig("Split ratios must be non-negative and sum to one per GT")
        if self.p_max <= 0:
            raise BadConfig("P_max must be positive")
        if self.r_min < 0:
            raise BadConfig("R_min must be non-negative")
        object.__setattr__(self, "mu", mu)

    @classmethod
    def uniform(cls, num_gts, sub_messages, p_max, r_min):
        return cls(sub_messages, np.full((num_gts, sub_messages), 1.0 / sub_messages), p_max, r_min)

    @property
    def num_gts(self):
        return self.mu.shape[0]


@dataclass(frozen=True)
class ComputeParams:
    f_u: float

    def __post_init__(self):
        if self.f_u <= 0:
            raise BadConfig("UAV CPU rate must be positive")


class RateReport(NamedTuple):
    c10_ok: np.ndarray
    c11_deviation: np.ndarray


def offloading_pairs(offload, sub_messages):
    return [(k, i) for k in np.flatnonzero(offload) for i in range(sub_messages)]


def priority_metric(gain, mu_ki, r_min):
    x = mu_ki * r_min
    if x == 0:
        return math.inf
    return gain * (1 + 1 / math.expm1(x * math.log(2)))


def priority_order(gains, offload, cfg):
    """
    Decoding order that serves the largest priority metric first.

    Ties go to the lexicographically smaller (k, i).
    """
    pairs = offloading_pairs(offload, cfg.sub_messages)
    keyed = [(-priority_metric(gains[k], cfg.mu[k, i], cfg.r_min), int(k), i) for k, i in pairs]
    return tuple((k, i) for _, k, i in sorted(keyed))


def random_order(offload, sub_messages, rng):
    pairs = offloading_pairs(offload, sub_messages)
    return tuple((int(pairs[j][0]), pairs[j][1]) for j in rng.permutation(len(pairs)))


def submessage_rates(gains, powers, offload, order, ch):
    """
    Achievable rate of every sub-message under SIC in ``order``.

    Only pairs decoded later interfere. Returns a (K, I) array in bits/s with zeros for GTs
    that do not offload.
    """
    powers = np.asarray(powers, dtype=float)
    expected = set((int(k), i) for k, i in offloading_pairs(offload, powers.shape[1]))
    given = [(int(k), int(i)) for k, i in order]
    if set(given) != expected or len(given) != len(expected):
        missing = sorted(expected - set(given))
        raise IncompleteOrder("Decoding order does not cover the offloading pairs (missing {})".format(missing))
    rates = np.zeros_like(powers)
    interference = 0.0
    for k, i in reversed(given):
        received = gains[k] * powers[k, i]
        rates[k, i] = ch.bandwidth * np.log2(1 + received / (ch.noise_power + interference))
        interference += received
    return rates


def sum_capacity(gains, powers, offload, ch):
    received = float(np.sum(np.asarray(gains)[:, None] * powers * np.asarray(offload)[:, None]))
    return ch.bandwidth * math.log2(1 + received / ch.noise_power)


def transmit_fraction(sum_rate, task, cp):
    return cp.f_u * task.task_bits / (sum_rate * task.task_cycles + cp.f_u * task.task_bits)


def processed_data(offload_k, sum_rate, duration, task, cp):
    if offload_k:
        return cp.f_u * task.task_bits * duration * sum_rate / (sum_rate * task.task_cycles + cp.f_u * task.task_bits)
    return duration * task.f_g


def energy_efficiency(total_processed, total_energy):
    if total_energy <= 0:
        raise ZeroEnergy("Energy must be positive to define efficiency")
    return total_processed / total_energy


def rate_constraints_check(rates, cfg, ch):
    """C10 flag and C11 split deviation per GT; GTs sending nothing have no split to deviate."""
    rates = np.asarray(rates, dtype=float)
    totals = rates.sum(axis=1)
    c10_ok = totals >= cfg.r_min * ch.bandwidth
    shares = np.divide(rates, totals[:, None], out=np.zeros_like(rates), where=totals[:, None] > 0)
    deviation = np.where(totals > 0, np.max(np.abs(shares - cfg.mu), axis=1), 0.0)
    return RateReport(c10_ok, deviation)


def order_objective(order, gains, powers, offload, cfg, ch, gts, cp, duration, objective="sum_processed"):
    rates = submessage_rates(gains, powers, offload, order, ch)
    totals = rates.sum(axis=1)
    if objective == "sum_processed":
        return float(sum(processed_data(offload[k], totals[k], duration, gts[k], cp) for k in range(len(gts))))
    if objective == "feasible_count":
        ok = rate_constraints_check(rates, cfg, ch).c10_ok
        return float(np.sum(ok & (np.asarray(offload) == 1)))
    raise BadConfig("Unknown oracle objective {}".format(objective))


def oracle_best_order(gains, powers, offload, cfg, ch, gts, cp, duration=1.0, objective="sum_processed"):
    """
    Exhaustive search over every decoding order.

    Permutations are visited in lexicographic order and only strict improvements replace
    the incumbent, so ties resolve to the lexicographically smallest order.
    """
    if objective not in OBJECTIVES:
        raise BadConfig("Unknown oracle objective {}".format(objective))
    pairs = [(int(k), i) for k, i in offloading_pairs(offload, cfg.sub_messages)]
    if len(pairs) > ORACLE_MAX_PAIRS:
        raise OracleTooLarge("{} pairs exceed the oracle limit of {}".format(len(pairs), ORACLE_MAX_PAIRS))
    best_order, best_value = None, -math.inf
    for order in itertools.permutations(sorted(pairs)):
        value = order_objective(order, gains, powers, offload, cfg, ch, gts, cp, duration, objective)
        if value > best_value:
            best_order, best_value = order, value
    return tuple(best_order), best_value


def alt_access_rates(scheme, gains, per_gt_power, offload, ch):
    """
    Per-GT rates for the FDMA and NOMA baselines, shape (K,), zero for local GTs.

    FDMA splits the band equally among offloading GTs. NOMA decodes one message per GT in
    descending gain order (ties by index).
    """
    gains = np.asarray(gains, dtype=float)
    per_gt_power = np.asarray(per_gt_power, dtype=float)
    rates = np.zeros(len(gains))
    active = [int(k) for k in np.flatnonzero(offload)]
    if not active:
        return rates
    if scheme == "fdma":
        band = ch.bandwidth / len(active)
        for k in active:
            rates[k] = band * np.log2(1 + gains[k] * per_gt_power[k] / (band * ch.n0))
    elif scheme == "noma":
        order = sorted(active, key=lambda k: (-gains[k], k))
        interference = 0.0
        for k in reversed(order):
            received = gains[k] * per_gt_power[k]
            rates[k] = ch.bandwidth * np.log2(1 + received / (ch.noise_power + interference))
            interference += received
    else:
        raise BadConfig("Unknown access scheme {}".format(scheme))
    return rates
