"""The slot-stepped network environment behind every learner.

One step: apply the joint action (per-AP power split, per-RIS element
on/off + phase picks), re-derive the link plan on the reconfigured
channels, score rates and energy efficiency, charge the shaped reward, and
advance traffic plus deficit queues.  Everything is driven by one seeded
stream, so a fixed (config, seed, action sequence) reproduces bit-identical
trajectories.
"""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linklayer
from .channel import EpisodeChannel, ris_phase_diag
from .config import NetworkConfig, config_dict
from .graphs import (AgentObservation, CommGraph, FeatureScale, ap_observation,
                     build_comm_graph, ris_observation, state_digest)
from .queueing import QueueState, rate_violation
from .topology import SE, Topology, build_topology


def shaped_reward(eta: float, delta: float, weights: np.ndarray,
                  rates: np.ndarray, zeta: float, xi_penalty: float) -> float:
    """zeta * efficiency - penalty * rate shortfall + queue-weighted service.

    Units: eta in Gbit/J, delta and rates in Gbps, weights in Gbit.
    """
    return float(zeta * eta - xi_penalty * delta
                 + np.dot(np.asarray(weights), np.asarray(rates)))


@dataclass
class StepOutcome:
    reward: float
    eta: float
    delta: float
    rates: np.ndarray              # Gbps per user
    sinr: np.ndarray
    power: float                   # W
    weights: np.ndarray            # Gbit, pre-update reward weights
    arrivals: np.ndarray           # Gbit
    q: np.ndarray                  # Gbit, post-update
    y: np.ndarray                  # Gbit, post-update
    outage: np.ndarray             # bool per user
    sic_fail: dict
    zf_loaded: bool
    plan_note: dict = field(default_factory=dict)


class NetworkEnv:
    """Dec-POMDP view of the multi-AP / multi-RIS downlink."""

    def __init__(self, config: NetworkConfig, seed: int | None = None):
        self.config = config
        self.seed = config.rng_seed if seed is None else int(seed)
        self.topo: Topology = build_topology(
            config, np.random.default_rng([self.seed, 0]))
        self._channel = EpisodeChannel(config, self.topo)
        kind = self.topo.user_kind
        mean_se, mean_iot = config.arrival_mean_gbit
        qmax_se, qmax_iot = config.qmax_gbit
        self._queues = QueueState(
            np.where(kind == SE, mean_se, mean_iot),
            np.where(kind == SE, qmax_se, qmax_iot),
            config.outage_eps,
            config.packet_gbps * config.slot_seconds,
            config.arrival_cap_factor)
        self._minima = np.where(kind == SE, config.rmin_se_gbps,
                                config.rmin_iot_gbps)
        self._scale = FeatureScale(config)
        self._rng = None
        self._episode = -1
        self.t = 0
        self.reset()

    # -- lifecycle ----------------------------------------------------------
    def reset(self) -> None:
        """Fresh episode: new blockage draw, zeroed queues, idle last actions."""
        self._episode += 1
        self._rng = np.random.default_rng([self.seed, 1, self._episode])
        self._channel.new_episode(self._rng)
        self._parts = self._channel.slot_parts(self._rng)
        self._queues.reset()
        cfg = self.config
        self._last_power = np.zeros(cfg.total_users)
        self._last_on = np.zeros((cfg.num_ris, cfg.ris_elements), dtype=int)
        self._last_phase = np.zeros((cfg.num_ris, cfg.ris_elements), dtype=int)
        self.t = 0

    # -- action plumbing ------------------------------------------------------
    def project_power(self, alloc: np.ndarray) -> np.ndarray:
        """Clip negatives and rescale each AP onto its power budget."""
        alloc = np.maximum(np.asarray(alloc, dtype=float), 0.0)
        if alloc.shape != (self.config.total_users,):
            raise ValueError("power allocation must be one entry per user")
        out = alloc.copy()
        for m in range(self.config.num_aps):
            users = self.topo.users_of(m)
            total = out[users].sum()
            if total > self.config.max_tx_power and total > 0:
                out[users] *= self.config.max_tx_power / total
        return out

    def _check_ris(self, on: np.ndarray, phase: np.ndarray):
        cfg = self.config
        shape = (cfg.num_ris, cfg.ris_elements)
        on = np.asarray(on, dtype=int)
        phase = np.asarray(phase, dtype=int)
        if on.shape != shape or phase.shape != shape:
            raise ValueError(f"RIS action arrays must have shape {shape}")
        return on, phase

    def _thetas(self, on: np.ndarray, phase: np.ndarray) -> np.ndarray:
        cfg = self.config
        if cfg.num_ris == 0:
            return np.zeros((0, cfg.ris_elements), dtype=complex)
        return np.stack([ris_phase_diag(on[r], phase[r], cfg.ris_phase_bits)
                         for r in range(cfg.num_ris)])

    # -- core pipeline --------------------------------------------------------
    def _evaluate(self, power: np.ndarray, on: np.ndarray, phase: np.ndarray):
        """Plan + score the slot under the given action; no state mutation."""
        cfg, topo = self.config, self.topo
        h_eff = self._parts.effective(self._thetas(on, phase))
        plans = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for m in range(cfg.num_aps):
                users = topo.users_of(m)
                se = [int(u) for u in users if topo.user_kind[u] == SE]
                iot = [int(u) for u in users if topo.user_kind[u] != SE]
                plans.append(linklayer.derive_plan(h_eff[m], se, iot, cfg))
        fail = linklayer.sic_feasibility(h_eff, plans, power, cfg.noise_power,
                                         topo.ap_of_user)
        for plan in plans:
            plan.sic_fail = {u: fail[u] for u in fail
                             if u in plan.position and plan.position[u] > 1}
        gamma = linklayer.sinr_all(h_eff, plans, power, cfg.noise_power,
                                   topo.ap_of_user)
        rates = linklayer.rates_gbps(gamma, cfg.bandwidth)
        p_total = linklayer.power_consumption(power, on, cfg)
        eta = linklayer.energy_efficiency(rates, p_total)
        delta = rate_violation(rates, self._minima)
        weights = self._queues.weights()
        reward = shaped_reward(eta, delta, weights, rates, cfg.zeta,
                               cfg.xi_penalty)
        return dict(reward=reward, eta=eta, delta=delta, rates=rates,
                    gamma=gamma, power=p_total, weights=weights,
                    fail=fail, plans=plans, h_eff=h_eff)

    def peek_reward(self, power: np.ndarray, on: np.ndarray,
                    phase: np.ndarray) -> float:
        """One-step reward of an action at the current state, no side effects."""
        on, phase = self._check_ris(on, phase)
        return self._evaluate(self.project_power(power), on, phase)["reward"]

    def step(self, power: np.ndarray, on: np.ndarray,
             phase: np.ndarray) -> StepOutcome:
        on, phase = self._check_ris(on, phase)
        power = self.project_power(power)
        ev = self._evaluate(power, on, phase)

        arrivals = self._queues.sample_arrivals(self._rng)
        served = ev["rates"] * self.config.slot_seconds
        q, y = self._queues.step(served, arrivals)
        outage = q >= self._queues.q_max

        self._last_power = power
        self._last_on, self._last_phase = on, phase
        self.t += 1
        self._parts = self._channel.slot_parts(self._rng)

        return StepOutcome(
            reward=ev["reward"], eta=ev["eta"], delta=ev["delta"],
            rates=ev["rates"], sinr=ev["gamma"], power=ev["power"],
            weights=ev["weights"], arrivals=arrivals, q=q, y=y,
            outage=outage, sic_fail=ev["fail"],
            zf_loaded=any(p.zf_loaded for p in ev["plans"]),
            plan_note={"clusters": [p.clusters for p in ev["plans"]]},
        )

    # -- agent-facing views ---------------------------------------------------
    def observed_effective(self) -> np.ndarray:
        """Channels composed under the previous slot's RIS action."""
        return self._parts.effective(self._thetas(self._last_on,
                                                  self._last_phase))

    def observe(self, agent_kind: str, index: int) -> AgentObservation:
        if agent_kind == "ap":
            return ap_observation(index, self._parts.direct,
                                  self._queues.weights(), self._last_power,
                                  self.topo, self._scale)
        if agent_kind == "ris":
            return ris_observation(index, self._parts.ris_user,
                                   self._parts.ap_ris, self._last_on[index],
                                   self._last_phase[index], self.topo,
                                   self._scale)
        raise ValueError(f"unknown agent kind: {agent_kind}")

    def comm_graph(self) -> CommGraph:
        return build_comm_graph(
            self._parts.direct, self.observed_effective(),
            self._parts.ris_user, self._parts.ap_ris, self._queues.weights(),
            self._last_power, self._last_on, self._last_phase,
            self.topo, self.config)

    def state_digest(self) -> np.ndarray:
        return state_digest(self.comm_graph())

    @property
    def queues(self) -> QueueState:
        return self._queues

    def checksum(self) -> str:
        """Stable digest of the physics every algorithm runs against."""
        payload = json.dumps(config_dict(self.config), sort_keys=True)
        h = hashlib.sha256(payload.encode())
        h.update(np.ascontiguousarray(self.topo.user_positions).tobytes())
        h.update(np.ascontiguousarray(self.topo.ap_positions).tobytes())
        return h.hexdigest()[:16]
