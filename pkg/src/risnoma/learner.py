"""Rollout collection and the actor/critic/mixer training loop.

Collection runs the decentralized pipeline per slot (observe, message
passing, per-agent sampling, env step) and records everything needed to
replay exact log-probabilities.  Training replays each trajectory on the
tape, scores one-step advantages for the policy term and n-step returns for
the critics, and applies one combined update per training episode:

    mixer     <- mixer - lr_mix * dL_V/dmixer
    theta     <- theta + lr_pi * d(sum logpi * A)/dtheta - lr_v * dL_V/dtheta

Advantages and returns enter as constants; value gradients never flow
through the policy term and vice versa.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, gradient_norm
from .env import NetworkEnv
from .graphs import CommGraph, state_digest
from .policy import ActionSample, GEVDACPolicy, PolicyConfig, policy_for_env
from .topology import SE


@dataclass
class StepRecord:
    graph: CommGraph
    digest: np.ndarray
    ztilde: list                   # embedded-state values per agent
    samples: dict                  # agent id -> ActionSample
    logps: dict                    # agent id -> float (collection-time)
    reward: float
    eta: float
    delta: float
    rates: np.ndarray
    outage: np.ndarray
    q: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    exchange: int


@dataclass
class Trajectory:
    steps: list
    final_graph: CommGraph
    final_digest: np.ndarray

    def __len__(self):
        return len(self.steps)


@dataclass
class TrainConfig:
    episodes: int = 40
    rollouts: int = 2
    horizon: int = 0               # 0: use the env's configured episode length
    gamma: float = 0.99
    nstep: int = 8
    lr_pi: float = 3e-4
    lr_v: float = 1e-3
    lr_mix: float = 1e-3
    seed: int = 0
    eval_rollouts: int = 1
    reward_scale: float = 0.0      # 0: freeze 1/mean|r| from the first batch
    grad_clip: float = 10.0        # per-block gradient norm ceiling


def rollout(env: NetworkEnv, policy: GEVDACPolicy, horizon: int,
            rng: np.random.Generator, deterministic: bool = False) -> Trajectory:
    """One episode of length ``horizon`` under the current parameters."""
    env.reset()
    gru = {i: policy.gru_zero() for i in range(policy._n_agents)}
    steps = []
    for _ in range(horizon):
        graph = env.comm_graph()
        digest = state_digest(graph)
        z = policy.embed(graph)
        samples, logps = {}, {}
        for i, kind in enumerate(graph.node_kind):
            sample, logp, h = policy.act(z[i], kind, gru[i], rng,
                                         deterministic=deterministic)
            samples[i] = sample
            logps[i] = logp.item()
            gru[i] = h.value
        power, on, phase = policy.env_action(samples)
        out = env.step(power, on, phase)
        steps.append(StepRecord(
            graph=graph, digest=digest, ztilde=[t.value.copy() for t in z],
            samples=samples, logps=logps, reward=out.reward, eta=out.eta,
            delta=out.delta, rates=out.rates, outage=out.outage, q=out.q,
            y=out.y, weights=out.weights,
            exchange=policy.exchange_volume(graph)))
    final_graph = env.comm_graph()
    return Trajectory(steps, final_graph, state_digest(final_graph))


def n_step_return(rewards, values, t: int, gamma: float, n: int) -> float:
    """Discounted n-step return from slot t, bootstrapped from values[t+m];
    truncated with a terminal bootstrap when fewer than n slots remain."""
    horizon = len(rewards)
    m = min(n, horizon - t)
    total = 0.0
    for i in range(m):
        total += gamma ** i * rewards[t + i]
    return total + gamma ** m * values[t + m]


def advantage(reward: float, v_now: float, v_next: float, gamma: float) -> float:
    return reward + gamma * v_next - v_now


def _replay_values(policy: GEVDACPolicy, traj: Trajectory):
    """Tape pass over one trajectory: V_tot per slot (plus bootstrap) and
    the per-slot sum of agent log-probabilities."""
    vtots, logp_sums = [], []
    gru = {i: Tensor(policy.gru_zero())
           for i in range(policy._n_agents)}
    for rec in traj.steps:
        z = policy.embed(rec.graph)
        locals_ = [policy.local_value(z[i], kind)
                   for i, kind in enumerate(rec.graph.node_kind)]
        vtots.append(policy.global_value(rec.digest, locals_))
        lp_total = None
        for i, kind in enumerate(rec.graph.node_kind):
            lp, h = policy.log_prob(z[i], kind, gru[i], rec.samples[i])
            gru[i] = h
            lp_total = lp if lp_total is None else lp_total + lp
        logp_sums.append(lp_total)
    z_fin = policy.embed(traj.final_graph)
    locals_fin = [policy.local_value(z_fin[i], kind)
                  for i, kind in enumerate(traj.final_graph.node_kind)]
    vtots.append(policy.global_value(traj.final_digest, locals_fin))
    return vtots, logp_sums


def _clip_block(grads: dict, max_norm: float) -> dict:
    if max_norm <= 0:
        return grads
    norm = gradient_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {n: np.asarray(g) * scale for n, g in grads.items()}


def update(policy: GEVDACPolicy, trajectories, tcfg: TrainConfig,
           reward_scale: float = 1.0) -> dict:
    """One combined parameter update over a batch of trajectories."""
    store = policy.store
    loss_pi, loss_v = None, None
    for traj in trajectories:
        vtots, logp_sums = _replay_values(policy, traj)
        v_num = [v.item() for v in vtots]
        rewards = [rec.reward * reward_scale for rec in traj.steps]
        for t in range(len(traj)):
            adv = advantage(rewards[t], v_num[t], v_num[t + 1], tcfg.gamma)
            term = logp_sums[t] * adv
            loss_pi = term if loss_pi is None else loss_pi + term
            target = n_step_return(rewards, v_num, t, tcfg.gamma, tcfg.nstep)
            err = vtots[t] - Tensor(np.array(target))
            sq = err * err
            loss_v = sq if loss_v is None else loss_v + sq

    blocks = policy.parameter_blocks()
    store.zero_grads()
    loss_pi.backward()
    g_pi = _clip_block({n: g for n, g in store.gradients().items()
                        if n in set(blocks["policy"])}, tcfg.grad_clip)
    store.zero_grads()
    loss_v.backward()
    g_v = store.gradients()
    g_v_theta = _clip_block({n: g_v[n] for n in blocks["policy"]
                             + blocks["critic"]}, tcfg.grad_clip)
    g_v_mix = _clip_block({n: g_v[n] for n in blocks["mix"]}, tcfg.grad_clip)

    if blocks["mix"]:
        store.apply_update({n: -g_v_mix[n] for n in blocks["mix"]},
                           tcfg.lr_mix)
    deltas = {}
    for n in blocks["policy"] + blocks["critic"]:
        deltas[n] = (tcfg.lr_pi * g_pi.get(n, 0.0)
                     - tcfg.lr_v * np.asarray(g_v_theta[n]))
    store.apply_update(deltas, 1.0)

    return {
        "loss_v": loss_v.item(),
        "grad_pi": gradient_norm(g_pi),
        "grad_v": gradient_norm({n: g_v_theta[n] for n in blocks["critic"]}),
        "grad_mix": gradient_norm(g_v_mix),
    }


def evaluate(env: NetworkEnv, policy: GEVDACPolicy, horizon: int,
             rollouts: int, rng: np.random.Generator) -> dict:
    """Deterministic-policy metrics over fresh episodes."""
    rewards, etas, se_out, iot_out = [], [], [], []
    for _ in range(rollouts):
        traj = rollout(env, policy, horizon, rng, deterministic=True)
        rewards.append(np.mean([s.reward for s in traj.steps]))
        etas.append(np.mean([s.eta for s in traj.steps]))
        kind = env.topo.user_kind
        outages = np.stack([s.outage for s in traj.steps])
        se_out.append(outages[:, kind == SE].mean())
        iot_out.append(outages[:, kind != SE].mean())
    return {"reward": float(np.mean(rewards)), "eta": float(np.mean(etas)),
            "outage_se": float(np.mean(se_out)),
            "outage_iot": float(np.mean(iot_out))}


def train(env_factory, tcfg: TrainConfig, pcfg: PolicyConfig | None = None,
          policy: GEVDACPolicy | None = None, on_episode=None):
    """Full training loop; returns (policy, per-episode curve rows).

    ``env_factory(seed)`` builds an environment; training and evaluation use
    separate instances so test metrics never disturb the training stream.
    A non-finite update aborts with a rescue checkpoint in ``/tmp``.
    """
    env = env_factory(tcfg.seed)
    eval_env = env_factory(tcfg.seed + 9999)
    if policy is None:
        policy = policy_for_env(env, pcfg or PolicyConfig(), tcfg.seed)
    horizon = tcfg.horizon or env.config.episode_slots
    rng = np.random.default_rng([tcfg.seed, 2])
    eval_rng = np.random.default_rng([tcfg.seed, 3])
    curves = []
    reward_scale = tcfg.reward_scale
    for episode in range(tcfg.episodes):
        batch = [rollout(env, policy, horizon, rng)
                 for _ in range(tcfg.rollouts)]
        if reward_scale == 0.0:  # freeze a scale from the first batch
            mean_abs = float(np.mean(
                [abs(s.reward) for b in batch for s in b.steps]))
            reward_scale = 1.0 / max(mean_abs, 1e-9)
        try:
            stats = update(policy, batch, tcfg, reward_scale)
        except FloatingPointError as err:
            rescue = f"/tmp/risnoma_diverged_ep{episode}.npz"
            policy.store.save(rescue, extra_meta={"episode": episode})
            raise RuntimeError(
                f"non-finite gradient at episode {episode}; "
                f"checkpoint written to {rescue}") from err
        metrics = evaluate(eval_env, policy, horizon, tcfg.eval_rollouts,
                           eval_rng)
        row = {
            "episode": episode,
            "train_reward": float(np.mean(
                [s.reward for b in batch for s in b.steps])),
            "test_reward": metrics["reward"],
            "eta": metrics["eta"],
            "outage_se": metrics["outage_se"],
            "outage_iot": metrics["outage_iot"],
            "exchange_per_step": float(np.mean(
                [s.exchange for b in batch for s in b.steps])),
            **stats,
        }
        curves.append(row)
        if on_episode is not None:
            on_episode(row, policy, batch)
    return policy, curves
