"""Graph-embedded actors, per-agent critics, and the monotone value mixer.

All agents of one type share parameters.  The actor stacks a message-passing
embedding over the communication graph, a dense/GRU/dense action trunk, and
distribution heads (Gaussian allocation logits for APs, Bernoulli + categorical
element controls for RISs).  Critics read the same embedded state, so the
embedding trunk is shared between policy and value losses; heads are disjoint.

Parameter name prefixes partition the update rules:
  emb.*     embedding nets           (policy + critic gradients)
  act.*     action trunk and heads   (policy gradient)
  critic.*  local/central value nets (critic gradient)
  mix.*     hypernetwork mixer       (its own learning rate)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import ParamStore, Tensor
from .graphs import CommGraph

LOG2PI = float(np.log(2.0 * np.pi))
LOG_STD_OFFSET = -1.0
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0


@dataclass
class PolicyConfig:
    msg_dim: int = 16
    hidden: int = 16
    gru_hidden: int = 32
    critic_hidden: int = 32
    mix_hidden: int = 32
    n_layers: int = 2
    aggregation: str = "mean"
    embed_mode: str = "mpgnn"      # mpgnn | raw | none
    critic_mode: str = "mix"       # mix | central


@dataclass
class ActionSample:
    """Raw per-agent draws; enough to replay exact log-probabilities."""
    kind: str
    gaussian: np.ndarray | None = None     # AP: K+1 raw logits
    on_off: np.ndarray | None = None       # RIS: L binaries
    phase: np.ndarray | None = None        # RIS: L category picks


class GEVDACPolicy:
    """Shared-parameter actor/critic stack over a communication graph."""

    EDGE_KINDS = ("ap_ap", "ap_ris", "ris_ap")

    def __init__(self, dims: dict, counts: dict, pcfg: PolicyConfig, seed: int):
        self.dims = dict(dims)                 # node/edge feature widths
        self.counts = dict(counts)             # num_aps, num_ris, users_per_ap,
        self.pcfg = pcfg                       # ris_elements, n_phase, max_power,
        self.store = ParamStore(seed)          # digest_dim
        self._node_dim = {"ap": dims["ap_node"], "ris": dims["ris_node"]}
        self._sender = {"ap_ap": "ap", "ap_ris": "ap", "ris_ap": "ris"}
        self._build_params()

    # -- eager parameter creation (stable checkpoints, zero-lr identity) -----
    def _build_params(self):
        p, dims = self.pcfg, self.dims
        for kind in self.EDGE_KINDS:
            if p.embed_mode == "raw":
                self.store.param(f"emb.{kind}.raw.w", (dims[kind], p.msg_dim))
                self.store.param(f"emb.{kind}.raw.b", (p.msg_dim,), kind="zeros")
            elif p.embed_mode == "mpgnn":
                for layer in range(1, p.n_layers + 1):
                    z_dim = (self._node_dim[self._sender[kind]]
                             if layer == 1 else p.hidden)
                    self.store.param(f"emb.{kind}.l{layer}.w",
                                     (z_dim + dims[kind], p.msg_dim))
                    self.store.param(f"emb.{kind}.l{layer}.b", (p.msg_dim,),
                                     kind="zeros")
        for u in ("ap", "ris"):
            if p.n_layers == 0:
                self.store.param(f"emb.{u}.proj.w", (self._node_dim[u], p.hidden))
                self.store.param(f"emb.{u}.proj.b", (p.hidden,), kind="zeros")
            else:
                for layer in range(1, p.n_layers + 1):
                    z_dim = self._node_dim[u] if layer == 1 else p.hidden
                    self.store.param(f"emb.{u}.comb.l{layer}.w",
                                     (z_dim + p.msg_dim, p.hidden))
                    self.store.param(f"emb.{u}.comb.l{layer}.b", (p.hidden,),
                                     kind="zeros")
            zt = self.ztilde_dim(u)
            g = p.gru_hidden
            self.store.param(f"act.{u}.pre.w", (zt, g))
            self.store.param(f"act.{u}.pre.b", (g,), kind="zeros")
            for gate in ("zx", "rx", "cx"):
                self.store.param(f"act.{u}.gru.{gate}.w", (g, g))
                self.store.param(f"act.{u}.gru.{gate}.b", (g,), kind="zeros")
            for gate in ("zh", "rh", "ch"):
                self.store.param(f"act.{u}.gru.{gate}.w", (g, g))
                self.store.param(f"act.{u}.gru.{gate}.b", (g,), kind="zeros")
            self.store.param(f"act.{u}.post.w", (g, g))
            self.store.param(f"act.{u}.post.b", (g,), kind="zeros")
            self.store.param(f"critic.{u}.h.w", (zt, p.critic_hidden))
            self.store.param(f"critic.{u}.h.b", (p.critic_hidden,), kind="zeros")
            self.store.param(f"critic.{u}.out.w", (p.critic_hidden, 1))
            self.store.param(f"critic.{u}.out.b", (1,), kind="zeros")
        k = self.counts["users_per_ap"]
        g = p.gru_hidden
        self.store.param("act.ap.mean.w", (g, k + 1))
        self.store.param("act.ap.mean.b", (k + 1,), kind="zeros")
        self.store.param("act.ap.logstd.w", (g, k + 1))
        self.store.param("act.ap.logstd.b", (k + 1,), kind="zeros")
        n_el, n_ph = self.counts["ris_elements"], self.counts["n_phase"]
        self.store.param("act.ris.onoff.w", (g, n_el))
        self.store.param("act.ris.onoff.b", (n_el,), kind="zeros")
        self.store.param("act.ris.phase.w", (g, n_el * n_ph))
        self.store.param("act.ris.phase.b", (n_el * n_ph,), kind="zeros")
        d = self.counts["digest_dim"]
        if p.critic_mode == "mix":
            self.store.param("mix.hw1.w", (d, self._n_agents * p.mix_hidden))
            self.store.param("mix.hw1.b", (self._n_agents * p.mix_hidden,),
                             kind="zeros")
            self.store.param("mix.hb1.w", (d, p.mix_hidden))
            self.store.param("mix.hb1.b", (p.mix_hidden,), kind="zeros")
            self.store.param("mix.hw2.w", (d, p.mix_hidden))
            self.store.param("mix.hw2.b", (p.mix_hidden,), kind="zeros")
            self.store.param("mix.hb2a.w", (d, p.mix_hidden))
            self.store.param("mix.hb2a.b", (p.mix_hidden,), kind="zeros")
            self.store.param("mix.hb2b.w", (p.mix_hidden, 1))
            self.store.param("mix.hb2b.b", (1,), kind="zeros")
        else:
            c = p.critic_hidden
            self.store.param("critic.central.l0.w", (d, c))
            self.store.param("critic.central.l0.b", (c,), kind="zeros")
            self.store.param("critic.central.l1.w", (c, c))
            self.store.param("critic.central.l1.b", (c,), kind="zeros")
            self.store.param("critic.central.l2.w", (c, 1))
            self.store.param("critic.central.l2.b", (1,), kind="zeros")

    @property
    def _n_agents(self) -> int:
        return self.counts["num_aps"] + self.counts["num_ris"]

    def ztilde_dim(self, kind: str) -> int:
        return self._node_dim[kind] + self.pcfg.hidden

    def gru_zero(self) -> np.ndarray:
        return np.zeros(self.pcfg.gru_hidden)

    # -- graph embedding ------------------------------------------------------
    def embed(self, graph: CommGraph) -> list:
        p = self.pcfg
        z = [Tensor(np.asarray(f, dtype=float)) for f in graph.node_feat]
        if p.n_layers == 0:
            z = [nn.dense(self.store, f"emb.{graph.node_kind[i]}.proj", z[i],
                          self._node_dim[graph.node_kind[i]], p.hidden, "tanh")
                 for i in range(graph.num_nodes)]
        raw_msgs = None
        for layer in range(1, p.n_layers + 1):
            inbox = {i: [] for i in range(graph.num_nodes)}
            if p.embed_mode == "mpgnn":
                for (src, dst, kind), feat in zip(graph.edges, graph.edge_feat):
                    x = ad.concat([z[src], Tensor(feat)])
                    z_dim = (self._node_dim[self._sender[kind]]
                             if layer == 1 else p.hidden)
                    msg = nn.dense(self.store, f"emb.{kind}.l{layer}", x,
                                   z_dim + self.dims[kind], p.msg_dim, "tanh")
                    inbox[dst].append(msg)
            elif p.embed_mode == "raw":
                if raw_msgs is None:
                    raw_msgs = []
                    for (src, dst, kind), feat in zip(graph.edges,
                                                      graph.edge_feat):
                        msg = nn.dense(self.store, f"emb.{kind}.raw",
                                       Tensor(feat), self.dims[kind],
                                       p.msg_dim, "tanh")
                        raw_msgs.append((dst, msg))
                for dst, msg in raw_msgs:
                    inbox[dst].append(msg)
            new_z = []
            for i in range(graph.num_nodes):
                agg = nn.aggregate(p.aggregation, inbox[i], p.msg_dim)
                kind = graph.node_kind[i]
                z_dim = self._node_dim[kind] if layer == 1 else p.hidden
                new_z.append(nn.dense(
                    self.store, f"emb.{kind}.comb.l{layer}",
                    ad.concat([z[i], agg]), z_dim + p.msg_dim, p.hidden, "tanh"))
            z = new_z
        return [ad.concat([Tensor(np.asarray(graph.node_feat[i], dtype=float)),
                           z[i]]) for i in range(graph.num_nodes)]

    # -- action trunk and heads -------------------------------------------------
    def _trunk(self, z_tilde, kind: str, gru_state):
        p = self.pcfg
        pre = nn.dense(self.store, f"act.{kind}.pre", z_tilde,
                       self.ztilde_dim(kind), p.gru_hidden, "tanh")
        h = nn.gru_step(self.store, f"act.{kind}.gru", pre,
                        ad.as_tensor(gru_state), p.gru_hidden, p.gru_hidden)
        post = nn.dense(self.store, f"act.{kind}.post", h, p.gru_hidden,
                        p.gru_hidden, "tanh")
        return post, h

    def _ap_heads(self, post):
        g, k = self.pcfg.gru_hidden, self.counts["users_per_ap"]
        mean = nn.dense(self.store, "act.ap.mean", post, g, k + 1)
        log_std = ad.clip(
            nn.dense(self.store, "act.ap.logstd", post, g, k + 1)
            + Tensor(np.full(k + 1, LOG_STD_OFFSET)), LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def _ris_heads(self, post):
        g = self.pcfg.gru_hidden
        n_el, n_ph = self.counts["ris_elements"], self.counts["n_phase"]
        onoff = nn.dense(self.store, "act.ris.onoff", post, g, n_el)
        phase = nn.dense(self.store, "act.ris.phase", post, g,
                         n_el * n_ph).reshape(n_el, n_ph)
        return onoff, phase

    def act(self, z_tilde, kind: str, gru_state, rng: np.random.Generator,
            deterministic: bool = False):
        """Sample (or take the mode of) the local action; returns
        (ActionSample, log-prob Tensor, next GRU state Tensor)."""
        post, h = self._trunk(z_tilde, kind, gru_state)
        if kind == "ap":
            mean, log_std = self._ap_heads(post)
            if deterministic:
                draw = mean.value.copy()
            else:
                draw = mean.value + np.exp(log_std.value) * rng.standard_normal(
                    mean.value.size)
            sample = ActionSample("ap", gaussian=draw)
        else:
            onoff, phase = self._ris_heads(post)
            if deterministic:
                on = (onoff.value > 0).astype(int)
                picks = phase.value.argmax(axis=1)
            else:
                on = (rng.random(onoff.value.size)
                      < _sigmoid(onoff.value)).astype(int)
                picks = np.array([
                    rng.choice(phase.value.shape[1], p=_softmax(row))
                    for row in phase.value])
            sample = ActionSample("ris", on_off=on, phase=picks)
        logp = self._score(sample, post)
        return sample, logp, h

    def log_prob(self, z_tilde, kind: str, gru_state, sample: ActionSample):
        """Replay path: exact log-probability of a stored sample."""
        post, h = self._trunk(z_tilde, kind, gru_state)
        return self._score(sample, post), h

    def _score(self, sample: ActionSample, post) -> Tensor:
        if sample.kind == "ap":
            mean, log_std = self._ap_heads(post)
            diff = Tensor(sample.gaussian) - mean
            zed = diff * ad.exp(-log_std)
            return (ad.square(zed).sum() * (-0.5) - log_std.sum()
                    - Tensor(np.array(0.5 * LOG2PI * sample.gaussian.size)))
        onoff, phase = self._ris_heads(post)
        on = sample.on_off.astype(float)
        bern = (Tensor(on) * (-ad.softplus(-onoff))
                + Tensor(1.0 - on) * (-ad.softplus(onoff))).sum()
        cat = None
        for el, pick in enumerate(sample.phase):
            term = ad.log_softmax(phase[el, :])[int(pick)]
            cat = term if cat is None else cat + term
        return bern + cat

    # -- critics ---------------------------------------------------------------
    def local_value(self, z_tilde, kind: str) -> Tensor:
        p = self.pcfg
        hidden = nn.dense(self.store, f"critic.{kind}.h", z_tilde,
                          self.ztilde_dim(kind), p.critic_hidden, "tanh")
        return nn.dense(self.store, f"critic.{kind}.out", hidden,
                        p.critic_hidden, 1)[0]

    def global_value(self, digest, values) -> Tensor:
        p = self.pcfg
        d = self.counts["digest_dim"]
        if p.critic_mode == "mix":
            return nn.hyper_mixing(self.store, "mix", np.asarray(digest),
                                   values, d, p.mix_hidden)
        return nn.mlp(self.store, "critic.central", np.asarray(digest),
                      [d, p.critic_hidden, p.critic_hidden, 1])[0]

    # -- env action assembly -----------------------------------------------------
    def env_action(self, samples: dict):
        """Map per-agent samples onto (power, on, phase) env arrays."""
        m = self.counts["num_aps"]
        j, n_el = self.counts["num_ris"], self.counts["ris_elements"]
        k, p_max = self.counts["users_per_ap"], self.counts["max_power"]
        power = np.zeros(m * k)
        for i in range(m):
            draw = samples[i].gaussian
            split = _softmax(draw[:k])
            total = p_max * _sigmoid(draw[k])
            power[i * k:(i + 1) * k] = split * total
        on = np.zeros((j, n_el), dtype=int)
        phase = np.zeros((j, n_el), dtype=int)
        for r in range(j):
            s = samples[m + r]
            on[r] = s.on_off
            phase[r] = s.phase
        return power, on, phase

    # -- bookkeeping ---------------------------------------------------------------
    def exchange_volume(self, graph: CommGraph) -> int:
        """Scalars crossing agent boundaries per slot under this mode."""
        p = self.pcfg
        if p.embed_mode == "mpgnn":
            return p.n_layers * len(graph.edges) * p.msg_dim
        if p.embed_mode == "raw":
            return int(sum(f.size for f in graph.edge_feat))
        return 0

    def parameter_blocks(self) -> dict:
        blocks = {"policy": [], "critic": [], "mix": []}
        for name in self.store.names():
            if name.startswith(("emb.", "act.")):
                blocks["policy"].append(name)
            elif name.startswith("critic."):
                blocks["critic"].append(name)
            else:
                blocks["mix"].append(name)
        return blocks


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def policy_for_env(env, pcfg: PolicyConfig, seed: int) -> GEVDACPolicy:
    from .graphs import feature_dims
    cfg = env.config
    dims = feature_dims(cfg, env.topo)
    counts = dict(num_aps=cfg.num_aps, num_ris=cfg.num_ris,
                  users_per_ap=cfg.users_per_ap,
                  ris_elements=cfg.ris_elements,
                  n_phase=2 ** cfg.ris_phase_bits,
                  max_power=cfg.max_tx_power,
                  digest_dim=(cfg.num_aps * dims["ap_node"]
                              + cfg.num_ris * dims["ris_node"]))
    return GEVDACPolicy(dims, counts, pcfg, seed)
