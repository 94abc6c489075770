"""Policy architectures: CASH and the shared/individual baselines.

All variants share the same skeleton: a linear embedding with ReLU, a GRU
over time, and a linear decoder head. They differ in how capability
information enters:

  cash     encoder sees the raw observation; a hypernetwork pair (weight
           head + bias head) conditioned on [obs, ego caps, teammate caps]
           emits the decoder parameters per robot per timestep
  rnn_exp  capabilities appended to the encoder input, learned decoder
  rnn_imp  observation only
  rnn_id   observation plus a one-hot agent id
  indv     one disjoint parameter set per agent slot, observation only

Trainers only call ``step``/``forward_team``, so they are
architecture-agnostic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .nn import ParamStore, Tensor
from .nn import tensor as T
from .nn.layers import GRUCell, LayerNormParams, Linear
from .nn.tensor import DTYPE, ShapeError

ARCH_KINDS = ("cash", "rnn_imp", "rnn_exp", "rnn_id", "indv")


class ConfigError(ValueError):
    pass


@dataclass
class ArchConfig:
    kind: str
    obs_dim: int
    action_count: int
    n_agents: int
    cap_dim: int
    rnn_width: int
    hypernet_width: Optional[int] = None
    decoder_layers: int = 1
    hypernet_layernorm: bool = True

    def __post_init__(self):
        if self.kind not in ARCH_KINDS:
            raise ConfigError(f"unknown arch kind: {self.kind!r}")
        if self.decoder_layers not in (1, 2):
            raise ConfigError("decoder_layers must be 1 or 2")
        if self.kind == "cash":
            if self.hypernet_width is None:
                raise ConfigError("cash requires hypernet_width")
        elif self.hypernet_width is not None:
            raise ConfigError(f"hypernet_width is only valid for cash, not {self.kind}")

    @property
    def encoder_input_dim(self) -> int:
        if self.kind == "rnn_exp":
            return self.obs_dim + self.n_agents * self.cap_dim
        if self.kind == "rnn_id":
            return self.obs_dim + self.n_agents
        return self.obs_dim

    @property
    def hyper_input_dim(self) -> int:
        return self.obs_dim + self.n_agents * self.cap_dim

    def decoder_dims(self):
        """(d_in, d_out) per decoder layer."""
        h, a = self.rnn_width, self.action_count
        if self.decoder_layers == 1:
            return [(h, a)]
        return [(h, h), (h, a)]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "obs_dim": self.obs_dim,
            "action_count": self.action_count, "n_agents": self.n_agents,
            "cap_dim": self.cap_dim, "rnn_width": self.rnn_width,
            "hypernet_width": self.hypernet_width,
            "decoder_layers": self.decoder_layers,
            "hypernet_layernorm": self.hypernet_layernorm,
        }

    @staticmethod
    def from_dict(d: dict) -> "ArchConfig":
        return ArchConfig(**d)


def build_hyper_input(obs: np.ndarray, cap_self: np.ndarray,
                      team: np.ndarray, i: int) -> np.ndarray:
    """[obs | ego caps | teammate caps in ascending agent order, skipping i]."""
    team = np.asarray(team, dtype=DTYPE)
    cap_self = np.asarray(cap_self, dtype=DTYPE)
    if team.shape[1] != cap_self.shape[0]:
        raise ShapeError(
            f"capability dim mismatch: team {team.shape[1]} vs ego {cap_self.shape[0]}"
        )
    if not 0 <= i < team.shape[0]:
        raise IndexError(f"agent index {i} outside team of {team.shape[0]}")
    others = np.delete(team, i, axis=0).reshape(-1)
    return np.concatenate([np.asarray(obs, dtype=DTYPE), cap_self, others])


def teammate_caps(team: np.ndarray, i: int) -> np.ndarray:
    """Flattened capabilities of everyone but agent i, ascending index."""
    return np.delete(np.asarray(team, dtype=DTYPE), i, axis=0).reshape(-1)


def count_params(cfg: ArchConfig) -> int:
    """Closed-form trainable parameter count (matches the built store)."""
    h = cfg.rnn_width
    enc = cfg.encoder_input_dim * h + h + 3 * (h * h + h * h + h)
    dec_dims = cfg.decoder_dims()
    if cfg.kind == "cash":
        w = cfg.hypernet_width
        hin = cfg.hyper_input_dim
        total = enc
        for d_in, d_out in dec_dims:
            trunk = hin * w + w + w * w + w
            total += trunk + w * (d_in * d_out) + d_in * d_out   # weight head
            total += trunk + w * d_out + d_out                   # bias head
            if cfg.hypernet_layernorm:
                total += 4 * 2 * w  # two affine norms per head
        return total
    per_agent = enc + sum(i * o + o for i, o in dec_dims)
    if cfg.kind == "indv":
        return cfg.n_agents * per_agent
    return per_agent


class _HyperHead:
    """4-layer MLP (two hidden layers of hypernet_width) emitting a flat
    parameter block; optional LayerNorm before each ReLU."""

    def __init__(self, store: ParamStore, prefix: str, d_in: int, width: int,
                 d_out: int, final_scale: float, use_ln: bool,
                 rng: np.random.Generator):
        self.l0 = Linear(store, f"{prefix}.0", d_in, width, rng)
        self.l1 = Linear(store, f"{prefix}.1", width, width, rng)
        self.l2 = Linear(store, f"{prefix}.2", width, d_out, rng, scale=final_scale)
        self.ln0 = LayerNormParams(store, f"{prefix}.ln0", width) if use_ln else None
        self.ln1 = LayerNormParams(store, f"{prefix}.ln1", width) if use_ln else None

    def __call__(self, x: Tensor) -> Tensor:
        x = self.l0(x)
        if self.ln0 is not None:
            x = self.ln0(x)
        x = T.relu(x)
        x = self.l1(x)
        if self.ln1 is not None:
            x = self.ln1(x)
        x = T.relu(x)
        return self.l2(x)


class _AgentNet:
    """Encoder + decoder parameters for one parameter set."""

    def __init__(self, store: ParamStore, prefix: str, cfg: ArchConfig,
                 rng: np.random.Generator):
        self.cfg = cfg
        self.fc = Linear(store, f"{prefix}.enc.fc", cfg.encoder_input_dim,
                         cfg.rnn_width, rng)
        self.gru = GRUCell(store, f"{prefix}.enc.gru", cfg.rnn_width,
                           cfg.rnn_width, rng)
        self.dec = None
        self.heads = None
        if cfg.kind == "cash":
            self.heads = []
            for li, (d_in, d_out) in enumerate(cfg.decoder_dims()):
                wh = _HyperHead(store, f"{prefix}.hyper.{li}.w",
                                cfg.hyper_input_dim, cfg.hypernet_width,
                                d_in * d_out, 0.2, cfg.hypernet_layernorm, rng)
                bh = _HyperHead(store, f"{prefix}.hyper.{li}.b",
                                cfg.hyper_input_dim, cfg.hypernet_width,
                                d_out, 0.0, cfg.hypernet_layernorm, rng)
                self.heads.append((wh, bh, d_in, d_out))
        else:
            self.dec = [Linear(store, f"{prefix}.dec.{li}", d_in, d_out, rng)
                        for li, (d_in, d_out) in enumerate(cfg.decoder_dims())]

    def encode(self, enc_in: Tensor, hidden: Tensor) -> Tensor:
        z = T.relu(self.fc(enc_in))
        return self.gru(z, hidden)

    def decode(self, z: Tensor, hyper_in: Optional[Tensor]) -> Tensor:
        if self.heads is None:
            out = z
            for li, layer in enumerate(self.dec):
                if li > 0:
                    out = T.relu(out)
                out = layer(out)
            return out
        out = z
        for li, (wh, bh, d_in, d_out) in enumerate(self.heads):
            if li > 0:
                out = T.relu(out)
            w_flat = wh(hyper_in)
            w = T.reshape(w_flat, (w_flat.data.shape[0], d_in, d_out))
            b = bh(hyper_in)
            out = T.add(T.bmm(out, w), b)
        return out


def hyper_generate(net: "Policy", hyper_in: Tensor, layer: int = 0):
    """Generated decoder parameters for one layer: (W [B,in,out], b [B,out])."""
    if net.cfg.kind != "cash":
        raise ConfigError("hyper_generate requires a cash architecture")
    wh, bh, d_in, d_out = net._nets[0].heads[layer]
    w_flat = wh(hyper_in)
    if w_flat.data.shape[-1] != d_in * d_out:
        raise ConfigError(
            f"weight head emits {w_flat.data.shape[-1]} values, "
            f"target shape ({d_in}, {d_out}) needs {d_in * d_out}"
        )
    w = T.reshape(w_flat, (w_flat.data.shape[0], d_in, d_out))
    return w, bh(hyper_in)


class Policy:
    """A policy network instance for one architecture configuration."""

    def __init__(self, cfg: ArchConfig, rng: np.random.Generator,
                 store: Optional[ParamStore] = None):
        self.cfg = cfg
        self.params = ParamStore() if store is None else store
        if cfg.kind == "indv":
            self._nets = [_AgentNet(self.params, f"agent{i}", cfg, rng)
                          for i in range(cfg.n_agents)]
        else:
            self._nets = [_AgentNet(self.params, "net", cfg, rng)]

    def init_hidden(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, self.cfg.rnn_width), dtype=DTYPE))

    def _encoder_input(self, obs, cap_self, cap_team, agent_idx) -> Tensor:
        cfg = self.cfg
        if cfg.kind == "rnn_exp":
            return Tensor(np.concatenate([obs, cap_self, cap_team], axis=-1))
        if cfg.kind == "rnn_id":
            onehot = np.zeros((obs.shape[0], cfg.n_agents), dtype=DTYPE)
            onehot[np.arange(obs.shape[0]), agent_idx] = 1.0
            return Tensor(np.concatenate([obs, onehot], axis=-1))
        return Tensor(obs)

    def step(self, obs: np.ndarray, cap_self: np.ndarray, cap_team: np.ndarray,
             agent_idx: np.ndarray, hidden: Tensor):
        """One timestep for a batch of rows.

        obs [B, obs_dim], cap_self [B, m], cap_team [B, (n-1)m],
        agent_idx [B] int, hidden [B, rnn_width].
        Returns (outputs [B, action_count], new_hidden [B, rnn_width]).
        Outputs are Q-values for value-based training and logits for
        policy-gradient / imitation training.
        """
        obs = np.asarray(obs, dtype=DTYPE)
        if hidden.data.shape[0] != obs.shape[0]:
            raise ShapeError(
                f"hidden batch {hidden.data.shape[0]} != obs batch {obs.shape[0]}"
            )
        cfg = self.cfg
        if cfg.kind == "indv":
            return self._step_indv(obs, agent_idx, hidden)
        net = self._nets[0]
        enc_in = self._encoder_input(obs, cap_self, cap_team, agent_idx)
        h_new = net.encode(enc_in, hidden)
        hyper_in = None
        if cfg.kind == "cash":
            hyper_in = Tensor(np.concatenate([obs, cap_self, cap_team], axis=-1))
        out = net.decode(h_new, hyper_in)
        return out, h_new

    def _step_indv(self, obs, agent_idx, hidden):
        agent_idx = np.asarray(agent_idx)
        pieces_out, pieces_h, orders = [], [], []
        for i in range(self.cfg.n_agents):
            rows = np.flatnonzero(agent_idx == i)
            if rows.size == 0:
                continue
            net = self._nets[i]
            h_new = net.encode(Tensor(obs[rows]), T.take_rows(hidden, rows))
            pieces_out.append(net.decode(h_new, None))
            pieces_h.append(h_new)
            orders.append(rows)
        order = np.concatenate(orders)
        inverse = np.argsort(order, kind="stable")
        out = T.take_rows(T.concat(pieces_out, axis=0), inverse)
        h = T.take_rows(T.concat(pieces_h, axis=0), inverse)
        return out, h

    def forward_team(self, obs: np.ndarray, team: np.ndarray, hidden: Tensor):
        """Forward one timestep for a whole team.

        obs [n, obs_dim], team [n, cap_dim]; returns ([n, action_count], h').
        """
        team = np.asarray(team, dtype=DTYPE)
        n = team.shape[0]
        if obs.shape[0] != n:
            raise ShapeError(f"{obs.shape[0]} observations for a team of {n}")
        cap_team = np.stack([teammate_caps(team, i) for i in range(n)])
        return self.step(obs, team, cap_team, np.arange(n), hidden)
