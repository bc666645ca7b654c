"""Goal-conditioned off-policy actor-critic learner.

A compact TD7-style stack: a state-goal encoder trained with a
next-embedding prediction loss, twin critics and a deterministic actor
operating on embeddings from a fixed encoder checkpoint, clipped-noise
target smoothing, delayed policy updates, and fixed-checkpoint target
refreshes.  An optional behavior-cloning term regularizes the policy
objective.  All randomness flows through named substreams of one seed, so
runs are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import Adam, Mlp
from .rng import substream

OBS_DIM = 21
ACT_DIM = 3


@dataclass
class TrainConfig:
    gamma: float = 0.95
    expl_noise: float = 0.05       # stddev as a fraction of the action limit
    target_noise: float = 0.1
    noise_clip: float = 0.25
    policy_delay: int = 2
    batch_size: int = 256
    lr: float = 3e-4
    lambda_bc: float = 0.0
    target_every: int = 250        # gradient steps between checkpoint rolls
    buffer_capacity: int = 300_000
    hidden: tuple = (256, 256)
    z_dim: int = 64
    action_limit: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if min(self.expl_noise, self.target_noise, self.noise_clip,
               self.lambda_bc) < 0.0:
            raise ValueError("noise scales and lambda_bc must be >= 0")
        if self.policy_delay < 1 or self.target_every < 1:
            raise ValueError("delays must be positive")


class ReplayBuffer:
    """Uniform ring buffer.  ``terminated`` marks true environment
    termination; truncated episodes keep the bootstrap term in TD targets."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM,
                 act_dim: int = ACT_DIM):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.act = np.zeros((capacity, act_dim), dtype=np.float32)
        self.rew = np.zeros(capacity, dtype=np.float32)
        self.next_obs = np.zeros((capacity, obs_dim), dtype=np.float32)
        self.term = np.zeros(capacity, dtype=np.float32)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, act, rew, next_obs, terminated: bool):
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.term[i] = 1.0 if terminated else 0.0
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng) -> tuple:
        idx = rng.integers(0, self.size, batch)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.term[idx])


class Networks:
    """Online nets plus the fixed/target checkpoint copies.

    ``enc_fixed`` embeds inputs for the current critics and actor;
    ``enc_fixed_prev`` (one checkpoint older) embeds inputs for the target
    critics and target actor, so targets always see the embedding they were
    trained under.
    """

    def __init__(self, cfg: TrainConfig, seed: int = 0,
                 obs_dim: int = OBS_DIM, act_dim: int = ACT_DIM):
        h = tuple(cfg.hidden)
        z = cfg.z_dim
        mk = lambda name, sizes, tanh=False: Mlp(
            sizes, out_tanh=tanh, rng=substream(seed, "net-init", name))
        self.encoder = mk("encoder", (obs_dim, *h, z))
        self.predictor = mk("predictor", (z + act_dim, *h, z))
        self.q1 = mk("q1", (z + act_dim, *h, 1))
        self.q2 = mk("q2", (z + act_dim, *h, 1))
        self.actor = mk("actor", (z, *h, act_dim), tanh=True)
        self.enc_fixed = self.encoder.copy()
        self.enc_fixed_prev = self.encoder.copy()
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.actor_target = self.actor.copy()
        self.action_limit = cfg.action_limit
        self.z_dim = z

    def named(self) -> dict:
        """Stable name -> net mapping for checkpoint serialization."""
        return {
            "encoder": self.encoder, "predictor": self.predictor,
            "q1": self.q1, "q2": self.q2, "actor": self.actor,
            "enc_fixed": self.enc_fixed, "enc_fixed_prev": self.enc_fixed_prev,
            "q1_target": self.q1_target, "q2_target": self.q2_target,
            "actor_target": self.actor_target,
        }

    def roll_checkpoints(self):
        self.enc_fixed_prev.assign(self.enc_fixed)
        self.enc_fixed.assign(self.encoder)
        self.q1_target.assign(self.q1)
        self.q2_target.assign(self.q2)
        self.actor_target.assign(self.actor)

    def policy(self, obs) -> np.ndarray:
        """Deterministic action for one observation (no noise)."""
        z = self.enc_fixed.forward(np.asarray(obs, dtype=np.float32))
        return self.actor.forward(z) * self.action_limit


def bc_actor_objective(nets: Networks, bc_obs, bc_act, lambda_bc: float) -> float:
    """Mean of [-Q1(E, pi(E)) + lambda_bc * ||pi - a||^2] over a BC batch."""
    z = nets.enc_fixed.forward(np.asarray(bc_obs, dtype=np.float32))
    pi = nets.actor.forward(z) * nets.action_limit
    q = nets.q1.forward(np.concatenate([z, pi], axis=1))
    reg = ((pi - np.asarray(bc_act, dtype=np.float32)) ** 2).sum(axis=1)
    return float((-q[:, 0] + lambda_bc * reg).mean())


@dataclass
class UpdateStats:
    critic_loss: float
    encoder_loss: float
    actor_loss: float = np.nan    # nan on non-actor steps


class Trainer:
    """One gradient step per call; owns optimizers and noise streams."""

    def __init__(self, nets: Networks, cfg: TrainConfig, seed: int = 0,
                 bc_obs: np.ndarray = None, bc_act: np.ndarray = None):
        self.nets = nets
        self.cfg = cfg
        self.opt_encoder = Adam(nets.encoder, lr=cfg.lr)
        self.opt_predictor = Adam(nets.predictor, lr=cfg.lr)
        self.opt_q1 = Adam(nets.q1, lr=cfg.lr)
        self.opt_q2 = Adam(nets.q2, lr=cfg.lr)
        self.opt_actor = Adam(nets.actor, lr=cfg.lr)
        self.rng_expl = substream(seed, "expl-noise")
        self.rng_target = substream(seed, "target-noise")
        self.rng_batch = substream(seed, "batch")
        self.rng_bc = substream(seed, "bc-batch")
        self.updates = 0
        if (bc_obs is None) != (bc_act is None):
            raise ValueError("bc_obs and bc_act must be given together")
        self.bc_obs = bc_obs
        self.bc_act = bc_act

    def act(self, obs, explore: bool = True) -> np.ndarray:
        a = self.nets.policy(obs).astype(np.float64)
        limit = self.cfg.action_limit
        if explore:
            a = a + self.rng_expl.normal(0.0, self.cfg.expl_noise * limit,
                                         size=a.shape)
        return np.clip(a, -limit, limit)

    def td_update(self, buffer: ReplayBuffer) -> UpdateStats:
        cfg = self.cfg
        nets = self.nets
        limit = cfg.action_limit
        batch = cfg.batch_size
        obs, act, rew, next_obs, term = buffer.sample(batch, self.rng_batch)

        # TD target through the older fixed encoder and target nets
        z_next = nets.enc_fixed_prev.forward(next_obs)
        a_next = nets.actor_target.forward(z_next) * limit
        noise = self.rng_target.normal(0.0, cfg.target_noise * limit,
                                       size=a_next.shape).astype(np.float32)
        noise = np.clip(noise, -cfg.noise_clip * limit, cfg.noise_clip * limit)
        a_next = np.clip(a_next + noise, -limit, limit)
        xq_next = np.concatenate([z_next, a_next], axis=1)
        q_next = np.minimum(nets.q1_target.forward(xq_next),
                            nets.q2_target.forward(xq_next))
        y = rew[:, None] + cfg.gamma * (1.0 - term[:, None]) * q_next

        # critics on the current fixed embedding
        z_fix = nets.enc_fixed.forward(obs)
        xq = np.concatenate([z_fix, act], axis=1)
        critic_loss = 0.0
        for q_net, opt in ((nets.q1, self.opt_q1), (nets.q2, self.opt_q2)):
            q, cache = q_net.forward(xq, want_cache=True)
            err = q - y
            critic_loss += float((err * err).mean())
            grads, _ = q_net.backward(cache, 2.0 * err / batch)
            opt.step(q_net, grads)

        # encoder + predictor: next-embedding regression, stop-gradient target
        z, cache_e = nets.encoder.forward(obs, want_cache=True)
        pred_in = np.concatenate([z, act], axis=1)
        pred, cache_p = nets.predictor.forward(pred_in, want_cache=True)
        z_tgt = nets.encoder.forward(next_obs)
        err_e = pred - z_tgt
        encoder_loss = float((err_e * err_e).sum(axis=1).mean())
        grads_p, g_in = nets.predictor.backward(cache_p, 2.0 * err_e / batch)
        grads_e, _ = nets.encoder.backward(cache_e, g_in[:, :nets.z_dim])
        self.opt_predictor.step(nets.predictor, grads_p)
        self.opt_encoder.step(nets.encoder, grads_e)

        self.updates += 1
        actor_loss = np.nan
        if self.updates % cfg.policy_delay == 0:
            actor_loss = self._actor_update(z_fix)
        if self.updates % cfg.target_every == 0:
            nets.roll_checkpoints()

        if not (np.isfinite(critic_loss) and np.isfinite(encoder_loss)):
            raise RuntimeError(
                f"non-finite loss at update {self.updates}: "
                f"critic={critic_loss} encoder={encoder_loss}")
        return UpdateStats(critic_loss=critic_loss, encoder_loss=encoder_loss,
                           actor_loss=actor_loss)

    def _actor_update(self, z_fix: np.ndarray) -> float:
        cfg = self.cfg
        nets = self.nets
        limit = cfg.action_limit
        batch = z_fix.shape[0]

        pi_raw, cache_a = nets.actor.forward(z_fix, want_cache=True)
        pi = pi_raw * limit
        xq = np.concatenate([z_fix, pi], axis=1)
        q, cache_q = nets.q1.forward(xq, want_cache=True)
        actor_loss = float(-q.mean())
        # dpg gradient through q1 input; q1's own parameters stay untouched
        _, g_xq = nets.q1.backward(cache_q, np.full_like(q, -1.0 / batch))
        g_pi = g_xq[:, nets.z_dim:] * limit

        if cfg.lambda_bc > 0.0 and self.bc_obs is not None:
            idx = self.rng_bc.integers(0, len(self.bc_obs), cfg.batch_size)
            bo = self.bc_obs[idx]
            ba = self.bc_act[idx]
            z_bc = nets.enc_fixed.forward(bo)
            pi_bc_raw, cache_bc = nets.actor.forward(z_bc, want_cache=True)
            diff = pi_bc_raw * limit - ba
            bc_loss = float((diff * diff).sum(axis=1).mean())
            actor_loss += cfg.lambda_bc * bc_loss
            g_bc = cfg.lambda_bc * 2.0 * diff / cfg.batch_size * limit
            grads_bc, _ = nets.actor.backward(cache_bc, g_bc)
            grads_a, _ = nets.actor.backward(cache_a, g_pi)
            grads = ([gw + gv for gw, gv in zip(grads_a[0], grads_bc[0])],
                     [gb + gv for gb, gv in zip(grads_a[1], grads_bc[1])])
        else:
            grads, _ = nets.actor.backward(cache_a, g_pi)
        self.opt_actor.step(nets.actor, grads)
        if not np.isfinite(actor_loss):
            raise RuntimeError(
                f"non-finite actor loss at update {self.updates}")
        return actor_loss
