import numpy as np
import pytest

from sphereguide import rl
from sphereguide.rng import substream


def small_cfg(**kw):
    base = dict(hidden=(24, 24), z_dim=8, batch_size=16, target_every=5)
    base.update(kw)
    return rl.TrainConfig(**base)


def fill_buffer(cfg, n=200, seed=303):
    rng = substream(seed, "buffer-fill")
    buf = rl.ReplayBuffer(cfg.buffer_capacity)
    for _ in range(n):
        obs = rng.standard_normal(rl.OBS_DIM)
        act = rng.uniform(-cfg.action_limit, cfg.action_limit, rl.ACT_DIM)
        rew = float(rng.integers(0, 2))
        nxt = rng.standard_normal(rl.OBS_DIM)
        buf.add(obs, act, rew, nxt, terminated=rew > 0)
    return buf


def test_config_validation():
    rl.TrainConfig(gamma=0.0)          # edge of the valid range
    with pytest.raises(ValueError):
        rl.TrainConfig(gamma=1.0)
    with pytest.raises(ValueError):
        rl.TrainConfig(gamma=-0.1)
    with pytest.raises(ValueError):
        rl.TrainConfig(expl_noise=-1e-3)
    with pytest.raises(ValueError):
        rl.TrainConfig(policy_delay=0)
    with pytest.raises(ValueError):
        rl.TrainConfig(lambda_bc=-0.5)


def test_buffer_ring():
    buf = rl.ReplayBuffer(5, obs_dim=2, act_dim=1)
    for k in range(8):
        buf.add([k, k], [k], float(k), [k + 0.5, k], terminated=False)
    assert len(buf) == 5
    # slots now hold 5,6,7,3,4 after wraparound
    assert sorted(buf.obs[:, 0].tolist()) == [3.0, 4.0, 5.0, 6.0, 7.0]
    obs, act, rew, nxt, term = buf.sample(64, substream(1, "s"))
    assert obs.shape == (64, 2) and act.shape == (64, 1)
    assert set(rew.tolist()) <= {3.0, 4.0, 5.0, 6.0, 7.0}
    again = buf.sample(64, substream(1, "s"))
    assert np.array_equal(obs, again[0])


def test_networks_layout_and_policy_bound():
    cfg = small_cfg()
    nets = rl.Networks(cfg, seed=11)
    assert nets.encoder.sizes == (rl.OBS_DIM, 24, 24, 8)
    assert nets.predictor.sizes == (8 + rl.ACT_DIM, 24, 24, 8)
    assert nets.q1.sizes == (8 + rl.ACT_DIM, 24, 24, 1)
    assert nets.actor.sizes == (8, 24, 24, rl.ACT_DIM)
    assert nets.actor.out_tanh and not nets.q1.out_tanh
    named = nets.named()
    assert len(named) == 10
    assert named["q1"] is nets.q1 and named["enc_fixed"] is nets.enc_fixed
    # fresh checkpoints mirror the online nets
    assert np.array_equal(nets.enc_fixed.get_flat(), nets.encoder.get_flat())
    assert np.array_equal(nets.q1_target.get_flat(), nets.q1.get_flat())
    rng = substream(12, "obs")
    for _ in range(20):
        a = nets.policy(10.0 * rng.standard_normal(rl.OBS_DIM))
        assert a.shape == (rl.ACT_DIM,)
        assert np.all(np.abs(a) <= cfg.action_limit)


def test_roll_checkpoints_shifts_encoder_history():
    cfg = small_cfg()
    nets = rl.Networks(cfg, seed=13)
    first = nets.encoder.get_flat().copy()
    nets.encoder.weights[0][0, 0] += 0.25
    second = nets.encoder.get_flat().copy()
    nets.roll_checkpoints()
    assert np.array_equal(nets.enc_fixed.get_flat(), second)
    assert np.array_equal(nets.enc_fixed_prev.get_flat(), first)
    nets.encoder.weights[0][0, 1] -= 0.5
    third = nets.encoder.get_flat().copy()
    nets.roll_checkpoints()
    assert np.array_equal(nets.enc_fixed.get_flat(), third)
    assert np.array_equal(nets.enc_fixed_prev.get_flat(), second)


def test_act_noise_and_bounds():
    cfg = small_cfg()
    nets = rl.Networks(cfg, seed=14)
    tr = rl.Trainer(nets, cfg, seed=14)
    obs = substream(15, "obs").standard_normal(rl.OBS_DIM)
    quiet = tr.act(obs, explore=False)
    assert np.array_equal(quiet, nets.policy(obs).astype(np.float64))
    noisy = [tr.act(obs) for _ in range(50)]
    assert all(np.all(np.abs(a) <= cfg.action_limit) for a in noisy)
    assert not np.array_equal(noisy[0], noisy[1])
    # deterministic noise stream per seed
    tr2 = rl.Trainer(rl.Networks(cfg, seed=14), cfg, seed=14)
    assert np.array_equal(tr2.act(obs), noisy[0])


def test_td_update_losses_match_reference():
    cfg = small_cfg()
    seed = 21
    nets = rl.Networks(cfg, seed=seed)
    tr = rl.Trainer(nets, cfg, seed=seed)
    buf = fill_buffer(cfg)
    snap = {k: v.copy() for k, v in nets.named().items()}

    # replay the exact batch and noise the trainer will draw
    idx = substream(seed, "batch").integers(0, len(buf), cfg.batch_size)
    obs, act = buf.obs[idx], buf.act[idx]
    rew, nxt, term = buf.rew[idx], buf.next_obs[idx], buf.term[idx]
    limit = cfg.action_limit
    noise = substream(seed, "target-noise").normal(
        0.0, cfg.target_noise * limit, (cfg.batch_size, rl.ACT_DIM)
    ).astype(np.float32)
    noise = np.clip(noise, -cfg.noise_clip * limit, cfg.noise_clip * limit)

    z_next = snap["enc_fixed_prev"].forward(nxt)
    a_next = np.clip(snap["actor_target"].forward(z_next) * limit + noise,
                     -limit, limit)
    xq_next = np.concatenate([z_next, a_next], axis=1)
    q_next = np.minimum(snap["q1_target"].forward(xq_next),
                        snap["q2_target"].forward(xq_next))
    y = rew[:, None] + cfg.gamma * (1.0 - term[:, None]) * q_next

    z_fix = snap["enc_fixed"].forward(obs)
    xq = np.concatenate([z_fix, act], axis=1)
    want_critic = 0.0
    for q_net in (snap["q1"], snap["q2"]):
        err = q_net.forward(xq) - y
        want_critic += float((err * err).mean())
    z = snap["encoder"].forward(obs)
    pred = snap["predictor"].forward(np.concatenate([z, act], axis=1))
    err_e = pred - snap["encoder"].forward(nxt)
    want_encoder = float((err_e * err_e).sum(axis=1).mean())

    stats = tr.td_update(buf)
    assert stats.critic_loss == want_critic
    assert stats.encoder_loss == want_encoder
    assert np.isnan(stats.actor_loss)          # policy_delay=2: first is skipped


def test_policy_delay_and_target_roll():
    cfg = small_cfg(policy_delay=2, target_every=5)
    nets = rl.Networks(cfg, seed=22)
    tr = rl.Trainer(nets, cfg, seed=22)
    buf = fill_buffer(cfg)
    init_actor = nets.actor.get_flat().copy()
    init_fixed = nets.enc_fixed.get_flat().copy()
    s1 = tr.td_update(buf)
    assert np.isnan(s1.actor_loss)
    assert np.array_equal(nets.actor.get_flat(), init_actor)
    s2 = tr.td_update(buf)
    assert np.isfinite(s2.actor_loss)
    assert not np.array_equal(nets.actor.get_flat(), init_actor)
    for _ in range(2):
        tr.td_update(buf)
    assert np.array_equal(nets.enc_fixed.get_flat(), init_fixed)
    tr.td_update(buf)   # fifth update rolls the checkpoints
    assert np.array_equal(nets.enc_fixed.get_flat(), nets.encoder.get_flat())
    assert not np.array_equal(nets.enc_fixed.get_flat(), init_fixed)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_gamma_zero_ignores_target_nets():
    # with a one-step horizon the bootstrap term is multiplied by zero, so
    # even wildly wrong target nets cannot change any update
    cfg = small_cfg(gamma=0.0)
    runs = []
    for poison in (False, True):
        nets = rl.Networks(cfg, seed=23)
        if poison:
            # finite garbage: inf/nan from a target net would rightly
            # poison the masked product
            for name in ("q1_target", "q2_target", "actor_target",
                         "enc_fixed_prev"):
                net = nets.named()[name]
                net.set_flat(np.linspace(-1.0, 1.0, net.n_params))
        tr = rl.Trainer(nets, cfg, seed=23)
        buf = fill_buffer(cfg)
        for _ in range(4):
            tr.td_update(buf)
        runs.append(np.concatenate([nets.encoder.get_flat(),
                                    nets.q1.get_flat(),
                                    nets.actor.get_flat()]))
    assert np.array_equal(runs[0], runs[1])


def test_bc_term_inactive_at_zero_lambda():
    cfg = small_cfg(lambda_bc=0.0)
    rng = substream(24, "bc")
    bc_obs = rng.standard_normal((50, rl.OBS_DIM)).astype(np.float32)
    bc_act = rng.uniform(-0.1, 0.1, (50, rl.ACT_DIM)).astype(np.float32)
    outs = []
    for with_data in (False, True):
        nets = rl.Networks(cfg, seed=25)
        tr = rl.Trainer(nets, cfg, seed=25,
                        bc_obs=bc_obs if with_data else None,
                        bc_act=bc_act if with_data else None)
        buf = fill_buffer(cfg)
        traces = [tr.td_update(buf) for _ in range(6)]
        outs.append((
            [t.critic_loss for t in traces],
            [t.actor_loss for t in traces],
            nets.actor.get_flat().copy(),
        ))
    assert outs[0][0] == outs[1][0]
    np.testing.assert_array_equal(outs[0][1], outs[1][1])
    assert np.array_equal(outs[0][2], outs[1][2])


def test_bc_term_changes_actor_when_active():
    rng = substream(26, "bc")
    bc_obs = rng.standard_normal((50, rl.OBS_DIM)).astype(np.float32)
    bc_act = rng.uniform(-0.1, 0.1, (50, rl.ACT_DIM)).astype(np.float32)
    flats = []
    for lam in (0.0, 0.3):
        cfg = small_cfg(lambda_bc=lam)
        nets = rl.Networks(cfg, seed=27)
        tr = rl.Trainer(nets, cfg, seed=27, bc_obs=bc_obs, bc_act=bc_act)
        buf = fill_buffer(cfg)
        for _ in range(4):
            tr.td_update(buf)
        flats.append(nets.actor.get_flat().copy())
    assert not np.array_equal(flats[0], flats[1])


def test_bc_objective_reference():
    cfg = small_cfg()
    nets = rl.Networks(cfg, seed=28)
    rng = substream(28, "bcobj")
    obs = rng.standard_normal((12, rl.OBS_DIM)).astype(np.float32)
    act = rng.uniform(-0.1, 0.1, (12, rl.ACT_DIM)).astype(np.float32)
    z = nets.enc_fixed.forward(obs)
    pi = nets.actor.forward(z) * cfg.action_limit
    q = nets.q1.forward(np.concatenate([z, pi], axis=1))[:, 0]
    reg = ((pi - act) ** 2).sum(axis=1)
    want = float((-q + 0.5 * reg).mean())
    assert rl.bc_actor_objective(nets, obs, act, 0.5) == want


def test_mismatched_bc_arguments():
    cfg = small_cfg()
    nets = rl.Networks(cfg, seed=29)
    with pytest.raises(ValueError):
        rl.Trainer(nets, cfg, seed=29, bc_obs=np.zeros((4, rl.OBS_DIM)))


def test_nonfinite_loss_raises():
    cfg = small_cfg()
    nets = rl.Networks(cfg, seed=30)
    tr = rl.Trainer(nets, cfg, seed=30)
    buf = fill_buffer(cfg)
    nets.q1.weights[0][:] = np.nan
    with pytest.raises(RuntimeError):
        tr.td_update(buf)


def test_training_deterministic():
    cfg = small_cfg()
    flats = []
    for _ in range(2):
        nets = rl.Networks(cfg, seed=31)
        tr = rl.Trainer(nets, cfg, seed=31)
        buf = fill_buffer(cfg)
        stats = [tr.td_update(buf) for _ in range(8)]
        flats.append((np.concatenate([n.get_flat()
                                      for n in nets.named().values()]),
                      [s.critic_loss for s in stats]))
    assert np.array_equal(flats[0][0], flats[1][0])
    assert flats[0][1] == flats[1][1]
