import json
import math

import numpy as np
import pytest

from sphereguide import datasets as dsio
from sphereguide import scene as sc
from sphereguide.evaluate import EvalReport
from sphereguide.rl import Networks, ReplayBuffer, TrainConfig, Trainer
from sphereguide.rng import substream
from sphereguide.splines import compile_bc_dataset


def _bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_states_roundtrip(tmp_path, small_states):
    p = tmp_path / "states.ndjson"
    dsio.save_states(p, small_states)
    loaded = dsio.load_states(p)
    assert loaded.scene_hash == small_states.scene_hash
    assert loaded.seed == small_states.seed
    assert loaded.requested == small_states.requested
    assert loaded.attempts == small_states.attempts
    assert loaded.n_evals == small_states.n_evals
    assert loaded.complete == small_states.complete
    assert loaded.tol_feas == small_states.tol_feas
    assert len(loaded.samples) == len(small_states.samples)
    for a, b in zip(loaded.samples, small_states.samples):
        assert np.array_equal(a.s, b.s)
        assert a.mode == b.mode
        assert a.violation == b.violation
    # a rewrite is byte-identical
    q = tmp_path / "states2.ndjson"
    dsio.save_states(q, loaded)
    assert _bytes(p) == _bytes(q)


def test_states_kind_guard(tmp_path, tiny_du):
    p = tmp_path / "not_states.ndjson"
    dsio.save_trajectories(p, tiny_du)
    with pytest.raises(ValueError):
        dsio.load_states(p)


def test_trajectories_roundtrip(tmp_path, tiny_du):
    p = tmp_path / "du.ndjson"
    dsio.save_trajectories(p, tiny_du)
    loaded = dsio.load_trajectories(p)
    assert loaded.scene_hash == tiny_du.scene_hash
    assert loaded.admit_tol == tiny_du.admit_tol
    assert loaded.complete == tiny_du.complete
    assert len(loaded.records) == len(tiny_du.records)
    for a, b in zip(loaded.records, tiny_du.records):
        assert np.array_equal(a.s.s, b.s.s) and a.s.mode == b.s.mode
        assert np.array_equal(a.g.s, b.g.s)
        assert np.array_equal(a.knots, b.knots)
        assert np.array_equal(a.path, b.path)
        assert a.terminal_cost == b.terminal_cost
        assert a.n_evals == b.n_evals
    q = tmp_path / "du2.ndjson"
    dsio.save_trajectories(q, loaded)
    assert _bytes(p) == _bytes(q)
    with pytest.raises(ValueError):
        dsio.load_bc(p)


def test_bc_roundtrip(tmp_path, tiny_du):
    triples = compile_bc_dataset(tiny_du)
    p = tmp_path / "bc.ndjson"
    dsio.save_bc(p, triples)
    loaded = dsio.load_bc(p)
    assert len(loaded) == len(triples)
    for a, b in zip(loaded, triples):
        assert a.traj == b.traj and a.step == b.step
        assert np.array_equal(a.state, b.state)
        assert np.array_equal(a.goal, b.goal)
        assert np.array_equal(a.action, b.action)
    q = tmp_path / "bc2.ndjson"
    dsio.save_bc(q, loaded)
    assert _bytes(p) == _bytes(q)
    header = json.loads(_bytes(p).decode().splitlines()[0])
    assert header["kind"] == "bc" and header["count"] == len(triples)


def _trained_nets(seed=91):
    cfg = TrainConfig(hidden=(24, 24), z_dim=8, batch_size=16)
    nets = Networks(cfg, seed=seed)
    tr = Trainer(nets, cfg, seed=seed)
    buf = ReplayBuffer(1000)
    rng = substream(seed, "ckpt-fill")
    for _ in range(64):
        buf.add(rng.standard_normal(21), rng.uniform(-0.1, 0.1, 3),
                float(rng.integers(0, 2)), rng.standard_normal(21), False)
    for _ in range(6):
        tr.td_update(buf)
    return nets, cfg


def test_checkpoint_roundtrip(tmp_path):
    nets, cfg = _trained_nets()
    out = tmp_path / "ckpt"
    extra = {"method": "trajSched", "steps": 12}
    dsio.save_checkpoint(out, nets, cfg, step=12, seed=91,
                         scene_hash="abc123", extra=extra)
    loaded, cfg2, meta = dsio.load_checkpoint(out)
    assert meta["step"] == 12 and meta["seed"] == 91
    assert meta["scene_hash"] == "abc123"
    assert meta["extra"] == extra
    assert cfg2 == cfg
    for name, net in nets.named().items():
        assert np.array_equal(net.get_flat(), loaded.named()[name].get_flat())
    obs = substream(92, "obs").standard_normal(21)
    assert np.array_equal(nets.policy(obs), loaded.policy(obs))
    # re-saving what was loaded reproduces both files byte for byte
    out2 = tmp_path / "ckpt2"
    dsio.save_checkpoint(out2, loaded, cfg2, step=meta["step"],
                         seed=meta["seed"], scene_hash=meta["scene_hash"],
                         extra=meta["extra"])
    assert _bytes(out / "meta.json") == _bytes(out2 / "meta.json")
    assert _bytes(out / "params.bin") == _bytes(out2 / "params.bin")


def test_checkpoint_corruption_detected(tmp_path):
    nets, cfg = _trained_nets(seed=93)
    out = tmp_path / "ckpt"
    dsio.save_checkpoint(out, nets, cfg, step=1, seed=93, scene_hash="h")
    blob = _bytes(out / "params.bin")
    with open(out / "params.bin", "wb") as fh:
        fh.write(b"XXXXXXXX" + blob[8:])
    with pytest.raises(ValueError):
        dsio.load_checkpoint(out)
    with open(out / "params.bin", "wb") as fh:
        fh.write(blob[:-4])
    with pytest.raises(ValueError):
        dsio.load_checkpoint(out)
    with open(out / "params.bin", "wb") as fh:
        fh.write(blob)
    meta = json.loads(_bytes(out / "meta.json"))
    meta["nets"]["actor"]["sizes"][1] = 999
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh)
    with pytest.raises(ValueError):
        dsio.load_checkpoint(out)


def test_metrics_roundtrip(tmp_path):
    rows = [
        {"step": 40, "block": 0, "alpha": 1 / 3,
         "avg_episode_reward": 0.25, "success_rate": 0.25,
         "critic_loss": 0.0123456789012345, "actor_loss": math.nan},
        {"step": 81, "block": 1, "alpha": 2 / 3,
         "avg_episode_reward": 1.0, "success_rate": 1.0,
         "critic_loss": 3.7e-11, "actor_loss": -0.5},
    ]
    p = tmp_path / "metrics.csv"
    dsio.save_metrics(p, rows)
    loaded = dsio.load_metrics(p)
    assert len(loaded) == 2
    for a, b in zip(loaded, rows):
        for k in dsio.METRICS_COLUMNS:
            if isinstance(b[k], float) and math.isnan(b[k]):
                assert math.isnan(a[k])
            else:
                assert a[k] == b[k]
    q = tmp_path / "metrics2.csv"
    dsio.save_metrics(q, loaded)
    assert _bytes(p) == _bytes(q)
    header = _bytes(p).decode().splitlines()[0]
    assert header == ",".join(dsio.METRICS_COLUMNS)


def test_metrics_writer_streams(tmp_path):
    p = tmp_path / "stream.csv"
    with dsio.MetricsWriter(p) as w:
        w.write({"step": 1, "block": 0, "alpha": 0.1,
                 "avg_episode_reward": 0.0, "success_rate": 0.0,
                 "critic_loss": 1.0, "actor_loss": math.nan})
        # flushed mid-run: a concurrent reader sees complete rows
        assert len(_bytes(p).decode().splitlines()) == 2


def test_report_roundtrip(tmp_path):
    rep = EvalReport(method="trajSched", distribution="uni", episodes=8,
                     success_rate=0.625, seed=1000,
                     outcomes=[1, 0, 1, 1, 0, 1, 0, 1])
    p = tmp_path / "report.csv"
    dsio.save_report(p, rep)
    loaded = dsio.load_report(p)
    assert loaded == rep
    q = tmp_path / "report2.csv"
    dsio.save_report(q, loaded)
    assert _bytes(p) == _bytes(q)
