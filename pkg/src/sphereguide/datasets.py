"""Dataset, checkpoint, metrics, and report serialization.

All writers are deterministic: given identical in-memory inputs they emit
byte-identical files.  Datasets are newline-delimited JSON with a header
record; checkpoints are a JSON meta file plus raw little-endian float32
parameter blocks; metrics and reports are plain CSV.
"""
from __future__ import annotations

import csv
import io
import json
import os

import numpy as np

from . import scene as sc
from .rl import Networks, TrainConfig
from .sampler import StateDataset
from .trajopt import TrajectoryDataset, TrajectoryRecord

FORMAT_VERSION = 1
_CHECKPOINT_MAGIC = b"SGCKPT01"

METRICS_COLUMNS = ("step", "block", "alpha", "avg_episode_reward",
                   "success_rate", "critic_loss", "actor_loss")


def _dump_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _config_to_dict(cfg: sc.StaticConfig) -> dict:
    return {
        "s": [float(v) for v in cfg.s],
        "mode": [int(v) for v in cfg.mode],
        "violation": float(cfg.violation),
        "aux": None if cfg.aux is None else [float(v) for v in cfg.aux],
    }


def _config_from_dict(d: dict) -> sc.StaticConfig:
    return sc.StaticConfig(
        s=np.array(d["s"], dtype=float),
        mode=tuple(d["mode"]),
        violation=float(d["violation"]),
        aux=None if d.get("aux") is None else np.array(d["aux"], dtype=float),
    )


# ---------------------------------------------------------------------------
# state datasets

def save_states(path, ds: StateDataset):
    with open(path, "w") as fh:
        fh.write(_dump_line({
            "kind": "states", "version": FORMAT_VERSION,
            "scene_hash": ds.scene_hash, "seed": ds.seed,
            "requested": ds.requested, "attempts": ds.attempts,
            "n_evals": ds.n_evals, "complete": ds.complete,
            "tol_feas": ds.tol_feas,
        }))
        for cfg in ds.samples:
            fh.write(_dump_line(_config_to_dict(cfg)))


def load_states(path) -> StateDataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "states":
            raise ValueError(f"{path} is not a state dataset")
        samples = [_config_from_dict(json.loads(line)) for line in fh
                   if line.strip()]
    return StateDataset(
        samples=samples, scene_hash=header["scene_hash"],
        seed=header["seed"], requested=header["requested"],
        attempts=header["attempts"], n_evals=header["n_evals"],
        complete=header["complete"], tol_feas=header["tol_feas"])


# ---------------------------------------------------------------------------
# trajectory datasets

def save_trajectories(path, du: TrajectoryDataset):
    with open(path, "w") as fh:
        fh.write(_dump_line({
            "kind": "trajectories", "version": FORMAT_VERSION,
            "scene_hash": du.scene_hash, "seed": du.seed,
            "requested": du.requested, "attempts": du.attempts,
            "n_evals": du.n_evals, "complete": du.complete,
            "admit_tol": du.admit_tol,
        }))
        for rec in du.records:
            fh.write(_dump_line({
                "s": _config_to_dict(rec.s),
                "g": _config_to_dict(rec.g),
                "knots": [float(v) for v in rec.knots],
                "path": [[float(v) for v in row] for row in rec.path],
                "terminal_cost": float(rec.terminal_cost),
                "n_evals": int(rec.n_evals),
            }))


def load_trajectories(path) -> TrajectoryDataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "trajectories":
            raise ValueError(f"{path} is not a trajectory dataset")
        records = []
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            records.append(TrajectoryRecord(
                s=_config_from_dict(d["s"]), g=_config_from_dict(d["g"]),
                knots=np.array(d["knots"], dtype=float),
                path=np.array(d["path"], dtype=float),
                terminal_cost=float(d["terminal_cost"]),
                n_evals=int(d["n_evals"])))
    return TrajectoryDataset(
        records=records, scene_hash=header["scene_hash"],
        seed=header["seed"], requested=header["requested"],
        attempts=header["attempts"], n_evals=header["n_evals"],
        complete=header["complete"], admit_tol=header["admit_tol"])


# ---------------------------------------------------------------------------
# behavior-cloning datasets

def save_bc(path, triples):
    with open(path, "w") as fh:
        fh.write(_dump_line({
            "kind": "bc", "version": FORMAT_VERSION, "count": len(triples),
        }))
        for tr in triples:
            fh.write(_dump_line({
                "traj": int(tr.traj), "step": int(tr.step),
                "state": [float(v) for v in tr.state],
                "goal": [float(v) for v in tr.goal],
                "action": [float(v) for v in tr.action],
            }))


def load_bc(path) -> list:
    from .splines import BCTriple
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "bc":
            raise ValueError(f"{path} is not a BC dataset")
        triples = []
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            triples.append(BCTriple(
                traj=d["traj"], step=d["step"],
                state=np.array(d["state"], dtype=float),
                goal=np.array(d["goal"], dtype=float),
                action=np.array(d["action"], dtype=float)))
    return triples


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(out_dir, nets: Networks, cfg: TrainConfig, step: int,
                    seed: int, scene_hash: str, extra: dict = None):
    """Write meta.json + params.bin under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    named = nets.named()
    meta = {
        "kind": "checkpoint", "version": FORMAT_VERSION,
        "step": int(step), "seed": int(seed), "scene_hash": scene_hash,
        "train": {
            "gamma": cfg.gamma, "expl_noise": cfg.expl_noise,
            "target_noise": cfg.target_noise, "noise_clip": cfg.noise_clip,
            "policy_delay": cfg.policy_delay, "batch_size": cfg.batch_size,
            "lr": cfg.lr, "lambda_bc": cfg.lambda_bc,
            "target_every": cfg.target_every,
            "buffer_capacity": cfg.buffer_capacity,
            "hidden": list(cfg.hidden), "z_dim": cfg.z_dim,
            "action_limit": cfg.action_limit,
        },
        "nets": {name: {"sizes": list(net.sizes),
                        "out_tanh": net.out_tanh}
                 for name, net in named.items()},
        "extra": extra or {},
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
    buf = io.BytesIO()
    buf.write(_CHECKPOINT_MAGIC)
    for name in sorted(named):
        net = named[name]
        for arr in net.weights + net.biases:
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(os.path.join(out_dir, "params.bin"), "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(out_dir) -> tuple:
    """Returns (Networks, TrainConfig, meta dict)."""
    with open(os.path.join(out_dir, "meta.json")) as fh:
        meta = json.load(fh)
    if meta.get("kind") != "checkpoint":
        raise ValueError(f"{out_dir} is not a checkpoint directory")
    t = meta["train"]
    cfg = TrainConfig(
        gamma=t["gamma"], expl_noise=t["expl_noise"],
        target_noise=t["target_noise"], noise_clip=t["noise_clip"],
        policy_delay=t["policy_delay"], batch_size=t["batch_size"],
        lr=t["lr"], lambda_bc=t["lambda_bc"], target_every=t["target_every"],
        buffer_capacity=t["buffer_capacity"], hidden=tuple(t["hidden"]),
        z_dim=t["z_dim"], action_limit=t["action_limit"])
    nets = Networks(cfg, seed=meta["seed"])
    named = nets.named()
    with open(os.path.join(out_dir, "params.bin"), "rb") as fh:
        blob = fh.read()
    if blob[:len(_CHECKPOINT_MAGIC)] != _CHECKPOINT_MAGIC:
        raise ValueError("bad checkpoint magic")
    off = len(_CHECKPOINT_MAGIC)
    for name in sorted(named):
        net = named[name]
        want = meta["nets"][name]
        if list(net.sizes) != want["sizes"]:
            raise ValueError(f"net {name} sizes changed")
        for arr in net.weights + net.biases:
            n = arr.size * 4
            arr[...] = np.frombuffer(blob[off:off + n],
                                     dtype="<f4").reshape(arr.shape)
            off += n
    if off != len(blob):
        raise ValueError("checkpoint parameter block size mismatch")
    return nets, cfg, meta


# ---------------------------------------------------------------------------
# metrics and reports

class MetricsWriter:
    """Streaming CSV writer for per-block training metrics."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(METRICS_COLUMNS)
        self._fh.flush()

    def write(self, row: dict):
        self._writer.writerow([repr(row[c]) if isinstance(row[c], float)
                               else row[c] for c in METRICS_COLUMNS])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def save_metrics(path, rows):
    with MetricsWriter(path) as w:
        for row in rows:
            w.write(row)


def load_metrics(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "step": int(rec["step"]), "block": int(rec["block"]),
                "alpha": float(rec["alpha"]),
                "avg_episode_reward": float(rec["avg_episode_reward"]),
                "success_rate": float(rec["success_rate"]),
                "critic_loss": float(rec["critic_loss"]),
                "actor_loss": float(rec["actor_loss"]),
            })
    return rows


def save_report(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "distribution", "episodes", "success_rate",
                    "seed", "outcomes"])
        w.writerow([report.method, report.distribution, report.episodes,
                    repr(report.success_rate), report.seed,
                    "".join(str(o) for o in report.outcomes)])


def load_report(path):
    from .evaluate import EvalReport
    with open(path, newline="") as fh:
        rec = next(csv.DictReader(fh))
    return EvalReport(
        method=rec["method"], distribution=rec["distribution"],
        episodes=int(rec["episodes"]),
        success_rate=float(rec["success_rate"]), seed=int(rec["seed"]),
        outcomes=[int(c) for c in rec["outcomes"]])
