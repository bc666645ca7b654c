import numpy as np
import pytest

from sphereguide import scene, sim, splines, trajopt
from sphereguide.rng import substream


@pytest.fixture(scope="session")
def spec():
    return scene.default_scene()


@pytest.fixture(scope="session")
def small_states(spec):
    """A small shared feasible-state dataset (kept tiny for speed)."""
    from sphereguide import sampler
    ds = sampler.generate_states(spec, 30, seed=101)
    assert ds.complete
    return ds


def make_compilable_record(spec, s, g, rng, params=None):
    """A TrajectoryRecord with real rollout physics but no admission bar.

    Knots are drawn close to the start so the compiled actions stay inside
    the action limit; the terminal cost is whatever the rollout gives.
    """
    if params is None:
        params = sim.SimParams()
    while True:
        knots = np.tile(s.robot_pos, splines.N_KNOTS) \
            + 0.02 * rng.standard_normal(3 * splines.N_KNOTS)
        sp = splines.make_spline(s.robot_pos,
                                 knots.reshape(splines.N_KNOTS, 3))
        if np.abs(sp.win_act).max() <= params.action_limit:
            break
    cost, path = trajopt.trajectory_cost(spec, s, g, knots, params=params)
    return trajopt.TrajectoryRecord(s=s, g=g, knots=knots, path=path,
                                    terminal_cost=cost,
                                    n_evals=1)


@pytest.fixture(scope="session")
def tiny_du(spec, small_states):
    """Two synthetic-but-physical trajectory records for plumbing tests."""
    rng = substream(202, "tiny-du")
    samples = small_states.samples
    records = [
        make_compilable_record(spec, samples[0], samples[1], rng),
        make_compilable_record(spec, samples[2], samples[3], rng),
    ]
    return trajopt.TrajectoryDataset(
        records=records, scene_hash=scene.scene_hash(spec), seed=202,
        requested=2, attempts=2, n_evals=2, complete=True)
