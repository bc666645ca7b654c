import numpy as np
import pytest

from sphereguide import nets
from sphereguide.rng import substream


def test_elu_reference():
    z = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    a = nets.elu(z)
    assert np.allclose(a[z > 0], z[z > 0])
    assert np.allclose(a[z <= 0], np.exp(z[z <= 0]) - 1.0)
    g = nets.elu_grad(z, a)
    assert np.allclose(g[z > 0], 1.0)
    assert np.allclose(g[z <= 0], np.exp(z[z <= 0]))


def test_init_bounds_and_determinism():
    net = nets.Mlp((10, 20, 3), seed=5)
    assert [w.shape for w in net.weights] == [(10, 20), (20, 3)]
    assert [b.shape for b in net.biases] == [(20,), (3,)]
    for fan_in, w, b in zip((10, 20), net.weights, net.biases):
        bound = 1.0 / np.sqrt(fan_in)
        assert np.max(np.abs(w)) <= bound and np.max(np.abs(b)) <= bound
    again = nets.Mlp((10, 20, 3), seed=5)
    assert np.array_equal(net.get_flat(), again.get_flat())
    other = nets.Mlp((10, 20, 3), seed=6)
    assert not np.array_equal(net.get_flat(), other.get_flat())


def test_bad_sizes():
    with pytest.raises(ValueError):
        nets.Mlp((4,))
    with pytest.raises(ValueError):
        nets.Mlp((4, 0, 2))


def test_forward_single_matches_batch():
    net = nets.Mlp((6, 9, 2), seed=1, dtype=np.float64)
    rng = substream(71, "fwd")
    x = rng.standard_normal((5, 6))
    batch = net.forward(x)
    assert batch.shape == (5, 2)
    for i in range(5):
        single = net.forward(x[i])
        assert single.shape == (2,)
        # batched and single-row matmuls may take different BLAS paths
        assert np.allclose(single, batch[i], rtol=1e-12, atol=1e-14)


def test_tanh_output_bounded():
    net = nets.Mlp((4, 16, 3), out_tanh=True, seed=2, dtype=np.float64)
    rng = substream(71, "tanh")
    y = net.forward(10.0 * rng.standard_normal((50, 4)))
    assert np.all(np.abs(y) < 1.0)


def _gradcheck(out_tanh):
    rng = substream(71, "gradcheck", int(out_tanh))
    net = nets.Mlp((5, 8, 7, 2), out_tanh=out_tanh, seed=3, dtype=np.float64)
    x = rng.standard_normal((4, 5))
    target = rng.standard_normal((4, 2))

    def loss_at(flat):
        net.set_flat(flat)
        y = net.forward(x)
        return 0.5 * float(np.sum((y - target) ** 2))

    base = net.get_flat().copy()
    y, cache = net.forward(x, want_cache=True)
    (d_w, d_b), d_x = net.backward(cache, y - target)
    analytic = np.concatenate([g.ravel() for g in d_w]
                              + [g.ravel() for g in d_b])
    eps = 1e-6
    fd = np.empty_like(base)
    for k in range(base.size):
        up = base.copy(); up[k] += eps
        dn = base.copy(); dn[k] -= eps
        fd[k] = (loss_at(up) - loss_at(dn)) / (2 * eps)
    net.set_flat(base)
    assert np.allclose(fd, analytic, rtol=3e-6, atol=3e-6)

    # input gradient against finite differences as well
    fd_x = np.empty_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            up = x.copy(); up[i, j] += eps
            dn = x.copy(); dn[i, j] -= eps
            up_l = 0.5 * float(np.sum((net.forward(up) - target) ** 2))
            dn_l = 0.5 * float(np.sum((net.forward(dn) - target) ** 2))
            fd_x[i, j] = (up_l - dn_l) / (2 * eps)
    assert np.allclose(fd_x, d_x, rtol=3e-6, atol=3e-6)


def test_gradcheck_linear_head():
    _gradcheck(out_tanh=False)


def test_gradcheck_tanh_head():
    _gradcheck(out_tanh=True)


def test_flat_roundtrip_copy_assign():
    net = nets.Mlp((3, 5, 2), seed=4, dtype=np.float64)
    flat = net.get_flat()
    assert flat.size == net.n_params == 3 * 5 + 5 + 5 * 2 + 2
    dup = net.copy()
    dup.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != dup.weights[0][0, 0]
    net.set_flat(flat)
    assert np.array_equal(net.get_flat(), flat)
    with pytest.raises(ValueError):
        net.set_flat(flat[:-1])
    other = nets.Mlp((3, 5, 2), seed=9, dtype=np.float64)
    other.assign(net)
    assert np.array_equal(other.get_flat(), flat)


def test_adam_matches_reference():
    rng = substream(71, "adam")
    net = nets.Mlp((4, 6, 2), seed=8, dtype=np.float64)
    opt = nets.Adam(net, lr=1e-2)
    params = [p.copy() for p in net.weights + net.biases]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, eps = opt.beta1, opt.beta2, opt.eps
    for t in range(1, 6):
        grads_w = [rng.standard_normal(w.shape) for w in net.weights]
        grads_b = [rng.standard_normal(b.shape) for b in net.biases]
        opt.step(net, (grads_w, grads_b))
        scale = opt.lr * np.sqrt(1.0 - b2 ** t) / (1.0 - b1 ** t)
        for i, g in enumerate(grads_w + grads_b):
            m[i] = b1 * m[i] + (1.0 - b1) * g
            v[i] = b2 * v[i] + (1.0 - b2) * (g * g)
            params[i] = params[i] - scale * m[i] / (np.sqrt(v[i]) + eps)
        live = net.weights + net.biases
        for ref, cur in zip(params, live):
            assert np.allclose(ref, cur, rtol=0, atol=1e-14)


def test_adam_trains_regression():
    rng = substream(71, "train")
    net = nets.Mlp((3, 32, 1), seed=10, dtype=np.float64)
    opt = nets.Adam(net, lr=1e-2)
    x = rng.standard_normal((64, 3))
    target = np.sin(x.sum(axis=1, keepdims=True))

    def loss():
        return float(np.mean((net.forward(x) - target) ** 2))

    first = loss()
    for _ in range(800):
        y, cache = net.forward(x, want_cache=True)
        grads, _ = net.backward(cache, (y - target) * (2.0 / x.shape[0]))
        opt.step(net, grads)
    assert loss() < first / 10.0
