"""Independent numerical oracles shared by the module and acceptance tests."""
import numpy as np

from adhocgrid.potentials import SystemState


def fd_gradient(f, x):
    """Central differences with step 1e-6 * max(1, |x_j|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        h = 1e-6 * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (f(xp) - f(xm)) / (2 * h)
    return g


def fd_hessian(grad, x):
    x = np.asarray(x, dtype=float)
    H = np.empty((x.size, x.size))
    for j in range(x.size):
        h = 1e-6 * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        H[:, j] = (grad(xp) - grad(xm)) / (2 * h)
    return 0.5 * (H + H.T)


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b)) / max(float(np.max(np.abs(b))), 1e-300))


def random_state(graph, rng, v_ref=48.0):
    return SystemState(
        i=rng.normal(0.0, 2.0, graph.m),
        v=rng.uniform(0.8 * v_ref, 1.05 * v_ref, graph.n),
        u=rng.uniform(0.95 * v_ref, 1.05 * v_ref, graph.n_s),
    )
