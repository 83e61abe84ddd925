"""Pure-Python fallback for the linear Gaussian recursion."""

import numpy as np


def propagate(Phi, x0, w, stride):
    """Run ``x <- Phi_x x + w_x`` and emit ``z = Phi_z x + w_z`` per step.

    ``Phi`` is (n + r, n): the first n rows update the state, the last r rows
    produce the per-step outputs.  ``w`` is (steps, n + r).  Every
    ``stride``-th pre-step state is stored (stride 0 stores none).
    Returns (z, states, x_final).
    """
    Phi = np.ascontiguousarray(Phi, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n = Phi.shape[1]
    steps = w.shape[0]
    r = Phi.shape[0] - n
    x = np.array(x0, dtype=np.float64)
    z = np.empty((steps, r))
    nstore = (steps + stride - 1) // stride if stride > 0 else 0
    states = np.empty((nstore, n))
    Px = Phi[:n]
    Pz = Phi[n:]
    for k in range(steps):
        if stride > 0 and k % stride == 0:
            states[k // stride] = x
        wk = w[k]
        z[k] = Pz @ x + wk[n:]
        x = Px @ x + wk[:n]
    return z, states, x
