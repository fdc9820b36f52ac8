"""Shared test helpers: central finite differences and gradient comparison."""

import numpy as np


def central_diff(f, x, h=1e-6):
    """Numeric d f / d x via central differences, perturbing x in place.

    f is a zero-argument callable that recomputes the scalar output from the
    current contents of x.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + h
        f_plus = f()
        flat[i] = saved - h
        f_minus = f()
        flat[i] = saved
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def sampled_central_diff(f, x, indices, h=1e-6):
    """central_diff restricted to the given flat indices of x."""
    flat = x.reshape(-1)
    out = np.zeros(len(indices), dtype=np.float64)
    for j, i in enumerate(indices):
        saved = flat[i]
        flat[i] = saved + h
        f_plus = f()
        flat[i] = saved - h
        f_minus = f()
        flat[i] = saved
        out[j] = (f_plus - f_minus) / (2.0 * h)
    return out


def assert_grads_close(analytic, numeric, rtol, atol=1e-8, label=""):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    assert analytic.shape == numeric.shape, f"{label}: {analytic.shape} vs {numeric.shape}"
    err = np.abs(analytic - numeric) - (atol + rtol * np.abs(numeric))
    worst = float(err.max()) if err.size else 0.0
    assert worst <= 0.0, f"{label}: gradient mismatch, worst excess {worst:.3e}"
