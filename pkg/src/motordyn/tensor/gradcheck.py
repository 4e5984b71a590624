"""Central finite-difference validation of backward passes."""

import numpy as np


def finite_difference_check(layer, x, h=1e-5, cotangent=None):
    """Max relative error between analytic and central-difference gradients.

    The objective is ``sum(forward(x) * cotangent)`` (plain sum of outputs
    when ``cotangent`` is None).  Every parameter entry and every input
    entry is perturbed; the relative error uses the denominator
    ``max(|analytic|, |numeric|, 1e-8)``.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.array(x, dtype=np.float64)
    out = layer.forward(x)
    ct = np.ones_like(out) if cotangent is None else np.asarray(cotangent, dtype=np.float64)
    layer.zero_grad_all()
    dx = layer.backward(ct)
    analytic = [(p, g.copy()) for _, p, g in layer.named_parameters()]

    def objective():
        return float(np.sum(layer.forward(x) * ct))

    worst = 0.0
    targets = analytic + [(x, dx)]
    for arr, grad in targets:
        flat = arr.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = objective()
            flat[i] = orig - h
            f_minus = objective()
            flat[i] = orig
            num = (f_plus - f_minus) / (2.0 * h)
            a = gflat[i]
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
    return worst
