import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def finite_diff_check(make_loss, params, step=1e-5, rel_tol=1e-4,
                      max_entries=8, rng=None):
    """Compare tape gradients with central finite differences.

    `make_loss` rebuilds the graph from the current parameter values and
    returns (tape, scalar_loss).  A subset of entries per parameter is
    perturbed; both sides must agree to `rel_tol` relative error.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.grad[...] = 0.0
    tape, loss = make_loss()
    tape.backward(loss)
    analytic = {p.name: p.grad.copy() for p in params}
    for p in params:
        flat = p.value.ravel()
        n = flat.size
        if n > max_entries:
            idxs = rng.choice(n, size=max_entries, replace=False)
        else:
            idxs = np.arange(n)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(make_loss()[1].value)
            flat[i] = orig - step
            f_minus = float(make_loss()[1].value)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            an = analytic[p.name].ravel()[i]
            scale = max(abs(fd), abs(an))
            if scale < 1e-6:
                continue
            err = abs(fd - an) / scale
            assert err < rel_tol, (
                f"{p.name}[{i}]: analytic {an:.8g} vs fd {fd:.8g} (rel {err:.3g})"
            )
