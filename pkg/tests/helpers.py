"""Shared test utilities: gradient checking against central finite differences."""

import numpy as np

from comgrl import autodiff as ad


def assert_grad_matches(build_loss, arrays, rtol=1e-4, atol=1e-8, h=1e-5):
    """Compare autodiff gradients of a scalar loss with finite differences.

    ``build_loss`` maps freshly built tensors (one per input array) to a
    scalar Tensor; it must be deterministic so repeated evaluations during
    differencing see the same function.
    """
    tensors = [ad.parameter(np.asarray(a, dtype=np.float64).copy()) for a in arrays]
    loss = build_loss(*tensors)
    loss.backward()
    for k in range(len(arrays)):
        def value_at(x, k=k):
            fresh = [
                ad.parameter(x.copy() if i == k else t.values.copy())
                for i, t in enumerate(tensors)
            ]
            return build_loss(*fresh).item()

        fd = ad.finite_difference_grad(value_at, tensors[k].values.copy(), h)
        assert tensors[k].grad is not None, f"input {k} received no gradient"
        np.testing.assert_allclose(tensors[k].grad, fd, rtol=rtol, atol=atol,
                                   err_msg=f"gradient mismatch for input {k}")


def random_projection_loss(op):
    """Wrap an op into a scalar loss via a fixed random projection of its output."""
    rng = np.random.default_rng(1234)
    cache = {}

    def build(*tensors):
        out = op(*tensors)
        if "r" not in cache:
            cache["r"] = rng.standard_normal(out.shape)
        return ad.sum_all(ad.mul(out, ad.constant(cache["r"])))

    return build
