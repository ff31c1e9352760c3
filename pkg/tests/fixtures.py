"""Shared perturbation fixtures for the Peierls checks (beta = 1, delta = 0.1)."""

import numpy as np

from gibbslab import interaction as I

DELTA = 0.1


def _l1_shapes(seed):
    rng = np.random.default_rng(seed)
    psi = I.random_interaction(rng, n_shapes=3, max_sites=3, max_diam=2,
                               symmetric=True, l1_connected=True)
    return I.with_norm_abs(psi, DELTA)


def peierls_perturbations():
    """Five spin-flip symmetric, l1-connected finite perturbations with norm <= 0.1."""
    return {
        "zero": I.zero(2),
        "antiferro_nn": I.ising(-DELTA / 4, 2),
        "nn_noise_a": I.symmetric_nn_noise(np.random.default_rng(1), 2, DELTA),
        "nn_noise_b": I.symmetric_nn_noise(np.random.default_rng(2), 2, 0.07),
        "l1_shapes": _l1_shapes(3),
    }
