"""Compiled inner loops (numba)."""

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def energies(configs, n, key_ptr, key_pos, sub_ptr, subs):
    """Sum of grouped lookup tables for each configuration index.

    Group g covers volume positions ``key_pos[key_ptr[g]:key_ptr[g+1]]`` and
    its table is ``subs[sub_ptr[g]:sub_ptr[g+1]]``.
    """
    out = np.zeros(configs.shape[0])
    n_groups = key_ptr.shape[0] - 1
    for i in range(configs.shape[0]):
        c = configs[i]
        e = 0.0
        for g in range(n_groups):
            local = 0
            for j in range(key_ptr[g], key_ptr[g + 1]):
                local = (local << 1) | ((c >> (n - 1 - key_pos[j])) & 1)
            e += subs[sub_ptr[g] + local]
        out[i] = e
    return out


@numba.njit(cache=True, nogil=True)
def local_field(spins, x, term_ptr, coefs, nb_ptr, nb_idx):
    """``g_x = sum_S c_S prod_{i in S, i != x} w_i`` over Walsh terms at site x."""
    g = 0.0
    for t in range(term_ptr[x], term_ptr[x + 1]):
        prod = coefs[t]
        for j in range(nb_ptr[t], nb_ptr[t + 1]):
            prod *= spins[nb_idx[j]]
        g += prod
    return g


@numba.njit(cache=True, nogil=True)
def heat_bath_sweeps(spins, n_sites, uniforms, term_ptr, coefs, nb_ptr, nb_idx,
                     all_ptr, all_coefs, all_idx, record_idx, energy_out, mag_out, record_out):
    """Systematic-scan heat-bath sweeps over sites 0..n_sites-1.

    ``uniforms`` has shape (sweeps, n_sites).  After each sweep the energy
    per site, the mean spin and the spins at ``record_idx`` are written out.
    """
    for s in range(uniforms.shape[0]):
        for x in range(n_sites):
            g = local_field(spins, x, term_ptr, coefs, nb_ptr, nb_idx)
            p_plus = 1.0 / (1.0 + np.exp(2.0 * g))
            spins[x] = 1 if uniforms[s, x] < p_plus else -1
        e = 0.0
        for t in range(all_ptr.shape[0] - 1):
            prod = all_coefs[t]
            for j in range(all_ptr[t], all_ptr[t + 1]):
                prod *= spins[all_idx[j]]
            e += prod
        m = 0.0
        for x in range(n_sites):
            m += spins[x]
        energy_out[s] = e / n_sites
        mag_out[s] = m / n_sites
        for j in range(record_idx.shape[0]):
            record_out[s, j] = spins[record_idx[j]]
