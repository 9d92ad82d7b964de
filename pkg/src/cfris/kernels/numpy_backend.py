"""Vectorized closed-form NMSE evaluation over all AP-user links.

This is the portable backend.  It computes exactly the same quantities as
the per-link path in :mod:`cfris.estimator` but batches every contraction
across APs and users, replacing the diagonal phase matrix with elementwise
scalings.
"""

from __future__ import annotations

import numpy as np


def nmse_matrix(
    direct_cov: np.ndarray,
    ap_corr: np.ndarray,
    surface_cov: np.ndarray,
    user_cov: np.ndarray,
    ap_surface_los: np.ndarray,
    surface_user_los: np.ndarray,
    pilot_of: np.ndarray,
    n_groups: int,
    snr: float,
    tau_p: int,
    phasors: np.ndarray,
) -> np.ndarray:
    """Per-link NMSE of the LMMSE aggregated-channel estimate, shape (L, K)."""
    L, K, M, _ = direct_cov.shape
    v = phasors

    # Phase-weighted deterministic excitations and their pilot-group sums.
    w = v[None, :] * surface_user_los  # (K, N)
    group_sum = np.zeros((n_groups, w.shape[1]), dtype=complex)
    np.add.at(group_sum, pilot_of, w)

    # Quadratic forms in the surface-side covariance.
    rw = np.einsum("lnp,kp->lkn", surface_cov, w)  # (L, K, N)
    rs = np.einsum("lnp,gp->lgn", surface_cov, group_sum)  # (L, n_groups, N)
    gain = np.einsum("kn,lkn->lk", np.conj(w), rw).real
    cross_gain = np.einsum("gn,lgn->lg", np.conj(group_sum), rs).real
    obs_gain = np.einsum("kn,lkn->lk", np.conj(group_sum)[pilot_of], rw)

    reflected = v[None, :, None] * user_cov * np.conj(v)[None, None, :]  # (K, N, N)
    trace_part = np.einsum("lnp,kpn->lk", surface_cov, reflected).real

    scaled_los = ap_surface_los * v[None, None, :]  # (L, M, N)
    half = np.einsum("lmn,knp->lkmp", scaled_los, user_cov)
    los_part = np.einsum("lkmp,lqp->lkmq", half, np.conj(scaled_los))

    mean = np.einsum("lmn,kn->lkm", ap_surface_los, w)
    mean_power = np.einsum("lkm,lkm->lk", mean, np.conj(mean)).real

    rap = ap_corr[:, None]  # broadcast over users
    scatter_cov = direct_cov + los_part + trace_part[..., None, None] * rap

    group_cov = np.zeros((L, n_groups, M, M), dtype=complex)
    for g in range(n_groups):
        members = np.flatnonzero(pilot_of == g)
        if members.size:
            group_cov[:, g] = scatter_cov[:, members].sum(axis=1)

    power = snr * tau_p
    obs_cov = power * (group_cov + cross_gain[..., None, None] * rap)
    obs_cov[..., np.arange(M), np.arange(M)] += 1.0
    obs_cross = np.sqrt(power) * (scatter_cov + obs_gain[..., None, None] * rap)

    filt = np.linalg.solve(
        obs_cov[:, pilot_of], np.conj(np.swapaxes(obs_cross, -1, -2))
    )
    captured = np.einsum("lkmq,lkqm->lk", obs_cross, filt).real

    tr_scatter = np.einsum("lkmm->lk", scatter_cov).real
    tr_rap = np.einsum("lmm->l", ap_corr).real
    num = tr_scatter + gain * tr_rap[:, None] - captured
    den = mean_power + tr_scatter + gain * tr_rap[:, None]
    out = np.zeros((L, K))
    np.divide(num, den, out=out, where=den > 0)
    return out
