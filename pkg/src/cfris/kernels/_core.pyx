# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-form NMSE evaluation.

Same contract as :func:`cfris.kernels.numpy_backend.nmse_matrix`, written as
per-AP loops over BLAS level-3 products and a Cholesky solve.  All matrices
are kept in C order; the BLAS calls are phrased on the transposed problem so
no copies are needed.
"""

import numpy as np

from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport zgemm
from scipy.linalg.cython_lapack cimport zposv

ctypedef double complex zc


cdef int _core(
    zc[:, :, :, ::1] direct_cov,   # (L, K, M, M)
    zc[:, :, ::1] ap_corr,         # (L, M, M)
    zc[:, :, ::1] surface_cov,     # (L, N, N)
    zc[:, :, ::1] user_cov,        # (K, N, N)
    zc[:, :, ::1] ap_surface_los,  # (L, M, N)
    zc[:, ::1] surface_user_los,   # (K, N)
    long[::1] pilot_of,            # (K,)
    int n_groups,
    double snr,
    int tau_p,
    zc[::1] phasors,               # (N,)
    # workspaces
    zc[:, ::1] w,                  # (K, N)
    zc[:, ::1] group_w,            # (n_groups, N)
    zc[::1] vec,                   # (N,)
    zc[::1] ubar,                  # (M,)
    zc[:, ::1] scaled_los,         # (M, N)
    zc[:, ::1] half,               # (M, N)
    zc[:, :, ::1] scatter,         # (K, M, M)
    zc[:, :, ::1] group_cov,       # (n_groups, M, M)
    double[::1] dvals,             # (n_groups,)
    double[::1] gain,              # (K,)
    zc[::1] obs_gain,              # (K,)
    double[::1] tvals,             # (K,)
    double[::1] mean_power,        # (K,)
    zc[:, ::1] psi,                # (M, M)
    zc[:, ::1] gam,                # (M, M)
    zc[:, ::1] rhs,                # (M, M)
    double[:, ::1] out,            # (L, K)
) noexcept nogil:
    cdef Py_ssize_t L = direct_cov.shape[0]
    cdef Py_ssize_t K = direct_cov.shape[1]
    cdef Py_ssize_t M = direct_cov.shape[2]
    cdef Py_ssize_t N = surface_cov.shape[1]
    cdef Py_ssize_t m, k, g, a, b, i, j
    cdef int im = <int> M, ik = <int> K, in_ = <int> N, info = 0
    cdef char op_n = b'n', op_c = b'c', lo = b'l'
    cdef zc one = 1.0, zero = 0.0
    cdef zc acc, t_acc, c_acc
    cdef double power = snr * tau_p
    cdef double root_power = sqrt(power)
    cdef double tr_rap, tr_scatter, num, den, captured

    # Phase-weighted excitations and their pilot-group sums.
    for k in range(K):
        for i in range(N):
            w[k, i] = phasors[i] * surface_user_los[k, i]
    for g in range(n_groups):
        for i in range(N):
            group_w[g, i] = 0.0
    for k in range(K):
        g = pilot_of[k]
        for i in range(N):
            group_w[g, i] = group_w[g, i] + w[k, i]

    for m in range(L):
        tr_rap = 0.0
        for i in range(M):
            tr_rap += ap_corr[m, i, i].real
        for a in range(M):
            for i in range(N):
                scaled_los[a, i] = ap_surface_los[m, a, i] * phasors[i]

        for k in range(K):
            # vec = surface_cov[m] @ w[k]; quadratic forms against it.
            for i in range(N):
                acc = 0.0
                for j in range(N):
                    acc = acc + surface_cov[m, i, j] * w[k, j]
                vec[i] = acc
            acc = 0.0
            c_acc = 0.0
            g = pilot_of[k]
            for i in range(N):
                acc = acc + vec[i] * w[k, i].conjugate()
                c_acc = c_acc + vec[i] * group_w[g, i].conjugate()
            gain[k] = acc.real
            obs_gain[k] = c_acc

            # trace of the phase-rotated user covariance against the
            # surface-side covariance
            t_acc = 0.0
            for i in range(N):
                for j in range(N):
                    t_acc = t_acc + (
                        surface_cov[m, i, j]
                        * phasors[j]
                        * user_cov[k, j, i]
                        * phasors[i].conjugate()
                    )
            tvals[k] = t_acc.real

            # scatter[k] = scaled_los @ user_cov[k] @ scaled_los^H,
            # computed on the transposed problem so C-order buffers feed
            # Fortran BLAS directly.
            zgemm(
                &op_n, &op_n, &in_, &im, &in_, &one,
                &user_cov[k, 0, 0], &in_, &scaled_los[0, 0], &in_,
                &zero, &half[0, 0], &in_,
            )
            zgemm(
                &op_c, &op_n, &im, &im, &in_, &one,
                &scaled_los[0, 0], &in_, &half[0, 0], &in_,
                &zero, &scatter[k, 0, 0], &im,
            )
            for a in range(M):
                for b in range(M):
                    scatter[k, a, b] = (
                        scatter[k, a, b]
                        + direct_cov[m, k, a, b]
                        + tvals[k] * ap_corr[m, a, b]
                    )

            for a in range(M):
                acc = 0.0
                for i in range(N):
                    acc = acc + ap_surface_los[m, a, i] * w[k, i]
                ubar[a] = acc
            acc = 0.0
            for a in range(M):
                acc = acc + ubar[a] * ubar[a].conjugate()
            mean_power[k] = acc.real

        # Pilot-group aggregates.
        for g in range(n_groups):
            for i in range(N):
                acc = 0.0
                for j in range(N):
                    acc = acc + surface_cov[m, i, j] * group_w[g, j]
                vec[i] = acc
            acc = 0.0
            for i in range(N):
                acc = acc + vec[i] * group_w[g, i].conjugate()
            dvals[g] = acc.real
            for a in range(M):
                for b in range(M):
                    group_cov[g, a, b] = 0.0
        for k in range(K):
            g = pilot_of[k]
            for a in range(M):
                for b in range(M):
                    group_cov[g, a, b] = group_cov[g, a, b] + scatter[k, a, b]

        for k in range(K):
            g = pilot_of[k]
            for a in range(M):
                for b in range(M):
                    psi[a, b] = power * (
                        group_cov[g, a, b] + dvals[g] * ap_corr[m, a, b]
                    )
                    gam[a, b] = root_power * (
                        scatter[k, a, b] + obs_gain[k] * ap_corr[m, a, b]
                    )
                    rhs[a, b] = gam[a, b]
                psi[a, a] = psi[a, a] + 1.0

            # In Fortran order the psi buffer reads as its conjugate and the
            # rhs buffer as gamma^T, so the solve returns conj(psi^-1 gamma^H)
            # and the captured power is sum(gamma * conj(solution)).
            zposv(&lo, &im, &im, &psi[0, 0], &im, &rhs[0, 0], &im, &info)
            if info != 0:
                return info
            captured = 0.0
            for a in range(M):
                for b in range(M):
                    acc = gam[a, b] * rhs[a, b].conjugate()
                    captured += acc.real
            tr_scatter = 0.0
            for a in range(M):
                tr_scatter += scatter[k, a, a].real
            num = tr_scatter + gain[k] * tr_rap - captured
            den = mean_power[k] + tr_scatter + gain[k] * tr_rap
            if den > 0.0:
                out[m, k] = num / den
            else:
                out[m, k] = 0.0
    return 0


def nmse_matrix(
    direct_cov,
    ap_corr,
    surface_cov,
    user_cov,
    ap_surface_los,
    surface_user_los,
    pilot_of,
    n_groups,
    snr,
    tau_p,
    phasors,
):
    """Per-link NMSE of the LMMSE aggregated-channel estimate, shape (L, K)."""
    direct_cov = np.ascontiguousarray(direct_cov, dtype=np.complex128)
    ap_corr = np.ascontiguousarray(ap_corr, dtype=np.complex128)
    surface_cov = np.ascontiguousarray(surface_cov, dtype=np.complex128)
    user_cov = np.ascontiguousarray(user_cov, dtype=np.complex128)
    ap_surface_los = np.ascontiguousarray(ap_surface_los, dtype=np.complex128)
    surface_user_los = np.ascontiguousarray(surface_user_los, dtype=np.complex128)
    pilot_of = np.ascontiguousarray(pilot_of, dtype=np.int64)
    phasors = np.ascontiguousarray(phasors, dtype=np.complex128)

    cdef Py_ssize_t L = direct_cov.shape[0]
    cdef Py_ssize_t K = direct_cov.shape[1]
    cdef Py_ssize_t M = direct_cov.shape[2]
    cdef Py_ssize_t N = surface_cov.shape[1]
    cdef int groups = int(n_groups)

    out = np.zeros((L, K))
    cdef int status
    cdef double snr_c = float(snr)
    cdef int tau_c = int(tau_p)
    cdef zc[:, :, :, ::1] direct_mv = direct_cov
    cdef zc[:, :, ::1] ap_mv = ap_corr
    cdef zc[:, :, ::1] surf_mv = surface_cov
    cdef zc[:, :, ::1] user_mv = user_cov
    cdef zc[:, :, ::1] hlos_mv = ap_surface_los
    cdef zc[:, ::1] zlos_mv = surface_user_los
    cdef long[::1] pilot_mv = pilot_of
    cdef zc[::1] phasor_mv = phasors
    cdef zc[:, ::1] w = np.empty((K, N), dtype=np.complex128)
    cdef zc[:, ::1] group_w = np.empty((groups, N), dtype=np.complex128)
    cdef zc[::1] vec = np.empty(N, dtype=np.complex128)
    cdef zc[::1] ubar = np.empty(M, dtype=np.complex128)
    cdef zc[:, ::1] scaled_los = np.empty((M, N), dtype=np.complex128)
    cdef zc[:, ::1] half = np.empty((M, N), dtype=np.complex128)
    cdef zc[:, :, ::1] scatter = np.empty((K, M, M), dtype=np.complex128)
    cdef zc[:, :, ::1] group_cov = np.empty((groups, M, M), dtype=np.complex128)
    cdef double[::1] dvals = np.empty(groups)
    cdef double[::1] gain = np.empty(K)
    cdef zc[::1] obs_gain = np.empty(K, dtype=np.complex128)
    cdef double[::1] tvals = np.empty(K)
    cdef double[::1] mean_power = np.empty(K)
    cdef zc[:, ::1] psi = np.empty((M, M), dtype=np.complex128)
    cdef zc[:, ::1] gam = np.empty((M, M), dtype=np.complex128)
    cdef zc[:, ::1] rhs = np.empty((M, M), dtype=np.complex128)
    cdef double[:, ::1] out_mv = out

    with nogil:
        status = _core(
            direct_mv, ap_mv, surf_mv, user_mv, hlos_mv, zlos_mv,
            pilot_mv, groups, snr_c, tau_c, phasor_mv,
            w, group_w, vec, ubar, scaled_los, half, scatter, group_cov,
            dvals, gain, obs_gain, tvals, mean_power, psi, gam, rhs, out_mv,
        )
    if status != 0:
        raise RuntimeError(f"observation covariance solve failed (info={status})")
    return out
