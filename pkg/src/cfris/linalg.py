"""Small dense-linear-algebra helpers for covariance handling.

Everything here operates on (stacks of) square complex matrices where the
last two axes are the matrix axes.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError

HERMITIAN_ATOL = 1e-12
PSD_EIG_RTOL = 1e-9


def hermitize(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (a + a^H) / 2 of a stack of matrices.

    Used to scrub the tiny asymmetries that accumulate when covariances are
    assembled from products of square roots.
    """
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def check_covariance(a: np.ndarray, name: str = "matrix") -> None:
    """Validate that ``a`` is Hermitian and PSD up to numerical tolerance.

    Raises:
        NumericalError: if the Hermitian defect exceeds ``HERMITIAN_ATOL``
            (scaled by the matrix magnitude) or an eigenvalue is below
            ``-PSD_EIG_RTOL`` relative to the largest one.
    """
    a = np.asarray(a)
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 0.0)
    defect = float(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2)))))
    if defect > HERMITIAN_ATOL * scale:
        raise NumericalError(f"{name} is not Hermitian: defect {defect:.3e}")
    eigs = np.linalg.eigvalsh(hermitize(a))
    floor = -PSD_EIG_RTOL * max(1e-300, float(np.max(np.abs(eigs))))
    if float(np.min(eigs)) < floor:
        raise NumericalError(
            f"{name} is not PSD: min eigenvalue {float(np.min(eigs)):.3e}"
        )


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Hermitian square root of a (stack of) PSD matrices.

    Eigenvalues that are slightly negative (within ``PSD_EIG_RTOL`` of the
    spectral radius) are clamped to zero; anything more negative raises.
    """
    vals, vecs = np.linalg.eigh(hermitize(np.asarray(a)))
    radius = np.maximum(np.max(np.abs(vals), axis=-1, keepdims=True), 1e-300)
    if np.any(vals < -PSD_EIG_RTOL * radius):
        worst = float(np.min(vals / radius))
        raise NumericalError(f"matrix is not PSD: min relative eigenvalue {worst:.3e}")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return np.einsum("...ij,...j,...kj->...ik", vecs, root, np.conj(vecs))


def exponential_correlation(n: int, coeff: float) -> np.ndarray:
    """Unit-diagonal correlation matrix R[i, j] = coeff**|i - j|.

    ``coeff`` may be complex with |coeff| < 1; the result is Hermitian PSD.
    """
    if abs(coeff) >= 1.0:
        raise NumericalError(f"correlation coefficient must satisfy |r| < 1, got {coeff!r}")
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    base = np.asarray(coeff, dtype=complex)
    mat = base ** np.abs(diff)
    mat = np.where(diff < 0, np.conj(base) ** np.abs(diff), mat)
    return hermitize(mat.astype(complex))


def local_scattering_correlation(
    n: int, angle_rad: float, spread_deg: float, spacing: float = 0.5
) -> np.ndarray:
    """Correlation matrix for Gaussian local scattering around a nominal angle.

    R[a, b] = exp(j 2 pi d (a-b) sin(phi)) * exp(-(sigma 2 pi d (a-b) cos(phi))^2 / 2)
    with element spacing ``d`` in wavelengths and angular std ``sigma`` (rad).
    """
    sigma = np.deg2rad(spread_deg)
    idx = np.arange(n)
    diff = (idx[:, None] - idx[None, :]).astype(float)
    phase = 2.0 * np.pi * spacing * diff * np.sin(angle_rad)
    damp = (sigma * 2.0 * np.pi * spacing * diff * np.cos(angle_rad)) ** 2 / 2.0
    out = np.exp(1j * phase - damp)
    # Deeply damped entries gradually underflow into denormals, which cost
    # 10-100x per flop in the downstream contractions; below 1e-100 the
    # correlation is physically zero, so flush it to exactly zero.
    out[damp > 230.0] = 0.0
    return hermitize(out)


def complex_normal(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """IID circularly-symmetric CN(0, 1) samples of the given shape."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
