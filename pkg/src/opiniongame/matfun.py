"""Dense kernels for the hyperbolic-type matrix series f, g, h.

The three entire series

    f(Qt) = sum_{k>=0} Q^k t^(2k)   / (2k)!
    g(Qt) = sum_{k>=0} Q^k t^(2k+1) / (2k+1)!
    h(Qt) = sum_{k>=0} Q^k t^(2k+2) / (2k+2)!

equal cosh(Ht), H^{-1}sinh(Ht) and Q^{-1}(cosh(Ht) - I) for any square
root H of Q, but remain defined when Q is singular or has no square root.
f(QT) is singular exactly when Q has a real negative eigenvalue -r^2 and
T is an odd multiple of pi/(2r); `f_singularity` classifies that case and
enumerates the critical times.

Evaluation strategy: diagonalize Q and apply the scalar kernels per
eigenvalue whenever the eigenvector basis is well conditioned (condition
number below ``EIG_BASIS_COND_MAX``); otherwise fall back to direct series
summation with argument halving, recombined through the double-angle
identities f(2t) = 2f(t)^2 - I, g(2t) = 2g(t)f(t), h(2t) = 2h(t)(f(t)+I).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

REAL_EIG_RTOL = 1e-9        # |Im(lam)| <= tol * (1 + |lam|) counts as real
EIG_BASIS_COND_MAX = 1e6    # spectral evaluation only below this conditioning
CRITICAL_TIME_RTOL = 1e-6   # |T - T_k| <= tol * T_k flags T as critical
_ZERO_EIG_RTOL = 1e-12      # |lam| <= tol * (1 + max|lam|) counts as zero
_SMALL_ARG = 1e-4           # Taylor branch of the scalar kernels below this |sqrt(lam)*t|


class EigenSolverError(RuntimeError):
    """Eigenvalue computation failed to converge."""


class SingularMatrixError(ValueError):
    """Operation requires a nonsingular matrix."""


class RealNegativeEigenvalueError(ValueError):
    """Operation requires a spectrum free of real negative eigenvalues."""


def as_square_matrix(Q) -> np.ndarray:
    """Coerce to a dense square float matrix, rejecting NaN/Inf entries."""
    A = np.array(Q, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    return A


@dataclass(frozen=True)
class SpectralInfo:
    """Eigenvalues of a matrix with real/nonreal classification applied.

    ``eigenvalues`` has the imaginary part zeroed for entries classified as
    real.  ``min_real_negative`` is the most negative real eigenvalue (the
    -r^2 that governs critical times), or None if there is none.
    ``conditioning`` estimates the eigenvector-basis condition number.
    """

    eigenvalues: np.ndarray
    min_real_negative: Optional[float]
    conditioning: float

    @property
    def order(self) -> int:
        return len(self.eigenvalues)

    def real_negative_eigenvalues(self) -> np.ndarray:
        """Strictly negative real eigenvalues, most negative first."""
        lam = self.eigenvalues
        scale = 1.0 + float(np.max(np.abs(lam))) if len(lam) else 1.0
        mask = (lam.imag == 0.0) & (lam.real < -_ZERO_EIG_RTOL * scale)
        return np.sort(lam.real[mask])


@dataclass(frozen=True)
class CriticalTimes:
    """Per negative eigenvalue -r^2, the times T_k = (2k+1) pi / (2r).

    ``entries`` pairs each r with the ascending tuple of its critical times
    up to the horizon bound used when the object was built.
    """

    entries: tuple

    def all_times(self) -> list:
        return sorted(t for _, times in self.entries for t in times)

    def __bool__(self) -> bool:
        return any(times for _, times in self.entries)


@dataclass(frozen=True)
class FSingularityVerdict:
    """Outcome of the f(QT) singularity test.

    ``critical`` is True when T sits within tolerance of some T_k; the
    matching (r, T_k) pairs are in ``matches``.  ``critical_times`` lists
    all critical times below the diagnostic bound, and
    ``condition_estimate`` is the condition number of f(QT) as a
    cross-check (huge when critical).
    """

    critical: bool
    matches: tuple
    critical_times: CriticalTimes
    condition_estimate: float

    @property
    def nonsingular(self) -> bool:
        return not self.critical


def _eig_with_basis(Q: np.ndarray):
    """Eigenvalues, eigenvector basis and its condition number.

    Uses the symmetric solver (orthonormal basis, conditioning 1) when Q is
    numerically symmetric.
    """
    scale = float(np.max(np.abs(Q))) if Q.size else 0.0
    symmetric = np.max(np.abs(Q - Q.T)) <= 1e-12 * max(1.0, scale) if Q.size else True
    try:
        if symmetric:
            lam, V = np.linalg.eigh(Q)
            return lam.astype(complex), V, V.T.copy(), 1.0
        lam, V = np.linalg.eig(Q)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigenvalue iteration failed: {exc}") from exc
    try:
        Vinv = np.linalg.inv(V)
        cond = float(np.linalg.cond(V))
    except np.linalg.LinAlgError:
        return lam, V, None, np.inf
    if not np.isfinite(cond):
        return lam, V, None, np.inf
    # LAPACK balancing can return a nominally well-conditioned but wrong
    # basis when entry magnitudes span hundreds of orders; only trust a
    # decomposition that actually reconstructs the matrix
    recon = np.abs((V * lam) @ Vinv - Q).max()
    if recon > 1e-8 * (1.0 + scale) * max(1.0, float(np.max(np.abs(lam)))):
        return lam, V, None, np.inf
    return lam, V, Vinv, cond


def _classify_real(lam: np.ndarray) -> np.ndarray:
    """Zero out imaginary parts below the classification tolerance."""
    out = lam.astype(complex).copy()
    real_mask = np.abs(out.imag) <= REAL_EIG_RTOL * (1.0 + np.abs(out))
    out[real_mask] = out[real_mask].real
    return out


def spectral(Q) -> SpectralInfo:
    """Full spectrum of Q with real-eigenvalue classification applied."""
    A = as_square_matrix(Q)
    lam, _, _, cond = _eig_with_basis(A)
    lam = _classify_real(lam)
    scale = 1.0 + float(np.max(np.abs(lam))) if len(lam) else 1.0
    reals = lam.real[(lam.imag == 0.0) & (lam.real < -_ZERO_EIG_RTOL * scale)]
    min_neg = float(reals.min()) if len(reals) else None
    return SpectralInfo(eigenvalues=lam, min_real_negative=min_neg, conditioning=cond)


def _scalar_kernels(lam: np.ndarray, t: float):
    """Vectorized f, g, h kernels per (complex) eigenvalue."""
    lam = lam.astype(complex)
    mu = np.sqrt(lam)
    z = mu * t
    z2 = lam * t * t
    small = np.abs(z) < _SMALL_ARG
    mu_safe = np.where(small, 1.0, mu)
    lam_safe = np.where(small, 1.0, lam)
    coshz = np.cosh(np.where(small, 0.0, z))
    f = np.where(small, 1.0 + z2 / 2.0 + z2 * z2 / 24.0, coshz)
    g = np.where(small, t * (1.0 + z2 / 6.0 + z2 * z2 / 120.0),
                 np.sinh(np.where(small, 0.0, z)) / mu_safe)
    h = np.where(small, 0.5 * t * t * (1.0 + z2 / 12.0 + z2 * z2 / 360.0),
                 (coshz - 1.0) / lam_safe)
    return f, g, h


def _fgh_spectral(lam, V, Vinv, t):
    fv, gv, hv = _scalar_kernels(lam, t)

    def recombine(vals):
        M = (V * vals) @ Vinv
        return M

    F, G, H = recombine(fv), recombine(gv), recombine(hv)
    worst = max(np.max(np.abs(M.imag)) for M in (F, G, H))
    scale = max(np.max(np.abs(M.real)) for M in (F, G, H))
    if worst > 1e-8 * (1.0 + scale):
        return None
    return F.real.copy(), G.real.copy(), H.real.copy()


def _fgh_series_scaled(Q: np.ndarray, t: float):
    """Direct series with argument halving and double-angle recombination."""
    n = Q.shape[0]
    I = np.eye(n)
    theta = np.linalg.norm(Q, 1) * t * t
    s = max(0, math.ceil(0.5 * math.log2(theta))) if theta > 1.0 else 0
    ts = t / (2.0 ** s)

    term = I.copy()
    f = I.copy()
    g = ts * I
    h = 0.5 * ts * ts * I
    for k in range(1, 40):
        term = term @ Q * (ts * ts / ((2 * k - 1) * (2 * k)))
        f += term
        g += term * (ts / (2 * k + 1))
        h += term * (ts * ts / ((2 * k + 1) * (2 * k + 2)))
        if np.max(np.abs(term)) <= 1e-17 * max(1.0, np.max(np.abs(f))):
            break
    for _ in range(s):
        h = 2.0 * h @ (f + I)
        g = 2.0 * g @ f
        f = 2.0 * f @ f - I
    return f, g, h


def _fgh(Q: np.ndarray, t: float):
    A = as_square_matrix(Q)
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = A.shape[0]
    if t == 0.0:
        return np.eye(n), np.zeros((n, n)), np.zeros((n, n))
    lam, V, Vinv, cond = _eig_with_basis(A)
    if Vinv is not None and cond < EIG_BASIS_COND_MAX:
        out = _fgh_spectral(lam, V, Vinv, t)
        if out is not None:
            return out
    return _fgh_series_scaled(A, t)


def series_f(Q, t: float) -> np.ndarray:
    """f(Qt): the even series, cosh(Ht) for any square root H of Q."""
    return _fgh(Q, t)[0]


def series_g(Q, t: float) -> np.ndarray:
    """g(Qt): the odd series, H^{-1} sinh(Ht) for any square root H of Q."""
    return _fgh(Q, t)[1]


def series_h(Q, t: float) -> np.ndarray:
    """h(Qt): Q h(Qt) = f(Qt) - I; equals t^2/2 * I when Q = 0."""
    return _fgh(Q, t)[2]


def critical_times_below(info: SpectralInfo, bound: float) -> CriticalTimes:
    """All critical times T_k = (2k+1) pi / (2r) up to `bound`."""
    entries = []
    for lam in info.real_negative_eigenvalues():
        r = math.sqrt(-lam)
        times = []
        k = 0
        while True:
            tk = (2 * k + 1) * math.pi / (2.0 * r)
            if tk > bound:
                break
            times.append(tk)
            k += 1
        entries.append((r, tuple(times)))
    return CriticalTimes(entries=tuple(entries))


def f_singularity(Q, T: float, tol: float = CRITICAL_TIME_RTOL) -> FSingularityVerdict:
    """Decide whether f(QT) is singular (T within `tol` of a critical time).

    The tolerance is relative: T matches T_k when |T - T_k| <= tol * T_k.
    The verdict carries all critical times below 2T for diagnostics and the
    condition number of f(QT) as a numerical cross-check.
    """
    A = as_square_matrix(Q)
    if not (T > 0):
        raise ValueError("T must be positive")
    info = spectral(A)
    matches = []
    for lam in info.real_negative_eigenvalues():
        r = math.sqrt(-lam)
        half_period = math.pi / (2.0 * r)
        k = 0
        while True:
            tk = (2 * k + 1) * half_period
            if tk > T * (1.0 + tol) + half_period:
                break
            if abs(T - tk) <= tol * tk:
                matches.append((r, tk))
            k += 1
    cond = float(np.linalg.cond(series_f(A, T)))
    return FSingularityVerdict(
        critical=bool(matches),
        matches=tuple(matches),
        critical_times=critical_times_below(info, 2.0 * T),
        condition_estimate=cond,
    )


def sqrt_positive_real(Q) -> np.ndarray:
    """Square root of Q whose eigenvalues all have positive real parts.

    Requires Q nonsingular with no real negative eigenvalue; built from the
    eigendecomposition with the principal root per eigenvalue, falling back
    to a Schur-based dense method when the eigenvector basis is too ill
    conditioned (defective matrices are handled only through that fallback).
    """
    A = as_square_matrix(Q)
    lam, V, Vinv, cond = _eig_with_basis(A)
    lam = _classify_real(lam)
    scale = 1.0 + float(np.max(np.abs(lam)))
    if np.any(np.abs(lam) <= _ZERO_EIG_RTOL * scale):
        raise SingularMatrixError("matrix is singular; no such square root")
    negs = lam.real[(lam.imag == 0.0) & (lam.real < 0)]
    if len(negs):
        raise RealNegativeEigenvalueError(
            f"real negative eigenvalue {negs.min():.6g}: no square root with "
            "eigenvalues in the open right half-plane exists"
        )
    if Vinv is not None and cond < EIG_BASIS_COND_MAX:
        H = ((V * np.sqrt(lam)) @ Vinv).real
    else:
        H = np.ascontiguousarray(scipy.linalg.sqrtm(A).real)
    residual = np.linalg.norm(H @ H - A)
    if residual > 1e-8 * max(1.0, np.linalg.norm(A)):
        raise EigenSolverError(
            f"square-root residual {residual:.3g} too large relative to input"
        )
    return H
