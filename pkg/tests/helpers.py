"""Shared independent oracles for the test suite.

These deliberately avoid the library's own fast paths: the DFT oracle is a
direct O(N^2) matrix transform, gradients come from central finite
differences, and mask/metric oracles are per-cell Python loops.
"""
from __future__ import annotations

import numpy as np


def relerr(actual: np.ndarray, expected: np.ndarray) -> float:
    actual = np.asarray(actual)
    expected = np.asarray(expected)
    denom = max(float(np.abs(expected).max()), 1e-300)
    return float(np.abs(actual - expected).max()) / denom


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def direct_dft3(x: np.ndarray) -> np.ndarray:
    """Unnormalized forward DFT over the trailing three axes, O(N^2) style."""
    out = np.asarray(x, dtype=np.complex128)
    for axis in (1, 2, 3):
        W = dft_matrix(out.shape[axis])
        out = np.moveaxis(np.tensordot(out, W, axes=([axis], [1])), -1, axis)
    return out


def direct_idft3(h: np.ndarray) -> np.ndarray:
    """Inverse with 1/N normalization over the trailing three axes."""
    out = np.asarray(h, dtype=np.complex128)
    for axis in (1, 2, 3):
        W = np.conj(dft_matrix(out.shape[axis])) / out.shape[axis]
        out = np.moveaxis(np.tensordot(out, W, axes=([axis], [1])), -1, axis)
    return out


def hermitian_extend(h: np.ndarray, nz: int) -> np.ndarray:
    """Rebuild the full spectrum from rfft storage by conjugate mirroring."""
    C, n1, n2, m = h.shape
    full = np.zeros((C, n1, n2, nz), dtype=np.complex128)
    full[..., :m] = h
    for kx in range(n1):
        for ky in range(n2):
            for kz in range(m, nz):
                full[:, kx, ky, kz] = np.conj(h[:, (-kx) % n1, (-ky) % n2, nz - kz])
    return full


def dense_spectral_conv(x: np.ndarray, R: np.ndarray, mode_set) -> np.ndarray:
    """Direct-DFT + per-mode matrix multiply oracle for spectral_conv."""
    h = direct_dft3(x)
    kept = np.zeros_like(h[..., : x.shape[3] // 2 + 1])
    for m in range(mode_set.count):
        kx, ky, kz = mode_set.kx[m], mode_set.ky[m], mode_set.kz[m]
        kept[:, kx, ky, kz] = R[m] @ h[:, kx, ky, kz]
    full = hermitian_extend(kept, x.shape[3])
    return np.real(direct_idft3(full))


def finite_difference_grad(f, x: np.ndarray, eps: float | None = None) -> np.ndarray:
    """Central differences of scalar f() with respect to array x (in place).

    Complex entries are perturbed along the real and imaginary axes
    independently, matching the real-differential gradient convention.
    """
    x = np.asarray(x)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        parts = (1.0, 1.0j) if np.iscomplexobj(x) else (1.0,)
        for part in parts:
            orig = flat[i]
            scale = eps if eps is not None else 1e-6 * max(1.0, abs(orig))
            flat[i] = orig + scale * part
            fp = f()
            flat[i] = orig - scale * part
            fm = f()
            flat[i] = orig
            contrib = (fp - fm) / (2.0 * scale)
            if part == 1.0:
                gflat[i] += contrib
            else:
                gflat[i] += 1j * contrib
    return grad


def brute_force_mae(preds, targets) -> float:
    """Per-cell loop evaluation of the sample-then-cell mean absolute error."""
    total = 0.0
    for p, t in zip(preds, targets):
        p = np.asarray(p).reshape(-1)
        t = np.asarray(t).reshape(-1)
        acc = 0.0
        for i in range(p.size):
            acc += abs(p[i] - t[i])
        total += acc / p.size
    return total / len(preds)


def brute_force_rmse(preds, targets) -> float:
    total = 0.0
    for p, t in zip(preds, targets):
        p = np.asarray(p).reshape(-1)
        t = np.asarray(t).reshape(-1)
        acc = 0.0
        for i in range(p.size):
            acc += (p[i] - t[i]) ** 2
        total += (acc / p.size) ** 0.5
    return total / len(preds)


def brute_force_iou(pred, target, tau=0.5):
    p = np.asarray(pred).reshape(-1)
    t = np.asarray(target).reshape(-1)
    inter = union = 0
    for i in range(p.size):
        a = p[i] >= tau
        b = t[i] >= tau
        inter += a and b
        union += a or b
    return 1.0 if union == 0 else inter / union
