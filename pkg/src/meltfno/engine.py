"""Fixed-graph tensor engine with exact reverse-mode adjoints.

Everything the operator network needs is here: 3D real FFT, truncated
spectral convolution, pointwise affine maps (plain and weight-normalized),
GELU/SiLU, zero padding, and the tape that records the forward pass and
replays exact adjoints in reverse order. Latent fields are channel-major
arrays of shape (C, nx, ny, nz).

Conventions, fixed because mixed choices silently rescale the spectral
weights:
  * FFT is unnormalized forward, 1/N inverse.
  * The real axis is the last one; rfft3 stores nz//2 + 1 coefficients.
  * Gradients of complex tensors follow the real-differential convention,
    dL/dRe + i dL/dIm. With a real loss, both FFT adjoints then reduce to a
    single half-spectrum transform with the conjugate-redundant bins halved
    (rfft3 adjoint) or doubled (irfft3 adjoint).
  * GELU uses the exact erf form, not the tanh approximation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft
from scipy.special import erf

FFT_WORKERS = -1


class EngineError(RuntimeError):
    pass


def real_dtype_of(dtype) -> np.dtype:
    return np.dtype(np.float32) if np.dtype(dtype).itemsize == 4 else np.dtype(np.float64)


def complex_dtype_of(dtype) -> np.dtype:
    return np.dtype(np.complex64) if real_dtype_of(dtype) == np.float32 else np.dtype(np.complex128)


# ---------------------------------------------------------------------------
# Tape and tensors

class Tensor:
    """Array tracked on a tape. grad is filled by backward()."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data: np.ndarray, requires_grad: bool):
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype


class Tape:
    """Recorded operation list; reverse traversal yields exact adjoints."""

    def __init__(self):
        self._nodes = []  # (out, inputs, adjoint_fn)
        self._seen_backward = False

    def leaf(self, data: np.ndarray, requires_grad: bool = True) -> Tensor:
        return Tensor(np.asarray(data), requires_grad)

    def constant(self, data: np.ndarray) -> Tensor:
        return Tensor(np.asarray(data), requires_grad=False)

    def _record(self, out: Tensor, inputs: tuple, adjoint) -> Tensor:
        if out.requires_grad:
            self._nodes.append((out, inputs, adjoint))
        return out

    def backward(self, root: Tensor, seed=None) -> None:
        """Accumulate gradients of root into every tensor on the tape."""
        if not self._nodes:
            raise EngineError("backward called before any forward was recorded")
        if seed is None:
            seed = np.ones_like(root.data)
        root.grad = np.asarray(seed, dtype=root.dtype)
        for out, inputs, adjoint in reversed(self._nodes):
            if out.grad is None:
                continue
            contribs = adjoint(out.grad)
            for t, c in zip(inputs, contribs):
                if c is None or not t.requires_grad:
                    continue
                t.grad = c if t.grad is None else t.grad + c
        self._seen_backward = True

    def __len__(self):
        return len(self._nodes)


def _needs(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


# ---------------------------------------------------------------------------
# Elementwise and affine primitives

def add(tape: Tape, a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise EngineError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data, _needs(a, b))
    return tape._record(out, (a, b), lambda g: (g, g))


def add_const(tape: Tape, a: Tensor, c) -> Tensor:
    out = Tensor(a.data + c, a.requires_grad)
    return tape._record(out, (a,), lambda g: (g,))


def mul_const(tape: Tape, a: Tensor, c) -> Tensor:
    """Multiply by a non-differentiated scalar or broadcastable array."""
    c = np.asarray(c)
    out = Tensor(a.data * c, a.requires_grad)
    return tape._record(out, (a,), lambda g: (g * c,))


def take_channel(tape: Tape, a: Tensor, idx: int) -> Tensor:
    out = Tensor(a.data[idx], a.requires_grad)

    def adjoint(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        return (full,)

    return tape._record(out, (a,), adjoint)


def channel_affine(tape: Tape, x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """Same (C_out x C_in) map and bias applied at every grid point."""
    c_in = x.shape[0]
    if W.shape[1] != c_in or W.shape[0] != b.shape[0]:
        raise EngineError(f"affine shapes inconsistent: W {W.shape}, b {b.shape}, "
                          f"x channels {c_in}")
    spatial = x.shape[1:]
    x2d = x.data.reshape(c_in, -1)
    y2d = W.data @ x2d + b.data[:, None]
    out = Tensor(y2d.reshape((W.shape[0],) + spatial), _needs(x, W, b))

    def adjoint(g):
        g2d = g.reshape(W.shape[0], -1)
        gx = (W.data.T @ g2d).reshape(x.shape) if x.requires_grad else None
        gW = g2d @ x2d.T if W.requires_grad else None
        gb = g2d.sum(axis=1) if b.requires_grad else None
        return (gx, gW, gb)

    return tape._record(out, (x, W, b), adjoint)


def weight_norm_affine(tape: Tape, x: Tensor, V: Tensor, gain: Tensor,
                       b: Tensor) -> Tensor:
    """Affine map with the weight reparameterized as gain * V / ||V|| per row."""
    c_out, c_in = V.shape
    if x.shape[0] != c_in or gain.shape != (c_out,) or b.shape != (c_out,):
        raise EngineError("weight_norm_affine shapes inconsistent")
    norms = np.sqrt((V.data * V.data).sum(axis=1))
    norms = np.where(norms > 0, norms, 1.0)  # all-zero rows stay zero maps
    W_eff = (gain.data / norms)[:, None] * V.data
    spatial = x.shape[1:]
    x2d = x.data.reshape(c_in, -1)
    y2d = W_eff @ x2d + b.data[:, None]
    out = Tensor(y2d.reshape((c_out,) + spatial), _needs(x, V, gain, b))

    def adjoint(g):
        g2d = g.reshape(c_out, -1)
        gx = (W_eff.T @ g2d).reshape(x.shape) if x.requires_grad else None
        gW = g2d @ x2d.T
        dot = (gW * V.data).sum(axis=1)  # per-row <gW, V>
        ggain = dot / norms if gain.requires_grad else None
        gV = None
        if V.requires_grad:
            gV = (gain.data / norms)[:, None] * (
                gW - (dot / (norms * norms))[:, None] * V.data)
        gb = g2d.sum(axis=1) if b.requires_grad else None
        return (gx, gV, ggain, gb)

    return tape._record(out, (x, V, gain, b), adjoint)


_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(tape: Tape, x: Tensor) -> Tensor:
    phi_cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = Tensor(x.data * phi_cdf, x.requires_grad)

    def adjoint(g):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
        return (g * (phi_cdf + x.data * pdf),)

    return tape._record(out, (x,), adjoint)


def silu(tape: Tape, x: Tensor) -> Tensor:
    sig = 1.0 / (1.0 + np.exp(-x.data))
    out = Tensor(x.data * sig, x.requires_grad)

    def adjoint(g):
        return (g * sig * (1.0 + x.data * (1.0 - sig)),)

    return tape._record(out, (x,), adjoint)


def identity_act(tape: Tape, x: Tensor) -> Tensor:
    return x


ACTIVATIONS = {"gelu": gelu, "silu": silu, "identity": identity_act}


def liquid_fraction_op(tape: Tape, T: Tensor, t_solidus: float,
                       t_liquidus: float) -> Tensor:
    """Differentiable-path melt fraction: subgradient 0 outside the mushy zone."""
    span = t_liquidus - t_solidus
    out = Tensor(np.clip((T.data - t_solidus) / span, 0.0, 1.0), T.requires_grad)

    def adjoint(g):
        inside = (T.data > t_solidus) & (T.data < t_liquidus)
        return (g * inside.astype(T.dtype) / span,)

    return tape._record(out, (T,), adjoint)


# ---------------------------------------------------------------------------
# Padding

def pad_zero(tape: Tape, x: Tensor, width: int) -> Tensor:
    """Append zeros on all six faces of the spatial axes."""
    if width < 0:
        raise EngineError("pad width must be >= 0")
    if width == 0:
        return x
    pad = ((0, 0),) + ((width, width),) * 3
    out = Tensor(np.pad(x.data, pad), x.requires_grad)

    def adjoint(g):
        return (g[:, width:-width, width:-width, width:-width],)

    return tape._record(out, (x,), adjoint)


def crop(tape: Tape, x: Tensor, width: int) -> Tensor:
    if width < 0:
        raise EngineError("crop width must be >= 0")
    if width == 0:
        return x
    if any(n <= 2 * width for n in x.shape[1:]):
        raise EngineError(f"crop width {width} exceeds grid {x.shape[1:]}")
    out = Tensor(x.data[:, width:-width, width:-width, width:-width].copy(),
                 x.requires_grad)

    def adjoint(g):
        pad = ((0, 0),) + ((width, width),) * 3
        return (np.pad(g, pad),)

    return tape._record(out, (x,), adjoint)


# ---------------------------------------------------------------------------
# Real 3D FFT pair

def _doubled_slice(nz: int) -> slice:
    """rfft bins along the last axis that have a conjugate-redundant partner."""
    mz = nz // 2
    return slice(1, mz) if nz % 2 == 0 else slice(1, mz + 1)


def rfft3(tape: Tape, x: Tensor) -> Tensor:
    """Unnormalized real-to-complex FFT over the three spatial axes."""
    if any(n < 2 for n in x.shape[1:]):
        raise EngineError(f"grid dimensions must be >= 2, got {x.shape[1:]}")
    spatial = x.shape[1:]
    n_cells = int(np.prod(spatial))
    out = Tensor(_fft.rfftn(x.data, axes=(1, 2, 3), workers=FFT_WORKERS),
                 x.requires_grad)

    def adjoint(g):
        gh = g.copy()
        gh[..., _doubled_slice(spatial[2])] *= 0.5
        gx = _fft.irfftn(gh, s=spatial, axes=(1, 2, 3), workers=FFT_WORKERS)
        return (gx * n_cells,)

    return tape._record(out, (x,), adjoint)


def irfft3(tape: Tape, h: Tensor, spatial: tuple) -> Tensor:
    """Inverse transform with 1/N normalization; output is real by the
    Hermitian-extension convention (conjugate-asymmetric residue on the
    self-conjugate planes is discarded)."""
    nz = spatial[2]
    if h.shape[1:] != (spatial[0], spatial[1], nz // 2 + 1):
        raise EngineError(f"coefficient shape {h.shape[1:]} does not match "
                          f"grid {spatial}")
    n_cells = int(np.prod(spatial))
    out = Tensor(_fft.irfftn(h.data, s=spatial, axes=(1, 2, 3),
                             workers=FFT_WORKERS), h.requires_grad)

    def adjoint(g):
        gh = _fft.rfftn(g, axes=(1, 2, 3), workers=FFT_WORKERS)
        gh /= n_cells
        gh[..., _doubled_slice(nz)] *= 2.0
        return (gh,)

    return tape._record(out, (h,), adjoint)


# ---------------------------------------------------------------------------
# Truncated spectral convolution

@dataclass(frozen=True)
class ModeSet:
    """Retained low-frequency indices of an rfft3 spectrum.

    Full axes keep {0..m-1} and the conjugate corner {n-m+1..n-1}; the real
    axis keeps {0..m3-1}. Corner retention is what makes real-valued outputs
    possible for "first m modes" truncation on real signals.
    """

    spatial: tuple
    modes: tuple
    kx: np.ndarray
    ky: np.ndarray
    kz: np.ndarray

    @property
    def count(self) -> int:
        return self.kx.size


def axis_capacity(n: int, real_axis: bool) -> int:
    return n // 2 + 1 if real_axis else n // 2


def make_mode_set(spatial: tuple, modes: tuple) -> ModeSet:
    n1, n2, n3 = spatial
    m1, m2, m3 = modes
    for m, n, real_axis in ((m1, n1, False), (m2, n2, False), (m3, n3, True)):
        if m < 1:
            raise EngineError("mode counts must be >= 1")
        if m > axis_capacity(n, real_axis):
            raise EngineError(
                f"mode count {m} not representable on axis of size {n} "
                f"(capacity {axis_capacity(n, real_axis)})")
    ax1 = list(range(m1)) + list(range(n1 - m1 + 1, n1))
    ax2 = list(range(m2)) + list(range(n2 - m2 + 1, n2))
    ax3 = list(range(m3))
    gx, gy, gz = np.meshgrid(np.array(ax1), np.array(ax2), np.array(ax3),
                             indexing="ij")
    return ModeSet(spatial=tuple(spatial), modes=tuple(modes),
                   kx=gx.ravel(), ky=gy.ravel(), kz=gz.ravel())


def spectral_apply(tape: Tape, h: Tensor, R: Tensor, ms: ModeSet) -> Tensor:
    """Per-mode channel mixing on retained modes; all others are zeroed."""
    C = h.shape[0]
    if R.shape != (ms.count, C, C):
        raise EngineError(f"spectral weights {R.shape} do not match "
                          f"{(ms.count, C, C)}")
    sel = h.data[:, ms.kx, ms.ky, ms.kz]               # (C, M)
    mixed = np.einsum("moc,cm->om", R.data, sel)       # (C, M)
    out_data = np.zeros_like(h.data)
    out_data[:, ms.kx, ms.ky, ms.kz] = mixed
    out = Tensor(out_data, _needs(h, R))

    def adjoint(g):
        g_sel = g[:, ms.kx, ms.ky, ms.kz]
        gh = None
        if h.requires_grad:
            gh = np.zeros_like(h.data)
            gh[:, ms.kx, ms.ky, ms.kz] = np.einsum("moc,om->cm",
                                                   np.conj(R.data), g_sel)
        gR = None
        if R.requires_grad:
            gR = np.einsum("om,cm->moc", g_sel, np.conj(sel))
        return (gh, gR)

    return tape._record(out, (h, R), adjoint)


def spectral_conv(tape: Tape, v: Tensor, R: Tensor, ms: ModeSet) -> Tensor:
    """(inverse FFT . mode mixing . FFT) of a real latent field."""
    if tuple(v.shape[1:]) != ms.spatial:
        raise EngineError(f"field grid {v.shape[1:]} does not match mode set "
                          f"grid {ms.spatial}")
    return irfft3(tape, spectral_apply(tape, rfft3(tape, v), R, ms), ms.spatial)


def fourier_layer(tape: Tape, v: Tensor, R: Tensor, ms: ModeSet, W: Tensor,
                  b: Tensor, activation: str = "gelu") -> Tensor:
    """activation(W v + b + spectral_conv(v, R))."""
    linear = channel_affine(tape, v, W, b)
    mixed = add(tape, linear, spectral_conv(tape, v, R, ms))
    return ACTIVATIONS[activation](tape, mixed)


def pointwise_mlp(tape: Tape, v: Tensor, layers: list) -> Tensor:
    """Chain of pointwise affine layers.

    Each layer is a dict with tensors under "V"/"gain" (weight-normalized)
    or "W" (plain), a "bias", and an "activation" name.
    """
    out = v
    for layer in layers:
        if "V" in layer:
            out = weight_norm_affine(tape, out, layer["V"], layer["gain"],
                                     layer["bias"])
        else:
            out = channel_affine(tape, out, layer["W"], layer["bias"])
        out = ACTIVATIONS[layer.get("activation", "identity")](tape, out)
    return out


# ---------------------------------------------------------------------------
# Losses

def mse_vs_const(tape: Tape, x: Tensor, target: np.ndarray) -> Tensor:
    """Mean over all entries of squared difference against a constant."""
    target = np.asarray(target, dtype=x.dtype)
    if target.shape != x.shape:
        raise EngineError(f"loss target shape {target.shape} != {x.shape}")
    diff = x.data - target
    out = Tensor(np.asarray(np.mean(diff * diff), dtype=x.dtype),
                 x.requires_grad)

    def adjoint(g):
        return (g * (2.0 / diff.size) * diff,)

    return tape._record(out, (x,), adjoint)


def weighted_sum(tape: Tape, terms: list, weights) -> Tensor:
    """Scalar sum(w_i * t_i); the weights are constants."""
    weights = [np.asarray(w) for w in weights]
    if len(terms) != len(weights):
        raise EngineError("weighted_sum needs one weight per term")
    total = sum(w * t.data for w, t in zip(weights, terms))
    out = Tensor(np.asarray(total), _needs(*terms))

    def adjoint(g):
        return tuple(g * w for w in weights)

    return tape._record(out, tuple(terms), adjoint)
