"""Operator-network assembly, inference, and checkpoint persistence.

The network maps constant process parameters plus coordinate features to
normalized temperature and volume-fraction fields: inputs are padded with
zeros, lifted pointwise into the latent width, passed through three Fourier
layers, cropped back, and decoded by a pointwise weight-normalized MLP.
Liquid fraction is derived from the predicted temperature, and the gas-phase
mask built from the predicted volume fraction is applied after the forward
pass (training uses ground-truth masking in the preprocessed targets
instead).

Padding is stored as a cell count at the configured reference spacing and
scaled by reference_dx / dx on other grids, so the padded physical extent
(and hence the wavelength each retained mode represents) does not change
when the same weights are evaluated on a finer mesh.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import engine as eg
from .engine import ModeSet, Tape, Tensor, make_mode_set
from .enthalpy import MaterialTable, ProcessParams, TI64
from .fields import FieldBundle, Grid3, ScalarField3
from .preprocess import (DEFAULT_MASK_SHARPNESS, DEFAULT_SCALES,
                         NormalizationScales, alpha_mask_values)

CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def default_grid(dx: float = 1e-5) -> Grid3:
    """0.9 mm x 0.4 mm x 0.3 mm rectangular cuboid at the given spacing."""
    nx = int(round(0.9e-3 / dx))
    ny = int(round(0.4e-3 / dx))
    nz = int(round(0.3e-3 / dx))
    return Grid3(nx, ny, nz, dx)


@dataclass(frozen=True)
class ModelConfig:
    n_fourier_layers: int = 3
    modes: tuple = (25, 20, 15)
    padding: int = 9
    latent_width: int = 32
    activation: str = "gelu"
    activation_on_last_fourier: bool = True
    coordinate_features: bool = True
    h_star_channel: bool = False
    decoder_layers: int = 3
    decoder_width: int = 32
    decoder_activation: str = "silu"
    decoder_weight_norm: bool = True
    mask_sharpness: float = DEFAULT_MASK_SHARPNESS
    reference_dx: float = 1e-5
    dtype: str = "float64"
    material: MaterialTable = TI64
    scales: NormalizationScales = field(default_factory=NormalizationScales)

    spatial_dim = 3

    def __post_init__(self):
        if len(self.modes) != 3:
            raise ValueError("modes must have three entries")
        if self.n_fourier_layers < 1 or self.decoder_layers < 1:
            raise ValueError("layer counts must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @property
    def input_channels(self) -> list:
        chans = ["x", "y", "z"] if self.coordinate_features else []
        chans += ["v_scan", "power"]
        if self.h_star_channel:
            chans.append("h_star")
        return chans

    @property
    def output_channels(self) -> list:
        return ["T", "alpha"]

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    def pad_cells(self, grid: Grid3) -> int:
        return int(round(self.padding * self.reference_dx / grid.dx))

    def padded_shape(self, grid: Grid3) -> tuple:
        w = self.pad_cells(grid)
        return (grid.nx + 2 * w, grid.ny + 2 * w, grid.nz + 2 * w)

    def mode_count(self) -> int:
        m1, m2, m3 = self.modes
        return (2 * m1 - 1) * (2 * m2 - 1) * m3

    def to_json(self) -> dict:
        return {
            "n_fourier_layers": self.n_fourier_layers,
            "modes": list(self.modes),
            "padding": self.padding,
            "latent_width": self.latent_width,
            "activation": self.activation,
            "activation_on_last_fourier": self.activation_on_last_fourier,
            "coordinate_features": self.coordinate_features,
            "h_star_channel": self.h_star_channel,
            "decoder_layers": self.decoder_layers,
            "decoder_width": self.decoder_width,
            "decoder_activation": self.decoder_activation,
            "decoder_weight_norm": self.decoder_weight_norm,
            "mask_sharpness": self.mask_sharpness,
            "reference_dx": self.reference_dx,
            "dtype": self.dtype,
            "material": self.material.to_json(),
            "scales": self.scales.to_json(),
        }

    @staticmethod
    def from_json(obj: dict) -> "ModelConfig":
        obj = dict(obj)
        obj["modes"] = tuple(obj["modes"])
        obj["material"] = MaterialTable.from_json(obj["material"])
        obj["scales"] = NormalizationScales.from_json(obj["scales"])
        return ModelConfig(**obj)


def validate_modes(cfg: ModelConfig, grid: Grid3) -> None:
    padded = cfg.padded_shape(grid)
    make_mode_set(padded, cfg.modes)  # raises EngineError on overflow


class FnoModel:
    """Parameter set plus config; parameters are plain numpy arrays."""

    def __init__(self, cfg: ModelConfig, params: dict, provenance: dict | None = None):
        self.cfg = cfg
        self.params = params
        self.provenance = dict(provenance or {"trained": False})
        self._mode_cache: dict = {}

    def parameter_count(self) -> int:
        total = 0
        for arr in self.params.values():
            n = arr.size
            total += 2 * n if np.iscomplexobj(arr) else n
        return total

    def mode_set(self, padded_shape: tuple) -> ModeSet:
        key = tuple(padded_shape)
        if key not in self._mode_cache:
            self._mode_cache[key] = make_mode_set(key, self.cfg.modes)
        return self._mode_cache[key]

    def copy(self) -> "FnoModel":
        return FnoModel(self.cfg, {k: v.copy() for k, v in self.params.items()},
                        dict(self.provenance))


def build_model(cfg: ModelConfig, seed: int = 0,
                grid: Grid3 | None = None) -> FnoModel:
    """Deterministic parameter initialization for a given seed.

    Spectral weights are uniform complex with scale 1/(C_in*C_out); affine
    weights uniform +/- 1/sqrt(fan_in); weight-normalized rows start with
    gain = ||V_row|| so the effective weight equals V. Biases are zero
    except the decoder output bias, which starts at the ambient normalized
    values (T: 300/T_ref, alpha: 1) so training does not spend its fixed-
    magnitude optimizer steps crawling toward the ambient plateau.
    """
    if grid is None:
        grid = default_grid(cfg.reference_dx)
    validate_modes(cfg, grid)

    rng = np.random.default_rng(seed)
    rdt = cfg.np_dtype
    cdt = eg.complex_dtype_of(rdt)
    C = cfg.latent_width
    n_in = len(cfg.input_channels)
    n_out = len(cfg.output_channels)
    params: dict = {}

    def affine_w(n_o, n_i):
        bound = 1.0 / np.sqrt(n_i)
        return rng.uniform(-bound, bound, size=(n_o, n_i)).astype(rdt)

    params["lift_W"] = affine_w(C, n_in)
    params["lift_b"] = np.zeros(C, dtype=rdt)

    scale = 1.0 / (C * C)
    M = cfg.mode_count()
    for i in range(cfg.n_fourier_layers):
        re = rng.uniform(-scale, scale, size=(M, C, C))
        im = rng.uniform(-scale, scale, size=(M, C, C))
        params[f"fourier{i}_R"] = (re + 1j * im).astype(cdt)
        params[f"fourier{i}_W"] = affine_w(C, C)
        params[f"fourier{i}_b"] = np.zeros(C, dtype=rdt)

    widths = [C] + [cfg.decoder_width] * (cfg.decoder_layers - 1) + [n_out]
    ambient = np.zeros(n_out, dtype=rdt)
    ambient[0] = 300.0 / cfg.scales.T_ref
    ambient[1] = 1.0
    for i in range(cfg.decoder_layers):
        n_i, n_o = widths[i], widths[i + 1]
        W = affine_w(n_o, n_i)
        bias = ambient.copy() if i == cfg.decoder_layers - 1 else np.zeros(n_o, dtype=rdt)
        if cfg.decoder_weight_norm:
            params[f"dec{i}_V"] = W
            params[f"dec{i}_g"] = np.sqrt((W * W).sum(axis=1)).astype(rdt)
            params[f"dec{i}_b"] = bias
        else:
            params[f"dec{i}_W"] = W
            params[f"dec{i}_b"] = bias
    return FnoModel(cfg, params)


# ---------------------------------------------------------------------------
# Forward pass

def assemble_inputs(cfg: ModelConfig, params: ProcessParams,
                    grid: Grid3) -> np.ndarray:
    """Constant parameter channels plus per-axis [0, 1] coordinate features."""
    rdt = cfg.np_dtype
    chans = []
    if cfg.coordinate_features:
        for axis, n in enumerate(grid.shape):
            ramp = np.linspace(0.0, 1.0, n, dtype=rdt)
            shape = [1, 1, 1]
            shape[axis] = n
            chans.append(np.broadcast_to(ramp.reshape(shape), grid.shape))
    s = cfg.scales
    chans.append(np.full(grid.shape, params.v_scan_m_s / s.V_ref, dtype=rdt))
    chans.append(np.full(grid.shape, params.power_w / s.P_ref, dtype=rdt))
    if cfg.h_star_channel:
        chans.append(np.full(grid.shape, params.h_star / s.H_ref, dtype=rdt))
    return np.stack(chans).astype(rdt)


def forward_normalized(model: FnoModel, inputs: np.ndarray, grid: Grid3,
                       tape: Tape, train: bool = False):
    """Run the network graph; returns (output tensor, parameter leaves).

    The output tensor holds the normalized temperature in channel 0 and the
    raw (unclamped) volume fraction in channel 1 on the unpadded grid.
    """
    cfg = model.cfg
    padded = cfg.padded_shape(grid)
    ms = model.mode_set(padded)
    leaves = {name: tape.leaf(arr, requires_grad=train)
              for name, arr in model.params.items()}

    v = tape.constant(np.ascontiguousarray(inputs, dtype=cfg.np_dtype))
    v = eg.pad_zero(tape, v, cfg.pad_cells(grid))
    v = eg.channel_affine(tape, v, leaves["lift_W"], leaves["lift_b"])
    for i in range(cfg.n_fourier_layers):
        last = i == cfg.n_fourier_layers - 1
        act = cfg.activation if (not last or cfg.activation_on_last_fourier) \
            else "identity"
        v = eg.fourier_layer(tape, v, leaves[f"fourier{i}_R"], ms,
                             leaves[f"fourier{i}_W"], leaves[f"fourier{i}_b"],
                             activation=act)
    v = eg.crop(tape, v, cfg.pad_cells(grid))

    layers = []
    for i in range(cfg.decoder_layers):
        act = cfg.decoder_activation if i < cfg.decoder_layers - 1 else "identity"
        if cfg.decoder_weight_norm:
            layers.append({"V": leaves[f"dec{i}_V"], "gain": leaves[f"dec{i}_g"],
                           "bias": leaves[f"dec{i}_b"], "activation": act})
        else:
            layers.append({"W": leaves[f"dec{i}_W"], "bias": leaves[f"dec{i}_b"],
                           "activation": act})
    out = eg.pointwise_mlp(tape, v, layers)
    return out, leaves


def infer(model: FnoModel, params: ProcessParams, grid: Grid3) -> FieldBundle:
    """Predict masked temperature, volume fraction, and liquid fraction."""
    cfg = model.cfg
    inputs = assemble_inputs(cfg, params, grid)
    out, _ = forward_normalized(model, inputs, grid, Tape(), train=False)
    t_raw = np.asarray(out.data[0], dtype=np.float64) * cfg.scales.T_ref
    alpha_hat = np.clip(np.asarray(out.data[1], dtype=np.float64), 0.0, 1.0)
    t_masked, fl_masked, alpha_masked = alpha_mask_values(
        t_raw, alpha_hat, cfg.mask_sharpness, cfg.material)
    t_masked = np.maximum(t_masked, 0.0)  # untrained nets can dip below 0 K
    return FieldBundle(ScalarField3.from_3d(grid, t_masked),
                       ScalarField3.from_3d(grid, alpha_masked),
                       ScalarField3.from_3d(grid, fl_masked))


def infer_superresolved(model: FnoModel, params: ProcessParams,
                        fine_grid: Grid3) -> FieldBundle:
    """Same weights evaluated on a finer grid; nothing is interpolated."""
    validate_modes(model.cfg, fine_grid)
    return infer(model, params, fine_grid)


# ---------------------------------------------------------------------------
# Checkpoints

def _array_file_dtype(arr: np.ndarray) -> str:
    return "complex128" if np.iscomplexobj(arr) else "float64"


def save_checkpoint(model: FnoModel, ckpt_dir: str) -> str:
    """Manifest JSON plus one raw little-endian float64 array per tensor.

    Arrays are widened to 64-bit on disk regardless of compute dtype, so
    load(save(model)) is bit-exact for both float32 and float64 models.
    """
    os.makedirs(ckpt_dir, exist_ok=True)
    tensors = []
    for name, arr in model.params.items():
        fname = f"{name}.bin"
        file_dtype = _array_file_dtype(arr)
        wide = arr.astype("<c16" if file_dtype == "complex128" else "<f8")
        wide.tofile(os.path.join(ckpt_dir, fname))
        tensors.append({"name": name, "shape": list(arr.shape),
                        "dtype": file_dtype, "file": fname,
                        "n_bytes": int(wide.nbytes)})
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.cfg.to_json(),
        "provenance": model.provenance,
        "tensors": tensors,
    }
    path = os.path.join(ckpt_dir, "checkpoint.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
    return path


def load_checkpoint(ckpt_dir: str) -> FnoModel:
    path = os.path.join(ckpt_dir, "checkpoint.json")
    if not os.path.exists(path):
        raise CheckpointError(f"no checkpoint.json in {ckpt_dir}")
    with open(path) as fh:
        manifest = json.load(fh)
    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version!r}")
    cfg = ModelConfig.from_json(manifest["config"])
    rdt = cfg.np_dtype
    cdt = eg.complex_dtype_of(rdt)
    params = {}
    for spec in manifest["tensors"]:
        fpath = os.path.join(ckpt_dir, spec["file"])
        if not os.path.exists(fpath):
            raise CheckpointError(f"missing tensor file {spec['file']}")
        on_disk = "<c16" if spec["dtype"] == "complex128" else "<f8"
        raw = np.fromfile(fpath, dtype=on_disk)
        expect = int(np.prod(spec["shape"]))
        if raw.size != expect:
            raise CheckpointError(
                f"tensor {spec['name']}: {raw.size} values, expected {expect}")
        arr = raw.reshape(spec["shape"])
        params[spec["name"]] = arr.astype(cdt if spec["dtype"] == "complex128" else rdt)
    return FnoModel(cfg, params, manifest.get("provenance"))


def model_info(model: FnoModel) -> dict:
    cfg_json = model.cfg.to_json()
    digest = hashlib.sha256(
        json.dumps({"config": cfg_json, "provenance": model.provenance},
                   sort_keys=True).encode()).hexdigest()
    return {
        "config": cfg_json,
        "parameter_count": model.parameter_count(),
        "input_channels": model.cfg.input_channels,
        "output_channels": model.cfg.output_channels,
        "provenance": model.provenance,
        "provenance_hash": digest,
    }
