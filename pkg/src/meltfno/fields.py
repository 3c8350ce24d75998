"""Uniform Cartesian grids, scalar fields, and the on-disk dataset format.

Array layout is fixed: flat index = (ix * ny + iy) * nz + iz, i.e. x slowest,
z fastest (C order of an (nx, ny, nz) array). On disk each field is a raw
little-endian IEEE-754 binary32 array in that layout with no header; a
dataset directory holds one ``manifest.json`` plus one ``.f32`` file per
field per sample. Since storage is 32-bit, write->read roundtrips are
bit-exact only for float32-representable values.

Grid values are treated as node samples at cell centers: the coordinate of
cell (i, j, k) is origin + (i + 1/2, j + 1/2, k + 1/2) * dx.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

AMBIENT_T = 300.0  # boundary temperature, kelvin

# Tolerated VoF excursion from third-party solvers; larger ones are still
# clamped but logged at warning level with the magnitude.
_CLAMP_NOTE_TOL = 1e-6


class DatasetError(RuntimeError):
    """Raised for malformed dataset directories, manifests, or field files."""


@dataclass(frozen=True)
class Grid3:
    """Uniform, isotropic 3D Cartesian grid."""

    nx: int
    ny: int
    nz: int
    dx: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            n = getattr(self, name)
            if not isinstance(n, (int, np.integer)) or n < 2:
                raise ValueError(f"{name} must be an integer >= 2, got {n!r}")
        if not (self.dx > 0):
            raise ValueError(f"dx must be positive, got {self.dx!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def extents(self) -> tuple[float, float, float]:
        return (self.nx * self.dx, self.ny * self.dx, self.nz * self.dx)

    def flat_index(self, ix: int, iy: int, iz: int) -> int:
        if not (0 <= ix < self.nx and 0 <= iy < self.ny and 0 <= iz < self.nz):
            raise IndexError(f"cell ({ix},{iy},{iz}) outside grid {self.shape}")
        return (ix * self.ny + iy) * self.nz + iz

    def index_triple(self, idx: int) -> tuple[int, int, int]:
        if not (0 <= idx < self.n_cells):
            raise IndexError(f"flat index {idx} outside grid of {self.n_cells} cells")
        ix, rem = divmod(idx, self.ny * self.nz)
        iy, iz = divmod(rem, self.nz)
        return (ix, iy, iz)

    def cell_center(self, ix: int, iy: int, iz: int) -> tuple[float, float, float]:
        ox, oy, oz = self.origin
        return (
            ox + (ix + 0.5) * self.dx,
            oy + (iy + 0.5) * self.dx,
            oz + (iz + 0.5) * self.dx,
        )

    def cell_of(self, x: float, y: float, z: float) -> tuple[int, int, int]:
        """Inverse of cell_center for points inside the grid."""
        ox, oy, oz = self.origin
        ix = int(np.floor((x - ox) / self.dx))
        iy = int(np.floor((y - oy) / self.dx))
        iz = int(np.floor((z - oz) / self.dx))
        return (ix, iy, iz)

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.dx

    def to_json(self) -> dict:
        return {
            "nx": self.nx,
            "ny": self.ny,
            "nz": self.nz,
            "dx": self.dx,
            "origin": list(self.origin),
        }

    @staticmethod
    def from_json(obj: dict) -> "Grid3":
        return Grid3(
            int(obj["nx"]),
            int(obj["ny"]),
            int(obj["nz"]),
            float(obj["dx"]),
            tuple(float(v) for v in obj.get("origin", (0.0, 0.0, 0.0))),
        )


def make_grid(nx: int, ny: int, nz: int, dx: float,
              origin: tuple[float, float, float] = (0.0, 0.0, 0.0)) -> Grid3:
    return Grid3(nx, ny, nz, dx, origin)


class ScalarField3:
    """Immutable scalar field on a Grid3; values flat, x slowest / z fastest."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid3, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if values.size != grid.n_cells:
            raise ValueError(
                f"field length {values.size} != grid cells {grid.n_cells}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField3 is immutable")

    def as_3d(self) -> np.ndarray:
        """Read-only (nx, ny, nz) view of the flat values."""
        return self.values.reshape(self.grid.shape)

    @staticmethod
    def from_3d(grid: Grid3, arr: np.ndarray) -> "ScalarField3":
        arr = np.asarray(arr)
        if arr.shape != grid.shape:
            raise ValueError(f"array shape {arr.shape} != grid shape {grid.shape}")
        return ScalarField3(grid, arr.reshape(-1))

    def __eq__(self, other):
        return (isinstance(other, ScalarField3) and self.grid == other.grid
                and np.array_equal(self.values, other.values))


class FieldBundle:
    """Temperature (K), volume fraction, and liquid fraction on one grid."""

    __slots__ = ("T", "alpha", "fl")

    def __init__(self, T: ScalarField3, alpha: ScalarField3, fl: ScalarField3):
        if not (T.grid == alpha.grid == fl.grid):
            raise ValueError("bundle fields must share one grid")
        if np.any(T.values < 0.0):
            raise ValueError("temperature below 0 K")
        for name, f in (("alpha", alpha), ("fl", fl)):
            if np.any(f.values < 0.0) or np.any(f.values > 1.0):
                raise ValueError(f"{name} outside [0, 1]")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "fl", fl)

    def __setattr__(self, name, value):
        raise AttributeError("FieldBundle is immutable")

    @property
    def grid(self) -> Grid3:
        return self.T.grid

    def __eq__(self, other):
        return (isinstance(other, FieldBundle) and self.T == other.T
                and self.alpha == other.alpha and self.fl == other.fl)


def subsample(f: ScalarField3, factor: int) -> ScalarField3:
    """Every factor-th node starting at index 0 along each axis."""
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ValueError(f"factor must be a positive integer, got {factor!r}")
    if factor == 1:
        return f
    g = f.grid
    arr = f.as_3d()[::factor, ::factor, ::factor]
    sub = Grid3(arr.shape[0], arr.shape[1], arr.shape[2], g.dx * factor, g.origin)
    return ScalarField3.from_3d(sub, arr)


def subsample_bundle(b: FieldBundle, factor: int) -> FieldBundle:
    return FieldBundle(subsample(b.T, factor), subsample(b.alpha, factor),
                       subsample(b.fl, factor))


# ---------------------------------------------------------------------------
# Dataset directory format

FIELD_NAMES = ("T", "alpha", "fl")


@dataclass
class SampleEntry:
    id: str
    power_w: float
    v_scan_m_s: float
    h_star: float
    split: str
    files: dict  # field name -> relative path

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "power_w": self.power_w,
            "v_scan_m_s": self.v_scan_m_s,
            "h_star": self.h_star,
            "split": self.split,
            "files": dict(self.files),
        }

    @staticmethod
    def from_json(obj: dict) -> "SampleEntry":
        return SampleEntry(
            id=str(obj["id"]),
            power_w=float(obj["power_w"]),
            v_scan_m_s=float(obj["v_scan_m_s"]),
            h_star=float(obj["h_star"]),
            split=str(obj["split"]),
            files={k: str(v) for k, v in obj["files"].items()},
        )


@dataclass
class DatasetManifest:
    grid: Grid3
    samples: list = field(default_factory=list)
    material: dict = field(default_factory=dict)
    provenance: str = "oracle"
    schema_version: int = SCHEMA_VERSION

    def validate(self, base_dir: str | None = None) -> None:
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise DatasetError("duplicate sample ids in manifest")
        for s in self.samples:
            if s.split not in ("train", "validation", "test"):
                raise DatasetError(f"sample {s.id}: unknown split {s.split!r}")
            if set(s.files) != set(FIELD_NAMES):
                raise DatasetError(f"sample {s.id}: files must cover {FIELD_NAMES}")
            if base_dir is not None:
                for name, rel in s.files.items():
                    path = os.path.join(base_dir, rel)
                    if not os.path.exists(path):
                        raise DatasetError(
                            f"missing field file for sample {s.id}/{name}: {rel}")
                    expect = self.grid.n_cells * 4
                    actual = os.path.getsize(path)
                    if actual != expect:
                        raise DatasetError(
                            f"sample {s.id}/{name}: {actual} bytes, expected {expect}")

    def split_ids(self, split: str) -> list:
        return [s.id for s in self.samples if s.split == split]

    def entry(self, sample_id: str) -> SampleEntry:
        for s in self.samples:
            if s.id == sample_id:
                return s
        raise DatasetError(f"unknown sample id {sample_id!r}")

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "grid": self.grid.to_json(),
            "material": dict(self.material),
            "provenance": self.provenance,
            "samples": [s.to_json() for s in self.samples],
        }

    @staticmethod
    def from_json(obj: dict) -> "DatasetManifest":
        version = int(obj.get("schema_version", -1))
        if version != SCHEMA_VERSION:
            raise DatasetError(f"unknown schema_version {version}")
        return DatasetManifest(
            grid=Grid3.from_json(obj["grid"]),
            samples=[SampleEntry.from_json(s) for s in obj.get("samples", [])],
            material=dict(obj.get("material", {})),
            provenance=str(obj.get("provenance", "")),
            schema_version=version,
        )


def _write_f32(path: str, values: np.ndarray) -> None:
    np.asarray(values, dtype="<f4").tofile(path)


def _read_f32(path: str, n: int) -> np.ndarray:
    if not os.path.exists(path):
        raise DatasetError(f"missing field file: {path}")
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != n:
        raise DatasetError(f"{path}: {raw.size} scalars, expected {n}")
    return raw.astype(np.float64)


def write_bundle(bundle: FieldBundle, base_dir: str, sample_id: str, *,
                 power_w: float, v_scan_m_s: float, h_star: float,
                 split: str = "train") -> SampleEntry:
    """Write one sample's arrays under base_dir and return its manifest entry."""
    os.makedirs(base_dir, exist_ok=True)
    files = {}
    for name in FIELD_NAMES:
        rel = f"{sample_id}_{name}.f32"
        _write_f32(os.path.join(base_dir, rel), getattr(bundle, name).values)
        files[name] = rel
    return SampleEntry(id=sample_id, power_w=power_w, v_scan_m_s=v_scan_m_s,
                       h_star=h_star, split=split, files=files)


def read_bundle(base_dir: str, entry: SampleEntry, grid: Grid3) -> FieldBundle:
    """Read one sample; out-of-range alpha/fl is clamped with a logged warning."""
    arrays = {}
    for name in FIELD_NAMES:
        arr = _read_f32(os.path.join(base_dir, entry.files[name]), grid.n_cells)
        if name in ("alpha", "fl"):
            lo, hi = arr.min(), arr.max()
            if lo < 0.0 or hi > 1.0:
                worst = max(0.0 - lo, hi - 1.0)
                level = logging.WARNING if worst > _CLAMP_NOTE_TOL else logging.INFO
                logger.log(level, "sample %s: clamping %s to [0,1] (excursion %.3g)",
                           entry.id, name, worst)
                arr = np.clip(arr, 0.0, 1.0)
        arrays[name] = ScalarField3(grid, arr)
    return FieldBundle(arrays["T"], arrays["alpha"], arrays["fl"])


def save_manifest(manifest: DatasetManifest, base_dir: str) -> str:
    os.makedirs(base_dir, exist_ok=True)
    manifest.validate(base_dir)
    path = os.path.join(base_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest.to_json(), fh, indent=2)
    return path


def load_manifest(base_dir: str) -> DatasetManifest:
    path = os.path.join(base_dir, "manifest.json")
    if not os.path.exists(path):
        raise DatasetError(f"no manifest.json in {base_dir}")
    with open(path) as fh:
        manifest = DatasetManifest.from_json(json.load(fh))
    manifest.validate(base_dir)
    return manifest


class Dataset:
    """A manifest plus its directory; loads samples on demand."""

    def __init__(self, base_dir: str, manifest: DatasetManifest | None = None):
        self.base_dir = base_dir
        self.manifest = manifest if manifest is not None else load_manifest(base_dir)

    @property
    def grid(self) -> Grid3:
        return self.manifest.grid

    def load(self, sample_id: str) -> FieldBundle:
        return read_bundle(self.base_dir, self.manifest.entry(sample_id), self.grid)

    def ids(self, split: str | None = None) -> list:
        if split is None:
            return [s.id for s in self.manifest.samples]
        return self.manifest.split_ids(split)


class InMemoryDataset:
    """Dataset-shaped view over bundles already in memory (no file paths)."""

    def __init__(self, grid: Grid3, provenance: str = "in-memory"):
        self.manifest = DatasetManifest(grid=grid, provenance=provenance)
        self._bundles: dict = {}

    @property
    def grid(self) -> Grid3:
        return self.manifest.grid

    def add(self, entry: SampleEntry, bundle: FieldBundle) -> None:
        if bundle.grid != self.grid:
            raise DatasetError("bundle grid does not match dataset grid")
        self.manifest.samples.append(entry)
        self._bundles[entry.id] = bundle

    def load(self, sample_id: str) -> FieldBundle:
        try:
            return self._bundles[sample_id]
        except KeyError:
            raise DatasetError(f"unknown sample id {sample_id!r}") from None

    def ids(self, split: str | None = None) -> list:
        if split is None:
            return [s.id for s in self.manifest.samples]
        return self.manifest.split_ids(split)
