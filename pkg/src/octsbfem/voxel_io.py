"""Voxel geometry: container, JSON+raw persistence and synthetic models."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class VoxelError(ValueError):
    """Base class for invalid voxel input."""


class VoxelFileError(VoxelError, FileNotFoundError):
    pass


class PayloadSizeError(VoxelError):
    pass


class UnknownMaterialError(VoxelError):
    pass


class SpacingError(VoxelError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    young_modulus: float
    poisson_ratio: float
    mass_density: float = 0.0

    def __post_init__(self):
        if not self.young_modulus > 0:
            raise VoxelError(f"Young's modulus must be positive, got {self.young_modulus}")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise VoxelError(f"Poisson ratio must lie in (-1, 0.5), got {self.poisson_ratio}")
        if not self.mass_density >= 0:
            raise VoxelError(f"mass density must be non-negative, got {self.mass_density}")

    @property
    def shear_modulus(self):
        return self.young_modulus / (2.0 * (1.0 + self.poisson_ratio))

    def to_json(self):
        return {"E": self.young_modulus, "nu": self.poisson_ratio, "rho": self.mass_density}

    @classmethod
    def from_json(cls, d):
        return cls(float(d["E"]), float(d["nu"]), float(d.get("rho", 0.0)))


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Material codes on a regular lattice.

    ``data`` is indexed ``[ix, iy, iz]``; on disk it is flattened x-fastest.
    """

    dims: tuple
    spacing: float
    origin: tuple
    data: np.ndarray
    palette: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) <= 0:
            raise VoxelError(f"dims must be three positive integers, got {self.dims}")
        if not self.spacing > 0:
            raise SpacingError(f"spacing must be positive, got {self.spacing}")
        data = np.asarray(self.data)
        if data.size != np.prod(dims):
            raise PayloadSizeError(f"{data.size} voxels for dims {dims}")
        data = np.ascontiguousarray(data.reshape(dims), dtype=np.uint8)
        data.setflags(write=False)
        missing = sorted(set(np.unique(data).tolist()) - set(self.palette))
        if missing:
            raise UnknownMaterialError(f"no palette entry for codes {missing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "palette", {int(k): v for k, v in self.palette.items()})

    @property
    def n_voxels(self):
        return int(self.data.size)

    def payload(self) -> bytes:
        return self.data.ravel(order="F").tobytes()

    def __eq__(self, other):
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return (self.dims == other.dims and self.spacing == other.spacing
                and self.origin == other.origin and self.palette == other.palette
                and np.array_equal(self.data, other.data))


def _atomic_write(path: Path, blob: bytes):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_voxel_grid(grid: VoxelGrid, header_path, payload_name=None) -> Path:
    header_path = Path(header_path)
    payload_name = payload_name or header_path.with_suffix(".raw").name
    header = {
        "dims": list(grid.dims),
        "spacing": grid.spacing,
        "origin": list(grid.origin),
        "payload": payload_name,
        "palette": {str(k): m.to_json() for k, m in sorted(grid.palette.items())},
    }
    _atomic_write(header_path.parent / payload_name, grid.payload())
    _atomic_write(header_path, json.dumps(header, indent=2).encode("utf-8"))
    return header_path


def load_voxel_grid(header_path) -> VoxelGrid:
    """Read a JSON header and its raw uint8 payload (x-fastest)."""
    header_path = Path(header_path)
    if not header_path.is_file():
        raise VoxelFileError(f"header not found: {header_path}")
    header = json.loads(header_path.read_text(encoding="utf-8"))
    payload = header_path.parent / header["payload"]
    if not payload.is_file():
        raise VoxelFileError(f"payload not found: {payload}")
    dims = tuple(int(d) for d in header["dims"])
    raw = np.frombuffer(payload.read_bytes(), dtype=np.uint8)
    if raw.size != np.prod(dims):
        raise PayloadSizeError(f"payload has {raw.size} bytes, dims {dims} need {np.prod(dims)}")
    palette = {int(k): MaterialParams.from_json(v) for k, v in header["palette"].items()}
    return VoxelGrid(dims, float(header["spacing"]), tuple(header.get("origin", (0, 0, 0))),
                     raw.reshape(dims, order="F"), palette)


# ----------------------------------------------------------------------------
# synthetic models

DEFAULT_PALETTE = {
    1: MaterialParams(10e9, 0.3, 2400.0),
    2: MaterialParams(0.5e9, 0.2, 2000.0),
}

SYNTH_MODELS = ("homogeneous_cube", "corner_block", "layered_two_material", "embedded_sphere")


def synth_model(name: str, **params) -> VoxelGrid:
    """Deterministic synthetic voxel models.

    Common parameters: ``n`` (cube edge in voxels, default 8), ``spacing``,
    ``origin``, ``palette``.  Model specific:

    * ``corner_block``: ``block`` edge length of a code-2 block at the origin
      corner (default ``n // 2``);
    * ``layered_two_material``: ``dims`` (default ``(n, n, n)``) and
      ``interface``; voxels with ``iz < interface`` get code 2;
    * ``embedded_sphere``: ``radius`` (voxels) and ``center`` (voxel units,
      default the grid centre); voxels whose centre lies strictly inside get
      code 2.
    """
    if name not in SYNTH_MODELS:
        raise VoxelError(f"unknown synthetic model {name!r}; choose from {SYNTH_MODELS}")
    params = dict(params)
    n = int(params.pop("n", 8))
    spacing = float(params.pop("spacing", 1.0))
    origin = tuple(params.pop("origin", (0.0, 0.0, 0.0)))
    palette = params.pop("palette", DEFAULT_PALETTE)
    dims = tuple(int(d) for d in params.pop("dims", (n, n, n)))
    if n <= 0 or min(dims) <= 0:
        raise VoxelError("grid size must be positive")
    data = np.ones(dims, dtype=np.uint8)

    if name == "corner_block":
        b = int(params.pop("block", n // 2))
        if not 0 <= b <= min(dims):
            raise VoxelError(f"block size {b} does not fit in {dims}")
        data[:b, :b, :b] = 2
    elif name == "layered_two_material":
        z0 = int(params.pop("interface", dims[2] // 2))
        if not 0 <= z0 <= dims[2]:
            raise VoxelError(f"interface {z0} outside 0..{dims[2]}")
        data[:, :, :z0] = 2
    elif name == "embedded_sphere":
        r = float(params.pop("radius", n / 4))
        if r < 0:
            raise VoxelError("radius must be non-negative")
        c = np.asarray(params.pop("center", [d / 2 for d in dims]), dtype=float)
        ix, iy, iz = np.meshgrid(*(np.arange(d) + 0.5 for d in dims), indexing="ij")
        inside = (ix - c[0]) ** 2 + (iy - c[1]) ** 2 + (iz - c[2]) ** 2 < r * r
        data[inside] = 2
    if params:
        raise VoxelError(f"unexpected parameters for {name}: {sorted(params)}")
    return VoxelGrid(dims, spacing, origin, data, dict(palette))
