"""Cylindrical and classical Steiner symmetrization of voxel solids, measures and the .vox format.

A cylindrical solid lives in C_l = (-1, l) x B_1 with cells indexed by
(t, rho, theta); theta cells start at -pi so that the half plane theta = 0 sits
between the two middle cells.  A cartesian solid is an axis-aligned box.

Symmetrization keeps the number of occupied cells of every shell (or column)
and refills it with a prefix of one fixed ordering of the cells by distance
from the symmetry plane, ties to the positive side.  Prefixes of one ordering
are nested, which makes the face count between neighbouring shells exactly
|count difference|, the smallest possible value.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, ValidationError

CYLINDER = "cylinder"
CARTESIAN = "cartesian"
_TAGS = {CARTESIAN: 0, CYLINDER: 1}
MAGIC = b"VOXS"
VERSION = 1
_HEADER = struct.Struct("<4sHBx3I3d3d")


@dataclass(frozen=True, eq=False)
class VoxelSolid:
    """Binary occupancy on a tensor grid; ``cell`` and ``origin`` are per-axis sizes and lower corners."""

    geometry: str
    occupancy: np.ndarray
    cell: tuple
    origin: tuple

    def __post_init__(self):
        if self.geometry not in _TAGS:
            raise ValidationError("geometry must be 'cylinder' or 'cartesian'", geometry=self.geometry)
        occ = np.array(self.occupancy, dtype=bool)
        if occ.ndim != 3:
            raise ValidationError("occupancy must be a 3-d array", ndim=occ.ndim)
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)
        cell = tuple(float(c) for c in self.cell)
        origin = tuple(float(o) for o in self.origin)
        if len(cell) != 3 or len(origin) != 3 or min(cell) <= 0:
            raise ValidationError("cell sizes must be three positive numbers", cell=cell)
        object.__setattr__(self, "cell", cell)
        object.__setattr__(self, "origin", origin)
        if self.geometry == CYLINDER:
            if abs(origin[1]) > 0 or abs(cell[1] * occ.shape[1] - 1.0) > 1e-12:
                raise ValidationError("cylinder radii must cover [0, 1]", cell=cell, origin=origin)
            if abs(cell[2] * occ.shape[2] - 2 * np.pi) > 1e-12 or abs(origin[2] + np.pi) > 1e-12:
                raise ValidationError("cylinder angles must cover [-pi, pi)", cell=cell, origin=origin)

    @classmethod
    def cylinder(cls, l, dims, occupancy=None):
        """Solid in (-1, l) x B_1 with dims = (n_t, n_rho, n_theta)."""
        if not l > -1:
            raise ValidationError("need l > -1", l=l)
        nt, nr, nth = (int(d) for d in dims)
        occ = np.zeros((nt, nr, nth), bool) if occupancy is None else occupancy
        return cls(CYLINDER, occ, ((l + 1.0) / nt, 1.0 / nr, 2 * np.pi / nth), (-1.0, 0.0, -np.pi))

    @classmethod
    def cartesian(cls, dims, cell=(1.0, 1.0, 1.0), origin=None, occupancy=None):
        dims = tuple(int(d) for d in dims)
        if origin is None:
            origin = tuple(-0.5 * n * c for n, c in zip(dims, cell))
        occ = np.zeros(dims, bool) if occupancy is None else occupancy
        return cls(CARTESIAN, occ, cell, origin)

    @property
    def dims(self):
        return self.occupancy.shape

    def edges(self, axis):
        n = self.dims[axis]
        return self.origin[axis] + self.cell[axis] * np.arange(n + 1)

    def centers(self, axis):
        e = self.edges(axis)
        return 0.5 * (e[1:] + e[:-1])

    def with_occupancy(self, occ):
        return VoxelSolid(self.geometry, occ, self.cell, self.origin)

    def cell_measure(self):
        """Cell volumes broadcastable against the occupancy."""
        if self.geometry == CARTESIAN:
            return np.full((1, 1, 1), self.cell[0] * self.cell[1] * self.cell[2])
        r = self.edges(1)
        ring = 0.5 * (r[1:] ** 2 - r[:-1] ** 2)
        return (ring * self.cell[0] * self.cell[2])[None, :, None]

    def __eq__(self, other):
        return (
            isinstance(other, VoxelSolid)
            and self.geometry == other.geometry
            and self.cell == other.cell
            and self.origin == other.origin
            and np.array_equal(self.occupancy, other.occupancy)
        )


def nested_order(n):
    """Cell indices of one axis sorted by distance of the centre from the axis midpoint, ties positive first."""
    d = np.arange(n) + 0.5 - 0.5 * n
    return np.lexsort((-np.sign(d), np.abs(d)))


def _prefix_fill(counts, n):
    rank = np.empty(n, int)
    rank[nested_order(n)] = np.arange(n)
    return rank < counts[..., None]


def _require(solid, geometry):
    if solid.geometry != geometry:
        raise ValidationError(f"operation needs a {geometry} solid", geometry=solid.geometry)


def shell_counts(solid: VoxelSolid):
    _require(solid, CYLINDER)
    return solid.occupancy.sum(axis=2)


def shell_angle(solid: VoxelSolid, t_index, rho_index):
    """Angular measure (radians) of the occupied cells of one (t, rho) shell."""
    _require(solid, CYLINDER)
    nt, nr, _ = solid.dims
    if not (0 <= t_index < nt and 0 <= rho_index < nr):
        raise IndexOutOfRange("shell index outside the grid", t_index=t_index, rho_index=rho_index, dims=solid.dims)
    return float(np.count_nonzero(solid.occupancy[t_index, rho_index]) * solid.cell[2])


def cylindrical_steiner(solid: VoxelSolid) -> VoxelSolid:
    """Every shell becomes the arc centred on theta = 0 with the same number of cells."""
    _require(solid, CYLINDER)
    return solid.with_occupancy(_prefix_fill(shell_counts(solid), solid.dims[2]))


def classical_steiner(solid: VoxelSolid, axis=2) -> VoxelSolid:
    """Every column along ``axis`` becomes a run centred on the mid plane of that axis."""
    _require(solid, CARTESIAN)
    if axis not in (0, 1, 2):
        raise ValidationError("axis must be 0, 1 or 2", axis=axis)
    occ = np.moveaxis(solid.occupancy, axis, -1)
    out = _prefix_fill(occ.sum(axis=-1), occ.shape[-1])
    return solid.with_occupancy(np.moveaxis(out, -1, axis))


def half_thickness(solid: VoxelSolid, axis=2):
    """Half of the occupied length of each column along ``axis``."""
    _require(solid, CARTESIAN)
    return 0.5 * solid.cell[axis] * solid.occupancy.sum(axis=axis)


def voxel_volume(solid: VoxelSolid):
    """Sum of occupied cell measures, reduced through integer counts so equal counts give equal floats."""
    if solid.geometry == CARTESIAN:
        return float(np.count_nonzero(solid.occupancy)) * solid.cell[0] * solid.cell[1] * solid.cell[2]
    per_ring = solid.occupancy.sum(axis=(0, 2))
    return float(np.sum(per_ring * solid.cell_measure().ravel()))


def _faces(occ, axis, periodic):
    """Boolean mismatch between neighbours along ``axis``; the boundary counts as empty unless periodic."""
    if periodic:
        return occ != np.roll(occ, -1, axis=axis)
    pad = [(0, 0)] * 3
    pad[axis] = (1, 1)
    p = np.pad(occ, pad)
    return np.diff(p.astype(np.int8), axis=axis) != 0


def voxel_perimeter(solid: VoxelSolid):
    """Total area of faces between occupied and empty cells (or the outer boundary)."""
    occ = solid.occupancy
    if not occ.any():
        return 0.0
    c = solid.cell
    if solid.geometry == CARTESIAN:
        return float(
            np.count_nonzero(_faces(occ, 0, False)) * c[1] * c[2]
            + np.count_nonzero(_faces(occ, 1, False)) * c[0] * c[2]
            + np.count_nonzero(_faces(occ, 2, False)) * c[0] * c[1]
        )
    r = solid.edges(1)
    ring = 0.5 * (r[1:] ** 2 - r[:-1] ** 2)
    # t faces: annular sectors; rho faces: cylinder patches of radius r_i (zero on the axis);
    # theta faces: radial rectangles, periodic in theta
    ft = _faces(occ, 0, False).sum(axis=(0, 2))
    fr = _faces(occ, 1, False).sum(axis=(0, 2))
    fth = _faces(occ, 2, True).sum(axis=(0, 2))
    return float(
        np.sum(ft * ring) * c[2]
        + np.sum(fr * r) * c[2] * c[0]
        + np.sum(fth) * c[1] * c[0]
    )


def random_solid(rng, dims, geometry=CYLINDER, l=1.0, blobs=4):
    """Union of a few random ellipsoids in physical coordinates, for property checks."""
    if geometry == CYLINDER:
        s = VoxelSolid.cylinder(l, dims)
        t, rho, th = np.meshgrid(s.centers(0), s.centers(1), s.centers(2), indexing="ij")
        x, y, z = t, rho * np.cos(th), rho * np.sin(th)
        lo, hi = np.array([-1.0, -1.0, -1.0]), np.array([l, 1.0, 1.0])
    else:
        s = VoxelSolid.cartesian(dims)
        x, y, z = np.meshgrid(s.centers(0), s.centers(1), s.centers(2), indexing="ij")
        lo = np.array([e[0] for e in (s.edges(0), s.edges(1), s.edges(2))])
        hi = np.array([e[-1] for e in (s.edges(0), s.edges(1), s.edges(2))])
    occ = np.zeros(s.dims, bool)
    span = hi - lo
    for _ in range(int(rng.integers(1, blobs + 1))):
        ctr = lo + rng.random(3) * span
        ax = span * (0.08 + 0.3 * rng.random(3))
        occ |= ((x - ctr[0]) / ax[0]) ** 2 + ((y - ctr[1]) / ax[1]) ** 2 + ((z - ctr[2]) / ax[2]) ** 2 <= 1.0
    return s.with_occupancy(occ)


# ---------------------------------------------------------------------------
# .vox files


def encode_vox(solid: VoxelSolid) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, _TAGS[solid.geometry], *solid.dims, *solid.cell, *solid.origin)
    bits = np.packbits(solid.occupancy.ravel(order="C"), bitorder="little")
    return header + bits.tobytes()


def decode_vox(data: bytes) -> VoxelSolid:
    if len(data) < _HEADER.size:
        raise ValidationError("truncated .vox header", size=len(data))
    magic, version, tag, n0, n1, n2, c0, c1, c2, o0, o1, o2 = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValidationError("not a .vox file", magic=magic.hex())
    if version != VERSION:
        raise ValidationError("unsupported .vox version", version=version)
    geometry = {v: k for k, v in _TAGS.items()}.get(tag)
    if geometry is None:
        raise ValidationError("unknown geometry tag", tag=tag)
    count = n0 * n1 * n2
    payload = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    if payload.size != (count + 7) // 8:
        raise ValidationError("payload size does not match dims", expected=(count + 7) // 8, got=int(payload.size))
    occ = np.unpackbits(payload, count=count, bitorder="little").astype(bool).reshape((n0, n1, n2))
    return VoxelSolid(geometry, occ, (c0, c1, c2), (o0, o1, o2))


def write_vox(path, solid: VoxelSolid):
    with open(path, "wb") as f:
        f.write(encode_vox(solid))


def read_vox(path) -> VoxelSolid:
    with open(path, "rb") as f:
        return decode_vox(f.read())
