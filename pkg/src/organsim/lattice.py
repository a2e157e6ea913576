"""Voxel partitioning of a surface mesh and construction of the
mass-spring-damper lattice that stands in for its volume.

The mesh bounding box is cut into cubic cells (edge length set by the
longest box extent divided by the requested resolution). Cells occupied by
at least one vertex each get one particle at the cell center; particles in
26-neighboring cells are linked by spring-damper constraints. Named regions
partition the occupied cells and carry per-region material scaling,
pinning, and actuation. A skin binding maps every mesh vertex to its
nearest particles so the surface can follow the coarse dynamics.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .actuation import ActuationSignal
from .errors import (
    DegenerateMesh,
    EmptyRegionWarning,
    PartitionError,
    SchemaError,
    ValidationError,
)
from .mesh_io import TriMesh

# Half of the 26-neighborhood: offsets lexicographically greater than
# (0,0,0), so every undirected neighbor pair is generated exactly once.
NEIGHBOR_OFFSETS = tuple(
    o for o in product((-1, 0, 1), repeat=3) if o > (0, 0, 0)
)
assert len(NEIGHBOR_OFFSETS) == 13


@dataclass
class Material:
    """Homogeneous lattice material; regions scale stiffness per cell."""

    stiffness: float = 500.0  # N/m
    damping: float = 2.0  # N*s/m
    mass: float = 0.2  # kg per particle

    def validate(self) -> "Material":
        if self.stiffness <= 0:
            raise ValidationError(f"stiffness must be positive, got {self.stiffness}")
        if self.damping < 0:
            raise ValidationError(f"damping must be non-negative, got {self.damping}")
        if self.mass <= 0:
            raise ValidationError(f"mass must be positive, got {self.mass}")
        return self


@dataclass
class VoxelGrid:
    """Occupied cells of a vertex-occupancy voxelization.

    `occupied` is sorted lexicographically; that order is the canonical
    particle order everywhere downstream.
    """

    origin: np.ndarray  # (3,) bbox minimum corner
    cell_size: float
    dims: tuple[int, int, int]
    occupied: list[tuple[int, int, int]]
    vertex_cell: np.ndarray  # (V,) index into occupied per mesh vertex
    cell_index: dict[tuple[int, int, int], int] = field(repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.occupied)

    def cell_center(self, cell: tuple[int, int, int]) -> np.ndarray:
        return self.origin + (np.asarray(cell, dtype=np.float64) + 0.5) * self.cell_size

    def centers(self) -> np.ndarray:
        cells = np.asarray(self.occupied, dtype=np.float64)
        return self.origin + (cells + 0.5) * self.cell_size


def voxelize(mesh: TriMesh, resolution: int) -> VoxelGrid:
    """Partition the mesh bounding box into cubic cells.

    Cell size is the longest bbox extent over `resolution`. A vertex exactly
    on an interior cell boundary belongs to the lower-index cell; vertices on
    the bbox maximum face clamp into the last cell.
    """
    if resolution < 1:
        raise ValidationError(f"resolution must be at least 1, got {resolution}")
    lo, hi = mesh.bbox()
    extents = hi - lo
    longest = float(np.max(extents))
    if longest <= 0.0:
        raise DegenerateMesh("mesh bounding box has zero extent on every axis")
    cell_size = longest / resolution
    dims = tuple(
        max(1, int(math.ceil(extents[axis] / cell_size - 1e-9))) for axis in range(3)
    )

    raw = np.ceil((mesh.vertices - lo) / cell_size).astype(np.int64) - 1
    idx = np.clip(raw, 0, np.asarray(dims, dtype=np.int64) - 1)

    occupied = sorted({tuple(int(c) for c in row) for row in idx})
    cell_index = {cell: k for k, cell in enumerate(occupied)}
    vertex_cell = np.array(
        [cell_index[tuple(int(c) for c in row)] for row in idx], dtype=np.int32
    )
    return VoxelGrid(
        origin=lo.copy(),
        cell_size=cell_size,
        dims=dims,
        occupied=occupied,
        vertex_cell=vertex_cell,
        cell_index=cell_index,
    )


@dataclass
class Region:
    """A named group of occupied cells with shared material scaling and drive.

    Pinned regions are rigid: their particles never move, so actuation is
    forced off.
    """

    id: int
    name: str
    cells: list[tuple[int, int, int]]
    pinned: bool = False
    stiffness_scale: float = 1.0
    amplitude_scale: float = 1.0
    actuation: ActuationSignal = field(default_factory=ActuationSignal.zero)

    def __post_init__(self):
        if self.stiffness_scale < 0:
            raise ValidationError(f"stiffness_scale must be non-negative, got {self.stiffness_scale}")
        if self.pinned:
            self.amplitude_scale = 0.0


@dataclass
class RegionRule:
    """One entry of a region specification; cells are claimed first-match."""

    name: str
    box: np.ndarray | None = None  # (2, 3) min/max corners, world units
    cells: frozenset[tuple[int, int, int]] | None = None
    pinned: bool = False
    stiffness_scale: float = 1.0
    amplitude_scale: float = 1.0
    actuation: ActuationSignal = field(default_factory=ActuationSignal.zero)

    @property
    def catch_all(self) -> bool:
        return self.box is None and self.cells is None

    def matches(self, cell: tuple[int, int, int], center: np.ndarray) -> bool:
        if self.catch_all:
            return True
        if self.cells is not None and cell in self.cells:
            return True
        if self.box is not None:
            return bool(np.all(center >= self.box[0]) and np.all(center <= self.box[1]))
        return False


def _parse_rule(entry: dict, pos: int) -> RegionRule:
    if not isinstance(entry, dict):
        raise SchemaError(f"region entry {pos} must be an object")
    name = entry.get("name")
    if not isinstance(name, str) or not name:
        raise SchemaError(f"region entry {pos} needs a non-empty 'name'")

    box = entry.get("box")
    if box is not None:
        arr = np.asarray(box, dtype=np.float64)
        if arr.shape != (2, 3):
            raise SchemaError(f"region {name!r}: box must be [[x,y,z],[x,y,z]]")
        if np.any(arr[0] > arr[1]):
            raise SchemaError(f"region {name!r}: box min exceeds max")
        box = arr

    cells = entry.get("cells")
    if cells is not None:
        try:
            cells = frozenset(tuple(int(c) for c in cell) for cell in cells)
        except (TypeError, ValueError):
            raise SchemaError(f"region {name!r}: cells must be [i,j,k] triples") from None
        if any(len(c) != 3 for c in cells):
            raise SchemaError(f"region {name!r}: cells must be [i,j,k] triples")

    actuation = entry.get("actuation")
    if actuation is None:
        signal = ActuationSignal.zero()
    else:
        try:
            signal = ActuationSignal.from_dict_list(actuation).validate()
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"region {name!r}: bad actuation: {exc}") from None
        except ValidationError as exc:
            raise SchemaError(f"region {name!r}: invalid actuation: {exc}") from None

    for key, kind in (("pinned", bool), ("stiffness_scale", (int, float)), ("amplitude_scale", (int, float))):
        if key in entry and not isinstance(entry[key], kind):
            raise SchemaError(f"region {name!r}: {key} has the wrong type")
    return RegionRule(
        name=name,
        box=box,
        cells=cells,
        pinned=bool(entry.get("pinned", False)),
        stiffness_scale=float(entry.get("stiffness_scale", 1.0)),
        amplitude_scale=float(entry.get("amplitude_scale", 1.0)),
        actuation=signal,
    )


def load_region_spec(path) -> list[RegionRule]:
    """Read a region specification: a JSON list of rules, last one catch-all."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, list) or not doc:
        raise SchemaError("region spec must be a non-empty JSON list")
    rules = [_parse_rule(entry, k) for k, entry in enumerate(doc)]
    if not rules[-1].catch_all:
        raise SchemaError("last region entry must be the default (no box, no cells)")
    for rule in rules[:-1]:
        if rule.catch_all:
            raise SchemaError(
                f"region {rule.name!r} has no box or cells but is not last; it would shadow later entries"
            )
    return rules


def assign_regions(grid: VoxelGrid, rules: list[RegionRule] | None = None) -> list[Region]:
    """Partition occupied cells into regions, first matching rule wins.

    With no rules every cell lands in a synthesized default region. A rule
    that claims no cells still produces its (empty) region, with a warning,
    so region ids always equal rule positions.
    """
    if not rules:
        rules = [RegionRule(name="default")]
    elif not any(rule.catch_all for rule in rules):
        rules = list(rules) + [RegionRule(name="default")]

    buckets: list[list[tuple[int, int, int]]] = [[] for _ in rules]
    for cell in grid.occupied:
        center = grid.cell_center(cell)
        for k, rule in enumerate(rules):
            if rule.matches(cell, center):
                buckets[k].append(cell)
                break

    regions = []
    for k, (rule, cells) in enumerate(zip(rules, buckets)):
        if not cells:
            warnings.warn(
                f"region {rule.name!r} claims no cells", EmptyRegionWarning, stacklevel=2
            )
        regions.append(
            Region(
                id=k,
                name=rule.name,
                cells=cells,
                pinned=rule.pinned,
                stiffness_scale=rule.stiffness_scale,
                amplitude_scale=rule.amplitude_scale,
                actuation=rule.actuation.copy(),
            )
        )
    return regions


@dataclass
class SpringConstraint:
    """View of one lattice edge; i < j in canonical particle order."""

    i: int
    j: int
    rest_length0: float
    stiffness: float
    damping: float
    region: int


@dataclass
class Lattice:
    """Struct-of-arrays particle system over the occupied cells.

    Particle order matches VoxelGrid.occupied. Edge endpoints satisfy i < j;
    an edge belongs to the region of its lower-index endpoint.
    """

    positions: np.ndarray  # (N, 3)
    velocities: np.ndarray  # (N, 3)
    inverse_mass: np.ndarray  # (N,) zero for pinned particles
    particle_region: np.ndarray  # (N,) int32
    edges: np.ndarray  # (M, 2) int32, i < j
    rest_length0: np.ndarray  # (M,) neutral rest lengths
    stiffness: np.ndarray  # (M,)
    damping: np.ndarray  # (M,)
    edge_region: np.ndarray  # (M,) int32
    cells: list[tuple[int, int, int]]

    @property
    def n_particles(self) -> int:
        return len(self.positions)

    @property
    def n_constraints(self) -> int:
        return len(self.edges)

    def constraint(self, k: int) -> SpringConstraint:
        return SpringConstraint(
            i=int(self.edges[k, 0]),
            j=int(self.edges[k, 1]),
            rest_length0=float(self.rest_length0[k]),
            stiffness=float(self.stiffness[k]),
            damping=float(self.damping[k]),
            region=int(self.edge_region[k]),
        )

    def copy(self) -> "Lattice":
        return Lattice(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            inverse_mass=self.inverse_mass.copy(),
            particle_region=self.particle_region.copy(),
            edges=self.edges.copy(),
            rest_length0=self.rest_length0.copy(),
            stiffness=self.stiffness.copy(),
            damping=self.damping.copy(),
            edge_region=self.edge_region.copy(),
            cells=list(self.cells),
        )


def build_lattice(grid: VoxelGrid, regions: list[Region], material: Material) -> Lattice:
    """Place one particle per occupied cell and connect 26-neighbors.

    Regions must partition the occupied cells exactly. Constraint stiffness
    blends the endpoint regions' scales (arithmetic mean); a blended scale of
    zero drops the constraint entirely.
    """
    material.validate()
    claimed: dict[tuple[int, int, int], int] = {}
    for region in regions:
        for cell in region.cells:
            if cell in claimed:
                raise PartitionError(f"cell {cell} claimed by regions {claimed[cell]} and {region.id}")
            claimed[cell] = region.id
    missing = [cell for cell in grid.occupied if cell not in claimed]
    if missing:
        raise PartitionError(f"{len(missing)} occupied cell(s) belong to no region, e.g. {missing[0]}")
    if len(claimed) != grid.n_cells:
        extra = sorted(set(claimed) - set(grid.occupied))
        raise PartitionError(f"regions claim cells outside the grid, e.g. {extra[0]}")

    n = grid.n_cells
    positions = grid.centers()
    particle_region = np.array([claimed[cell] for cell in grid.occupied], dtype=np.int32)
    scale = {r.id: r.stiffness_scale for r in regions}
    pinned = {r.id: r.pinned for r in regions}
    inverse_mass = np.full(n, 1.0 / material.mass)
    for k in range(n):
        if pinned[int(particle_region[k])]:
            inverse_mass[k] = 0.0

    edges, stiff, region_of_edge = [], [], []
    for i, cell in enumerate(grid.occupied):
        for off in NEIGHBOR_OFFSETS:
            neighbor = (cell[0] + off[0], cell[1] + off[1], cell[2] + off[2])
            j = grid.cell_index.get(neighbor)
            if j is None:
                continue
            blended = 0.5 * (scale[int(particle_region[i])] + scale[int(particle_region[j])])
            if blended == 0.0:
                continue
            edges.append((i, j))
            stiff.append(material.stiffness * blended)
            region_of_edge.append(int(particle_region[i]))

    m = len(edges)
    edge_array = np.asarray(edges, dtype=np.int32).reshape(m, 2)
    # Neutral rest lengths are measured from the particle positions with the
    # same expression the force evaluation uses, so an undisturbed lattice
    # produces exactly zero force.
    rest = np.linalg.norm(
        positions[edge_array[:, 0]] - positions[edge_array[:, 1]], axis=1
    )
    return Lattice(
        positions=positions,
        velocities=np.zeros((n, 3)),
        inverse_mass=inverse_mass,
        particle_region=particle_region,
        edges=edge_array,
        rest_length0=rest,
        stiffness=np.asarray(stiff, dtype=np.float64),
        damping=np.full(m, material.damping),
        edge_region=np.asarray(region_of_edge, dtype=np.int32),
        cells=list(grid.occupied),
    )


@dataclass
class SkinBinding:
    """Per-vertex attachment to the nearest lattice particles.

    Weights are inverse-distance, normalized per vertex; offsets restore the
    exact rest-pose vertex positions.
    """

    indices: np.ndarray  # (V, k) particle indices
    weights: np.ndarray  # (V, k) normalized
    offsets: np.ndarray  # (V, 3)

    @property
    def n_vertices(self) -> int:
        return len(self.indices)

    @property
    def k(self) -> int:
        return self.indices.shape[1]


def bind_skin(mesh: TriMesh, lattice: Lattice, k: int = 4) -> SkinBinding:
    """Bind each mesh vertex to its k nearest particles (fewer if the
    lattice is smaller)."""
    from scipy.spatial import cKDTree

    k = min(k, lattice.n_particles)
    tree = cKDTree(lattice.positions)
    dist, idx = tree.query(mesh.vertices, k=k)
    dist = np.atleast_2d(np.asarray(dist, dtype=np.float64).reshape(len(mesh.vertices), k))
    idx = np.asarray(idx, dtype=np.int32).reshape(len(mesh.vertices), k)
    weights = 1.0 / (dist + 1e-9)
    weights /= weights.sum(axis=1, keepdims=True)
    blended = np.einsum("vk,vkc->vc", weights, lattice.positions[idx])
    return SkinBinding(indices=idx, weights=weights, offsets=mesh.vertices - blended)


def skin_update(binding: SkinBinding, lattice: Lattice) -> np.ndarray:
    """Current skinned vertex positions, (V, 3)."""
    blended = np.einsum("vk,vkc->vc", binding.weights, lattice.positions[binding.indices])
    return blended + binding.offsets


def skinned_mesh(binding: SkinBinding, lattice: Lattice, mesh: TriMesh) -> TriMesh:
    return TriMesh(
        vertices=skin_update(binding, lattice),
        triangles=mesh.triangles.copy(),
        name=mesh.name,
    )
