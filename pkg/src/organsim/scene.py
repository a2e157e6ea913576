"""Scene assembly and persistence.

A scene bundles everything one simulation needs: the surface mesh, its
voxel grid, the region partition, the material, the particle lattice, and
the skin binding. Scene files are self-contained JSON so a snapshot can be
reloaded and resumed without the original mesh on disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .actuation import ActuationSignal, RestLengthTable
from .dynamics import SimConfig, SimState, initial_state
from .errors import SchemaError
from .lattice import (
    Lattice,
    Material,
    Region,
    RegionRule,
    SkinBinding,
    VoxelGrid,
    assign_regions,
    bind_skin,
    build_lattice,
    voxelize,
)
from .mesh_io import TriMesh

SCENE_FORMAT = "organsim-scene-1"


@dataclass
class Scene:
    mesh: TriMesh
    grid: VoxelGrid
    regions: list[Region]
    material: Material
    lattice: Lattice
    binding: SkinBinding | None = None

    def new_state(self, cfg: SimConfig) -> SimState:
        return initial_state(self.lattice, cfg)

    def rest_table(
        self,
        signals: dict[int, ActuationSignal] | None = None,
        clamp_epsilon: float = 0.1,
    ) -> RestLengthTable:
        return RestLengthTable(self.lattice, self.regions, clamp_epsilon, signals)

    def region_by_id(self, region_id: int) -> Region:
        for region in self.regions:
            if region.id == region_id:
                return region
        raise KeyError(f"no region with id {region_id}")

    def summary(self) -> dict:
        return {
            "particles": self.lattice.n_particles,
            "constraints": self.lattice.n_constraints,
            "regions": len(self.regions),
            "vertices": len(self.mesh.vertices),
            "cell_size": self.grid.cell_size,
            "dims": list(self.grid.dims),
        }


def build_scene(
    mesh: TriMesh,
    resolution: int,
    rules: list[RegionRule] | None = None,
    material: Material | None = None,
    skin: bool = True,
) -> Scene:
    """Voxelize, regionalize, lattice, and (optionally) bind the skin."""
    material = material or Material()
    grid = voxelize(mesh, resolution)
    regions = assign_regions(grid, rules)
    lattice = build_lattice(grid, regions, material)
    binding = bind_skin(mesh, lattice) if skin else None
    return Scene(
        mesh=mesh, grid=grid, regions=regions, material=material, lattice=lattice, binding=binding
    )


def _region_doc(region: Region) -> dict:
    return {
        "id": region.id,
        "name": region.name,
        "cells": [list(c) for c in region.cells],
        "pinned": region.pinned,
        "stiffness_scale": region.stiffness_scale,
        "amplitude_scale": region.amplitude_scale,
        "actuation": region.actuation.as_dict_list(),
    }


def scene_to_doc(scene: Scene) -> dict:
    lat = scene.lattice
    doc = {
        "format": SCENE_FORMAT,
        "mesh": {
            "name": scene.mesh.name,
            "vertices": scene.mesh.vertices.tolist(),
            "triangles": scene.mesh.triangles.tolist(),
        },
        "grid": {
            "origin": scene.grid.origin.tolist(),
            "cell_size": scene.grid.cell_size,
            "dims": list(scene.grid.dims),
            "occupied": [list(c) for c in scene.grid.occupied],
            "vertex_cell": scene.grid.vertex_cell.tolist(),
        },
        "material": {
            "stiffness": scene.material.stiffness,
            "damping": scene.material.damping,
            "mass": scene.material.mass,
        },
        "regions": [_region_doc(r) for r in scene.regions],
        "lattice": {
            "positions": lat.positions.tolist(),
            "velocities": lat.velocities.tolist(),
            "inverse_mass": lat.inverse_mass.tolist(),
            "particle_region": lat.particle_region.tolist(),
            "edges": lat.edges.tolist(),
            "rest_length0": lat.rest_length0.tolist(),
            "stiffness": lat.stiffness.tolist(),
            "damping": lat.damping.tolist(),
            "edge_region": lat.edge_region.tolist(),
        },
        "binding": None,
    }
    if scene.binding is not None:
        doc["binding"] = {
            "indices": scene.binding.indices.tolist(),
            "weights": scene.binding.weights.tolist(),
            "offsets": scene.binding.offsets.tolist(),
        }
    return doc


def save_scene(scene: Scene, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scene_to_doc(scene), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _need(doc: dict, key: str, context: str):
    if key not in doc:
        raise SchemaError(f"{context} is missing {key!r}")
    return doc[key]


def scene_from_doc(doc: dict) -> Scene:
    if not isinstance(doc, dict):
        raise SchemaError("scene file must be a JSON object")
    if doc.get("format") != SCENE_FORMAT:
        raise SchemaError(f"unsupported scene format {doc.get('format')!r}")
    try:
        m = _need(doc, "mesh", "scene")
        mesh = TriMesh(
            vertices=np.asarray(m["vertices"], dtype=np.float64),
            triangles=np.asarray(m["triangles"], dtype=np.int32),
            name=str(m.get("name", "scene")),
        ).validate()

        g = _need(doc, "grid", "scene")
        occupied = [tuple(int(c) for c in cell) for cell in g["occupied"]]
        grid = VoxelGrid(
            origin=np.asarray(g["origin"], dtype=np.float64).reshape(3),
            cell_size=float(g["cell_size"]),
            dims=tuple(int(d) for d in g["dims"]),
            occupied=occupied,
            vertex_cell=np.asarray(g["vertex_cell"], dtype=np.int32),
            cell_index={cell: k for k, cell in enumerate(occupied)},
        )

        mat = _need(doc, "material", "scene")
        material = Material(
            stiffness=float(mat["stiffness"]),
            damping=float(mat["damping"]),
            mass=float(mat["mass"]),
        ).validate()

        regions = []
        for r in _need(doc, "regions", "scene"):
            regions.append(
                Region(
                    id=int(r["id"]),
                    name=str(r["name"]),
                    cells=[tuple(int(c) for c in cell) for cell in r["cells"]],
                    pinned=bool(r["pinned"]),
                    stiffness_scale=float(r["stiffness_scale"]),
                    amplitude_scale=float(r["amplitude_scale"]),
                    actuation=ActuationSignal.from_dict_list(r["actuation"]).validate(),
                )
            )

        lat = _need(doc, "lattice", "scene")
        n = len(lat["positions"])
        m_edges = len(lat["edges"])
        lattice = Lattice(
            positions=np.asarray(lat["positions"], dtype=np.float64).reshape(n, 3),
            velocities=np.asarray(lat["velocities"], dtype=np.float64).reshape(n, 3),
            inverse_mass=np.asarray(lat["inverse_mass"], dtype=np.float64).reshape(n),
            particle_region=np.asarray(lat["particle_region"], dtype=np.int32).reshape(n),
            edges=np.asarray(lat["edges"], dtype=np.int32).reshape(m_edges, 2),
            rest_length0=np.asarray(lat["rest_length0"], dtype=np.float64).reshape(m_edges),
            stiffness=np.asarray(lat["stiffness"], dtype=np.float64).reshape(m_edges),
            damping=np.asarray(lat["damping"], dtype=np.float64).reshape(m_edges),
            edge_region=np.asarray(lat["edge_region"], dtype=np.int32).reshape(m_edges),
            cells=list(occupied),
        )

        binding = None
        if doc.get("binding") is not None:
            b = doc["binding"]
            v = len(b["indices"])
            binding = SkinBinding(
                indices=np.asarray(b["indices"], dtype=np.int32).reshape(v, -1),
                weights=np.asarray(b["weights"], dtype=np.float64).reshape(v, -1),
                offsets=np.asarray(b["offsets"], dtype=np.float64).reshape(v, 3),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed scene file: {exc}") from None

    return Scene(
        mesh=mesh, grid=grid, regions=regions, material=material, lattice=lattice, binding=binding
    )


def load_scene(path) -> Scene:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    return scene_from_doc(doc)
