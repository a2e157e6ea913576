import numpy as np
import pytest

from organsim.lattice import Material, Region, VoxelGrid, build_lattice
from organsim.synthetic import box_mesh


def make_grid_lattice(n: int, cell_size: float = 0.1, material: Material | None = None,
                      regions: list[Region] | None = None):
    """Fully occupied n x n x n grid lattice, no mesh attached.

    Handy for integrator tests that want exact particle counts instead of
    whatever a surface voxelization happens to occupy.
    """
    occupied = sorted((i, j, k) for i in range(n) for j in range(n) for k in range(n))
    grid = VoxelGrid(
        origin=np.zeros(3),
        cell_size=cell_size,
        dims=(n, n, n),
        occupied=occupied,
        vertex_cell=np.zeros(0, dtype=np.int32),
        cell_index={cell: k for k, cell in enumerate(occupied)},
    )
    if regions is None:
        regions = [Region(id=0, name="default", cells=list(occupied))]
    material = material or Material(stiffness=100.0, damping=1.0, mass=0.1)
    return grid, build_lattice(grid, regions, material)


@pytest.fixture
def unit_box():
    return box_mesh(1)


@pytest.fixture
def fine_box():
    return box_mesh(5, size=0.1)
