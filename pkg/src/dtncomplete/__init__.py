"""DtN matrix completion for electrical impedance tomography.

Core pieces are importable from the top level. The diffusion model lives in
:mod:`dtncomplete.diffusion` and pulls in torch only when imported.
"""

from .inverse import LinearizedReconstructor, reconstruct, sensitivity
from .lowrank import HierarchicalCompleter, complete_block, complete_hierarchical, partition
from .measurements import Mask, denormalize, mask_hierarchical, mask_principal, mask_random, normalize
from .mesh_fem import TriMesh, build_disk_mesh, default_rings, dtn_matrix
from .metrics import conductivity_errors, evaluation_report, re_frobenius, ssim
from .phantoms import DiskPhantomSpec, PolygonSpec, rasterize, sample_disks, to_conductivity

__version__ = "0.1.0"

__all__ = [
    "DiskPhantomSpec",
    "HierarchicalCompleter",
    "LinearizedReconstructor",
    "Mask",
    "PolygonSpec",
    "TriMesh",
    "build_disk_mesh",
    "complete_block",
    "complete_hierarchical",
    "conductivity_errors",
    "default_rings",
    "denormalize",
    "dtn_matrix",
    "evaluation_report",
    "mask_hierarchical",
    "mask_principal",
    "mask_random",
    "normalize",
    "partition",
    "rasterize",
    "re_frobenius",
    "reconstruct",
    "sample_disks",
    "sensitivity",
    "ssim",
    "to_conductivity",
]
