"""Zero-shot mesh part segmentation toolkit.

Two segmenters over one mesh substrate: the multiview mask-lifting pipeline
(render views, fuse per-view 2D masks, lift them to per-face part labels)
and the shape-diameter clustering baseline, plus the six-metric benchmark
harness for comparing either against ground truth.
"""

from .mesh import UNLABELED, FaceLabeling, TriMesh, connected_components, dihedral_angle
from .mesh_io import load_mesh, save_mesh

__all__ = [
    "UNLABELED",
    "FaceLabeling",
    "TriMesh",
    "connected_components",
    "dihedral_angle",
    "load_mesh",
    "save_mesh",
]

__version__ = "0.1.0"
