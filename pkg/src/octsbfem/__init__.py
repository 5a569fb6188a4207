"""Octree SBFEM with transfinite transition elements for voxel geometry."""

__version__ = "0.1.0"
