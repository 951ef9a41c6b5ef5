from .mesh import PointCloud, TriangleMesh, normalize_to_unit_cube, sample_surface, triangle_areas
from .bvh import DistanceAccelerator, brute_force_distances, unsigned_distance
from .meshio import load_mesh, save_obj

__all__ = [
    "TriangleMesh",
    "PointCloud",
    "DistanceAccelerator",
    "normalize_to_unit_cube",
    "sample_surface",
    "triangle_areas",
    "unsigned_distance",
    "brute_force_distances",
    "load_mesh",
    "save_obj",
]
