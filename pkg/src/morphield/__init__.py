"""Interactive topology-aware implicit shape editing on B-spline distance fields."""

__version__ = "0.1.0"

from .critical import CriticalPoint, find_critical_points, find_saddles
from .deformer import (
    CompositeField,
    Deformer,
    DeformerParams,
    build_geometry_deformer,
    build_topology_deformer,
    flip_threshold,
)
from .meshio import MeshData, NormalizationTransform, load_mesh, normalize_to_unit, save_obj
from .metrics import MetricsReport, compare_meshes, topology_counts
from .sdfquery import MeshSdf, sample_grid
from .session import EditSession, create_session, create_session_from_mesh, load_session, save_session
from .shapes import make_scene
from .spline import GridSpec, SdfGrid, SplineField, fit_field
from .surfacing import Camera, RenderParams, extract_mesh, render, sphere_trace

__all__ = [
    "Camera",
    "CompositeField",
    "CriticalPoint",
    "Deformer",
    "DeformerParams",
    "EditSession",
    "GridSpec",
    "MeshData",
    "MeshSdf",
    "MetricsReport",
    "NormalizationTransform",
    "RenderParams",
    "SdfGrid",
    "SplineField",
    "build_geometry_deformer",
    "build_topology_deformer",
    "compare_meshes",
    "create_session",
    "create_session_from_mesh",
    "extract_mesh",
    "find_critical_points",
    "find_saddles",
    "fit_field",
    "flip_threshold",
    "load_mesh",
    "load_session",
    "make_scene",
    "normalize_to_unit",
    "render",
    "sample_grid",
    "save_obj",
    "save_session",
    "sphere_trace",
    "topology_counts",
]
