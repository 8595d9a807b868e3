from .domain import PolygonalDomain
from .graph import GlueGraph, cycle_rank, find_loops, normalize, subdivide
from .measures import ahlfors_ratio, flatness, hausdorff_distance, length_in_ball
from .steiner import steiner_connection_4

__all__ = [
    "PolygonalDomain",
    "GlueGraph",
    "cycle_rank",
    "find_loops",
    "normalize",
    "subdivide",
    "ahlfors_ratio",
    "flatness",
    "hausdorff_distance",
    "length_in_ball",
    "steiner_connection_4",
]
