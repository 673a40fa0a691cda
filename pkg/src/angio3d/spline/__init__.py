"""B-spline / NURBS kernel."""
from .basis import basis, basis_matrix, clamped_uniform_knots, find_span
from .curve import (BSplineCurve, ParamCurve3, fit_cubic, fit_to_tolerance, merge_c1,
                    point_inversion, resample)
from .intersect import IntersectionOptions, intersect_surfaces, trace_intersections
from .surface import (NurbsSurface, central_projection, extrude_surface, pipe_surface, surface_eval,
                      tessellate)

__all__ = [
    "basis", "basis_matrix", "clamped_uniform_knots", "find_span",
    "BSplineCurve", "ParamCurve3", "fit_cubic", "fit_to_tolerance", "merge_c1",
    "point_inversion", "resample",
    "IntersectionOptions", "intersect_surfaces", "trace_intersections",
    "NurbsSurface", "central_projection", "extrude_surface", "pipe_surface", "surface_eval", "tessellate",
]
