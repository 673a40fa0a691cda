"""Geometry serialisation (JSON text) and OBJ mesh export."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .curve import BSplineCurve, ParamCurve3
from .surface import NurbsSurface, tessellate


def curve_to_dict(c: BSplineCurve | ParamCurve3) -> dict:
    radii = None
    if isinstance(c, ParamCurve3):
        radii = None if c.radii is None else c.radii.tolist()
        c = c.curve
    d = {
        "type": "curve",
        "degree": c.degree,
        "knots": c.knots.tolist(),
        "control_points": c.control_points.tolist(),
        "weights": None if c.weights is None else c.weights.tolist(),
    }
    if radii is not None:
        d["radii"] = radii
    return d


def curve_from_dict(d: dict):
    c = BSplineCurve(int(d["degree"]), np.array(d["control_points"], dtype=float),
                     np.array(d["knots"], dtype=float),
                     None if d.get("weights") is None else np.array(d["weights"], dtype=float))
    if c.dim == 3 and "radii" in d:
        return ParamCurve3(c, None if d["radii"] is None else np.array(d["radii"], dtype=float))
    return c


def surface_to_dict(s: NurbsSurface) -> dict:
    return {
        "type": "surface",
        "degree_u": s.degree_u,
        "degree_v": s.degree_v,
        "knots_u": s.knots_u.tolist(),
        "knots_v": s.knots_v.tolist(),
        "control_net": s.control_net.tolist(),
        "weights": s.weights.tolist(),
    }


def surface_from_dict(d: dict) -> NurbsSurface:
    return NurbsSurface(int(d["degree_u"]), int(d["degree_v"]), np.array(d["control_net"]),
                        np.array(d["weights"]), np.array(d["knots_u"]), np.array(d["knots_v"]))


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True)


def save_geometry(items: dict, path) -> None:
    """Write named curves/surfaces to a JSON geometry file."""
    out = {}
    for name, g in items.items():
        out[name] = surface_to_dict(g) if isinstance(g, NurbsSurface) else curve_to_dict(g)
    Path(path).write_text(dumps(out) + "\n")


def load_geometry(path) -> dict:
    data = json.loads(Path(path).read_text())
    return {name: (surface_from_dict(d) if d["type"] == "surface" else curve_from_dict(d))
            for name, d in data.items()}


def write_obj(meshes, path) -> None:
    """Write ``[(name, vertices, quad_faces), ...]`` as one OBJ file with groups."""
    lines = []
    offset = 1
    for name, verts, faces in meshes:
        lines.append(f"o {name}")
        lines.extend(f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in verts)
        lines.extend("f " + " ".join(str(int(i) + offset) for i in f) for f in faces)
        offset += len(verts)
    Path(path).write_text("\n".join(lines) + "\n")


def surface_mesh(s: NurbsSurface, nu: int = 64, nv: int = 24, closed_v: bool = True):
    return tessellate(s, nu, nv, closed_v)
