"""Meshes, cameras, projection, and pixel-triangle signed distance.

Conventions
-----------
* World space is right-handed, up is +Y.  The camera sits on a sphere of
  radius ``distance`` at spherical angles (azimuth, elevation) in degrees
  and looks at the origin.
* Screen space is in pixels, x to the right, y increasing downward,
  origin at the top-left image corner.  Pixel (i, j) has its center at
  (i + 0.5, j + 0.5).
* The field of view spans the image width:
  focal = 0.5 * width / tan(fov / 2).
* Signed distance to a triangle is positive strictly inside, negative
  strictly outside, and zero on the boundary.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ObjParseError, SingularProjectionError

log = logging.getLogger(__name__)


@dataclass
class Mesh:
    """Triangle mesh: (V, 3) float vertices, (F, 3) integer faces (CCW)."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(self.vertices)):
            raise ConfigurationError("mesh has non-finite vertex coordinates")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ConfigurationError("face index out of range")
            same = ((self.faces[:, 0] == self.faces[:, 1])
                    & (self.faces[:, 1] == self.faces[:, 2]))
            if np.any(same):
                raise ConfigurationError("face with three identical vertex indices")

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)


@dataclass(frozen=True)
class Camera:
    """Look-at-origin pinhole camera on a view sphere.

    Angles and fov in degrees, distance in world units, image size in
    pixels.
    """

    azimuth: float
    elevation: float
    distance: float
    fov: float = 30.0
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if not self.distance > 0:
            raise ConfigurationError("camera distance must be positive")
        if not 0.0 < self.fov < 180.0:
            raise ConfigurationError("fov must lie in (0, 180) degrees")
        if self.width < 1 or self.height < 1:
            raise ConfigurationError("image size must be at least 1x1")
        if abs(self.elevation) >= 90.0:
            raise ConfigurationError("elevation must lie in (-90, 90) degrees")

    @property
    def focal(self):
        return 0.5 * self.width / np.tan(np.radians(self.fov) / 2.0)


@dataclass
class ScreenMesh:
    """Projected mesh: (V, 2) pixel positions, (V,) camera-space depths."""

    positions: np.ndarray
    depths: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.depths = np.asarray(self.depths, dtype=np.float64).reshape(-1)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)

    @property
    def n_faces(self):
        return len(self.faces)


# --------------------------------------------------------------------------
# Wavefront OBJ loading
# --------------------------------------------------------------------------

def load_obj(path):
    """Load a triangulated mesh from a Wavefront OBJ file.

    Supports ``v x y z`` and ``f i j k [l ...]`` records; polygon faces
    are fan-triangulated; 1-based indices (including ``i/t/n`` forms) are
    converted.  Unsupported records are counted and reported with a
    single warning.
    """
    vertices = []
    faces = []
    ignored = 0
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            rec = tokens[0]
            if rec == "v":
                if len(tokens) < 4:
                    raise ObjParseError("vertex record needs 3 coordinates", lineno)
                try:
                    xyz = [float(t) for t in tokens[1:4]]
                except ValueError:
                    raise ObjParseError(f"bad vertex coordinate in {line!r}", lineno)
                if not all(np.isfinite(xyz)):
                    raise ObjParseError("non-finite vertex coordinate", lineno)
                vertices.append(xyz)
            elif rec == "f":
                if len(tokens) < 4:
                    raise ObjParseError("face record needs at least 3 indices", lineno)
                idx = []
                for t in tokens[1:]:
                    head = t.split("/", 1)[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise ObjParseError(f"bad face index {t!r}", lineno)
                    if i < 1 or i > len(vertices):
                        raise ObjParseError(
                            f"face index {i} out of range (have {len(vertices)} vertices)",
                            lineno)
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
            else:
                ignored += 1
    if ignored:
        log.warning("load_obj(%s): ignored %d unsupported record(s)", path, ignored)
    return Mesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                np.array(faces, dtype=np.int64).reshape(-1, 3))


# --------------------------------------------------------------------------
# Projection
# --------------------------------------------------------------------------

def _camera_trig(camera):
    az = np.radians(camera.azimuth)
    el = np.radians(camera.elevation)
    return np.sin(az), np.cos(az), np.sin(el), np.cos(el)


def camera_position(camera):
    """World-space camera center."""
    sa, ca, se, ce = _camera_trig(camera)
    return camera.distance * np.array([ce * sa, se, ce * ca])


def _camera_coords(mesh_vertices, camera):
    sa, ca, se, ce = _camera_trig(camera)
    px, py, pz = mesh_vertices[:, 0], mesh_vertices[:, 1], mesh_vertices[:, 2]
    x_cam = ca * px - sa * pz
    y_cam = -se * sa * px + ce * py - se * ca * pz
    z_cam = camera.distance - (ce * sa * px + se * py + ce * ca * pz)
    return x_cam, y_cam, z_cam


def transform_project(mesh, camera):
    """Project a mesh to screen space (perspective pinhole).

    Raises SingularProjectionError when a vertex reaches the camera
    plane (camera-space depth <= ~0); there is no clipping pipeline.
    """
    if mesh.n_vertices == 0:
        raise ConfigurationError("cannot project an empty mesh")
    x_cam, y_cam, z_cam = _camera_coords(mesh.vertices, camera)
    if np.any(z_cam <= 1e-9):
        raise SingularProjectionError(
            "vertex at or behind the camera plane (depth <= 0)")
    f = camera.focal
    sx = 0.5 * camera.width + f * x_cam / z_cam
    sy = 0.5 * camera.height - f * y_cam / z_cam
    return ScreenMesh(np.stack([sx, sy], axis=1), z_cam, mesh.faces.copy())


def project_jacobians(mesh, camera):
    """Screen positions plus their derivatives.

    Returns
    -------
    positions : (V, 2) pixel coordinates
    depths : (V,)
    d_world : (V, 2, 3) derivative of (sx, sy) w.r.t. the world vertex
    d_camera : (V, 2, 3) derivative of (sx, sy) w.r.t.
        (azimuth_deg, elevation_deg, distance)
    """
    sa, ca, se, ce = _camera_trig(camera)
    v = mesh.vertices
    px, py, pz = v[:, 0], v[:, 1], v[:, 2]
    x_cam, y_cam, z_cam = _camera_coords(v, camera)
    if np.any(z_cam <= 1e-9):
        raise SingularProjectionError(
            "vertex at or behind the camera plane (depth <= 0)")
    f = camera.focal
    z2 = z_cam * z_cam

    right = np.array([ca, 0.0, -sa])
    up = np.array([-se * sa, ce, -se * ca])
    fwd = np.array([-ce * sa, -se, -ce * ca])

    # world-vertex jacobian
    d_world = np.empty((len(v), 2, 3))
    for k in range(3):
        d_world[:, 0, k] = f * (right[k] * z_cam - x_cam * fwd[k]) / z2
        d_world[:, 1, k] = -f * (up[k] * z_cam - y_cam * fwd[k]) / z2

    # camera-parameter jacobian (radians first, then scale to degrees)
    dx_daz = -sa * px - ca * pz
    dy_daz = -se * ca * px + se * sa * pz
    dz_daz = -(ce * ca * px - ce * sa * pz)
    dy_del = -(ce * sa * px + se * py + ce * ca * pz)
    dz_del = -y_cam

    deg = np.pi / 180.0
    d_camera = np.empty((len(v), 2, 3))
    d_camera[:, 0, 0] = f * (dx_daz * z_cam - x_cam * dz_daz) / z2 * deg
    d_camera[:, 1, 0] = -f * (dy_daz * z_cam - y_cam * dz_daz) / z2 * deg
    d_camera[:, 0, 1] = f * (-x_cam * dz_del) / z2 * deg
    d_camera[:, 1, 1] = -f * (dy_del * z_cam - y_cam * dz_del) / z2 * deg
    d_camera[:, 0, 2] = f * (-x_cam) / z2
    d_camera[:, 1, 2] = -f * (-y_cam) / z2

    sx = 0.5 * camera.width + f * x_cam / z_cam
    sy = 0.5 * camera.height - f * y_cam / z_cam
    return np.stack([sx, sy], axis=1), z_cam, d_world, d_camera


# --------------------------------------------------------------------------
# Signed pixel-triangle distance
# --------------------------------------------------------------------------

def triangle_distances_batch(pixels, tris, need_aux=True):
    """Signed distances from pixel batches to triangle batches.

    Parameters
    ----------
    pixels : (K, N, 2) pixel-center coordinates, one row per triangle
    tris : (K, 3, 2) triangle corners
    need_aux : skip the gradient bookkeeping when False (faster)

    Returns
    -------
    d : (K, N) signed distances (inside positive)
    aux : None, or a dict with gradient bookkeeping, all (K, N) unless noted:
        ``edge``   active edge index in {0,1,2} (lowest-index tie-break)
        ``t``      clamped projection parameter on the active edge
        ``normal`` (K, N, 2) unit vector from the closest boundary point
                   to the pixel (zero where the pixel sits on the boundary)
        ``dist``   unsigned distance to the boundary
        ``sign``   +1 inside / -1 outside
        ``clamp``  0 interior foot, 1 clamped to start, 2 clamped to end
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    tris = np.asarray(tris, dtype=np.float64)
    px = pixels[..., 0]
    py = pixels[..., 1]
    d2 = []
    ts = []
    cxs = []
    cys = []
    strict_pos = None
    strict_neg = None

    for e in range(3):
        a = tris[:, e, :]
        b = tris[:, (e + 1) % 3, :]
        ux = (b[:, 0] - a[:, 0])[:, None]
        uy = (b[:, 1] - a[:, 1])[:, None]
        wx = px - a[:, 0][:, None]
        wy = py - a[:, 1][:, None]
        uu = ux * ux + uy * uy
        t_raw = (wx * ux + wy * uy) / np.where(uu > 0.0, uu, 1.0)
        t_raw = np.where(uu > 0.0, t_raw, 0.0)
        t = np.clip(t_raw, 0.0, 1.0)
        dx = wx - t * ux
        dy = wy - t * uy
        cross = ux * wy - uy * wx
        # a pixel exactly on the segment has distance exactly 0; the
        # closest-point arithmetic would otherwise leave ~1e-15 residue
        on_segment = (cross == 0.0) & (t_raw >= 0.0) & (t_raw <= 1.0)
        d2.append(np.where(on_segment, 0.0, dx * dx + dy * dy))
        if need_aux:
            ts.append((t, t_raw))
            cxs.append(a[:, 0][:, None] + t * ux)
            cys.append(a[:, 1][:, None] + t * uy)
        pos = cross > 0.0
        neg = cross < 0.0
        strict_pos = pos if strict_pos is None else strict_pos & pos
        strict_neg = neg if strict_neg is None else strict_neg & neg

    # lowest-index tie-break for the active edge
    first01 = d2[0] <= d2[1]
    d2_01 = np.where(first01, d2[0], d2[1])
    first = d2_01 <= d2[2]
    d2min = np.where(first, d2_01, d2[2])
    dist = np.sqrt(d2min)
    inside = strict_pos | strict_neg
    sign = np.where(inside, 1.0, -1.0)
    d = sign * dist
    if not need_aux:
        return d, None

    edge01 = np.where(first01, np.int8(0), np.int8(1))
    edge = np.where(first, edge01, np.int8(2))

    def _select(v0, v1, v2):
        return np.where(first, np.where(first01, v0, v1), v2)

    t_act = _select(ts[0][0], ts[1][0], ts[2][0])
    t_raw_act = _select(ts[0][1], ts[1][1], ts[2][1])
    clamp = np.where(t_raw_act <= 0.0, np.int8(1),
                     np.where(t_raw_act >= 1.0, np.int8(2), np.int8(0)))
    dx = px - _select(cxs[0], cxs[1], cxs[2])
    dy = py - _select(cys[0], cys[1], cys[2])
    ok = dist > 0.0
    inv = 1.0 / np.where(ok, dist, 1.0)
    normal = np.stack([np.where(ok, dx * inv, 0.0),
                       np.where(ok, dy * inv, 0.0)], axis=-1)
    aux = {
        "edge": edge,
        "t": t_act,
        "normal": normal,
        "dist": dist,
        "sign": sign,
        "clamp": clamp,
    }
    return d, aux


def triangle_distances(pixels, tri):
    """Signed distances from (N, 2) pixels to one (3, 2) triangle.

    Single-triangle convenience wrapper around
    :func:`triangle_distances_batch`.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    d, aux = triangle_distances_batch(pixels[None, :, :],
                                      np.asarray(tri, dtype=np.float64)[None, :, :])
    return d[0], {key: val[0] for key, val in aux.items()}


def signed_distance(pixel, triangle):
    """Signed Euclidean distance from one 2-D point to a triangle boundary.

    Positive strictly inside, negative strictly outside, 0 on the
    boundary.  Degenerate (zero-area) triangles have no interior, so the
    result is always <= 0 for them.
    """
    d, _ = triangle_distances(np.asarray(pixel, dtype=np.float64).reshape(1, 2),
                              triangle)
    return float(d[0])


def distance_gradients(aux, grad_d):
    """Backpropagate d(loss)/d(signed distance) to the active edge corners.

    Uses the envelope theorem: with the clamped projection parameter t*
    held fixed, d dist/dA = -(1 - t*) n and d dist/dB = -t* n where n is
    the unit vector from the closest point to the pixel.  The tie-break
    (lowest edge index, from np.argmin) matches the forward pass.

    Returns (grad_a, grad_b) shaped like ``aux['normal']``: gradients for
    the start and end corner of each pixel's active edge.
    """
    n = aux["normal"]
    t = aux["t"][..., None]
    s = aux["sign"][..., None]
    g = np.where(aux["dist"][..., None] > 0.0, grad_d[..., None], 0.0) * s
    grad_a = -g * (1.0 - t) * n
    grad_b = -g * t * n
    return grad_a, grad_b


# --------------------------------------------------------------------------
# Procedural meshes
# --------------------------------------------------------------------------

def icosphere(subdivisions):
    """Unit-radius icosphere; 10 * 4**s + 2 vertices, 20 * 4**s faces."""
    if not 0 <= subdivisions <= 5:
        raise ConfigurationError("subdivisions must lie in [0, 5]")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v / np.linalg.norm(v)) for v in verts]

    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.array(verts[i]) + np.array(verts[j])
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(tuple(m))
            return cache[key]

        for (i, j, k) in faces:
            a, b, c = midpoint(i, j), midpoint(j, k), midpoint(k, i)
            new_faces += [(i, a, c), (j, b, a), (k, c, b), (a, b, c)]
        faces = new_faces

    return Mesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))


def cube():
    """Axis-aligned cube spanning [-1, 1]^3, 12 triangles, outward CCW."""
    s = 1.0
    v = np.array([
        (-s, -s, -s), (s, -s, -s), (s, s, -s), (-s, s, -s),
        (-s, -s, s), (s, -s, s), (s, s, s), (-s, s, s),
    ], dtype=np.float64)
    f = np.array([
        (0, 2, 1), (0, 3, 2),   # z = -1
        (4, 5, 6), (4, 6, 7),   # z = +1
        (0, 1, 5), (0, 5, 4),   # y = -1
        (2, 3, 7), (2, 7, 6),   # y = +1
        (1, 2, 6), (1, 6, 5),   # x = +1
        (3, 0, 4), (3, 4, 7),   # x = -1
    ], dtype=np.int64)
    return Mesh(v, f)


def _box(lo, hi):
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    v = np.array([
        (lo[0], lo[1], lo[2]), (hi[0], lo[1], lo[2]),
        (hi[0], hi[1], lo[2]), (lo[0], hi[1], lo[2]),
        (lo[0], lo[1], hi[2]), (hi[0], lo[1], hi[2]),
        (hi[0], hi[1], hi[2]), (lo[0], hi[1], hi[2]),
    ])
    f = np.array([
        (0, 2, 1), (0, 3, 2), (4, 5, 6), (4, 6, 7),
        (0, 1, 5), (0, 5, 4), (2, 3, 7), (2, 7, 6),
        (1, 2, 6), (1, 6, 5), (3, 0, 4), (3, 4, 7),
    ], dtype=np.int64)
    return v, f

def lblock():
    """Chiral L-shaped prism (two boxes); useful for pose experiments
    because its silhouette has no rotational symmetry."""
    va, fa = _box((-1.0, -0.25, -0.25), (1.0, 0.25, 0.25))
    vb, fb = _box((0.5, 0.25, -0.25), (1.0, 1.25, 0.25))
    verts = np.vstack([va, vb])
    faces = np.vstack([fa, fb + len(va)])
    return Mesh(verts, faces)


def normalize_unit_sphere(mesh):
    """Center the mesh on its bounding-box center and scale the farthest
    vertex to radius 1."""
    if mesh.n_vertices == 0:
        raise ConfigurationError("cannot normalize an empty mesh")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    shifted = mesh.vertices - center
    radius = np.max(np.linalg.norm(shifted, axis=1))
    if radius == 0.0:
        raise ConfigurationError("mesh has zero extent")
    return Mesh(shifted / radius, mesh.faces.copy())
