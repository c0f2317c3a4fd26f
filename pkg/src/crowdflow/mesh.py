"""Triangulations of rectangular rooms with obstacles, and their dual geometry.

The generator builds a graded structured triangulation of the walking domain:
a rectangular room, optional interior obstacles (circles and axis-aligned
rectangles), door openings on one wall, and an optional exterior region behind
the doors whose far side is the outflow boundary. Obstacles are carved out of
the background grid (triangles whose centroid falls inside are dropped,
remaining interior nodes are projected onto the obstacle boundary). Door
openings in an interior partition are realized as true zero-width slits by
duplicating the partition nodes, so the two sides only communicate through
the opening.

Finite-volume control cells are the median-dual cells: each triangle is split
among its three vertices by connecting the centroid to the edge midpoints,
which hands each vertex exactly a third of the triangle area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

WALL = 0
OUTFLOW = 1
_TAG_CHARS = {WALL: "W", OUTFLOW: "O"}
_CHAR_TAGS = {v: k for k, v in _TAG_CHARS.items()}

EXIT_WALLS = ("right", "left", "bottom", "top")


class GeometryError(ValueError):
    """Raised for degenerate or inconsistent domain descriptions."""


class MeshFormatError(ValueError):
    """Raised when parsing a mesh file fails; carries the offending line."""


@dataclass(frozen=True)
class Circle:
    cx: float
    cy: float
    r: float

    def contains(self, x, y, shrink: float = 0.0):
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 < (self.r - shrink) ** 2

    def project(self, x, y):
        dx, dy = x - self.cx, y - self.cy
        d = math.hypot(dx, dy)
        if d == 0.0:
            return self.cx + self.r, self.cy
        return self.cx + dx * self.r / d, self.cy + dy * self.r / d

    def bbox(self):
        return self.cx - self.r, self.cx + self.r, self.cy - self.r, self.cy + self.r


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def contains(self, x, y, shrink: float = 0.0):
        return (self.x0 + shrink < x < self.x1 - shrink) and (
            self.y0 + shrink < y < self.y1 - shrink
        )

    def project(self, x, y):
        # nearest point on the rectangle boundary, for x,y inside
        cands = [
            (abs(x - self.x0), (self.x0, y)),
            (abs(self.x1 - x), (self.x1, y)),
            (abs(y - self.y0), (x, self.y0)),
            (abs(self.y1 - y), (x, self.y1)),
        ]
        return min(cands)[1]

    def bbox(self):
        return self.x0, self.x1, self.y0, self.y1


@dataclass
class Mesh:
    """Conforming triangulation with tagged boundary edges.

    nodes: (N, 2) coordinates in meters; triangles: (T, 3) node indices in
    counterclockwise order; boundary_edges: (B, 2) node pairs, each belonging
    to exactly one triangle; boundary_tags: (B,) WALL or OUTFLOW.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int32)
        self.boundary_tags = np.ascontiguousarray(self.boundary_tags, dtype=np.int8)
        for a in (self.nodes, self.triangles, self.boundary_edges, self.boundary_tags):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            p = self.nodes
            t = self.triangles
            d1 = p[t[:, 1]] - p[t[:, 0]]
            d2 = p[t[:, 2]] - p[t[:, 0]]
            self._cache["areas"] = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        return self._cache["areas"]

    def node_triangles(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR adjacency node -> incident triangles: (indptr, tri_ids)."""
        if "node_tri" not in self._cache:
            t = self.triangles.ravel()
            order = np.argsort(t, kind="stable")
            counts = np.bincount(t, minlength=self.n_nodes)
            indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            tri_ids = (order // 3).astype(np.int32)
            self._cache["node_tri"] = (indptr, tri_ids)
        return self._cache["node_tri"]

    def validate(self) -> None:
        """Check orientation, conformity and boundary consistency."""
        if self.n_triangles == 0:
            raise GeometryError("mesh has no triangles")
        if self.triangles.min() < 0 or self.triangles.max() >= self.n_nodes:
            raise GeometryError("triangle node index out of range")
        areas = self.triangle_areas()
        if not np.all(areas > 0):
            bad = int(np.argmin(areas))
            raise GeometryError(
                f"triangle {bad} has non-positive area {areas[bad]:.3e}"
            )
        edges, counts = _edge_multiplicity(self.triangles)
        if counts.max() > 2:
            raise GeometryError("non-conforming mesh: an edge is shared by >2 triangles")
        boundary = edges[counts == 1]
        declared = np.sort(self.boundary_edges, axis=1)
        b_set = {tuple(e) for e in boundary.tolist()}
        d_list = [tuple(e) for e in declared.tolist()]
        d_set = set(d_list)
        if len(d_list) != len(d_set):
            raise GeometryError("duplicate boundary edge declaration")
        if d_set != b_set:
            missing = b_set - d_set
            extra = d_set - b_set
            raise GeometryError(
                f"boundary edge mismatch: {len(missing)} undeclared, {len(extra)} spurious"
            )
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise GeometryError("boundary tag count does not match boundary edge count")
        if not np.all(np.isin(self.boundary_tags, [WALL, OUTFLOW])):
            raise GeometryError("unknown boundary tag value")


def _edge_multiplicity(triangles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges of the triangulation and their triangle counts."""
    e = np.concatenate(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=0
    )
    e = np.sort(e, axis=1)
    edges, counts = np.unique(e, axis=0, return_counts=True)
    return edges, counts


# ---------------------------------------------------------------------------
# canonical frame: the exit wall is mapped to the right side u = room_depth
# ---------------------------------------------------------------------------

def _to_canonical(wall: str, width: float, height: float):
    """Return (room_depth, wall_length, fwd, inv) for the chosen exit wall.

    fwd maps world (x, y) to canonical (u, v); inv maps back. All four maps
    are orientation-preserving rotations, so triangle orientation survives.
    """
    if wall == "right":
        return width, height, lambda x, y: (x, y), lambda u, v: (u, v)
    if wall == "left":
        return (
            width,
            height,
            lambda x, y: (width - x, height - y),
            lambda u, v: (width - u, height - v),
        )
    if wall == "bottom":
        return height, width, lambda x, y: (height - y, x), lambda u, v: (v, height - u)
    if wall == "top":
        return height, width, lambda x, y: (y, width - x), lambda u, v: (width - v, u)
    raise GeometryError(f"exit_wall must be one of {EXIT_WALLS}, got {wall!r}")


def _exit_intervals_canonical(wall, width, height, exits):
    """Exit intervals as (lo, hi) in the canonical along-wall coordinate v."""
    out = []
    for lo, hi in exits:
        if not hi > lo:
            raise GeometryError(f"exit interval ({lo}, {hi}) has non-positive width")
        if wall in ("right", "left"):
            span = height
        else:
            span = width
        if lo < -1e-12 or hi > span + 1e-12:
            raise GeometryError(f"exit ({lo}, {hi}) lies outside the wall of length {span}")
        if wall == "right":
            out.append((lo, hi))
        elif wall == "left":
            out.append((height - hi, height - lo))
        elif wall == "bottom":
            out.append((lo, hi))
        else:  # top
            out.append((width - hi, width - lo))
    out.sort()
    for (a0, a1), (b0, b1) in zip(out, out[1:]):
        if b0 < a1 - 1e-12:
            raise GeometryError("exit segments overlap")
    return out


def _transform_obstacles(obstacles, fwd):
    out = []
    for ob in obstacles:
        if isinstance(ob, Circle):
            u, v = fwd(ob.cx, ob.cy)
            out.append(Circle(u, v, ob.r))
        elif isinstance(ob, Rect):
            u0, v0 = fwd(ob.x0, ob.y0)
            u1, v1 = fwd(ob.x1, ob.y1)
            out.append(Rect(min(u0, u1), max(u0, u1), min(v0, v1), max(v0, v1)))
        else:
            raise GeometryError(f"unknown obstacle type {type(ob).__name__}")
    return out


def _validate_obstacles(obstacles, width, height):
    for ob in obstacles:
        x0, x1, y0, y1 = ob.bbox()
        if not (0 < x0 and x1 < width and 0 < y0 and y1 < height):
            raise GeometryError(f"obstacle {ob} is not strictly inside the room")
        if isinstance(ob, Rect) and not (ob.x1 > ob.x0 and ob.y1 > ob.y0):
            raise GeometryError(f"degenerate rectangle obstacle {ob}")
        if isinstance(ob, Circle) and not ob.r > 0:
            raise GeometryError(f"degenerate circle obstacle {ob}")
    for i, a in enumerate(obstacles):
        for b in obstacles[i + 1:]:
            if _obstacles_overlap(a, b):
                raise GeometryError(f"obstacles overlap: {a} and {b}")


def _obstacles_overlap(a, b) -> bool:
    if isinstance(a, Circle) and isinstance(b, Circle):
        return math.hypot(a.cx - b.cx, a.cy - b.cy) < a.r + b.r
    if isinstance(a, Rect) and isinstance(b, Rect):
        return a.x0 < b.x1 and b.x0 < a.x1 and a.y0 < b.y1 and b.y0 < a.y1
    if isinstance(a, Rect):
        a, b = b, a
    # circle a vs rect b: closest point on the rectangle to the center
    px = min(max(a.cx, b.x0), b.x1)
    py = min(max(a.cy, b.y0), b.y1)
    return math.hypot(a.cx - px, a.cy - py) < a.r


def _graded_axis(intervals_h: list[tuple[float, float, float]], landmarks) -> np.ndarray:
    """1D grid containing all landmarks, spacing <= the local target within each span."""
    marks = np.array(sorted(set(float(m) for m in landmarks)))
    pts = [marks[0]]
    for a, b in zip(marks[:-1], marks[1:]):
        mid = 0.5 * (a + b)
        h = min((h for lo, hi, h in intervals_h if lo <= mid <= hi), default=None)
        if h is None:
            raise GeometryError("axis span not covered by any spacing interval")
        n = max(1, round((b - a) / h))
        pts.extend(np.linspace(a, b, n + 1)[1:].tolist())
    return np.array(pts)


def _axis_spacing(lo, hi, base_h, refine_spans, factor):
    """Spacing intervals for one axis: base_h outside, base_h/factor inside spans."""
    cuts = {lo, hi}
    for a, b in refine_spans:
        a, b = max(lo, a), min(hi, b)
        if b > a:
            cuts.update((a, b))
    cuts = sorted(cuts)
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        f = factor if any(s <= mid <= e for s, e in refine_spans) else 1.0
        out.append((a, b, base_h / f))
    return out, [c for c in cuts if lo < c < hi]


def generate_mesh(
    width: float,
    height: float,
    *,
    target_h: float,
    exits=(),
    exit_wall: str = "right",
    obstacles=(),
    corridor_depth: float = 0.0,
    refine_factor: float = 1.0,
    snap_x=(),
    snap_y=(),
) -> Mesh:
    """Triangulate a width x height room with doors, obstacles and an exterior region.

    exits are (lo, hi) intervals in the along-wall coordinate of exit_wall
    (y for left/right walls, x for top/bottom). With corridor_depth > 0 an
    exterior region of that depth is attached behind the exit wall; the doors
    become openings in an interior partition and the far side of the exterior
    region is tagged OUTFLOW. With corridor_depth == 0 the door segments
    themselves are tagged OUTFLOW. refine_factor > 1 shrinks the grid spacing
    near doors and obstacles. snap_x/snap_y force grid lines at the given
    world coordinates (useful to align initial-data edges).
    """
    if not target_h > 0:
        raise GeometryError(f"target_h must be positive, got {target_h}")
    if not (width > 0 and height > 0):
        raise GeometryError("room dimensions must be positive")
    if corridor_depth < 0:
        raise GeometryError("corridor_depth must be nonnegative")
    if refine_factor < 1:
        raise GeometryError("refine_factor must be >= 1")
    obstacles = list(obstacles)
    _validate_obstacles(obstacles, width, height)

    room_depth, wall_len, fwd, inv = _to_canonical(exit_wall, width, height)
    gaps = _exit_intervals_canonical(exit_wall, width, height, exits)
    if corridor_depth > 0 and not gaps:
        raise GeometryError("corridor_depth > 0 requires at least one exit")
    c_obstacles = _transform_obstacles(obstacles, fwd)

    u_max = room_depth + corridor_depth
    # world grid lines x=const / y=const map to canonical u=const or v=const
    snap_u, snap_v = [], []
    for x in snap_x:
        x = float(x)
        if exit_wall == "right":
            snap_u.append(x)
        elif exit_wall == "left":
            snap_u.append(width - x)
        elif exit_wall == "bottom":
            snap_v.append(x)
        else:
            snap_v.append(width - x)
    for y in snap_y:
        y = float(y)
        if exit_wall == "right":
            snap_v.append(y)
        elif exit_wall == "left":
            snap_v.append(height - y)
        elif exit_wall == "bottom":
            snap_u.append(height - y)
        else:
            snap_u.append(y)

    lm_u = {0.0, room_depth, u_max}
    lm_v = {0.0, wall_len}
    for lo, hi in gaps:
        lm_v.update((lo, hi))
    refine_u, refine_v = [], []
    if refine_factor > 1:
        pad = 4.0 * target_h / refine_factor
        for lo, hi in gaps:
            refine_u.append((room_depth - 2.0, u_max))
            refine_v.append((lo - 2.0, hi + 2.0))
        for ob in c_obstacles:
            b0, b1, c0, c1 = ob.bbox()
            refine_u.append((b0 - pad, b1 + pad))
            refine_v.append((c0 - pad, c1 + pad))
    for ob in c_obstacles:
        if isinstance(ob, Rect):
            lm_u.update((ob.x0, ob.x1))
            lm_v.update((ob.y0, ob.y1))
    lm_u.update(u for u in snap_u if 0 < u < u_max)
    lm_v.update(v for v in snap_v if 0 < v < wall_len)

    iu, cuts_u = _axis_spacing(0.0, u_max, target_h, refine_u, refine_factor)
    iv, cuts_v = _axis_spacing(0.0, wall_len, target_h, refine_v, refine_factor)
    lm_u.update(cuts_u)
    lm_v.update(cuts_v)
    ug = _graded_axis(iu, lm_u)
    vg = _graded_axis(iv, lm_v)
    nu, nv = len(ug), len(vg)

    uu, vv = np.meshgrid(ug, vg, indexing="xy")  # shape (nv, nu)
    pts = np.stack([uu.ravel(), vv.ravel()], axis=1)

    # two triangles per grid cell, with the diagonal alternating by parity
    ci, cj = np.meshgrid(np.arange(nu - 1), np.arange(nv - 1), indexing="xy")
    ci, cj = ci.ravel(), cj.ravel()
    a = cj * nu + ci
    b = cj * nu + ci + 1
    c = (cj + 1) * nu + ci + 1
    d = (cj + 1) * nu + ci
    even = ((ci + cj) % 2 == 0)[:, None]
    tri0 = np.where(even, np.stack([a, b, c], axis=1), np.stack([a, b, d], axis=1))
    tri1 = np.where(even, np.stack([a, c, d], axis=1), np.stack([b, c, d], axis=1))
    tris = np.stack([tri0, tri1], axis=1).reshape(-1, 3).astype(np.int64)

    tol = 1e-9 * max(u_max, wall_len)

    # split the mesh along the interior partition, keeping the doors open
    if corridor_depth > 0:
        i_part = int(np.argmin(np.abs(ug - room_depth)))
        assert abs(ug[i_part] - room_depth) <= tol
        dup_map = {}
        new_pts = [pts]
        next_id = nu * nv
        for j in range(nv):
            v = vg[j]
            in_gap = any(lo - tol <= v <= hi + tol for lo, hi in gaps)
            if not in_gap:
                nid_old = j * nu + i_part
                dup_map[nid_old] = next_id
                new_pts.append(pts[nid_old][None, :])
                next_id += 1
        pts = np.concatenate(new_pts, axis=0)
        cell_i = (np.arange(len(tris)) // 2) % (nu - 1)
        right_side = cell_i >= i_part
        if dup_map:
            old = np.array(list(dup_map.keys()))
            new = np.array(list(dup_map.values()))
            remap = np.arange(len(pts))
            remap[old] = new
            tris[right_side] = remap[tris[right_side]]

    # carve obstacles: drop triangles whose centroid is inside
    cent = pts[tris].mean(axis=1)
    drop = np.zeros(len(tris), dtype=bool)
    for ob in c_obstacles:
        inside = ob.contains(cent[:, 0], cent[:, 1]) if isinstance(ob, Circle) else np.array(
            [ob.contains(x, y) for x, y in cent]
        )
        if not np.any(inside):
            raise GeometryError(
                f"target_h={target_h} too coarse to resolve obstacle {ob}"
            )
        drop |= inside
    tris = tris[~drop]

    # project still-referenced nodes that sit inside an obstacle onto its boundary
    used = np.zeros(len(pts), dtype=bool)
    used[tris.ravel()] = True
    pts = pts.copy()
    for ob in c_obstacles:
        if isinstance(ob, Circle):
            d2 = (pts[:, 0] - ob.cx) ** 2 + (pts[:, 1] - ob.cy) ** 2
            inside = used & (d2 < ob.r**2 * (1.0 - 1e-12))
            idx = np.nonzero(inside)[0]
            if len(idx):
                dvec = pts[idx] - [ob.cx, ob.cy]
                dist = np.hypot(dvec[:, 0], dvec[:, 1])
                at_center = dist == 0.0
                dvec[at_center] = (1.0, 0.0)  # center node: push along +x
                dist[at_center] = 1.0
                pts[idx] = [ob.cx, ob.cy] + dvec * (ob.r / dist)[:, None]
        else:
            inside = used & (pts[:, 0] > ob.x0) & (pts[:, 0] < ob.x1) \
                & (pts[:, 1] > ob.y0) & (pts[:, 1] < ob.y1)
            for k in np.nonzero(inside)[0]:
                pts[k] = ob.project(pts[k, 0], pts[k, 1])

    # drop unreferenced nodes and remap indices
    new_ids = -np.ones(len(pts), dtype=np.int64)
    new_ids[used] = np.arange(used.sum())
    pts = pts[used]
    tris = new_ids[tris]

    # boundary edges and tags
    edges, counts = _edge_multiplicity(tris)
    bedges = edges[counts == 1]
    u = pts[:, 0]
    v = pts[:, 1]
    tags = np.full(len(bedges), WALL, dtype=np.int8)
    if corridor_depth > 0:
        far = (np.abs(u[bedges[:, 0]] - u_max) <= tol) & (np.abs(u[bedges[:, 1]] - u_max) <= tol)
        tags[far] = OUTFLOW
    else:
        on_wall = (np.abs(u[bedges[:, 0]] - room_depth) <= tol) & (
            np.abs(u[bedges[:, 1]] - room_depth) <= tol
        )
        for lo, hi in gaps:
            in_gap = (
                (v[bedges[:, 0]] >= lo - tol)
                & (v[bedges[:, 0]] <= hi + tol)
                & (v[bedges[:, 1]] >= lo - tol)
                & (v[bedges[:, 1]] <= hi + tol)
            )
            tags[on_wall & in_gap] = OUTFLOW

    # back to world coordinates
    wx, wy = inv(pts[:, 0], pts[:, 1])
    world = np.stack([np.asarray(wx, dtype=float), np.asarray(wy, dtype=float)], axis=1)

    mesh = Mesh(world, tris, bedges, tags)
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# ASCII mesh format
# ---------------------------------------------------------------------------

def save_mesh(mesh: Mesh) -> str:
    """Serialize to the plain-text format (see load_mesh)."""
    lines = [
        f"nodes {mesh.n_nodes} triangles {mesh.n_triangles} bedges {len(mesh.boundary_edges)}"
    ]
    for x, y in mesh.nodes:
        lines.append(f"{float(x)!r} {float(y)!r}")
    for i, j, k in mesh.triangles:
        lines.append(f"{i} {j} {k}")
    for (i, j), t in zip(mesh.boundary_edges, mesh.boundary_tags):
        lines.append(f"{i} {j} {_TAG_CHARS[int(t)]}")
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> Mesh:
    """Parse the ASCII format: header `nodes N triangles T bedges B`, then
    N coordinate lines, T triangle lines, B tagged boundary-edge lines.
    `#` starts a comment; blank lines are ignored.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))

    def fail(lineno, msg):
        raise MeshFormatError(f"line {lineno}: {msg}")

    if not rows:
        raise MeshFormatError("line 1: empty mesh file")
    lineno, head = rows[0]
    if len(head) != 6 or head[0] != "nodes" or head[2] != "triangles" or head[4] != "bedges":
        fail(lineno, "expected header 'nodes N triangles T bedges B'")
    try:
        n, t, b = int(head[1]), int(head[3]), int(head[5])
    except ValueError:
        fail(lineno, "non-integer count in header")
    if n < 3 or t < 1 or b < 1:
        fail(lineno, f"empty or degenerate mesh (nodes={n}, triangles={t}, bedges={b})")
    if len(rows) - 1 != n + t + b:
        fail(rows[-1][0], f"expected {n + t + b} data lines, found {len(rows) - 1}")

    nodes = np.empty((n, 2))
    for k in range(n):
        lineno, parts = rows[1 + k]
        if len(parts) != 2:
            fail(lineno, "expected 'x y'")
        try:
            nodes[k] = float(parts[0]), float(parts[1])
        except ValueError:
            fail(lineno, "bad coordinate")
    tris = np.empty((t, 3), dtype=np.int64)
    for k in range(t):
        lineno, parts = rows[1 + n + k]
        if len(parts) != 3:
            fail(lineno, "expected 'i j k'")
        try:
            tris[k] = [int(p) for p in parts]
        except ValueError:
            fail(lineno, "bad triangle index")
        if tris[k].min() < 0 or tris[k].max() >= n:
            fail(lineno, f"triangle index out of range 0..{n - 1}")
    bedges = np.empty((b, 2), dtype=np.int64)
    tags = np.empty(b, dtype=np.int8)
    for k in range(b):
        lineno, parts = rows[1 + n + t + k]
        if len(parts) != 3:
            fail(lineno, "expected 'i j TAG'")
        try:
            bedges[k] = int(parts[0]), int(parts[1])
        except ValueError:
            fail(lineno, "bad boundary edge index")
        if bedges[k].min() < 0 or bedges[k].max() >= n:
            fail(lineno, f"boundary edge index out of range 0..{n - 1}")
        if parts[2] not in _CHAR_TAGS:
            fail(lineno, f"unknown boundary tag {parts[2]!r} (expected W or O)")
        tags[k] = _CHAR_TAGS[parts[2]]

    mesh = Mesh(nodes, tris, bedges, tags)
    try:
        mesh.validate()
    except GeometryError as exc:
        raise MeshFormatError(f"line {rows[0][0]}: invalid mesh: {exc}") from exc
    return mesh


# ---------------------------------------------------------------------------
# median-dual finite-volume geometry
# ---------------------------------------------------------------------------

@dataclass
class DualGeometry:
    """Vertex-centered control volumes from the median-dual construction.

    faces couple node pairs across the summed centroid-midpoint segments of
    the adjacent triangles; face_normal points from face_nodes[:,0] to
    face_nodes[:,1]. Boundary facets attribute half of each boundary edge to
    each of its end nodes, with the outward normal and the edge tag.
    """

    cell_area: np.ndarray        # (N,)
    cell_perimeter: np.ndarray   # (N,) total interface length incl. boundary facets
    face_nodes: np.ndarray       # (F, 2)
    face_len: np.ndarray         # (F,)
    face_normal: np.ndarray      # (F, 2)
    bf_node: np.ndarray          # (M,)
    bf_len: np.ndarray           # (M,)
    bf_normal: np.ndarray        # (M, 2)
    bf_tag: np.ndarray           # (M,)

    def __post_init__(self):
        for a in (self.cell_area, self.cell_perimeter, self.face_nodes, self.face_len,
                  self.face_normal, self.bf_node, self.bf_len, self.bf_normal, self.bf_tag):
            a.setflags(write=False)

    @property
    def n_cells(self) -> int:
        return len(self.cell_area)

    def closure_residual(self) -> np.ndarray:
        """Per-node |sum of face and facet area vectors|; zero for exact geometry."""
        n = self.n_cells
        acc = np.zeros((n, 2))
        w = self.face_len[:, None] * self.face_normal
        np.add.at(acc, self.face_nodes[:, 0], w)
        np.add.at(acc, self.face_nodes[:, 1], -w)
        np.add.at(acc, self.bf_node, self.bf_len[:, None] * self.bf_normal)
        return np.hypot(acc[:, 0], acc[:, 1])


def build_dual(mesh: Mesh) -> DualGeometry:
    """Assemble median-dual cell areas, interior faces and boundary facets."""
    p = mesh.nodes
    t = mesh.triangles
    areas = mesh.triangle_areas()
    cent = p[t].mean(axis=1)

    n_nodes = mesh.n_nodes
    cell_area = np.bincount(t.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=n_nodes)

    # per-triangle contributions to the dual face of each of its three edges
    pairs = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=0)  # (3T, 2)
    mids = 0.5 * (p[pairs[:, 0]] + p[pairs[:, 1]])
    segs = np.concatenate([cent, cent, cent], axis=0) - mids
    # rotate the midpoint->centroid segment to get its area vector, oriented a -> b
    vecs = np.stack([segs[:, 1], -segs[:, 0]], axis=1)
    along = p[pairs[:, 1]] - p[pairs[:, 0]]
    flip = np.einsum("ij,ij->i", vecs, along) < 0
    vecs[flip] *= -1.0

    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    swapped = pairs[:, 0] != lo
    vecs[swapped] *= -1.0
    keys = lo.astype(np.int64) * n_nodes + hi.astype(np.int64)
    uniq, first_idx, inv = np.unique(keys, return_index=True, return_inverse=True)
    acc = np.zeros((len(uniq), 2))
    np.add.at(acc, inv, vecs)
    face_nodes = np.stack([uniq // n_nodes, uniq % n_nodes], axis=1).astype(np.int32)
    face_len = np.hypot(acc[:, 0], acc[:, 1])
    if not np.all(face_len > 0):
        raise GeometryError("degenerate dual face (zero net area vector)")
    face_normal = acc / face_len[:, None]

    # boundary facets: half of each boundary edge per end node, outward normal
    be = mesh.boundary_edges
    ev = p[be[:, 1]] - p[be[:, 0]]
    be_len = np.hypot(ev[:, 0], ev[:, 1])
    nrm = np.stack([ev[:, 1], -ev[:, 0]], axis=1) / be_len[:, None]
    # orient away from the owning triangle (identified through the edge's dual face)
    emid = 0.5 * (p[be[:, 0]] + p[be[:, 1]])
    key_b = (np.minimum(be[:, 0], be[:, 1]).astype(np.int64) * n_nodes
             + np.maximum(be[:, 0], be[:, 1]).astype(np.int64))
    # a boundary edge occurs once among the triangle edge pairs, so the first
    # occurrence index identifies its owning triangle
    tri_of_edge = first_idx[np.searchsorted(uniq, key_b)] % len(t)
    third = cent[tri_of_edge]
    flip_b = np.einsum("ij,ij->i", nrm, third - emid) > 0
    nrm[flip_b] *= -1.0

    bf_node = np.concatenate([be[:, 0], be[:, 1]]).astype(np.int32)
    bf_len = np.concatenate([0.5 * be_len, 0.5 * be_len])
    bf_normal = np.concatenate([nrm, nrm], axis=0)
    bf_tag = np.concatenate([mesh.boundary_tags, mesh.boundary_tags]).astype(np.int8)

    per = np.zeros(n_nodes)
    np.add.at(per, face_nodes[:, 0], face_len)
    np.add.at(per, face_nodes[:, 1], face_len)
    np.add.at(per, bf_node, bf_len)

    dual = DualGeometry(
        cell_area=cell_area,
        cell_perimeter=per,
        face_nodes=face_nodes,
        face_len=face_len,
        face_normal=face_normal,
        bf_node=bf_node,
        bf_len=bf_len,
        bf_normal=bf_normal,
        bf_tag=bf_tag,
    )
    res = dual.closure_residual()
    scale = np.maximum(per, 1e-300)
    worst = float(np.max(res / scale))
    if worst > 1e-12:
        raise GeometryError(f"dual-cell closure violated: residual {worst:.3e}")
    return dual
