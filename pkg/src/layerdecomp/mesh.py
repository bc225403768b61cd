"""Closed oriented triangle meshes: I/O, generators, validation and topology."""
from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_ICOSPHERE_SUBDIVISIONS = 7


class MeshError(ValueError):
    """Raised for unreadable or invalid surface meshes."""


@dataclass(frozen=True)
class TopologySummary:
    V: int
    E: int
    F: int
    euler_characteristic: int
    genus: int
    b1_boundary: int
    b1_interior: int
    b1_exterior: int
    component_count: int

    def as_dict(self) -> dict:
        return {
            "V": self.V,
            "E": self.E,
            "F": self.F,
            "chi": self.euler_characteristic,
            "genus": self.genus,
            "b1_boundary": self.b1_boundary,
            "b1_interior": self.b1_interior,
            "b1_exterior": self.b1_exterior,
            "component_count": self.component_count,
        }


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Validated closed triangle mesh with frozen per-panel geometry.

    Triangles are counterclockwise seen from outside, so ``normals`` point
    out of the enclosed domain.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = field(init=False)
    areas: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)
    diameters: np.ndarray = field(init=False)
    name: str = "mesh"

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must have shape (F, 3)")
        if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
            raise MeshError("triangle index out of range")
        p = verts[tris]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        twice_area = np.linalg.norm(cross, axis=1)
        diam = np.max(
            np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2), axis=1
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            normals = cross / twice_area[:, None]
        for name, arr in [
            ("vertices", verts),
            ("triangles", tris),
            ("normals", normals),
            ("areas", 0.5 * twice_area),
            ("centroids", p.mean(axis=1)),
            ("diameters", diam),
        ]:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_panels(self) -> int:
        return len(self.triangles)

    @property
    def panel_vertices(self) -> np.ndarray:
        """(F, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def volume(self) -> float:
        return float(np.sum(self.areas * np.einsum("ij,ij->i", self.centroids, self.normals)) / 3.0)

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.triangles).tobytes())
        return h.hexdigest()[:16]

    def edges(self) -> np.ndarray:
        """Unique undirected edges, shape (E, 2), sorted per row."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def summary(self, topo: TopologySummary | None = None) -> dict:
        topo = topo or topology(self)
        out = topo.as_dict()
        out.update(area=self.total_area, volume=self.volume, panels=self.n_panels)
        return out


def validate(mesh: SurfaceMesh) -> SurfaceMesh:
    """Check closedness, orientation, outward normals and panel sizes.

    Returns the mesh unchanged so calls can be chained.
    """
    tris = mesh.triangles
    if len(tris) == 0:
        raise MeshError("mesh has no triangles")
    directed = Counter()
    for t in tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            if a == b:
                raise MeshError(f"triangle with repeated vertex {a}")
            directed[(int(a), int(b))] += 1
    for (a, b), count in directed.items():
        if count > 1:
            raise MeshError(
                f"inconsistent orientation at edge ({a}, {b}): "
                f"directed edge used by {count} triangles"
            )
        rev = directed.get((b, a), 0)
        if rev == 0:
            n_undirected = count
            raise MeshError(
                f"edge ({a}, {b}) is not shared by two triangles "
                f"({n_undirected} incident); mesh is open or non-manifold"
            )
    bbox = np.ptp(mesh.vertices, axis=0)
    min_area = 1e-12 * float(bbox @ bbox)
    bad = np.flatnonzero(mesh.areas <= min_area)
    if bad.size:
        raise MeshError(f"degenerate panels: {bad[:10].tolist()}")
    if not mesh.volume > 0:
        raise MeshError(
            f"normals point inward (signed volume {mesh.volume:.6g}); "
            "triangles must be counterclockwise seen from outside"
        )
    return mesh


def _components(n_vertices: int, triangles: np.ndarray) -> int:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]]])
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n_vertices, n_vertices))
    used = np.unique(triangles)
    n, labels = connected_components(adj, directed=False)
    return len(np.unique(labels[used]))


def topology(
    mesh: SurfaceMesh,
    b1_interior: int | None = None,
    b1_exterior: int | None = None,
) -> TopologySummary:
    """Euler characteristic, genus and first Betti numbers.

    The interior/exterior split of ``b1_boundary`` defaults to ``(g, g)``,
    the value for an unknotted handlebody; pass both overrides for other
    embeddings.
    """
    V = len(np.unique(mesh.triangles))
    E = len(mesh.edges())
    F = mesh.n_panels
    chi = V - E + F
    comps = _components(len(mesh.vertices), mesh.triangles)
    # connected closed orientable surfaces have chi = 2 - 2g each
    genus = (2 * comps - chi) // 2
    b1 = 2 * genus
    if (b1_interior is None) != (b1_exterior is None):
        raise ValueError("override both b1_interior and b1_exterior or neither")
    if b1_interior is None:
        b1_interior = b1_exterior = genus
    if b1_interior + b1_exterior != b1 or min(b1_interior, b1_exterior) < 0:
        raise ValueError(
            f"b1_interior + b1_exterior must equal b1_boundary = {b1}"
        )
    return TopologySummary(V, E, F, chi, genus, b1, b1_interior, b1_exterior, comps)


def require_connected(mesh: SurfaceMesh) -> None:
    n = _components(len(mesh.vertices), mesh.triangles)
    if n != 1:
        raise MeshError(f"mesh has {n} connected components; only connected surfaces are supported")


# ---------------------------------------------------------------- generators

def _icosahedron() -> tuple[np.ndarray, np.ndarray]:
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return verts / np.linalg.norm(verts, axis=1, keepdims=True), faces


def make_icosphere(subdivisions: int = 3, radius: float = 1.0) -> SurfaceMesh:
    """Geodesic sphere with ``20 * 4**subdivisions`` panels."""
    if not 0 <= subdivisions <= MAX_ICOSPHERE_SUBDIVISIONS:
        raise MeshError(f"subdivisions must be in [0, {MAX_ICOSPHERE_SUBDIVISIONS}]")
    if radius <= 0:
        raise MeshError("radius must be positive")
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new, dtype=np.int64)
    mesh = SurfaceMesh(radius * np.array(verts), faces, name=f"icosphere:{subdivisions}:{radius:g}")
    return validate(mesh)


def make_torus(n_major: int = 24, n_minor: int = 16, R: float = 2.0, r: float = 0.5) -> SurfaceMesh:
    """Structured torus around the z axis with ``2 * n_major * n_minor`` panels."""
    if n_major < 3 or n_minor < 3:
        raise MeshError("n_major and n_minor must be at least 3")
    if not 0 < r < R:
        raise MeshError("torus radii must satisfy 0 < r < R")
    u = 2 * np.pi * np.arange(n_major) / n_major
    v = 2 * np.pi * np.arange(n_minor) / n_minor
    uu, vv = np.meshgrid(u, v, indexing="ij")
    rho = R + r * np.cos(vv)
    verts = np.stack([rho * np.cos(uu), rho * np.sin(uu), r * np.sin(vv)], axis=-1).reshape(-1, 3)

    def idx(i, j):
        return (i % n_major) * n_minor + (j % n_minor)

    faces = []
    for i in range(n_major):
        for j in range(n_minor):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            # (u, v) is a right-handed chart w.r.t. the outward normal
            faces.append([a, b, c])
            faces.append([a, c, d])
    mesh = SurfaceMesh(verts, np.array(faces, dtype=np.int64), name=f"torus:{n_major}:{n_minor}:{R:g}:{r:g}")
    return validate(mesh)


# ---------------------------------------------------------------------- I/O

def _read_off(text: str) -> tuple[np.ndarray, np.ndarray]:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    tokens = " ".join(ln for ln in lines if ln).split()
    if not tokens or not tokens[0].upper().endswith("OFF"):
        raise MeshError("missing OFF header")
    pos = 1
    try:
        nv, nf = int(tokens[pos]), int(tokens[pos + 1])
        pos += 3
        verts = np.array(tokens[pos: pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for k in range(nf):
            n = int(tokens[pos])
            if n != 3:
                raise MeshError(f"face {k} has {n} vertices; only triangles are supported")
            faces.append([int(tokens[pos + 1]), int(tokens[pos + 2]), int(tokens[pos + 3])])
            pos += 1 + n
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed OFF data: {exc}") from exc
    return verts, np.array(faces, dtype=np.int64)


def _read_obj(text: str) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        try:
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise MeshError(f"line {lineno}: face with {len(idx)} vertices; only triangles are supported")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
        except ValueError as exc:
            raise MeshError(f"line {lineno}: {exc}") from exc
    if not verts or not faces:
        raise MeshError("OBJ file has no vertices or faces")
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


def load_mesh(path: str | Path, fmt: str | None = None) -> SurfaceMesh:
    """Read and validate an OFF or OBJ triangle mesh."""
    path = Path(path)
    if not path.exists():
        raise MeshError(f"no such file: {path}")
    fmt = (fmt or path.suffix.lstrip(".")).upper()
    text = path.read_text()
    if fmt == "OFF":
        verts, faces = _read_off(text)
    elif fmt == "OBJ":
        verts, faces = _read_obj(text)
    else:
        raise MeshError(f"unsupported mesh format {fmt!r}")
    return validate(SurfaceMesh(verts, faces, name=path.name))


def save_mesh(mesh: SurfaceMesh, path: str | Path) -> None:
    path = Path(path)
    fmt = path.suffix.lstrip(".").upper()
    if fmt == "OFF":
        lines = ["OFF", f"{len(mesh.vertices)} {mesh.n_panels} 0"]
        lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
        lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    elif fmt == "OBJ":
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    else:
        raise MeshError(f"unsupported mesh format {fmt!r}")
    path.write_text("\n".join(lines) + "\n")


def bundled_mesh_path(name: str) -> Path:
    return Path(__file__).parent / "data" / name


def from_spec(spec: str) -> SurfaceMesh:
    """Build a mesh from ``icosphere:k:r`` or ``torus:nu:nv:R:r``."""
    kind, *args = spec.split(":")
    try:
        if kind == "icosphere":
            k = int(args[0]) if args else 3
            radius = float(args[1]) if len(args) > 1 else 1.0
            return make_icosphere(k, radius)
        if kind == "torus":
            defaults = [24, 16, 2.0, 0.5]
            vals = args + [str(d) for d in defaults[len(args):]]
            return make_torus(int(vals[0]), int(vals[1]), float(vals[2]), float(vals[3]))
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"bad generator spec {spec!r}: {exc}") from exc
    raise MeshError(f"unknown generator {kind!r}")
