"""P1 triangle meshes, nodal functions and quadrature on the plane."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mesh", "DiscreteFunction", "QuadratureRule", "ONE_POINT", "THREE_POINT",
    "build_rect_mesh", "build_disc_mesh", "element_gradient", "integrate",
    "mesh_to_csv", "function_to_csv", "evaluate_at",
]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (k, 3) barycentric coordinates
    weights: np.ndarray  # (k,), sums to one
    degree: int


ONE_POINT = QuadratureRule(np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0]), 1)
THREE_POINT = QuadratureRule(
    np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.full(3, 1 / 3), 2)

RULES = {1: ONE_POINT, 3: THREE_POINT}


def _rule(rule):
    if isinstance(rule, QuadratureRule):
        return rule
    return RULES[rule]


class Mesh:
    """Conforming triangulation with a Dirichlet flag per vertex.

    Geometric quantities (areas, basis gradients, quadrature points) are
    computed once on construction. The mesh is treated as immutable; a
    private cache stores sampled field values keyed by field and rule.
    """

    def __init__(self, vertices, triangles, boundary_mask):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        self.boundary_mask = np.asarray(boundary_mask, dtype=bool)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (n, 2)")
        if self.boundary_mask.shape != (len(self.vertices),):
            raise ValueError("boundary_mask must have one flag per vertex")

        P = self.vertices[self.triangles]          # (m, 3, 2)
        e1 = P[:, 1] - P[:, 0]
        e2 = P[:, 2] - P[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        if np.any(det <= 0):
            bad = int(np.flatnonzero(det <= 0)[0])
            raise ValueError(f"triangle {bad} has non-positive signed area")
        self.areas = 0.5 * det
        # gradients of the barycentric basis functions, (m, 3, 2)
        g = np.empty((len(det), 3, 2))
        g[:, 1, 0] = e2[:, 1] / det
        g[:, 1, 1] = -e2[:, 0] / det
        g[:, 2, 0] = -e1[:, 1] / det
        g[:, 2, 1] = e1[:, 0] / det
        g[:, 0] = -g[:, 1] - g[:, 2]
        self.basis_gradients = g
        self.free = np.flatnonzero(~self.boundary_mask)
        self._cache = {}

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def quadrature_points(self, rule=3):
        """Physical quadrature points, shape (m, k, 2)."""
        rule = _rule(rule)
        P = self.vertices[self.triangles]
        return np.einsum("kj,mjd->mkd", rule.points, P)

    def sample(self, field, rule=3):
        """Values of a :class:`ScalarField` at quadrature points, shape (m, k)."""
        rule = _rule(rule)
        key = (field.expr, rule.degree)
        if key not in self._cache:
            X = self.quadrature_points(rule)
            self._cache[key] = field(X[..., 0], X[..., 1])
        return self._cache[key]

    def values_at(self, nodal, rule=3):
        """Interpolated nodal values at quadrature points, shape (m, k)."""
        return np.asarray(nodal)[self.triangles] @ _rule(rule).points.T

    def gradients(self, nodal):
        """Element gradients of a nodal array, shape (m, 2)."""
        return np.einsum("mj,mjd->md", np.asarray(nodal)[self.triangles], self.basis_gradients)

    def assemble(self, local):
        """Scatter per-element per-vertex contributions (m, 3) to nodes."""
        return np.bincount(self.triangles.ravel(), weights=np.ravel(local),
                           minlength=self.n_vertices)

    def edge_counts(self):
        edges = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        uniq, counts = np.unique(edges, axis=0, return_counts=True)
        return uniq, counts

    def check(self):
        """Validate the mesh invariants; raises ValueError on failure."""
        edges, counts = self.edge_counts()
        if np.any(counts > 2):
            raise ValueError("an edge is shared by more than two triangles")
        rim = edges[counts == 1]
        on_rim = np.zeros(self.n_vertices, dtype=bool)
        on_rim[rim.ravel()] = True
        if not np.array_equal(on_rim, self.boundary_mask):
            raise ValueError("boundary_mask does not match the boundary edges")
        return True


def build_rect_mesh(x0, y0, x1, y1, nx, ny, pattern="crisscross") -> Mesh:
    """Structured mesh of ``[x0,x1] x [y0,y1]`` with ``2*nx*ny`` triangles.

    ``pattern="crisscross"`` alternates the cell diagonal in a checkerboard,
    which keeps the mesh symmetric and nested under uniform 2x refinement;
    ``"diagonal"`` uses the same diagonal in every cell.
    """
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate rectangle")
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b = idx[j, i], idx[j, i + 1]
            c, d = idx[j + 1, i + 1], idx[j + 1, i]
            if pattern == "crisscross" and (i + j) % 2:
                tris += [(a, b, d), (b, c, d)]
            else:
                tris += [(a, b, c), (a, c, d)]
    bnd = np.zeros(len(verts), dtype=bool)
    bnd[idx[0, :]] = bnd[idx[-1, :]] = bnd[idx[:, 0]] = bnd[idx[:, -1]] = True
    return Mesh(verts, np.array(tris), bnd)


def build_disc_mesh(center, R, levels) -> Mesh:
    """Polygonal disc of radius ``R`` from concentric rings.

    Ring ``k`` (``k = 1..levels``) has ``6k`` vertices at radius ``kR/levels``;
    neighbouring rings are stitched by advancing along both rings in angle.
    """
    if not R > 0:
        raise ValueError("radius must be positive")
    if levels < 1:
        raise ValueError("levels must be at least 1")
    cx, cy = center
    verts = [(cx, cy)]
    rings = [np.array([0])]
    angles = [np.array([0.0])]
    for k in range(1, levels + 1):
        n = 6 * k
        th = 2 * np.pi * np.arange(n) / n
        start = len(verts)
        rad = R * k / levels
        verts += [(cx + rad * math.cos(a), cy + rad * math.sin(a)) for a in th]
        rings.append(np.arange(start, start + n))
        angles.append(th)
    tris = []
    for k in range(1, levels + 1):
        inner, outer = rings[k - 1], rings[k]
        ai, ao = angles[k - 1], angles[k]
        if len(inner) == 1:
            for j in range(len(outer)):
                tris.append((inner[0], outer[j], outer[(j + 1) % len(outer)]))
            continue
        i = j = 0
        ni, no = len(inner), len(outer)
        while i < ni or j < no:
            next_i = ai[i + 1] if i + 1 < ni else 2 * np.pi
            next_o = ao[j + 1] if j + 1 < no else 2 * np.pi
            if j < no and (i >= ni or next_o <= next_i):
                tris.append((inner[i % ni], outer[j], outer[(j + 1) % no]))
                j += 1
            else:
                tris.append((inner[i], outer[j % no], inner[(i + 1) % ni]))
                i += 1
    verts = np.array(verts)
    tris = np.array(tris)
    P = verts[tris]
    det = ((P[:, 1, 0] - P[:, 0, 0]) * (P[:, 2, 1] - P[:, 0, 1])
           - (P[:, 1, 1] - P[:, 0, 1]) * (P[:, 2, 0] - P[:, 0, 0]))
    flip = det < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    bnd = np.zeros(len(verts), dtype=bool)
    bnd[rings[-1]] = True
    return Mesh(verts, tris, bnd)


class DiscreteFunction:
    """Nodal values of a continuous piecewise-linear function.

    With ``dirichlet=True`` (the default) the function belongs to the
    zero-trace space and its values at boundary vertices must be zero.
    Unconstrained functions are used for plain Lebesgue-type modulars.
    """

    def __init__(self, mesh, values, dirichlet=True):
        values = np.array(values, dtype=float)
        if values.shape != (mesh.n_vertices,):
            raise ValueError(f"expected {mesh.n_vertices} nodal values, got {values.shape}")
        if dirichlet and np.any(values[mesh.boundary_mask] != 0):
            raise ValueError("nonzero value at a Dirichlet-constrained vertex")
        self.mesh = mesh
        self.values = values
        self.dirichlet = dirichlet

    @classmethod
    def interpolate(cls, mesh, func, dirichlet=True):
        """Nodal interpolant of ``func(x, y)``; boundary values are zeroed
        when ``dirichlet`` is set."""
        v = np.broadcast_to(np.asarray(func(mesh.vertices[:, 0], mesh.vertices[:, 1]), float),
                            (mesh.n_vertices,)).copy()
        if dirichlet:
            v[mesh.boundary_mask] = 0.0
        return cls(mesh, v, dirichlet)

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n_vertices))

    def with_values(self, values):
        return DiscreteFunction(self.mesh, values, self.dirichlet)

    def __add__(self, other):
        return DiscreteFunction(self.mesh, self.values + _vals(other),
                                self.dirichlet and getattr(other, "dirichlet", True))

    def __sub__(self, other):
        return DiscreteFunction(self.mesh, self.values - _vals(other),
                                self.dirichlet and getattr(other, "dirichlet", True))

    def __mul__(self, scalar):
        return DiscreteFunction(self.mesh, self.values * float(scalar), self.dirichlet)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return DiscreteFunction(self.mesh, self.values / float(scalar), self.dirichlet)

    def __neg__(self):
        return self * -1.0

    def gradients(self):
        return self.mesh.gradients(self.values)

    def at_quadrature(self, rule=3):
        return self.mesh.values_at(self.values, rule)

    def __repr__(self):
        return f"DiscreteFunction(n={len(self.values)}, max|u|={np.abs(self.values).max():.3g})"


def _vals(u):
    return u.values if isinstance(u, DiscreteFunction) else np.asarray(u, dtype=float)


def element_gradient(u: DiscreteFunction, t: int):
    g = u.mesh.basis_gradients[t].T @ u.values[u.mesh.triangles[t]]
    return float(g[0]), float(g[1])


def integrate(mesh: Mesh, density, rule=1) -> float:
    """Integrate ``density(points, element_index)`` over the mesh.

    ``points`` has shape (m, k, 2) and ``element_index`` shape (m, 1); the
    density must return an (m, k) array (or something broadcastable).
    """
    rule = _rule(rule)
    X = mesh.quadrature_points(rule)
    vals = np.broadcast_to(np.asarray(density(X, np.arange(mesh.n_triangles)[:, None]), float),
                           X.shape[:2])
    bad = ~np.isfinite(vals)
    if np.any(bad):
        t = int(np.flatnonzero(bad.any(axis=1))[0])
        raise FloatingPointError(f"non-finite density on element {t}")
    return float(np.sum(mesh.areas * (vals @ rule.weights)))


def evaluate_at(u: DiscreteFunction, points, tol=1e-10, chunk=256):
    """Piecewise linear value of ``u`` at arbitrary points; NaN outside the mesh."""
    mesh = u.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P = mesh.vertices[mesh.triangles]                 # (m, 3, 2)
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    out = np.full(len(pts), np.nan)
    vals = u.values[mesh.triangles]
    for lo in range(0, len(pts), chunk):
        d = pts[lo:lo + chunk, None, :] - P[None, :, 0]   # (c, m, 2)
        b1 = (d[..., 0] * e2[:, 1] - d[..., 1] * e2[:, 0]) / det
        b2 = (e1[:, 0] * d[..., 1] - e1[:, 1] * d[..., 0]) / det
        b0 = 1 - b1 - b2
        worst = np.minimum(np.minimum(b0, b1), b2)
        t = np.argmax(worst, axis=1)
        rows = np.arange(len(t))
        ok = worst[rows, t] >= -tol
        v = (b0[rows, t] * vals[t, 0] + b1[rows, t] * vals[t, 1] + b2[rows, t] * vals[t, 2])
        out[lo:lo + chunk] = np.where(ok, v, np.nan)
    return out


def mesh_to_csv(mesh: Mesh) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["VERTICES"])
    w.writerow(["id", "x", "y", "boundary"])
    for i, ((x, y), b) in enumerate(zip(mesh.vertices, mesh.boundary_mask)):
        w.writerow([i, f"{x:.17g}", f"{y:.17g}", int(b)])
    w.writerow(["TRIANGLES"])
    w.writerow(["id", "v0", "v1", "v2"])
    for i, (a, b, c) in enumerate(mesh.triangles):
        w.writerow([i, a, b, c])
    return buf.getvalue()


def function_to_csv(u: DiscreteFunction) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "value"])
    for (x, y), v in zip(u.mesh.vertices, u.values):
        w.writerow([f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])
    return buf.getvalue()
