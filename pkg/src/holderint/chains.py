"""Straight simplices, Kuhn triangulations, dyadic interpolation and the telescope.

Chains are formal integer combinations of straight simplices.  A straight
simplex is determined by its ordered vertex list (exponential coordinates), so
a chain is stored as ``{vertices: coefficient}``; identical simplices merge and
zero coefficients are dropped, which makes every cancellation argument an
equality test.  Degenerate simplices (repeated vertices) are kept.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import sympy

from .lie import CarnotGroup
from .maps import Cell, SampledHolderMap, cube_faces, unit_cube

MAX_CUBE_DIM = 4


class _Vertex(tuple):
    """Vertex tuple with a cached hash; Fraction hashing dominates chain arithmetic otherwise."""

    def __hash__(self):
        try:
            return self._h
        except AttributeError:
            self._h = h = tuple.__hash__(self)
            return h


def _key(v):
    if type(v) is _Vertex:
        return v
    return _Vertex(v.tolist() if isinstance(v, np.ndarray) else v)


class Chain:
    """Formal sum of straight k-simplices with integer coefficients."""

    __slots__ = ("dim", "_terms")

    def __init__(self, dim: int, terms=None):
        self.dim = dim
        self._terms = {}
        if terms:
            items = terms.items() if isinstance(terms, dict) else terms
            for verts, c in items:
                self._add(tuple(_key(v) for v in verts), c)

    def _add(self, verts, c):
        if len(verts) != self.dim + 1:
            raise ValueError(f"a {self.dim}-simplex needs {self.dim + 1} vertices, got {len(verts)}")
        if any(type(v) is not _Vertex for v in verts):
            verts = tuple(_key(v) for v in verts)
        new = self._terms.get(verts, 0) + c
        if new:
            self._terms[verts] = new
        else:
            self._terms.pop(verts, None)

    @classmethod
    def simplex(cls, verts, coef=1):
        verts = [_key(v) for v in verts]
        return cls(len(verts) - 1, [(verts, coef)])

    def items(self):
        return self._terms.items()

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def copy(self) -> "Chain":
        c = Chain(self.dim)
        c._terms = dict(self._terms)
        return c

    def iadd(self, other: "Chain", scale: int = 1) -> "Chain":
        if other.dim != self.dim and other:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        for verts, c in other._terms.items():
            self._add(verts, scale * c)
        return self

    def __add__(self, other):
        return self.copy().iadd(other)

    def __sub__(self, other):
        return self.copy().iadd(other, -1)

    def __neg__(self):
        return self.copy().scale(-1)

    def __mul__(self, s: int):
        return self.copy().scale(s)

    __rmul__ = __mul__

    def scale(self, s: int) -> "Chain":
        if s == 0:
            self._terms = {}
        else:
            self._terms = {v: s * c for v, c in self._terms.items()}
        return self

    def __eq__(self, other):
        if not isinstance(other, Chain):
            return NotImplemented
        if not self and not other:
            return True
        return self.dim == other.dim and self._terms == other._terms

    def __repr__(self):
        return f"Chain(dim={self.dim}, terms={len(self._terms)})"

    def boundary(self) -> "Chain":
        out = Chain(self.dim - 1)
        if self.dim == 0:
            return out
        for verts, c in self._terms.items():
            for i in range(len(verts)):
                out._add(verts[:i] + verts[i + 1:], c if i % 2 == 0 else -c)
        return out

    def cone(self, apex) -> "Chain":
        """Cone with the given apex placed first: d(cone Z) = Z - cone(dZ)."""
        apex = _key(apex)
        out = Chain(self.dim + 1)
        for verts, c in self._terms.items():
            out._add((apex,) + verts, c)
        return out

    def vertex_array(self, dtype=float):
        """Vertices as an array (N, dim+1, n) together with coefficients (N,)."""
        if not self._terms:
            return np.zeros((0, self.dim + 1, 0)), np.zeros(0)
        verts = list(self._terms)
        arr = np.array([[[float(x) for x in v] for v in vs] for vs in verts], dtype=dtype)
        coefs = np.array([float(self._terms[v]) for v in verts])
        return arr, coefs

    def degenerate_count(self) -> int:
        return sum(1 for v in self._terms if len(set(v)) < len(v))

    # --- text export ---------------------------------------------------------
    def dumps(self) -> str:
        lines = [json.dumps({"dim": self.dim, "recipe": "straight"})]
        for verts in sorted(self._terms, key=lambda v: [[float(x) for x in p] for p in v]):
            lines.append(json.dumps({"coef": self._terms[verts],
                                     "vertices": [[_fmt(x) for x in p] for p in verts]}))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Chain":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        out = cls(head["dim"])
        for ln in lines[1:]:
            rec = json.loads(ln)
            out._add(tuple(tuple(_parse(x) for x in p) for p in rec["vertices"]), int(rec["coef"]))
        return out


def _fmt(x):
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return repr(x)
    return str(sympy.nsimplify(x))


def _parse(s):
    try:
        return Fraction(s)
    except ValueError:
        try:
            return float(s)
        except ValueError:
            return sympy.sympify(s)


# --- straight simplices --------------------------------------------------------

@dataclass(frozen=True)
class SimplexMap:
    """The straight simplex sigma_(p_0, ..., p_k) in exponential coordinates."""
    group: CarnotGroup
    vertices: tuple
    orientation: int = 1

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(_key(v) for v in self.vertices))
        if self.group.algebra.step > 3:
            raise ValueError("straight simplices need a step <= 3 group law")

    @property
    def k(self) -> int:
        return len(self.vertices) - 1

    def face(self, i: int) -> "SimplexMap":
        return SimplexMap(self.group, self.vertices[:i] + self.vertices[i + 1:], self.orientation)

    def __call__(self, bary):
        """Evaluate at barycentric coordinates, shape (..., k+1) -> (..., n)."""
        bary = np.asarray(bary)
        exact = bary.dtype == object
        P = np.array(self.vertices, dtype=object if exact else float)
        return _eval_straight(self.group, P, bary)

    @cached_property
    def expression(self):
        """Coordinates as sympy expressions in lam_1..lam_k (lam_0 = 1 - sum)."""
        lams = sympy.symbols(f"lam1:{self.k + 1}")
        lam0 = 1 - sum(lams)
        bary = np.array([lam0, *lams], dtype=object)
        P = np.array([[sympy.nsimplify(x) for x in v] for v in self.vertices], dtype=object)
        out = _eval_straight(self.group, P, bary)
        return tuple(sympy.factor_terms(sympy.cancel(sympy.expand(e))) for e in out), lams

    def is_affine(self) -> bool:
        exprs, lams = self.expression
        return all(sympy.Poly(e, *lams).total_degree() <= 1 if e.is_polynomial(*lams) else False
                   for e in exprs) if lams else True


def _eval_straight(G: CarnotGroup, P, bary):
    k = P.shape[0] - 1
    if k == 0:
        return np.broadcast_to(P[0], bary.shape[:-1] + P.shape[-1:]).copy()
    p0 = P[0]
    t = np.asarray(np.sum(bary[..., 1:], axis=-1))
    if t.dtype == object:
        safe_t = np.vectorize(lambda v: 1 if v == 0 else v, otypes=[object])(t)
    else:
        safe_t = np.where(t == 0, 1.0, t)
    mu = bary[..., 1:] / np.asarray(safe_t)[..., None]
    tau = _eval_straight(G, P[1:], mu)
    v = G.mul_exp(-p0, tau)
    scaled = v * np.asarray(t)[..., None]
    return G.mul_exp(np.broadcast_to(p0, scaled.shape), scaled)


def straight_simplex(G: CarnotGroup, points) -> SimplexMap:
    pts = []
    for p in points:
        if hasattr(p, "chart"):
            p = G.to_exp(p, p.chart)
        pts.append(_key(p))
    return SimplexMap(G, tuple(pts))


# --- Kuhn triangulation -----------------------------------------------------

def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            if seen[i] > seen[j]:
                sign = -sign
    return sign


def kuhn_simplices(k: int):
    """Increasing vertex chains of {0,1}^k with their orientation signs."""
    if not 0 <= k <= MAX_CUBE_DIM:
        raise ValueError(f"cube dimension must be in [0, {MAX_CUBE_DIM}], got {k}")
    out = []
    for perm in itertools.permutations(range(k)):
        corner = [0] * k
        chain = [tuple(corner)]
        for axis in perm:
            corner[axis] = 1
            chain.append(tuple(corner))
        out.append((_perm_sign(perm), tuple(chain)))
    return out


def orientation_sign(corners) -> int:
    """sign det(s(1)-s(0), ..., s(k)-s(0)) for corners of the unit cube."""
    k = len(corners) - 1
    if k == 0:
        return 1
    M = np.array([[c - b for c, b in zip(corners[i], corners[0])] for i in range(1, k + 1)], dtype=float)
    return int(np.sign(round(np.linalg.det(M))))


def triangulate_cube(k: int) -> Chain:
    """Signed Kuhn triangulation of [0,1]^k as a chain of linear simplices in R^k."""
    if not 1 <= k <= MAX_CUBE_DIM:
        raise ValueError(f"cube dimension must be in [1, {MAX_CUBE_DIM}], got {k}")
    out = Chain(k)
    for sign, corners in kuhn_simplices(k):
        out._add(tuple(tuple(Fraction(c) for c in v) for v in corners), sign)
    return out


def cube_boundary_chain(k: int) -> Chain:
    """Triangulated boundary of [0,1]^k with outward orientations."""
    out = Chain(k - 1)
    for sign, face in cube_faces(unit_cube(k)):
        for s, corners in kuhn_simplices(k - 1):
            u = np.array([[Fraction(c) for c in v] for v in corners], dtype=object).reshape(len(corners), k - 1)
            pts = face(u)
            out._add(tuple(_key(p) for p in pts), sign * s)
    return out


# --- interpolation ------------------------------------------------------------

def _grid_chain(vals, k: int, origin, step: int) -> Chain:
    """Kuhn chain of the cube with corner ``origin`` and side ``step`` in a value grid."""
    out = Chain(k)
    for sign, corners in kuhn_simplices(k):
        verts = tuple(_key(vals[tuple(o + step * c for o, c in zip(origin, corner))]) for corner in corners)
        out._add(verts, sign)
    return out


def interpolate_grid(vals, k: int, step: int = 1) -> Chain:
    """The interpolation chain of a value grid of shape (N+1,)*k + (n,) using cubes of ``step``."""
    N = vals.shape[0] - 1
    out = Chain(k)
    for origin in itertools.product(range(0, N, step), repeat=k):
        out.iadd(_grid_chain(vals, k, origin, step))
    return out


def interpolate(F: SampledHolderMap, j: int, cell: Cell | None = None, exact: bool = True) -> Chain:
    """F_j as a chain: k! 2^{jk} straight simplices on the level-j dyadic grid."""
    cell = unit_cube(F.dim) if cell is None else cell
    vals = F.grid(j, cell, exact=exact)
    return interpolate_grid(vals, cell.k)


# --- telescope ----------------------------------------------------------------

def _face_grid(vals, i: int, pos: int):
    return np.take(vals, pos, axis=i)


def _block_telescope(block, k: int):
    """(H', K') for a 3^k block of values with the standard orientation."""
    if k == 1:
        return Chain(1), Chain.simplex([block[0], block[1], block[2]])
    H = Chain(k)
    H_faces = Chain(k - 1)
    for i in range(k):
        for x in (0, 1):
            eps = (-1) ** (i + 1 + x)
            hf, kf = _block_telescope(_face_grid(block, i, 2 * x), k - 1)
            H.iadd(kf, eps)
            H_faces.iadd(hf, eps)
    if H_faces:
        raise AssertionError("codimension-2 contributions failed to cancel")
    E = interpolate_grid(block, k, 1)
    Fc = interpolate_grid(block, k, 2)
    Z = E - Fc - H
    return H, Z.cone(block[(1,) * k])


@dataclass
class TelescopeDecomposition:
    level: int
    k: int
    E: Chain          # F_{j+1}
    F: Chain          # F_j
    H_prime: Chain
    K_prime: Chain
    face_terms: dict = field(default_factory=dict)   # outer face id -> chain
    source: str = "cube"
    inner_residue: int = 0     # simplices left on shared faces (0 when they cancel)

    def residual(self) -> Chain:
        return self.E - self.F - self.H_prime - self.K_prime.boundary()

    def identity_holds(self) -> bool:
        return self.residual().is_zero()

    @property
    def n_face_terms(self) -> int:
        return len(self.face_terms)


def _grid_telescope(vals, k: int, sign: int, K: Chain, faces: dict):
    """Accumulate per-cube telescope pieces of a level-(j+1) grid into K and faces.

    ``faces`` maps a face id to ``[net orientation, chain]``; faces shared by two
    cubes end with net orientation 0 and (if the construction is right) a zero chain.
    """
    N = vals.shape[0] - 1
    for origin in itertools.product(range(0, N, 2), repeat=k):
        block = vals[tuple(slice(o, o + 3) for o in origin)]
        for i in range(k):
            for x in (0, 1):
                eps = (-1) ** (i + 1 + x) * sign
                face = _face_grid(block, i, 2 * x)
                entry = faces.setdefault(_face_id(face), [0, Chain(k)])
                entry[0] += eps
                if k > 1:
                    _, kf = _block_telescope(face, k - 1)
                    entry[1].iadd(kf, eps)
        _, kb = _block_telescope(block, k)
        K.iadd(kb, sign)


def _face_id(face):
    # faces are identified by their vertex values so that cells of a complex can share them
    return frozenset(_key(v) for v in face.reshape(-1, face.shape[-1]))


def _collect(faces, k):
    H = Chain(k)
    for _, chain in faces.values():
        H.iadd(chain)
    outer = {f: e[1] for f, e in faces.items() if e[0] != 0}
    inner_residue = sum(len(e[1]) for e in faces.values() if e[0] == 0)
    return H, outer, inner_residue


def telescope(F: SampledHolderMap, j: int, cell: Cell | None = None, exact: bool = True) -> TelescopeDecomposition:
    """F_{j+1} - F_j = H'_j + dK'_j on one cube."""
    cell = unit_cube(F.dim) if cell is None else cell
    vals = F.grid(j + 1, cell, exact=exact)
    k = cell.k
    K, faces = Chain(k + 1), {}
    _grid_telescope(vals, k, 1, K, faces)
    H, outer, residue = _collect(faces, k)
    E = interpolate_grid(vals, k, 1)
    Fj = interpolate_grid(vals, k, 2)
    return TelescopeDecomposition(j, k, E, Fj, H, K, outer, "cube", residue)


def interpolate_complex(F: SampledHolderMap, cells, j: int, exact: bool = True) -> Chain:
    """Interpolation chain of a cube complex ``[(sign, cell)]``."""
    k = cells[0][1].k
    out = Chain(k)
    for sign, cell in cells:
        vals = F.grid(j, cell, exact=exact)
        out.iadd(interpolate_grid(vals, k), sign)
    return out


def telescope_complex(F: SampledHolderMap, cells, j: int, exact: bool = True) -> TelescopeDecomposition:
    """Telescope over an oriented cube complex; H' keeps only faces on the complex boundary."""
    k = cells[0][1].k
    K, faces = Chain(k + 1), {}
    E, Fj = Chain(k), Chain(k)
    for sign, cell in cells:
        vals = F.grid(j + 1, cell, exact=exact)
        _grid_telescope(vals, k, sign, K, faces)
        E.iadd(interpolate_grid(vals, k, 1), sign)
        Fj.iadd(interpolate_grid(vals, k, 2), sign)
    H, outer, residue = _collect(faces, k)
    return TelescopeDecomposition(j, k, E, Fj, H, K, outer, "complex", residue)


def cube_boundary_complex(k_plus_1: int):
    """Oriented faces of [0,1]^{k+1}: a closed cube complex of dimension k."""
    return cube_faces(unit_cube(k_plus_1))


# --- pseudomanifolds ------------------------------------------------------------

def pseudomanifold_from_simplex(k: int, vertices=None):
    """Split the k-simplex into k+1 cubes {x_i >= max_{j != i} x_j}.

    Cube i is parametrised projectively: u in [0,1]^k gives barycentric weights
    proportional to 1 at vertex i and u_a at the other vertices (ascending).
    ``vertices`` embeds the simplex (default: the standard simplex in R^k with
    vertex 0 at the origin).
    """
    if vertices is None:
        vertices = [tuple(Fraction(int(i == c + 1)) for c in range(k)) for i in range(k + 1)]
    vertices = tuple(tuple(Fraction(x) for x in v) for v in vertices)
    return [Cell(k, "projective", vertices[0], Fraction(1), (), vertices, i) for i in range(k + 1)]


def cube_corners(cell: Cell):
    """Corner points of a cell keyed by their 0/1 labels."""
    out = {}
    for corner in itertools.product((0, 1), repeat=cell.k):
        u = np.array([Fraction(c) for c in corner], dtype=object).reshape(1, cell.k)
        out[corner] = _key(cell(u)[0])
    return out


def polygon_area(points) -> Fraction:
    pts = list(points)
    acc = Fraction(0)
    for (x0, y0), (x1, y1) in zip(pts, pts[1:] + pts[:1]):
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2


def cell_orientation(cell: Cell) -> int:
    """Sign of the Jacobian of a projective or affine cell relative to its ambient chart."""
    eps = 1e-6
    c = np.full((1, cell.k), 0.5)
    base = np.asarray(cell(c), dtype=float)[0]
    cols = []
    for a in range(cell.k):
        d = c.copy()
        d[0, a] += eps
        cols.append((np.asarray(cell(d), dtype=float)[0] - base) / eps)
    J = np.array(cols).T
    if cell.kind == "projective":
        V = np.array(cell.vertices, dtype=float)
        basis = (V[1:] - V[0]).T
        J = np.linalg.lstsq(basis, J, rcond=None)[0]
    return int(np.sign(np.linalg.det(J)))


def pseudomanifold_cube_complex(simplices, coords):
    """Oriented cube complex of an oriented pseudomanifold.

    ``simplices`` are ``(sign, vertex labels)`` with labels sorted ascending (a
    global order keeps face parametrisations consistent between neighbours);
    ``coords`` maps labels to points of R^N.
    """
    cells = []
    for sign, labels in simplices:
        if list(labels) != sorted(labels):
            raise ValueError("simplex labels must be sorted ascending")
        verts = [coords[l] for l in labels]
        for cell in pseudomanifold_from_simplex(len(labels) - 1, verts):
            cells.append((sign * _local_cell_sign(cell), cell))
    return cells


def _local_cell_sign(cell: Cell) -> int:
    std = Cell(cell.k, "projective", (), Fraction(1), (),
               tuple(tuple(Fraction(int(i == c + 1)) for c in range(cell.k)) for i in range(cell.k + 1)), cell.apex)
    return cell_orientation(std)


def complex_facets(cells):
    """Count facet occurrences (keyed by corner point sets) across a cube complex."""
    counts = {}
    for _, cell in cells:
        corners = cube_corners(cell)
        for i in range(cell.k):
            for x in (0, 1):
                facet = frozenset(p for c, p in corners.items() if c[i] == x)
                counts[facet] = counts.get(facet, 0) + 1
    return counts
