"""Rectangular plate, polyline crack, decomposition and boundary sampling.

The plate is split into two subdomains along the "spine": the crack polyline
extended from each active tip along its tangent until it meets the outer
boundary.  Crack faces are physical traction-free boundaries (one coincident
copy per subdomain); the tangent extensions are artificial interfaces where
displacement and traction continuity is enforced.  Subdomain 1 is the
positive side of the spine (counter-clockwise left of its orientation),
subdomain 2 the negative side.

All lengths in mm; points are complex x + i y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle centered at the origin: |x| <= half_width, |y| <= half_height."""

    half_width: float
    half_height: float

    def __post_init__(self):
        if self.half_width <= 0 or self.half_height <= 0:
            raise ValueError("domain half sizes must be positive")

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        return (abs(z.real) <= self.half_width - margin
                and abs(z.imag) <= self.half_height - margin)

    def distance_to_boundary(self, z: complex) -> float:
        return min(
            self.half_width - abs(z.real),
            self.half_height - abs(z.imag),
        )

    @property
    def length_scale(self) -> float:
        return 2.0 * max(self.half_width, self.half_height)


@dataclass(frozen=True)
class Loads:
    """Uniform traction vectors (tx + i ty, MPa) applied on each outer edge."""

    top: complex = 0j
    bottom: complex = 0j
    left: complex = 0j
    right: complex = 0j

    @classmethod
    def uniaxial_tension(cls, sigma: float) -> "Loads":
        return cls(top=1j * sigma, bottom=-1j * sigma)

    @classmethod
    def pure_shear(cls, tau: float) -> "Loads":
        # self-equilibrated: tangential on top/bottom, opposite sense on sides
        return cls(top=complex(tau, 0), bottom=complex(-tau, 0),
                   right=1j * tau, left=-1j * tau)

    def edge(self, name: str) -> complex:
        return getattr(self, name)


@dataclass
class CrackGeometry:
    """Polyline crack. ``center`` cracks have two active tips (both polyline
    ends), ``edge`` cracks one (the last vertex); an edge crack's first vertex
    is its mouth and must lie on the outer boundary."""

    vertices: list[complex]
    kind: str = "edge"

    def __post_init__(self):
        self.vertices = [complex(v) for v in self.vertices]
        if len(self.vertices) < 2:
            raise GeometryError("crack needs at least two vertices")
        if self.kind not in ("center", "edge"):
            raise GeometryError(f"unknown crack kind {self.kind!r}")
        for a, b in zip(self.vertices, self.vertices[1:]):
            if abs(b - a) < 1e-14:
                raise GeometryError("consecutive crack vertices coincide")
        if _polyline_self_intersects(self.vertices):
            raise GeometryError("crack polyline self-intersects")

    @classmethod
    def center_crack(cls, center: complex, half_length: float, angle: float = 0.0):
        d = np.exp(1j * angle)
        return cls(vertices=[center - half_length * d, center + half_length * d],
                   kind="center")

    @classmethod
    def edge_crack(cls, mouth: complex, length: float, angle: float = 0.0):
        return cls(vertices=[mouth, mouth + length * np.exp(1j * angle)], kind="edge")

    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))

    @property
    def length(self) -> float:
        return sum(abs(b - a) for a, b in self.segments())

    @property
    def reference_length(self) -> float:
        """Crack length scale 'a': half-length for center cracks."""
        return self.length / 2.0 if self.kind == "center" else self.length

    def active_tips(self) -> list[tuple[complex, float]]:
        """(position, outward tangent angle) of every growing tip."""
        v = self.vertices
        fwd = (v[-1], math.atan2((v[-1] - v[-2]).imag, (v[-1] - v[-2]).real))
        if self.kind == "edge":
            return [fwd]
        back = (v[0], math.atan2((v[0] - v[1]).imag, (v[0] - v[1]).real))
        return [back, fwd]

    def copy(self) -> "CrackGeometry":
        return CrackGeometry(vertices=list(self.vertices), kind=self.kind)


def _cross(a: complex, b: complex) -> float:
    return a.real * b.imag - a.imag * b.real


def _segments_intersect(p0, p1, q0, q1, tol=1e-12) -> bool:
    """Proper intersection test for open segments (shared endpoints ignored)."""
    d1, d2 = p1 - p0, q1 - q0
    den = _cross(d1, d2)
    if abs(den) < tol * max(abs(d1) * abs(d2), 1e-30):
        return False  # parallel; overlap handled by vertex-coincidence checks
    t = _cross(q0 - p0, d2) / den
    s = _cross(q0 - p0, d1) / den
    eps = 1e-9
    return eps < t < 1 - eps and eps < s < 1 - eps


def _polyline_self_intersects(verts) -> bool:
    segs = list(zip(verts[:-1], verts[1:]))
    for i in range(len(segs)):
        for j in range(i + 2, len(segs)):
            if _segments_intersect(*segs[i], *segs[j]):
                return True
    return False


def _ray_exit(dom: DomainSpec, origin: complex, angle: float,
              corner_tol: float = 1e-9) -> complex:
    """Where the ray origin + t e^{i angle} (t > 0) leaves the rectangle."""
    d = np.exp(1j * angle)
    dx, dy = d.real, d.imag
    best = math.inf
    if abs(dx) > 1e-15:
        for xb in (dom.half_width, -dom.half_width):
            t = (xb - origin.real) / dx
            if t > 1e-12:
                y = origin.imag + t * dy
                if abs(y) <= dom.half_height + 1e-9:
                    best = min(best, t)
    if abs(dy) > 1e-15:
        for yb in (dom.half_height, -dom.half_height):
            t = (yb - origin.imag) / dy
            if t > 1e-12:
                x = origin.real + t * dx
                if abs(x) <= dom.half_width + 1e-9:
                    best = min(best, t)
    if not math.isfinite(best):
        raise GeometryError("tangent extension does not reach the boundary")
    exit_pt = origin + best * complex(d)
    if (dom.half_width - abs(exit_pt.real) < corner_tol
            and dom.half_height - abs(exit_pt.imag) < corner_tol):
        raise GeometryError(
            "tangent extension exits through a corner; perturb the geometry"
        )
    return exit_pt


@dataclass
class Decomposition:
    """Spine-split plate: spine polyline, interface extensions, tips."""

    domain: DomainSpec
    crack: CrackGeometry
    spine: list[complex]
    interface_segments: list[tuple[complex, complex]]
    tips: list[tuple[complex, float]]

    _seg_a: np.ndarray = field(init=False, repr=False)
    _seg_d: np.ndarray = field(init=False, repr=False)
    _seg_len: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        a = np.array(self.spine[:-1], dtype=np.complex128)
        b = np.array(self.spine[1:], dtype=np.complex128)
        self._seg_a = a
        self._seg_d = b - a
        self._seg_len = np.abs(self._seg_d)
        if np.any(self._seg_len < 1e-14):
            raise GeometryError("degenerate spine segment")
        if _polyline_self_intersects(self.spine):
            raise GeometryError("spine self-intersects")

    def side_of(self, z) -> np.ndarray:
        """+1 above / -1 below the spine (sign of the nearest-segment cross)."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        rel = z[:, None] - self._seg_a[None, :]
        d = self._seg_d[None, :]
        t = np.clip((rel * np.conj(d)).real / (self._seg_len[None, :] ** 2), 0.0, 1.0)
        closest = rel - t * d
        dist = np.abs(closest)
        # cross(d, v) = Re(d) Im(v) - Im(d) Re(v) = Im(conj(d) v)
        cross = (np.conj(d) * closest).imag
        near = dist <= (dist.min(axis=1, keepdims=True) + 1e-12)
        masked = np.where(near, np.abs(cross), -1.0)
        pick = np.argmax(masked, axis=1)
        s = np.sign(cross[np.arange(len(z)), pick])
        s[s == 0] = 1.0
        return s.astype(int)

    def subdomain_of(self, z) -> np.ndarray:
        """1 on the positive side, 2 on the negative side."""
        return np.where(self.side_of(z) > 0, 1, 2)

    def distance_to_spine(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        rel = z[:, None] - self._seg_a[None, :]
        d = self._seg_d[None, :]
        t = np.clip((rel * np.conj(d)).real / (self._seg_len[None, :] ** 2), 0.0, 1.0)
        return np.abs(rel - t * d).min(axis=1)

    def distance_to_crack(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        out = np.full(len(z), np.inf)
        for a, b in self.crack.segments():
            d = b - a
            ll = abs(d) ** 2
            rel = z - a
            t = np.clip((rel * np.conj(d)).real / ll, 0.0, 1.0)
            out = np.minimum(out, np.abs(rel - t * d))
        return out

    @property
    def tip_exclusion_radius(self) -> float:
        """Singularity guard: 1e-3 of the current crack length."""
        return 1e-3 * self.crack.length


def decompose(dom: DomainSpec, crack: CrackGeometry) -> Decomposition:
    """Split the plate along the crack and its tangent extensions."""
    for v in crack.vertices:
        if not dom.contains(v, margin=-1e-9):
            raise GeometryError(f"crack vertex {v} outside the domain")
    tips = crack.active_tips()
    if crack.kind == "edge":
        mouth = crack.vertices[0]
        if dom.distance_to_boundary(mouth) > 1e-9:
            raise GeometryError("edge-crack mouth must lie on the outer boundary")
        (tip, ang), = tips
        if dom.distance_to_boundary(tip) <= 1e-9:
            raise GeometryError("active tip on the outer boundary")
        exit_fwd = _ray_exit(dom, tip, ang)
        spine = list(crack.vertices) + [exit_fwd]
        interfaces = [(tip, exit_fwd)]
    else:
        (tip_b, ang_b), (tip_f, ang_f) = tips
        for tip in (tip_b, tip_f):
            if dom.distance_to_boundary(tip) <= 1e-9:
                raise GeometryError("active tip on the outer boundary")
        exit_b = _ray_exit(dom, tip_b, ang_b)
        exit_f = _ray_exit(dom, tip_f, ang_f)
        spine = [exit_b] + list(crack.vertices) + [exit_f]
        interfaces = [(tip_b, exit_b), (tip_f, exit_f)]
    return Decomposition(domain=dom, crack=crack, spine=spine,
                         interface_segments=interfaces, tips=tips)


# ---------------------------------------------------------------------------
# boundary segments and collocation
# ---------------------------------------------------------------------------

KIND_NEUMANN = "neumann"
KIND_DIRICHLET = "dirichlet"
KIND_INTERFACE = "interface"


@dataclass
class Segment:
    """One boundary piece with a single condition type.

    ``normal`` is the outward unit normal of the owning subdomain (for
    interfaces: the fixed jump normal, pointing out of subdomain 1).
    ``shrink_start``/``shrink_end`` trim the sampled interval (tip guards).
    ``crack_face`` marks physical crack faces (still Neumann, target zero).
    """

    p0: complex
    p1: complex
    kind: str
    name: str
    subdomains: tuple[int, ...]
    normal: complex
    target: complex = 0j
    outer: bool = False
    crack_face: bool = False
    shrink_start: float = 0.0
    shrink_end: float = 0.0

    @property
    def length(self) -> float:
        return abs(self.p1 - self.p0)

    @property
    def direction(self) -> complex:
        return (self.p1 - self.p0) / self.length


@dataclass
class SegmentColloc:
    """Sampled collocation points for one segment.

    ``normals`` are per-point outward normals; ``inward`` points into the
    owning material (used to pick branch-cut limits on crack faces).
    For interfaces, ``points`` are shared by both subdomains.
    """

    segment: Segment
    weight: float
    points: np.ndarray
    normals: np.ndarray
    targets: np.ndarray

    @property
    def kind(self) -> str:
        return self.segment.kind

    @property
    def subdomains(self):
        return self.segment.subdomains

    @property
    def inward(self) -> np.ndarray:
        return -self.normals

    @property
    def n_points(self) -> int:
        return len(self.points)


def _outer_edges(dom: DomainSpec):
    b, h = dom.half_width, dom.half_height
    return [
        ("bottom", complex(-b, -h), complex(b, -h), -1j),
        ("right", complex(b, -h), complex(b, h), 1.0 + 0j),
        ("top", complex(b, h), complex(-b, h), 1j),
        ("left", complex(-b, h), complex(-b, -h), -1.0 + 0j),
    ]


def build_segments(dec: Decomposition, loads: Loads) -> list[Segment]:
    """All boundary/interface segments of the decomposed plate."""
    dom, crack = dec.domain, dec.crack
    eps = dec.tip_exclusion_radius
    tips = [t for t, _ in dec.tips]
    segments: list[Segment] = []

    # outer edges, split where the spine (or an edge-crack mouth) touches them
    anchors = [dec.spine[0], dec.spine[-1]]
    for name, e0, e1, nrm in _outer_edges(dom):
        d = e1 - e0
        ll = abs(d) ** 2
        cuts = [0.0, 1.0]
        for a in anchors:
            t = ((a - e0) * np.conj(d)).real / ll
            if 1e-12 < t < 1 - 1e-12 and abs(e0 + t * d - a) < 1e-7:
                cuts.append(float(t))
        cuts = sorted(set(cuts))
        for i, (t0, t1) in enumerate(zip(cuts[:-1], cuts[1:])):
            p0, p1 = e0 + t0 * d, e0 + t1 * d
            mid = 0.5 * (p0 + p1)
            sd = int(dec.subdomain_of([mid])[0])
            label = name if len(cuts) == 2 else f"{name}#{i}"
            segments.append(Segment(
                p0=p0, p1=p1, kind=KIND_NEUMANN, name=label,
                subdomains=(sd,), normal=nrm, target=loads.edge(name),
                outer=True,
            ))

    # crack faces: one coincident traction-free copy per subdomain
    for i, (a, b) in enumerate(crack.segments()):
        d = (b - a) / abs(b - a)
        sh0 = eps if any(abs(a - t) < 1e-12 for t in tips) else 0.0
        sh1 = eps if any(abs(b - t) < 1e-12 for t in tips) else 0.0
        for sd, side in ((1, 1.0), (2, -1.0)):
            segments.append(Segment(
                p0=a, p1=b, kind=KIND_NEUMANN, name=f"crack_face_{i}_sd{sd}",
                subdomains=(sd,), normal=-side * 1j * d, target=0j,
                crack_face=True, shrink_start=sh0, shrink_end=sh1,
            ))

    # interface extensions (tip end shrunk)
    for i, (a, b) in enumerate(dec.interface_segments):
        d = (b - a) / abs(b - a)
        sh0 = eps if any(abs(a - t) < 1e-12 for t in tips) else 0.0
        sh1 = eps if any(abs(b - t) < 1e-12 for t in tips) else 0.0
        segments.append(Segment(
            p0=a, p1=b, kind=KIND_INTERFACE, name=f"interface_{i}",
            subdomains=(1, 2), normal=-1j * d, target=0j,
            shrink_start=sh0, shrink_end=sh1,
        ))
    return segments


def _allocate(counts_total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder allocation with a floor of 2 points per segment."""
    n_seg = len(weights)
    if counts_total < 2 * n_seg:
        raise GeometryError(
            f"{counts_total} points cannot cover {n_seg} segments with >= 2 each"
        )
    raw = weights * counts_total
    base = np.maximum(np.floor(raw).astype(int), 2)
    while base.sum() > counts_total:
        over = np.where(base > 2, base - raw, -np.inf)
        base[int(np.argmax(over))] -= 1
    frac = raw - np.floor(raw)
    for i in np.argsort(-frac):
        if base.sum() >= counts_total:
            break
        base[i] += 1
    # top up in weight order if fractional parts ran out
    while base.sum() < counts_total:
        base[int(np.argmax(weights))] += 1
    return base


def sample_boundaries(dec: Decomposition, loads: Loads, n_train: int,
                      n_test: int, seed: int):
    """Stratified-uniform collocation on every segment.

    Points are allocated proportionally to segment length and placed by
    stratified uniform sampling; train and test draws use disjoint
    deterministic substreams of ``seed``.
    Returns (train, test) lists of SegmentColloc.
    """
    segments = build_segments(dec, loads)
    lengths = np.array([s.length for s in segments])
    weights = lengths / lengths.sum()

    def draw(n_points: int, stream: int):
        rng = np.random.default_rng(np.random.SeedSequence([seed, stream]))
        counts = _allocate(n_points, weights)
        out = []
        for seg, w, n in zip(segments, weights, counts):
            u = rng.uniform(0.0, 1.0, int(n))
            t = (np.arange(int(n)) + u) / int(n)
            lo = seg.shrink_start / seg.length
            hi = 1.0 - seg.shrink_end / seg.length
            t = lo + t * (hi - lo)
            pts = seg.p0 + t * (seg.p1 - seg.p0)
            normals = np.full(len(pts), seg.normal, dtype=np.complex128)
            targets = np.full(len(pts), seg.target, dtype=np.complex128)
            out.append(SegmentColloc(segment=seg, weight=float(w),
                                     points=pts, normals=normals,
                                     targets=targets))
        return out

    return draw(n_train, 0), draw(n_test, 1)


def extend_crack(crack: CrackGeometry, theta: float, da: float,
                 dom: DomainSpec | None = None) -> CrackGeometry:
    """Grow the active tip by ``da`` at kink angle ``theta`` off its tangent.

    Positive theta is counter-clockwise.  Center cracks are static in this
    solver; only the forward (last-vertex) tip grows.
    """
    if da <= 0:
        raise GeometryError("growth increment must be positive")
    tip, ang = crack.active_tips()[-1]
    new_ang = ang + theta
    new_tip = tip + da * np.exp(1j * new_ang)
    if dom is not None and not dom.contains(new_tip):
        raise GeometryError("extended tip leaves the domain")
    for a, b in crack.segments()[:-1]:
        if _segments_intersect(a, b, tip, new_tip):
            raise GeometryError("extension crosses the existing crack")
    return CrackGeometry(vertices=list(crack.vertices) + [complex(new_tip)],
                         kind=crack.kind)
