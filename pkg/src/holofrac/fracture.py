"""Stress-intensity extraction and crack-growth criteria.

SIFs come from the interaction integral: the actual field is paired with a
unit mode I or mode II auxiliary singular field on a circular contour around
the tip, all assembled in the tip-local frame,

    I = closed-integral [ (sigma : eps_aux) n_1
                          - (sigma n) . du_aux/dx_1
                          - (sigma_aux n) . du/dx_1 ] ds,
    K_mode = E' / 2 * I_mode.

Quadrature nodes sit midway between uniform angles so none lands on the
crack-face crossing; for kinked cracks any node whose cell straddles a
crack crossing is dropped and the weights renormalized.

Kink angles: closed-form maximum-tangential-stress angle, and grid+golden
searches over the first-order kinked-tip SIF map (Cotterell-Rice) for the
energy-release-rate and local-symmetry criteria.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .fields import Material

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# auxiliary (unit-SIF) crack-tip fields, tip-local polar coordinates
# ---------------------------------------------------------------------------


def auxiliary_fields(mode: str, r, theta, mat: Material):
    """Unit-SIF singular field: displacements (2,) and stresses (2,2).

    ``mode`` is "I" or "II"; r > 0 (mm), theta in (-pi, pi].  Vectorized:
    r/theta arrays give u of shape (2, n) and sigma of shape (2, 2, n).
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r <= 0):
        raise ValueError("auxiliary field requires r > 0")
    s = 1.0 / np.sqrt(TWO_PI * r)
    d = np.sqrt(r / TWO_PI) / (2.0 * mat.mu)
    c2, s2 = np.cos(theta / 2), np.sin(theta / 2)
    c32, s32 = np.cos(3 * theta / 2), np.sin(3 * theta / 2)
    ct = np.cos(theta)
    kap = mat.kappa
    if mode == "I":
        sxx = s * c2 * (1 - s2 * s32)
        syy = s * c2 * (1 + s2 * s32)
        sxy = s * c2 * s2 * c32
        ux = d * c2 * (kap - ct)
        uy = d * s2 * (kap - ct)
    elif mode == "II":
        sxx = -s * s2 * (2 + c2 * c32)
        syy = s * s2 * c2 * c32
        sxy = s * c2 * (1 - s2 * s32)
        ux = d * s2 * (kap + 2 + ct)
        uy = -d * c2 * (kap - 2 + ct)
    else:
        raise ValueError(f"mode must be 'I' or 'II', got {mode!r}")
    u = np.stack([ux, uy])
    sig = np.stack([np.stack([sxx, sxy]), np.stack([sxy, syy])])
    return u, sig


def auxiliary_x1_gradient(mode: str, r, theta, mat: Material):
    """d u_aux_i / d x1 in the tip frame, analytic.

    With u_i = sqrt(r / 2 pi) F_i(theta):
    du_i/dx1 = (1 / sqrt(2 pi r)) [ F_i cos(theta) / 2 - sin(theta) F_i' ].
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    c2, s2 = np.cos(theta / 2), np.sin(theta / 2)
    ct, st = np.cos(theta), np.sin(theta)
    kap, mu2 = mat.kappa, 2.0 * mat.mu
    if mode == "I":
        fx = (kap - ct) * c2 / mu2
        fy = (kap - ct) * s2 / mu2
        fxp = (st * c2 - (kap - ct) * s2 / 2) / mu2
        fyp = (st * s2 + (kap - ct) * c2 / 2) / mu2
    elif mode == "II":
        fx = (kap + 2 + ct) * s2 / mu2
        fy = -(kap - 2 + ct) * c2 / mu2
        fxp = (-st * s2 + (kap + 2 + ct) * c2 / 2) / mu2
        fyp = (st * c2 + (kap - 2 + ct) * s2 / 2) / mu2
    else:
        raise ValueError(f"mode must be 'I' or 'II', got {mode!r}")
    pref = 1.0 / np.sqrt(TWO_PI * r)
    return np.stack([pref * (fx * ct / 2 - st * fxp),
                     pref * (fy * ct / 2 - st * fyp)])


# ---------------------------------------------------------------------------
# contour integrals
# ---------------------------------------------------------------------------


@dataclass
class SifEstimate:
    """Extracted SIFs with contour diagnostics."""

    k_i: float
    k_ii: float
    radius: float
    radius_ratio: float
    n_quad: int
    j_check: float | None = None

    @property
    def j_from_k(self) -> float | None:
        return None


def _contour_nodes(tip: complex, tip_angle: float, radius: float, n_quad: int,
                   crack_vertices=None, exclusion: float = 1e-3):
    """Midpoint angular nodes and weights; cells crossing the crack dropped.

    Returns (theta local array, weights array summing to 2 pi R).  The
    straight-crack crossing at +-pi always falls between midpoint nodes; for
    polyline cracks every circle/segment intersection angle is located and
    the cells containing one (plus any node within ``exclusion`` rad of it)
    are removed, with the remaining weights renormalized to the full arc.
    """
    h = TWO_PI / n_quad
    theta = -math.pi + (np.arange(n_quad) + 0.5) * h
    keep = np.ones(n_quad, dtype=bool)
    crossings = []
    if crack_vertices is not None:
        for a, b in zip(crack_vertices[:-1], crack_vertices[1:]):
            for zc in _circle_segment_intersections(tip, radius, a, b):
                ang = math.atan2((zc - tip).imag, (zc - tip).real) - tip_angle
                ang = math.remainder(ang, TWO_PI)
                crossings.append(ang)
    for ang in crossings:
        d = np.abs(np.remainder(theta - ang + math.pi, TWO_PI) - math.pi)
        keep &= d > max(exclusion, h / 2)
    if not np.any(keep):
        raise ValueError("contour fully excluded; reduce the radius")
    w = np.zeros(n_quad)
    w[keep] = TWO_PI * radius / keep.sum()
    return theta[keep], w[keep]


def _circle_segment_intersections(center: complex, radius: float,
                                  a: complex, b: complex):
    d = b - a
    f = a - center
    aa = (d * np.conj(d)).real
    bb = 2.0 * (f * np.conj(d)).real
    cc = (f * np.conj(f)).real - radius * radius
    disc = bb * bb - 4 * aa * cc
    if disc <= 0 or aa == 0:
        return []
    sq = math.sqrt(disc)
    out = []
    for t in ((-bb - sq) / (2 * aa), (-bb + sq) / (2 * aa)):
        if -1e-12 <= t <= 1 + 1e-12:
            out.append(a + t * d)
    return out


def interaction_integral(field_fn, tip: complex, tip_angle: float, radius: float,
                         n_quad: int, mode: str, mat: Material,
                         crack_vertices=None) -> float:
    """Interaction integral of the actual field with a unit auxiliary field.

    ``field_fn(z)`` must return (FieldSample, (dux_dx, dux_dy, duy_dx,
    duy_dy)) in the global frame at the complex points z.  The integrand is
    assembled in the tip-local frame on a circle of ``radius`` around the tip.
    """
    theta, w = _contour_nodes(tip, tip_angle, radius, n_quad, crack_vertices)
    z = tip + radius * np.exp(1j * (tip_angle + theta))
    sample, grad = field_fn(z)
    c, s = math.cos(tip_angle), math.sin(tip_angle)

    # rotate stress and displacement gradient into the tip frame
    sxx, syy, sxy = sample.sxx, sample.syy, sample.sxy
    l_sxx = c * c * sxx + s * s * syy + 2 * c * s * sxy
    l_syy = s * s * sxx + c * c * syy - 2 * c * s * sxy
    l_sxy = (c * c - s * s) * sxy + c * s * (syy - sxx)
    gxx, gxy, gyx, gyy = grad
    # R G R^T with R = [[c, s], [-s, c]]
    l_gxx = c * (c * gxx + s * gyx) + s * (c * gxy + s * gyy)
    l_gyx = c * (-s * gxx + c * gyx) + s * (-s * gxy + c * gyy)

    u_aux, s_aux = auxiliary_fields(mode, radius, theta, mat)
    e_aux = mat.strain_from_stress(s_aux[0, 0], s_aux[1, 1], s_aux[0, 1])
    du_aux = auxiliary_x1_gradient(mode, radius, theta, mat)

    n1, n2 = np.cos(theta), np.sin(theta)
    w_mut = l_sxx * e_aux[0] + l_syy * e_aux[1] + 2.0 * l_sxy * e_aux[2]
    t1 = l_sxx * n1 + l_sxy * n2
    t2 = l_sxy * n1 + l_syy * n2
    ta1 = s_aux[0, 0] * n1 + s_aux[0, 1] * n2
    ta2 = s_aux[0, 1] * n1 + s_aux[1, 1] * n2
    integrand = (w_mut * n1
                 - (t1 * du_aux[0] + t2 * du_aux[1])
                 - (ta1 * l_gxx + ta2 * l_gyx))
    return float(np.sum(integrand * w))


def j_integral(field_fn, tip: complex, tip_angle: float, radius: float,
               n_quad: int, mat: Material, crack_vertices=None) -> float:
    """Energy-release-rate contour integral of the actual field alone."""
    theta, w = _contour_nodes(tip, tip_angle, radius, n_quad, crack_vertices)
    z = tip + radius * np.exp(1j * (tip_angle + theta))
    sample, grad = field_fn(z)
    c, s = math.cos(tip_angle), math.sin(tip_angle)
    sxx, syy, sxy = sample.sxx, sample.syy, sample.sxy
    l_sxx = c * c * sxx + s * s * syy + 2 * c * s * sxy
    l_syy = s * s * sxx + c * c * syy - 2 * c * s * sxy
    l_sxy = (c * c - s * s) * sxy + c * s * (syy - sxx)
    gxx, gxy, gyx, gyy = grad
    l_gxx = c * (c * gxx + s * gyx) + s * (c * gxy + s * gyy)
    l_gyx = c * (-s * gxx + c * gyx) + s * (-s * gxy + c * gyy)
    exx, eyy, exy = mat.strain_from_stress(l_sxx, l_syy, l_sxy)
    w_dens = 0.5 * (l_sxx * exx + l_syy * eyy + 2.0 * l_sxy * exy)
    n1, n2 = np.cos(theta), np.sin(theta)
    t1 = l_sxx * n1 + l_sxy * n2
    t2 = l_sxy * n1 + l_syy * n2
    integrand = w_dens * n1 - (t1 * l_gxx + t2 * l_gyx)
    return float(np.sum(integrand * w))


def extract_sifs(field_fn, tip: complex, tip_angle: float, radius: float,
                 n_quad: int, mat: Material, crack_vertices=None,
                 with_j: bool = False, reference_length: float | None = None) -> SifEstimate:
    """Mode I and II SIFs via the interaction integral, K = E'/2 * I."""
    i_1 = interaction_integral(field_fn, tip, tip_angle, radius, n_quad, "I",
                               mat, crack_vertices)
    i_2 = interaction_integral(field_fn, tip, tip_angle, radius, n_quad, "II",
                               mat, crack_vertices)
    jc = None
    if with_j:
        jc = j_integral(field_fn, tip, tip_angle, radius, n_quad, mat,
                        crack_vertices)
    ratio = radius / reference_length if reference_length else 1.0
    return SifEstimate(k_i=mat.e_eff / 2 * i_1, k_ii=mat.e_eff / 2 * i_2,
                       radius=radius, radius_ratio=ratio, n_quad=n_quad,
                       j_check=jc)


# ---------------------------------------------------------------------------
# growth gate and kink-angle criteria
# ---------------------------------------------------------------------------

GATE_TOL = 1e-9


def check_growth(k_i: float, k_ii: float, k_ic: float, k_iic: float) -> str:
    """Mixed-mode strength gate: (K_I/K_Ic)^2 + (K_II/K_IIc)^2 vs 1."""
    if k_ic <= 0 or k_iic <= 0:
        raise ValueError("critical SIFs must be positive")
    ratio = (k_i / k_ic) ** 2 + (k_ii / k_iic) ** 2
    if abs(ratio - 1.0) <= GATE_TOL:
        return "onset"
    return "growth" if ratio > 1.0 else "no_growth"


def cr_map(k_i: float, k_ii: float, theta: float) -> tuple[float, float]:
    """First-order SIFs at the tip of a kink at angle theta (Cotterell-Rice).

        K_I'  = K_I cos^3(t/2) - 3 K_II sin(t/2) cos^2(t/2)
        K_II' = K_I sin(t/2) cos^2(t/2) + K_II cos(t/2) (1 - 3 sin^2(t/2))

    These are exactly the hoop/shear stress amplitudes of the parent field
    resolved at the kink angle.
    """
    c = np.cos(np.asarray(theta) / 2.0)
    s = np.sin(np.asarray(theta) / 2.0)
    k1p = k_i * c**3 - 3.0 * k_ii * s * c * c
    k2p = k_i * s * c * c + k_ii * c * (1.0 - 3.0 * s * s)
    if np.isscalar(theta) or np.ndim(theta) == 0:
        return float(k1p), float(k2p)
    return k1p, k2p


def mts_angle(k_i: float, k_ii: float) -> float:
    """Maximum-tangential-stress kink angle (radians).

    Closed form arccos((3 K_II^2 + sqrt(K_I^4 + 8 K_I^2 K_II^2)) /
    (K_I^2 + 9 K_II^2)); the kink opposes the shear: sign = -sign(K_II).
    """
    if k_i == 0.0 and k_ii == 0.0:
        raise ValueError("kink angle undefined for zero SIFs")
    if k_ii == 0.0:
        return 0.0
    num = 3.0 * k_ii**2 + math.sqrt(k_i**4 + 8.0 * k_i**2 * k_ii**2)
    mag = math.acos(min(1.0, max(-1.0, num / (k_i**2 + 9.0 * k_ii**2))))
    return -math.copysign(mag, k_ii)


_GRID_DEG = np.arange(-80.0, 80.0 + 1e-9, 0.05)
_GRID_RAD = np.deg2rad(_GRID_DEG)


def _refine(objective, theta0: float, half_window: float) -> float:
    from .optim import golden_section_min

    lo = theta0 - half_window
    hi = theta0 + half_window
    return golden_section_min(objective, lo, hi, tol=1e-12)


def merr_angle(k_i: float, k_ii: float, mat: Material) -> float:
    """Kink angle maximizing the kinked-tip energy release rate.

    G(theta) = (K_I'(theta)^2 + K_II'(theta)^2) / E' with the kinked-tip
    SIFs from the first-order map; admissible angles open the crack
    (K_I' > 0).  Grid search at 0.05 deg plus golden-section refinement.
    """
    if k_i == 0.0 and k_ii == 0.0:
        raise ValueError("kink angle undefined for zero SIFs")
    k1p, k2p = cr_map(k_i, k_ii, _GRID_RAD)
    g = k1p**2 + k2p**2
    admissible = k1p > 0.0
    if not np.any(admissible):
        raise ValueError("no kink angle opens the crack")
    g = np.where(admissible, g, -np.inf)
    i = int(np.argmax(g))
    step = _GRID_RAD[1] - _GRID_RAD[0]

    def neg_g(th):
        a, b = cr_map(k_i, k_ii, th)
        if a <= 0:
            return np.inf
        return -(a * a + b * b)

    return float(_refine(neg_g, float(_GRID_RAD[i]), step))


def pls_angle(k_i: float, k_ii: float) -> float:
    """Kink angle zeroing the kinked-tip shear SIF (local symmetry).

    Same grid and admissibility (K_I' > 0) as the energy criterion,
    minimizing |K_II'(theta)|.
    """
    if k_i == 0.0 and k_ii == 0.0:
        raise ValueError("kink angle undefined for zero SIFs")
    k1p, k2p = cr_map(k_i, k_ii, _GRID_RAD)
    obj = np.where(k1p > 0.0, np.abs(k2p), np.inf)
    if not np.any(np.isfinite(obj)):
        raise ValueError("no kink angle opens the crack")
    i = int(np.argmin(obj))
    step = _GRID_RAD[1] - _GRID_RAD[0]

    def abs_k2(th):
        a, b = cr_map(k_i, k_ii, th)
        if a <= 0:
            return np.inf
        return abs(b)

    return float(_refine(abs_k2, float(_GRID_RAD[i]), step))


def criterion_angle(name: str, k_i: float, k_ii: float, mat: Material) -> float:
    name = name.lower()
    if name == "mts":
        return mts_angle(k_i, k_ii)
    if name == "merr":
        return merr_angle(k_i, k_ii, mat)
    if name == "pls":
        return pls_angle(k_i, k_ii)
    raise ValueError(f"unknown criterion {name!r}")


# ---------------------------------------------------------------------------
# nested growth loop
# ---------------------------------------------------------------------------


@dataclass
class GrowthStep:
    step: int
    crack_vertices: list[complex]
    tip: complex
    tip_angle: float
    k_i: float
    k_ii: float
    theta: float
    criterion: str
    gate: str
    train_loss_final: float
    test_loss_final: float | None
    wall_ms: float


@dataclass
class GrowthTrace:
    steps: list[GrowthStep] = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    @property
    def path_vertices(self) -> list[complex]:
        return self.steps[-1].crack_vertices if self.steps else []


def run_growth(case, criterion: str, *, tl_enabled: bool = True,
               on_step=None, start_state=None) -> GrowthTrace:
    """Quasi-static nested growth loop with warm starts.

    ``case`` is a GrowthCase (see runner module) bundling geometry, loads,
    material, network, schedule and fracture settings.  Step 1 trains from
    scratch; later steps extend the crack along the previous kink angle,
    re-decompose, seed the tip amplitudes through the kink map, warm start
    from the previous weights and fine-tune (or retrain fully when transfer
    learning is disabled).  Stops at the step budget, when the tip comes
    within one increment of the outer boundary, or (with the gate enforced)
    when the strength criterion says no growth.
    """
    from .runner import growth_step_state  # cycle-free: runner imports lazily

    raise NotImplementedError(
        "run_growth lives in the runner module; import run_growth from there"
    )
