"""Plane-elastic fields from complex potentials.

Two holomorphic potentials (phi, psi) determine every stress and displacement
component of a 2D isotropic linear-elastic state:

    sxx = Re(2 phi' - conj(z) phi'' - psi')
    syy = Re(2 phi' + conj(z) phi'' + psi')
    sxy = Im(conj(z) phi'' + psi')
    2 mu (ux + i uy) = kappa phi - z conj(phi') - conj(psi)

Equilibrium and compatibility then hold identically, so a solver only has to
fit boundary data.  A crack tip adds the classic square-root singular pair

    phi_t = K / sqrt(2 pi) * e^{ia} sqrt(w),          w = e^{-ia} (z - p)
    psi_t = 1 / sqrt(2 pi) * [ (conj(K) - K/2) e^{-ia} sqrt(w)
                               - K conj(p) / 2 / sqrt(w) ]

with complex amplitude K = K_I - i K_II, tip position p and tangent angle a.
The principal branch of sqrt is used on the slit plane, which puts the branch
cut on the ray behind the tip; points exactly on the cut need a side hint
(the direction into the owning material) to pick the one-sided limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)
# relative half-width of the on-cut detection band around the negative real axis
CUT_BAND = 1e-12


class SingularEvaluationError(ValueError):
    """Evaluation requested at a crack tip or on a branch cut without a side."""


@dataclass(frozen=True)
class Material:
    """Isotropic material in plane stress or plane strain.

    E in MPa, nu dimensionless in (0, 0.5).
    """

    young_modulus: float
    poisson: float
    regime: str = "plane_strain"

    def __post_init__(self):
        if self.young_modulus <= 0:
            raise ValueError("young_modulus must be positive")
        if not 0.0 < self.poisson < 0.5:
            raise ValueError("poisson must lie in (0, 0.5)")
        if self.regime not in ("plane_stress", "plane_strain"):
            raise ValueError(f"unknown regime {self.regime!r}")

    @property
    def mu(self) -> float:
        """Shear modulus."""
        return self.young_modulus / (2.0 * (1.0 + self.poisson))

    @property
    def lam(self) -> float:
        """Lame constant (3D form)."""
        nu = self.poisson
        return self.young_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def kappa(self) -> float:
        """Kolosov constant: (3-nu)/(1+nu) plane stress, 3-4nu plane strain."""
        nu = self.poisson
        if self.regime == "plane_stress":
            return (3.0 - nu) / (1.0 + nu)
        return 3.0 - 4.0 * nu

    @property
    def e_eff(self) -> float:
        """Effective modulus: E in plane stress, E/(1-nu^2) in plane strain."""
        if self.regime == "plane_stress":
            return self.young_modulus
        return self.young_modulus / (1.0 - self.poisson**2)

    def strain_from_stress(self, sxx, syy, sxy):
        """In-plane strains from in-plane stresses (regime-aware compliance)."""
        e, nu = self.young_modulus, self.poisson
        if self.regime == "plane_strain":
            exx = ((1 - nu**2) * sxx - nu * (1 + nu) * syy) / e
            eyy = ((1 - nu**2) * syy - nu * (1 + nu) * sxx) / e
        else:
            exx = (sxx - nu * syy) / e
            eyy = (syy - nu * sxx) / e
        exy = (1 + nu) * sxy / e
        return exx, eyy, exy

    def stress_from_strain(self, exx, eyy, exy):
        """Inverse of strain_from_stress (in-plane Hooke)."""
        m = self.mu
        if self.regime == "plane_strain":
            lam = self.lam
        else:
            lam = 2 * m * self.lam / (self.lam + 2 * m)
        tr = exx + eyy
        return 2 * m * exx + lam * tr, 2 * m * eyy + lam * tr, 2 * m * exy


@dataclass
class TipEnrichment:
    """Square-root enrichment attached to one crack tip.

    ``angle`` is the crack tangent at the tip pointing away from the crack
    body (the growth direction); the branch cut is the opposite ray, which
    lies along the crack.  ``amplitude`` is the trainable complex K.
    """

    tip: complex
    angle: float
    amplitude: complex = 0j

    @property
    def k_i(self) -> float:
        return float(np.real(self.amplitude))

    @property
    def k_ii(self) -> float:
        return float(-np.imag(self.amplitude))

    @classmethod
    def from_sifs(cls, tip: complex, angle: float, k_i: float, k_ii: float) -> "TipEnrichment":
        return cls(tip=tip, angle=angle, amplitude=complex(k_i, -k_ii))


def branch_sqrt(w: np.ndarray, side_nudge=None, tip_eps: float = 0.0):
    """Principal sqrt on the slit plane with one-sided limits on the cut.

    ``side_nudge``: per-point complex directions pointing into the material;
    for points inside the on-cut band the sign of the nudge's imaginary part
    (in the already-rotated w frame) selects the theta -> +pi or -pi limit.
    Raises on the cut without a nudge, and inside ``tip_eps`` of the origin.
    """
    w = np.asarray(w, dtype=np.complex128)
    aw = np.abs(w)
    if np.any(aw <= tip_eps):
        raise SingularEvaluationError(
            f"evaluation within {tip_eps:.3g} of a crack tip"
        )
    on_cut = (w.real < 0) & (np.abs(w.imag) <= CUT_BAND * aw)
    s = np.sqrt(w)
    if np.any(on_cut):
        if side_nudge is None:
            raise SingularEvaluationError(
                "evaluation on a branch cut without a side hint"
            )
        nud = np.broadcast_to(np.asarray(side_nudge, dtype=np.complex128), w.shape)
        # theta -> +pi gives +i sqrt|w|, theta -> -pi gives -i sqrt|w|
        lim = np.where(nud.imag >= 0, 1j, -1j) * np.sqrt(aw)
        s = np.where(on_cut, lim, s)
    return s


def williams_potentials(e: TipEnrichment, z, side_nudge=None, tip_eps: float = 0.0):
    """Enrichment quintuple (phi, phi', phi'', psi, psi') at points z.

    Analytic derivatives of the tip pair; phi' ~ w^{-1/2}, phi'' ~ w^{-3/2}.
    ``side_nudge`` follows branch_sqrt but is given in global coordinates.
    """
    z = np.asarray(z, dtype=np.complex128)
    rot = np.exp(-1j * e.angle)
    w = rot * (z - e.tip)
    nud = None if side_nudge is None else rot * np.asarray(side_nudge, dtype=np.complex128)
    sq = branch_sqrt(w, side_nudge=nud, tip_eps=tip_eps)
    inv_sq = 1.0 / sq
    k = complex(e.amplitude)
    c = 1.0 / SQRT_2PI
    kc = np.conj(k)
    phi = c * k * np.conj(rot) * sq
    phi1 = c * k * 0.5 * inv_sq
    phi2 = -c * k * 0.25 * rot * inv_sq**3
    tcoef = k * np.conj(e.tip) * 0.5
    psi = c * ((kc - 0.5 * k) * rot * sq - tcoef * inv_sq)
    psi1 = c * ((kc - 0.5 * k) * rot**2 * 0.5 * inv_sq + tcoef * 0.5 * rot * inv_sq**3)
    return phi, phi1, phi2, psi, psi1


def williams_amplitude_coefficients(e: TipEnrichment, z, side_nudge=None, tip_eps: float = 0.0):
    """Linear coefficients of the enrichment in (K, conj K).

    Returns (holo, anti) where each is a 5-tuple over the quintuple channels
    and the enrichment equals K * holo[c] + conj(K) * anti[c].  Used for the
    amplitude gradient in training.
    """
    z = np.asarray(z, dtype=np.complex128)
    rot = np.exp(-1j * e.angle)
    w = rot * (z - e.tip)
    nud = None if side_nudge is None else rot * np.asarray(side_nudge, dtype=np.complex128)
    sq = branch_sqrt(w, side_nudge=nud, tip_eps=tip_eps)
    inv_sq = 1.0 / sq
    c = 1.0 / SQRT_2PI
    zero = np.zeros_like(sq)
    pbar = np.conj(e.tip)
    holo = (
        c * np.conj(rot) * sq,
        c * 0.5 * inv_sq,
        -c * 0.25 * rot * inv_sq**3,
        c * (-0.5 * rot * sq - 0.5 * pbar * inv_sq),
        c * (-0.25 * rot**2 * inv_sq + 0.25 * pbar * rot * inv_sq**3),
    )
    anti = (
        zero,
        zero,
        zero,
        c * rot * sq,
        c * rot**2 * 0.5 * inv_sq,
    )
    return holo, anti


def transform_potentials(quint, alpha: float, eta: complex):
    """Rotate by alpha and translate by eta a potential quintuple.

    The input quintuple must already be evaluated at the pulled-back point
    e^{-i alpha} (z - eta).  Implements

        phi(z) = e^{i a} phi_h(zh)
        psi(z) = e^{-i a} psi_h(zh) - conj(eta) phi_h'(zh)

    with chain-rule-consistent first and second derivatives.
    """
    ph, ph1, ph2, ps, ps1 = quint
    rot = np.exp(1j * alpha)
    irot = np.conj(rot)
    phi = rot * ph
    phi1 = ph1
    phi2 = irot * ph2
    psi = irot * ps - np.conj(eta) * ph1
    psi1 = irot**2 * ps1 - np.conj(eta) * irot * ph2
    return phi, phi1, phi2, psi, psi1


@dataclass
class PotentialModel:
    """Per-subdomain solution representation: two networks plus enrichments.

    The composite potentials always include every enrichment attached to the
    subdomain.  ``phi_net`` / ``psi_net`` only need a ``forward(z[,with_cache])``
    triple interface, so tests can substitute closed-form potentials.
    """

    phi_net: object
    psi_net: object
    enrichments: list[TipEnrichment] = field(default_factory=list)
    subdomain: int = 0
    tip_eps: float = 0.0

    def potentials(self, z, side_nudge=None):
        """Composite quintuple (phi, phi', phi'', psi, psi') at points z."""
        z = np.asarray(z, dtype=np.complex128).ravel()
        f, f1, f2 = self.phi_net.forward(z)
        g, g1, _ = self.psi_net.forward(z)
        # psi'' is never needed by the field relations
        phi, phi1, phi2 = f.astype(np.complex128), f1.astype(np.complex128), f2.astype(np.complex128)
        psi, psi1 = g.astype(np.complex128), g1.astype(np.complex128)
        for e in self.enrichments:
            p, p1, p2, q, q1 = williams_potentials(
                e, z, side_nudge=side_nudge, tip_eps=self.tip_eps
            )
            phi = phi + p
            phi1 = phi1 + p1
            phi2 = phi2 + p2
            psi = psi + q
            psi1 = psi1 + q1
        return phi, phi1, phi2, psi, psi1


@dataclass
class FieldSample:
    """Stress (MPa) and displacement (mm) arrays at evaluation points."""

    sxx: np.ndarray
    syy: np.ndarray
    sxy: np.ndarray
    ux: np.ndarray
    uy: np.ndarray

    def traction(self, normal):
        """Traction vector components (tx, ty) for unit normals nx + i ny."""
        n = np.asarray(normal, dtype=np.complex128)
        tx = self.sxx * n.real + self.sxy * n.imag
        ty = self.sxy * n.real + self.syy * n.imag
        return tx, ty


def fields_from_potentials(z, quint, mat: Material) -> FieldSample:
    """Stresses and displacements from a potential quintuple at points z."""
    z = np.asarray(z, dtype=np.complex128)
    phi, phi1, phi2, psi, psi1 = quint
    zb = np.conj(z)
    a = zb * phi2 + psi1
    two_p = 2.0 * phi1
    sxx = np.real(two_p - a)
    syy = np.real(two_p + a)
    sxy = np.imag(a)
    d = mat.kappa * phi - z * np.conj(phi1) - np.conj(psi)
    inv2mu = 0.5 / mat.mu
    ux = np.real(d) * inv2mu
    uy = np.imag(d) * inv2mu
    out = FieldSample(sxx=sxx, syy=syy, sxy=sxy, ux=ux, uy=uy)
    for name in ("sxx", "syy", "sxy", "ux", "uy"):
        v = getattr(out, name)
        if not np.all(np.isfinite(v)):
            bad = int(np.argmax(~np.isfinite(np.atleast_1d(v))))
            raise FloatingPointError(
                f"non-finite {name} at point index {bad}"
            )
    return out


def evaluate_fields(m: PotentialModel, mat: Material, z, side_nudge=None) -> FieldSample:
    """Physical fields of a potential model at points z."""
    return fields_from_potentials(z, m.potentials(z, side_nudge=side_nudge), mat)


def displacement_gradient_from_potentials(z, quint, mat: Material):
    """Exact displacement gradient columns from a potential quintuple.

    Differentiating 2 mu (ux + i uy) = kappa phi - z conj(phi') - conj(psi):

        d/dx: kappa phi' - conj(phi') - z conj(phi'') - conj(psi')
        d/dy: i [ kappa phi' - conj(phi') + z conj(phi'') + conj(psi') ]

    Returns (dux_dx, dux_dy, duy_dx, duy_dy) arrays.
    """
    z = np.asarray(z, dtype=np.complex128)
    _, phi1, phi2, _, psi1 = quint
    core = mat.kappa * phi1 - np.conj(phi1)
    rest = z * np.conj(phi2) + np.conj(psi1)
    dx = core - rest
    dy = 1j * (core + rest)
    inv2mu = 0.5 / mat.mu
    return (
        np.real(dx) * inv2mu,
        np.real(dy) * inv2mu,
        np.imag(dx) * inv2mu,
        np.imag(dy) * inv2mu,
    )


def displacement_gradient(m: PotentialModel, mat: Material, z, side_nudge=None):
    """Exact displacement gradient of a potential model at points z."""
    quint = m.potentials(z, side_nudge=side_nudge)
    return displacement_gradient_from_potentials(z, quint, mat)


def rotation_scalar_from_potentials(quint, mat: Material):
    """Local rigid rotation (duy_dx - dux_dy)/2 = (kappa+1) Im(phi') / (2 mu)."""
    _, phi1, _, _, _ = quint
    return (mat.kappa + 1.0) * np.imag(phi1) / (2.0 * mat.mu)
