"""Boundary-loss assembly and the mixed Adam -> L-BFGS training loop.

The loss is a length-weighted sum over boundary segments of mean-squared
residuals in pre-normalized fields: stresses are divided by the RMS of the
applied tractions, displacements by u_ref = sigma_ref * L_ref / E', which
makes every term unit-free and insensitive to load amplitude and material
constants.  Interface segments penalize displacement and traction jumps
between the two subdomain models.  Because every benchmark here is pure
Neumann, a gauge term (squared global mean of normalized displacement and of
rotation over the outer-boundary points, weight 1) pins the three rigid-body
degrees of freedom.

Gradients flow through the Kolosov-Muskhelishvili field relations to complex
adjoints of the potential quintuple, then through the networks (reverse
sweep) and the enrichment amplitude coefficients.  Parameter vector layout:
for each subdomain in id order, phi-network blocks, psi-network blocks, then
(Re K, Im K) per tip enrichment.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .fields import (
    Material,
    PotentialModel,
    TipEnrichment,
    fields_from_potentials,
    williams_amplitude_coefficients,
)
from .geometry import (
    KIND_DIRICHLET,
    KIND_INTERFACE,
    KIND_NEUMANN,
    Decomposition,
    SegmentColloc,
)
from .network import HoloNetwork, InitConfig, init_network
from .optim import Adam, clip_global_norm, minimize_lbfgs


@dataclass(frozen=True)
class ReferenceScales:
    """Normalization scales: sigma_ref (MPa), l_ref (mm), u_ref (mm)."""

    sigma_ref: float
    l_ref: float
    u_ref: float


def compute_reference_scales(colloc: list[SegmentColloc], mat: Material,
                             dom) -> ReferenceScales:
    """RMS of applied tractions over all Neumann points; u_ref from E'."""
    sq_sum, n = 0.0, 0
    for sc in colloc:
        if sc.kind == KIND_NEUMANN:
            sq_sum += float(np.sum(np.abs(sc.targets) ** 2))
            n += sc.n_points
    if n == 0:
        raise ValueError("no Neumann points; reference scales undefined")
    sigma_ref = float(np.sqrt(sq_sum / n))
    if sigma_ref <= 0.0:
        raise ValueError("all-zero loading; normalization undefined")
    l_ref = dom.length_scale
    return ReferenceScales(sigma_ref=sigma_ref, l_ref=l_ref,
                           u_ref=sigma_ref * l_ref / mat.e_eff)


@dataclass
class TrainSchedule:
    """Epoch/iteration budgets for full and warm-started (fine-tune) training."""

    adam_epochs: int = 2500
    lbfgs_iters: int = 2500
    adam_lr: float = 1e-2
    tl_adam_epochs: int = 500
    tl_lbfgs_iters: int = 500
    clip_norm: float = 1.0
    lbfgs_history: int = 20
    seed: int = 0

    def __post_init__(self):
        if min(self.adam_epochs, self.lbfgs_iters,
               self.tl_adam_epochs, self.tl_lbfgs_iters) < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.adam_lr <= 0:
            raise ValueError("learning rate must be positive")


@dataclass
class SegmentLoss:
    name: str
    weight: float
    l_u: float = 0.0
    l_t: float = 0.0
    l_i: float = 0.0


@dataclass
class LossReport:
    total: float
    segments: list[SegmentLoss]
    epoch: int = -1
    wall_ms: float = 0.0


GAUGE_SEGMENT_NAME = "gauge"


class TrainableSystem:
    """Two subdomain models exposed as one flat real parameter vector."""

    def __init__(self, models: dict[int, PotentialModel]):
        self.models = dict(sorted(models.items()))

    @property
    def subdomain_ids(self):
        return list(self.models)

    def get_params(self) -> np.ndarray:
        blocks = []
        for m in self.models.values():
            blocks.append(m.phi_net.get_params())
            blocks.append(m.psi_net.get_params())
            for e in m.enrichments:
                blocks.append(np.array([e.amplitude.real, e.amplitude.imag]))
        return np.concatenate(blocks) if blocks else np.zeros(0)

    def set_params(self, vec: np.ndarray):
        k = 0
        for m in self.models.values():
            n = m.phi_net.n_params
            m.phi_net.set_params(vec[k:k + n]); k += n
            n = m.psi_net.n_params
            m.psi_net.set_params(vec[k:k + n]); k += n
            for e in m.enrichments:
                e.amplitude = complex(vec[k], vec[k + 1]); k += 2
        if k != vec.size:
            raise ValueError(f"parameter vector length {vec.size}, expected {k}")

    @property
    def n_params(self) -> int:
        return sum(m.phi_net.n_params + m.psi_net.n_params + 2 * len(m.enrichments)
                   for m in self.models.values())

    def copy_state(self) -> np.ndarray:
        return self.get_params().copy()


def build_system(dec: Decomposition, colloc: list[SegmentColloc],
                 hidden_widths: list[int], beta: float = 1.0,
                 prestab_layers: int | None = None, seed: int = 0) -> TrainableSystem:
    """Fresh networks (data-dependent init) plus zero-amplitude enrichments."""
    widths = [1] + list(hidden_widths) + [1]
    probes = {sd: [] for sd in (1, 2)}
    for sc in colloc:
        for sd in sc.subdomains:
            probes[sd].append(sc.points)
    models = {}
    for i, sd in enumerate((1, 2)):
        probe = np.concatenate(probes[sd]) if probes[sd] else np.array([1.0 + 0j])
        nets = []
        for j in range(2):
            cfg = InitConfig(probe_batch=probe, beta=beta,
                             gaussian_prestab_layers=prestab_layers,
                             rng_seed=int(np.random.SeedSequence([seed, i, j]).generate_state(1)[0]))
            nets.append(init_network(widths, cfg))
        enr = [TipEnrichment(tip=t, angle=a, amplitude=0j) for t, a in dec.tips]
        models[sd] = PotentialModel(phi_net=nets[0], psi_net=nets[1],
                                    enrichments=enr, subdomain=sd,
                                    tip_eps=dec.tip_exclusion_radius)
    return TrainableSystem(models)


# ---------------------------------------------------------------------------
# loss assembly
# ---------------------------------------------------------------------------


class _SubdomainBatch:
    """Concatenated evaluation points of one subdomain plus adjoint buffers."""

    def __init__(self, sd: int):
        self.sd = sd
        self.points: list[np.ndarray] = []
        self.nudges: list[np.ndarray] = []
        self.offsets: dict = {}
        self._n = 0

    def add(self, key, points, nudge):
        self.offsets[key] = (self._n, self._n + len(points))
        self.points.append(points)
        self.nudges.append(nudge)
        self._n += len(points)

    def finalize(self):
        self.z = np.concatenate(self.points) if self.points else np.zeros(0, complex)
        self.nudge = np.concatenate(self.nudges) if self.nudges else np.zeros(0, complex)

    def sl(self, key):
        a, b = self.offsets[key]
        return slice(a, b)


class LossAssembler:
    """Precomputed wiring from collocation sets to loss and gradient."""

    def __init__(self, system: TrainableSystem, colloc: list[SegmentColloc],
                 scales: ReferenceScales, mat: Material):
        self.system = system
        self.colloc = colloc
        self.scales = scales
        self.mat = mat
        self.batches = {sd: _SubdomainBatch(sd) for sd in system.models}
        for idx, sc in enumerate(colloc):
            if sc.kind == KIND_INTERFACE:
                sd1, sd2 = sc.subdomains
                self.batches[sd1].add(("i", idx, sd1), sc.points, -sc.normals)
                self.batches[sd2].add(("i", idx, sd2), sc.points, +sc.normals)
            else:
                (sd,) = sc.subdomains
                self.batches[sd].add(("b", idx), sc.points, sc.inward)
        for b in self.batches.values():
            b.finalize()
        # tip-term coefficients depend only on the frozen geometry: cache them
        self._tip_coeffs = {}
        for sd, model in system.models.items():
            b = self.batches[sd]
            self._tip_coeffs[sd] = [
                williams_amplitude_coefficients(e, b.z, side_nudge=b.nudge,
                                                tip_eps=model.tip_eps)
                for e in model.enrichments
            ]

    # -- evaluation --------------------------------------------------------

    def _eval_subdomain(self, sd: int, with_cache: bool):
        model = self.system.models[sd]
        b = self.batches[sd]
        if with_cache:
            pf, pf1, pf2, cache_f = model.phi_net.forward(b.z, with_cache=True)
            pg, pg1, pg2, cache_g = model.psi_net.forward(b.z, with_cache=True)
        else:
            pf, pf1, pf2 = model.phi_net.forward(b.z)
            pg, pg1, pg2 = model.psi_net.forward(b.z)
            cache_f = cache_g = None
        quint = [np.asarray(pf, complex), np.asarray(pf1, complex),
                 np.asarray(pf2, complex), np.asarray(pg, complex),
                 np.asarray(pg1, complex)]
        coeffs = self._tip_coeffs[sd]
        for e, (holo, anti) in zip(model.enrichments, coeffs):
            k = complex(e.amplitude)
            kc = np.conj(k)
            for c in range(5):
                quint[c] = quint[c] + k * holo[c] + kc * anti[c]
        return tuple(quint), coeffs, cache_f, cache_g

    def loss_and_grad(self, with_grad: bool = True):
        mat, sc = self.mat, self.scales
        mu, kappa = mat.mu, mat.kappa
        quints, coeffs, caches, fields, adj = {}, {}, {}, {}, {}
        for sd in self.batches:
            quint, cf, cache_f, cache_g = self._eval_subdomain(sd, with_grad)
            quints[sd] = quint
            coeffs[sd] = cf
            caches[sd] = (cache_f, cache_g)
            fields[sd] = fields_from_potentials(self.batches[sd].z, quint, mat)
            if with_grad:
                n = len(self.batches[sd].z)
                adj[sd] = {k: np.zeros(n, complex) for k in
                           ("sxx", "syy", "sxy", "ux", "uy", "phi1_rot")}

        report_segments = []
        total = 0.0

        for idx, c in enumerate(self.colloc):
            entry = SegmentLoss(name=c.segment.name, weight=c.weight)
            if c.kind == KIND_NEUMANN:
                (sd,) = c.subdomains
                s = self.batches[sd].sl(("b", idx))
                f = fields[sd]
                nx, ny = c.normals.real, c.normals.imag
                tx = f.sxx[s] * nx + f.sxy[s] * ny
                ty = f.sxy[s] * nx + f.syy[s] * ny
                rx = (tx - c.targets.real) / sc.sigma_ref
                ry = (ty - c.targets.imag) / sc.sigma_ref
                n = c.n_points
                entry.l_t = float(np.sum(rx * rx + ry * ry) / n)
                if with_grad:
                    gx = (2.0 * c.weight / (n * sc.sigma_ref)) * rx
                    gy = (2.0 * c.weight / (n * sc.sigma_ref)) * ry
                    a = adj[sd]
                    a["sxx"][s] += gx * nx
                    a["syy"][s] += gy * ny
                    a["sxy"][s] += gx * ny + gy * nx
            elif c.kind == KIND_DIRICHLET:
                (sd,) = c.subdomains
                s = self.batches[sd].sl(("b", idx))
                f = fields[sd]
                rx = (f.ux[s] - c.targets.real) / sc.u_ref
                ry = (f.uy[s] - c.targets.imag) / sc.u_ref
                n = c.n_points
                entry.l_u = float(np.sum(rx * rx + ry * ry) / n)
                if with_grad:
                    a = adj[sd]
                    a["ux"][s] += (2.0 * c.weight / (n * sc.u_ref)) * rx
                    a["uy"][s] += (2.0 * c.weight / (n * sc.u_ref)) * ry
            else:  # interface
                sd1, sd2 = c.subdomains
                s1 = self.batches[sd1].sl(("i", idx, sd1))
                s2 = self.batches[sd2].sl(("i", idx, sd2))
                f1, f2 = fields[sd1], fields[sd2]
                nx, ny = c.normals.real, c.normals.imag
                jux = (f1.ux[s1] - f2.ux[s2]) / sc.u_ref
                juy = (f1.uy[s1] - f2.uy[s2]) / sc.u_ref
                t1x = f1.sxx[s1] * nx + f1.sxy[s1] * ny
                t1y = f1.sxy[s1] * nx + f1.syy[s1] * ny
                t2x = f2.sxx[s2] * nx + f2.sxy[s2] * ny
                t2y = f2.sxy[s2] * nx + f2.syy[s2] * ny
                jtx = (t1x - t2x) / sc.sigma_ref
                jty = (t1y - t2y) / sc.sigma_ref
                n = c.n_points
                entry.l_i = float(np.sum(jux**2 + juy**2 + jtx**2 + jty**2) / n)
                if with_grad:
                    cu = 2.0 * c.weight / (n * sc.u_ref)
                    ct = 2.0 * c.weight / (n * sc.sigma_ref)
                    for sdx, sx, sign in ((sd1, s1, 1.0), (sd2, s2, -1.0)):
                        a = adj[sdx]
                        a["ux"][sx] += sign * cu * jux
                        a["uy"][sx] += sign * cu * juy
                        a["sxx"][sx] += sign * ct * jtx * nx
                        a["syy"][sx] += sign * ct * jty * ny
                        a["sxy"][sx] += sign * ct * (jtx * ny + jty * nx)
            total += entry.weight * (entry.l_u + entry.l_t + entry.l_i)
            report_segments.append(entry)

        # rigid-body gauge: global mean displacement / rotation over outer points
        outer = []
        for idx, c in enumerate(self.colloc):
            if c.segment.outer:
                (sd,) = c.subdomains
                outer.append((sd, self.batches[sd].sl(("b", idx)), c.n_points))
        n_outer = sum(n for _, _, n in outer)
        gauge = SegmentLoss(name=GAUGE_SEGMENT_NAME, weight=1.0)
        if n_outer:
            mean_ux = sum(float(np.sum(fields[sd].ux[s])) for sd, s, _ in outer) / n_outer
            mean_uy = sum(float(np.sum(fields[sd].uy[s])) for sd, s, _ in outer) / n_outer
            c_rot = sc.l_ref / sc.u_ref
            mean_rot = sum(
                float(np.sum((kappa + 1.0) * np.imag(quints[sd][1][s]) / (2 * mu)))
                for sd, s, _ in outer) / n_outer
            gu = (mean_ux / sc.u_ref) ** 2 + (mean_uy / sc.u_ref) ** 2
            gw = (mean_rot * c_rot) ** 2
            gauge.l_u = gu + gw
            total += gauge.weight * gauge.l_u
            if with_grad:
                gux = 2.0 * (mean_ux / sc.u_ref) / (n_outer * sc.u_ref)
                guy = 2.0 * (mean_uy / sc.u_ref) / (n_outer * sc.u_ref)
                grot = 2.0 * (mean_rot * c_rot) * c_rot / n_outer
                for sd, s, _ in outer:
                    a = adj[sd]
                    a["ux"][s] += gux
                    a["uy"][s] += guy
                    a["phi1_rot"][s] += grot * (kappa + 1.0) / (2 * mu)
        report_segments.append(gauge)

        report = LossReport(total=float(total), segments=report_segments)
        if not with_grad:
            return report, None

        grad_blocks = []
        for sd, model in self.system.models.items():
            b = self.batches[sd]
            a = adj[sd]
            z = b.z
            # field adjoints -> potential-quintuple adjoints
            a_d = (a["ux"] + 1j * a["uy"]) / (2 * mu)
            a_phi = kappa * a_d
            a_phi1 = (2.0 * (a["sxx"] + a["syy"])
                      - z * np.conj(a_d)
                      + 1j * a["phi1_rot"])
            a_phi2 = z * (-a["sxx"] + a["syy"] + 1j * a["sxy"])
            a_psi = -np.conj(a_d)
            a_psi1 = -a["sxx"] + a["syy"] + 1j * a["sxy"]
            cache_f, cache_g = caches[sd]
            zero = np.zeros_like(a_psi)
            g_phi = model.phi_net.backward(cache_f, a_phi, a_phi1, a_phi2)
            g_psi = model.psi_net.backward(cache_g, a_psi, a_psi1, zero)
            grad_blocks.append(g_phi)
            grad_blocks.append(g_psi)
            for (holo, anti) in coeffs[sd]:
                a_k = (np.sum(a_phi * np.conj(holo[0]))
                       + np.sum(a_phi1 * np.conj(holo[1]))
                       + np.sum(a_phi2 * np.conj(holo[2]))
                       + np.sum(a_psi * np.conj(holo[3]))
                       + np.sum(a_psi1 * np.conj(holo[4]))
                       + np.sum(anti[3] * np.conj(a_psi))
                       + np.sum(anti[4] * np.conj(a_psi1)))
                grad_blocks.append(np.array([a_k.real, a_k.imag]))
        return report, np.concatenate(grad_blocks)


def assemble_loss(system: TrainableSystem, colloc: list[SegmentColloc],
                  scales: ReferenceScales, mat: Material,
                  with_grad: bool = True):
    """One-shot loss (and gradient) assembly; see LossAssembler for reuse."""
    return LossAssembler(system, colloc, scales, mat).loss_and_grad(with_grad)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------

TEST_EVAL_PERIOD = 10


@dataclass
class HistoryRow:
    stage: str
    epoch: int
    train_loss: float
    test_loss: float | None
    wall_ms: float


def train_mixed(system: TrainableSystem, colloc_train: list[SegmentColloc],
                colloc_test: list[SegmentColloc], schedule: TrainSchedule,
                scales: ReferenceScales, mat: Material,
                fine_tune: bool = False) -> list[HistoryRow]:
    """Adam stage then L-BFGS stage, full batch, recording loss history.

    ``fine_tune`` selects the reduced warm-start budgets.  The L-BFGS stage
    ends early on line-search failure, returning the best iterate.
    """
    asm = LossAssembler(system, colloc_train, scales, mat)
    asm_test = LossAssembler(system, colloc_test, scales, mat) if colloc_test else None
    n_adam = schedule.tl_adam_epochs if fine_tune else schedule.adam_epochs
    n_lbfgs = schedule.tl_lbfgs_iters if fine_tune else schedule.lbfgs_iters
    history: list[HistoryRow] = []
    t0 = time.perf_counter()

    def test_loss():
        if asm_test is None:
            return None
        rep, _ = asm_test.loss_and_grad(with_grad=False)
        return rep.total

    adam = Adam(lr=schedule.adam_lr)
    x = system.get_params()
    best_x, best_f = x.copy(), np.inf
    for epoch in range(n_adam):
        system.set_params(x)
        try:
            report, g = asm.loss_and_grad(with_grad=True)
        except FloatingPointError:
            x = best_x.copy()  # diverged: fall back and hand over to L-BFGS
            break
        if report.total < best_f:
            best_f, best_x = report.total, x.copy()
        tl = test_loss() if (epoch % TEST_EVAL_PERIOD == 0) else None
        history.append(HistoryRow("adam", epoch, report.total, tl,
                                  1e3 * (time.perf_counter() - t0)))
        g = clip_global_norm(g, schedule.clip_norm)
        x = adam.step(x, g)
    system.set_params(x)
    try:
        final_rep, _ = asm.loss_and_grad(with_grad=False)
        if final_rep.total < best_f:
            best_f, best_x = final_rep.total, x.copy()
    except FloatingPointError:
        pass
    x = best_x if best_f < np.inf else x
    system.set_params(x)

    def fun_grad(vec):
        system.set_params(vec)
        rep, g = asm.loss_and_grad(with_grad=True)
        return rep.total, g

    if n_lbfgs > 0:
        it_t0 = time.perf_counter()

        def cb(i, f, xv):
            tl = None
            if i % TEST_EVAL_PERIOD == 0 and asm_test is not None:
                system.set_params(xv)
                tl = test_loss()
            history.append(HistoryRow("lbfgs", i - 1, f, tl,
                                      1e3 * (time.perf_counter() - t0)))

        res = minimize_lbfgs(fun_grad, x, max_iter=n_lbfgs,
                             history_size=schedule.lbfgs_history,
                             max_ls_evals=25, callback=cb)
        system.set_params(res.x)
    return history


def warm_start(prev: TrainableSystem, mapped_amplitudes: list[complex],
               dec: Decomposition) -> TrainableSystem:
    """Clone networks; re-anchor enrichments to the new tips with seeded K.

    ``mapped_amplitudes[i]`` seeds tip i of the new decomposition (complex
    K = K_I - i K_II) in both subdomains.
    """
    if len(mapped_amplitudes) != len(dec.tips):
        raise ValueError("one seeded amplitude per active tip required")
    models = {}
    for sd, m in prev.models.items():
        enr = [TipEnrichment(tip=t, angle=a, amplitude=complex(k))
               for (t, a), k in zip(dec.tips, mapped_amplitudes)]
        models[sd] = PotentialModel(
            phi_net=m.phi_net.copy(), psi_net=m.psi_net.copy(),
            enrichments=enr, subdomain=sd, tip_eps=dec.tip_exclusion_radius,
        )
    return TrainableSystem(models)
