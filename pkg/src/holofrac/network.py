"""Holomorphic complex-valued multilayer networks.

A network here is a stack of complex affine layers with the entire activation
``exp`` applied after every layer except the last. Because every building
block is holomorphic, the map z -> f(z) is holomorphic wherever it is finite,
which is what lets a pair of such networks represent plane-elastic complex
potentials with the field equations satisfied identically.

Evaluation propagates the triple (f, f', f'') through each layer in forward
mode, so first and second derivatives with respect to the complex input are
exact up to rounding:

    affine:  y = W x + b     y' = W x'        y'' = W x''
    exp:     u = exp(y)      u' = u y'        u'' = u (y'' + y'^2)

Training gradients treat the real and imaginary parts of every weight and
bias as independent real variables.  The reverse sweep carries one complex
adjoint per channel, defined as A(v) = dL/d(Re v) + i dL/d(Im v); for a
holomorphic elementary step w = h(v) the chain rule is A(v) = A(w) conj(h').

Parameter flattening order (also the checkpoint layout): for each layer in
order, Re W (row-major), Im W, Re b, Im b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# exp(50) ~ 5e21; anything beyond this in a pre-activation means training has
# blown up and silently saturating would only hide it.
PREACT_REAL_LIMIT = 50.0


class ActivationOverflowError(FloatingPointError):
    """A pre-activation left the trusted range of the exp activation."""

    def __init__(self, layer: int, max_re: float):
        self.layer = layer
        self.max_re = max_re
        super().__init__(
            f"pre-activation overflow in layer {layer}: max |Re y| = {max_re:.3g} "
            f"exceeds {PREACT_REAL_LIMIT}"
        )


class DegenerateProbeError(ValueError):
    """Probe batch has (numerically) zero second moment at some layer."""


@dataclass
class InitConfig:
    """Configuration for the data-dependent layerwise initialization.

    ``beta`` controls the kept second moment through the exp activation.
    ``gaussian_prestab_layers`` is the number of leading layers whose variance
    parameter is measured from the probe batch; layers beyond it use the
    closed-form value beta * exp(-beta).  ``None`` selects the default of
    (number of hidden layers - 1).
    """

    probe_batch: np.ndarray
    beta: float = 1.0
    gaussian_prestab_layers: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        self.probe_batch = np.asarray(self.probe_batch, dtype=np.complex128).ravel()
        if self.probe_batch.size == 0:
            raise ValueError("probe batch must be non-empty")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass
class HoloNetwork:
    """Complex MLP mapping a complex scalar to a complex scalar.

    ``weights[i]`` has shape (n_out, n_in), ``biases[i]`` shape (n_out,).
    The activation exp follows every layer except the last.
    """

    widths: list[int]
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def n_hidden(self) -> int:
        return len(self.widths) - 2

    @property
    def n_params(self) -> int:
        """Number of real parameters (2 per complex weight/bias entry)."""
        return 2 * sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "HoloNetwork":
        return HoloNetwork(
            widths=list(self.widths),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def check_finite(self):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise FloatingPointError(f"non-finite parameters in layer {i}")

    # ---- parameter vector <-> layers ------------------------------------

    def get_params(self) -> np.ndarray:
        """Flatten to a real vector: per layer Re W, Im W, Re b, Im b."""
        blocks = []
        for w, b in zip(self.weights, self.biases):
            blocks += [w.real.ravel(), w.imag.ravel(), b.real, b.imag]
        return np.concatenate(blocks)

    def set_params(self, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {vec.size}")
        k = 0
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            nw, nb = w.size, b.size
            wr = vec[k : k + nw].reshape(w.shape)
            wi = vec[k + nw : k + 2 * nw].reshape(w.shape)
            k += 2 * nw
            br = vec[k : k + nb]
            bi = vec[k + nb : k + 2 * nb]
            k += 2 * nb
            self.weights[i] = wr + 1j * wi
            self.biases[i] = br + 1j * bi

    # ---- evaluation ------------------------------------------------------

    def forward(self, z: np.ndarray, with_cache: bool = False):
        """Evaluate (f, f', f'') at a batch of complex points.

        The three channels ride as stacked row blocks of one (3N, width)
        array so each affine layer is a single flat matmul.  Returns the
        output triple, plus the per-layer cache needed by ``backward``.
        """
        z = np.asarray(z, dtype=np.complex128).ravel()
        n = len(z)
        x = np.zeros((3 * n, 1), dtype=np.complex128)
        x[:n, 0] = z
        x[n:2 * n, 0] = 1.0
        cache = [] if with_cache else None
        last = self.n_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            y = x @ w.T
            y[:n] += b
            if i < last:
                yv = y[:n]
                max_re = float(np.max(np.abs(yv.real))) if n else 0.0
                if not np.isfinite(max_re) or max_re > PREACT_REAL_LIMIT:
                    raise ActivationOverflowError(i, max_re)
                u = np.empty_like(y)
                e = np.exp(yv)
                y1 = y[n:2 * n]
                u[:n] = e
                np.multiply(e, y1, out=u[n:2 * n])
                y[2 * n:] += y1 * y1
                np.multiply(e, y[2 * n:], out=u[2 * n:])
                if with_cache:
                    cache.append((x, u, y1))
                x = u
            else:
                if with_cache:
                    cache.append((x,))
                x = y
        f, f1, f2 = x[:n, 0], x[n:2 * n, 0], x[2 * n:, 0]
        if with_cache:
            return f, f1, f2, cache
        return f, f1, f2

    def backward(self, cache, a_f: np.ndarray, a_f1: np.ndarray, a_f2: np.ndarray) -> np.ndarray:
        """Reverse sweep: adjoints of (f, f', f'') -> flat real gradient.

        Adjoints follow the A(v) = dL/dRe + i dL/dIm convention and the
        result is laid out exactly like ``get_params``.
        """
        n = len(a_f)
        width = self.widths[-1]
        au = np.zeros((3 * n, width), dtype=np.complex128)
        au[:n, 0] = a_f
        au[n:2 * n, 0] = a_f1
        au[2 * n:, 0] = a_f2
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        last = self.n_layers - 1
        for i in range(last, -1, -1):
            entry = cache[i]
            x = entry[0]
            if i < last:
                u, y1 = entry[1], entry[2]
                # u = exp(y), u' = u y', u'' = u (y'' + y'^2) as functions of
                # the y-triple; all elementary maps are holomorphic.
                uc = np.conj(u)
                ay = np.empty_like(au)
                u0c = uc[:n]
                ay[:n] = au[:n] * u0c + au[n:2 * n] * uc[n:2 * n] + au[2 * n:] * uc[2 * n:]
                ay[n:2 * n] = au[n:2 * n] * u0c + au[2 * n:] * (2.0 * u0c * np.conj(y1))
                ay[2 * n:] = au[2 * n:] * u0c
            else:
                ay = au
            w = self.weights[i]
            aw = ay.T @ np.conj(x)
            ab = ay[:n].sum(axis=0)
            grads_w[i] = aw
            grads_b[i] = ab
            if i > 0:
                au = ay @ np.conj(w)
        blocks = []
        for aw, ab in zip(grads_w, grads_b):
            blocks += [aw.real.ravel(), aw.imag.ravel(), ab.real, ab.imag]
        return np.concatenate(blocks)


def init_network(widths: list[int], cfg: InitConfig) -> HoloNetwork:
    """Build a network with the data-dependent layerwise variance rule.

    Layer ell <= M_e draws Re/Im weight entries from N(0, rho/(2 n_in)) with
    rho = beta / (empirical second moment of the previous activations over the
    probe batch), measured by propagating the probe through the layers already
    initialized; later layers use rho = beta * exp(-beta).  Biases start at
    zero.  Deterministic for a fixed seed.
    """
    widths = list(int(w) for w in widths)
    if len(widths) < 2 or widths[0] != 1 or widths[-1] != 1:
        raise ValueError("widths must start and end with 1")
    if any(w < 1 for w in widths):
        raise ValueError("widths must be positive")
    n_layers = len(widths) - 1
    m_e = cfg.gaussian_prestab_layers
    if m_e is None:
        m_e = max(n_layers - 2, 0)  # all but the last hidden layer
    if m_e > n_layers:
        raise ValueError("gaussian_prestab_layers exceeds the layer count")

    rng = np.random.default_rng(cfg.rng_seed)
    net = HoloNetwork(widths=widths)
    x = cfg.probe_batch[:, None]
    rho_tail = cfg.beta * np.exp(-cfg.beta)
    for ell in range(1, n_layers + 1):
        n_in, n_out = widths[ell - 1], widths[ell]
        if ell <= m_e:
            m_prev = float(np.mean(np.abs(x) ** 2))
            if m_prev <= 1e-300:
                raise DegenerateProbeError(
                    f"probe second moment vanished before layer {ell}"
                )
            rho = cfg.beta / m_prev
        else:
            rho = rho_tail
        sd = np.sqrt(rho / (2 * n_in))
        w = rng.normal(0.0, sd, (n_out, n_in)) + 1j * rng.normal(0.0, sd, (n_out, n_in))
        b = np.zeros(n_out, dtype=np.complex128)
        net.weights.append(w)
        net.biases.append(b)
        y = x @ w.T + b
        x = np.exp(y) if ell < n_layers else y
    return net


def probe_second_moments(net: HoloNetwork, probe: np.ndarray) -> list[float]:
    """Empirical second moments of the activations at each layer for a probe."""
    x = np.asarray(probe, dtype=np.complex128).ravel()[:, None]
    out = [float(np.mean(np.abs(x) ** 2))]
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        y = x @ w.T + b
        x = np.exp(y) if i < net.n_layers - 1 else y
        out.append(float(np.mean(np.abs(x) ** 2)))
    return out


def forward_with_z_derivatives(net: HoloNetwork, z: complex):
    """Scalar convenience wrapper: (f, f', f'') at a single point."""
    f, f1, f2 = net.forward(np.array([z]))
    return complex(f[0]), complex(f1[0]), complex(f2[0])


def parameter_gradients(net: HoloNetwork, batch) -> np.ndarray:
    """Gradient of a real scalar loss from per-point output adjoints.

    ``batch`` is a sequence of (z, (a_f, a_f1, a_f2)) pairs, the adjoints
    being dL/d(Re,Im) of each output channel packed as complex numbers.
    Linear in the adjoints; returns the flat real gradient.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    z = np.array([p[0] for p in batch], dtype=np.complex128)
    a = np.array([p[1] for p in batch], dtype=np.complex128)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError("each adjoint must have three channels (f, f', f'')")
    _, _, _, cache = net.forward(z, with_cache=True)
    return net.backward(cache, a[:, 0], a[:, 1], a[:, 2])
