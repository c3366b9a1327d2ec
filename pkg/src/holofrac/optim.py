"""Full-batch optimizers on flat real parameter vectors.

Adam with global gradient-norm clipping for the exploratory stage, and a
limited-memory BFGS with a strong-Wolfe line search for the polishing stage.
Both operate on closures returning (loss, gradient); trial points that raise
or return non-finite values are treated as infinitely bad so the line search
backs off instead of crashing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def clip_global_norm(g: np.ndarray, max_norm: float) -> np.ndarray:
    """Rescale g so its 2-norm does not exceed max_norm."""
    if max_norm is None or max_norm <= 0:
        return g
    n = float(np.linalg.norm(g))
    if n > max_norm:
        return g * (max_norm / n)
    return g


@dataclass
class Adam:
    """Standard Adam with bias correction."""

    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0

    def step(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        mh = self.m / (1 - self.beta1**self.t)
        vh = self.v / (1 - self.beta2**self.t)
        return x - self.lr * mh / (np.sqrt(vh) + self.eps)


class _Objective:
    """Wraps a (loss, grad) closure; non-finite or raising trials -> +inf."""

    def __init__(self, fun_grad):
        self.fun_grad = fun_grad
        self.n_evals = 0

    def __call__(self, x):
        self.n_evals += 1
        try:
            f, g = self.fun_grad(x)
        except FloatingPointError:
            return np.inf, None
        if not np.isfinite(f):
            return np.inf, None
        return float(f), g


def _cubic_min(a, fa, dfa, b, fb, dfb):
    """Minimizer of the cubic interpolant on [a, b]; None if degenerate."""
    with np.errstate(all="ignore"):
        d1 = dfa + dfb - 3 * (fa - fb) / (a - b)
        disc = d1 * d1 - dfa * dfb
        if disc < 0 or not np.isfinite(disc):
            return None
        d2 = np.sqrt(disc) * np.sign(b - a)
        denom = dfb - dfa + 2 * d2
        if denom == 0 or not np.isfinite(denom):
            return None
        t = b - (b - a) * (dfb + d2 - d1) / denom
    if not np.isfinite(t):
        return None
    return t


def _zoom(phi, lo, f_lo, d_lo, hi, f_hi, d_hi, f0, d0, c1, c2, budget):
    """Nocedal-Wright zoom: shrink [lo, hi] to a strong-Wolfe point."""
    for _ in range(budget):
        t = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
        width = abs(hi - lo)
        span_lo, span_hi = min(lo, hi), max(lo, hi)
        if (t is None or not (span_lo + 0.05 * width < t < span_hi - 0.05 * width)):
            t = 0.5 * (lo + hi)
        f_t, d_t = phi(t)
        if f_t > f0 + c1 * t * d0 or f_t >= f_lo:
            hi, f_hi, d_hi = t, f_t, d_t
        else:
            if abs(d_t) <= -c2 * d0:
                return t, f_t, d_t
            if d_t * (hi - lo) >= 0:
                hi, f_hi, d_hi = lo, f_lo, d_lo
            lo, f_lo, d_lo = t, f_t, d_t
        if width < 1e-14:
            break
    return None


def strong_wolfe_search(fun_grad_1d, f0, d0, alpha0=1.0, c1=1e-4, c2=0.9,
                        max_evals=25):
    """Strong Wolfe line search (bracket + zoom with cubic interpolation).

    ``fun_grad_1d(a)`` returns (phi(a), phi'(a)) along the ray; phi(a) may be
    +inf for infeasible trials.  Returns (alpha, f, dphi) or None on failure.
    """
    if d0 >= 0:
        return None
    evals = [0]

    def phi(a):
        evals[0] += 1
        return fun_grad_1d(a)

    a_prev, f_prev, d_prev = 0.0, f0, d0
    a = alpha0
    a_max = 1e3 * max(alpha0, 1.0)
    first = True
    while evals[0] < max_evals:
        f_a, d_a = phi(a)
        if not np.isfinite(f_a):
            # came down on an infeasible region: bisect toward the last good point
            a = 0.5 * (a_prev + a)
            if a - a_prev < 1e-16:
                return None
            continue
        if f_a > f0 + c1 * a * d0 or (not first and f_a >= f_prev):
            return _zoom(phi, a_prev, f_prev, d_prev, a, f_a, d_a,
                         f0, d0, c1, c2, max_evals - evals[0])
        if abs(d_a) <= -c2 * d0:
            return a, f_a, d_a
        if d_a >= 0:
            return _zoom(phi, a, f_a, d_a, a_prev, f_prev, d_prev,
                         f0, d0, c1, c2, max_evals - evals[0])
        a_prev, f_prev, d_prev = a, f_a, d_a
        a = min(2.0 * a, a_max)
        first = False
        if a >= a_max:
            return None
    return None


@dataclass
class LbfgsResult:
    x: np.ndarray
    f: float
    n_iters: int
    n_evals: int
    converged: bool
    stop_reason: str
    history: list = field(default_factory=list)


def minimize_lbfgs(fun_grad, x0: np.ndarray, max_iter: int, history_size: int = 20,
                   c1: float = 1e-4, c2: float = 0.9, max_ls_evals: int = 25,
                   grad_tol: float = 1e-14, callback=None) -> LbfgsResult:
    """Limited-memory BFGS with two-loop recursion and strong Wolfe steps.

    Line-search failure terminates the loop and the best iterate seen is
    returned (never an exception).  ``callback(i, f, x)`` runs once per
    accepted iteration.
    """
    obj = _Objective(fun_grad)
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = obj(x)
    if g is None:
        raise FloatingPointError("objective not finite at the initial point")
    best_x, best_f = x.copy(), f
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []
    stop = "max_iter"
    hist = []
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol:
            stop = "grad_tol"
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
            a = rho * float(s @ q)
            q -= a * y
            alphas.append(a)
        if y_list:
            gamma = float(s_list[-1] @ y_list[-1]) / float(y_list[-1] @ y_list[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        d = -q
        d0 = float(g @ d)
        if d0 >= 0:  # safeguard: fall back to steepest descent
            d = -g
            d0 = -gnorm**2

        g_trial = [None]

        def phi(a, _d=d, _x=x, _gt=g_trial):
            ft, gt = obj(_x + a * _d)
            _gt[0] = gt
            if gt is None:
                return ft, np.inf
            return ft, float(gt @ _d)

        alpha0 = min(1.0, 1.0 / max(gnorm, 1e-12)) if not y_list else 1.0
        res = strong_wolfe_search(phi, f, d0, alpha0=alpha0, c1=c1, c2=c2,
                                  max_evals=max_ls_evals)
        if res is None:
            stop = "line_search_failure"
            it -= 1
            break
        alpha, f_new, _ = res
        x_new = x + alpha * d
        g_new = g_trial[0]
        if g_new is None:
            f_new, g_new = obj(x_new)
            if g_new is None:
                stop = "non_finite"
                it -= 1
                break
        s = x_new - x
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
            s_list.append(s)
            y_list.append(yv)
            rho_list.append(1.0 / sy)
            if len(s_list) > history_size:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        x, f, g = x_new, f_new, g_new
        if f < best_f:
            best_f, best_x = f, x.copy()
        hist.append(f)
        if callback is not None:
            callback(it, f, x)
    return LbfgsResult(x=best_x, f=best_f, n_iters=it, n_evals=obj.n_evals,
                       converged=(stop == "grad_tol"), stop_reason=stop,
                       history=hist)


def golden_section_min(fun, lo: float, hi: float, tol: float = 1e-10,
                       max_iter: int = 200) -> float:
    """Golden-section minimizer of a unimodal scalar function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)
