"""numpy implementations of the hot kernels; used when the extension is absent."""

import numpy as np


def decay_weighted_square_sum(offset, t_sample, n_samples, alpha):
    """sum_m (offset + m t_s)^2 exp(2 alpha m t_s) for m = 0..M-1."""
    t = np.arange(n_samples) * t_sample
    return float(np.sum((offset + t) ** 2 * np.exp(2.0 * alpha * t)))


def _basis(a, d, t, lever, atten):
    return atten * np.exp(a * t) * np.exp(1j * d * (lever + t))


def _scales(p, rate_floor):
    return np.array([abs(p[0]), max(abs(p[1]), rate_floor), max(abs(p[2]), abs(p[1]), rate_floor)])


def lm_fit(re, im, t_sample, lever, atten, c0, a0, d0, xtol=1e-10, maxiter=500):
    """Levenberg-Marquardt fit of ``c*atten*exp(a t + i d (lever + t))``.

    Steps are judged against (|c|, |a|, max(|d|, |a|)) so a zero frequency
    still converges. Returns ``(c, a, d, cost, iterations, converged)``.
    """
    x = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
    t = np.arange(x.size) * t_sample
    rate_floor = 1.0 / (t[-1] + lever)
    p = np.array([c0, a0, d0], dtype=float)
    g = _basis(p[1], p[2], t, lever, atten)
    f = p[0] * g
    r = x - f
    cost = float(np.sum(r.real**2 + r.imag**2))
    lam = 1e-3
    converged = False
    it = 0
    while it < maxiter:
        it += 1
        jac = np.stack([g, t * f, 1j * (lever + t) * f], axis=1)
        jtj = (jac.conj().T @ jac).real
        grad = (jac.conj().T @ r).real
        diag = np.maximum(np.diag(jtj), 1e-300)
        accepted = False
        while True:
            step = np.linalg.solve(jtj + lam * np.diag(diag), grad)
            trial = p + step
            g_new = _basis(trial[1], trial[2], t, lever, atten)
            f_new = trial[0] * g_new
            r_new = x - f_new
            cost_new = float(np.sum(r_new.real**2 + r_new.imag**2))
            if cost_new <= cost:
                accepted = True
                break
            lam *= 4.0
            if lam > 1e16:
                break
        if not accepted:
            # stalled: only a floating-point floor if the undamped step is negligible
            gn = np.linalg.solve(jtj, grad)
            converged = bool(np.all(np.abs(gn) <= 1e-7 * _scales(p, rate_floor)))
            break
        small = np.all(np.abs(step) <= xtol * _scales(trial, rate_floor))
        p, g, f, r, cost = trial, g_new, f_new, r_new, cost_new
        lam = max(lam / 3.0, 1e-12)
        if small or cost == 0.0:
            converged = True
            break
    return float(p[0]), float(p[1]), float(p[2]), cost, it, converged
