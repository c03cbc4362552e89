"""Pure numpy versions of the compiled kernels (same signatures)."""
import numpy as np
from scipy import special


def integrate_chunk(u, u0, indptr, indices, data, kappa, drift, sigma, sigma0, gamma, dt,
                    xi, xi0, clamp_u0, stride, phase, patterns, out_index, out_u0, out_overlap):
    N = u.shape[0]
    n = u0
    n_rec = 0
    sdt = sigma * np.sqrt(dt)
    s0dt = np.sqrt(2.0 * gamma * dt)
    # row sums over the sparse pattern: one gather plus reduceat
    has = np.diff(indptr) > 0
    starts = indptr[:-1][has]
    for k in range(xi.shape[0]):
        g = special.erf(u)
        acc = np.zeros(N)
        if data.size:
            acc[has] = np.add.reduceat(data * g[indices], starts)
        u += dt * (-kappa * u + acc + sigma0 * n + drift) + sdt * xi[k]
        if not clamp_u0:
            n = n - dt * gamma * n + s0dt * xi0[k]
        bad = ~np.isfinite(u)
        if bad.any():
            return n, n_rec, int(np.argmax(bad))
        if stride > 0 and (phase + k + 1) % stride == 0:
            out_index[n_rec] = u.sum() / N
            out_u0[n_rec] = n
            if patterns.shape[0]:
                out_overlap[n_rec] = patterns @ special.erf(u) / N
            n_rec += 1
    return n, n_rec, -1


def gaussian_mixture_pdf(x, means, variances, weights):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.size)
    norm = weights / np.sqrt(2.0 * np.pi * variances)
    # chunk over components to bound memory
    for lo in range(0, means.size, 256):
        sl = slice(lo, lo + 256)
        d = x[:, None] - means[None, sl]
        out += np.exp(-0.5 * d * d / variances[None, sl]) @ norm[sl]
    return out


def _normal_mass(a, b):
    """``Phi(a) - Phi(b)`` for ``a >= b`` without cancellation in either tail."""
    r2 = np.sqrt(2.0)
    return np.where(b > 0.0, 0.5 * (special.erfc(b / r2) - special.erfc(a / r2)),
                    0.5 * (special.erfc(-a / r2) - special.erfc(-b / r2)))


def smeared_mixture_pdf(x, lo, hi, variances, weights):
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.size)
    sd = np.sqrt(variances)
    width = hi - lo
    thin = width < 1e-6 * sd
    safe = np.where(thin, 1.0, width)
    for a in range(0, lo.size, 256):
        sl = slice(a, a + 256)
        d = x[:, None] - 0.5 * (lo[None, sl] + hi[None, sl])
        point = np.exp(-0.5 * d * d / variances[None, sl]) / (sd[None, sl] * np.sqrt(2.0 * np.pi))
        mass = _normal_mass((x[:, None] - lo[None, sl]) / sd[None, sl],
                            (x[:, None] - hi[None, sl]) / sd[None, sl]) / safe[None, sl]
        out += np.where(thin[None, sl], point, mass) @ weights[sl]
    return out
