import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_symmetric(rng, n, scale=1.0):
    m = rng.normal(size=(n, n))
    return scale * 0.5 * (m + m.T)


def random_certified_sigma_u(rng, a, beta):
    """Random PSD Sigma_u large enough that beta*A + 2*Sigma_u >= 0."""
    n = a.shape[0]
    w = rng.normal(size=(n, n))
    base = w @ w.T
    lam_min = float(np.linalg.eigvalsh(beta * a).min())
    shift = max(0.0, -0.5 * lam_min) + 0.01 * max(1.0, np.abs(a).max())
    return base + shift * np.eye(n)


def brute_force_min(m, rng, samples=10_000, ritz=None, refine=400):
    """Brute-force minimization of the normalized form z'Mz over directions.

    Random unit directions, exact minimization of the Rayleigh quotient over
    random [x; t*y] two-planes, and a local random-direction refinement of
    the best candidate.  Independent of the analytic certification route.
    """
    n2 = m.shape[0]
    n = n2 // 2
    z = rng.normal(size=(samples, n2))
    z /= np.linalg.norm(z, axis=1)[:, None]
    vals = np.einsum("ij,jk,ik->i", z, m, z)
    best = float(vals.min())
    best_z = z[int(np.argmin(vals))].copy()

    def rayleigh(zz):
        return float(zz @ m @ zz) / float(zz @ zz)

    if ritz is None:
        ritz = max(samples // 25, 100)
    for k in range(ritz):
        x = rng.normal(size=n)
        y = x.copy() if k % 2 else rng.normal(size=n)
        zx = np.concatenate([x, np.zeros(n)])
        zy = np.concatenate([np.zeros(n), y])
        a = zx @ m @ zx
        b = 2.0 * (zx @ m @ zy)
        c = zy @ m @ zy
        xx = float(x @ x)
        yy = float(y @ y)
        coeffs = [b * yy, 2.0 * (c * xx - a * yy), -b * xx]
        if abs(coeffs[0]) > 0:
            disc = coeffs[1] ** 2 - 4.0 * coeffs[0] * coeffs[2]
            roots = [(-coeffs[1] + s * np.sqrt(max(disc, 0.0))) / (2.0 * coeffs[0]) for s in (1, -1)]
        else:
            roots = [0.0] if abs(coeffs[1]) < 1e-300 else [-coeffs[2] / coeffs[1]]
        for t in roots + [0.0]:
            val = (a + b * t + c * t * t) / (xx + t * t * yy)
            if val < best:
                best = float(val)
                best_z = zx + t * zy
    # descent: exact minimization over span{current, q} with q alternating
    # between random directions and the quotient's own gradient direction
    cur = best_z / np.linalg.norm(best_z)
    cur_val = rayleigh(cur)
    for it in range(refine):
        if it % 2:
            q = rng.normal(size=n2)
        else:
            q = m @ cur - cur_val * cur
        q -= (cur @ q) * cur
        qn = np.linalg.norm(q)
        if qn < 1e-300:
            continue
        q /= qn
        a = cur_val
        b = 2.0 * (cur @ m @ q)
        c = q @ m @ q
        # minimize (a + b t + c t^2) / (1 + t^2); t -> inf is the pure q direction
        if c < cur_val:
            cur, cur_val = q, c
            continue
        if abs(b) < 1e-300:
            continue
        disc = (c - a) ** 2 + b * b
        roots = [((c - a) + s * np.sqrt(disc)) / b for s in (1, -1)]
        vals = [(a + b * t + c * t * t) / (1.0 + t * t) for t in roots]
        k = int(np.argmin(vals))
        t_best, v_best = roots[k], vals[k]
        if v_best < cur_val:
            cur = (cur + t_best * q) / np.sqrt(1.0 + t_best * t_best)
            cur_val = v_best
    return min(best, cur_val)
