"""Pure numpy boundary-element kernels (fallback for the compiled module).

See :func:`integrate_elements` for the contract shared with ``_kernels.pyx``.
"""
import numpy as np

_TWO_PI = 2.0 * np.pi
_CHUNK = 24


def _kernels(r1, r2, n1, n2, nkind):
    """Fundamental solution and its normal derivative, differentiated in the
    source point; returns two lists of ``nkind`` arrays (00, x, y, xx, xy, yy)."""
    rr = r1 * r1 + r2 * r2
    q = r1 * n1 + r2 * n2
    inv2 = 1.0 / rr
    us = [0.5 * np.log(rr) / _TWO_PI]
    un = [q * inv2 / _TWO_PI]
    if nkind > 1:
        inv4 = inv2 * inv2
        inv6 = inv4 * inv2
        us += [
            -r1 * inv2 / _TWO_PI,
            -r2 * inv2 / _TWO_PI,
            (r2 * r2 - r1 * r1) * inv4 / _TWO_PI,
            -2.0 * r1 * r2 * inv4 / _TWO_PI,
            (r1 * r1 - r2 * r2) * inv4 / _TWO_PI,
        ]
        un += [
            (-n1 * inv2 + 2.0 * q * r1 * inv4) / _TWO_PI,
            (-n2 * inv2 + 2.0 * q * r2 * inv4) / _TWO_PI,
            (-4.0 * n1 * r1 * inv4 - 2.0 * q * inv4 + 8.0 * q * r1 * r1 * inv6) / _TWO_PI,
            (-2.0 * (n1 * r2 + n2 * r1) * inv4 + 8.0 * q * r1 * r2 * inv6) / _TWO_PI,
            (-4.0 * n2 * r2 * inv4 - 2.0 * q * inv4 + 8.0 * q * r2 * r2 * inv6) / _TWO_PI,
        ]
    return us, un


def _segment_distance(p, a, b):
    d = b - a
    t = np.clip(((p[:, None, :] - a) * d).sum(-1) / (d * d).sum(-1), 0.0, 1.0)
    proj = a + t[..., None] * d
    return np.sqrt(((p[:, None, :] - proj) ** 2).sum(-1))


def integrate_elements(points, starts, ends, normals, lengths, skip, nkind, near_factor,
                       rules, uhat, qhat):
    """Integrate kernels over straight elements for every collocation point.

    Parameters
    ----------
    points : (P, 2) collocation (source) points.
    starts, ends, normals : (N, 2) element geometry; lengths : (N,).
    skip : (P,) element index to leave out per point (its own element), or -1.
    nkind : 1 (value only) or 6 (value plus first and second derivatives).
    near_factor : elements closer than ``near_factor * length`` use the fine rule.
    rules : ((x, w), (x, w)) coarse and fine Gauss-Legendre rules on [-1, 1].
    uhat, qhat : per rule, (N, Q, M) particular solutions and their normal
        derivatives at the rule's quadrature points; ``M = 0`` disables the
        domain term.

    Returns
    -------
    G, H : (P, N, nkind) element integrals of ``u*`` and ``u_n*`` kernels.
    A : (P, M, nkind) integrals of ``u* q_j - u_n* u_j`` over the boundary.
    """
    P, N = len(points), len(starts)
    M = uhat[0].shape[2]
    G = np.zeros((P, N, nkind))
    H = np.zeros((P, N, nkind))
    A = np.zeros((P, M, nkind))
    n1, n2 = normals[:, 0][:, None], normals[:, 1][:, None]
    for c0 in range(0, P, _CHUNK):
        pts = points[c0:c0 + _CHUNK]
        pc = len(pts)
        dist = _segment_distance(pts, starts, ends)
        near = dist < near_factor * lengths[None, :]
        own = np.zeros((pc, N), dtype=bool)
        rows = np.flatnonzero(skip[c0:c0 + _CHUNK] >= 0)
        own[rows, skip[c0:c0 + _CHUNK][rows]] = True
        for ir, (xg, wg) in enumerate(rules):
            use = (near if ir == 1 else ~near) & ~own
            if not use.any():
                continue
            ys = 0.5 * (starts + ends)[:, None, :] + 0.5 * xg[None, :, None] * (ends - starts)[:, None, :]
            r1 = ys[None, :, :, 0] - pts[:, None, None, 0]
            r2 = ys[None, :, :, 1] - pts[:, None, None, 1]
            # park excluded pairs away from the singularity; their weight is zero
            r1 = np.where(use[..., None], r1, 1.0)
            r2 = np.where(use[..., None], r2, 0.0)
            w = (0.5 * lengths)[None, :, None] * wg[None, None, :] * use[..., None]
            us, un = _kernels(r1, r2, n1[None], n2[None], nkind)
            Q = len(xg)
            for k in range(nkind):
                ku = us[k] * w
                kn = un[k] * w
                G[c0:c0 + pc, :, k] += ku.sum(-1)
                H[c0:c0 + pc, :, k] += kn.sum(-1)
                if M:
                    A[c0:c0 + pc, :, k] += (ku.reshape(pc, N * Q) @ qhat[ir].reshape(N * Q, M)
                                            - kn.reshape(pc, N * Q) @ uhat[ir].reshape(N * Q, M))
    return G, H, A
