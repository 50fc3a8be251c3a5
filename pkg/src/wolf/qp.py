"""Dense QP solver for the whole-body cascade.

    minimize    0.5 x^T H x + g^T x
    subject to  C x <= d,  E x = f

H only needs to be positive semidefinite: a +eps*I Tikhonov term makes
the problem strictly convex. Equalities are eliminated through a
rank-revealing QR (inconsistent rows -> infeasible), then the reduced
problem is solved with a Goldfarb-Idnani dual active set: start at the
unconstrained optimum and add violated constraints with dual-feasible
steps. Deterministic for fixed inputs; no randomization anywhere.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

_RANK_TOL = 1e-11
_FEAS_TOL = 1e-9
_STEP_TOL = 1e-12


@dataclass
class QPResult:
    x: np.ndarray | None
    status: str                 # "optimal" | "infeasible"
    kkt_residual: float = np.inf
    iterations: int = 0
    active: list = field(default_factory=list)

    @property
    def ok(self):
        return self.status == "optimal"


def _reduce_equalities(E, f, n):
    """x = x0 + Z y parameterization of {x : E x = f}.

    Returns (x0, Z) or None when the rows are inconsistent. Z has shape
    (n, n - rank) and orthonormal columns.
    """
    Q, R, perm = sla.qr(E.T, pivoting=True)
    diag = np.abs(np.diag(R)) if R.size else np.zeros(0)
    scale = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > _RANK_TOL * max(1.0, scale)))
    f_perm = f[perm]
    if rank == 0:
        if f.size and np.max(np.abs(f)) > _FEAS_TOL:
            return None
        return np.zeros(n), np.eye(n)
    y1 = sla.solve_triangular(R[:rank, :rank].T, f_perm[:rank], lower=True)
    if rank < len(f_perm):
        # dropped rows must be implied by the kept ones
        resid = R[:rank, rank:].T @ y1 - f_perm[rank:]
        if np.max(np.abs(resid)) > _FEAS_TOL * max(1.0, np.max(np.abs(f))):
            return None
    x0 = Q[:, :rank] @ y1
    Z = Q[:, rank:]
    return x0, Z


def solve_qp(H, g, C=None, d=None, E=None, f=None, eps=1e-8, max_iter=200):
    """Solve the QP; see module docstring for the exact problem form."""
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    H_reg = 0.5 * (H + H.T) + eps * np.eye(n)

    if E is not None and len(E):
        red = _reduce_equalities(np.asarray(E, dtype=float),
                                 np.asarray(f, dtype=float), n)
        if red is None:
            return QPResult(None, "infeasible")
        x0, Z = red
    else:
        x0, Z = np.zeros(n), None

    if Z is not None and Z.shape[1] == 0:
        # equalities pin x completely
        x = x0
        if C is not None and len(C) and np.max(C @ x - d) > _FEAS_TOL:
            return QPResult(None, "infeasible")
        res = QPResult(x, "optimal", iterations=0)
        res.kkt_residual = _kkt_residual(H_reg, g, C, d, E, f, x, Z, np.zeros(0), [])
        return res

    if Z is None:
        Hr = H_reg
        gr = g
        Cr = np.asarray(C, dtype=float) if C is not None and len(C) else None
        dr = np.asarray(d, dtype=float) if Cr is not None else None
    else:
        HZ = H_reg @ Z
        Hr = Z.T @ HZ
        gr = Z.T @ (g + H_reg @ x0)
        if C is not None and len(C):
            Cr = C @ Z
            dr = d - C @ x0
        else:
            Cr = dr = None

    cho = sla.cho_factor(Hr, lower=True, check_finite=False)
    y = sla.cho_solve(cho, -gr, check_finite=False)

    active: list[int] = []
    u = np.zeros(0)
    iters = 0
    if Cr is not None:
        # Goldfarb-Idnani dual active set on n^T y >= b form; rows are
        # normalized so mixed-scale constraints keep S well conditioned
        scale = np.linalg.norm(Cr, axis=1)
        scale[scale < 1e-14] = 1.0
        Nmat = -Cr / scale[:, None]
        b = -dr / scale
        while True:
            s = Nmat @ y - b
            s_masked = s.copy()
            if active:
                s_masked[active] = 0.0
            p = int(np.argmin(s_masked))
            if s_masked[p] >= -_FEAS_TOL:
                break
            n_p = Nmat[p]
            u_p = 0.0
            while True:
                iters += 1
                if iters > max_iter:
                    return QPResult(None, "infeasible", iterations=iters)
                Hn = sla.cho_solve(cho, n_p, check_finite=False)
                if active:
                    N = Nmat[active].T
                    B = sla.cho_solve(cho, N, check_finite=False)
                    S = N.T @ B
                    rhs = B.T @ n_p
                    try:
                        r = np.linalg.solve(S, rhs)
                    except np.linalg.LinAlgError:
                        r = np.linalg.lstsq(S, rhs, rcond=None)[0]
                    z = Hn - B @ r
                else:
                    r = np.zeros(0)
                    z = Hn
                # partial step: first active dual driven to zero
                t1 = np.inf
                j_block = -1
                for idx, _ in enumerate(active):
                    if r[idx] > _STEP_TOL:
                        cand = u[idx] / r[idx]
                        if cand < t1 - 1e-15:
                            t1, j_block = cand, idx
                denom = float(n_p @ z)
                primal_motion = denom > _STEP_TOL
                s_p = float(n_p @ y - b[p])
                t2 = (-s_p / denom) if primal_motion else np.inf
                t = min(t1, t2)
                if not np.isfinite(t):
                    return QPResult(None, "infeasible", iterations=iters)
                if primal_motion:
                    y = y + t * z
                if active:
                    u = u - t * r
                u_p += t
                if t == t2:
                    active.append(p)
                    u = np.append(u, u_p)
                    break
                # blocked: drop j_block, keep working on p
                del active[j_block]
                u = np.delete(u, j_block)

    x = x0 + (Z @ y if Z is not None else y)
    res = QPResult(x, "optimal", iterations=iters, active=sorted(active))
    if len(active):
        u = u / scale[active]      # duals back in original row scaling
    res.kkt_residual = _kkt_residual(H_reg, g, C, d, E, f, x, Z, u, active)
    return res


def _kkt_residual(H_reg, g, C, d, E, f, x, Z, u, active):
    """Projected stationarity plus feasibility violations (inf norm)."""
    grad = H_reg @ x + g
    if C is not None and len(C) and len(active):
        grad = grad + C[active].T @ u
    stat = grad if Z is None else Z.T @ grad
    r = float(np.max(np.abs(stat))) if stat.size else 0.0
    if E is not None and len(E):
        r = max(r, float(np.max(np.abs(E @ x - f))))
    if C is not None and len(C):
        r = max(r, float(max(0.0, np.max(C @ x - d))))
    return r
