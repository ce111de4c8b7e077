"""Mode-ball matrices and Hermitian Lanczos helpers (shared internals)."""

import numpy as np
import scipy.linalg

from .fields import TorusField, grid_info


def mode_ball(dim: int, K: int):
    """Integer lattice points with |k| <= K, in deterministic lexicographic order."""
    r = np.arange(-K, K + 1)
    grids = np.meshgrid(*([r] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    pts = pts[np.sum(pts * pts, axis=1) <= K * K]
    order = np.lexsort(tuple(pts[:, i] for i in range(dim - 1, -1, -1)))
    return pts[order]


def field_to_ball(f: TorusField, modes: np.ndarray) -> np.ndarray:
    idx = tuple(modes[:, i] % f.M for i in range(f.dim))
    return f.coeffs[idx]


def ball_to_field(v: np.ndarray, modes: np.ndarray, dim: int, M: int, real=False) -> TorusField:
    c = np.zeros((M,) * dim, dtype=np.complex128)
    idx = tuple(modes[:, i] % M for i in range(dim))
    c[idx] = v
    return TorusField(c, real=real)


def ball_content_fraction(f: TorusField, K: float) -> float:
    """L^2 mass fraction of f outside the ball |k| <= K."""
    ksq = grid_info(f.dim, f.M)["ksq"]
    total = np.sum(np.abs(f.coeffs) ** 2)
    if total == 0:
        return 0.0
    out = np.sum(np.abs(f.coeffs[ksq > K * K]) ** 2)
    return float(out / total)


def potential_matrix(xi: TorusField, modes: np.ndarray, extra_diag: np.ndarray,
                     chunk: int = 256) -> np.ndarray:
    """Hermitian matrix of multiplication by the real field xi on the mode
    ball, plus a real diagonal: A[a,b] = xi_hat(a-b) + diag(a) delta_ab."""
    n = len(modes)
    M = xi.M
    A = np.empty((n, n), dtype=np.complex128)
    coeffs = xi.coeffs
    for start in range(0, n, chunk):
        block = modes[start:start + chunk]  # (b, d)
        diff = block[:, None, :] - modes[None, :, :]
        idx = tuple(diff[..., i] % M for i in range(modes.shape[1]))
        A[start:start + chunk, :] = coeffs[idx]
    A[np.arange(n), np.arange(n)] += extra_diag
    return A


def lanczos_extremal_max(matvec, n: int, m: int = 80, seed: int = 12345) -> float:
    """Largest eigenvalue of a Hermitian operator by Lanczos with full
    reorthogonalization (deterministic start vector)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V = np.zeros((min(m, n), n), dtype=np.complex128)
    alphas, betas = [], []
    V[0] = v
    w = matvec(v)
    a = np.real(np.vdot(v, w))
    alphas.append(a)
    w = w - a * v
    for j in range(1, min(m, n)):
        b = np.linalg.norm(w)
        if b < 1e-13:
            break
        betas.append(b)
        v = w / b
        # full reorthogonalization: v -= sum_i <V_i, v> V_i
        v = v - V[:j].T @ (V[:j].conj() @ v)
        v /= np.linalg.norm(v)
        V[j] = v
        w = matvec(v)
        a = np.real(np.vdot(v, w))
        alphas.append(a)
        w = w - a * v - betas[-1] * V[j - 1]
    T = np.diag(alphas) + np.diag(betas, 1) + np.diag(betas, -1)
    return float(np.max(scipy.linalg.eigvalsh(T)))


def lanczos_expm(matvec, v: np.ndarray, t: float, max_dim: int = 60,
                 tol: float = 1e-11, max_substeps: int = 4096) -> np.ndarray:
    """exp(-i t A) v for Hermitian A, by substepped Lanczos projection.

    Each substep builds an orthonormal Krylov basis (full reorthogonalization)
    and exponentiates the tridiagonal projection; substeps are doubled until
    the a-posteriori estimate (last-basis-coefficient magnitude) meets tol.
    """
    if t == 0 or np.linalg.norm(v) == 0:
        return v.copy()
    n = len(v)
    substeps = 1
    while substeps <= max_substeps:
        dt = t / substeps
        u = v.copy()
        ok = True
        for _ in range(substeps):
            u, converged = _lanczos_step(matvec, u, dt, min(max_dim, n), tol)
            if not converged:
                ok = False
                break
        if ok:
            return u
        substeps *= 2
    raise RuntimeError("lanczos_expm failed to converge; decrease the time step")


def _lanczos_step(matvec, v, dt, m, tol):
    beta0 = np.linalg.norm(v)
    V = np.zeros((m, len(v)), dtype=np.complex128)
    V[0] = v / beta0
    alphas = np.zeros(m)
    betas = np.zeros(max(m - 1, 0))
    w = matvec(V[0])
    alphas[0] = np.real(np.vdot(V[0], w))
    w = w - alphas[0] * V[0]
    k = 1
    breakdown = False
    for j in range(1, m):
        b = np.linalg.norm(w)
        if b < 1e-13 * beta0:
            breakdown = True
            break
        betas[j - 1] = b
        vj = w / b
        vj = vj - V[:j].T @ (V[:j].conj() @ vj)
        nv = np.linalg.norm(vj)
        if nv < 1e-13:
            breakdown = True
            break
        vj /= nv
        V[j] = vj
        w = matvec(vj)
        alphas[j] = np.real(np.vdot(vj, w))
        w = w - alphas[j] * vj - betas[j - 1] * V[j - 1]
        k = j + 1
    T = np.diag(alphas[:k]) + np.diag(betas[: k - 1], 1) + np.diag(betas[: k - 1], -1)
    lam, S = scipy.linalg.eigh(T)
    e1 = S.conj().T[:, 0]
    y = S @ (np.exp(-1j * dt * lam) * e1)
    err = abs(y[-1]) if k == m else 0.0
    converged = breakdown or err < tol
    return beta0 * (V[:k].T @ y), converged
