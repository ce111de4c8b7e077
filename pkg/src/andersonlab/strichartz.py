"""Empirical space-time integrability measurements and frequency scaling.

For Gaussian data localized to the dyadic shell N/2 < |k| <= N and
normalized in the stated data space, the space-time norm of the evolved flow
is measured over an ensemble of data seeds and its median fitted against N
on log-log axes.  For the free group the expected slopes are

    full interval [0, 1]:   d/2 - (d+2)/p
    short interval [0,1/N]: d/2 - (d+2)/p - 1/p

while the conjugated noisy groups are expected to scale like the free one
with data measured one derivative (2d) or half a derivative more (3d) up --
data normalized in H^{1-4/r} (2d, r >= 4) resp. H^{2-5/p} (3d, p >= 10/3)
should give a flat slope up to the tolerance recorded in the report.

Each report embeds its full configuration; ensembles vary the data seed at a
fixed noise realization (constants are noise-dependent; the scaling claim is
per-realization).
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import fields as fl
from .fields import TorusField
from .propagator import SharpFlow, free_propagate


@dataclass
class ScalingReport:
    generator: str
    d: int
    p: float
    sigma: float
    N_list: list
    norms: dict                 # N -> list of per-seed space-time norms
    medians: list
    slope: float
    stderr: float
    theory_slope: float
    tol: float
    passed: bool
    config: dict = dc_field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "generator": self.generator, "d": self.d, "p": self.p, "sigma": self.sigma,
            "N_list": list(self.N_list), "medians": list(self.medians),
            "slope": self.slope, "stderr": self.stderr,
            "theory_slope": self.theory_slope, "tol": self.tol, "pass": bool(self.passed),
            "config": dict(self.config),
        }

    def rows(self):
        for N in self.N_list:
            for seed, val in enumerate(self.norms[N]):
                yield {"generator": self.generator, "d": self.d, "p": self.p,
                       "sigma": self.sigma, "N": N, "seed": seed, "norm": val,
                       "data_norm": 1.0}


def spacetime_norm(flow, p: float, q, interval, n_t: int = 128) -> float:
    """(int ||u(t)||_{L^q}^p dt)^{1/p} by the trapezoid rule on n_t panels."""
    if n_t < 32:
        raise ValueError("need at least 32 time samples")
    a, b = interval
    ts = np.linspace(a, b, n_t + 1)
    vals = np.array([fl.lp_norm(flow(t), q) ** p for t in ts])
    integral = np.trapezoid(vals, ts) if hasattr(np, "trapezoid") else np.trapz(vals, ts)
    return float(integral ** (1.0 / p))


def spacetime_sobolev_norm(flow, p: float, sigma: float, q, interval, n_t: int = 128) -> float:
    """Same with the W^{sigma,q} spatial norm."""
    if n_t < 32:
        raise ValueError("need at least 32 time samples")
    a, b = interval
    ts = np.linspace(a, b, n_t + 1)
    vals = np.array([fl.sobolev_lp_norm(flow(t), sigma, q) ** p for t in ts])
    integral = np.trapezoid(vals, ts) if hasattr(np, "trapezoid") else np.trapz(vals, ts)
    return float(integral ** (1.0 / p))


def shell_data(dim: int, M: int, N: float, seed: int, norm: str = "l2",
               s: float = 0.0) -> TorusField:
    """Gaussian coefficients on the shell N/2 < |k| <= N, unit-normalized.

    norm: 'l2' or 'hs' (Sobolev index s).
    """
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((M,) * dim) + 1j * rng.standard_normal((M,) * dim)
    f = fl.band_pass(TorusField(c), N / 2.0, N)
    scale = fl.l2_norm(f) if norm == "l2" else fl.sobolev_norm(f, s)
    if scale == 0:
        raise ValueError("empty shell")
    return (1.0 / scale) * f


def _fit_slope(N_list, medians):
    x = np.log(np.asarray(N_list, dtype=float))
    y = np.log(np.asarray(medians, dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    sx = np.sum((x - x.mean()) ** 2)
    stderr = float(np.sqrt(np.sum(resid**2) / dof / sx))
    return float(coef[0]), stderr


def _validate_pair(d: int, p: float):
    if d == 2 and p < 4.0 - 1e-12:
        raise ValueError("d = 2 requires p >= 4")
    if d == 3 and p < 10.0 / 3.0 - 1e-12:
        raise ValueError("d = 3 requires p >= 10/3")
    if d not in (2, 3):
        raise ValueError("d must be 2 or 3")


def flat_ball_data(dim: int, M: int, N: float) -> TorusField:
    """Unit-L^2 data with equal coefficients on the ball |k| <= N.

    Maximal constructive interference: the deterministic profile that
    saturates the supercritical rates; Gaussian data is 'spread out' and
    measures a flat slope for p above the critical pair exponent.
    """
    ksq = fl.grid_info(dim, M)["ksq"]
    f = TorusField((ksq <= N * N).astype(np.complex128))
    return (1.0 / fl.l2_norm(f)) * f


def laplacian_scaling(d: int, p: float, N_list, seeds, M: int, n_t: int = 128,
                      tol: float = 0.2, interval=(0.0, 1.0),
                      data: str = "gaussian-shell") -> ScalingReport:
    """Free-group scaling on the unit interval, data unit-L^2.

    data: 'gaussian-shell' (default; the right ensemble at the critical pair
    exponent) or 'flat-ball' (interference extremizers; required to see the
    sharp rate for p above critical, where random data cannot saturate it).
    """
    _validate_pair(d, p)
    norms = {}
    for N in N_list:
        vals = []
        for seed in seeds:
            if data == "gaussian-shell":
                u0 = shell_data(d, M, N, seed)
            elif data == "flat-ball":
                u0 = flat_ball_data(d, M, N)
            else:
                raise ValueError(f"unknown data profile {data!r}")
            vals.append(spacetime_norm(lambda t: free_propagate(u0, t), p, p, interval, n_t))
            if data == "flat-ball":
                break  # deterministic profile, one evaluation per N
        norms[N] = vals
    medians = [float(np.median(norms[N])) for N in N_list]
    slope, stderr = _fit_slope(N_list, medians)
    theory = d / 2.0 - (d + 2.0) / p
    return ScalingReport("free", d, p, 0.0, list(N_list), norms, medians, slope, stderr,
                         theory, tol, abs(slope - theory) <= tol,
                         config={"M": M, "n_t": n_t, "seeds": list(seeds),
                                 "interval": list(interval), "data": data})


def short_time_scaling(d: int, p: float, N_list, seeds, M: int, n_t: int = 128,
                       tol: float = 0.2) -> ScalingReport:
    """Free-group scaling on the frequency-matched interval [0, 1/N]."""
    _validate_pair(d, p)
    norms = {}
    for N in N_list:
        vals = []
        for seed in seeds:
            u0 = shell_data(d, M, N, seed)
            vals.append(spacetime_norm(lambda t: free_propagate(u0, t), p, p,
                                       (0.0, 1.0 / N), n_t))
        norms[N] = vals
    medians = [float(np.median(norms[N])) for N in N_list]
    slope, stderr = _fit_slope(N_list, medians)
    theory = d / 2.0 - (d + 2.0) / p - 1.0 / p
    return ScalingReport("free-short", d, p, 0.0, list(N_list), norms, medians, slope,
                         stderr, theory, tol, abs(slope - theory) <= tol,
                         config={"M": M, "n_t": n_t, "seeds": list(seeds)})


def anderson_scaling_2d(r: float, N_list, seeds, op, sigma: float = 0.0,
                        n_t: int = 128, tol: float = 0.25) -> ScalingReport:
    """Conjugated-group scaling, data normalized in H^{sigma + 1 - 4/r}."""
    if r < 4.0 - 1e-12:
        raise ValueError("r >= 4 required")
    s_data = sigma + 1.0 - 4.0 / r
    norms = {}
    for N in N_list:
        vals = []
        for seed in seeds:
            u0 = shell_data(2, op.M, N, seed, norm="hs", s=s_data)
            flow = SharpFlow(u0, op)
            vals.append(spacetime_sobolev_norm(flow.state, r, sigma, r, (0.0, 1.0), n_t))
        norms[N] = vals
    medians = [float(np.median(norms[N])) for N in N_list]
    slope, stderr = _fit_slope(N_list, medians)
    return ScalingReport("anderson2d", 2, r, sigma, list(N_list), norms, medians, slope,
                         stderr, 0.0, tol, slope <= tol,
                         config={"M": op.M, "n_t": n_t, "seeds": list(seeds),
                                 "s_data": s_data, "operator": op.manifest()})


def anderson_scaling_3d(p: float, N_list, seeds, op, sigma: float = 0.0,
                        n_t: int = 48, tol: float = 0.35,
                        data_norm_index: float = None) -> ScalingReport:
    """3d conjugated-group scaling, data normalized in H^{sigma + 2 - 5/p}.

    Passing data_norm_index overrides the data space (used by the
    half-derivative-loss contrast run, which normalizes at the free-group
    rate H^{3/2 - 5/p} and should then see a slope near +1/2).
    """
    if p < 10.0 / 3.0 - 1e-12:
        raise ValueError("p >= 10/3 required")
    s_data = sigma + 2.0 - 5.0 / p if data_norm_index is None else data_norm_index
    norms = {}
    for N in N_list:
        vals = []
        for seed in seeds:
            u0 = shell_data(3, op.M, N, seed, norm="hs", s=s_data)
            flow = SharpFlow(u0, op)
            vals.append(spacetime_sobolev_norm(flow.state, p, sigma, p, (0.0, 1.0), n_t))
        norms[N] = vals
    medians = [float(np.median(norms[N])) for N in N_list]
    slope, stderr = _fit_slope(N_list, medians)
    theory = 0.0 if data_norm_index is None else 0.5
    return ScalingReport("anderson3d", 3, p, sigma, list(N_list), norms, medians, slope,
                         stderr, theory, tol, abs(slope - theory) <= tol,
                         config={"M": op.M, "n_t": n_t, "seeds": list(seeds),
                                 "s_data": s_data, "operator": op.manifest()})


def inhomogeneous_ratio_2d(r: float, N: float, seeds, op, sigma: float = 0.0,
                           n_t: int = 64, quad_steps: int = 32) -> list:
    """Forced-flow check: ratio of the space-time norm of
    int_0^t e^{-i(t-s)Hs} f(s) ds against the time-integrated data norm."""
    import numpy.polynomial.legendre as leg

    w_eig, U = op.eigensystem()
    delta = sigma + 1.0 - 4.0 / r
    nodes4, weights4 = np.polynomial.legendre.leggauss(4)
    ratios = []
    for seed in seeds:
        f0 = shell_data(2, op.M, N, seed, norm="hs", s=delta + 0.05)
        from ._linalg import field_to_ball, ball_to_field

        v0 = U.conj().T @ field_to_ball(op.from_remainder(f0), op.modes)

        def forcing_vec(s):
            return np.cos(2.0 * np.pi * s) * v0

        h = 1.0 / quad_steps
        integral = np.zeros_like(v0)
        ts, vals = [0.0], [0.0]
        for j in range(quad_steps):
            integral = np.exp(-1j * h * w_eig) * integral
            local = np.zeros_like(v0)
            for x, wq in zip(nodes4, weights4):
                tau = 0.5 * h * (x + 1.0)
                local += (0.5 * h * wq) * (np.exp(-1j * (h - tau) * w_eig)
                                           * forcing_vec(j * h + tau))
            integral += local
            us = op.to_remainder(ball_to_field(U @ integral, op.modes, 2, op.M))
            ts.append((j + 1) * h)
            vals.append(fl.sobolev_lp_norm(us, sigma, r) ** r)
        vals = np.asarray(vals)
        st_norm = (np.sum(0.5 * (vals[1:] + vals[:-1]) * h)) ** (1.0 / r)
        data_integral = np.sum([abs(np.cos(2.0 * np.pi * (j + 0.5) * h)) * h
                                for j in range(quad_steps)]) * fl.sobolev_norm(f0, delta + 0.05)
        ratios.append(float(st_norm / data_integral))
    return ratios
