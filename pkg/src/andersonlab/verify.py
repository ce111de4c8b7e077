"""Self-contained invariant suite behind the `verify` command.

Each check is a named callable returning (passed, measured-detail); the suite
is deterministic (fixed seeds, fixed order) so consecutive runs produce
byte-identical reports.  The quick profile covers the degenerate
(zero-noise) identities and core algebra; the standard profile adds the
sampling statistics, renormalization enumerations, operator identities and
propagator laws at small desk scales.
"""

import numpy as np

from . import anderson2d as a2
from . import anderson3d as a3
from . import fields as fl
from . import nls
from . import noise as ns
from . import propagator as pr
from .fields import TorusField


def _random_field(dim, M, seed, band):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((M,) * dim) + 1j * rng.standard_normal((M,) * dim)
    return fl.low_pass(TorusField(c), band)


def _probe(M, seed, band=8, s=2.0):
    f = _random_field(2, M, seed, band)
    return (1.0 / fl.sobolev_norm(f, s)) * f


# -- quick checks -----------------------------------------------------------


def check_transform_round_trip():
    f = _random_field(2, 64, 0, 31)
    err = np.max(np.abs(TorusField.from_values(f.values()).coeffs - f.coeffs))
    return err < 1e-12, f"round-trip max error {err:.3e}"


def check_projector_algebra():
    f = _random_field(2, 64, 1, 31)
    a = fl.l2_norm(fl.low_pass(f, 10) + fl.high_pass(f, 10) - f)
    b2 = fl.lp_block(f, 2)
    b = fl.l2_norm(fl.lp_block(b2, 2) - b2) + fl.l2_norm(fl.lp_block(b2, 3))
    c = fl.l2_norm(fl.low_pass(fl.low_pass(f, 20), 7) - fl.low_pass(f, 7))
    err = a + b + c
    return err < 1e-12, f"combined projector error {err:.3e}"


def check_block_partition():
    f = _random_field(2, 64, 2, 31)
    dec = fl.decomposition(2, 64)
    total = TorusField.zeros(2, 64)
    for j in range(-1, dec.J + 1):
        total = total + dec.block(f, j)
    err = fl.l2_norm(total - f) / fl.l2_norm(f)
    return err < 1e-12, f"partition relative error {err:.3e}"


def check_paraproduct_reconstruction():
    from .paraproducts import product_triple

    f, g = _random_field(2, 64, 3, 31), _random_field(2, 64, 4, 31)
    prod = fl.mult(f, g)
    err = fl.l2_norm(product_triple(f, g).total() - prod) / fl.l2_norm(prod)
    return err < 1e-10, f"reconstruction relative error {err:.3e}"


def check_bernstein_single_modes():
    worst = 0.0
    for k in ((1, 0), (3, 4), (-7, 2), (12, -5)):
        f = TorusField.single_mode(2, 64, k)
        grad = fl.gradient(f)
        ratio = np.sqrt(sum(fl.lp_norm(g, 2) ** 2 for g in grad))
        target = 2 * np.pi * np.linalg.norm(k)
        worst = max(worst, abs(ratio - target) / target)
    return worst < 1e-12, f"worst relative deviation {worst:.3e}"


def check_parseval():
    f = _random_field(2, 64, 5, 31)
    grid = np.sqrt(np.sum(np.abs(f.values()) ** 2) / 64**2)
    err = abs(fl.sobolev_norm(f, 0.0) - grid)
    return err < 1e-10, f"deviation {err:.3e}"


def check_serialization_round_trip(tmpdir="/tmp"):
    import os
    import tempfile

    f = TorusField.from_values(np.random.default_rng(6).standard_normal((16, 16, 16)), real=True)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "f.torf")
        fl.write_field(f, path)
        g = fl.read_field(path)
    err = np.max(np.abs(g.coeffs - f.coeffs))
    return err == 0.0, f"container max error {err:.3e}"


def check_zero_noise_degeneracies():
    op = a2.assemble_operator_2d(ns.zero_enhancement_2d(32), K=8)
    u = _probe(32, 7, band=4)
    e1 = fl.l2_norm(op.from_remainder(u) - u)
    e2 = fl.l2_norm(op.apply_hamiltonian(u) - (fl.laplacian(u) - op.shift * u))
    out = pr.anderson_propagate(u, 0.3, op)
    e3 = fl.l2_norm(out - np.exp(1j * 0.3 * op.shift) * pr.free_propagate(u, 0.3))
    lhs, rhs, _ = pr.duhamel_difference(u, 0.1, 0.0, op, quad_steps=8)
    e4 = fl.l2_norm(lhs) + fl.l2_norm(rhs)
    err = e1 + e2 + e3 + e4
    return err < 1e-9, f"combined degenerate-identity error {err:.3e}"


# -- standard checks --------------------------------------------------------


def check_sampling():
    a = ns.sample_white_noise(2, 32, seed=7)
    b = ns.sample_white_noise(2, 32, seed=7)
    det = np.array_equal(a.field.coeffs, b.field.coeffs)
    c = a.field.coeffs
    sym = np.conj(np.roll(np.flip(c, axis=(0, 1)), 1, axis=(0, 1)))
    herm = np.max(np.abs(c - sym))
    z3 = ns.sample_white_noise(3, 16, seed=1).field.coeffs[0, 0, 0]
    ok = det and herm < 1e-12 and z3 == 0.0
    return ok, f"deterministic {det}, hermitian deviation {herm:.3e}"


def check_renorm_enumerations():
    c2d = ns.renorm_constant_2d(1.0, ns.SHARP, 64)
    c3d = ns.renorm_c1_3d(1.0, ns.SHARP, 16)
    ok = abs(c2d - 3.0) < 1e-13 and abs(c3d - 6.0) < 1e-13
    return ok, f"2d sum {c2d!r}, 3d sum {c3d!r}"


def check_two_mode_closed_form():
    M, k = 64, (3, 1)
    f = TorusField.single_mode(2, M, k) + TorusField.single_mode(2, M, (-3, -1))
    enh = ns.enhance_2d(TorusField(f.coeffs, real=True), eps=0.125)
    g = 1.0 / (1.0 + 4 * np.pi**2 * 10.0)
    expected = g * (TorusField.single_mode(2, M, (6, 2)) + TorusField.single_mode(2, M, (-6, -2)))
    expected = expected + TorusField.constant(2, M, 2 * g - enh.c_eps)
    err = fl.l2_norm(enh.xi2 - expected)
    return err < 1e-10, f"two-mode pairing error {err:.3e}"


def check_operator_identity_2d():
    enh = ns.enhance_2d(ns.sample_white_noise(2, 64, seed=11), eps=0.25)
    op = a2.assemble_operator_2d(enh, K=16)
    us = _probe(64, 8, band=6)
    u = op.from_remainder(us)
    err = fl.l2_norm(op.apply_hamiltonian(us) - op.apply_regularized(u)) / fl.sobolev_norm(us, 2.0)
    inv = fl.sobolev_norm(op.to_remainder(u) - us, 0.9)
    ok = err < 1e-8 and inv < 1e-8
    return ok, f"assembly vs ball action {err:.3e}, inverse pair {inv:.3e}"


def check_unitarity_and_group_law():
    enh = ns.enhance_2d(ns.sample_white_noise(2, 64, seed=11), eps=0.25)
    op = a2.assemble_operator_2d(enh, K=16)
    u = op.from_remainder(_probe(64, 9, band=6))
    m0 = fl.l2_norm(u)
    u1 = pr.anderson_propagate(u, 1.0, op)
    drift = abs(fl.l2_norm(u1) - m0) / m0
    ab = pr.anderson_propagate(pr.anderson_propagate(u, 0.3, op), 0.2, op)
    g = fl.l2_norm(ab - pr.anderson_propagate(u, 0.5, op)) / m0
    e0 = op.energy_form(u, u)
    ed = abs(op.energy_form(u1, u1) - e0) / abs(e0)
    ok = drift <= 1e-10 and g <= 1e-9 and ed <= 1e-8
    return ok, f"mass drift {drift:.3e}, group law {g:.3e}, energy drift {ed:.3e}"


def check_duhamel_small():
    enh = ns.enhance_2d(ns.sample_white_noise(2, 64, seed=11), eps=0.25)
    op = a2.assemble_operator_2d(enh, K=16)
    us = _probe(64, 10, band=3)
    _, _, res = pr.duhamel_difference(us, 0.02, 0.0, op, quad_steps=24)
    return res <= 1e-6, f"relative residual {res:.3e}"


def check_strang_reversibility():
    enh = ns.enhance_2d(ns.sample_white_noise(2, 64, seed=11), eps=0.25)
    op = a2.assemble_operator_2d(enh, K=16)
    u0 = op.from_remainder(_probe(64, 12, band=6, s=1.0))
    st = nls.EvolutionState(t=0.0, u=u0)
    st = nls.split_step(st, 1e-2, op)
    st = nls.split_step(st, -1e-2, op)
    err = fl.l2_norm(st.u - u0) / fl.l2_norm(u0)
    return err <= 1e-10, f"forward-backward error {err:.3e}"


def check_operator_identity_3d():
    enh = ns.enhance_3d(ns.sample_white_noise(3, 16, seed=3), eps=0.5)
    op = a3.assemble_operator_3d(enh, K=4)
    rng = np.random.default_rng(13)
    us = fl.low_pass(TorusField(rng.standard_normal((16,) * 3)
                                + 1j * rng.standard_normal((16,) * 3)), 3)
    us = (1.0 / fl.sobolev_norm(us, 2.0)) * us
    a = op.apply_hamiltonian(us)
    b = op.apply_hamiltonian_regrouped(us)
    err = fl.l2_norm(a - b) / fl.l2_norm(a)
    rt = op.exp_roundtrip_error
    ok = err <= 1e-6 and rt <= 1e-8
    return ok, f"two-path error {err:.3e}, exponential round-trip {rt:.3e}"


QUICK_CHECKS = [
    ("transform-round-trip", check_transform_round_trip),
    ("projector-algebra", check_projector_algebra),
    ("block-partition", check_block_partition),
    ("paraproduct-reconstruction", check_paraproduct_reconstruction),
    ("bernstein-single-modes", check_bernstein_single_modes),
    ("parseval", check_parseval),
    ("field-container-round-trip", check_serialization_round_trip),
    ("zero-noise-degeneracies", check_zero_noise_degeneracies),
]

STANDARD_CHECKS = QUICK_CHECKS + [
    ("noise-sampling", check_sampling),
    ("renormalization-enumerations", check_renorm_enumerations),
    ("two-mode-closed-form", check_two_mode_closed_form),
    ("operator-identity-2d", check_operator_identity_2d),
    ("unitarity-group-law", check_unitarity_and_group_law),
    ("duhamel-identity", check_duhamel_small),
    ("strang-reversibility", check_strang_reversibility),
    ("operator-identity-3d", check_operator_identity_3d),
]


def run_suite(profile: str = "standard"):
    checks = QUICK_CHECKS if profile == "quick" else STANDARD_CHECKS
    results = []
    for name, fn in checks:
        try:
            passed, detail = fn()
        except Exception as exc:  # a crash is a failure with the message as detail
            passed, detail = False, f"exception: {exc}"
        results.append({"check": name, "pass": bool(passed), "detail": detail})
    return results
