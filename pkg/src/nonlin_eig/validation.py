"""Self-check suite behind `nonlin-eig validate`.

Each check is a named callable raising AssertionError on failure.  The
quick scale runs in well under two minutes; full adds the four-p inverse
power sweep on the full-size L-shape.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import eigensolvers, metrics
from .functional import SpdInstance, fenchel_conjugate_value
from .grid import build_domain, build_stencil, eval_initial_guess
from .newton import NewtonSettings
from .plaplace import PLaplaceInstance


def _desk_instance(p=3.0, n=21, shape="square", r_factor=2.5):
    domain = build_domain(shape, 2.0, 2.0 / (n - 1))
    stencil = build_stencil(domain, r_factor * domain.h, p)
    return PLaplaceInstance(domain, stencil, p)


def _random_fields(inst, count, seed=0):
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(count):
        u = rng.standard_normal((inst.domain.ny, inst.domain.nx))
        fields.append(np.where(inst.domain.interior_mask, u, 0.0))
    return fields


def check_euler_identity():
    for p in (1.5, 3.0):
        inst = _desk_instance(p=p)
        for u in _random_fields(inst, 20, seed=int(p * 10)):
            lhs = p * inst.energy_J(u)
            rhs = inst.pairing(inst.subgrad_J(u), u)
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs)), \
                f"Euler identity violated for p={p}: {lhs} vs {rhs}"


def check_norm_duality_link():
    for p in (1.5, 2.0, 3.0):
        inst = _desk_instance(p=p)
        for u in _random_fields(inst, 10, seed=7):
            lhs = inst.dual_norm_H(inst.duality_map_H(u))
            rhs = inst.norm_H(u) ** (p - 1.0)
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, rhs), \
                f"norm link violated for p={p}"


def check_duality_map_equality_case():
    inst = _desk_instance(p=3.0)
    for u in _random_fields(inst, 5, seed=3):
        c = metrics.cosine_similarity(inst, u, inst.duality_map_H(u))
        assert abs(c - 1.0) <= 1e-12, f"cosim(u, dH(u)) = {c} != 1"


def check_jacobian_fd():
    inst = _desk_instance(p=3.0, n=13)
    rng = np.random.default_rng(11)
    mask = inst.domain.interior_mask
    for _ in range(5):
        u = np.where(mask, rng.standard_normal(mask.shape), 0.0)
        v = np.where(mask, rng.standard_normal(mask.shape), 0.0)
        A = inst.jacobian_matrix(u)
        jv = A @ v[mask]
        step = 1e-6
        fd = (inst.neg_plaplacian(u + step * v) -
              inst.neg_plaplacian(u - step * v))[mask] / (2 * step)
        scale = max(1.0, float(np.max(np.abs(fd))))
        err = float(np.max(np.abs(jv - fd))) / scale
        assert err <= 1e-5, f"Jacobian-vector mismatch, rel err {err:.2e}"


def check_stencil_enumeration():
    domain = build_domain("square", 2.0, 0.02)
    r = 0.02 ** 0.5
    stencil = build_stencil(domain, r, 3.0)
    count = 0
    m = int(r / domain.h) + 1
    for dy in range(-m, m + 1):
        for dx in range(-m, m + 1):
            if (dx, dy) != (0, 0) and \
                    (dx * domain.h) ** 2 + (dy * domain.h) ** 2 <= r * r * (1 + 1e-12):
                count += 1
    assert len(stencil.offsets) == count, \
        f"stencil has {len(stencil.offsets)} offsets, enumeration {count}"


def check_spd_ipm_oracle():
    rng = np.random.default_rng(42)
    for _ in range(3):
        Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        eigs = np.sort(rng.uniform(1.0, 100.0, size=8))
        A = (Q * eigs) @ Q.T
        pair = SpdInstance(A)
        trace = eigensolvers.run_ipm(pair, rng.standard_normal(8), 400,
                                     residual_tol=1e-13)
        lam_true = scipy.linalg.eigvalsh(A)[0]
        assert abs(trace.final_lambda - lam_true) <= 1e-8 * lam_true, \
            f"IPM eigenvalue {trace.final_lambda} vs oracle {lam_true}"


def check_duality_gap_cross():
    inst = _desk_instance(p=3.0, n=13)
    for u in _random_fields(inst, 10, seed=5):
        zeta = inst.subgrad_J(u)
        g = metrics.duality_gap(inst, u, zeta, u)
        R = metrics.rayleigh_quotient(inst, u)
        c = metrics.cosine_similarity(inst, u, zeta)
        alt = (1.0 - c) * R ** (-1.0 / inst.p)
        assert abs(g - alt) <= 1e-8 * max(abs(g), abs(alt), 1e-12), \
            f"gap cross-check failed: {g} vs {alt}"
        assert g >= -1e-10, f"negative duality gap {g}"


def check_ipm_dual_rq_monotone_small():
    inst = _desk_instance(p=3.0, n=21, shape="lshape", r_factor=3.0)
    u0 = eval_initial_guess("ex1", inst.domain).values
    trace = eigensolvers.run_ipm(inst, u0, 10, NewtonSettings())
    drq = [r.dual_rq for r in trace.records]
    for a, b in zip(drq, drq[1:]):
        assert b >= a - 1e-9 * abs(a), f"dual RQ decreased: {a} -> {b}"


def check_fenchel_young_inequality():
    inst = _desk_instance(p=3.0, n=13)
    fields = _random_fields(inst, 10, seed=9)
    for u, w in zip(fields[:5], fields[5:]):
        zeta = inst.subgrad_J(w)
        lhs = inst.pairing(zeta, u)
        rhs = inst.energy_J(u) + fenchel_conjugate_value(inst, zeta, w)
        scale = max(abs(lhs), abs(rhs), 1.0)
        assert lhs <= rhs + 1e-10 * scale, "Fenchel-Young inequality violated"


def check_example1_sweep_full():
    domain = build_domain("lshape", 2.0, 0.025)
    u0 = eval_initial_guess("ex1", domain).values
    for p in (1.5, 2.0, 3.0, 5.0):
        stencil = build_stencil(domain, 0.2, p)
        inst = PLaplaceInstance(domain, stencil, p)
        trace = eigensolvers.run_ipm(inst, u0, 30, NewtonSettings())
        drq = [r.dual_rq for r in trace.records]
        for a, b in zip(drq, drq[1:]):
            assert b >= a - 1e-9 * abs(a), \
                f"dual RQ decreased for p={p}: {a} -> {b}"
        res = metrics.eigen_residual(inst, trace.final_u)
        assert res <= 1e-5, f"final residual {res:.2e} for p={p}"


QUICK_CHECKS = [
    ("euler-identity", check_euler_identity),
    ("norm-duality-link", check_norm_duality_link),
    ("duality-map-equality-case", check_duality_map_equality_case),
    ("jacobian-finite-difference", check_jacobian_fd),
    ("stencil-enumeration", check_stencil_enumeration),
    ("spd-ipm-oracle", check_spd_ipm_oracle),
    ("duality-gap-cross-check", check_duality_gap_cross),
    ("fenchel-young-inequality", check_fenchel_young_inequality),
    ("ipm-dual-rq-monotone", check_ipm_dual_rq_monotone_small),
]

FULL_CHECKS = QUICK_CHECKS + [
    ("example1-four-p-sweep", check_example1_sweep_full),
]


def run_suite(scale: str = "quick", out=print) -> bool:
    checks = QUICK_CHECKS if scale == "quick" else FULL_CHECKS
    ok = True
    for name, fn in checks:
        try:
            fn()
        except AssertionError as exc:
            ok = False
            out(f"FAIL  {name}: {exc}")
        else:
            out(f"PASS  {name}")
    return ok
