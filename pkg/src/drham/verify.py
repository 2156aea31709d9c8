"""Verification suites: each target is a list of independent tasks, each
task returns a list of CheckResult. Tasks are module-level so they can be
dispatched to worker processes."""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor

from gmpy2 import mpq

from . import central, drk2, gd, models
from .algebra import dilation_D
from .drk2 import build_K1, build_K2, check_homogeneity
from .multivector import bivector_of_op, commutator_VQ_BK, compatible, is_poisson, vector_field
from .operators import MatDiffOp, ScalarDiffOp, miura_op
from .report import ERROR, SKIPPED, CheckResult, check, eps_scope
from .variational import functional_equal, value_at_zero, var_gradient

TARGETS = ("kdv", "rspin3", "rspin4", "rspin5", "cp1", "genus0", "central")

DEFAULT_D_MAX = {"kdv": 3, "rspin3": 1, "rspin4": 0, "rspin5": 0, "cp1": 0, "genus0": 3, "central": 0}


def _diff_witness(a, b) -> str:
    if isinstance(a, MatDiffOp):
        n, m = a.shape
        for i in range(n):
            for j in range(m):
                if a.entries[i][j] != b.entries[i][j]:
                    return f"entry ({i + 1},{j + 1}): {a.entries[i][j] - b.entries[i][j]}"
        return ""
    return str(a - b)


def _vec_witness(res) -> str:
    return "; ".join(f"component {i + 1}: {r}" for i, r in enumerate(res) if r)


def _lemma_ok(m) -> bool:
    """B_{K2} = [V_R, B_{K1}], checked through the operator form of the commutator."""
    K2 = build_K2(m)
    K1 = build_K1(m.hom, m.ring)
    Kt = commutator_VQ_BK(drk2.r_vector_field(m), K1)
    return functional_equal(bivector_of_op(K2, check_skew=False) + bivector_of_op(Kt, check_skew=False), 0)


# ---------------------------------------------------------------- shared


def _dr_operator_checks(m, tag: str, scope: str) -> list:
    out = [check(f"{tag}: homogeneity identity", scope, check_homogeneity(m))]
    Ka = build_K2(m, "alternative")
    Kd = build_K2(m, "defining")
    out.append(check(f"{tag}: K2 defining form = alternative form", scope, Ka == Kd, _diff_witness(Ka, Kd)))
    out.append(check(f"{tag}: K2 skew-symmetric", scope, Ka.is_skew()))
    return out


def _poisson_checks(m, tag: str, scope: str) -> list:
    K2 = build_K2(m)
    K1 = build_K1(m.hom, m.ring)
    return [
        check(f"{tag}: [B_K2, B_K2] = 0", scope, is_poisson(K2)),
        check(f"{tag}: [B_K2, B_K1] = 0", scope, compatible(K1, K2, check_poisson=False)),
        check(f"{tag}: B_K2 = [V_R, B_K1]", scope, _lemma_ok(m)),
    ]


def _recursion_checks(m, tag: str, scope: str, d_max: int, start=None, skip_degenerate=False) -> list:
    K2 = build_K2(m)
    K1 = build_K1(m.hom, m.ring)
    out = []
    table = drk2.recursion_generate(m.hom, K2, d_max + 1, reconstruct=False, start=start,
                                    skip_degenerate=skip_degenerate)
    grads = {k: v["grad"] for k, v in table.items()}
    n = m.ring.n
    levels = [(a, d) for d in range(-1, d_max + 1) for a in range(n) if (a, d + 1) in grads]
    for r in drk2.recursion_check(m.hom, K2, grads, levels):
        out.append(check(f"{tag}: recursion (alpha={r.alpha + 1}, d={r.d})", scope, r.ok, r.witness()))
    for a in range(n):
        if (a, 0) in table and not (start and (a, 0) in start):
            lv = drk2.level0_gradient(m.gbar, a)
            lv = [x - value_at_zero(x) for x in lv]
            ok = all(x == y for x, y in zip(lv, grads[(a, 0)]))
            out.append(check(f"{tag}: generated g_{{{a + 1},0}} = d g / d u^{a + 1}", scope, ok,
                             _vec_witness([x - y for x, y in zip(lv, grads[(a, 0)])])))
    bad1 = drk2.mutual_commutativity(table, K1)
    out.append(check(f"{tag}: generated Hamiltonians commute under K1", scope, not bad1, str(bad1)))
    return out, table


# ---------------------------------------------------------------- kdv


def task_kdv_operator(cfg):
    m = models.trivial_model()
    sc = eps_scope(None)
    R = m.ring
    u = R.u(0)
    expected = MatDiffOp(R, [[ScalarDiffOp(R, {1: u, 0: R.u(0, 1) / 2, 3: R.eps(2) / 8})]])
    K2 = build_K2(m)
    out = [check("kdv: K2 = u dx + u_x/2 + eps^2/8 dx^3", sc, K2 == expected, _diff_witness(K2, expected))]
    return out + _dr_operator_checks(m, "kdv", sc)


def task_kdv_poisson(cfg):
    return _poisson_checks(models.trivial_model(), "kdv", eps_scope(None))


def task_kdv_recursion(cfg):
    m = models.trivial_model()
    sc = eps_scope(None)
    out, table = _recursion_checks(m, "kdv", sc, cfg["d_max"])
    # the unit Hamiltonian at level one is (D - 2) g
    ref = var_gradient(dilation_D(m.gbar) - m.gbar.scale(2))
    ok = table[(0, 1)]["grad"] == ref
    out.append(check("kdv: generated g_{1,1} = (D - 2) g", sc, ok))
    return out


def task_kdv_central(cfg):
    m = models.trivial_model()
    sc = eps_scope(None)
    c = central.central_invariant_scalar(build_K1(m.hom, m.ring), build_K2(m))
    ok = c.is_constant() and c.value() == mpq(1, 24)
    return [check("kdv: central invariant = 1/24", sc, ok, f"c = {c.numerator} / ({c.denominator})"),
            check("kdv: eps^2 dx^3 tensor identity", sc, central.eps2_tensor_check(m))]


# ---------------------------------------------------------------- r-spin


def _gd_vs_dr(r: int, m, tag: str) -> list:
    sc = eps_scope(None)
    K1w, K2w, _ = gd.rspin_package(r, None, 0)
    K2dr = gd.apply_miura_to_dr(r, build_K2(m))
    K1dr = gd.apply_miura_to_dr(r, build_K1(m.hom, m.ring))
    relabel = lambda K: K.map_coeffs(lambda c: c.with_ring(K2w.ring))  # noqa: E731
    K2dr, K1dr = relabel(K2dr), relabel(K1dr)
    return [
        check(f"{tag}: Gelfand-Dickey K2 in w = Miura image of K2 from g", sc, K2dr == K2w, _diff_witness(K2dr, K2w)),
        check(f"{tag}: (-r)^(r/2) Gelfand-Dickey K1 in w = Miura image of eta^-1 dx", sc, K1dr == K1w,
              _diff_witness(K1dr, K1w)),
    ]


def _dz_checks(r: int, tag: str, d_max: int) -> list:
    sc = eps_scope(None)
    K1, K2, hams = gd.rspin_package(r, None, d_max)
    out = []
    for d in range(-1, d_max + 1):
        for a in range(1, r):
            res = gd.dz_recursion_residual(K1, K2, hams, r, a, d)
            out.append(check(f"{tag}: DZ recursion (alpha={a}, d={d}), factor {mpq(a + (d + 1) * r, r)}", sc,
                             not any(res), _vec_witness(res)))
    return out


def _gd_structure_checks(r: int, tag: str) -> list:
    sc = eps_scope(None)
    ctx = gd.GDContext(r, aux=True)
    K1 = gd.gd_k1(ctx)
    K2 = gd.gd_k2(ctx)
    zero = MatDiffOp.zeros(K1.ring, r - 1)
    return [
        check(f"{tag}: Gelfand-Dickey K1, K2 skew", sc, K1.is_skew() and K2.is_skew()),
        check(f"{tag}: Gelfand-Dickey degree-zero parts vanish", sc,
              gd.degree_zero_part(K1) == zero and gd.degree_zero_part(K2) == zero),
    ]


def task_rspin3_dr(cfg):
    m = models.rspin3_model()
    return _dr_operator_checks(m, "3-spin", eps_scope(None)) + _poisson_checks(m, "3-spin", eps_scope(None))


def task_rspin3_gd(cfg):
    return _gd_structure_checks(3, "3-spin") + _gd_vs_dr(3, models.rspin3_model(), "3-spin")


def task_rspin3_dz(cfg):
    return _dz_checks(3, "3-spin", cfg["d_max"])


def task_rspin3_recursion(cfg):
    m = models.rspin3_model()
    out, table = _recursion_checks(m, "3-spin", eps_scope(None), cfg["d_max"])
    bad = drk2.mutual_commutativity(table, build_K2(m))
    out.append(check("3-spin: generated Hamiltonians commute under K2", eps_scope(None), not bad, str(bad)))
    return out


def task_rspin4_dr(cfg):
    m = models.rspin4_model()
    return _dr_operator_checks(m, "4-spin", eps_scope(None)) + _poisson_checks(m, "4-spin", eps_scope(None))


def task_rspin4_gd(cfg):
    return _gd_structure_checks(4, "4-spin") + _gd_vs_dr(4, models.rspin4_model(), "4-spin")


def task_rspin4_dz(cfg):
    return _dz_checks(4, "4-spin", cfg["d_max"])


def task_rspin5_gd(cfg):
    return _gd_structure_checks(5, "5-spin")


def task_rspin5_dz(cfg):
    return _dz_checks(5, "5-spin", cfg["d_max"])


def task_rspin5_dr(cfg):
    path = cfg.get("g_file")
    if not path:
        return [CheckResult("5-spin: K2 from g vs Gelfand-Dickey", "exact", SKIPPED,
                            note="needs an externally supplied g density (--g-file)")]
    m = models.load_model(path)
    if m.ring.n != 4:
        raise models.ModelFileError(f"{path}: a 5-spin model has 4 fields, got {m.ring.n}")
    sc = eps_scope(m.ring.eps_order)
    out = _dr_operator_checks(m, "5-spin", sc)
    K1w, K2w, _ = gd.rspin_package(5, m.ring.eps_order, 0)
    K2dr = gd.apply_miura_to_dr(5, build_K2(m)).map_coeffs(lambda c: c.with_ring(K2w.ring))
    out.append(check("5-spin: Gelfand-Dickey K2 in w = Miura image of K2 from g", sc, K2dr == K2w,
                     _diff_witness(K2dr, K2w)))
    return out


# ---------------------------------------------------------------- cp1


def task_cp1_operator(cfg):
    m = models.cp1_model(cfg["genus"])
    sc = eps_scope(m.ring.eps_order)
    K2 = build_K2(m)
    Kc = models.cp1_K2_closed(m.ring)
    out = _dr_operator_checks(m, "CP1", sc)
    out.append(check("CP1: K2 = closed shift-operator form", sc, K2 == Kc, _diff_witness(K2, Kc)))
    return out


def task_cp1_toda(cfg):
    G = cfg["genus"]
    m = models.cp1_model(G)
    sc = eps_scope(m.ring.eps_order)
    K1t, K2t = models.toda_pair(G)
    mu = models.toda_to_dr_miura(G)
    A = miura_op(K1t, mu).map_coeffs(lambda c: c.with_ring(m.ring))
    B = miura_op(K2t, mu).map_coeffs(lambda c: c.with_ring(m.ring))
    K1 = build_K1(m.hom, m.ring)
    K2 = build_K2(m)
    return [check("CP1: Toda K1 maps to eta^-1 dx", sc, A == K1, _diff_witness(A, K1)),
            check("CP1: Toda K2 maps to K2", sc, B == K2, _diff_witness(B, K2))]


def task_cp1_recursion(cfg):
    m = models.cp1_model(cfg["genus"])
    sc = eps_scope(m.ring.eps_order)
    n = m.ring.n
    # components whose factor vanishes at d = -1 start from d g / d u^alpha
    start = {}
    for a in range(n):
        if not m.hom.recursion_factor(a, -1):
            g0 = [x - value_at_zero(x) for x in drk2.level0_gradient(m.gbar, a)]
            start[(a, 0)] = {"grad": g0, "density": None}
    out, table = _recursion_checks(m, "CP1", sc, cfg["d_max"], start=start)
    ref = [x - value_at_zero(x) for x in var_gradient(models.cp1_unit_level1(m.ring))]
    ok = table[(0, 1)]["grad"] == ref
    out.append(check("CP1: generated g_{1,1} = closed form", sc, ok,
                     _vec_witness([x - y for x, y in zip(ref, table[(0, 1)]["grad"])])))
    return out


# ---------------------------------------------------------------- genus 0 and central


def _genus0_models(cfg):
    return [models.trivial_model(), models.rspin3_model(), models.rspin4_model(), models.cp1_model(cfg["genus"])]


def task_genus0(cfg):
    out = []
    for m in _genus0_models(cfg):
        rep = drk2.genus0_check(m.hom, m.F, cfg["d_max"], build_K2(m))
        sc = "exact"
        for r in rep.recursion:
            out.append(check(f"{m.name}: genus-0 recursion (alpha={r.alpha + 1}, d={r.d})", sc, r.ok, r.witness()))
        out.append(check(f"{m.name}: genus-0 string relation", sc, rep.string_ok, "; ".join(rep.failures)))
        out.append(check(f"{m.name}: genus-0 homogeneity identity", sc, rep.homogeneity_ok, "; ".join(rep.failures)))
        out.append(check(f"{m.name}: K2 reduces to the genus-0 operator", sc, bool(rep.k2_matches)))
    return out


def task_central(cfg):
    out = task_kdv_central(cfg)[:1]
    for m in _genus0_models(cfg):
        lhs, rhs = central.eps2_tensor_sides(m)
        bad = [f"({a + 1},{b + 1}): {lhs[a][b]} vs {rhs[a][b]}" for a in range(len(lhs)) for b in range(len(lhs))
               if lhs[a][b] != rhs[a][b]]
        out.append(check(f"{m.name}: eps^2 dx^3 tensor identity", eps_scope(m.ring.eps_order), not bad, "; ".join(bad)))
    return out


SUITES = {
    "kdv": [task_kdv_operator, task_kdv_poisson, task_kdv_recursion, task_kdv_central],
    "rspin3": [task_rspin3_dr, task_rspin3_gd, task_rspin3_dz, task_rspin3_recursion],
    "rspin4": [task_rspin4_dr, task_rspin4_gd, task_rspin4_dz],
    "rspin5": [task_rspin5_gd, task_rspin5_dz, task_rspin5_dr],
    "cp1": [task_cp1_operator, task_cp1_toda, task_cp1_recursion],
    "genus0": [task_genus0],
    "central": [task_central],
}


class ConfigError(ValueError):
    pass


def _run_task(task, cfg):
    t = time.perf_counter()
    try:
        res = task(cfg)
    except (models.ModelFileError, models.UnknownModel, drk2.InvalidModel):
        raise
    except Exception as e:  # a crashed check is reported, not swallowed
        res = [CheckResult(task.__name__.removeprefix("task_"), "exact", ERROR, f"{type(e).__name__}: {e}")]
    dt = time.perf_counter() - t
    for r in res:
        r.seconds = dt / len(res)
    return res


def run_target(target: str, cfg: dict, jobs: int = 1) -> list:
    if target not in SUITES:
        raise ConfigError(f"unknown target {target!r}; choose from {', '.join(TARGETS)}")
    tasks = SUITES[target]
    if jobs <= 1 or len(tasks) == 1:
        chunks = [_run_task(t, cfg) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
            futures = [ex.submit(_run_task, t, cfg) for t in tasks]
            chunks = [f.result() for f in futures]
    return [r for c in chunks for r in c]
