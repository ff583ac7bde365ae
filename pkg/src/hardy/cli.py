"""Command line driver: ``hardy <mode> --config cfg.yaml [--out dir]``.

Each mode runs one pipeline, writes a deterministic JSON report plus CSV
samples of the constructed functions, and exits 0 on optimal/pass, 2 on
not-optimal/fail, 3 on inconclusive, 1 on any error.  ``--override
key.path=value`` patches config entries; ``--seed`` fixes the randomized
test functions; HARDY_LOG in {error, warn, info, debug} controls logging.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

import numpy as np

from . import families, certify, radial
from .config import ConfigError, MODES, apply_overrides, build_config
from .exprlang import ExprError
from .grid import GridError, sample
from .report import emit_csv, emit_report, exit_code
from .sturm import (CoefficientError, ConvergenceError, SLProblem,
                    SolutionPair, principal_solution, reduction_of_order)

import yaml

log = logging.getLogger("hardy")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("HARDY_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="hardy",
        description="Construct Hardy weights and certify their optimality.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="YAML job config")
    parser.add_argument("--out", default="hardy-out", help="output directory")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized test functions")
    parser.add_argument("--override", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config entry")
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        data = apply_overrides(data, args.override)
        cfg = build_config(data, mode=args.mode)
        runner = _RUNNERS[cfg.mode]
        verdict, payload = runner(cfg, args.out, args.seed)
    except (ConfigError, ExprError) as exc:
        log.error("configuration error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CoefficientError, ConvergenceError, GridError, ValueError,
            RuntimeError, OSError) as exc:
        log.error("pipeline error (%s): %s", type(exc).__name__, exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1

    payload["mode"] = cfg.mode
    payload["seed"] = args.seed
    payload["verdict"] = verdict
    path = emit_report(payload, os.path.join(args.out, "report.json"))
    print(f"verdict: {verdict}  (report: {path})")
    return exit_code(verdict)


def run() -> None:
    raise SystemExit(main())


# --- mode pipelines ----------------------------------------------------------

def _build_problem(cfg) -> SLProblem:
    p = cfg.compile(cfg.p_src, "problem.p")
    q = cfg.compile(cfg.q_src, "problem.q")
    return SLProblem(p, q, cfg.make_interval())


def _build_family(cfg, prob):
    kind = cfg.family_kind
    if kind == "classical":
        return families.classical_family()
    if kind == "a-family":
        return families.improved_family(cfg.a)
    if kind == "external":
        w = cfg.compile(cfg.w_src, "family.w")
        f = cfg.compile(cfg.f_src, "family.f")
        fp = cfg.compile(cfg.f_prime_src, "family.f_prime") \
            if cfg.f_prime_src else None
        return families.external_family(w, f, prob.iv, f_prime_fn=fp)
    raise ConfigError(f"family kind {kind!r} not constructible in this mode")


def _family_csv(out, fam, samples):
    nodes = fam.f_w.nodes
    idx = np.unique(np.linspace(0, nodes.size - 1, samples).astype(int))
    xs = nodes[idx]
    emit_csv(os.path.join(out, "f_w.csv"), "t", xs, fam.f_w(xs),
             fam.f_w.derivative(xs) if fam.f_w.derivatives is not None else None)
    emit_csv(os.path.join(out, "w.csv"), "t", xs,
             [float(fam.w(x)) for x in xs])


def _run_verify_1d(cfg, out, seed):
    prob = _build_problem(cfg)
    fam = _build_family(cfg, prob)
    report = certify.certify_optimality_1d(
        prob, fam, windows=cfg.windows, ratio=cfg.ratio, xis=cfg.xis,
        osc_shrinks=cfg.osc_shrinks, lambda0_mesh=cfg.lambda0_mesh,
        lambda0_cutoffs=cfg.lambda0_cutoffs)
    if cfg.emit_csv:
        _family_csv(out, fam, cfg.csv_samples)
    payload = report.to_dict()
    payload["family"] = {"provenance": fam.provenance,
                         "interval": [fam.iv.a, fam.iv.b]}
    return report.verdict, payload


def _run_a_family(cfg, out, seed):
    fam = families.improved_family(cfg.a)
    prob = SLProblem(lambda t: 1.0, lambda t: 0.0, fam.iv)
    report = certify.certify_optimality_1d(
        prob, fam, windows=cfg.windows, ratio=cfg.ratio, xis=cfg.xis,
        osc_shrinks=cfg.osc_shrinks, lambda0_mesh=cfg.lambda0_mesh,
        lambda0_cutoffs=cfg.lambda0_cutoffs)
    if cfg.emit_csv:
        _family_csv(out, fam, cfg.csv_samples)
    payload = report.to_dict()
    payload["family"] = {"provenance": fam.provenance, "a": cfg.a,
                         "interval": [fam.iv.a, fam.iv.b]}
    return report.verdict, payload


def _run_ep_family(cfg, out, seed):
    prob = _build_problem(cfg)
    if None in (cfg.c1, cfg.c3):
        raise ConfigError("family.c1 and family.c3 required for ep mode")
    iv = prob.iv
    ref = iv.reference_point
    hi = iv.b - 0.05 * (iv.b - ref) if math.isfinite(iv.b) else 8.0 * ref
    probe = np.geomspace(max(iv.a, 0.0) + 1e-6 * ref, hi, 1201) \
        if iv.a == 0.0 else np.linspace(iv.a + 1e-3, hi, 1201)
    pr = principal_solution(prob, "left", probe=probe)
    v1 = pr.solution
    v2 = reduction_of_order(prob, v1, v1.b)
    pair = SolutionPair(v1, v2, wronskian=1.0)
    fam_ep = families.EPFamily(pair, cfg.c1, cfg.c2, cfg.c3, k=cfg.k)
    f = families.ep_solution(fam_ep, prob=prob)
    fam = families.ep_weight(f, k=cfg.k)
    resid = families.family_residual(prob, fam)
    verdict = "pass" if resid <= families.RESIDUAL_TOL else "fail"
    if cfg.emit_csv:
        _family_csv(out, fam, cfg.csv_samples)
    payload = {
        "family": {"provenance": "ep", "c": [cfg.c1, cfg.c2, cfg.c3],
                   "k": cfg.k, "domain": [f.a, f.b]},
        "residual": resid,
        "principal_solution": {"nestings": pr.nestings,
                               "accelerated": pr.accelerated,
                               "growth_ratios": list(pr.growth_ratios)},
    }
    return verdict, payload


def _run_series(cfg, out, seed):
    prob = _build_problem(cfg)
    L = cfg.L if cfg.L is not None else (cfg.m + 1.0 if cfg.m is not None else None)
    if L is None:
        raise ConfigError("family.L (or family.m) required for series mode")
    if cfg.c1 is None:
        raise ConfigError("family.c1 required for series mode")
    c2 = cfg.c2
    c3 = cfg.c3 if cfg.c3 is not None else math.sqrt(1.0 + cfg.c1 * c2)
    harmonic = _is_harmonic(prob)
    if harmonic:
        # harmonic start pair, companion anchored at L: the closed-form
        # recursion's convention, so the two routes can be compared
        res = families.weight_series(
            prob, L - 1.0, [(cfg.c1, c2, c3)], cfg.depth,
            anchor_policy="fixed", start_pair=_series_start_pair(L),
            alphas=[0.0] * cfg.depth, betas=[1.0] * cfg.depth)
    else:
        res = families.weight_series(
            prob, L - 1.0, [(cfg.c1, c2, c3)], cfg.depth,
            anchor_policy=cfg.anchor_policy)
    cum = res.cumulative[-1]

    agreement = None
    verdict = "pass"
    if harmonic:
        closed = families.series_weight_closed_form(L, cfg.c1, c2, cfg.depth)
        xs = cum.nodes[(cum.nodes > cum.nodes[0]) & (cum.nodes < L * (1 - 1e-6))]
        diff = np.abs(cum(xs) - closed(xs)) / (1.0 + np.abs(closed(xs)))
        agreement = float(np.max(diff))
        if agreement > 1e-6:
            verdict = "fail"
    mono = all(np.all(res.cumulative[i + 1].values >= res.cumulative[i].values)
               for i in range(len(res.cumulative) - 1))
    if not mono:
        verdict = "fail"
    if cfg.emit_csv:
        idx = np.unique(np.linspace(0, cum.nodes.size - 1,
                                    cfg.csv_samples).astype(int))
        emit_csv(os.path.join(out, "weight_series.csv"), "t",
                 cum.nodes[idx], cum.values[idx])
    payload = {
        "series": {"depth": cfg.depth, "L": L,
                   "coefficients": [cfg.c1, c2, c3],
                   "anchor_policy": cfg.anchor_policy,
                   "windows": [list(w) for w in res.windows]},
        "partial_sums_monotone": mono,
        "closed_form_agreement": agreement,
    }
    return verdict, payload


def _series_start_pair(L):
    nodes = np.geomspace(L * 1e-7, L * (1 - 1e-9), 1600)
    v1 = sample(lambda t: math.sqrt(2.0) * t, nodes,
                deriv=lambda t: math.sqrt(2.0))
    v2 = sample(lambda t: (L - t) / (math.sqrt(2.0) * L), nodes,
                deriv=lambda t: -1.0 / (math.sqrt(2.0) * L))
    return SolutionPair(v1, v2, wronskian=1.0)


def _is_harmonic(prob):
    try:
        pts = [prob.reference_point, prob.reference_point / 3]
        return all(abs(float(prob.q(t))) < 1e-14 and
                   abs(float(prob.p(t)) - 1.0) < 1e-14 for t in pts)
    except Exception:
        return False


def _build_radial(cfg):
    phi_expr = cfg.compile(cfg.phi_src, "nd.phi")
    r_cap = cfg.r_phi

    def phi(r):
        if r >= r_cap:
            return 0.0
        return float(phi_expr(r))

    u = u_prime = None
    if cfg.u_src:
        u = cfg.compile(cfg.u_src, "nd.u")
        u_prime = cfg.compile(cfg.u_prime_src, "nd.u_prime")
    return radial.make_radial_problem(cfg.n_dim, phi, r_cap, u=u,
                                      u_prime=u_prime, grid_n=cfg.nd_grid)


def _run_nd_example(cfg, out, seed):
    rp = _build_radial(cfg)
    ndw_c = radial.classical_weight(rp)
    inner_c, outer_c = radial.null_criticality_integrals(rp, ndw_c)
    payload = {
        "radial": {"n": rp.n, "mass": rp.mass, "exterior_constant": rp.C,
                   "poisson_residual": rp.poisson_residual,
                   "sup_tau": rp.sup_tau},
        "classical": {"null_criticality_outer": outer_c.to_dict(),
                      "null_criticality_inner": inner_c.to_dict()},
        "assumptions": ["u positivity and the decay G/u -> 0 checked "
                        "numerically on the grid only"],
    }
    ok = outer_c.kind == "divergent"
    inconclusive = outer_c.kind == "inconclusive"
    if cfg.nd_a is not None:
        ndw_i = radial.improved_weight(rp, cfg.nd_a)
        _, outer_i = radial.null_criticality_integrals(rp, ndw_i)
        rs = np.geomspace(rp.r_support * 1.1, rp.r_support * 100, 64)
        ratio = np.array([ndw_i.W(r) / ndw_c.W(r) for r in rs])
        expected = np.array([4.0 / (2.0 - cfg.nd_a * rp.tau(r)) ** 2 for r in rs])
        dom_err = float(np.max(np.abs(ratio - expected)))
        payload["improved"] = {
            "a": cfg.nd_a,
            "null_criticality_outer": outer_i.to_dict(),
            "domination_ratio_error": dom_err,
            "ratio_above_one": bool(np.min(ratio) > 1.0),
        }
        ok = ok and outer_i.kind == "divergent" and dom_err < 1e-8 \
            and bool(np.min(ratio) > 1.0)
        inconclusive = inconclusive or outer_i.kind == "inconclusive"
    if cfg.emit_csv:
        xs = rp.G.nodes[:: max(1, rp.G.nodes.size // cfg.csv_samples)]
        emit_csv(os.path.join(out, "G_phi.csv"), "r", xs, rp.G(xs),
                 rp.G.derivative(xs))
        emit_csv(os.path.join(out, "W_classical.csv"), "r", xs,
                 [ndw_c.W(r) for r in xs])
    verdict = "optimal" if ok else ("inconclusive" if inconclusive else "not-optimal")
    return verdict, payload


def _run_rellich(cfg, out, seed):
    rp = _build_radial(cfg)
    if cfg.nd_a is None:
        raise ConfigError("nd.a required for rellich mode")
    rng = np.random.default_rng(seed)
    psis = radial.random_annular_bumps(rp, cfg.rellich_count, rng)
    results = radial.rellich_check(rp, cfg.nd_a, psis)
    ok = all(margin >= -1e-8 * (1.0 + lhs) for lhs, rhs, margin in results)
    payload = {
        "radial": {"n": rp.n, "sup_tau": rp.sup_tau, "a": cfg.nd_a},
        "tests": [{"support": [p.r1, p.r2], "lhs": l, "rhs": r, "margin": m}
                  for p, (l, r, m) in zip(psis, results)],
    }
    return ("pass" if ok else "fail"), payload


_RUNNERS = {
    "verify-1d": _run_verify_1d,
    "ep-family": _run_ep_family,
    "a-family": _run_a_family,
    "series": _run_series,
    "nd-example": _run_nd_example,
    "rellich": _run_rellich,
}


if __name__ == "__main__":
    run()
