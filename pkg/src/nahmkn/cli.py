"""Command-line surface: reproducible experiments with CSV/JSON artifacts.

Every command reads a JSON config (``--config``), applies flag overrides,
and writes deterministic artifacts into the output directory.  Artifacts
embed the config hash and seed.  Exit codes: 0 all asserted invariants
pass, 1 numeric failure (diagnostic on stderr), 2 config/schema violation.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import (counterexample, estimates, kempfness, liecore, modulimap,
               nahmflow, verify)
from .runconfig import ConfigError, RunConfig


class NumericFailure(RuntimeError):
    pass


def _ensure_out(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return cfg.out


def _write_json(cfg, name, payload):
    out = dict(payload)
    out["config_hash"] = cfg.hash
    out["seed"] = cfg.seed
    path = os.path.join(_ensure_out(cfg), name)
    with open(path, "w") as fh:
        json.dump(out, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _meta(cfg):
    return {"config_hash": cfg.hash, "seed": cfg.seed}


def _basis_triple(n, scale):
    """The closed-form complete triple, embedded top-left for rank > 2."""
    t = liecore.su2_basis()
    out = np.zeros((3, n, n), dtype=np.complex128)
    out[:, :2, :2] = t
    return scale * out


def _section_triple(cfg, section, default_scale=1.0):
    if "X" in section:
        return np.stack([modulimap.matrix_from_json(m) for m in section["X"]])
    return _basis_triple(cfg.n, float(section.get("scale", default_scale)))


def _random_point(cfg, rng, max_norm=0.8):
    k = liecore.random_unitary(rng, cfg.n)
    x = estimates.sample_domain_triple(rng, max_norm=max_norm) if cfg.n == 2 \
        else _basis_triple(cfg.n, 0.3)
    return modulimap.ModuliPoint(k=k, x=x)


def cmd_reduced_flow(cfg):
    sec = cfg.section("reduced-flow")
    x = _section_triple(cfg, sec)
    sol = nahmflow.integrate_reduced(x, cfg.step, cfg.blowup_threshold)
    nahmflow.export_trajectory_csv(
        os.path.join(_ensure_out(cfg), "reduced_flow.csv"),
        sol.grid,
        {"P1": sol.values[:, 0], "P2": sol.values[:, 1], "P3": sol.values[:, 2]},
        meta=_meta(cfg),
    )
    res = sol.max_relative_residual()
    res_tol = 50.0 * cfg.step**2
    norms = [sol.component_norm2(a) for a in range(3)]
    conserved = max(
        float(np.abs((norms[a] - norms[b]) - (norms[a][0] - norms[b][0])).max())
        for a in range(3) for b in range(a + 1, 3)
    )
    payload = {
        "status": sol.status,
        "blowup_time": sol.blowup_time,
        "sup_norm": sol.sup_norm,
        "relative_residual": res,
        "residual_tolerance": res_tol,
        "conserved_difference_drift": conserved,
    }
    _write_json(cfg, "reduced_flow.json", payload)
    if sol.status == nahmflow.COMPLETE and (res > res_tol or conserved > 1e-8):
        raise NumericFailure(
            f"reduced flow invariants violated: residual {res:.3e}, "
            f"conserved drift {conserved:.3e}"
        )


def cmd_gauge_fix(cfg):
    sec = cfg.section("gauge-fix")
    rng = np.random.default_rng(cfg.seed)
    x = _section_triple(cfg, sec, default_scale=0.8)
    y = liecore.random_algebra(rng, cfg.n, norm=float(sec.get("a0_norm", 0.7)))
    full = nahmflow.integrate_full(lambda t: y, x, cfg.step, cfg.blowup_threshold)
    gauge, reduced = nahmflow.gauge_fix(full)
    direct = nahmflow.integrate_reduced(x, cfg.step, cfg.blowup_threshold)
    roundtrip = float(np.abs(reduced.values - direct.values).max())
    k_end_err = liecore.frob(gauge.endpoint - liecore.group_exp(y))
    nahmflow.export_trajectory_csv(
        os.path.join(_ensure_out(cfg), "gauge_fix.csv"),
        gauge.grid, {"k": gauge.values}, meta=_meta(cfg),
    )
    _write_json(cfg, "gauge_fix.json", {
        "roundtrip_error": roundtrip,
        "gauge_endpoint_error": k_end_err,
    })
    if roundtrip > 1e-7:
        raise NumericFailure(f"gauge round trip error {roundtrip:.3e} > 1e-7")


def cmd_psi(cfg):
    sec = cfg.section("psi")
    rng = np.random.default_rng(cfg.seed)
    if "k" in sec and "X" in sec:
        point = modulimap.moduli_point_from_json(sec)
    elif "X" in sec or "scale" in sec:
        point = modulimap.ModuliPoint(
            k=np.eye(cfg.n, dtype=complex), x=_section_triple(cfg, sec)
        )
    else:
        point = _random_point(cfg, rng)
    q = modulimap.moduli_to_cotangent(point, cfg.step)
    _write_json(cfg, "psi.json", {
        "input": modulimap.moduli_point_to_json(point),
        "output": modulimap.cotangent_point_to_json(q),
    })


def cmd_psi_inv(cfg):
    sec = cfg.section("psi-inv")
    rng = np.random.default_rng(cfg.seed)
    if "g" in sec and "Y" in sec:
        q = modulimap.cotangent_point_from_json(sec)
        point, info = modulimap.cotangent_to_moduli(q, cfg.step)
        roundtrip = None
    else:
        src = _random_point(cfg, rng)
        q = modulimap.moduli_to_cotangent(src, cfg.step)
        point, info = modulimap.cotangent_to_moduli(q, cfg.step)
        roundtrip = max(
            float(np.abs(point.k - src.k).max()),
            float(np.abs(point.x - src.x).max()),
        )
    payload = {
        "input": modulimap.cotangent_point_to_json(q),
        "output": modulimap.moduli_point_to_json(point),
        "iterations": info.iterations,
        "residual": info.residual,
    }
    if roundtrip is not None:
        payload["roundtrip_error"] = roundtrip
    _write_json(cfg, "psi_inv.json", payload)
    if roundtrip is not None and roundtrip > 1e-8:
        raise NumericFailure(f"inverse round trip error {roundtrip:.3e} > 1e-8")


def cmd_potential(cfg):
    sec = cfg.section("potential")
    x = _section_triple(cfg, sec)
    value = modulimap.kahler_potential(x, cfg.step)
    _write_json(cfg, "potential.json", {"value": value})


def cmd_moment(cfg):
    rng = np.random.default_rng(cfg.seed)
    point = _random_point(cfg, rng)
    mom = modulimap.hyperkahler_moment(point, cfg.step)
    residual = modulimap.complex_moment_residual(point, cfg.step)
    _write_json(cfg, "moment.json", {
        "point": modulimap.moduli_point_to_json(point),
        "moment": modulimap.moment_to_json(mom),
        "complex_moment_residual": residual,
    })
    if residual > 1e-7:
        raise NumericFailure(f"complex moment residual {residual:.3e} > 1e-7")


def cmd_verify_identities(cfg):
    rows = verify.run_identity_suite(cfg.samples, cfg.seed, cfg.step, cfg.n)
    width = max(len(r.name) for r in rows)
    for r in rows:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {r.residual:11.3e} < {r.threshold:g}  {status}")
    _write_json(cfg, "identities.json", {"checks": verify.rows_to_json(rows)})
    bad = [r for r in rows if not r.passed]
    if bad:
        raise NumericFailure(f"{len(bad)} identity check(s) failed")


def cmd_kn_classify(cfg):
    sec = cfg.section("kn-classify")
    if "problem_file" in sec:
        with open(sec["problem_file"]) as fh:
            problem = kempfness.problem_from_json(json.load(fh))
        pdata = sec.get("p")
    elif "weights" in sec:
        problem = kempfness.torus_problem(
            sec["weights"], sec["character"],
            float(sec.get("hbar", 1.0 / (2.0 * np.pi))),
        )
        pdata = sec.get("p")
    else:
        problem = kempfness.torus_problem([[1], [-1]], [1])
        pdata = [[1.0, 0.0], [0.0, 0.0]]
    if pdata is None:
        raise NumericFailure("kn-classify needs a point p in its config section")
    p = np.array([complex(re, im) for re, im in pdata])
    result = kempfness.kn_minimize(problem, p, seed=cfg.seed)
    _write_json(cfg, "kn_classify.json", {
        "problem": kempfness.problem_to_json(problem),
        "p": [[float(v.real), float(v.imag)] for v in p],
        "result": kempfness.result_to_json(result),
    })
    if result.verdict == kempfness.UNDECIDED:
        raise NumericFailure("classifier returned undecided")


def cmd_counterexample(cfg):
    sec = cfg.section("counterexample")
    level = int(sec.get("level", 3))
    monomial_degree = int(sec.get("monomial_degree", 3))
    counterexample.export_csv(
        os.path.join(_ensure_out(cfg), "counterexample.csv"), meta=_meta(cfg)
    )
    grid = counterexample.log_grid()
    omega = counterexample.omega_coefficient(grid)
    mu = counterexample.moment_value(grid)
    empt = counterexample.emptiness_certificate(level)
    domin = counterexample.domination_failure(monomial_degree)
    payload = {
        "omega_min": float(omega.min()),
        "moment_abs_max": float(np.abs(mu).max()),
        "emptiness": {"level": level, "verdict": empt.verdict,
                      "witness_t": empt.witness_t},
        "domination": {"degree": monomial_degree, "verdict": domin.verdict,
                       "witness_radius": domin.witness_radius},
    }
    _write_json(cfg, "counterexample.json", payload)
    checks = [
        omega.min() > 0.0,
        np.abs(mu).max() < 2.0,
        np.abs(mu).max() >= 2.0 - 1e-3,
        (empt.verdict == "empty") == (abs(level) >= 2),
        monomial_degree != 3 or domin.verdict == "fails",
    ]
    if not all(checks):
        raise NumericFailure(f"counterexample invariants violated: {payload}")


def cmd_growth_scan(cfg):
    rng = np.random.default_rng(cfg.seed)
    points = estimates.sample_moduli_points(rng, cfg.samples)
    report = estimates.growth_bound_scan(points, seed=cfg.seed)
    report.write_json(os.path.join(_ensure_out(cfg), "growth_scan.json"))
    report.write_csv(os.path.join(_ensure_out(cfg), "growth_scan.csv"))
    if not report.all_pass():
        raise NumericFailure(f"growth bound failed on {len(report.failures)} samples")


def cmd_properness_scan(cfg):
    sec = cfg.section("properness-scan")
    radii = sec.get("radii", [0.5, 1.0, 1.5, 2.0])
    report = estimates.properness_scan(
        radii, samples_per_radius=int(sec.get("samples_per_radius", 24)),
        seed=cfg.seed,
    )
    report.write_json(os.path.join(_ensure_out(cfg), "properness_scan.json"))
    report.write_csv(os.path.join(_ensure_out(cfg), "properness_scan.csv"))
    if not report.summary.get("min_rho_monotone", False):
        raise NumericFailure("minimum potential not monotone in radius")


def cmd_dominate_scan(cfg):
    report = estimates.domination_scan(seed=cfg.seed)
    report.write_json(os.path.join(_ensure_out(cfg), "dominate_scan.json"))
    report.write_csv(os.path.join(_ensure_out(cfg), "dominate_scan.csv"))
    if not all(report.summary["decreasing"].values()):
        raise NumericFailure("domination ratios not decreasing for some observable")


def cmd_report(cfg):
    out = _ensure_out(cfg)
    collected = {}
    for name in sorted(os.listdir(out)):
        if name.endswith(".json") and name != "report.json":
            with open(os.path.join(out, name)) as fh:
                collected[name] = json.load(fh)
    lines = ["# nahmkn run report", ""]
    for name, data in collected.items():
        summary = data.get("summary", {})
        lines.append(f"- `{name}`: " + (json.dumps(summary, sort_keys=True)
                                        if summary else "ok"))
    with open(os.path.join(out, "report.md"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    _write_json(cfg, "report.json", {"artifacts": sorted(collected)})


COMMANDS = {
    "reduced-flow": cmd_reduced_flow,
    "gauge-fix": cmd_gauge_fix,
    "psi": cmd_psi,
    "psi-inv": cmd_psi_inv,
    "potential": cmd_potential,
    "moment": cmd_moment,
    "verify-identities": cmd_verify_identities,
    "kn-classify": cmd_kn_classify,
    "counterexample": cmd_counterexample,
    "growth-scan": cmd_growth_scan,
    "properness-scan": cmd_properness_scan,
    "dominate-scan": cmd_dominate_scan,
    "report": cmd_report,
}


_ARTIFACT_HELP = {
    "reduced-flow": "reduced_flow.csv (t, P{1,2,3}_{ij}_{re,im} entry columns) "
                    "and reduced_flow.json (status, residuals, conserved drift)",
    "gauge-fix": "gauge_fix.csv (t, k_{ij}_{re,im}) and gauge_fix.json "
                 "(round-trip and endpoint errors)",
    "psi": "psi.json (input point and image, matrices as [re,im] pairs)",
    "psi-inv": "psi_inv.json (preimage, Newton iterations, residual)",
    "potential": "potential.json (quadrature value)",
    "moment": "moment.json (moment pairs and complex-moment residual)",
    "verify-identities": "identities.json (check, residual, threshold, pass)",
    "kn-classify": "kn_classify.json (problem, verdict, witness, residuals)",
    "counterexample": "counterexample.csv (t, omega_coefficient, moment_value, "
                      "ratio_deg{m}) and counterexample.json (verdicts)",
    "growth-scan": "growth_scan.{json,csv} (desc, lhs, rhs, pass, rho, slacks)",
    "properness-scan": "properness_scan.{json,csv} (rho per radius sample, "
                       "beta fit, monotonicity verdict)",
    "dominate-scan": "dominate_scan.{json,csv} (window maxima per observable)",
    "report": "report.md and report.json summarizing prior artifacts",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nahmkn",
        description="Nahm moduli coordinates, Kempf-Ness classification, "
                    "and growth-estimate scans",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(
            name, help=f"run the {name} experiment",
            epilog=f"artifacts: {_ARTIFACT_HELP[name]}",
        )
        p.add_argument("--config", help="JSON config file (see README schema)")
        p.add_argument("--seed", type=int, help="RNG seed recorded in artifacts")
        p.add_argument("--out", help="output directory")
        p.add_argument("--n", type=int, choices=(2, 3), help="group rank")
        p.add_argument("--step", type=float, help="ODE grid step (1/N, N even)")
        p.add_argument("--samples", type=int, help="sample count for sweeps")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": args.seed, "out": args.out, "n": args.n,
        "step": args.step, "samples": args.samples,
    }
    try:
        cfg = RunConfig.load(args.config, overrides)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](cfg)
    except (NumericFailure, nahmflow.ResidualError, modulimap.DomainError,
            modulimap.NoPreimageError, liecore.BranchAmbiguityError,
            ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
