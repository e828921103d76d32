"""Command-line orchestration of the verification suites.

One JSON config file holds per-suite sections; flags override file values
(flag > file > default).  Every run echoes its fully resolved configuration
into the artifact directory, writes machine-readable results (JSON, plus
CSV where there are series), and exits nonzero iff an asserted criterion
failed.  ``report`` renders previously written summaries without
recomputation.  The output root comes from --out, then the WAVE4D_OUT
environment variable, then ./wave4d_out.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

SUITES = ("states", "spectrum", "interactions", "modulate", "energy",
          "evolve", "shoot")

_SUITE_PROPERTIES = {
    "states": {
        "r_max": {"type": "number"}, "grid_sizes": {
            "type": "array", "items": {"type": "integer"}},
        "kelvin_points": {"type": "integer"},
        "seed": {"type": "integer"},
    },
    "spectrum": {
        "r_max": {"type": "number"}, "n": {"type": "integer"},
        "k": {"type": "integer"}, "profile": {"type": "string"},
        "seed": {"type": "integer"},
    },
    "interactions": {
        "profile": {"enum": ["surrogate", "ground"]},
        "speeds": {"type": "array", "items": {"type": "number"}},
        "times": {"type": "array", "items": {"type": "number"}},
        "nodes": {"type": "integer"}, "r_max": {"type": "number"},
        "seed": {"type": "integer"},
    },
    "modulate": {
        "pair_file": {"type": "string"},
        "profile": {"enum": ["surrogate", "ground"]},
        "speeds": {"type": "array", "items": {"type": "number"}},
        "time": {"type": "number"}, "nodes": {"type": "integer"},
        "r_max": {"type": "number"},
        "seed": {"type": "integer"},
    },
    "energy": {
        "speeds": {"type": "array", "items": {"type": "number"}},
        "gamma": {"type": "number"}, "samples": {"type": "integer"},
        "seed": {"type": "integer"}, "ell": {"type": "number"},
    },
    "evolve": {
        "ell": {"type": "number"}, "t1": {"type": "number"},
        "h": {"type": "number"}, "cadence": {"type": "number"},
        "c0": {"type": "number"},
        "seed": {"type": "integer"},
    },
    "shoot": {
        "T": {"type": "number"}, "t_end": {"type": "number"},
        "bracket": {"type": "array", "items": {"type": "number"}},
        "h": {"type": "number"},
        "seed": {"type": "integer"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        suite: {"type": "object", "additionalProperties": False,
                "properties": props}
        for suite, props in _SUITE_PROPERTIES.items()
    },
}

DEFAULTS = {
    "states": dict(r_max=20.0, grid_sizes=[200, 400, 800],
                   kelvin_points=1000, seed=7),
    "spectrum": dict(r_max=30.0, n=3000, k=3, profile="ground", seed=7),
    "interactions": dict(profile="surrogate", speeds=[-0.5, 0.5],
                         times=[10.0, 20.0, 40.0, 80.0], nodes=8,
                         r_max=40.0, seed=7),
    "modulate": dict(pair_file="", profile="surrogate", speeds=[-0.5, 0.5],
                     time=20.0, nodes=8, r_max=30.0, seed=7),
    "energy": dict(speeds=[-0.5, 0.5], gamma=0.05, samples=40, seed=12345,
                   ell=0.0),
    "evolve": dict(ell=0.4, t1=5.0, h=0.1, cadence=0.5, c0=40.0, seed=7),
    "shoot": dict(T=20.0, t_end=6.0, bracket=[-6e-3, 6e-3], h=0.12, seed=7),
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(data),
                    key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: "
                f"{e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))
    return data


def resolve(suite: str, file_cfg: dict, overrides: dict) -> dict:
    cfg = dict(DEFAULTS[suite])
    cfg.update(file_cfg.get(suite, {}))
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True,
                  default=_json_default)
        fh.write("\n")


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def criterion(name, value, threshold, kind="le") -> dict:
    ops = {"le": lambda v, t: v <= t, "ge": lambda v, t: v >= t,
           "eq": lambda v, t: v == t}
    return dict(name=name, value=value, threshold=threshold, kind=kind,
                passed=bool(ops[kind](value, threshold)))


def finish(outdir: Path, suite: str, cfg: dict, results: dict,
           criteria: list) -> int:
    write_json(outdir / f"{suite}_resolved_config.json", cfg)
    write_json(outdir / f"{suite}_results.json", results)
    summary = dict(suite=suite, criteria=criteria,
                   all_passed=all(c["passed"] for c in criteria))
    write_json(outdir / f"{suite}_summary.json", summary)
    for c in criteria:
        tag = "PASS" if c["passed"] else "FAIL"
        print(f"[{tag}] {c['name']}: value={c['value']:.6g} "
              f"{c['kind']} {c['threshold']:.6g}")
    return 0 if summary["all_passed"] else 1


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def run_states(cfg: dict, outdir: Path) -> int:
    from .fitting import check_decay
    from .states import (GENERATOR_IDS, ground_state, kelvin,
                         radial_residual_norm, surrogate_excited_state,
                         symmetry_generator)

    W = ground_state()
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    residuals = [radial_residual_norm(W, cfg["r_max"], n)
                 for n in cfg["grid_sizes"]]
    orders = [math.log2(residuals[i] / residuals[i + 1])
              for i in range(len(residuals) - 1)]
    rows.append(("stationary_residual_order", min(orders)))

    KW = kelvin(W)
    pts = rng.normal(scale=3.0, size=(cfg["kelvin_points"], 4))
    ref = 8.0 * W.evaluate(8.0 * pts)
    kel_err = float(np.max(np.abs(KW.evaluate(pts) - ref)))
    rows.append(("kelvin_identity_max_err", kel_err))

    Q = surrogate_excited_state()
    psi = symmetry_generator(Q, "conformal_4")
    radii = [10.0 * 2**k for k in range(5)]
    fits = dict(W=check_decay(W, 2.0, radii),
                Q=check_decay(Q, 3.0, radii),
                psi=check_decay(psi, 2.0, radii))
    for name, expected in (("W", -2.0), ("Q", -3.0), ("psi", -2.0)):
        rows.append((f"decay_slope_{name}", fits[name].slope))

    results = dict(rows=[dict(name=n, value=v) for n, v in rows],
                   residuals=residuals,
                   decay=({k: vars(f) for k, f in fits.items()}))
    crit = [
        criterion("residual order >= 1.8", min(orders), 1.8, "ge"),
        criterion("kelvin identity <= 1e-10", kel_err, 1e-10, "le"),
        criterion("W decay slope within 0.15 of -2",
                  abs(fits["W"].slope + 2.0), 0.15, "le"),
        criterion("surrogate decay slope within 0.15 of -3",
                  abs(fits["Q"].slope + 3.0), 0.15, "le"),
        criterion("slow kernel decay slope within 0.15 of -2",
                  abs(fits["psi"].slope + 2.0), 0.15, "le"),
    ]
    write_csv(outdir / "states_residuals.csv", ["n", "residual"],
              list(zip(cfg["grid_sizes"], residuals)))
    return finish(outdir, "states", cfg, results, crit)


def run_spectrum(cfg: dict, outdir: Path) -> int:
    from .spectrum import (assemble_radial, kernel_count, negative_spectrum,
                           shooting_rate, verify_exponential_decay)
    from .states import ground_state, symmetry_generator

    if cfg["profile"] != "ground":
        raise ConfigError("the radial sector accepts the ground state only; "
                          "the surrogate is not radially symmetric")
    W = ground_state()
    op = assemble_radial(W, r_max=cfg["r_max"], n=cfg["n"])
    res = negative_spectrum(op, k=cfg["k"])
    lam_shoot = shooting_rate(W)
    fit = verify_exponential_decay(res.fields[0], res.lams[0])
    kc = kernel_count(op, [symmetry_generator(W, "scaling")])
    results = dict(eigenvalues=res.eigenvalues, lams=res.lams,
                   residuals=res.residuals, shooting=lam_shoot,
                   decay_fit=vars(fit), kernel=kc)
    crit = [
        criterion("exactly one negative eigenvalue", res.count, 1, "eq"),
        criterion("grid vs shooting rate <= 1%",
                  abs(res.lams[0] - lam_shoot) / lam_shoot, 0.01, "le"),
        criterion("eigenfield decay rate within 10%",
                  abs(-fit.slope - res.lams[0]) / res.lams[0], 0.10, "le"),
        criterion("one near-zero mode", kc["count"], 1, "eq"),
        criterion("near-zero mode aligned with scaling generator",
                  kc["alignments"][0], 0.99, "ge"),
    ]
    return finish(outdir, "spectrum", cfg, results, crit)


def _interaction_config(profile: str, speeds):
    from .interactions import two_soliton_config
    from .states import ground_state, surrogate_excited_state, \
        symmetric_generator_ids, symmetry_generator

    if profile == "surrogate":
        Q = surrogate_excited_state()
        slow = symmetry_generator(Q, "conformal_4")
        kern = [symmetry_generator(Q, g) for g in ("scaling", "translation_1")]
    else:
        Q = ground_state()
        slow = symmetry_generator(Q, "scaling")
        kern = [symmetry_generator(Q, "translation_1")]
    return two_soliton_config(Q, slow, kern, speeds=tuple(speeds))


def run_interactions(cfg: dict, outdir: Path) -> int:
    from .interactions import verify_G_norms
    from .quadrature import QuadratureSpec

    mcfg = _interaction_config(cfg["profile"], cfg["speeds"])
    spec = QuadratureSpec(scheme="fixed", nodes=cfg["nodes"],
                          r_max=cfg["r_max"])
    table = verify_G_norms(mcfg, cfg["times"], spec)
    fit = table["g1_fit"]
    rows = [(r["t"], r["g1"], math.exp(fit.intercept) * r["t"] ** fit.slope,
             r["g1"] - math.exp(fit.intercept) * r["t"] ** fit.slope)
            for r in table["rows"]]
    write_csv(outdir / "interactions_g1.csv",
              ["t", "value", "fitted_model", "residual"], rows)
    lo, hi = (-4.5, -3.5) if cfg["profile"] == "surrogate" else (-2.5, -1.5)
    results = dict(rows=table["rows"], g1_slope=fit.slope,
                   g1_r2=fit.r_squared,
                   g3_constant=table.get("g3_constant"))
    crit = [
        criterion(f"G1 slope >= {lo}", fit.slope, lo, "ge"),
        criterion(f"G1 slope <= {hi}", fit.slope, hi, "le"),
    ]
    return finish(outdir, "interactions", cfg, results, crit)


def run_modulate(cfg: dict, outdir: Path) -> int:
    from .fields import load_pair
    from .modulation import decompose, exp_direction_family
    from .quadrature import QuadratureSpec
    from .spectrum import assemble_radial, negative_spectrum
    from .states import ground_state

    mcfg = _interaction_config(cfg["profile"], cfg["speeds"])
    spec = QuadratureSpec(scheme="fixed", nodes=cfg["nodes"],
                          r_max=cfg["r_max"])
    op = assemble_radial(ground_state(), r_max=25.0, n=1500)
    res = negative_spectrum(op, k=1)
    dirs = exp_direction_family(mcfg, [(res.lams[0], res.fields[0])])
    if not cfg["pair_file"]:
        raise ConfigError("modulate needs pair_file (field container with "
                          "first/second components)")
    u = load_pair(cfg["pair_file"])
    state = decompose(u, mcfg, cfg["time"], spec, directions=dirs)
    results = dict(t=state.t, a=state.a.tolist(), b=state.b.tolist(),
                   z_plus=state.z_plus.tolist(),
                   z_minus=state.z_minus.tolist(), c=state.c.tolist(),
                   remainder_norm=state.remainder_norm,
                   gram_cond=state.gram_cond)
    write_json(outdir / "modulation_state.json", results)
    crit = [criterion("gram condition below guard", state.gram_cond,
                      1e9, "le")]
    return finish(outdir, "modulate", cfg, results, crit)


def run_energy(cfg: dict, outdir: Path) -> int:
    from .boosts import build_exp_directions
    from .energy import CutoffChiN, WeightZeta, coercivity_probe, \
        zeta_smallness
    from .quadrature import QuadratureSpec
    from .spectrum import assemble_radial, negative_spectrum
    from .states import ground_state, symmetry_generator

    W = ground_state()
    op = assemble_radial(W, r_max=25.0, n=1500)
    res = negative_spectrum(op, k=1)
    lam, Y = res.lams[0], res.fields[0]
    dirs = build_exp_directions(Y, lam, cfg["ell"])
    kf = [symmetry_generator(W, "scaling"),
          symmetry_generator(W, "translation_1")]
    rep = coercivity_probe(cfg["ell"], W, kf, dirs,
                           n_samples=cfg["samples"], seed=cfg["seed"],
                           spec=QuadratureSpec(scheme="fixed", nodes=8,
                                               r_max=25.0),
                           negative_field=Y)
    rep_w = coercivity_probe(cfg["ell"], W, kf, dirs,
                             n_samples=cfg["samples"], seed=cfg["seed"],
                             gamma=cfg["gamma"],
                             spec=QuadratureSpec(scheme="fixed", nodes=8,
                                                 r_max=25.0))
    chi = CutoffChiN(tuple(cfg["speeds"]))
    zs = {t: zeta_smallness(chi, cfg["gamma"], t)
          for t in (1e3, 2e3, 4e3, 8e3)}
    reports = [dict(t=t, ell=cfg["ell"], c_min=rep.c_min,
                    weighted_c_min=rep_w.c_min,
                    negative_control=rep.negative_control,
                    sup_omega=z["sup_omega"], sup_mismatch=z["sup_mismatch"])
               for t, z in zs.items()]
    write_json(outdir / "energy_reports.json", reports)
    results = dict(c_min=rep.c_min, weighted_c_min=rep_w.c_min,
                   negative_control=rep.negative_control,
                   delta=chi.delta, reports=reports)
    crit = [
        criterion("projected coercivity minimum > 0", rep.c_min, 0.0, "ge"),
        criterion("weighted coercivity minimum > 0", rep_w.c_min, 0.0, "ge"),
        criterion("negative control < 0", rep.negative_control, 0.0, "le"),
    ]
    return finish(outdir, "energy", cfg, results, crit)


def run_evolve(cfg: dict, outdir: Path) -> int:
    from .boosts import pair_vector
    from .evolver import (GridBasis, bootstrap_margins, default_grid_for,
                          evolve, soliton_background)
    from .interactions import MultiSolitonConfig
    from .spectrum import assemble_radial, negative_spectrum
    from .states import ground_state, symmetry_generator

    W = ground_state()
    op = assemble_radial(W, r_max=25.0, n=1500)
    res = negative_spectrum(op, k=1)
    ell = cfg["ell"]
    mcfg = MultiSolitonConfig(
        profiles=[W], speeds=[ell], signs=[1], a=np.zeros(1),
        b=np.zeros((1, 1)),
        slow=[symmetry_generator(W, "scaling")],
        kernels=[[symmetry_generator(W, "translation_1")]])
    grid = default_grid_for(ell, cfg["t1"], margin=10.0, h=cfg["h"])
    basis = GridBasis(mcfg, grid, [(res.lams[0], res.fields[0])])
    series = evolve(pair_vector(W, ell, 1), 0.0, cfg["t1"], grid,
                    basis=basis, cadence=cfg["cadence"],
                    background=soliton_background(mcfg, grid))
    margins = bootstrap_margins(series, cfg["c0"])
    speed = float(np.polyfit(series.times, series.centers, 1)[0])
    rows = list(zip(series.times, series.energy, series.momentum,
                    series.deviation, series.centers))
    write_csv(outdir / "evolve_monitors.csv",
              ["t", "energy", "momentum", "deviation", "center"], rows)
    results = dict(times=series.times, drift_energy=series.drift("energy"),
                   drift_momentum=series.drift("momentum"),
                   speed=speed, status=series.status,
                   bootstrap=margins)
    crit = [
        criterion("energy drift per 10 units <= 1e-3",
                  series.drift("energy") * 10.0 / cfg["t1"], 1e-3, "le"),
        criterion("run completed", 1 if series.status == "done" else 0, 1,
                  "eq"),
    ]
    if abs(ell) > 0:
        crit.append(criterion("center speed within 1%",
                              abs(speed - ell) / abs(ell), 0.01, "le"))
    return finish(outdir, "evolve", cfg, results, crit)


def run_shoot(cfg: dict, outdir: Path) -> int:
    from .evolver import shooting_experiment

    rep = shooting_experiment(T=cfg["T"], t_end=cfg["t_end"],
                              bracket=tuple(cfg["bracket"]), h=cfg["h"])
    write_json(outdir / "shoot_report.json", rep)
    crit = [
        criterion("optimum persists >= 2x bracket ends", rep["gain"], 2.0,
                  "ge"),
    ]
    return finish(outdir, "shoot", cfg, rep, crit)


def run_report(outdir: Path) -> int:
    """Deterministic re-rendering of previously written summaries."""
    outdir.mkdir(parents=True, exist_ok=True)
    files = sorted(outdir.glob("*_summary.json"))
    lines = []
    status = 0
    for f in files:
        with open(f) as fh:
            s = json.load(fh)
        for c in s["criteria"]:
            tag = "PASS" if c["passed"] else "FAIL"
            lines.append(f"{s['suite']:13s} {tag} {c['name']}")
            if not c["passed"]:
                status = 1
    table = "\n".join(lines) + ("\n" if lines else "")
    sys.stdout.write(table)
    (outdir / "report.txt").write_text(table)
    return status


RUNNERS = dict(states=run_states, spectrum=run_spectrum,
               interactions=run_interactions, modulate=run_modulate,
               energy=run_energy, evolve=run_evolve, shoot=run_shoot)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wave4d",
        description="verification suites for the multi-soliton laboratory")
    p.add_argument("--config", help="JSON config with per-suite sections")
    p.add_argument("--out", help="artifact root (or WAVE4D_OUT env var)")
    sub = p.add_subparsers(dest="suite", required=True)
    for s in SUITES:
        sp = sub.add_parser(s)
        for key, schema in _SUITE_PROPERTIES[s].items():
            kind = schema.get("type", "")
            if kind == "number":
                sp.add_argument(f"--{key}", type=float)
            elif kind == "integer":
                sp.add_argument(f"--{key}", type=int)
            elif kind == "array":
                sp.add_argument(f"--{key}", type=str,
                                help="comma-separated values")
            else:
                sp.add_argument(f"--{key}", type=str)
    sub.add_parser("report")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    outdir = Path(args.out or os.environ.get("WAVE4D_OUT", "wave4d_out"))
    if args.suite == "report":
        return run_report(outdir)
    try:
        file_cfg = load_config(args.config)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2
    overrides = {}
    for key, schema in _SUITE_PROPERTIES[args.suite].items():
        val = getattr(args, key, None)
        if val is None:
            continue
        if schema.get("type") == "array":
            item = schema["items"]["type"]
            cast = float if item == "number" else int
            val = [cast(v) for v in str(val).split(",") if v]
        overrides[key] = val
    cfg = resolve(args.suite, file_cfg, overrides)
    try:
        return RUNNERS[args.suite](cfg, outdir)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
