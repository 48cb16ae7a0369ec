"""Command-line interface: ``upfn verify | simulate | constants | select-bandwidth | entropy``.

Exit codes: 0 when every asserted check passes, 2 when a check fails,
3 on a hypothesis or contract error (bad input, missing constant, caps).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import UpfnError

EXIT_OK, EXIT_FAIL, EXIT_CONTRACT = 0, 2, 3


# ---------------------------------------------------------------------- helpers
def _load_json(path) -> Dict:
    return json.loads(Path(path).read_text())


def _write_json(path, data) -> None:
    from .verify import _plain

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(_plain(data), indent=2, sort_keys=True))


def _parse_overrides(items: Sequence[str]) -> Dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise UpfnError(f"override {item!r} is not of the form key=value")
        out[key.strip()] = val.strip()
    return out


def _config_from(data: Dict, base_dir: Path, overrides: Dict[str, str]):
    from .upper_functions import LambdaTable, UpperFnConfig

    data = dict(data)
    for key, val in overrides.items():
        data[key] = val
    for key in ("lambda_star", "lambda_d_star"):
        v = data.get(key)
        if isinstance(v, str):
            p = Path(v)
            data[key] = LambdaTable.from_csv(p if p.is_absolute() else base_dir / p)
    for key, val in list(data.items()):
        if isinstance(val, str) and key not in ("cmu_variant",):
            try:
                data[key] = float(val)
            except ValueError:
                pass
    return UpperFnConfig(**data)


def bump(x: np.ndarray, amplitude: float = 0.25, radius: float = 0.4) -> np.ndarray:
    """``amplitude * exp(1 - 1/(1 - (|x|/radius)^2))`` inside the ball, 0 outside
    (the peak value is ``amplitude``)."""
    r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1) / radius ** 2
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
    return out


# ---------------------------------------------------------------------- plots
def _svg_plots(report, sc, out: Path) -> List[Path]:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - optional dependency
        raise UpfnError("--svg needs matplotlib (pip install 'artifact[plots]')") from exc
    from .kernel import get_kernel
    from .verify import exceedance_curve, sample_norms

    written = []
    norms = sample_norms(sc, get_kernel(sc.kernel, sc.cfg.d))["norms"]
    fig, ax = plt.subplots(figsize=(6, 4))
    for k in range(len(sc.bandwidths)):
        col = norms[:, k]
        levels = np.linspace(0.0, 1.2 * col.max(), 80)
        cur = exceedance_curve(sc, k, levels, norms)
        line, = ax.step(levels, cur["empirical"], where="post", lw=1)
        ax.plot(levels, cur["reference"], ls="--", lw=0.8, color=line.get_color())
    ax.set_xlabel("u")
    ax.set_ylabel("P(||xi_h||_p >= u)")
    ax.set_yscale("log")
    ax.set_ylim(1.0 / (10 * sc.replicates), 1.5)
    fig.tight_layout()
    path = out / "exceedance.svg"
    fig.savefig(path)
    plt.close(fig)
    written.append(path)
    if report.results:
        fig, ax = plt.subplots(figsize=(6, 4))
        for name, res in report.results.items():
            ax.plot(range(len(res.psi_values)), res.psi_values, marker="o", label=name)
        ax.set_xlabel("bandwidth index")
        ax.set_ylabel("upper function value")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        path = out / "psi_table.svg"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)
    return written


# ---------------------------------------------------------------------- commands
def cmd_verify(args) -> int:
    from .verify import Scenario, run_scenario

    sc = Scenario.from_json(args.scenario)
    if args.strict:
        sc.strict = True
    if args.replicates:
        sc.replicates = args.replicates
    report = run_scenario(sc)
    out = report.write(args.out)
    if args.svg:
        _svg_plots(report, sc, out)
    for name, res in report.results.items():
        print(f"{name:10s} E_hat={res.E_hat:.6g} bound={res.bound:.6g} "
              f"{'pass' if res.passed else 'FAIL'}")
    for name, res in report.oracles.items():
        print(f"{name:10s} oracle {'pass' if res.passed else 'FAIL'}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_simulate(args) -> int:
    from .field import FieldSimulator, EvalGrid, lp_norm, write_samples
    from .kernel import get_kernel
    from .verify import Scenario, validate

    sc = Scenario.from_json(args.scenario)
    if args.replicates:
        sc.replicates = args.replicates
    K = get_kernel(sc.kernel, sc.cfg.d)
    validate(sc, K)
    grid = EvalGrid(sc.cfg.b, sc.grid_n, sc.cfg.d)
    sim = FieldSimulator(K, sc.bandwidths, grid, sc.delta)
    sample = sim.field_sample(sc.seed, range(sc.replicates))
    norms = lp_norm(sample.values, grid.cell_volume, sc.cfg.p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "norms.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "bandwidth", "lp_norm"])
        for r in range(norms.shape[0]):
            for k, h in enumerate(sc.bandwidths):
                w.writerow([r, h.name or f"h{k}", repr(float(norms[r, k]))])
    if args.dump:
        write_samples(out / "samples.bin", sample)
    _write_json(out / "simulation.json", {"delta": sim.delta, "lattice_cells": sim.geometry.size,
                                          "replicates": sc.replicates, "seed": sc.seed})
    print(f"wrote {norms.shape[0]} x {norms.shape[1]} norms to {out / 'norms.csv'}")
    return EXIT_OK


def cmd_constants(args) -> int:
    from .kernel import get_kernel
    from .upper_functions import constants_report

    path = Path(args.config)
    data = _load_json(path)
    kernel = args.kernel or data.pop("kernel", "triangle")
    data.pop("kernel", None)
    cfg = _config_from(data, path.parent, _parse_overrides(args.override))
    K = get_kernel(kernel, cfg.d)
    text = constants_report(cfg, K).to_json(indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_select_bandwidth(args) -> int:
    from .bandwidth import (GridFunction, NikolskiiParams, class_h_functional,
                            nikolskii_class_bound, nikolskii_select)
    from .kernel import get_kernel

    path = Path(args.config)
    data = _load_json(path)
    np_ = NikolskiiParams(tuple(data["beta"]), tuple(data["r"]), tuple(data["L"]),
                          ell=data.get("ell", 1), p=data.get("p", 1.0),
                          C_tilde=data.get("C_tilde", 1.0), w=data.get("w", "quartic"))
    fspec = data.get("function", {"type": "bump"})
    b = fspec.get("b", 0.5)
    if fspec["type"] == "bump":
        f = GridFunction.sample(lambda x: bump(x, fspec.get("amplitude", 0.25),
                                               fspec.get("radius", 0.4)),
                                fspec.get("n", 2048), b, np_.d)
    elif fspec["type"] == "csv":
        f = GridFunction.from_csv(path.parent / fspec["path"])
    else:
        raise UpfnError(f"unknown function type {fspec['type']!r}")
    K = get_kernel(f"w_ell:{np_.w}:{np_.ell}", np_.d)
    res = nikolskii_select(np_, f, K, data["eps"], data["hbar"],
                           min_support_cells=data.get("min_support_cells", 4.0))
    tau = data.get("tau", 0.5)
    value = class_h_functional(res.bandwidth, tau)
    bound = nikolskii_class_bound(np_, tau, f.b)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res.bandwidth.to_csv(out / "bandwidth.csv")
    summary = {"S_eps": list(res.S), "s_max": list(res.s_max), "class_functional": value,
               "class_bound": bound, "within_class": bool(value <= bound),
               "halo_fraction": float(res.halo.mean()), "notes": res.notes}
    _write_json(out / "selection.json", summary)
    print(f"S_eps={res.S} class functional {value:.6g} <= {bound:.6g}: {value <= bound}")
    return EXIT_OK if value <= bound else EXIT_FAIL


def _parse_class(spec: str):
    """``ss:gamma=0.75,m=2,budget=1000`` or ``q:kernel=triangle,h=0.1,r=2,budget=600``."""
    kind, _, rest = spec.partition(":")
    params: Dict[str, object] = {}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        try:
            params[k.strip()] = float(v) if any(c in v for c in ".e") else int(v)
        except ValueError:
            params[k.strip()] = v.strip()
    return kind.strip(), params


def cmd_entropy(args) -> int:
    from .entropy import (calibrate_lambda_d_star_table, calibrate_lambda_star_table,
                          entropy_profile, fit_entropy_slope, sample_q_class, sample_ss_ball)
    from .kernel import get_kernel

    if args.calibrate:
        budget = args.budget or 512
        if args.calibrate == "lambda_star":
            table = calibrate_lambda_star_table(args.domain_length, budget=budget, seed=args.seed)
        else:
            table = calibrate_lambda_d_star_table(args.domain_length, budget=budget,
                                                  seed=args.seed)
        table.to_csv(args.out)
        print(f"wrote {len(table.values)} entries to {args.out} ({table.provenance})")
        return EXIT_OK
    if not args.cls:
        raise UpfnError("entropy needs --class or --calibrate")
    kind, params = _parse_class(args.cls)
    seed = int(params.get("seed", args.seed))
    budget = int(params.get("budget", args.budget or 1000))
    n_grid = int(params.get("n_grid", 256))
    if kind == "ss":
        gamma = float(params["gamma"])
        cloud = sample_ss_ball(gamma, float(params.get("m", 2)), (0.0, float(params.get("length", 1.0))),
                               budget, seed=seed, n_grid=n_grid, R=float(params.get("R", 1.0)))
        target = 1 / gamma
    elif kind == "q":
        K = get_kernel(str(params.get("kernel", "triangle")))
        cloud = sample_q_class(K, float(params["h"]), int(params["r"]), budget, seed=seed,
                               n_grid=n_grid)
        target = 1 / float(params["omega"]) if "omega" in params else None
    else:
        raise UpfnError(f"unknown class {kind!r}; use ss:... or q:...")
    deltas, counts = entropy_profile(cloud)
    fit = fit_entropy_slope(deltas, counts, budget)
    meta = {"class": args.cls, "slope": repr(fit.slope), "intercept": repr(fit.intercept),
            "residual": repr(fit.residual), "fit_points": fit.n_points}
    if target is not None:
        meta["target_slope"] = repr(target)
    meta["provenance"] = "lower-bound heuristic"
    with open(args.out, "w", newline="") as fh:
        for k, val in meta.items():
            fh.write(f"# {k}={val}\n")
        w = csv.writer(fh)
        w.writerow(["delta", "N", "lnN"])
        for d, n in zip(deltas, counts):
            w.writerow([repr(float(d)), int(n), repr(math.log(n))])
    print(f"slope {fit.slope:.4g}" + (f" (target {target:.4g})" if target else ""))
    return EXIT_OK


# ---------------------------------------------------------------------- parser
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="upfn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification scenario")
    v.add_argument("--scenario", required=True)
    v.add_argument("--out", required=True)
    v.add_argument("--svg", action="store_true", help="also write static SVG plots")
    v.add_argument("--strict", action="store_true",
                   help="refuse when the parameter relation needed by psi fails")
    v.add_argument("--replicates", type=int, help="override the replicate count")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="simulate fields and write their L_p norms")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--replicates", type=int)
    s.add_argument("--dump", action="store_true", help="also write the raw binary samples")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("constants", help="compute every constant as JSON")
    c.add_argument("--config", required=True)
    c.add_argument("--kernel")
    c.add_argument("--override", action="append", default=[],
                   help="key=value, e.g. lambda_star=table.csv")
    c.add_argument("--out")
    c.set_defaults(func=cmd_constants)

    b = sub.add_parser("select-bandwidth", help="pointwise bandwidth selector")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_select_bandwidth)

    e = sub.add_parser("entropy", help="entropy profiles and lambda calibration tables")
    e.add_argument("--class", dest="cls", help="ss:gamma=..,m=.. or q:kernel=..,h=..,r=..")
    e.add_argument("--calibrate", choices=("lambda_star", "lambda_d_star"))
    e.add_argument("--domain-length", type=float, default=3.0)
    e.add_argument("--budget", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_entropy)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UpfnError, KeyError, TypeError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
