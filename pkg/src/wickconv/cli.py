"""Command-line runner: ``wickconv SUBCOMMAND --config run.toml --out DIR``.

Exit codes: 0 success or criterion holds, 2 criterion fails (or the series
diverges), 3 inconclusive, 64 config error, 65 computation error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod, convergence, fields, serieslab, spectral, weights, wick
from ._numerics import default_threads
from .config import ConfigError, RunConfig

EXIT_OK, EXIT_FAILS, EXIT_INCONCLUSIVE = 0, 2, 3
EXIT_CONFIG, EXIT_COMPUTE = 64, 65

_STATUS_EXIT = {
    convergence.HOLDS: EXIT_OK, convergence.FAILS: EXIT_FAILS,
    convergence.INCONCLUSIVE: EXIT_INCONCLUSIVE,
    serieslab.CONVERGES: EXIT_OK, serieslab.DIVERGES: EXIT_FAILS,
    "pass": EXIT_OK, "fail": EXIT_FAILS, "ok": EXIT_OK,
}


class BuildError(ValueError):
    """A validated config describes objects that cannot be constructed."""


@dataclass
class Report:
    status: str
    summary: dict
    tables: dict[str, tuple[list[str], list[tuple]]] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return _STATUS_EXIT.get(self.status, EXIT_INCONCLUSIVE)


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------

def _grid(spec: dict) -> np.ndarray:
    return np.logspace(math.log10(spec["min"]), math.log10(spec["max"]), spec["num"])


def _sequence(spec: dict, base: Path) -> weights.WeightSequence:
    spec = dict(spec)
    if spec.get("path"):
        spec["path"] = str((base / spec["path"]).resolve())
    return weights.WeightSequence.from_config(spec)


def _space(space: dict, base: Path):
    if space["kind"] == "young":
        pair = weights.YoungWeightPair(weights.WeightFunction.from_config(space["alpha"]),
                                       weights.WeightFunction.from_config(space["beta"]),
                                       space["h"])
        a, b = weights.sequences_from_young(pair, space["k_max"])
        return a, b
    return _sequence(space["a"], base), _sequence(space["b"], base)


def _model(spec: dict) -> fields.TwoPointModel:
    return fields.TwoPointModel.from_config(spec)


def _gaussian(spec: dict) -> fields.GaussianSpec:
    c = np.asarray(spec["center_re"]) + 1j * np.asarray(spec["center_im"])
    return fields.GaussianSpec(c, spec["nu"])


# ---------------------------------------------------------------------------
# subcommands: each returns a zero-argument computation
# ---------------------------------------------------------------------------

def build_weights(cfg: RunConfig, threads: int):
    a, b = _space(cfg["space"], cfg.base_dir)
    opts = cfg["weights"]

    def compute() -> Report:
        rows, summary, ok = [], {}, True
        for name, seq in (("a", a), ("b", b)):
            km = opts["validate_k_max"]
            if seq.is_table:
                km = min(km, seq.k_max)
            gs = weights.validate_gs(seq, k_max=km)
            summary[name] = {
                "kind": seq.kind, "log_convex": gs.log_convex,
                "first_violation": gs.first_violation, "nondecreasing": gs.nondecreasing,
                "submultiplicative": gs.submult.ok, "C": gs.submult.C, "h": gs.submult.h,
                "k_max": gs.k_max,
            }
            ok = ok and gs.log_convex and gs.submult.ok
            ind = weights.IndicatorFunction(seq)
            for r in opts["r"]:
                v = ind.evaluate(r)
                rows.append((name, r, v.log_value, v.argmax, "truncated" if v.truncated else ""))
        cols = ["sequence", "r", "log_indicator", "argmax_k", "flag"]
        return Report("pass" if ok else "fail", summary, {"weights": (cols, rows)})

    return compute


def build_fields(cfg: RunConfig, threads: int):
    model = _model(cfg["model"])
    opts = cfg["fields"]

    def compute() -> Report:
        rng = np.random.default_rng(opts["seed"])
        x, xp, y = fields.random_eq8_configs(rng, opts["n_random"], opts["box"])
        sw = fields.eq8_sweep(model, x, xp, y)
        rows = [(*map(float, (x[i, 0], x[i, 1], xp[i, 0], xp[i, 1], y[i, 0], y[i, 1])),
                 float(sw["lhs"][i]), float(sw["rhs"][i]), float(sw["margin"][i]))
                for i in range(len(sw["lhs"]))]
        fit = fields.fit_profile(model, _grid(opts["r"]), _grid(opts["t"]))
        prof_rows = [("ir", float(r), float(raw), float(env))
                     for r, raw, env in zip(fit.r_grid, fit.raw_ir, fit.ir_envelope)]
        prof_rows += [("uv", float(t), float(raw), float(env))
                      for t, raw, env in zip(fit.t_grid, fit.raw_uv, fit.uv_envelope)]
        n_ok = int(np.sum(sw["ok"]))
        lemma = fields.support_check_lemma(model)
        summary = {
            "eq8": {"configs": len(rows), "ok": n_ok,
                    "min_relative_margin": float(np.min(sw["margin"] / sw["rhs"]))},
            "profile": {"raw_monotone": fit.raw_monotone, "bound_holds": fit.bound_holds,
                        "notes": fit.notes},
            "support_check": bool(lemma),
        }
        ok = n_ok == len(rows) and fit.bound_holds and bool(lemma)
        return Report("pass" if ok else "fail", summary, {
            "eq8": (["x0", "x1", "xp0", "xp1", "y0", "y1", "lhs", "rhs", "margin"], rows),
            "profile": (["side", "r_or_t", "raw", "envelope"], prof_rows),
        })

    return compute


def build_wick(cfg: RunConfig, threads: int):
    seed = cfg["wick"]["seed"]

    def compute() -> Report:
        rows = wick.selftest(seed)
        table = [(r.name, "pass" if r.passed else "FAIL", r.cases, r.detail) for r in rows]
        ok = all(r.passed for r in rows)
        summary = {"checks": len(rows), "passed": sum(r.passed for r in rows)}
        return Report("pass" if ok else "fail", summary,
                      {"selftest": (["check", "result", "cases", "detail"], table)})

    return compute


def build_converge(cfg: RunConfig, threads: int):
    d = wick.CoefficientSequence.from_config(cfg["coefficients"])
    a, b = _space(cfg["space"], cfg.base_dir)
    model = _model(cfg["model"])
    opts, grids = cfg["converge"], cfg["grids"]

    def compute() -> Report:
        if model.evaluable:
            fit = fields.fit_profile(model, _grid(grids["fit_r"]), _grid(grids["fit_t"]))
            profile, profile_note = fit.profile, {"fitted": True, "bound_holds": fit.bound_holds}
        else:
            profile, profile_note = model.profile, {"fitted": False}
        c13 = convergence.check_conditions_13(d)
        r_grid, s_grid = _grid(grids["r"]), _grid(grids["s"])
        t_range = (opts["t_min"], opts["t_max"])
        tables, verdicts = {}, []
        cols = ["s_or_r", "lhs_log", "rhs_log", "margin", "flag"]
        for L in opts["L"]:
            ir = convergence.check_ir(d, profile.w_ir, a, L, opts["eps"], r_grid, threads)
            uv = convergence.check_uv(d, profile.w_uv, b, L, opts["eps"], s_grid, threads, t_range)
            for v, tag in ((ir, "ir"), (uv, "uv")):
                tables[f"converge_{tag}_L{L:g}"] = (cols, v.rows())
                verdicts.append({"condition": v.condition, "L": L, "eps": v.eps,
                                 "status": v.status, "C": v.C, "worst_point": v.worst_point,
                                 "worst_margin": v.worst_margin, "flags": v.flags})
        summary = {
            "profile": profile_note,
            "conditions_13": {"root_ok": c13.root_ok, "submult_ok": c13.submult_ok,
                              "C": c13.C, "h": c13.h, "vacuous": c13.vacuous,
                              "notes": c13.notes},
            "verdicts": verdicts,
        }
        if opts["recommend"]:
            rec = convergence.recommend_space(d, profile, opts["L"][0], opts["eps"], r_grid,
                                              s_grid, tuple(opts["gamma_range"]), threads=threads)
            summary["recommendation"] = {
                "gamma_a": rec.gamma_a, "bracket_a": rec.bracket_a, "status_a": rec.status_a,
                "gamma_b": rec.gamma_b, "bracket_b": rec.bracket_b, "status_b": rec.status_b}
        statuses = {v["status"] for v in verdicts}
        if not c13.ok or convergence.FAILS in statuses:
            status = convergence.FAILS
        elif convergence.INCONCLUSIVE in statuses:
            status = convergence.INCONCLUSIVE
        else:
            status = convergence.HOLDS
        return Report(status, summary, tables)

    return compute


def _read_points(path: Path, dim: int) -> list[list[float]]:
    pts = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            row = [c.strip() for c in row if c.strip()]
            if not row or row[0].startswith("#"):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if i == 0:
                    continue  # header
                raise BuildError(f"{path}: row {i + 1} is not numeric") from None
            if len(vals) != dim:
                raise BuildError(f"{path}: row {i + 1} has {len(vals)} values, expected {dim}")
            pts.append(vals)
    if not pts:
        raise BuildError(f"{path}: no points")
    return pts


def build_spectral(cfg: RunConfig, threads: int):
    sp = cfg["spectral"]
    dim = sp["dim"]
    cone = spectral.LorentzCone(dim, sp["orientation"])
    if "points_csv" in sp:
        points = _read_points(cfg.base_dir / sp["points_csv"], dim)
    else:
        points = sp.get("points")
    norm = cfg.get("norm")
    if norm is not None:
        fn = norm["function"]
        g = spectral.EntireGaussian(fn["n"], fn["c"],
                                    tuple(fn["center"]) if "center" in fn else None,
                                    {}, fn["zero"])
        pair = weights.YoungWeightPair(weights.WeightFunction.from_config(norm["alpha"]),
                                       weights.WeightFunction.from_config(norm["beta"]),
                                       norm["h"])
        ucone = None if norm["cone"] == "none" else spectral.LorentzCone(fn["n"], norm["cone"])
        nspec = spectral.EbNormSpec(pair, norm["A"], norm["B"], ucone)
        grid = spectral.NormGrid(norm["p_max"], norm["q_max"], norm["n_p"], norm["n_q"])

    def compute() -> Report:
        tables, summary = {}, {}
        if points:
            rows = [(i, *p, cone.contains(p), spectral.dist_to_cone(cone, p))
                    for i, p in enumerate(points)]
            cols = ["index"] + [f"p{j}" for j in range(dim)] + ["in_cone", "dist"]
            tables["cone"] = (cols, rows)
            summary["cone"] = {"orientation": cone.orientation, "points": len(points),
                               "inside": sum(r[-2] for r in rows),
                               "suffix_sums_in_backward_cone": spectral.in_Kn_minus(points, dim)}
        if norm is not None:
            rows = []
            results = [("norm", spectral.eb_norm(g, nspec, grid))]
            if ucone is not None:
                results.append(("cone_norm", spectral.eb_cone_norm(g, nspec, grid)))
            for name, res in results:
                rows.append((name, res.value, res.log_value, res.infinite, res.shell_margin))
                summary[name] = {"value": res.value, "log_value": res.log_value,
                                 "infinite": res.infinite}
            tables["norm"] = (["quantity", "value", "log_value", "infinite", "shell_margin"], rows)
        return Report("ok", summary, tables)

    return compute


def build_series(cfg: RunConfig, threads: int):
    s = cfg["series"]
    spec = serieslab.ExperimentSpec(_model(cfg["model"]),
                                    wick.CoefficientSequence.from_config(cfg["coefficients"]),
                                    _gaussian(s["f"]), n=s["n"], N_max=s["N_max"])

    def compute() -> Report:
        rep = serieslab.norm_series(spec, threads)
        summary = {"verdict": rep.verdict, "partial_sum": rep.partial_sum,
                   "tail_bound": rep.tail_bound, "shift_agreement": rep.shift_agreement,
                   "cauchy_index": serieslab.cauchy_index(rep), "notes": rep.notes}
        if s["regrouping_N"]:
            rg = serieslab.regrouping_check(spec, s["regrouping_N"])
            summary["regrouping"] = {"N": s["regrouping_N"], "via_products": rg.via_products,
                                     "via_multi_indices": rg.via_multi_indices,
                                     "rel_error": rg.rel_error, "n_K": rg.n_K}
        cols = ["k_or_K_id", "log_term", "log_partial_sum", "ratio", "flag"]
        return Report(rep.verdict, summary, {"series": (cols, rep.table())})

    return compute


BUILDERS = {"weights": build_weights, "fields": build_fields, "wick": build_wick,
            "converge": build_converge, "spectral": build_spectral, "series": build_series}


# ---------------------------------------------------------------------------
# report writing
# ---------------------------------------------------------------------------

def _plain(x):
    """JSON-safe, deterministic rendering (non-finite floats become strings)."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [_plain(x.real), _plain(x.imag)]
    return x


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_table(cols, rows, fmt: str) -> bytes:
    if fmt == "json":
        body = {"columns": cols, "rows": _plain([list(r) for r in rows])}
        return (json.dumps(body, indent=1) + "\n").encode()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue().encode()


def write_report(report: Report, cfg: RunConfig, out: Path, fmt: str) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, (cols, rows) in report.tables.items():
        data = render_table(cols, rows, fmt)
        fname = f"{name}.{fmt}"
        (out / fname).write_bytes(data)
        hashes[fname] = hashlib.sha256(data).hexdigest()
    summary = {
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "tool": f"wickconv {__version__}",
        "subcommand": cfg.subcommand,
        "status": report.status,
        "exit_code": report.exit_code,
        "config": cfg.data,
        "config_sha256": cfg.sha256,
        "outputs": hashes,
        "result": report.summary,
    }
    summary = _plain(summary)
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def print_report(report: Report, cfg: RunConfig, stream=sys.stdout):
    print(f"wickconv {cfg.subcommand}: {report.status} (exit {report.exit_code})", file=stream)
    print(f"config sha256 {cfg.sha256}", file=stream)
    if cfg.subcommand == "wick":
        cols, rows = report.tables["selftest"]
        width = max(len(r[0]) for r in rows)
        for r in rows:
            print(f"  {r[0]:<{width}}  {r[1]:<4}  {r[2]:>5} cases  {r[3]}", file=stream)
        return
    text = json.dumps(_plain(report.summary), indent=1, sort_keys=True)
    for line in text.splitlines():
        print("  " + line, file=stream)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run configuration")
    common.add_argument("--preset", metavar="NAME",
                        help="bundled configuration, merged under --config")
    common.add_argument("--out", metavar="DIR", help="directory for report files")
    common.add_argument("--threads", type=int, metavar="N",
                        help="worker threads (default: $WICKCONV_THREADS or 1)")
    common.add_argument("--seed", type=int, metavar="N", help="seed for randomized sweeps")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format of tabular reports (summary.json is always written)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config value, e.g. --set converge.eps=0.5")
    p = argparse.ArgumentParser(prog="wickconv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wickconv {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    helps = {
        "weights": "weight sequences: validation and indicator functions",
        "fields": "two-point functions: majorant bound sweep and profile fit",
        "wick": "pairing combinatorics; 'wick selftest' runs the brute-force suite",
        "converge": "IR/UV convergence criterion for a coefficient sequence",
        "spectral": "cone membership, distances and weighted norms",
        "series": "truncated norm series with a convergence verdict",
    }
    for name in cfgmod.SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "wick":
            sp.add_argument("mode", nargs="?", default=None, choices=("selftest",))
    sub.add_parser("presets", help="list bundled presets")
    return p


# subcommands that run without any config input
_CONFIG_OPTIONAL = {"wick"}


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _parser().parse_args(argv)
    if args.subcommand == "presets":
        for name in cfgmod.presets():
            print(name, file=stdout)
        return EXIT_OK
    overrides = list(args.set)
    if args.seed is not None:
        if args.subcommand in ("fields", "wick"):
            overrides.append(f"{args.subcommand}.seed={args.seed}")
    if getattr(args, "mode", None):
        overrides.append(f'wick.mode="{args.mode}"')
    try:
        if not (args.config or args.preset or args.subcommand in _CONFIG_OPTIONAL):
            raise ConfigError([f"{args.subcommand}: no configuration given "
                               "(use --config PATH or --preset NAME)"])
        cfg = cfgmod.load(args.subcommand, args.config, args.preset, overrides)
        if args.threads is not None and args.threads < 1:
            raise ConfigError(["--threads: must be >= 1"])
        threads = args.threads if args.threads is not None else default_threads()
        compute = BUILDERS[args.subcommand](cfg, threads)
    except ConfigError as exc:
        print("config error:", file=stderr)
        for line in exc.problems:
            print(f"  {line}", file=stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    try:
        with np.errstate(all="ignore"):
            report = compute()
    except Exception as exc:  # any failure inside the numerics
        print(f"computation error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_COMPUTE
    if args.out:
        write_report(report, cfg, Path(args.out), args.format)
    print_report(report, cfg, stdout)
    return report.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
