"""Batch front end: config parsing, command dispatch, CSV/JSON emission.

Config files are flat ``key = value`` lines with dotted sections (JSON with
the same dotted keys is accepted as an alternative); every run requires an
explicit seed.  Each command writes one output file whose rows carry the
full parameter tuple and the seed, numbers formatted with %.12g, LF line
endings, and a ``# schema=1`` header comment.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = ["RunConfig", "main", "run_command"]

SCHEMA_COMMENT = "# schema=1"

_DEFAULTS = {
    "disorder.kind": "binary",
    "excursion.kind": "srw",
    "excursion.alpha": "1.5",
    "excursion.period": "1",
    "excursion.m_max": "200000",
    "grid.beta": "1.0",
    "grid.h": "0.0",
    "grid.g": "",
    "grid.alpha": "1.5",
    "n": "100000",
    "n_excursions": "400",
    "replicas": "8",
    "paths_per_replica": "4",
    "eps_tail": "1e-8",
    "eps_fe_mult": "10",
    "bounds.t": "0.8",
    "critical.h_tol": "0.004",
    "out.dir": "out",
    "out.format": "csv",
    "threads": "1",
}


@dataclass
class RunConfig:
    """Flat dotted-key configuration with typed accessors."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        return cls.from_text(text)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values = {}
        if text.lstrip().startswith("{"):
            def flatten(prefix, obj):
                for k, v in obj.items():
                    key = f"{prefix}.{k}" if prefix else k
                    if isinstance(v, dict):
                        flatten(key, v)
                    elif isinstance(v, list):
                        values[key] = ",".join(str(x) for x in v)
                    else:
                        values[key] = str(v)
            flatten("", json.loads(text))
        else:
            for raw in text.splitlines():
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"malformed config line: {raw!r}")
                key, val = line.split("=", 1)
                values[key.strip()] = val.strip()
        return cls(values)

    def to_text(self) -> str:
        lines = [f"{k} = {self.values[k]}" for k in sorted(self.values)]
        return "\n".join(lines) + "\n"

    # typed accessors -----------------------------------------------------

    def get(self, key: str, default: str | None = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is not None:
            return default
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        raise KeyError(f"missing config key {key}")

    def get_int(self, key: str, default: str | None = None) -> int:
        return int(self.get(key, default))

    def get_float(self, key: str, default: str | None = None) -> float:
        return float(self.get(key, default))

    def get_floats(self, key: str, default: str | None = None) -> list[float]:
        raw = self.get(key, default)
        return [float(x) for x in raw.split(",") if x.strip() != ""]

    @property
    def seed(self) -> int:
        if "seed" not in self.values:
            raise KeyError("config must set an explicit seed (no wall-clock default)")
        return int(self.values["seed"])

    def disorder(self):
        from copoly.disorder import DisorderModel

        kind = self.get("disorder.kind")
        if kind == "discrete":
            return DisorderModel(
                "discrete",
                np.array(self.get_floats("disorder.support")),
                np.array(self.get_floats("disorder.weights")),
            )
        return DisorderModel(kind)

    def excursion_law(self):
        from copoly.excursions import custom_law, power_law, simple_random_walk_law

        kind = self.get("excursion.kind")
        m_max = self.get_int("excursion.m_max")
        if kind == "srw":
            return simple_random_walk_law(m_max)
        if kind == "power":
            return power_law(
                self.get_float("excursion.alpha"), m_max, self.get_int("excursion.period")
            )
        return custom_law(
            np.array(self.get_floats("excursion.probabilities")),
            self.get_float("excursion.alpha"),
            self.get_int("excursion.period"),
        )


def _format_value(v) -> str:
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def _write_rows(path: Path, rows: list[dict], fmt: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        payload = {"schema": 1, "rows": rows}
        text = json.dumps(payload, indent=1, sort_keys=True, default=float)
        path.write_text(text + "\n", encoding="utf-8", newline="\n")
        return
    if not rows:
        path.write_text(SCHEMA_COMMENT + "\n", encoding="utf-8", newline="\n")
        return
    cols = list(rows[0].keys())
    lines = [SCHEMA_COMMENT, ",".join(cols)]
    for row in rows:
        lines.append(",".join(_format_value(row[c]) for c in cols))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _parallel_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- commands --------------------------------------------------------------


def _cmd_annealed(cfg: RunConfig) -> list[dict]:
    from copoly.annealed import annealed_critical_h, annealed_excess_free_energy

    model = cfg.disorder()
    rows = []
    for beta in cfg.get_floats("grid.beta"):
        for h in cfg.get_floats("grid.h"):
            rows.append(
                {
                    "beta": beta,
                    "h": h,
                    "g_ann": annealed_excess_free_energy(beta, h, model),
                    "h_c_ann": annealed_critical_h(beta, model),
                    "seed": cfg.seed,
                }
            )
    return rows


def _cmd_quenched_fe(cfg: RunConfig) -> list[dict]:
    from copoly.partition import ModelParams, quenched_free_energy

    model = cfg.disorder()
    law = cfg.excursion_law()
    n = cfg.get_int("n")
    replicas = cfg.get_int("replicas")
    points = [
        (beta, h) for beta in cfg.get_floats("grid.beta") for h in cfg.get_floats("grid.h")
    ]

    def work(point):
        beta, h = point
        est = quenched_free_energy(
            ModelParams(beta, h), model, law, n, replicas, cfg.seed
        )
        return {
            "beta": beta,
            "h": h,
            "n": n,
            "replicas": replicas,
            "fe": est.value,
            "stderr": est.stderr,
            "seed": cfg.seed,
        }

    return _parallel_map(work, points, cfg.get_int("threads"))


def _cmd_s_of_g(cfg: RunConfig) -> list[dict]:
    from copoly.partition import quenched_growth_rate

    model = cfg.disorder()
    law = cfg.excursion_law()
    n_exc = cfg.get_int("n_excursions")
    replicas = cfg.get_int("replicas")
    points = [
        (beta, h, g)
        for beta in cfg.get_floats("grid.beta")
        for h in cfg.get_floats("grid.h")
        for g in cfg.get_floats("grid.g")
    ]

    def work(point):
        beta, h, g = point
        est = quenched_growth_rate(beta, h, g, model, law, n_exc, replicas, cfg.seed)
        return {
            "beta": beta,
            "h": h,
            "g": g,
            "n_excursions": n_exc,
            "replicas": replicas,
            "rate": est.value,
            "stderr": est.stderr,
            "fit_rms": est.fit_rms,
            "seed": cfg.seed,
        }

    return _parallel_map(work, points, cfg.get_int("threads"))


def _cmd_critical_curve(cfg: RunConfig) -> list[dict]:
    from copoly.annealed import annealed_critical_h
    from copoly.partition import critical_h_estimate

    model = cfg.disorder()
    law = cfg.excursion_law()
    n = cfg.get_int("n")
    replicas = cfg.get_int("replicas")
    rows = []
    for beta in cfg.get_floats("grid.beta"):
        lower = annealed_critical_h(beta / law.alpha, model)
        upper = annealed_critical_h(beta, model)
        h_lo = cfg.get_float("critical.h_lo", _format_value(0.8 * lower))
        h_hi = cfg.get_float("critical.h_hi", _format_value(upper))
        est = critical_h_estimate(
            beta,
            model,
            law,
            n,
            replicas,
            cfg.seed,
            h_lo=h_lo,
            h_hi=h_hi,
            h_tol=cfg.get_float("critical.h_tol"),
            eps_mult=cfg.get_float("eps_fe_mult"),
            m_window=cfg.get_int("m_window", "10000"),
        )
        rows.append(
            {
                "beta": beta,
                "n": n,
                "replicas": replicas,
                "h_c_hat": est.h_hat,
                "sigma": est.sigma,
                "h_c_ann_over_alpha": lower,
                "h_c_ann": upper,
                "seed": cfg.seed,
            }
        )
    return rows


def _cmd_bounds(cfg: RunConfig) -> list[dict]:
    from copoly.annealed import annealed_critical_h
    from copoly.bounds import (
        PowerMean,
        fractional_moment_bound,
        power_mean_normalizer,
        tilted_strategy_rate,
    )

    model = cfg.disorder()
    law = cfg.excursion_law()
    t = cfg.get_float("bounds.t")
    g_grid = cfg.get_floats("grid.g") or [0.0]
    rows = []
    for beta in cfg.get_floats("grid.beta"):
        for alpha in cfg.get_floats("grid.alpha"):
            h_star = annealed_critical_h(beta / alpha, model)
            for g in g_grid:
                ts = tilted_strategy_rate(beta, h_star, model, alpha)
                pm, pm_err = power_mean_normalizer(beta, h_star, model, law, alpha)
                rows.append(
                    {
                        "beta": beta,
                        "alpha": alpha,
                        "h_matched": h_star,
                        "g": g,
                        "fractional_t": t,
                        "fractional_bound": fractional_moment_bound(beta, t, g, law),
                        "tilted_rate": ts.rate,
                        "entropy_identity_residual": ts.identity_residual,
                        "power_mean_normalizer": pm,
                        "power_mean_norm_err": pm_err,
                        "power_mean_bound": alpha * math.log(pm) if pm < math.inf else math.inf,
                        "power_mean_cap": PowerMean(alpha).cap,
                        "seed": cfg.seed,
                    }
                )
    return rows


def _cmd_slope(cfg: RunConfig) -> list[dict]:
    from copoly.slope import solve_slope_constants

    rows = []
    for alpha in cfg.get_floats("grid.alpha"):
        res = solve_slope_constants(alpha)
        rows.append(
            {
                "alpha": alpha,
                "slope_ratio": res.slope_ratio if res.slope_ratio is not None else "",
                "k_c_star": res.k_c_star,
                "root_residual": res.root_residual if res.root_residual is not None else "",
                "quadrature_error": (
                    res.quadrature_error if res.quadrature_error is not None else ""
                ),
                "seed": cfg.seed,
            }
        )
    return rows


def _cmd_paths(cfg: RunConfig) -> list[dict]:
    from copoly.partition import ModelParams
    from copoly.paths import return_count_statistics

    model = cfg.disorder()
    law = cfg.excursion_law()
    n = cfg.get_int("n")
    rows = []
    for beta in cfg.get_floats("grid.beta"):
        for h in cfg.get_floats("grid.h"):
            diag = return_count_statistics(
                ModelParams(beta, h),
                model,
                law,
                n,
                cfg.get_int("replicas"),
                cfg.get_int("paths_per_replica"),
                cfg.seed,
                m_window=cfg.get_int("m_window", "10000"),
                noise_mult=cfg.get_float("eps_fe_mult"),
                estimate_density=cfg.get("paths.density", "on") == "on",
                n_exc=cfg.get_int("n_excursions"),
            )
            rows.append(
                {
                    "beta": beta,
                    "h": h,
                    "n": n,
                    "regime": diag.regime,
                    "fe": diag.fe_value,
                    "fe_stderr": diag.fe_stderr,
                    "mn_mean": diag.mn_mean,
                    "mn_over_n": diag.mn_over_n,
                    "mn_over_n_stderr": diag.mn_over_n_stderr,
                    "mn_over_log_n_q95": diag.mn_over_log_n_q95,
                    "density_from_rate": (
                        diag.density_from_rate if diag.density_from_rate is not None else ""
                    ),
                    "samples": diag.samples,
                    "seed": cfg.seed,
                }
            )
    return rows


def _cmd_selftest(cfg: RunConfig) -> list[dict]:
    from copoly.selftest import run_selftest

    results = run_selftest(seed=cfg.seed)
    rows = []
    failures = 0
    for name, ok, detail in results:
        print(("PASS " if ok else "FAIL ") + name + ("" if ok else f": {detail}"))
        failures += 0 if ok else 1
        rows.append({"check": name, "status": "pass" if ok else "fail", "detail": detail,
                     "seed": cfg.seed})
    if failures:
        raise SystemExit(f"selftest: {failures} invariant(s) failed")
    return rows


COMMANDS = {
    "annealed": _cmd_annealed,
    "quenched-fe": _cmd_quenched_fe,
    "s-of-g": _cmd_s_of_g,
    "critical-curve": _cmd_critical_curve,
    "bounds": _cmd_bounds,
    "slope": _cmd_slope,
    "paths": _cmd_paths,
    "selftest": _cmd_selftest,
}


def run_command(command: str, cfg: RunConfig, out_dir: Path, fmt: str) -> Path:
    rows = COMMANDS[command](cfg)
    out = out_dir / f"{command}.{ 'json' if fmt == 'json' else 'csv' }"
    _write_rows(out, rows, fmt)
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="copoly",
        description="Copolymer-near-a-selective-interface numerics",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=False, help="config file (key=value or JSON)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    cfg = RunConfig.from_file(args.config) if args.config else RunConfig({})
    if args.seed is not None:
        cfg.values["seed"] = str(args.seed)
    if args.threads is not None:
        cfg.values["threads"] = str(args.threads)
    try:
        cfg.seed
    except KeyError as exc:
        parser.error(str(exc))
    out_dir = Path(args.out if args.out is not None else cfg.get("out.dir"))
    fmt = args.format if args.format is not None else cfg.get("out.format")
    try:
        out = run_command(args.command, cfg, out_dir, fmt)
    except (ValueError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
