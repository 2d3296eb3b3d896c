"""Command line harness: ``gppa <experiment> [--config FILE] [--set k=v] [--out PATH]``.

Configuration is a flat ``key = value`` text file.  Values are parsed with
the type of the built-in default; ``GPPA_<KEY>`` environment variables
override the file and ``--set`` overrides both.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import delta, dho, engine, floquet
from .errors import GppaError, ValidationError

SCHEMA_VERSION = 1

EXPERIMENTS = ("dho_probabilities", "dho_lifetime", "delta_resonance", "delta_profile",
               "floquet_profile", "compare_profiles")

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "sweep": "",
    # driven oscillator
    "sigma": 5.0,
    "Omega": 1.0,
    "force": False,
    "pairs": "0,0;1,0;2,0;3,0;4,0;1,1;2,1;2,2",
    "points": engine.TIME_POINTS,
    "n_max": 4,
    "r_max": 4,
    # driven delta barrier
    "g0": 1.0,
    "k_max": 12.0,
    "n_k": 400,
    "nu_max": 8,
    "N": 50,
    "n_sideband": 1,
    "window": 3.0,
    "third_term": False,
    "excision": 1e-2,
    # sideband oracle (0 = automatic doubling)
    "n_side": 0,
}

SWEEP_PARAM = {
    "dho_probabilities": ("a", 0.0, 1.0, 21),
    "dho_lifetime": ("a", 0.1, 1.0, 10),
    "delta_profile": ("eps", None, None, 101),
    "floquet_profile": ("eps", None, None, 101),
    "compare_profiles": ("eps", None, None, 101),
}

COLUMNS = {
    "dho_probabilities": ["a", "n", "m", "P_gppa", "P_apt4", "P_exact"],
    "dho_lifetime": ["a", "n", "re_gamma_2T", "im_gamma_2T", "tau_over_2T"],
    "delta_resonance": ["g0", "n", "eps_res", "k", "re_de", "im_de", "re_gamma_k", "im_gamma_k",
                        "Tkk", "iterations"],
    "delta_profile": ["eps", "Tkk_gppa"],
    "floquet_profile": ["eps", "t0_sq_floquet"],
    "compare_profiles": ["eps", "Tkk_gppa", "t0_sq_floquet"],
}


def _parse_value(key, text):
    default = DEFAULTS[key]
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: expected a boolean, got {text!r}")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"{key}: expected an integer, got {text!r}") from None
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"{key}: expected a number, got {text!r}") from None
    return text


def read_config_text(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(experiment, file_values=None, env=None, overrides=None):
    """Merge defaults < file < environment < overrides and parse types.

    Returns (config, violations); unknown keys and unparsable values are
    reported as violations rather than raised.
    """
    raw = {}
    bad = []
    raw.update(file_values or {})
    env = os.environ if env is None else env
    by_upper = {k.upper(): k for k in DEFAULTS}
    for name, value in sorted(env.items()):
        if name.startswith("GPPA_"):
            key = by_upper.get(name[5:].upper())
            if key is None:
                bad.append(f"unknown environment key {name}")
            else:
                raw[key] = value
    raw.update(overrides or {})
    cfg = dict(DEFAULTS)
    cfg["experiment"] = experiment
    for key, value in raw.items():
        if key not in DEFAULTS:
            bad.append(f"unknown key {key!r}")
            continue
        try:
            cfg[key] = _parse_value(key, str(value))
        except ValueError as exc:
            bad.append(str(exc))
    return cfg, bad


def parse_pairs(text):
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        n, m = (int(x) for x in chunk.split(","))
        if n < 0 or m < 0:
            raise ValueError("pair indices must be non-negative")
        pairs.append((n, m))
    if not pairs:
        raise ValueError("no pairs given")
    return pairs


def parse_sweep(cfg):
    """(name, values) for the configured or default sweep, or None."""
    experiment = cfg["experiment"]
    if experiment not in SWEEP_PARAM:
        if cfg["sweep"]:
            raise ValueError(f"experiment {experiment} takes no sweep")
        return None
    name, start, stop, count = SWEEP_PARAM[experiment]
    if cfg["sweep"]:
        parts = [p.strip() for p in cfg["sweep"].split(",")]
        if len(parts) != 4:
            raise ValueError("sweep must read name,start,stop,count")
        if parts[0] != name:
            raise ValueError(f"experiment {experiment} sweeps {name!r}, not {parts[0]!r}")
        start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
    if count < 2:
        raise ValueError("sweep count must be at least 2")
    return name, start, stop, count


def delta_config(cfg):
    return delta.DeltaConfig(g0=cfg["g0"], k_max=cfg["k_max"], n_k=cfg["n_k"], nu_max=cfg["nu_max"],
                             N=cfg["N"], window=cfg["window"], third_term=cfg["third_term"],
                             excision=cfg["excision"])


def validate(cfg):
    """List of violations; empty iff ``run(cfg)`` may proceed."""
    bad = []
    experiment = cfg.get("experiment")
    if experiment not in EXPERIMENTS:
        return [f"unknown experiment {experiment!r}"]
    if cfg["threads"] < 0:
        bad.append("threads must be >= 0 (0 = automatic)")
    try:
        sweep = parse_sweep(cfg)
    except ValueError as exc:
        bad.append(str(exc))
        sweep = None
    if experiment.startswith("dho"):
        try:
            dho.PolyDriving(0.0, cfg["sigma"], cfg["Omega"], force=cfg["force"])
        except ValidationError as exc:
            bad.extend(exc.violations)
        try:
            parse_pairs(cfg["pairs"])
        except ValueError as exc:
            bad.append(f"pairs: {exc}")
        if cfg["points"] < 9:
            bad.append("points must be at least 9")
        if cfg["n_max"] < 0:
            bad.append("n_max must be non-negative")
        if cfg["r_max"] < 2:
            bad.append("r_max must be at least 2")
        if sweep is not None and min(sweep[1], sweep[2]) < 0:
            bad.append("a must be non-negative")
    else:
        bad.extend(delta_config(cfg).violations())
        if cfg["n_sideband"] < 1:
            bad.append("n_sideband must be a strictly positive integer")
        if cfg["n_side"] != 0 and cfg["n_side"] < 2:
            bad.append("n_side must be 0 (automatic) or at least 2")
        if experiment == "delta_resonance" and cfg["g0"] <= 0:
            bad.append("g0 must be positive to bind a state")
        if sweep is not None and sweep[1] is not None and min(sweep[1], sweep[2]) <= 0:
            bad.append("eps must be positive (open incident channel)")
    return bad


def _pool_map(fn, items, threads):
    items = list(items)
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads or None) as pool:
        return list(pool.map(fn, items))


def _eps_grid(cfg, sweep, table=None):
    name, start, stop, count = sweep
    if start is None:
        # default window: +-0.5 around the located resonance
        if cfg["g0"] > 0:
            centre = delta.resonance_locate(delta_config(cfg), cfg["n_sideband"], table=table).eps_res
        else:
            centre = cfg["n_sideband"] - cfg["g0"] ** 2 / 4
        start, stop = centre - 0.5, centre + 0.5
        start = max(start, 1e-3)
    return np.linspace(start, stop, count)


def run(cfg):
    """Execute one experiment; returns (columns, rows)."""
    bad = validate(cfg)
    if bad:
        raise ValidationError(bad)
    experiment = cfg["experiment"]
    threads = cfg["threads"]
    sweep = parse_sweep(cfg)
    rows = []
    if experiment == "dho_probabilities":
        pairs = parse_pairs(cfg["pairs"])
        a_grid = np.linspace(*sweep[1:])

        def one(a):
            return dho.dho_probabilities(float(a), pairs, cfg["sigma"], cfg["Omega"], cfg["points"],
                                         force=cfg["force"])

        for res in _pool_map(one, a_grid, threads):
            for n, m in pairs:
                rows.append([res.a, n, m, res.P["gppa"][(n, m)], res.P["apt4"][(n, m)],
                             res.P["exact"][(n, m)]])
    elif experiment == "dho_lifetime":
        a_grid = np.linspace(*sweep[1:])

        def one(a):
            driving = dho.driving_for_alpha(float(a), cfg["sigma"], cfg["Omega"], cfg["force"])
            model = dho.DhoModel(driving)
            tab, means = model.table(cfg["n_max"] + cfg["r_max"] // 2 + 1)
            out = []
            for n in range(cfg["n_max"] + 1):
                g = engine.gamma_total(model, n, tab, means, r_max=cfg["r_max"], points=cfg["points"])
                life = engine.lifetime(g)
                out.append([float(a), n, g.value.real, g.value.imag, life.tau])
            return out

        for block in _pool_map(one, a_grid, threads):
            rows.extend(block)
    elif experiment == "delta_resonance":
        rep = delta.resonance_locate(delta_config(cfg), cfg["n_sideband"])
        rows.append([cfg["g0"], rep.n, rep.eps_res, rep.k, rep.re_de, rep.im_de, rep.gamma_k.real,
                     rep.gamma_k.imag, rep.tkk, rep.iterations])
    else:
        dcfg = delta_config(cfg)
        table = None
        if experiment != "floquet_profile":
            table = delta.b_coefficients(dcfg)[0]
        grid = _eps_grid(cfg, sweep, table)
        n_side = cfg["n_side"] or None
        cols = {}
        if experiment != "floquet_profile":
            cols["gppa"] = delta.transmission_ratio(dcfg, grid, table=table, threads=threads).values
        if experiment != "delta_profile":
            cols["floquet"] = floquet.elastic_profile(cfg["g0"], grid, n_side, threads=threads).values
        for i, e in enumerate(grid):
            rows.append([float(e)] + [float(v[i]) for v in cols.values()])
    return COLUMNS[experiment], rows


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def render(cfg, columns, rows, fmt):
    """Serialise rows; CSV carries a schema line and the full config echo."""
    if fmt == "json":
        objs = []
        for row in rows:
            objs.append({c: (v if isinstance(v, (int, np.integer)) and not isinstance(v, bool)
                             else float(v)) for c, v in zip(columns, row)})
        return json.dumps(objs, indent=1, default=int) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema=gppa/{cfg['experiment']}/v{SCHEMA_VERSION}\n")
    for key in sorted(cfg):
        buf.write(f"# {key}={cfg[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fail(payload, code):
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    sys.exit(code)


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.argument("experiment", type=click.Choice(EXPERIMENTS))
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="Flat key = value configuration file.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override one key.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Output file (default: stdout).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def main(experiment, config_path, overrides, out_path, fmt):
    """Run one GPPA experiment and write its result table."""
    try:
        file_values = {}
        if config_path is not None:
            try:
                with open(config_path) as fh:
                    file_values = read_config_text(fh.read())
            except OSError as exc:
                raise ValidationError(f"cannot read config: {exc}") from exc
        sets = {}
        for item in overrides:
            if "=" not in item:
                raise ValidationError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            sets[k.strip()] = v.strip()
        cfg, bad = resolve_config(experiment, file_values, overrides=sets)
        if bad:
            raise ValidationError(bad)
        columns, rows = run(cfg)
        text = render(cfg, columns, rows, fmt)
    except ValidationError as exc:
        _fail({"error": "validation", "violations": exc.violations}, exc.exit_code)
    except GppaError as exc:
        _fail({"error": type(exc).__name__, "message": str(exc)}, exc.exit_code)
    if out_path is None:
        click.echo(text, nl=False)
    else:
        with open(out_path, "w", newline="") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
