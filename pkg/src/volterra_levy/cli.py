"""Command-line runner: configuration, orchestration and CSV export.

Run configurations are UTF-8 text files of ``dotted.key = value`` lines;
``#`` starts a comment. Lists are comma separated and numbers may be written
as ``2^-12``. Every CSV starts with a ``#`` comment line carrying the config
hash and the library versions, and floats are written in shortest
round-trip form, so identical configurations produce identical bytes.

Exit codes: 0 ok, 2 configuration error, 3 missing upstream artifact,
4 tolerance failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .errors import (ConfigError, MissingArtifactError, ToleranceError, VolterraLevyError)
from .kernel import KernelSpec, all_passed, verify_smooth_variation
from .levy import LevyMeasureSpec, assemble_path, shell_mass, simulate
from .regularity import estimate_exponents
from .spectrum import ClassifyConfig, build_e_delta, classify_points, estimate_spectrum
from .volterra import eval_by_parts, eval_jump_sum

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_TOLERANCE = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# configuration


def _num(text):
    m = re.fullmatch(r"\s*([+-]?[\d.]+)\s*\^\s*([+-]?[\d.]+)\s*", text)
    if m:
        return float(m.group(1)) ** float(m.group(2))
    return float(text)


def _int(text):
    v = _num(text)
    if v != int(v):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _bool(text):
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _floats(text):
    return tuple(_num(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(_int(x) for x in text.split(",") if x.strip())


def _str(text):
    return text.strip()


# key -> (parser, default)
SCHEMA = {
    "kernel.family": (_str, "power"),
    "kernel.d": (_num, 0.5),
    "kernel.eta": (_num, 1.0),
    "measure.family": (_str, "symmetric_stable"),
    "measure.alpha": (_num, 1.5),
    "measure.c": (_num, 1.0),
    "measure.c_plus": (_num, 1.0),
    "measure.c_minus": (_num, 1.0),
    "measure.j_min": (_int, 1),
    "measure.j_max": (_int, 12),
    "sim.grid_log2": (_int, 16),
    "sim.seed": (_int, 1),
    "sim.mirror": (_bool, False),
    "volterra.method": (_str, "jump_sum"),
    "volterra.quad_tol": (_num, 1e-10),
    "volterra.n_check": (_int, 17),
    "volterra.agree_tol": (_num, 1e-8),
    "analysis.scale_range": (_floats, (2.0 ** -12, 2.0 ** -5)),
    "analysis.n_points": (_int, 16),
    "analysis.s_prime": (_floats, (-0.6, -0.4, -0.2, 0.0)),
    "analysis.sep_range": (_floats, ()),
    "analysis.h_centers": (_floats, (0.2, 0.4, 0.6)),
    "analysis.half_width": (_num, 0.05),
    "analysis.deltas": (_floats, ()),
    "analysis.hit_fraction": (_num, 0.8),
    "analysis.classification": (_str, "coarse"),
    "analysis.counting": (_str, "cumulative"),
    "analysis.seeds": (_ints, ()),
    "analysis.verify_tol": (_num, 0.05),
    "output.dir": (_str, "out"),
}

CHOICES = {
    "kernel.family": ("power", "powerlog"),
    "measure.family": ("symmetric_stable", "two_sided_stable"),
    "volterra.method": ("jump_sum", "by_parts", "both"),
    "analysis.classification": ("coarse", "pointwise"),
    "analysis.counting": ("cumulative", "bin"),
}


@dataclass
class RunConfig:
    """Validated run configuration.

    ``values`` maps every schema key to its parsed value; ``explicit`` keeps
    the raw text of the keys that were set, which is what the config hash covers.
    """

    values: Dict[str, object]
    explicit: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seeds(self) -> List[int]:
        s = self.values["analysis.seeds"]
        return list(s) if s else [int(self.values["sim.seed"])]

    @property
    def out_dir(self):
        return self.values["output.dir"]

    def canonical(self):
        # the output location does not change any result, so it is not hashed
        keys = sorted(k for k in self.explicit if k != "output.dir")
        return "\n".join(f"{k} = {self.explicit[k]}" for k in keys)

    @property
    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def kernel(self) -> KernelSpec:
        fam = self["kernel.family"]
        if fam == "power":
            return KernelSpec.power(self["kernel.d"])
        return KernelSpec.powerlog(self["kernel.d"], self["kernel.eta"])

    def measure(self) -> LevyMeasureSpec:
        if self["measure.family"] == "symmetric_stable":
            return LevyMeasureSpec.symmetric_stable(self["measure.alpha"], self["measure.c"],
                                                    self["measure.j_min"], self["measure.j_max"])
        return LevyMeasureSpec.two_sided_stable(self["measure.alpha"], self["measure.c_plus"],
                                                self["measure.c_minus"], self["measure.j_min"],
                                                self["measure.j_max"])


def parse_config(text: str, overrides: Optional[Dict[str, str]] = None) -> RunConfig:
    """Parse and validate config text; raises :class:`ConfigError` with line/column."""
    explicit, where = {}, {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            col = len(line) - len(line.lstrip()) + 1
            raise ConfigError("expected 'key = value'", ln, col)
        key_part, val = line.split("=", 1)
        key = key_part.strip()
        col = len(key_part) - len(key_part.lstrip()) + 1
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", ln, col)
        if key in explicit:
            raise ConfigError(f"duplicate key {key!r}", ln, col)
        explicit[key] = val.strip()
        where[key] = (ln, len(key_part) + 2 + (len(val) - len(val.lstrip())))
    for key, val in (overrides or {}).items():
        explicit[key] = val
        where[key] = (None, None)
    values = {k: d for k, (_, d) in SCHEMA.items()}
    for key, val in explicit.items():
        try:
            values[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", *where[key]) from None
    _validate(values, where)
    return RunConfig(values, explicit)


def _validate(v, where):
    def fail(key, msg):
        raise ConfigError(msg, *where.get(key, (None, None)))

    for key, allowed in CHOICES.items():
        if v[key] not in allowed:
            fail(key, f"{key} must be one of {', '.join(allowed)}")
    if not 0.0 < v["kernel.d"] < 1.0:
        fail("kernel.d", f"d out of (0,1): {v['kernel.d']}")
    if not 0.0 < v["measure.alpha"] < 2.0:
        fail("measure.alpha", f"alpha out of (0,2): {v['measure.alpha']}")
    if not 1 <= v["measure.j_min"] <= v["measure.j_max"]:
        fail("measure.j_max", "need 1 <= measure.j_min <= measure.j_max")
    if not 4 <= v["sim.grid_log2"] <= 24:
        fail("sim.grid_log2", "sim.grid_log2 must be in 4..24")
    sr = v["analysis.scale_range"]
    if len(sr) != 2 or not 0 < sr[0] < sr[1] < 1:
        fail("analysis.scale_range", "analysis.scale_range needs 0 < h_min < h_max < 1")
    sep = v["analysis.sep_range"]
    if sep and (len(sep) != 2 or not 0 < sep[0] < sep[1] < 1):
        fail("analysis.sep_range", "analysis.sep_range needs 0 < lo < hi < 1")
    if any(s < -2 or s > 0 for s in v["analysis.s_prime"]):
        fail("analysis.s_prime", "analysis.s_prime values must lie in [-2, 0]")
    if v["analysis.n_points"] < 1 or v["volterra.n_check"] < 1:
        fail("analysis.n_points", "point counts must be positive")
    if not 0 < v["analysis.hit_fraction"] <= 1:
        fail("analysis.hit_fraction", "analysis.hit_fraction must lie in (0, 1]")
    if any(dl <= 0 for dl in v["analysis.deltas"]):
        fail("analysis.deltas", "analysis.deltas must be positive")
    if v["volterra.quad_tol"] <= 0 or v["volterra.agree_tol"] <= 0:
        fail("volterra.quad_tol", "tolerances must be positive")


def load_config(path, overrides=None) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    if not os.path.exists(path):
        raise MissingArtifactError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


# ---------------------------------------------------------------------------
# CSV I/O


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def header_line(cfg: RunConfig):
    return (f"# config_sha256={cfg.digest} volterra_levy={__version__} "
            f"numpy={np.__version__} scipy={scipy.__version__}")


def write_csv(path, cfg: RunConfig, columns: Sequence[str], rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(header_line(cfg) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    os.replace(tmp, path)
    return path


def read_csv(path):
    """Return ``(columns, rows)`` with rows as lists of strings."""
    if not os.path.exists(path):
        raise MissingArtifactError(f"missing artifact: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, list(reader)


def _artifact(cfg, name, seed=None):
    stem = name if seed is None else f"{name}_s{seed}"
    return os.path.join(cfg.out_dir, stem + ".csv")


# ---------------------------------------------------------------------------
# pipeline pieces


def _load_path(cfg: RunConfig, seed):
    """Rebuild the sample path of ``seed`` from its ledger artifact."""
    _, rows = read_csv(_artifact(cfg, "ledger", seed))
    times = np.array([float(r[0]) for r in rows])
    sizes = np.array([float(r[1]) for r in rows])
    shells = np.array([int(r[2]) for r in rows], np.int64)
    m = cfg.measure()
    mu = sum(shell_mass(m, j)[1] for j in m.shells)
    drift = mu if cfg["sim.mirror"] else -mu
    return assemble_path(cfg["sim.grid_log2"], times, sizes, shells, drift, seed, m)


def _load_m(cfg: RunConfig, seed, n_grid):
    _, rows = read_csv(_artifact(cfg, "volterra", seed))
    vals = np.array([float(r[1]) for r in rows if r[2] == "JumpSum"])
    if vals.size != n_grid:
        raise MissingArtifactError(
            f"{_artifact(cfg, 'volterra', seed)} lacks the full-grid JumpSum rows "
            "(run transform with volterra.method = jump_sum or both)")
    return vals


def _check_points(n, lo=0.0, hi=1.0):
    """``n`` deterministic interior points of ``(lo, hi)``."""
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


def cmd_verify_kernel(cfg: RunConfig):
    kernel = cfg.kernel()
    reports = verify_smooth_variation(kernel, tol=cfg["analysis.verify_tol"])
    rows = [r for rep in reports for r in rep.rows()]
    path = write_csv(_artifact(cfg, "verification"), cfg, ("condition", "h", "sup_deviation"), rows)
    for rep in reports:
        status = "pass" if rep.passed else "FAIL"
        print(f"{rep.condition}: final deviation {rep.sup_deviation[-1]:.3g} [{status}]")
    print(f"wrote {path}")
    return EXIT_OK if all_passed(reports) else EXIT_TOLERANCE


def _simulate_one(cfg: RunConfig, seed):
    path = simulate(cfg.measure(), cfg["sim.grid_log2"], seed, cfg["sim.mirror"])
    ledger = zip(path.jump_times, path.jump_sizes, path.jump_shells)
    write_csv(_artifact(cfg, "ledger", seed), cfg, ("time", "size", "shell"), ledger)
    write_csv(_artifact(cfg, "path", seed), cfg, ("t", "X"), zip(path.grid, path.values))
    return seed, path.n_jumps


def cmd_simulate(cfg: RunConfig, threads=1):
    for seed, n in _map(_simulate_one, cfg, cfg.seeds, threads):
        print(f"seed {seed}: {n} jumps")
    return EXIT_OK


def _transform_one(cfg: RunConfig, seed):
    path = _load_path(cfg, seed)
    kernel = cfg.kernel()
    method = cfg["volterra.method"]
    rows, worst = [], None
    if method in ("jump_sum", "both"):
        js = eval_jump_sum(kernel, path)
        rows += [(t, m, "JumpSum") for t, m in zip(js.t, js.values)]
    if method in ("by_parts", "both"):
        tc = _check_points(cfg["volterra.n_check"])
        bp = eval_by_parts(kernel, path, tc, cfg["volterra.quad_tol"])
        rows += [(t, m, "ByParts") for t, m in zip(bp.t, bp.values)]
        if method == "both":
            ref = eval_jump_sum(kernel, path, tc, method="direct").values
            diff = np.abs(ref - bp.values)
            write_csv(_artifact(cfg, "agreement", seed), cfg,
                      ("t", "jump_sum", "by_parts", "abs_diff"), zip(tc, ref, bp.values, diff))
            worst = float(diff.max())
    write_csv(_artifact(cfg, "volterra", seed), cfg, ("t", "M", "method"), rows)
    return seed, worst


def cmd_transform(cfg: RunConfig, threads=1):
    for s in cfg.seeds:       # fail fast before any work
        read_csv(_artifact(cfg, "ledger", s))
    code = EXIT_OK
    for seed, worst in _map(_transform_one, cfg, cfg.seeds, threads):
        if worst is None:
            print(f"seed {seed}: M written")
            continue
        ok = worst <= cfg["volterra.agree_tol"]
        print(f"seed {seed}: max |JumpSum - ByParts| = {worst:.3g} [{'pass' if ok else 'FAIL'}]")
        if not ok:
            code = EXIT_TOLERANCE
    return code


def _exponents_one(cfg: RunConfig, seed):
    path = _load_path(cfg, seed)
    m = _load_m(cfg, seed, path.n_grid)
    kernel = cfg.kernel()
    sr = cfg["analysis.scale_range"]
    fkw = {"sep_range": cfg["analysis.sep_range"] or None}
    lo, hi = sr[1], 1.0 - sr[1]
    pts = path.step * np.rint(_check_points(cfg["analysis.n_points"], lo, hi) / path.step)
    est_rows, front_rows = [], []
    for t in pts:
        e = estimate_exponents(path.values, m, kernel, t, sr, cfg["analysis.s_prime"], path.step,
                               require_verified=cfg["kernel.family"] == "power",
                               frontier_kw=fkw)
        est_rows.append((e.t, e.h_hat, e.gauge_hat, e.alpha_loc_hat, e.fit_r2))
        front_rows += [(e.t, sp, sg) for sp, sg in e.frontier]
    write_csv(_artifact(cfg, "exponents", seed), cfg,
              ("t", "h_hat", "gauge_hat", "alpha_loc_hat", "fit_r2"), est_rows)
    write_csv(_artifact(cfg, "frontier", seed), cfg, ("t", "s_prime", "sigma_hat"), front_rows)
    return seed, len(est_rows)


def cmd_exponents(cfg: RunConfig, threads=1):
    for s in cfg.seeds:
        read_csv(_artifact(cfg, "ledger", s))
        read_csv(_artifact(cfg, "volterra", s))
    for seed, n in _map(_exponents_one, cfg, cfg.seeds, threads):
        print(f"seed {seed}: exponents at {n} points")
    return EXIT_OK


def _classify_one(cfg: RunConfig, seed):
    path = _load_path(cfg, seed)
    m = _load_m(cfg, seed, path.n_grid)
    pointwise = cfg["analysis.classification"] == "pointwise"
    cc = ClassifyConfig(scale_range=cfg["analysis.scale_range"], deltas=cfg["analysis.deltas"],
                        hit_fraction=cfg["analysis.hit_fraction"], pointwise=pointwise)
    rec = classify_points(path, m, cfg.kernel(), cc,
                          require_verified=cfg["kernel.family"] == "power")
    intervals = []
    for delta in cfg["analysis.deltas"]:
        e = build_e_delta(path, delta, hit_fraction=cfg["analysis.hit_fraction"])
        intervals += [(delta, j, lo, hi) for j, lo, hi in e.intervals()]
    if intervals:
        write_csv(_artifact(cfg, "e_delta", seed), cfg, ("delta", "shell", "lo", "hi"), intervals)
    return rec


def cmd_spectrum(cfg: RunConfig, threads=1):
    for s in cfg.seeds:
        read_csv(_artifact(cfg, "ledger", s))
        read_csv(_artifact(cfg, "volterra", s))
    records = list(_map(_classify_one, cfg, cfg.seeds, threads))
    bins = [(c - cfg["analysis.half_width"], c + cfg["analysis.half_width"])
            for c in cfg["analysis.h_centers"]]
    est = estimate_spectrum(records, bins, classification=cfg["analysis.classification"],
                            counting=cfg["analysis.counting"])
    cols = ("h_center", "dim_hat_X", "dim_hat_M", "theory", "r2", "n_points")
    path = write_csv(_artifact(cfg, "spectrum"), cfg, cols, est.rows())
    for r in est.rows():
        print("h={:.3g}  dim_X={:.3f}  dim_M={:.3f}  theory={:.3f}".format(*r[:4]))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, threads=1):
    """Summarize whatever artifacts exist in the output directory."""
    found = False
    lines = []
    p = _artifact(cfg, "verification")
    if os.path.exists(p):
        found = True
        _, rows = read_csv(p)
        last = {}
        for c, h, dev in rows:
            last[c] = float(dev)
        lines += [f"verification {c}: final deviation {v:.3g}" for c, v in sorted(last.items())]
    for s in cfg.seeds:
        p = _artifact(cfg, "agreement", s)
        if os.path.exists(p):
            found = True
            _, rows = read_csv(p)
            lines.append(f"agreement seed {s}: max diff {max(float(r[3]) for r in rows):.3g}")
        p = _artifact(cfg, "exponents", s)
        if os.path.exists(p):
            found = True
            _, rows = read_csv(p)
            g = np.array([float(r[2]) for r in rows])
            lines.append(f"exponents seed {s}: {len(rows)} points, median gauge_hat {np.median(g):.3f}")
    p = _artifact(cfg, "spectrum")
    if os.path.exists(p):
        found = True
        _, rows = read_csv(p)
        for r in rows:
            lines.append("spectrum h={:.3g}: dim_X={:.3f} dim_M={:.3f} theory={:.3f}".format(
                *map(float, r[:4])))
    if not found:
        raise MissingArtifactError(f"no artifacts found in {cfg.out_dir}")
    print("\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# orchestration


def _call(args):
    fn, cfg, seed = args
    return fn(cfg, seed)


def _map(fn, cfg, seeds, threads):
    """Per-seed map; results come back in seed order so writes stay deterministic."""
    if threads <= 1 or len(seeds) <= 1:
        return [fn(cfg, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(_call, [(fn, cfg, s) for s in seeds]))


COMMANDS = {
    "verify-kernel": cmd_verify_kernel,
    "simulate": cmd_simulate,
    "transform": cmd_transform,
    "exponents": cmd_exponents,
    "spectrum": cmd_spectrum,
    "report": cmd_report,
}


def build_parser():
    p = argparse.ArgumentParser(prog="volterra-levy", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seeds", help='comma separated seeds, e.g. "1,2,3"')
    p.add_argument("--threads", type=int, default=1, help="worker processes for per-seed work")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.out:
        overrides["output.dir"] = args.out
    if args.seeds:
        overrides["analysis.seeds"] = args.seeds
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "verify-kernel":
            return cmd_verify_kernel(cfg)
        return COMMANDS[args.command](cfg, max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ToleranceError as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (VolterraLevyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
