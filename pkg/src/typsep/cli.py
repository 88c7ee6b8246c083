"""Command-line front end: one subcommand per experiment.

    typsep dims --stats bose --n 5 --m-max 30
    typsep fig1 --stats bose --ma 20 --mb 20 --samples 1000 --out out/fig1
    typsep fig2 --m-max 30 --out out/fig2
    typsep fig3 --ma 10 --mb 10 --out out/fig3_m10
    typsep fig4 --ma 10 --mb 10 --path fast --out out/fig4_m10
    typsep selfcheck

Every run writes ``config.json``, the canonical echo of its resolved
parameters; ``--config config.json`` replays it (explicit flags still win).
Exit codes: 0 ok, 2 usage, 3 numeric capacity, 4 self-check failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate

from . import chsh, fock, montecarlo
from .errors import CapacityError, CountOverflowError
from .fock import SectorSpec, Shell, Statistics
from .hilbert import RNG_ALGORITHM, BipartiteSpace, PureState

EXIT_USAGE, EXIT_CAPACITY, EXIT_SELFCHECK = 2, 3, 4
DEFAULT_SEED = 12345
DENSITY_STEP = 0.002

COMMANDS = ("dims", "fig1", "fig2", "fig3", "fig4")
DEFAULT_SAMPLES = {"fig1": 1000, "fig2": 1000, "fig3": 10**5, "fig4": 10**6}
FULL_SCALE_SAMPLES = {"fig1": 1000, "fig2": 1000, "fig3": 10**7, "fig4": 10**8}
DEFAULT_QUANTA = {"fig1": 20, "fig3": 10, "fig4": 10}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    stats: str = "bose"
    shell: str = "exact"
    na: int = 5
    nb: int = 5
    ma: int | None = None
    mb: int | None = None
    m_min: int | None = None
    m_max: int | None = None
    obs_a: str = "0"
    obs_b: str = "0"
    samples: int | None = None
    seed: int = DEFAULT_SEED
    path: str = "full"
    bins: int | None = None
    lo: float | None = None
    hi: float | None = None
    pair_a: str = "0,1"
    pair_b: str = "0,1"
    convention: str = "relabeled"

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def spec_a(self) -> SectorSpec:
        return SectorSpec(Statistics(self.stats), self.na, self.ma, Shell(self.shell))

    def spec_b(self) -> SectorSpec:
        return SectorSpec(Statistics(self.stats), self.nb, self.mb, Shell(self.shell))

    def plan(self) -> montecarlo.ExperimentPlan:
        return montecarlo.ExperimentPlan(self.spec_a(), self.spec_b(), self.samples, self.seed,
                                         self.obs_a, self.obs_b, montecarlo.Path(self.path))

    def setting(self) -> chsh.ChshSetting:
        return chsh.ChshSetting(_pair(self.pair_a), _pair(self.pair_b), chsh.Convention(self.convention))


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(t) for t in str(text).split(","))
    except ValueError:
        raise UsageError(f"a pair is written 'i,j', got {text!r}") from None
    return a, b


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not math.isfinite(float(obj)) else float(obj)
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")


def _provenance() -> dict:
    return {"rng": RNG_ALGORITHM, "numpy": np.__version__}


# ---------------------------------------------------------------- subcommands


def cmd_dims(cfg: RunConfig, out: Path | None) -> str:
    base = SectorSpec(Statistics(cfg.stats), cfg.na, 0, Shell(cfg.shell))
    start = base.ground_quanta + (1 if base.shell is Shell.BELOW else 0)
    m_max = cfg.m_max if cfg.m_max is not None else 30
    rows = []
    for m in range(start if cfg.m_min is None else max(start, cfg.m_min), m_max + 1):
        d = fock.dimension(base.with_quanta(m))
        ln_d = math.log(d)
        rows.append((m, d, ln_d, ln_d / math.sqrt(m) if m > 0 else math.nan))
    text = csv_text(["M", "D", "ln_D", "ln_D_over_sqrt_M"], rows)
    if out is not None:
        _write(out, "dims.csv", text)
        _write(out, "config.json", cfg.to_json())
    return text


def cmd_fig1(cfg: RunConfig, out: Path):
    plan = cfg.plan()
    qs = list(range(cfg.mb + 1))
    res = montecarlo.run_correlation_sweep(plan, qs)
    state_rows = []
    for sid, values in sorted(res.showcase.items()):
        for row, v in zip(res.rows, values):
            state_rows.append((row.q, sid, v, row.hilbert_average, row.exact_std))
    _write(out, "fig1_states.csv", csv_text(["q", "sample_id", "correlation", "hilbert_average", "exact_std"], state_rows))
    _write(out, "fig1_stats.csv", csv_text(
        ["q", "samples", "sample_mean", "sample_std", "hilbert_average", "exact_std"],
        [(r.q, r.samples, r.sample_mean, r.sample_std, r.hilbert_average, r.exact_std) for r in res.rows]))
    _write(out, "config.json", cfg.to_json())


def cmd_fig2(cfg: RunConfig, out: Path):
    plan = cfg.plan()
    rows = montecarlo.run_variance_scan(plan, range(cfg.m_min, cfg.m_max + 1), pairs=((cfg.obs_a, cfg.obs_b), ("M", "M")))
    _write(out, "fig2.csv", csv_text(
        ["pair", "M", "D", "empirical_var", "exact_var", "inv_D"],
        [(r.pair, r.quanta, r.dim, r.empirical_var, r.exact_var, r.inv_dim) for r in rows]))
    _write(out, "config.json", cfg.to_json())


def cmd_fig3(cfg: RunConfig, out: Path):
    plan = cfg.plan()
    hist, summary, _ = montecarlo.run_distribution(plan, True, cfg.lo, cfg.hi, cfg.bins)
    edges = hist.edges
    centers = 0.5 * (edges[:-1] + edges[1:])
    normal = np.exp(-0.5 * centers**2) / math.sqrt(2 * math.pi)
    _write(out, "fig3_hist.csv", csv_text(
        ["bin_lo", "bin_hi", "count", "density", "normal_density"],
        zip(edges[:-1], edges[1:], hist.counts, hist.density(), normal)))
    _write(out, "fig3_summary.json", json_text({
        **dataclasses.asdict(summary), "underflow": hist.underflow, "overflow": hist.overflow,
        "quanta_a": cfg.ma, "quanta_b": cfg.mb, "dim": plan.space().dim, **_provenance(),
    }))
    _write(out, "config.json", cfg.to_json())


def density_curve(dim: int, lo: float, hi: float, step: float = DENSITY_STEP):
    """Large-D law on a grid of the scaled abscissa s = D(<F> - 2) = 2x."""
    n = int(round((hi - lo) / step))
    s = lo + step * np.arange(n + 1)
    x = s / 2.0
    return s, x, chsh.analytic_density(dim, 2.0 + s / dim), chsh.density_x(x) / 2.0


def curve_mass(s: np.ndarray, density_s: np.ndarray) -> float:
    """Trapezoid mass over the grid plus the closed-form tails outside it."""
    inner = float(np.sum(0.5 * (density_s[1:] + density_s[:-1]) * np.diff(s)))
    return inner + chsh.cdf_x(s[0] / 2.0) + (1.0 - chsh.cdf_x(s[-1] / 2.0))


def cmd_fig4(cfg: RunConfig, out: Path):
    plan = cfg.plan()
    setting = cfg.setting()
    h_ext, h_blk, summary = montecarlo.run_chsh_distribution(plan, setting, cfg.lo, cfg.hi, cfg.bins)
    edges = h_ext.edges
    _write(out, "fig4_hist.csv", csv_text(
        ["bin_lo", "bin_hi", "count", "density", "count_block", "density_block"],
        zip(edges[:-1], edges[1:], h_ext.counts, h_ext.density(), h_blk.counts, h_blk.density())))
    s, x, dens_f, dens_s = density_curve(summary.dim, cfg.lo, cfg.hi)
    _write(out, "fig4_density.csv", csv_text(["scaled", "x", "density_f", "density_scaled"], zip(s, x, dens_f, dens_s)))
    _write(out, "fig4_summary.json", json_text({
        **dataclasses.asdict(summary),
        "underflow": h_ext.underflow, "overflow": h_ext.overflow,
        "block_underflow": h_blk.underflow, "block_overflow": h_blk.overflow,
        "analytic_curve_mass": curve_mass(s, dens_s),
        "pair_a": list(setting.pair_a), "pair_b": list(setting.pair_b), "convention": setting.convention.value,
        **_provenance(),
    }))
    _write(out, "config.json", cfg.to_json())


def selfcheck() -> list[dict]:
    """Fast structural checks; each entry has name, passed and detail."""
    checks = []

    def record(name, passed, detail):
        checks.append({"name": name, "passed": bool(passed), "detail": detail})

    d_b = fock.dimension(SectorSpec("bose", 5, 30))
    d_f = fock.dimension(SectorSpec("fermi", 5, 40))
    record("dimension_bose_5_30", d_b == 674, {"value": d_b})
    record("dimension_fermi_5_40", d_f == 674, {"value": d_f})
    n2 = all(fock.dimension(SectorSpec("bose", 2, m)) == m // 2 + 1 for m in range(101))
    record("two_particle_closed_form", n2, {"max_quanta": 100})
    stair = all(
        fock.dimension(SectorSpec("fermi", n, m))
        == (fock.dimension(SectorSpec("bose", n, m - n * (n - 1) // 2)) if m >= n * (n - 1) // 2 else 0)
        for n in range(1, 7) for m in range(41))
    record("staircase_dimension_identity", stair, {"max_particles": 6, "max_quanta": 40})

    setting = chsh.ChshSetting()
    ev = np.linalg.eigvalsh(chsh.block_operator(setting))
    target = np.array([-2 * math.sqrt(2), 0.0, 0.0, 2 * math.sqrt(2)])
    record("block_spectrum", np.max(np.abs(ev - target)) < 1e-12, {"eigenvalues": ev.tolist()})

    space = BipartiteSpace(3, 3)
    worst = 0.0
    for eta in (0.0, 0.25, 0.5, 1.0):
        psi = np.zeros((3, 3), dtype=complex)
        psi[0, 1] = psi[1, 0] = math.sqrt(eta / 2)
        psi[2, 2] = math.sqrt(1 - eta)
        val = chsh.chsh_value(PureState(psi.reshape(-1), space), setting)
        worst = max(worst, abs(val - (2 * math.sqrt(2) * eta + 2 * (1 - eta))))
    record("eta_family_law", worst < 1e-12, {"max_error": worst})

    dim = 900
    lower, _ = integrate.quad(lambda f: chsh.analytic_density(dim, f), -np.inf, 2.0, limit=200)
    upper, _ = integrate.quad(lambda f: chsh.analytic_density(dim, f), 2.0, np.inf, limit=200)
    mean_lo, _ = integrate.quad(lambda f: f * chsh.analytic_density(dim, f), -np.inf, 2.0, limit=200)
    mean_hi, _ = integrate.quad(lambda f: f * chsh.analytic_density(dim, f), 2.0, np.inf, limit=200)
    record("density_normalization", abs(lower + upper - 1) < 1e-6, {"mass": lower + upper})
    record("density_mean", abs(mean_lo + mean_hi - (2 - 8 / dim)) < 1e-6, {"mean": mean_lo + mean_hi, "expected": 2 - 8 / dim})
    frac = chsh.violation_fraction_analytic()
    record("violation_fraction", abs(frac - 1 / (40 + 28 * math.sqrt(2))) < 1e-12 and abs(upper - frac) < 1e-6,
           {"closed_form": frac, "quadrature": upper})
    return checks


# ---------------------------------------------------------------- argument handling


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="typsep", description="Typical-state correlation experiments for two trapped gases.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sectors=True):
        sp.add_argument("--config", type=Path, help="replay a config.json echo")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--stats", choices=[s.value for s in Statistics])
        sp.add_argument("--shell", choices=[s.value for s in Shell])
        if sectors:
            sp.add_argument("--na", type=int)
            sp.add_argument("--nb", type=int)
            sp.add_argument("--ma", type=int)
            sp.add_argument("--mb", type=int)
            sp.add_argument("--samples", type=int)
            sp.add_argument("--full-scale", action="store_true", help="sample counts of the original published figures (1e7 for fig3, 1e8 for fig4)")
            sp.add_argument("--seed", type=int)
            sp.add_argument("--path", choices=[p.value for p in montecarlo.Path])

    sp = sub.add_parser("dims", help="sector dimensions versus M")
    common(sp, sectors=False)
    sp.add_argument("--n", dest="na", type=int)
    sp.add_argument("--m-min", type=int)
    sp.add_argument("--m-max", type=int)

    for name, helptext in (("fig1", "correlation versus mode index q"),
                           ("fig2", "variance versus M"),
                           ("fig3", "standardized correlation histogram"),
                           ("fig4", "CHSH value histogram")):
        sp = sub.add_parser(name, help=helptext)
        common(sp)
        sp.add_argument("--obs-a", help="mode index for O_A, or M")
        sp.add_argument("--obs-b", help="mode index for O_B, or M")
        if name == "fig2":
            sp.add_argument("--m-min", type=int)
            sp.add_argument("--m-max", type=int)
        if name in ("fig3", "fig4"):
            sp.add_argument("--bins", type=int)
            sp.add_argument("--lo", type=float)
            sp.add_argument("--hi", type=float)
        if name == "fig4":
            sp.add_argument("--pair-a", help="two basis indices of system A, 'i,j'")
            sp.add_argument("--pair-b", help="two basis indices of system B, 'i,j'")
            sp.add_argument("--convention", choices=[c.value for c in chsh.Convention])

    sp = sub.add_parser("selfcheck", help="fast structural checks, JSON report")
    sp.add_argument("--out", type=Path)
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data = {"command": args.command}
    if getattr(args, "config", None) is not None:
        try:
            loaded = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if loaded.get("command", args.command) != args.command:
            raise UsageError(f"config is for {loaded['command']!r}, not {args.command!r}")
        data.update(loaded)
    cfg = RunConfig.from_mapping(data)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if f.name != "command" and v is not None:
            setattr(cfg, f.name, v)

    cmd = cfg.command
    if cmd == "dims":
        cfg.nb = cfg.na
        return cfg
    if cfg.samples is None:
        cfg.samples = (FULL_SCALE_SAMPLES if getattr(args, "full_scale", False) else DEFAULT_SAMPLES)[cmd]
    if cmd == "fig2":
        if cfg.m_max is None:
            cfg.m_max = 40 if cfg.stats == "fermi" else 30
        if cfg.m_min is None:
            cfg.m_min = SectorSpec(Statistics(cfg.stats), max(cfg.na, cfg.nb), 0, Shell(cfg.shell)).ground_quanta
        # the scan varies both quanta; the plan carries the first row
        cfg.ma = cfg.mb = cfg.m_min
    else:
        if cfg.ma is None:
            cfg.ma = DEFAULT_QUANTA[cmd] + (10 if cfg.stats == "fermi" and cmd == "fig1" else 0)
        if cfg.mb is None:
            cfg.mb = cfg.ma
    if cmd == "fig3":
        cfg.bins = cfg.bins or 100
        cfg.lo = -5.0 if cfg.lo is None else cfg.lo
        cfg.hi = 5.0 if cfg.hi is None else cfg.hi
    if cmd == "fig4":
        cfg.bins = cfg.bins or 200
        cfg.lo = -40.0 if cfg.lo is None else cfg.lo
        cfg.hi = 12.0 if cfg.hi is None else cfg.hi
        if getattr(args, "path", None) is None and "path" not in data:
            cfg.path = "auto"
    elif cfg.path == "auto":
        cfg.path = "full"
    if cfg.samples < 1:
        raise UsageError("--samples must be positive")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selfcheck":
            checks = selfcheck()
            ok = all(c["passed"] for c in checks)
            text = json_text({"passed": ok, "checks": checks})
            if args.out is not None:
                _write(args.out, "selfcheck.json", text)
            sys.stdout.write(text)
            return 0 if ok else EXIT_SELFCHECK
        cfg = resolve_config(args)
        out = getattr(args, "out", None)
        if cfg.command == "dims":
            sys.stdout.write(cmd_dims(cfg, out))
            return 0
        out = out if out is not None else Path("results") / cfg.command
        {"fig1": cmd_fig1, "fig2": cmd_fig2, "fig3": cmd_fig3, "fig4": cmd_fig4}[cfg.command](cfg, out)
        print(f"wrote {out}", file=sys.stderr)
        return 0
    except (CapacityError, CountOverflowError) as exc:
        print(f"typsep: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (UsageError, ValueError, TypeError) as exc:
        print(f"typsep: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
