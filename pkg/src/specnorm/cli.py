"""
Command line experiment runner.

    specnorm verify-abstract [--config PATH] [--seed N] [--out PATH] [--jobs N]
    specnorm scaling         [--config PATH] [--out PATH]
    specnorm stability       [--config PATH] [--seed N] [--out PATH]
    specnorm norms --input FILE [--p P] [--s S] [--sigma SIGMA] [--out PATH]

Configuration files are INI style with one section per subcommand; every key
is optional and falls back to the defaults below.  All parameters are
validated before any eigendecomposition runs.  Results are written as CSV;
the exit status is 0 when every acceptance check of the run passed, 1 when
one failed and 2 for invalid input.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import functools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .inequalities import (EnsembleRanges, InstanceResult, ensemble_instance,
                           theta_swap_spread, verify_localization_stability)
from .manifolds import (AngularProfile, OscillatingFamily, RadialBump, WarpedProductGrid,
                        laplace_beltrami_root, profile_by_name, scaling_experiment,
                        theorem_exponents)
from .norms import (besov_homogeneous, besov_modified, lp_norm, sobolev_homogeneous,
                    sobolev_inhomogeneous)
from .spectral import BumpFunction, eigendecompose, make_space

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, bool):
        return "true" if x else "false"
    return repr(float(x))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


class _Section:
    """Typed access to one INI section with defaults."""

    def __init__(self, parser: configparser.ConfigParser | None, name: str):
        self.data = dict(parser[name]) if parser is not None and parser.has_section(name) else {}
        self.name = name

    def get(self, key, default, kind=float):
        if key.lower() not in self.data:
            return default
        raw = self.data[key.lower()]
        try:
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key} = {raw!r}: {exc}") from None


def _bump(sec: _Section, prefix: str, c: float, S: float) -> BumpFunction:
    try:
        return BumpFunction(sec.get(f"{prefix}_c", c), sec.get(f"{prefix}_S", S))
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] {prefix}: {exc}") from None


def _grid(sec: _Section, N_r: int, N_theta: int) -> WarpedProductGrid:
    try:
        return WarpedProductGrid(sec.get("n", 2, int), sec.get("R1", 0.5), sec.get("R2", 4.5),
                                 sec.get("N_r", N_r, int), sec.get("N_theta", N_theta, int),
                                 profile_by_name(sec.get("profile", "hyperbolic", str)))
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] grid: {exc}") from None


def _family(sec: _Section, grid: WarpedProductGrid) -> OscillatingFamily:
    try:
        psi = RadialBump(sec.get("psi_lo", 1.0), sec.get("psi_hi", 4.0),
                         sec.get("psi_plateau", 0.5))
        gamma = AngularProfile(sec.get("gamma", "bump", str), sec.get("gamma_power", 2, int))
        return OscillatingFamily(grid, psi, gamma)
    except ValueError as exc:
        raise ConfigError(f"[{sec.name}] oscillating family: {exc}") from None


@dataclass(frozen=True)
class AbstractConfig:
    instances: int = 1000
    seed: int = 20240521
    ranges: EnsembleRanges = field(default_factory=EnsembleRanges)
    theta: BumpFunction = field(default_factory=BumpFunction)


def abstract_config(parser, seed: int | None) -> AbstractConfig:
    sec = _Section(parser, "verify-abstract")
    instances = sec.get("instances", 1000, int)
    if instances <= 0:
        raise ConfigError("empty ensemble: instances must be positive")
    d = EnsembleRanges()
    ranges = EnsembleRanges(
        N=(sec.get("N_min", d.N[0], int), sec.get("N_max", d.N[1], int)),
        s=(sec.get("s_min", d.s[0]), sec.get("s_max", d.s[1])),
        sigma=(sec.get("sigma_min", d.sigma[0]), sec.get("sigma_max", d.sigma[1])),
        spectral_radius=(sec.get("radius_min", d.spectral_radius[0]),
                         sec.get("radius_max", d.spectral_radius[1])),
        weight_spread=(sec.get("spread_min", d.weight_spread[0]),
                       sec.get("spread_max", d.weight_spread[1])),
        zero_probability=sec.get("zero_probability", d.zero_probability),
    )
    if not 1 <= ranges.N[0] <= ranges.N[1]:
        raise ConfigError(f"invalid N range {ranges.N}")
    for name in ("s", "sigma", "spectral_radius"):
        lo, hi = getattr(ranges, name)
        if not 0 < lo <= hi:
            raise ConfigError(f"invalid {name} range ({lo}, {hi}): need 0 < min <= max")
    if not 1 <= ranges.weight_spread[0] <= ranges.weight_spread[1]:
        raise ConfigError(f"invalid weight spread range {ranges.weight_spread}: need 1 <= min <= max")
    if not 0 <= ranges.zero_probability <= 1:
        raise ConfigError("zero_probability must lie in [0, 1]")
    return AbstractConfig(instances, seed if seed is not None else sec.get("seed", 20240521, int),
                          ranges, _bump(sec, "theta", 0.5, 1.0))


@dataclass(frozen=True)
class ScalingConfig:
    family: OscillatingFamily
    theta: BumpFunction
    s: float
    sigma: float
    eps: list[float]
    slope_tolerance: float
    ratio_spread_limit: float


def scaling_config(parser) -> ScalingConfig:
    sec = _Section(parser, "scaling")
    eps = sec.get("eps", None, _floats)
    if eps is None:
        eps = [2.0 ** -k for k in range(3, 8)]
    if len(eps) < 3:
        raise ConfigError(f"eps sequence needs at least 3 values, got {len(eps)}")
    if any(b >= a for a, b in zip(eps, eps[1:])) or min(eps) <= 0:
        raise ConfigError("eps sequence must be positive and strictly decreasing")
    R1, R2 = sec.get("R1", 0.5), sec.get("R2", 4.5)
    default_Nr = math.ceil(10 * (R2 - R1) / min(eps)) - 1
    grid = _grid(sec, default_Nr, 8)
    for e in eps:
        if not grid.resolved(e):
            raise ConfigError(f"eps = {e} is not resolved: need h_r <= {e / 10:.4g}, "
                              f"grid has h_r = {grid.h_r:.4g}")
    s = sec.get("s", 0.5)
    try:
        _, sigma_t = theorem_exponents(grid.n, s)
    except ValueError as exc:
        raise ConfigError(f"[scaling] {exc}") from None
    sigma = sec.get("sigma", sigma_t)
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    return ScalingConfig(_family(sec, grid), _bump(sec, "theta", 0.5, 1.0), s, sigma, eps,
                         sec.get("slope_tolerance", 0.15), sec.get("ratio_spread_limit", 5.0))


@dataclass(frozen=True)
class StabilityConfig:
    fine: OscillatingFamily
    calibration: OscillatingFamily
    theta: BumpFunction
    theta1: BumpFunction
    chi: BumpFunction
    sigma: float
    eps: float
    j_values: list[int]
    swap_samples: int
    calibration_samples: int
    sparse_support: int
    seed: int


def stability_config(parser, seed: int | None) -> StabilityConfig:
    sec = _Section(parser, "stability")
    fine_grid = _grid(sec, 511, 16)
    if (fine_grid.N_r + 1) % 2 or fine_grid.N_theta % 2:
        raise ConfigError("stability needs N_r + 1 and N_theta even so the calibration grid "
                          "can be exactly half as fine")
    coarse_grid = WarpedProductGrid(fine_grid.n, fine_grid.R1, fine_grid.R2,
                                    (fine_grid.N_r + 1) // 2 - 1, fine_grid.N_theta // 2,
                                    fine_grid.profile)
    eps = sec.get("eps", 0.25)
    if not coarse_grid.resolved(eps):
        raise ConfigError(f"eps = {eps} is not resolved on the calibration grid "
                          f"(h_r = {coarse_grid.h_r:.4g}, need <= {eps / 10:.4g})")
    sigma = sec.get("sigma", 0.5)
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    j_min, j_max = sec.get("j_min", 0, int), sec.get("j_max", 6, int)
    if j_max < j_min:
        raise ConfigError("j_max must be >= j_min")
    samples = sec.get("swap_samples", 200, int)
    cal = sec.get("calibration_samples", 20, int)
    support = sec.get("sparse_support", 3, int)
    if samples < 1 or cal < 1 or support < 1:
        raise ConfigError("sample counts and sparse_support must be positive")
    return StabilityConfig(
        _family(sec, fine_grid), _family(sec, coarse_grid),
        _bump(sec, "theta", 0.5, 1.0), _bump(sec, "theta1", 1.0, 2.0), _bump(sec, "chi", 1.0, 2.0),
        sigma, eps, list(range(j_min, j_max + 1)), samples, cal, support,
        seed if seed is not None else sec.get("seed", 7, int))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

ABSTRACT_HEADER = ["seed", "N", "s", "sigma", "p", "lhs", "besov", "sobolev", "constant",
                   "rhs", "margin", "vacuous", "holds"]
SCALING_HEADER = ["epsilon", "lp", "h_minus_sigma", "besov_modified", "h_s", "theorem_ratio"]
STABILITY_HEADER = ["grid", "j", "ratio_modified", "ratio_localized", "theta_swap_K"]
NORMS_HEADER = ["vector", "p", "lp", "s", "h_dot_s", "h_s", "sigma", "besov_homogeneous",
                "besov_modified"]


def run_ensemble(cfg: AbstractConfig, jobs: int = 1) -> list[InstanceResult]:
    task = functools.partial(ensemble_instance, cfg.seed, ranges=cfg.ranges, theta=cfg.theta)
    indices = range(cfg.instances)
    if jobs <= 1:
        return [task(i) for i in indices]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(task, indices, chunksize=max(1, cfg.instances // (4 * jobs))))


def cmd_verify_abstract(cfg: AbstractConfig, out, jobs: int = 1) -> int:
    results = run_ensemble(cfg, jobs)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ABSTRACT_HEADER)
    for res in results:
        r = res.report
        writer.writerow([fmt(cfg.seed), fmt(res.N), fmt(r.s), fmt(r.sigma), fmt(r.p), fmt(r.lhs),
                         fmt(r.besov.value), fmt(r.sobolev), fmt(r.constant), fmt(r.rhs),
                         fmt(r.margin), fmt(r.vacuous), fmt(r.holds)])
    failures = sum(not res.report.holds for res in results)
    vacuous = sum(res.report.vacuous for res in results)
    stray = sum(res.report.vacuous and not res.kernel_component for res in results)
    print(f"verify-abstract: {len(results)} instances, {failures} failures, "
          f"{vacuous} vacuous ({stray} without kernel component)", file=sys.stderr)
    return EXIT_OK if failures == 0 and stray == 0 else EXIT_FAIL


def cmd_scaling(cfg: ScalingConfig, out) -> int:
    fam = cfg.family
    result = scaling_experiment(fam.grid, cfg.theta, cfg.s, cfg.sigma, cfg.eps, fam.psi, fam.gamma)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SCALING_HEADER)
    for row in result.rows:
        writer.writerow([fmt(row.epsilon), fmt(row.lp), fmt(row.h_minus_sigma),
                         fmt(row.besov_modified), fmt(row.h_s), fmt(row.theorem_ratio)])
    fits = (result.fit_h_minus_sigma, result.fit_besov, result.fit_h_s)
    writer.writerow(["slope", fmt(result.lp_spread)] + [fmt(f.slope) for f in fits]
                    + [fmt(result.ratio_spread)])
    writer.writerow(["residual", ""] + [fmt(f.residual) for f in fits] + [""])
    bands = result.bands(cfg.slope_tolerance, cfg.ratio_spread_limit)
    for name, ok in bands.items():
        print(f"scaling: {name}: {'pass' if ok else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if all(bands.values()) else EXIT_FAIL


def sparse_vectors(size: int, count: int, support: int, seed) -> np.ndarray:
    """Random vectors with ``support`` nonzero complex Gaussian entries each."""
    rng = np.random.default_rng(seed)
    out = np.zeros((count, size), dtype=complex)
    for row in out:
        idx = rng.choice(size, size=min(support, size), replace=False)
        row[idx] = rng.standard_normal(idx.size) + 1j * rng.standard_normal(idx.size)
    return out


@dataclass(frozen=True)
class StabilityOutcome:
    grid: str
    j_values: list[int]
    ratios_modified: list[float]
    ratios_localized: list[float]
    swap_K: float

    @property
    def sup_modified(self) -> float:
        return max(self.ratios_modified)

    @property
    def sup_localized(self) -> float:
        return max(self.ratios_localized)


def run_stability(cfg: StabilityConfig) -> tuple[StabilityOutcome, StabilityOutcome]:
    outcomes = []
    for label, fam, count, seed_offset in (("fine", cfg.fine, cfg.swap_samples, 0),
                                           ("calibration", cfg.calibration,
                                            cfg.calibration_samples, 1)):
        A = laplace_beltrami_root(fam.grid)
        u = fam.sample(cfg.eps)
        rep = verify_localization_stability(A, cfg.theta, cfg.chi, u, cfg.sigma, cfg.j_values)
        vecs = sparse_vectors(fam.grid.size, count, cfg.sparse_support,
                              np.random.SeedSequence(cfg.seed, spawn_key=(seed_offset,)))
        _, _, K = theta_swap_spread(A, cfg.theta, cfg.theta1, vecs, cfg.sigma)
        outcomes.append(StabilityOutcome(label, rep.j_values, rep.ratios_modified,
                                         rep.ratios_localized, K))
    return outcomes[0], outcomes[1]


def stability_checks(fine: StabilityOutcome, cal: StabilityOutcome) -> dict:
    finite = all(math.isfinite(x) for x in (fine.sup_modified, fine.sup_localized))
    return {
        "sup_ratios_finite": finite,
        "ratio_modified_vs_calibration": fine.sup_modified <= 2.0 * cal.sup_modified,
        "ratio_localized_vs_calibration": fine.sup_localized <= 2.0 * cal.sup_localized,
        "theta_swap_K_vs_calibration": fine.swap_K <= 2.0 * cal.swap_K,
    }


def cmd_stability(cfg: StabilityConfig, out) -> int:
    fine, cal = run_stability(cfg)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(STABILITY_HEADER)
    for res in (fine, cal):
        for j, a, b in zip(res.j_values, res.ratios_modified, res.ratios_localized):
            writer.writerow([res.grid, fmt(j), fmt(a), fmt(b), ""])
    for res in (fine, cal):
        writer.writerow([res.grid, "sup", fmt(res.sup_modified), fmt(res.sup_localized),
                         fmt(res.swap_K)])
    checks = stability_checks(fine, cal)
    for name, ok in checks.items():
        print(f"stability: {name}: {'pass' if ok else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


# ---------------------------------------------------------------------------
# operator/vector files
# ---------------------------------------------------------------------------

def parse_complex(token: str) -> complex:
    """Parse 'a+bi', 'bi', 'a' (also accepts a trailing j)."""
    t = token.strip().replace("I", "i")
    if t.endswith("i"):
        head = t[:-1]
        if head in ("", "+", "-"):
            head += "1"
        t = head + "j"
    try:
        return complex(t)
    except ValueError:
        raise ValueError(f"cannot parse complex entry {token!r}") from None


def read_operator_file(path):
    """N on the first line, then the weights, N matrix rows, then one vector per line."""
    with open(path) as fh:
        lines = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: empty file")
    try:
        N = int(lines[0].split()[0])
    except ValueError:
        raise ValueError(f"{path}: first line must hold N") from None
    if len(lines) < N + 2:
        raise ValueError(f"{path}: expected weights and {N} matrix rows after the header")

    def row(text, what):
        vals = [parse_complex(tok) for tok in text.replace(",", " ").split()]
        if len(vals) != N:
            raise ValueError(f"{path}: {what} has {len(vals)} entries, expected {N}")
        return vals

    weights = np.array(row(lines[1], "weight row"))
    if np.any(weights.imag != 0):
        raise ValueError(f"{path}: weights must be real")
    matrix = np.array([row(lines[2 + i], f"matrix row {i}") for i in range(N)])
    vectors = [np.array(row(ln, f"vector {k}")) for k, ln in enumerate(lines[N + 2:])]
    if not vectors:
        raise ValueError(f"{path}: no vectors after the matrix")
    return weights.real, matrix, vectors


def cmd_norms(path, out, p: float, s: float, sigma: float, theta: BumpFunction) -> int:
    weights, matrix, vectors = read_operator_file(path)
    A = eigendecompose(matrix, make_space(weights))
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(NORMS_HEADER)
    for k, u in enumerate(vectors):
        writer.writerow([fmt(k), fmt(p), fmt(lp_norm(A.space, u, p)), fmt(s),
                         fmt(sobolev_homogeneous(A, u, s)), fmt(sobolev_inhomogeneous(A, u, s)),
                         fmt(sigma), fmt(besov_homogeneous(A, theta, u, sigma).value),
                         fmt(besov_modified(A, theta, u, sigma))])
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with one section per subcommand")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--jobs", type=int,
                        help="worker processes (default: $SPECNORM_JOBS or 1)")
    parser = argparse.ArgumentParser(prog="specnorm", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify-abstract", parents=[common],
                   help="seeded ensemble check of the explicit-constant inequality")
    sub.add_parser("scaling", parents=[common],
                   help="oscillating-family scaling laws on a warped-product end")
    sub.add_parser("stability", parents=[common],
                   help="spectral-localization stability of the modified Besov norm")
    norms = sub.add_parser("norms", parents=[common], help="norm dump for an operator file")
    norms.add_argument("--input", required=True, help="operator/vector file")
    norms.add_argument("--p", type=float, default=4.0)
    norms.add_argument("--s", type=float, default=1.0)
    norms.add_argument("--sigma", type=float, default=1.0)
    norms.add_argument("--theta-c", type=float, default=0.5)
    norms.add_argument("--theta-S", type=float, default=1.0)
    return parser


def _jobs(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("SPECNORM_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"SPECNORM_JOBS must be an integer, got {env!r}") from None
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        parser = None
        if args.config:
            parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
            parser.optionxform = str.lower
            if not parser.read(args.config):
                raise ConfigError(f"cannot read config file {args.config}")
        jobs = _jobs(args.jobs)
        if args.command == "verify-abstract":
            cfg = abstract_config(parser, args.seed)
            run = functools.partial(cmd_verify_abstract, cfg, jobs=jobs)
        elif args.command == "scaling":
            run = functools.partial(cmd_scaling, scaling_config(parser))
        elif args.command == "stability":
            run = functools.partial(cmd_stability, stability_config(parser, args.seed))
        else:
            theta = BumpFunction(args.theta_c, args.theta_S)
            run = functools.partial(cmd_norms, args.input, p=args.p, s=args.s,
                                    sigma=args.sigma, theta=theta)
        out = open(args.out, "w", newline="") if args.out else sys.stdout
    except (ConfigError, ValueError, OSError, configparser.Error) as exc:
        print(f"specnorm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return run(out)
    except (ValueError, OSError) as exc:
        print(f"specnorm: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        if out is not sys.stdout:
            out.close()


if __name__ == "__main__":
    sys.exit(main())
