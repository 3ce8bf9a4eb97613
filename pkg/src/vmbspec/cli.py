"""Command-line front end.

    vmbspec coeffs   [--config FILE] [--out DIR]
    vmbspec branch   --species two --smin 1e-3 --smax 0.1 --steps 40
    vmbspec spectrum --species one --smin 0.05 --smax 0.05 --steps 1
    vmbspec gap      --species two --smin 0.5 --smax 5 --steps 4
    vmbspec decay    --scenario one_electric
    vmbspec validate [--seed N]

Configuration files use sections [run], [grid], [decay] and [tolerances]
with key = value lines. Exit codes: 0 success, 1 computation or
acceptance failure, 2 configuration error.
"""

import argparse
import configparser
import csv
import hashlib
import json
import re
import sys
import time
from contextlib import nullcontext
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from .collision import assemble
from .dispersion import asymptotic_coefficients, branch_seeds, dispersion_function, trace_branch
from .errors import ConfigError
from .modes import CANONICAL_FRAME, SPECIES, assemble_mode, canonical_species, g6_eigenvalues_closed, g6_matrix, make_frame
from .semigroup import (CHANNELS, DECAY_TARGETS, SCENARIOS, ExperimentConfig, check_slopes, make_initial,
                        propagate_mode, synthesize_decay)
from .spectra import crossvalidate, default_cut, eig_all, gap_scan, pair_for
from .velocity import build_grid, chi_matrix

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

# default s ranges per command and regime: (smin, smax, steps)
S_DEFAULTS = {
    ("branch", "low"): (1e-3, 0.1, 40),
    ("branch", "high"): (20.0, 80.0, 7),
    ("spectrum", "low"): (0.05, 0.05, 1),
    ("spectrum", "high"): (20.0, 20.0, 1),
    ("gap", "low"): (0.5, 5.0, 4),
    ("gap", "high"): (0.5, 5.0, 4),
}
DEFAULT_BRANCH = {("two_species", "low"): 1, ("one_species", "low"): 0, ("two_species", "high"): 3,
                  ("one_species", "high"): 3}


@dataclass(frozen=True)
class RunConfig:
    # [run]
    species: str = "two_species"
    scenario: str = "two_species_field"
    regime: str = "low"
    branch: int = None
    smin: float = None
    smax: float = None
    steps: int = None
    seed: int = 0
    threads: int = 1
    trials: int = 200
    out: str = "out"
    # [grid]
    n_per_axis: int = 12
    refine_n: int = 16
    # [decay]
    decay_n_per_axis: int = 8
    n_radial: int = 48
    s_min: float = 1e-3
    s_max: float = 8.0
    t_min: float = 1.0
    t_max: float = 500.0
    n_times: int = 40
    window_lo: float = 50.0
    window_hi: float = 500.0
    d0: float = 1.0
    r0: float = 1.0
    direction_mode: str = "rotate"
    # [tolerances]
    newton_tol: float = 1e-10
    cut: float = None
    slope_tol: float = 0.08
    micro_slope_tol: float = 0.10
    contraction_tol: float = 1e-8

    def experiment(self):
        return ExperimentConfig(scenario=self.scenario, n_radial=self.n_radial, s_min=self.s_min,
                                s_max=self.s_max, t_min=self.t_min, t_max=self.t_max, n_times=self.n_times,
                                n_per_axis=self.decay_n_per_axis, d0=self.d0, r0=self.r0,
                                direction_mode=self.direction_mode)

    def s_grid(self, command):
        lo, hi, k = S_DEFAULTS[(command, self.regime)]
        lo = lo if self.smin is None else self.smin
        hi = hi if self.smax is None else self.smax
        k = k if self.steps is None else self.steps
        if k == 1:
            return np.array([lo])
        return np.geomspace(lo, hi, k)

    def digest(self):
        """Short hash of everything that affects the numbers (output dir excluded)."""
        d = asdict(self)
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# (section, key) -> (field name, type)
_KEYS = {
    ("run", "species"): ("species", str), ("run", "scenario"): ("scenario", str),
    ("run", "regime"): ("regime", str), ("run", "branch"): ("branch", int),
    ("run", "smin"): ("smin", float), ("run", "smax"): ("smax", float), ("run", "steps"): ("steps", int),
    ("run", "seed"): ("seed", int), ("run", "threads"): ("threads", int), ("run", "trials"): ("trials", int),
    ("run", "out"): ("out", str),
    ("grid", "n_per_axis"): ("n_per_axis", int), ("grid", "refine_n"): ("refine_n", int),
    ("decay", "n_per_axis"): ("decay_n_per_axis", int), ("decay", "n_radial"): ("n_radial", int),
    ("decay", "s_min"): ("s_min", float), ("decay", "s_max"): ("s_max", float),
    ("decay", "t_min"): ("t_min", float), ("decay", "t_max"): ("t_max", float),
    ("decay", "n_times"): ("n_times", int), ("decay", "window_lo"): ("window_lo", float),
    ("decay", "window_hi"): ("window_hi", float), ("decay", "d0"): ("d0", float), ("decay", "r0"): ("r0", float),
    ("decay", "direction_mode"): ("direction_mode", str),
    ("tolerances", "newton"): ("newton_tol", float), ("tolerances", "cut"): ("cut", float),
    ("tolerances", "slope"): ("slope_tol", float), ("tolerances", "micro_slope"): ("micro_slope_tol", float),
    ("tolerances", "contraction"): ("contraction_tol", float),
}
_FIELD_LINE = {name: key for key, (name, _) in _KEYS.items()}


def _key_lines(text):
    """Line number of every (section, key) in a config file."""
    out, section = {}, None
    for k, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = k
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = k
    return out


def _convert(typ, raw):
    if typ is int:
        return int(raw)
    if typ is float:
        val = float(raw)
        if not np.isfinite(val):
            raise ValueError("not finite")
        return val
    return raw.strip()


def parse_config(path):
    """Read a config file into (overrides dict, line map). Raises ConfigError."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), strict=True, interpolation=None)
    try:
        parser.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("missing section header", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(f"cannot parse {line!r}", lineno) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], exc.lineno) from None
    lines = _key_lines(text)
    values = {}
    for section in parser.sections():
        if section not in ("run", "grid", "decay", "tolerances"):
            raise ConfigError(f"unknown section [{section}]", lines.get((section, None)))
        for key, raw in parser.items(section):
            where = lines.get((section, key))
            if (section, key) not in _KEYS:
                raise ConfigError(f"unknown key {key!r} in [{section}]", where)
            name, typ = _KEYS[(section, key)]
            try:
                values[name] = _convert(typ, raw)
            except ValueError:
                raise ConfigError(f"{key} = {raw!r} is not a valid {typ.__name__}", where) from None
    return values, lines


def check_config(cfg, lines=None):
    """Range checks on every field, before any computation."""
    lines = lines or {}

    def fail(name, msg):
        raise ConfigError(msg, lines.get(_FIELD_LINE.get(name)))

    try:
        species = canonical_species(cfg.species)
    except ValueError:
        fail("species", f"species must be one of {SPECIES} (or 'one', 'two'), got {cfg.species!r}")
    if cfg.scenario not in SCENARIOS:
        fail("scenario", f"scenario must be one of {SCENARIOS}, got {cfg.scenario!r}")
    if cfg.regime not in ("low", "high"):
        fail("regime", "regime must be 'low' or 'high'")
    if cfg.smin is not None and not cfg.smin > 0:
        fail("smin", "smin must be positive")
    if cfg.smax is not None and not cfg.smax > 0:
        fail("smax", "smax must be positive")
    if cfg.smin is not None and cfg.smax is not None and cfg.smax < cfg.smin:
        fail("smax", "smax must not be below smin")
    if cfg.steps is not None and not 1 <= cfg.steps <= 10000:
        fail("steps", "steps must lie in [1, 10000]")
    if cfg.seed < 0:
        fail("seed", "seed must be nonnegative")
    if not 1 <= cfg.threads <= 256:
        fail("threads", "threads must lie in [1, 256]")
    if not 1 <= cfg.trials <= 100000:
        fail("trials", "trials must lie in [1, 100000]")
    if not 4 <= cfg.n_per_axis <= 16:
        fail("n_per_axis", "n_per_axis must lie in [4, 16]")
    if cfg.refine_n != 0 and not cfg.n_per_axis < cfg.refine_n <= 16:
        fail("refine_n", "refine_n must be 0 (off) or lie in (n_per_axis, 16]")
    if not 0 < cfg.window_lo < cfg.window_hi:
        fail("window_hi", "need 0 < window_lo < window_hi")
    if not 0 < cfg.newton_tol <= 1e-3:
        fail("newton_tol", "newton tolerance must lie in (0, 1e-3]")
    if cfg.cut is not None and not cfg.cut < 0:
        fail("cut", "the half-plane cut must be negative")
    for name in ("slope_tol", "micro_slope_tol", "contraction_tol"):
        if not 0 < getattr(cfg, name) < 1:
            fail(name, f"{name} must lie in (0, 1)")
    try:
        cfg.experiment().validate()
    except ConfigError as exc:
        raise ConfigError(f"[decay] {exc}") from None
    return replace(cfg, species=species)


# ---------------------------------------------------------------- output

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_csv(path, header, rows, digest):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header) + ["config_hash"])
        for row in rows:
            w.writerow([_fmt(x) for x in row] + [digest])
    return path


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


# ---------------------------------------------------------------- commands

COEFF_NAMES = ("a0", "a1", "a2", "a3", "b1", "b2", "a1_two", "kappa1", "kappa2", "kappa3")


def cmd_coeffs(cfg, out):
    coarse = asymptotic_coefficients(grid=build_grid(cfg.n_per_axis)).as_dict()
    fine = asymptotic_coefficients(grid=build_grid(cfg.refine_n)).as_dict() if cfg.refine_n else None
    rows, ok = [], True
    print(f"{'name':>8} {'value':>22} {'refinement_delta':>18}")
    for name in COEFF_NAMES:
        delta = fine[name] - coarse[name] if fine else None
        rows.append((name, coarse[name], delta))
        print(f"{name:>8} {coarse[name]:22.15g} {'' if delta is None else f'{delta:18.3e}'}")
    write_csv(out / "coeffs.csv", ("name", "value", "refinement_delta"), rows, cfg.digest())
    ident = abs(coarse["kappa3"] * coarse["a1_two"] - 1.0)
    if ident > 1e-6:
        _log(f"FAIL identity kappa3 * a1(two) = 1: off by {ident:.3e}")
        ok = False
    if fine:
        for name in COEFF_NAMES:
            rel = abs(fine[name] - coarse[name]) / coarse[name]
            if rel >= 0.02:
                _log(f"FAIL refinement {name}: relative change {rel:.3e} between n={cfg.n_per_axis} and n={cfg.refine_n}")
                ok = False
    return EXIT_OK if ok else EXIT_FAIL


def cmd_branch(cfg, out):
    cm = assemble(build_grid(cfg.n_per_axis))
    s_grid = cfg.s_grid("branch")
    seeds = branch_seeds(cfg.species, cfg.regime, s=s_grid[0])
    label = DEFAULT_BRANCH[(cfg.species, cfg.regime)] if cfg.branch is None else cfg.branch
    match = [sd for sd in seeds if sd[0] == label]
    if not match:
        raise ConfigError(f"branch {label} is not available; choose from {[sd[0] for sd in seeds]}")
    _, name, seed, mult = match[0]
    Dfun = dispersion_function(name, cm, cfg.species)
    br = trace_branch(Dfun, s_grid, seed, cfg.species, label, mult, tol=cfg.newton_tol)
    rows = [(s, lam.real, lam.imag, r, c, br.multiplicity)
            for s, lam, r, c in zip(br.s, br.lam, br.residual, br.converged)]
    write_csv(out / "branch.csv", ("s", "re_lambda", "im_lambda", "residual", "converged", "multiplicity"),
              rows, cfg.digest())
    n_conv = int(br.converged.sum())
    print(f"branch {label} ({name}): {n_conv}/{len(br)} points converged")
    if not br.complete:
        _log(br.message)
    return EXIT_OK if n_conv > 0 else EXIT_FAIL


def cmd_spectrum(cfg, out):
    cm = assemble(build_grid(cfg.n_per_axis))
    cut = default_cut(cm) if cfg.cut is None else cfg.cut
    rows = []
    for s in cfg.s_grid("spectrum"):
        op = assemble_mode(cfg.species, s, CANONICAL_FRAME, cm)
        rep = eig_all(op, seed=cfg.seed, validate_above=cut)
        ev = rep.in_halfplane(cut)
        for k, lam in enumerate(ev):
            rows.append((s, k, lam.real, lam.imag, pair_for(rep, lam).residual))
        print(f"s = {s:.6g}: {len(ev)} eigenvalues with Re > {cut:.6g}")
        for lam in ev:
            print(f"    {lam.real: .10e} {lam.imag:+.10e}i")
    write_csv(out / "spectrum.csv", ("s", "index", "re_lambda", "im_lambda", "residual"), rows, cfg.digest())
    return EXIT_OK


def cmd_gap(cfg, out):
    cm = assemble(build_grid(cfg.n_per_axis))
    table = gap_scan(cfg.species, cfg.s_grid("gap"), cm)
    write_csv(out / "gap.csv", ("s", "rightmost_re"), list(zip(table.s, table.rightmost)), cfg.digest())
    for s, r in zip(table.s, table.rightmost):
        print(f"s = {s:.6g}: rightmost Re lambda = {r:.10g}")
    print(f"alpha_emp = {table.alpha_emp:.10g}")
    return EXIT_OK if table.alpha_emp > 0 else EXIT_FAIL


def decay_targets(cfg):
    out = []
    for channel, target, tol, mode in DECAY_TARGETS[cfg.scenario]:
        if target is not None:
            # the table's one wider tolerance is the magnetic-case micro channel
            tol = cfg.micro_slope_tol if tol > 0.08 else cfg.slope_tol
        out.append((channel, target, tol, mode))
    return out


def cmd_decay(cfg, out):
    exp = cfg.experiment()
    t0 = time.perf_counter()
    curve = synthesize_decay(exp, progress=lambda k, m: _log(f"  radius {k}/{m}") if k % 8 == 0 or k == m else None)
    digest = cfg.digest()
    rows = []
    for k, t in enumerate(curve.times):
        rows.append([t] + [None if curve.channels[c] is None else curve.channels[c][k] for c in CHANNELS])
    write_csv(out / "decay.csv", ("t",) + CHANNELS, rows, digest)
    checks = check_slopes(curve, (cfg.window_lo, cfg.window_hi), decay_targets(cfg))
    print(f"scenario {cfg.scenario}: {len(curve.failures)} failed modes, {time.perf_counter() - t0:.1f} s")
    print(f"{'channel':>14} {'slope':>10} {'stderr':>9} {'target':>8} {'tol':>6} {'mode':>8}  result")
    summary = []
    for c in checks:
        target = "<0" if c.target is None else f"{c.target:.3f}"
        tol = "" if c.tolerance is None else f"{c.tolerance:.2f}"
        print(f"{c.channel:>14} {c.slope:10.4f} {c.stderr:9.4f} {target:>8} {tol:>6} {c.mode:>8}  "
              f"{'PASS' if c.passed else 'FAIL'}")
        summary.append((c.channel, c.slope, c.stderr, c.target, c.tolerance, c.mode, c.passed))
    write_csv(out / "decay_summary.csv", ("channel", "slope", "stderr", "target", "tolerance", "mode", "passed"),
              summary, digest)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


# ---------------------------------------------------------------- validation suite

def _random_frame(rng):
    omega = rng.standard_normal(3)
    return make_frame(omega, rng.standard_normal(3))


def _check_null_space(cm):
    worst = 0.0
    X = np.sqrt(cm.grid.weights)[:, None] * chi_matrix(cm.grid)
    for key, Q in (("L", X), ("L1", X[:, :1])):
        A = cm.sym[key]
        worst = max(worst, np.abs(A @ Q).max() / np.abs(A).max())
    ok = worst <= 1e-12 and cm.null_leakage <= 1e-8
    return ok, f"projected residual {worst:.2e}, raw leakage {cm.null_leakage:.2e}"


def _check_symmetry(cm):
    asym = max(np.abs(cm.sym[k] - cm.sym[k].T).max() / np.abs(cm.sym[k]).max() for k in ("L", "L1", "K", "nu"))
    top = max(np.linalg.eigvalsh(cm.sym[k])[-1] / np.abs(cm.sym[k]).max() for k in ("L", "L1"))
    return asym <= 1e-13 and top <= 1e-12, f"asymmetry {asym:.2e}, largest eigenvalue {top:.2e} (relative)"


def _check_coercivity(cm, n):
    if not (cm.mu_h > 0 and cm.mu_h1 > 0):
        return False, f"no spectral gap: mu_h = {cm.mu_h:.4g}, mu_h1 = {cm.mu_h1:.4g}"
    m = n - 2 if n - 2 >= 4 else n + 2
    other = assemble(build_grid(m))
    rel = max(abs(cm.mu_h - other.mu_h) / cm.mu_h, abs(cm.mu_h1 - other.mu_h1) / cm.mu_h1)
    detail = f"mu_h = {cm.mu_h:.6g}, mu_h1 = {cm.mu_h1:.6g}, change vs n={m}: {100 * rel:.2f}%"
    if rel >= 0.02:
        return False, detail + f" (limit 2%); resolution n={n} is insufficient, increase n_per_axis"
    return True, detail


def _check_dissipativity(cm, rng, maxwell_sign):
    worst = -np.inf
    for species in SPECIES:
        for s in (0.1, 2.0):
            A = assemble_mode(species, s, _random_frame(rng), cm, maxwell_sign=maxwell_sign).ortho
            top = np.linalg.eigvalsh(0.5 * (A + A.conj().T))[-1] / np.linalg.norm(A, 1)
            worst = max(worst, top)
    return worst <= 1e-12, f"largest eigenvalue of the Hermitian part {worst:.2e} (relative)"


def _check_g6(cm):
    g = cm.grid
    X = chi_matrix(g)
    n = g.size
    C = np.zeros((n + 4, 9))
    C[:n, :5] = X
    C[n:, 5:] = np.eye(4)
    Cl = np.zeros((9, n + 4))
    Cl[:5, :n] = (X * g.weights[:, None]).T
    Cl[5:, n:] = np.eye(4)
    block = eigen = 0.0
    for s in (0.1, 0.5, 1.0):
        G = Cl @ assemble_mode("one_species", s, CANONICAL_FRAME, cm).matrix @ C
        block = max(block, np.abs(G - g6_matrix(s)).max())
        ev = np.linalg.eigvals(G)
        ref = g6_eigenvalues_closed(s)
        cost = np.abs(ev[:, None] - ref[None, :])
        r, c = linear_sum_assignment(cost)
        eigen = max(eigen, cost[r, c].max())
    return block <= 1e-10 and eigen <= 1e-10, f"block error {block:.2e}, eigenvalue error {eigen:.2e}"


def _check_coefficients(cm):
    c = asymptotic_coefficients(cm)
    e1 = abs(c.kappa3 * c.a1_two - 1.0)
    e2 = abs(c.a3 - c.kappa1)
    e3 = abs(c.a0 - c.kappa2)
    return e1 <= 1e-6 and max(e2, e3) <= 1e-8, f"|k3 a1 - 1| = {e1:.1e}, |a3 - k1| = {e2:.1e}, |a0 - k2| = {e3:.1e}"


def _check_gauss(cm, rng):
    """Gauss's law holds for the field scenarios and fails by at least c for one_electric."""
    worst, offset = 0.0, np.inf
    for _ in range(5):
        xi = rng.standard_normal(3) * rng.uniform(0.1, 3.0)
        c = np.exp(0.5) * np.exp(-0.5 * xi @ xi)
        for scenario in ("two_species_field", "one_magnetic"):
            mode = make_initial(scenario, xi, cm.grid)
            worst = max(worst, mode.gauss_residual(cm.grid) / c)
        offset = min(offset, make_initial("one_electric", xi, cm.grid).gauss_residual(cm.grid) / c)
    ok = worst <= 1e-12 and offset >= 1.0 - 1e-12
    return ok, f"relative residual {worst:.2e}; electric-dominating offset / c = {offset:.4f} (must be >= 1)"


def _check_contraction(cm, rng, trials, tol):
    """Random (mode, U0, t <= 100); a handful of operators, many initial states each."""
    n_ops = min(6, trials)
    worst = 0.0
    for k in range(n_ops):
        species = SPECIES[k % 3]
        s = float(np.exp(rng.uniform(np.log(1e-2), np.log(10.0))))
        frame = CANONICAL_FRAME if k % 2 == 0 else _random_frame(rng)
        op = assemble_mode(species, s, frame, cm)
        for _ in range(trials // n_ops + (k < trials % n_ops)):
            U0 = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
            t = float(np.exp(rng.uniform(np.log(1e-3), np.log(100.0))))
            res = propagate_mode(op, U0, [0.0, t])
            if res.failed:
                return False, f"propagation failed at s = {s:.4g}: {res.message}"
            growth = op.metric.norm(res.states[-1]) / op.metric.norm(U0)
            worst = max(worst, growth)
    return worst <= 1.0 + tol, f"max growth {worst:.12f} over {trials} trials"


def _check_conjugation(cm):
    ev = eig_all(assemble_mode("one_species", 0.05, CANONICAL_FRAME, cm), validate=1).eigenvalues
    pts = np.column_stack([ev.real, ev.imag])
    d, _ = cKDTree(pts).query(np.column_stack([ev.real, -ev.imag]))
    scale = np.abs(ev).max()
    return d.max() <= 1e-8 * scale, f"spectrum vs its conjugate: {d.max():.2e}"


def _check_branch(cm):
    s_grid = np.geomspace(1e-3, 0.04, 6)
    Dfun = dispersion_function("two_low1", cm)
    br = trace_branch(Dfun, s_grid, 0j, "two_species", 1, 2)
    if not br.converged.all():
        return False, f"two-species branch did not converge: {br.message}"
    idx = [1, 3, 5]
    sub = replace(br, s=br.s[idx], lam=br.lam[idx], residual=br.residual[idx], converged=br.converged[idx],
                  ambiguous=br.ambiguous[idx])
    dist, _ = crossvalidate(sub, lambda s: assemble_mode("two_species", s, CANONICAL_FRAME, cm))
    return dist <= 1e-6, f"max distance to nearest eigenvalue {dist:.2e}"


def run_validation(cfg, maxwell_sign=1.0, only=None):
    """Run the invariant suite; returns a list of (name, passed, detail).

    ``maxwell_sign`` flips the Maxwell block of the assembled modes for
    fault-injection tests. ``only`` restricts the run to named checks.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_per_axis
    try:
        cm = assemble(build_grid(n))
    except Exception as exc:
        return [("assembly", False, f"{type(exc).__name__}: {exc}")]
    checks = [
        ("null_space", lambda: _check_null_space(cm)),
        ("symmetry", lambda: _check_symmetry(cm)),
        ("coercivity", lambda: _check_coercivity(cm, n)),
        ("dissipativity", lambda: _check_dissipativity(cm, rng, maxwell_sign)),
        ("g6_closed_form", lambda: _check_g6(cm)),
        ("coefficient_identities", lambda: _check_coefficients(cm)),
        ("gauss_law", lambda: _check_gauss(cm, rng)),
        ("contraction", lambda: _check_contraction(cm, rng, cfg.trials, cfg.contraction_tol)),
        ("conjugation_symmetry", lambda: _check_conjugation(cm)),
        ("branch_crossvalidation", lambda: _check_branch(cm)),
    ]
    results = []
    for name, fn in checks:
        if only is not None and name not in only:
            continue
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results


def cmd_validate(cfg, out):
    results = run_validation(cfg)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    write_csv(out / "validate.csv", ("check", "passed", "detail"), results, cfg.digest())
    failed = [name for name, ok, _ in results if not ok]
    if failed:
        _log(f"first failing invariant: {failed[0]}")
        return EXIT_FAIL
    return EXIT_OK


COMMANDS = {"coeffs": cmd_coeffs, "branch": cmd_branch, "spectrum": cmd_spectrum, "gap": cmd_gap,
            "decay": cmd_decay, "validate": cmd_validate}


def build_parser():
    p = argparse.ArgumentParser(prog="vmbspec", description="Spectra and decay of linearized kinetic plasma modes.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="key = value file with [run], [grid], [decay], [tolerances]")
    p.add_argument("--out", help="output directory (default: out)")
    p.add_argument("--species", help="two_species, one_species or boltzmann")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--regime", choices=("low", "high"))
    p.add_argument("--branch", type=int, help="branch label for the branch command")
    p.add_argument("--smin", type=float)
    p.add_argument("--smax", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--tmax", type=float)
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    return p


def resolve_config(args):
    values, lines = parse_config(args.config) if args.config is not None else ({}, {})
    cfg = RunConfig(**values)
    flags = {"out": args.out, "species": args.species, "scenario": args.scenario, "regime": args.regime,
             "branch": args.branch, "smin": args.smin, "smax": args.smax, "steps": args.steps,
             "t_max": args.tmax, "threads": args.threads, "seed": args.seed}
    overrides = {k: v for k, v in flags.items() if v is not None}
    # a flag takes precedence over the file, so its line number no longer applies
    lines = {key: ln for key, ln in lines.items() if _KEYS.get(key, (None,))[0] not in overrides}
    return check_config(replace(cfg, **overrides), lines)


def _thread_limit(n):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=n)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    out = Path(cfg.out)
    try:
        with _thread_limit(cfg.threads):
            return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        _log(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        _log(f"{args.command} failed: {type(exc).__name__}: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
