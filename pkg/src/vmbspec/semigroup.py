"""Mode-by-mode propagation and synthesis of L^2 decay curves.

The physical-space norms are assembled from single Fourier modes by
Parseval: ||u(t)||^2_{L^2_x} = int |u_hat(t, xi)|^2 dxi, evaluated with a
radial Gauss-Legendre rule (in log s) times a fixed direction set.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy import stats

from .collision import assemble
from .errors import ChannelDeadError, ConfigError, EigenSolverError, ModeFailureError
from .modes import CANONICAL_FRAME, assemble_mode, make_frame, mode_blocks
from .velocity import build_grid, chi_matrix

SCENARIOS = ("two_species_field", "one_magnetic", "one_electric", "boltzmann")
SCENARIO_SPECIES = {"two_species_field": "two_species", "one_magnetic": "one_species",
                    "one_electric": "one_species", "boltzmann": "boltzmann"}
CHANNELS = ("norm_f", "norm_E", "norm_B", "norm_density", "norm_momentum", "norm_energy",
            "norm_micro", "norm_pd", "norm_pr")
# (channel, target slope, tolerance, fit mode); a semilog target of None
# means "strictly negative"
DECAY_TARGETS = {
    "two_species_field": [("norm_B", -0.75, 0.08, "loglog"), ("norm_E", -1.25, 0.08, "loglog"),
                          ("norm_pr", -1.25, 0.08, "loglog"), ("norm_pd", None, None, "semilog")],
    "boltzmann": [("macro", -0.75, 0.08, "loglog"), ("norm_micro", -1.25, 0.08, "loglog")],
    "one_magnetic": [("norm_f", -0.625, 0.08, "loglog"), ("norm_E", -0.75, 0.08, "loglog"),
                     ("norm_B", -0.375, 0.08, "loglog"), ("norm_density", -1.25, 0.08, "loglog"),
                     ("norm_energy", -0.75, 0.08, "loglog"), ("norm_micro", -0.875, 0.10, "loglog")],
    "one_electric": [("norm_f", -0.25, 0.08, "loglog"), ("norm_E", -0.25, 0.08, "loglog"),
                     ("norm_B", -0.375, 0.08, "loglog"), ("norm_density", -0.75, 0.08, "loglog")],
}
CONTRACTION_TOL = 1e-8
EIGBASIS_COND_MAX = 1e8
FAILURE_FRACTION = 1e-3


def direction_set():
    """14 unit vectors: the 8 cube diagonals, +-e1, +-e2 and +-(e1 + e2)/sqrt 2.

    None of them is parallel to e3, where the transverse profile vector
    is undefined.
    """
    d = [np.array([a, b, c]) / np.sqrt(3.0) for a in (1, -1) for b in (1, -1) for c in (1, -1)]
    h = 1.0 / np.sqrt(2.0)
    d += [np.array(v, dtype=float) for v in ([1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0])]
    d += [np.array([h, h, 0.0]), np.array([-h, -h, 0.0])]
    return np.array(d)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "one_magnetic"
    n_radial: int = 48
    s_min: float = 1e-3
    s_max: float = 8.0
    n_directions: int = 14
    t_min: float = 1.0
    t_max: float = 500.0
    n_times: int = 40
    n_per_axis: int = 8
    d0: float = 1.0
    r0: float = 1.0
    direction_mode: str = "rotate"

    @property
    def species(self):
        return SCENARIO_SPECIES[self.scenario]

    def validate(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if not 4 <= self.n_radial <= 2000:
            raise ConfigError("n_radial must lie in [4, 2000]")
        if not 0 < self.s_min < self.s_max <= 100:
            raise ConfigError("need 0 < s_min < s_max <= 100")
        if self.n_directions != 14:
            raise ConfigError("only the fixed 14-point direction set is available")
        if not 0 < self.t_min < self.t_max:
            raise ConfigError("need 0 < t_min < t_max")
        if not 2 <= self.n_times <= 10000:
            raise ConfigError("n_times must lie in [2, 10000]")
        if not 4 <= self.n_per_axis <= 16:
            raise ConfigError("n_per_axis must lie in [4, 16]")
        if not (self.d0 > 0 and self.r0 > 0):
            raise ConfigError("d0 and r0 must be positive")
        if self.direction_mode not in ("rotate", "direct"):
            raise ConfigError("direction_mode must be 'rotate' or 'direct'")
        # the eigen-based propagator has no step restriction; this only keeps
        # the fallback stepper within a bounded number of steps
        if self.t_max * self.s_max > 1e6:
            raise ConfigError("t_max * s_max exceeds the propagation budget 1e6")
        return self

    def times(self):
        t = np.geomspace(self.t_min, self.t_max, self.n_times)
        return np.concatenate([[0.0], t])

    def radial_rule(self):
        """Nodes and weights for int_{s_min}^{s_max} g(s) ds, Gauss-Legendre in log s."""
        x, w = np.polynomial.legendre.leggauss(self.n_radial)
        a, b = np.log(self.s_min), np.log(self.s_max)
        u = 0.5 * (b - a) * x + 0.5 * (b + a)
        s = np.exp(u)
        return s, 0.5 * (b - a) * w * s


@dataclass(frozen=True)
class InitialMode:
    f0: np.ndarray
    E0: np.ndarray
    B0: np.ndarray
    xi: np.ndarray
    scenario: str

    @property
    def s(self):
        return float(np.linalg.norm(self.xi))

    def gauss_residual(self, grid):
        """|i xi . E0 - (f0, chi_0)|."""
        n0 = np.sum(grid.weights * self.f0 * chi_matrix(grid)[:, 0])
        return float(abs(1j * (self.xi @ self.E0) - n0))


def transverse_unit(xi):
    """(-xi2, xi1, 0) / |(xi1, xi2)|."""
    xi = np.asarray(xi, dtype=float)
    r = np.hypot(xi[0], xi[1])
    if r < 1e-12 * max(np.linalg.norm(xi), 1e-300):
        raise ValueError("xi is parallel to e3; the transverse profile vector is undefined there")
    return np.array([-xi[1], xi[0], 0.0]) / r


def make_initial(scenario, xi, grid, d0=1.0, r0=1.0):
    """Fourier-side initial data of one scenario at frequency ``xi``.

    c = d0 exp(r0^2/2) exp(-|xi|^2/2), t = transverse_unit(xi), omega = xi/|xi|.
    one_magnetic:      f = c (|xi| chi_0 + chi_4), E = c (-i omega + t), B = c t
    one_electric:      f = c (chi_0 + chi_4),      E = c (omega + t),    B = c t
    two_species_field: f = c |xi| chi_0,           E = -i c omega,       B = c t
    boltzmann:         f = c (chi_0 + chi_4)
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    xi = np.asarray(xi, dtype=float)
    s = float(np.linalg.norm(xi))
    if not s > 0:
        raise ValueError("xi must be nonzero")
    omega = xi / s
    X = chi_matrix(grid)
    c = d0 * np.exp(0.5 * r0 * r0) * np.exp(-0.5 * s * s)
    zero = np.zeros(3, dtype=complex)
    if scenario == "boltzmann":
        return InitialMode(c * (X[:, 0] + X[:, 4]).astype(complex), zero, zero, xi, scenario)
    t = transverse_unit(xi)
    if scenario == "one_magnetic":
        f = c * (s * X[:, 0] + X[:, 4])
        E = c * (-1j * omega + t)
    elif scenario == "one_electric":
        f = c * (X[:, 0] + X[:, 4])
        E = c * (omega + t)
    else:
        f = c * s * X[:, 0]
        E = -1j * c * omega
    return InitialMode(f.astype(complex), np.asarray(E, dtype=complex), (c * t).astype(complex), xi, scenario)


def initial_state(mode, frame, field_coupled=True):
    """State vector (f, omega x E, omega x B in the frame) of an InitialMode."""
    if not field_coupled:
        return mode.f0.copy()
    cE = np.cross(frame.omega, mode.E0)
    cB = np.cross(frame.omega, mode.B0)
    extra = np.array([cE @ frame.W1, cE @ frame.W2, cB @ frame.W1, cB @ frame.W2])
    return np.concatenate([mode.f0, extra])


def reconstruct_fields(state, xi, grid, frame=None):
    """(f, E, B) from a state; E carries the longitudinal part fixed by Gauss's law."""
    xi = np.asarray(xi, dtype=float)
    s = float(np.linalg.norm(xi))
    n = grid.size
    f = state[:n]
    if len(state) == n:
        return f, None, None
    if frame is None:
        frame = make_frame(xi / s)
    x1, x2, y1, y2 = state[n:n + 4]
    n0 = np.sum(grid.weights * f * chi_matrix(grid)[:, 0])
    E = -1j * xi / s**2 * n0 - (x1 * frame.W2 - x2 * frame.W1)
    B = -(y1 * frame.W2 - y2 * frame.W1)
    return f, E, B


# ---------------------------------------------------------------- propagation

class _EigenPropagator:
    """exp(tA) through one eigendecomposition per invariant block."""

    def __init__(self, op):
        self.op = op
        blocks = mode_blocks(op)
        A = op.ortho
        if blocks is None:
            blocks = [(None, np.eye(op.dim))]
        self.parts = []
        self.cond = 1.0
        for _, B in blocks:
            Ab = B.T @ A @ B
            w, V = sla.eig(Ab)
            cond = np.linalg.cond(V)
            self.cond = max(self.cond, cond)
            self.parts.append((B, w, V, sla.lu_factor(V)))

    def __call__(self, z0, times):
        out = np.zeros((len(times), len(z0)), dtype=complex)
        for B, w, V, lu in self.parts:
            zb = B.T @ z0
            if not np.any(zb):
                continue
            c = sla.lu_solve(lu, zb)
            out += (V @ (np.exp(np.outer(w, times)) * c[:, None])).T @ B.T
        out[np.asarray(times) == 0] = z0
        return out


def pade_propagate(A, z0, times, tol=1e-11, h0=None, max_steps=2_000_000):
    """exp(tA) z0 by the (2,2) Pade (implicit, A-stable) scheme with step doubling.

    Each step is compared with two half steps; the pair is combined by
    Richardson extrapolation and the step size halves or doubles on the
    local error estimate.
    """
    m = A.shape[0]
    eye = np.eye(m)
    A2 = A @ A
    cache = {}

    def step(z, h):
        if h not in cache:
            N = eye + 0.5 * h * A + (h * h / 12.0) * A2
            D = eye - 0.5 * h * A + (h * h / 12.0) * A2
            cache[h] = (N, sla.lu_factor(D))
        N, lu = cache[h]
        return sla.lu_solve(lu, N @ z)

    anorm = max(np.linalg.norm(A, 1), 1e-12)
    h = h0 if h0 is not None else 0.5 / anorm
    t, z = 0.0, np.asarray(z0, dtype=complex)
    out = np.zeros((len(times), m), dtype=complex)
    steps = 0
    for k, T in enumerate(times):
        while t < T - 1e-14 * max(T, 1.0):
            hh = min(h, T - t)
            big = step(z, hh)
            half = step(step(z, 0.5 * hh), 0.5 * hh)
            err = np.linalg.norm(half - big) / 15.0 / max(np.linalg.norm(half), 1e-300)
            steps += 1
            if steps > max_steps:
                raise EigenSolverError("Pade stepper exceeded its step budget")
            if err <= tol:
                z = half + (half - big) / 15.0
                t += hh
                if err < tol / 64.0 and hh == h:
                    h *= 2.0
            else:
                h = 0.5 * hh
        out[k] = z
    return out


@dataclass
class PropagationResult:
    states: np.ndarray
    method: str
    max_growth: float
    failed: bool = False
    message: str = ""


def propagate_mode(op, U0, times, method="auto"):
    """U(t) = exp(t A) U0 at each of ``times`` (raw state coordinates).

    method "eig" uses one eigendecomposition, "pade" the step-doubling
    stepper, "auto" the former unless its eigenbasis condition exceeds 1e8
    or the contraction check fails. Contraction in the weighted norm is
    checked at every output time.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be nonnegative and increasing")
    metric = op.metric
    z0 = metric.to_ortho(np.asarray(U0, dtype=complex))
    n0 = np.linalg.norm(z0)

    def run(kind):
        if kind == "eig":
            # one decomposition per operator, reused for every initial state
            prop = op.__dict__.get("_eig_propagator")
            if prop is None:
                prop = op.__dict__["_eig_propagator"] = _EigenPropagator(op)
            if prop.cond > EIGBASIS_COND_MAX:
                raise EigenSolverError(f"eigenbasis condition {prop.cond:.3e} exceeds {EIGBASIS_COND_MAX:.0e}")
            Z = prop(z0, times)
        else:
            Z = pade_propagate(op.ortho, z0, times)
        growth = float(np.max(np.linalg.norm(Z, axis=1)) / n0) if n0 > 0 else 0.0
        if growth > 1.0 + CONTRACTION_TOL:
            raise EigenSolverError(f"contraction violated: growth factor {growth:.12g}")
        states = metric.from_ortho(Z.T).T
        return PropagationResult(states, kind, growth)

    order = {"auto": ("eig", "pade"), "eig": ("eig",), "pade": ("pade",)}[method]
    msg = []
    for kind in order:
        try:
            return run(kind)
        except (EigenSolverError, np.linalg.LinAlgError) as exc:
            msg.append(f"{kind}: {exc}")
    return PropagationResult(None, "none", np.nan, True, "; ".join(msg))


# ---------------------------------------------------------------- synthesis

@dataclass
class DecayCurve:
    times: np.ndarray
    channels: dict
    scenario: str
    xi_spec: dict
    failures: list = field(default_factory=list)

    def channel(self, name):
        if name == "macro":
            parts = [self.channels.get(k) for k in ("norm_density", "norm_momentum", "norm_energy")]
            return np.sqrt(sum(p**2 for p in parts))
        return self.channels.get(name)


def _mode_norms(f, E, B, s, grid, species):
    """Squared norms of every channel for one mode state."""
    w = grid.weights
    X = chi_matrix(grid)
    c = X.T @ (w * f)
    out = {
        "norm_f": float(np.sum(w * np.abs(f) ** 2)),
        "norm_density": float(abs(c[0]) ** 2),
        "norm_momentum": float(np.sum(np.abs(c[1:4]) ** 2)),
        "norm_energy": float(abs(c[4]) ** 2),
    }
    if E is not None:
        out["norm_E"] = float(np.sum(np.abs(E) ** 2))
        out["norm_B"] = float(np.sum(np.abs(B) ** 2))
    if species == "two_species":
        out["norm_pd"] = out["norm_density"]
        out["norm_pr"] = max(out["norm_f"] - out["norm_density"], 0.0)
    else:
        out["norm_micro"] = max(out["norm_f"] - float(np.sum(np.abs(c) ** 2)), 0.0)
    return out


def synthesize_decay(config, cm=None, progress=None):
    """Decay curves of every channel for one scenario.

    direction_mode "direct" assembles and propagates the generator at
    every node xi = s omega. "rotate" (default) uses the generator at
    s e1 for all directions of the same radius: the operators at s omega
    and s e1 are related by a rotation of velocity space, and the initial
    data are isotropic in v, so only the field coordinates change, and
    those are expressed in the frame (omega, t, omega x t) at every node.
    """
    config.validate()
    species = config.species
    grid = build_grid(config.n_per_axis)
    cm = assemble(grid) if cm is None else cm
    times = config.times()
    s_nodes, s_weights = config.radial_rule()
    dirs = direction_set()
    dir_weight = 4.0 * np.pi / len(dirs)
    sums = {}
    failures = []
    total = 0
    field_coupled = species != "boltzmann"

    for r, (s, ws) in enumerate(zip(s_nodes, s_weights)):
        shared = None
        if config.direction_mode == "rotate":
            shared = assemble_mode(species, s, CANONICAL_FRAME, cm)
        for d, omega in enumerate(dirs):
            total += 1
            xi = s * omega
            mode = make_initial(config.scenario, xi, grid, config.d0, config.r0)
            frame = make_frame(omega, transverse_unit(xi)) if field_coupled else make_frame(omega)
            U0 = initial_state(mode, frame, field_coupled)
            op = shared if shared is not None else assemble_mode(species, s, frame, cm)
            res = propagate_mode(op, U0, times)
            if res.failed:
                failures.append((float(s), d, res.message))
                continue
            wq = ws * s * s * dir_weight
            for k, state in enumerate(res.states):
                # field coordinates are frame-relative, so the node's own frame applies
                f, E, B = reconstruct_fields(state, xi, grid, frame) if field_coupled else (state, None, None)
                for name, val in _mode_norms(f, E, B, s, grid, species).items():
                    sums.setdefault(name, np.zeros(len(times)))[k] += wq * val
        if progress is not None:
            progress(r + 1, len(s_nodes))
    if len(failures) > FAILURE_FRACTION * total:
        raise ModeFailureError(f"{len(failures)} of {total} modes failed to propagate; first: {failures[0]}")
    channels = {name: (np.sqrt(sums[name]) if name in sums else None) for name in CHANNELS}
    spec = {"n_radial": config.n_radial, "s_min": config.s_min, "s_max": config.s_max,
            "n_directions": len(dirs), "direction_mode": config.direction_mode, "n_per_axis": config.n_per_axis}
    return DecayCurve(times, channels, config.scenario, spec, failures)


def initial_norms(config):
    """Channel norms of the initial data by direct quadrature, without propagation."""
    config.validate()
    grid = build_grid(config.n_per_axis)
    s_nodes, s_weights = config.radial_rule()
    dirs = direction_set()
    dir_weight = 4.0 * np.pi / len(dirs)
    sums = {}
    for s, ws in zip(s_nodes, s_weights):
        for omega in dirs:
            mode = make_initial(config.scenario, s * omega, grid, config.d0, config.r0)
            E = mode.E0 if config.species != "boltzmann" else None
            B = mode.B0 if config.species != "boltzmann" else None
            for name, val in _mode_norms(mode.f0, E, B, s, grid, config.species).items():
                sums[name] = sums.get(name, 0.0) + ws * s * s * dir_weight * val
    return {k: float(np.sqrt(v)) for k, v in sums.items()}


def scalar_decay(symbol, config, profile=None):
    """Decay of a scalar model exp(t symbol(s)) u0(s) with the experiment's xi rule.

    Used to check the quadrature and fitting chain against closed forms.
    """
    times = config.times()
    s_nodes, s_weights = config.radial_rule()
    amp = np.ones_like(s_nodes) if profile is None else profile(s_nodes)
    vals = np.exp(np.outer(times, symbol(s_nodes))) * amp
    return times, np.sqrt(4.0 * np.pi * (np.abs(vals) ** 2) @ (s_weights * s_nodes**2))


def fit_exponent(curve, channel, window=(50.0, 500.0), mode="loglog"):
    """Least-squares slope of log(norm) against log t (loglog) or t (semilog).

    ``curve`` is a DecayCurve or a (times, values) pair. Returns (slope, stderr).
    """
    if isinstance(curve, DecayCurve):
        t, y = curve.times, curve.channel(channel)
    else:
        t, y = curve
    if y is None:
        raise ChannelDeadError(f"channel {channel!r} is not produced by this scenario")
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (t >= window[0] * (1 - 1e-12)) & (t <= window[1] * (1 + 1e-12))
    if sel.sum() < 8:
        raise ChannelDeadError(f"only {int(sel.sum())} samples of {channel!r} in the fit window; need 8")
    if np.any(~(y[sel] > 0)):
        raise ChannelDeadError(f"channel {channel!r} has nonpositive values in the fit window")
    x = np.log(t[sel]) if mode == "loglog" else t[sel]
    if mode not in ("loglog", "semilog"):
        raise ValueError("mode must be 'loglog' or 'semilog'")
    fit = stats.linregress(x, np.log(y[sel]))
    return float(fit.slope), float(fit.stderr)


@dataclass(frozen=True)
class SlopeCheck:
    channel: str
    slope: float
    stderr: float
    target: float
    tolerance: float
    mode: str
    passed: bool


def check_slopes(curve, window=(50.0, 500.0), targets=None):
    """Fit every target channel of the curve's scenario and compare with its target."""
    targets = DECAY_TARGETS[curve.scenario] if targets is None else targets
    out = []
    for channel, target, tol, mode in targets:
        try:
            slope, err = fit_exponent(curve, channel, window, mode)
        except ChannelDeadError:
            out.append(SlopeCheck(channel, np.nan, np.nan, target, tol, mode, False))
            continue
        ok = slope < 0 if target is None else abs(slope - target) <= tol
        out.append(SlopeCheck(channel, slope, err, target, tol, mode, bool(ok)))
    return out
