"""AR(1) / Ornstein-Uhlenbeck paths and maximum-likelihood recovery.

The canonical simulator is the unit-step recursion

    p[t+1] = (1 - epsilon) * p[t] + psi * xi[t],    xi[t] ~ N(0, 1)

which is the Euler scheme of dp = -epsilon p dt + psi dW. Two scales are
attached to a predictor: ``p_star = psi / sqrt(epsilon)`` (used wherever the
band ratio q / p_star appears) and the true stationary standard deviation
``psi / sqrt(2 epsilon)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np
from scipy.signal import lfilter

from .errors import NonStationaryFitError, ParameterDomainError

__all__ = [
    "OuParams",
    "Path",
    "MleFit",
    "make_rng",
    "simulate_ar1",
    "stationary_std",
    "fit_ou_mle",
    "default_burn_in",
]


def make_rng(seed: int | None, *key: int) -> np.random.Generator:
    """Generator for ``seed`` and an optional spawn key.

    ``make_rng(s)`` is identical to ``np.random.default_rng(s)``; a key gives an
    independent stream derived deterministically from ``(s, *key)``, which is
    how per-asset and per-repetition streams are built.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class OuParams:
    """Mean reversion ``epsilon`` (per step) and noise scale ``psi`` of a predictor."""

    epsilon: float
    psi: float
    allow_zero_noise: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        eps, psi = float(self.epsilon), float(self.psi)
        if not (math.isfinite(eps) and 0.0 < eps <= 1.0):
            raise ParameterDomainError(f"epsilon must lie in (0, 1], got {eps}", "epsilon")
        if not math.isfinite(psi) or psi < 0.0 or (psi == 0.0 and not self.allow_zero_noise):
            raise ParameterDomainError(f"psi must be > 0, got {psi}", "psi")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "psi", psi)

    @property
    def p_star(self) -> float:
        return self.psi / math.sqrt(self.epsilon)

    @property
    def a(self) -> float:
        """epsilon / psi^2, i.e. 1 / p_star^2."""
        return self.epsilon / self.psi**2

    def scaled(self, dt: float) -> "OuParams":
        """Per-step parameters for a step of length ``dt``."""
        if not dt > 0:
            raise ParameterDomainError(f"dt must be > 0, got {dt}", "dt")
        return OuParams(self.epsilon * dt, self.psi * math.sqrt(dt), self.allow_zero_noise)


@dataclass
class Path:
    values: np.ndarray
    dt: float = 1.0
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ParameterDomainError("a path needs at least 2 samples", "values")
        if not self.dt > 0:
            raise ParameterDomainError(f"dt must be > 0, got {self.dt}", "dt")

    def __len__(self) -> int:
        return self.values.size

    def to_csv(self, filename) -> None:
        """Write the path as two columns ``step,value``."""
        with open(FsPath(filename), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "value"])
            for step, value in enumerate(self.values):
                writer.writerow([step, repr(float(value))])

    @classmethod
    def from_csv(cls, filename, dt: float = 1.0) -> "Path":
        data = np.loadtxt(filename, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1], dt=dt)


@dataclass(frozen=True)
class MleFit:
    kappa_hat: float
    diffusion_hat: float
    stderr_kappa: float
    n_obs: int
    phi_hat: float = float("nan")
    stderr_diffusion: float = float("nan")


def default_burn_in(epsilon: float) -> int:
    return int(math.ceil(10.0 / epsilon))


def _ar1_values(
    rng: np.random.Generator,
    epsilon: float,
    psi: float,
    n: int,
    start: float | None = None,
) -> np.ndarray:
    """Raw recursion; draws the start (if needed) then ``n - 1`` increments."""
    if start is None:
        var = psi**2 / (2.0 * epsilon - epsilon**2)
        x0 = float(rng.standard_normal()) * math.sqrt(var)
    else:
        x0 = float(start)
    out = np.empty(n)
    out[0] = x0
    if n > 1:
        shocks = psi * rng.standard_normal(n - 1)
        phi = 1.0 - epsilon
        out[1:], _ = lfilter([1.0], [1.0, -phi], shocks, zi=[phi * x0])
    return out


def simulate_ar1(
    params: OuParams,
    n_steps: int,
    seed: int | None,
    start: float | None = None,
    dt: float = 1.0,
    burn_in: int = 0,
    stream: tuple[int, ...] = (),
) -> Path:
    """Simulate the discrete OU recursion.

    Parameters
    ----------
    params : OuParams
        Per-unit-time parameters; for ``dt != 1`` they are rescaled to
        ``epsilon * dt`` and ``psi * sqrt(dt)`` per step.
    n_steps : int
        Number of returned samples (>= 2).
    seed : int
        Seed for ``make_rng``; identical arguments give identical paths.
    start : float, optional
        Explicit initial value. By default the start is drawn from the
        stationary law N(0, psi^2 / (2 epsilon - epsilon^2)).
    burn_in : int
        Extra leading steps simulated and discarded.
    stream : tuple of int
        Spawn key selecting an independent stream under ``seed``; asset ``i``
        of a portfolio simulated with master seed ``s`` uses ``(s, (i,))``.
    """
    n_steps = int(n_steps)
    if n_steps < 2:
        raise ParameterDomainError(f"n_steps must be >= 2, got {n_steps}", "n_steps")
    if burn_in < 0:
        raise ParameterDomainError("burn_in must be >= 0", "burn_in")
    step = params.scaled(dt) if dt != 1.0 else params
    rng = make_rng(seed, *stream)
    values = _ar1_values(rng, step.epsilon, step.psi, n_steps + burn_in, start)
    return Path(values[burn_in:], dt=dt, seed=seed)


def stationary_std(params: OuParams) -> float:
    """Continuous-time stationary standard deviation psi / sqrt(2 epsilon)."""
    return params.psi / math.sqrt(2.0 * params.epsilon)


def fit_ou_mle(path: Path) -> MleFit:
    """Gaussian-transition MLE of a zero-mean OU sampled every ``path.dt``.

    The conditional likelihood of x[t+1] = phi x[t] + eta[t] is maximized in
    closed form (least squares); the continuous parameters follow from
    phi = exp(-kappa dt) and Var(eta) = sigma^2 (1 - phi^2) / (2 kappa).
    """
    x = path.values
    n = x.size - 1
    if x.size < 100:
        raise ParameterDomainError(f"need at least 100 samples, got {x.size}", "path")
    x0, x1 = x[:-1], x[1:]
    sxx = float(np.dot(x0, x0))
    if sxx == 0.0:
        raise NonStationaryFitError(float("nan"))
    phi = float(np.dot(x0, x1)) / sxx
    resid = x1 - phi * x0
    s2 = float(np.dot(resid, resid)) / n
    if not (0.0 < phi < 1.0) or s2 == 0.0:
        raise NonStationaryFitError(phi)
    dt = path.dt
    kappa = -math.log(phi) / dt
    se_phi = math.sqrt(s2 / sxx)
    diffusion = math.sqrt(2.0 * kappa * s2 / (1.0 - phi**2))
    return MleFit(
        kappa_hat=kappa,
        diffusion_hat=diffusion,
        stderr_kappa=se_phi / (phi * dt),
        n_obs=n,
        phi_hat=phi,
        stderr_diffusion=diffusion / math.sqrt(2.0 * n),
    )
