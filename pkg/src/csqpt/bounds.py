"""Energy-cutoff error calculus.

Relates the mean-energy bound U (oscillator frequency omega, level energies
h_n = (n + 1/2) omega), the spectral-weight parameter gamma, the trace-norm
error bound epsilon = 2 sqrt(gamma) + gamma / (1 - gamma), and the photon
cutoff N needed to push gamma below a target.  The error bound decays like
1 / sqrt(N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import SaturationError
from .fock import DensityMatrix, trace_distance

MAX_CUTOFF = 10**9


def epsilon_from_gamma(gamma: float) -> float:
    """epsilon = 2 sqrt(gamma) + gamma / (1 - gamma), strictly increasing on (0, 1)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    return 2.0 * math.sqrt(gamma) + gamma / (1.0 - gamma)


def gamma_from_epsilon(epsilon: float) -> float:
    """Unique gamma in (0, 1) with epsilon_from_gamma(gamma) = epsilon (bisection)."""
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon)) or epsilon <= 0.0:
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon!r}")
    lo, hi = 0.0, 1.0 - 1e-16
    if epsilon >= epsilon_from_gamma(hi):
        raise SaturationError(f"epsilon={epsilon:g} is beyond the gamma -> 1 asymptote")
    while hi - lo > 1e-14:
        mid = 0.5 * (lo + hi)
        if mid <= 0.0:
            break
        if epsilon_from_gamma(mid) < epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def level_energy(n: int, omega: float = 1.0) -> float:
    """Oscillator level energy h_n = (n + 1/2) omega."""
    return (n + 0.5) * omega


def required_cutoff(energy_bound: float, omega: float, gamma: float) -> int:
    """Smallest integer N >= 0 with energy_bound / h_{N+1} <= gamma."""
    if energy_bound <= 0.0 or omega <= 0.0:
        raise ValueError("energy bound and omega must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    # N + 3/2 >= U / (gamma * omega); start from the float estimate and settle
    # the boundary exactly with the defining inequality.
    n = max(0, math.ceil(energy_bound / (gamma * omega) - 1.5) - 1)
    while energy_bound / level_energy(n + 1, omega) > gamma:
        n += 1
        if n > MAX_CUTOFF:
            raise SaturationError(f"required cutoff exceeds {MAX_CUTOFF}")
    while n > 0 and energy_bound / level_energy(n, omega) <= gamma:
        n -= 1
    return n


def output_error_bound(rho: DensityMatrix, projected: DensityMatrix) -> float:
    """Trace-norm bound ||E(rho) - E(rho~)||_1 <= ||rho - rho~||_1.

    Valid for trace-nonincreasing processes (superoperator norm <= 1); the
    caller supplies the projected state embedded back into rho's cutoff.
    """
    return trace_distance(rho, projected)


def scaling_table(
    energy_bound: float, omega: float, n_values: list[int]
) -> list[tuple[int, float, float]]:
    """Rows (N, gamma, epsilon) with gamma = U / h_{N+1} for each cutoff N.

    As N grows, epsilon ~ 2 sqrt(U / (N omega)), so epsilon * sqrt(N) levels off.
    """
    rows = []
    for n in n_values:
        gamma = energy_bound / level_energy(int(n) + 1, omega)
        if not 0.0 < gamma < 1.0:
            raise ValueError(
                f"cutoff N={n} gives gamma={gamma:g} outside (0, 1); increase N"
            )
        rows.append((int(n), gamma, epsilon_from_gamma(gamma)))
    return rows


@dataclass(frozen=True)
class CutoffBound:
    """Bundle tying (U, omega, gamma, epsilon) to the minimal sufficient cutoff."""

    energy_bound: float
    omega: float
    gamma: float
    epsilon: float
    required_n: int

    @classmethod
    def from_gamma(cls, gamma: float, energy_bound: float, omega: float = 1.0) -> "CutoffBound":
        return cls(
            energy_bound=energy_bound,
            omega=omega,
            gamma=gamma,
            epsilon=epsilon_from_gamma(gamma),
            required_n=required_cutoff(energy_bound, omega, gamma),
        )

    @classmethod
    def from_epsilon(cls, epsilon: float, energy_bound: float, omega: float = 1.0) -> "CutoffBound":
        return cls.from_gamma(gamma_from_epsilon(epsilon), energy_bound, omega)

    @property
    def paper_style_cutoff(self) -> float:
        """The rougher U / gamma estimate quoted alongside the exact inequality."""
        return self.energy_bound / self.gamma
