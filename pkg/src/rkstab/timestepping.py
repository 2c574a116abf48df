"""Explicit Runge-Kutta integration of semidiscrete diffusion systems.

The systems produced by :mod:`rkstab.assembly` have the form

    M-tilde U'(t) = -A U(t),

with the surrogate mass on the left-hand side.  For a linear autonomous
system every explicit Runge-Kutta method reduces to multiplication by its
stability polynomial: U_{n+1} = R(-tau * M-tilde^-1 A) U_n.  The stepper
exploits that directly (Horner evaluation, one operator application per
stage), which is bit-for-bit the classical stage-by-stage update but with
a single SPD factorization of the surrogate shared across the whole run.

Norm monitoring deliberately uses the *consistent* mass for the L2 norm
and the stiffness for the energy norm, whatever surrogate drives the
stepping.  Stable runs keep the energy norm non-increasing, while the L2
norm may grow transiently; `l2_growth_certificate` checks the observed
growth against the a priori bound sqrt(kappa(M-hat) * kappa(M-tilde_ref)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import AssembledSystem
from .bounds import BoundReport, _make_solver
from .reference import ReferenceElement

BLOW_UP_THRESHOLD = 1e100

BOUND_SOURCES = ("exact", "diag_ratio", "geometric")


class BlowUpError(RuntimeError):
    """Raised when an integration norm exceeds the overflow threshold.

    Carries the offending step index and the trace of all steps completed
    before the blow-up.
    """

    def __init__(self, message: str, step: int, trace: "IntegrationTrace"):
        super().__init__(message)
        self.step = step
        self.trace = trace


class CertificateError(RuntimeError):
    """Raised when observed L2 growth exceeds its certified bound."""

    def __init__(self, message: str, step: int, ratio: float, bound: float):
        super().__init__(message)
        self.step = step
        self.ratio = ratio
        self.bound = bound


@dataclass(frozen=True)
class RKScheme:
    """An explicit Runge-Kutta scheme reduced to its stability polynomial.

    stability_poly holds the coefficients of R(z) in ascending order, so
    stability_poly[0] is always 1.  real_stability_boundary is the largest s
    with |R(-x)| <= 1 for all x in [0, s].
    """

    name: str
    stability_poly: tuple[float, ...]
    real_stability_boundary: float

    @property
    def n_stages(self) -> int:
        return len(self.stability_poly) - 1

    def amplification(self, z: float | np.ndarray) -> float | np.ndarray:
        """Evaluate R(z)."""
        return np.polyval(self.stability_poly[::-1], z)


NAMED_SCHEME_POLYS: dict[str, tuple[float, ...]] = {
    "explicit_euler": (1.0, 1.0),
    "heun2": (1.0, 1.0, 0.5),
    "kutta3": (1.0, 1.0, 0.5, 1.0 / 6.0),
    "classic_rk4": (1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0),
}


def _boundary_from_poly(coeffs: tuple[float, ...], tol: float = 1e-12) -> float:
    """Largest s such that |R(-x)| <= 1 on [0, s], bisected to absolute tol.

    A coarse scan brackets the first point where the amplification exceeds
    one; the scan range doubles until such a point exists (guaranteed for
    polynomials of degree >= 1).
    """
    desc = np.asarray(coeffs[::-1], dtype=float)

    def excess(x: float | np.ndarray) -> float | np.ndarray:
        return np.abs(np.polyval(desc, -x)) - 1.0

    hi = 4.0
    while excess(hi) <= 0:
        hi *= 2.0
        if hi > 2**60:
            raise ValueError("no stability boundary found; polynomial never exceeds 1")
    grid = np.linspace(0.0, hi, 100001)
    above = np.nonzero(excess(grid) > 1e-15)[0]
    first = int(above[0])
    if first == 0:
        return 0.0
    lo, up = float(grid[first - 1]), float(grid[first])
    while up - lo > tol:
        mid = 0.5 * (lo + up)
        if excess(mid) > 0:
            up = mid
        else:
            lo = mid
    return 0.5 * (lo + up)


def rk_scheme(name: str) -> RKScheme:
    """Build one of the named explicit schemes.

    Supported names: explicit_euler, heun2, kutta3, classic_rk4.
    """
    if name not in NAMED_SCHEME_POLYS:
        known = ", ".join(sorted(NAMED_SCHEME_POLYS))
        raise ValueError(f"unknown scheme {name!r}; expected one of {known}")
    coeffs = NAMED_SCHEME_POLYS[name]
    return RKScheme(name, coeffs, _boundary_from_poly(coeffs))


def scheme_from_tableau(
    a: np.ndarray, b: np.ndarray, name: str = "generic"
) -> RKScheme:
    """Build a scheme from an explicit Butcher tableau (A strictly lower).

    The stability polynomial of an s-stage explicit method is
    R(z) = 1 + sum_{k=1..s} (b^T A^{k-1} 1) z^k.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = b.size
    if a.shape != (s, s):
        raise ValueError(f"tableau shape mismatch: A is {a.shape}, b has {s} weights")
    if np.any(np.abs(np.triu(a)) > 0):
        raise ValueError("tableau is not explicit: A has entries on or above the diagonal")
    coeffs = [1.0]
    power = np.ones(s)
    for _ in range(s):
        coeffs.append(float(b @ power))
        power = a @ power
    while len(coeffs) > 1 and coeffs[-1] == 0.0:
        coeffs.pop()
    poly = tuple(coeffs)
    return RKScheme(name, poly, _boundary_from_poly(poly))


def real_stability_boundary(scheme: RKScheme, tol: float = 1e-12) -> float:
    """Recompute the real-axis stability boundary of a scheme from scratch."""
    return _boundary_from_poly(scheme.stability_poly, tol)


def stable_timestep(scheme: RKScheme, bound_source: str, report: BoundReport) -> float:
    """Largest provably stable step: boundary / eigenvalue estimate.

    bound_source selects which estimate of lambda_max backs the guarantee:
    "exact" (computed eigenvalue), "diag_ratio" (diagonal-ratio upper
    bound), or "geometric" (patch-geometry upper bound).
    """
    if bound_source == "exact":
        lam = report.lambda_max_exact
    elif bound_source == "diag_ratio":
        lam = report.upper_diag_ratio
    elif bound_source == "geometric":
        lam = report.upper_geometric
    else:
        known = ", ".join(BOUND_SOURCES)
        raise ValueError(f"unknown bound source {bound_source!r}; expected one of {known}")
    if lam is None:
        raise ValueError(
            f"bound source {bound_source!r} is unavailable in this report "
            "(eigenvalue computation was skipped)"
        )
    if lam <= 0:
        raise ValueError(f"nonpositive eigenvalue estimate {lam} from {bound_source!r}")
    return scheme.real_stability_boundary / lam


@dataclass(frozen=True)
class IntegrationTrace:
    """Per-step norm history of an integration run.

    Row n holds the state after n steps, so times[0] = 0 describes the
    initial condition and all arrays have n_steps + 1 entries.  A run with
    zero steps still records its initial state; an empty trace (no rows at
    all) only arises as the partial trace of an immediate blow-up.
    """

    times: np.ndarray
    l2_norms: np.ndarray
    energy_norms: np.ndarray
    tau: float
    scheme: str
    final_state: np.ndarray

    @property
    def n_steps(self) -> int:
        return max(len(self.times) - 1, 0)

    def write_csv(self, path) -> None:
        with open(path, "w") as handle:
            handle.write("step,t,l2_norm,energy_norm\n")
            for n in range(len(self.times)):
                handle.write(
                    "%d,%.17g,%.17g,%.17g\n"
                    % (n, self.times[n], self.l2_norms[n], self.energy_norms[n])
                )


def integrate(
    system: AssembledSystem,
    scheme: RKScheme,
    tau: float,
    n_steps: int,
    u0: np.ndarray,
) -> IntegrationTrace:
    """Run n_steps of the scheme on M-tilde U' = -A U from u0.

    Each step multiplies by the stability polynomial of the scheme
    evaluated at -tau * M-tilde^-1 A (Horner form: one stiffness product
    and one surrogate solve per stage).  This is exact for the linear
    system, so the result matches the stage-by-stage Runge-Kutta update.
    The surrogate is factorized once; the trace records sqrt(U^T M U) and
    sqrt(U^T A U) with the consistent mass M after every step.

    Raises BlowUpError (with step index and partial trace) as soon as a
    norm is non-finite or exceeds 1e100.
    """
    if tau <= 0:
        raise ValueError(f"step size must be positive, got {tau}")
    if n_steps < 0:
        raise ValueError(f"step count must be nonnegative, got {n_steps}")
    u = np.asarray(u0, dtype=float).copy()
    n = system.n_dofs
    if u.shape != (n,):
        raise ValueError(f"initial vector has shape {u.shape}, expected ({n},)")

    mass = system.mass
    stiffness = system.stiffness
    solve = _make_solver(system.surrogate_mass)
    coeffs = scheme.stability_poly

    times = np.empty(n_steps + 1)
    l2_norms = np.empty(n_steps + 1)
    energy_norms = np.empty(n_steps + 1)

    def record(step: int) -> None:
        l2_sq = float(u @ (mass @ u))
        energy_sq = float(u @ (stiffness @ u))
        l2 = math.sqrt(max(l2_sq, 0.0)) if math.isfinite(l2_sq) else math.inf
        energy = math.sqrt(max(energy_sq, 0.0)) if math.isfinite(energy_sq) else math.inf
        if max(l2, energy) > BLOW_UP_THRESHOLD:
            partial = IntegrationTrace(
                times[:step].copy(),
                l2_norms[:step].copy(),
                energy_norms[:step].copy(),
                tau,
                scheme.name,
                u.copy(),
            )
            label = "L2" if l2 > BLOW_UP_THRESHOLD else "energy"
            raise BlowUpError(
                f"blow-up detected at step {step}: {label} norm reached "
                f"{max(l2, energy):.3e}",
                step=step,
                trace=partial,
            )
        times[step] = step * tau
        l2_norms[step] = l2
        energy_norms[step] = energy

    record(0)
    for step in range(1, n_steps + 1):
        v = coeffs[-1] * u
        for c in coeffs[-2::-1]:
            v = c * u - tau * solve(stiffness @ v)
        u = v
        record(step)
    return IntegrationTrace(times, l2_norms, energy_norms, tau, scheme.name, u)


def top_mode_initial_condition(
    system: AssembledSystem, relative_noise: float = 1e-3, seed: int = 0
) -> np.ndarray:
    """Dominant eigenvector of the pencil plus a small smooth perturbation.

    The perturbation guarantees a nonzero component on the top mode even
    after floating-point roundoff in downstream arithmetic; it is scaled
    relative to the eigenvector so the returned vector still points almost
    exactly along the most unstable direction.
    """
    from .bounds import lambda_max_with_vector

    _, vec = lambda_max_with_vector(system.stiffness, system.surrogate_mass)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(vec.size)
    noise *= relative_noise * np.linalg.norm(vec) / np.linalg.norm(noise)
    return vec + noise


def l2_growth_certificate(
    trace: IntegrationTrace,
    system: AssembledSystem,
    elem: ReferenceElement,
    tol: float = 1e-9,
) -> float:
    """Check observed L2 growth against sqrt(kappa(M-hat) kappa(M-tilde_ref)).

    Returns the observed max_n ||u_n|| / ||u_0||.  Raises CertificateError
    (naming the offending step) if the observed growth exceeds the bound
    by more than tol.  A run started from the zero vector certifies
    trivially with ratio 0.
    """
    bound = math.sqrt(elem.condition_number * system.kappa_surrogate)
    if len(trace.l2_norms) == 0:
        return 0.0
    initial = float(trace.l2_norms[0])
    if initial == 0.0:
        if np.any(trace.l2_norms > 0):
            step = int(np.argmax(trace.l2_norms > 0))
            raise CertificateError(
                f"growth from zero initial state at step {step}",
                step=step,
                ratio=math.inf,
                bound=bound,
            )
        return 0.0
    ratios = trace.l2_norms / initial
    worst = int(np.argmax(ratios))
    observed = float(ratios[worst])
    if observed > bound + tol:
        raise CertificateError(
            f"L2 growth {observed:.17g} exceeds certified bound {bound:.17g} "
            f"at step {worst}",
            step=worst,
            ratio=observed,
            bound=bound,
        )
    return observed
