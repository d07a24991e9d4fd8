"""Speed profiles, constraint functions and the speed field of the flow.

The driving speed is always mu(F) with F = E_k(kappa)^(1/k); the homogeneous
flow is the profile mu(z) = z^alpha, so one code path serves every mode.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from convexflow.errors import DegenerateConstraint, InvalidConfig
from convexflow.geometry import RadiiField, elementary_symmetric, normalized_symmetric

logger = logging.getLogger(__name__)

ScalarFn = Callable[[np.ndarray], np.ndarray]

PROBE_GRID = np.logspace(-4, 4, 401)
RIGHT_END_MIN_RATIO = 1e2
LEFT_END_MAX_RATIO = 1e2


@dataclass(frozen=True)
class MuProfile:
    """A speed profile mu with its first two derivatives."""

    name: str
    mu: ScalarFn
    dmu: ScalarFn
    d2mu: ScalarFn


def power_profile(alpha: float) -> MuProfile:
    return MuProfile(
        name="power",
        mu=lambda z: z**alpha,
        dmu=lambda z: alpha * z ** (alpha - 1.0),
        d2mu=lambda z: alpha * (alpha - 1.0) * z ** (alpha - 2.0),
    )


MU_CATALOG: dict[str, MuProfile] = {
    "z+z^3": MuProfile(
        name="z+z^3",
        mu=lambda z: z + z**3,
        dmu=lambda z: 1.0 + 3.0 * z**2,
        d2mu=lambda z: 6.0 * z,
    ),
    "exp(z)-1": MuProfile(
        name="exp(z)-1",
        mu=np.expm1,
        dmu=np.exp,
        d2mu=np.exp,
    ),
    # bounded speed: fails the convexity and right-end growth conditions
    "1-exp(-z)": MuProfile(
        name="1-exp(-z)",
        mu=lambda z: -np.expm1(-z),
        dmu=lambda z: np.exp(-z),
        d2mu=lambda z: -np.exp(-z),
    ),
}

MU_NAMES = ("power", *MU_CATALOG)


# ── speed specification ──────────────────────────────────────


@dataclass(frozen=True)
class SpeedSpec:
    """Speed mu(E_k^(1/k)); homogeneous when the profile is z^alpha."""

    k: int
    profile: MuProfile
    alpha: float | None = None

    @classmethod
    def homogeneous(cls, k: int, alpha: float) -> SpeedSpec:
        if alpha <= 0:
            raise InvalidConfig(f"alpha must be positive, got {alpha}", key="alpha")
        if k < 1:
            raise InvalidConfig(f"k must be at least 1, got {k}", key="k")
        return cls(k=k, profile=power_profile(alpha), alpha=alpha)

    @classmethod
    def nonhomogeneous(cls, k: int, mu: str | MuProfile) -> SpeedSpec:
        if k < 1:
            raise InvalidConfig(f"k must be at least 1, got {k}", key="k")
        if isinstance(mu, str):
            try:
                mu = MU_CATALOG[mu]
            except KeyError:
                raise InvalidConfig(
                    f"unknown speed profile {mu!r}; choose one of {', '.join(MU_NAMES)}",
                    key="mu",
                ) from None
        spec = cls(k=k, profile=mu)
        report = admissibility_probe(mu)
        if not report.passed:
            logger.warning(
                "Speed profile %s fails admissibility checks: %s",
                mu.name, ", ".join(report.failures),
            )
        return spec

    @property
    def is_homogeneous(self) -> bool:
        return self.alpha is not None

    @property
    def label(self) -> str:
        if self.is_homogeneous:
            return f"E_{self.k}^({self.alpha:g}/{self.k})"
        return f"mu(E_{self.k}^(1/{self.k})), mu = {self.profile.name}"


def curvature_function(radii: RadiiField, k: int) -> np.ndarray:
    """E_k(kappa) per node."""
    return normalized_symmetric(radii.curvatures, k)


def speed_field(radii: RadiiField, spec: SpeedSpec) -> np.ndarray:
    """Per-node speed mu(E_k(kappa)^(1/k)); E_k^(alpha/k) in the homogeneous case."""
    ek = curvature_function(radii, spec.k)
    return spec.profile.mu(ek ** (1.0 / spec.k))


def diffusion_coefficient(radii: RadiiField, spec: SpeedSpec) -> np.ndarray:
    """Linearised diffusion mu'(F) F_*^-2 max_i dF_*/dr_i, with F_* = 1/F."""
    k = spec.k
    kappa = radii.curvatures
    n = kappa.shape[-1]
    ek = normalized_symmetric(kappa, k)
    f = ek ** (1.0 / k)
    # dE_k/dkappa_i = sigma_{k-1}(kappa without i) / C(n, k)
    dek = np.stack(
        [elementary_symmetric(np.delete(kappa, i, axis=-1), k - 1) for i in range(n)],
        axis=-1,
    ) / math.comb(n, k)
    df_star = (1.0 / k) * ek[..., None] ** (-1.0 / k - 1.0) * dek * kappa**2
    return spec.profile.dmu(f) * f**2 * df_star.max(axis=-1)


# ── admissibility probe ──────────────────────────────────────


@dataclass
class AdmissibilityReport:
    profile: str
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def failures(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def admissibility_probe(profile: MuProfile, z: np.ndarray | None = None) -> AdmissibilityReport:
    """Check the structural conditions on mu over a log grid in [1e-4, 1e4].

    Points where mu or its derivatives overflow are dropped before the ratio checks.
    """
    if z is None:
        z = PROBE_GRID
    with np.errstate(over="ignore", invalid="ignore"):
        mu = profile.mu(z)
        dmu = profile.dmu(z)
        d2mu = profile.d2mu(z)
    finite = np.isfinite(mu) & np.isfinite(dmu) & np.isfinite(d2mu)
    if not finite.all():
        logger.debug("Probe for %s truncated at z = %.3g", profile.name, z[finite][-1])
    z, mu, dmu, d2mu = z[finite], mu[finite], dmu[finite], d2mu[finite]

    report = AdmissibilityReport(profile=profile.name)
    report.checks["positive"] = bool(np.all(mu > 0))
    report.checks["increasing"] = bool(np.all(dmu > 0))
    report.checks["inverse-convex"] = bool(np.all(z * d2mu + 2.0 * dmu >= -1e-12 * np.abs(dmu)))

    with np.errstate(divide="ignore", invalid="ignore"):
        growth = dmu * z**2 / mu
        elasticity = z * dmu / mu
    upper = growth[len(growth) // 2:]
    report.checks["growth-increasing"] = bool(
        np.all(np.isfinite(upper)) and np.all(np.diff(upper) >= -1e-12 * np.abs(upper[1:]))
    )
    report.checks["growth-unbounded"] = bool(np.isfinite(upper[-1]) and upper[-1] >= RIGHT_END_MIN_RATIO)
    left = elasticity[z <= 1e-2]
    report.checks["elasticity-bounded"] = bool(
        left.size > 0 and np.all(np.isfinite(left)) and left.max() <= LEFT_END_MAX_RATIO
    )
    return report


# ── constraint functions ─────────────────────────────────────


@dataclass(frozen=True)
class ConstraintSpec:
    """G(a, b) with a = r_{n+1-k} and b = r_{n+1}, or an externally supplied global term.

    ``external_phi`` maps (t, lower) to phi, where lower = (1/V_n) int speed d(mu)
    is the volume-monotonicity bound at the current state.
    """

    kind: str
    label: str
    g: Callable[[float, float], float] | None = None
    partials: Callable[[float, float], tuple[float, float]] | None = None
    external_phi: Callable[[float, float], float] | None = None
    theta: float | None = None

    @classmethod
    def volume(cls) -> ConstraintSpec:
        return cls(kind="volume", label="volume", g=lambda a, b: b, partials=lambda a, b: (0.0, 1.0))

    @classmethod
    def quermass(cls) -> ConstraintSpec:
        return cls(kind="quermass", label="quermass", g=lambda a, b: a, partials=lambda a, b: (1.0, 0.0))

    @classmethod
    def mixed(cls, theta: float) -> ConstraintSpec:
        """G = a^theta b^(1-theta); theta = 0 preserves volume, theta = 1 the quermassintegral."""
        if not 0.0 <= theta <= 1.0:
            raise InvalidConfig(f"mixed exponent must lie in [0, 1], got {theta}", key="constraint")

        def g(a: float, b: float) -> float:
            return a**theta * b ** (1.0 - theta)

        def partials(a: float, b: float) -> tuple[float, float]:
            value = g(a, b)
            return theta * value / a, (1.0 - theta) * value / b

        return cls(kind="mixed", label=f"mixed:{theta:g}", g=g, partials=partials, theta=theta)

    @classmethod
    def general(
        cls,
        g: Callable[[float, float], float],
        partials: Callable[[float, float], tuple[float, float]],
        label: str = "general",
    ) -> ConstraintSpec:
        return cls(kind="general", label=label, g=g, partials=partials)

    @classmethod
    def external_factor(cls, factor: float) -> ConstraintSpec:
        """phi = factor times the volume-monotonicity bound."""
        if factor <= 0:
            raise InvalidConfig(f"external factor must be positive, got {factor}", key="constraint")
        return cls(
            kind="external",
            label=f"external-factor:{factor:g}",
            external_phi=lambda t, lower: factor * lower,
        )

    @classmethod
    def external(cls, phi: Callable[[float], float], label: str = "external") -> ConstraintSpec:
        return cls(kind="external", label=label, external_phi=lambda t, lower: phi(t))

    @classmethod
    def from_table(cls, path: str | Path) -> ConstraintSpec:
        """phi(t) linearly interpolated from a two-column (t, phi) text file."""
        try:
            table = np.loadtxt(path, ndmin=2, comments="#", delimiter=None)
        except (OSError, ValueError) as exc:
            raise InvalidConfig(f"cannot read phi table {path}: {exc}", key="constraint") from exc
        if table.shape[1] != 2 or table.shape[0] < 1:
            raise InvalidConfig(f"phi table {path} must have two columns", key="constraint")
        if np.any(np.diff(table[:, 0]) <= 0):
            raise InvalidConfig(f"phi table {path} times must be increasing", key="constraint")
        times, values = table[:, 0].copy(), table[:, 1].copy()
        return cls.external(lambda t: float(np.interp(t, times, values)), label=f"external-table:{path}")

    @property
    def is_external(self) -> bool:
        return self.kind == "external"

    def value(self, a: float, b: float) -> float:
        if self.g is None:
            raise DegenerateConstraint(f"constraint {self.label} has no G to evaluate")
        return float(self.g(a, b))

    def derivatives(self, a: float, b: float) -> tuple[float, float]:
        """(G_a, G_b) at (a, b); both must be non-negative and not both zero."""
        if self.partials is None:
            raise DegenerateConstraint(f"constraint {self.label} has no partial derivatives")
        ga, gb = (float(x) for x in self.partials(a, b))
        if ga < 0 or gb < 0:
            raise DegenerateConstraint(f"G_a = {ga:.3e}, G_b = {gb:.3e} must be non-negative")
        if ga == 0 and gb == 0:
            raise DegenerateConstraint(f"G_a = G_b = 0 at (a, b) = ({a:.6g}, {b:.6g})")
        return ga, gb


def parse_constraint(text: str) -> ConstraintSpec:
    """``volume | quermass | mixed:<theta> | external-factor:<f> | external-table:<path>``."""
    text = text.strip()
    kind, _, arg = text.partition(":")
    kind = kind.strip().lower()
    if kind in ("volume", "quermass") and not arg:
        return ConstraintSpec.volume() if kind == "volume" else ConstraintSpec.quermass()
    if kind == "external-table" and arg:
        return ConstraintSpec.from_table(arg.strip())
    if kind in ("mixed", "external-factor") and arg:
        try:
            number = float(arg)
        except ValueError:
            raise InvalidConfig(f"expected a number after {kind}:, got {arg!r}", key="constraint") from None
        if kind == "mixed":
            return ConstraintSpec.mixed(number)
        return ConstraintSpec.external_factor(number)
    raise InvalidConfig(
        f"unknown constraint {text!r}; expected volume, quermass, mixed:<theta>, "
        "external-factor:<f> or external-table:<path>",
        key="constraint",
    )
