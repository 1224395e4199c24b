"""Convolution kernels, their closed forms, and admissibility certificates.

A kernel is sampled at lattice nodes ``m*h`` (d=1) or ``(m1*h, m2*h)`` (d=2)
on a symmetric window of ``radius_cells`` nodes per side, so that grid
convolution only ever evaluates it at offsets ``(i-j)*h``.

Certification is always through sufficient criteria (radial majorant,
gradient integral, class-S square chain); the defining pointwise bound
against the maximal function is exercised only as a falsifier in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

TAIL_TOL = 1e-8
EDGE_TOL = 1e-7


# ---------------------------------------------------------------------------
# closed forms


@dataclass(frozen=True)
class ClosedForm:
    """Analytic kernel description: values, derivative, L1 mass, tail bound."""

    kind: str

    def value(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, t: np.ndarray) -> Optional[np.ndarray]:
        return None

    def l1(self) -> float:
        raise NotImplementedError

    def tail_mass(self, radius: float) -> float:
        """Upper bound on the |k|-mass outside [-radius, radius]."""
        raise NotImplementedError

    def default_radius(self, h: float) -> float:
        raise NotImplementedError

    def tag(self) -> str:
        raise NotImplementedError

    def reflected(self) -> Optional["ClosedForm"]:
        """Closed form of t -> k(-t), or None if not representable."""
        return None


@dataclass(frozen=True)
class Exponential(ClosedForm):
    """k(t) = (lam/2) e^{-lam |t|}; integrates to one."""

    lam: float
    kind: str = "exp"

    def value(self, t):
        return 0.5 * self.lam * np.exp(-self.lam * np.abs(t))

    def derivative(self, t):
        return -0.5 * self.lam**2 * np.sign(t) * np.exp(-self.lam * np.abs(t))

    def l1(self):
        return 1.0

    def tail_mass(self, radius):
        return math.exp(-self.lam * radius)

    def default_radius(self, h):
        return math.log(1.0 / TAIL_TOL) / self.lam + h

    def tag(self):
        return f"exp:{self.lam:g}"

    def reflected(self):
        return self


@dataclass(frozen=True)
class Gaussian(ClosedForm):
    """k(t) = standard normal density with scale sigma; integrates to one."""

    sigma: float
    kind: str = "gauss"

    def value(self, t):
        z = t / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def derivative(self, t):
        return -t / self.sigma**2 * self.value(t)

    def l1(self):
        return 1.0

    def tail_mass(self, radius):
        return math.erfc(radius / (self.sigma * math.sqrt(2)))

    def default_radius(self, h):
        return 6.5 * self.sigma + h

    def tag(self):
        return f"gauss:{self.sigma:g}"

    def reflected(self):
        return self


@dataclass(frozen=True)
class Poisson(ClosedForm):
    """k(t) = a / (pi (a^2 + t^2)); integrates to one but has a heavy tail."""

    a: float
    kind: str = "poisson"

    def value(self, t):
        return self.a / (math.pi * (self.a**2 + t * t))

    def derivative(self, t):
        return -2 * self.a * t / (math.pi * (self.a**2 + t * t) ** 2)

    def l1(self):
        return 1.0

    def tail_mass(self, radius):
        return 1.0 - (2.0 / math.pi) * math.atan(radius / self.a)

    def default_radius(self, h):
        # the Cauchy tail decays like 1/t; pushing it below TAIL_TOL is not
        # feasible, so certificates carry the analytic remainder instead
        return 50.0 * self.a + h

    def tag(self):
        return f"poisson:{self.a:g}"

    def reflected(self):
        return self


@dataclass(frozen=True)
class Indicator(ClosedForm):
    """k = 1_{(a,b)}; mass b - a."""

    a: float
    b: float
    kind: str = "ind"

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("indicator needs a < b")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return ((t > self.a) & (t < self.b)).astype(float)

    def l1(self):
        return self.b - self.a

    def tail_mass(self, radius):
        lo, hi = max(self.a, -radius), min(self.b, radius)
        inside = max(0.0, hi - lo)
        return (self.b - self.a) - inside

    def default_radius(self, h):
        return max(abs(self.a), abs(self.b)) + 2 * h

    def tag(self):
        return f"ind:{self.a:g}:{self.b:g}"

    def reflected(self):
        return Indicator(-self.b, -self.a)


@dataclass(frozen=True)
class PowerCutoff(ClosedForm):
    """k(t) = c * max(|t|, cutoff)^{-alpha}, normalized to unit mass."""

    alpha: float
    cutoff: float
    kind: str = "power"

    def __post_init__(self):
        if self.alpha <= 1:
            raise ValueError("power kernel needs alpha > 1 for integrability")
        if self.cutoff <= 0:
            raise ValueError("power kernel needs a positive cutoff")

    @property
    def scale(self) -> float:
        # unit mass: 2 c cutoff^{1-alpha} alpha/(alpha-1) = 1
        return (self.alpha - 1) / (2 * self.alpha) * self.cutoff ** (self.alpha - 1)

    def value(self, t):
        return self.scale * np.maximum(np.abs(t), self.cutoff) ** (-self.alpha)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = -self.alpha * self.scale * np.sign(t) * np.abs(t) ** (-self.alpha - 1)
        return np.where(np.abs(t) <= self.cutoff, 0.0, out)

    def l1(self):
        return 1.0

    def tail_mass(self, radius):
        r = max(radius, self.cutoff)
        return 2 * self.scale * r ** (1 - self.alpha) / (self.alpha - 1)

    def default_radius(self, h):
        return 200.0 * self.cutoff + h

    def tag(self):
        return f"power:{self.alpha:g}:{self.cutoff:g}"

    def reflected(self):
        return self


@dataclass(frozen=True)
class HalfExponential(ClosedForm):
    """k(t) = scale * e^{-lam t} on t >= 0, zero on t < 0 (class-S style)."""

    lam: float
    scale: float = 1.0
    kind: str = "hexp"

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.scale * np.exp(-self.lam * np.maximum(t, 0.0)), 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(
            t >= 0, -self.lam * self.scale * np.exp(-self.lam * np.maximum(t, 0.0)), 0.0
        )

    def l1(self):
        return self.scale / self.lam

    def tail_mass(self, radius):
        return self.scale / self.lam * math.exp(-self.lam * radius)

    def default_radius(self, h):
        return math.log(max(self.scale, 1.0) / (self.lam * TAIL_TOL)) / self.lam + h

    def tag(self):
        return f"hexp:{self.lam:g}"


# ---------------------------------------------------------------------------
# sampled kernels


@dataclass(frozen=True)
class Kernel:
    """Grid-sampled kernel on a symmetric node window.

    d=1 samples have shape (2M+1,) for nodes -M..M; d=2 is (2M+1, 2M+1).
    ``tail_bound`` bounds the |k|-mass outside the window and is folded into
    majorant certificates.
    """

    samples: np.ndarray
    h: float
    d: int = 1
    closed_form: Optional[ClosedForm] = None
    tail_bound: float = 0.0

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        if self.d == 1:
            if arr.ndim != 1 or arr.size % 2 == 0:
                raise ValueError("d=1 kernel samples must be 1-d of odd length")
        elif self.d == 2:
            if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] % 2 == 0:
                raise ValueError("d=2 kernel samples must be square of odd side")
        else:
            raise ValueError("only d=1 and d=2 are supported")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        if self.h <= 0:
            raise ValueError("kernel step must be positive")

    @property
    def radius_cells(self) -> int:
        return (self.samples.shape[0] - 1) // 2

    def offsets(self) -> np.ndarray:
        m = self.radius_cells
        return np.arange(-m, m + 1) * self.h

    @classmethod
    def from_closed_form(
        cls, cf: ClosedForm, h: float, radius: Optional[float] = None, d: int = 1
    ) -> "Kernel":
        if radius is None:
            radius = cf.default_radius(h)
        m = max(1, int(math.ceil(radius / h)))
        if d == 1:
            t = np.arange(-m, m + 1) * h
            samples = cf.value(t)
        else:
            ax = np.arange(-m, m + 1) * h
            tx, ty = np.meshgrid(ax, ax, indexing="ij")
            samples = cf.value(np.hypot(tx, ty))
        return cls(samples, h, d, cf, cf.tail_mass(m * h))

    @classmethod
    def from_samples(
        cls, samples, h: float, d: int = 1, tail_bound: float = 0.0
    ) -> "Kernel":
        return cls(np.asarray(samples, dtype=float), h, d, None, tail_bound)

    @classmethod
    def dirac(cls, h: float) -> "Kernel":
        """Single-cell surrogate of the identity: mass 1/h at the origin."""
        return cls(np.array([0.0, 1.0 / h, 0.0]), h)

    def scaled(self, c: float) -> "Kernel":
        return Kernel(self.samples * c, self.h, self.d, None, abs(c) * self.tail_bound)

    def squared(self) -> "Kernel":
        # tail of k^2 is dominated by sup_tail|k| * tail mass of |k|
        edge = float(np.abs(self._edge_values()).max()) if self.tail_bound else 0.0
        return Kernel(self.samples**2, self.h, self.d, None, edge * self.tail_bound)

    def reflected(self) -> "Kernel":
        cf = self.closed_form.reflected() if self.closed_form else None
        flipped = np.flip(self.samples)
        return Kernel(flipped, self.h, self.d, cf, self.tail_bound)

    def _edge_values(self) -> np.ndarray:
        if self.d == 1:
            return self.samples[[0, -1]]
        return np.concatenate(
            [self.samples[0], self.samples[-1], self.samples[:, 0], self.samples[:, -1]]
        )

    def derivative_samples(self) -> np.ndarray:
        """Analytic derivative at the nodes, or 2nd-order central differences."""
        if self.d != 1:
            raise ValueError("derivative sampling is only available for d=1")
        if self.closed_form is not None:
            dv = self.closed_form.derivative(self.offsets())
            if dv is not None:
                return np.asarray(dv, dtype=float)
        return np.gradient(self.samples, self.h)


# ---------------------------------------------------------------------------
# admissibility criteria


def l1_norm(k: Kernel) -> float:
    """Node Riemann sum of |k|; tail mass outside the window is not counted."""
    return float(np.abs(k.samples).sum() * k.h**k.d)


def l2_norm(k: Kernel) -> float:
    return float(math.sqrt((k.samples**2).sum() * k.h**k.d))


def radial_majorant_integral(k: Kernel) -> float:
    """Integral of h(r) = ess sup_{|eta| >= r} |k(eta)| over R^d, plus tail.

    The suffix-max scan runs over radius-sorted nodes; the value certifies
    membership in the admissible class when it is <= 1 + tol.
    """
    m = k.radius_cells
    if k.d == 1:
        radii = np.arange(m + 1)
        prof = np.maximum(np.abs(k.samples[m:]), np.abs(k.samples[m::-1]))
        suffix = np.maximum.accumulate(prof[::-1])[::-1]
        # node sum over the full line: center node once, others twice
        integral = k.h * (suffix[0] + 2.0 * suffix[1:].sum())
        return float(integral + k.tail_bound)
    ax = np.arange(-m, m + 1)
    tx, ty = np.meshgrid(ax, ax, indexing="ij")
    rad = np.hypot(tx, ty).ravel()
    vals = np.abs(k.samples).ravel()
    order = np.argsort(rad, kind="stable")
    sorted_vals = vals[order]
    suffix = np.maximum.accumulate(sorted_vals[::-1])[::-1]
    # map each node to the majorant at its own radius (ties share the sup)
    rad_sorted = rad[order]
    uniq, first = np.unique(rad_sorted, return_index=True)
    maj_at = suffix[first]
    node_maj = maj_at[np.searchsorted(uniq, rad_sorted)]
    return float(node_maj.sum() * k.h**2 + k.tail_bound)


def gradient_criterion(k: Kernel, method: str = "grid") -> float:
    """The weighted derivative integral dominating the radial majorant.

    d=1 value: 2 * int_0^inf rho * max(|k'(rho)|, |k'(-rho)|) drho, where the
    sphere measure |S^0| = 2 is folded in so the bound dominates the majorant
    integral with constant exactly 1.  For d=2 the raw polar integral
    int rho^2 sup_{S^1}|grad k| drho is reported without a sharp constant.
    """
    edge = float(np.abs(k._edge_values()).max())
    if edge > EDGE_TOL:
        raise ValueError(
            f"kernel does not vanish at the window edge (|k| = {edge:.3g}); "
            "the gradient criterion needs a decaying kernel"
        )
    if k.d == 1:
        if method == "adaptive":
            cf = k.closed_form
            if cf is None or cf.derivative(np.zeros(1)) is None:
                raise ValueError("adaptive quadrature needs an analytic derivative")
            upper = k.radius_cells * k.h

            def integrand(rho):
                return rho * max(abs(float(cf.derivative(np.array(rho)))),
                                 abs(float(cf.derivative(np.array(-rho)))))

            val, _ = integrate.quad(integrand, 0.0, upper, limit=400)
            return 2.0 * val
        dv = k.derivative_samples()
        m = k.radius_cells
        rho = np.arange(m + 1) * k.h
        sup = np.maximum(np.abs(dv[m:]), np.abs(dv[m::-1]))
        return float(2.0 * (rho * sup).sum() * k.h)
    # d=2: finite-difference gradient magnitude, polar shells by node radius
    gx, gy = np.gradient(k.samples, k.h)
    mag = np.hypot(gx, gy).ravel()
    m = k.radius_cells
    ax = np.arange(-m, m + 1)
    tx, ty = np.meshgrid(ax, ax, indexing="ij")
    rad = np.hypot(tx, ty).ravel() * k.h
    shells = np.round(rad / k.h).astype(int)
    sup_per_shell = np.zeros(shells.max() + 1)
    np.maximum.at(sup_per_shell, shells, mag)
    rho = np.arange(sup_per_shell.size) * k.h
    return float((rho**2 * sup_per_shell).sum() * k.h)


def class_s_check(k: Kernel) -> tuple[float, float]:
    """Class-S data for a kernel supported on the positive half line.

    Returns ``(s_value, squared_bound)`` with s_value = int sqrt(t)|k'(t)|dt
    and squared_bound = int t |(k^2)'(t)| dt; the chain
    squared_bound <= 2 * s_value**2 is asserted.  Membership in the class
    means s_value <= 1.
    """
    if k.d != 1:
        raise ValueError("class-S checks are one-dimensional")
    m = k.radius_cells
    neg = np.abs(k.samples[:m])
    if neg.max(initial=0.0) > EDGE_TOL:
        raise ValueError("class-S kernels must be supported on the positive axis")
    edge = abs(float(k.samples[-1]))
    if edge > EDGE_TOL:
        raise ValueError("class-S kernels must decay to zero")
    cf = k.closed_form
    if cf is not None and cf.derivative(np.ones(1)) is not None:
        upper = m * k.h

        def sqrt_int(t):
            return math.sqrt(t) * abs(float(cf.derivative(np.array(t))))

        def sq_int(t):
            kk = float(cf.value(np.array(t)))
            return t * abs(2.0 * kk * float(cf.derivative(np.array(t))))

        s_value, _ = integrate.quad(sqrt_int, 0.0, upper, limit=400)
        squared, _ = integrate.quad(sq_int, 0.0, upper, limit=400)
    else:
        t = np.arange(m + 1) * k.h
        vals = k.samples[m:]
        dv = np.gradient(vals, k.h)
        s_value = float(np.trapezoid(np.sqrt(t) * np.abs(dv), t))
        squared = float(np.trapezoid(t * np.abs(2 * vals * dv), t))
    if squared > 2.0 * s_value**2 + 1e-6 * max(1.0, s_value**2):
        raise AssertionError(
            f"squared-kernel chain violated: {squared:.6g} > 2*{s_value:.6g}**2"
        )
    return float(s_value), float(squared)


@dataclass(frozen=True)
class AdmissibilityCertificate:
    criterion: str  # radial-majorant | gradient | class-S-squared
    bound_value: float
    passed: bool


CERT_TOL = 1e-6


def certify(k: Kernel, criterion: str = "radial-majorant") -> AdmissibilityCertificate:
    if criterion == "radial-majorant":
        val = radial_majorant_integral(k)
        return AdmissibilityCertificate(criterion, val, val <= 1.0 + CERT_TOL)
    if criterion == "gradient":
        val = gradient_criterion(k)
        return AdmissibilityCertificate(criterion, val, val <= 1.0 + CERT_TOL)
    if criterion == "class-S-squared":
        s_value, _ = class_s_check(k)
        return AdmissibilityCertificate(criterion, s_value, s_value <= 1.0 + CERT_TOL)
    raise ValueError(f"unknown criterion {criterion!r}")


# ---------------------------------------------------------------------------
# string addressing / zoo

KERNEL_ZOO = ("exp:1", "gauss:1", "poisson:1", "ind:-0.5:0.5", "power:1.5:0.1")


def parse_kernel(text: str, h: float, radius: Optional[float] = None, d: int = 1) -> Kernel:
    """Build a kernel from a zoo string like "exp:2.0" or "ind:0:1"."""
    parts = text.strip().split(":")
    kind, args = parts[0], [float(p) for p in parts[1:]]
    try:
        if kind == "exp":
            (lam,) = args
            cf = Exponential(lam)
        elif kind == "gauss":
            (sigma,) = args
            cf = Gaussian(sigma)
        elif kind == "poisson":
            (a,) = args
            cf = Poisson(a)
        elif kind == "ind":
            a, b = args
            cf = Indicator(a, b)
        elif kind == "power":
            alpha, cutoff = args
            cf = PowerCutoff(alpha, cutoff)
        elif kind == "hexp":
            cf = HalfExponential(*args)
        else:
            raise ValueError(f"unknown kernel kind {kind!r}")
    except TypeError as exc:
        raise ValueError(f"bad kernel string {text!r}") from exc
    return Kernel.from_closed_form(cf, h, radius, d)
