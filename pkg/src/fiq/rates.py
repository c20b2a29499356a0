"""Rate functions for weak functional inequalities and their transforms.

A `RateFunction` is a non-increasing map s -> beta(s); the inequality it
quantifies is

    Var(f)  <= beta(s) * Dirichlet(f) + s * Osc^2(f)        (weak Poincare)
    Ent(f^2)<= beta(s) * Dirichlet(f) + s * Osc^2(f)        (weak log-Sobolev)

for s in (0, 1/4] (the inequality is vacuous beyond 1/4, but closed forms
evaluate on all of (0, 1)).  Closed-form rates and all algebraic transforms
evaluate exactly; drift-derived rates are tabulated piecewise-linearly in
(log s, log beta), where the registered families are polynomials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BadParameter, NotApplicable, OscillationUnavailable
from .fields import Potential
from .lyapunov import LyapunovCertificate, perturbed_drift
from .measures import Measure

S_MIN_TAB = 1e-8
S_MAX = 0.25
N_TAB = 128


def dimension_prefactor(d: int) -> float:
    """Poincare constant bound for the unit-ball uniform law: 4/pi^2 in 1D,
    (d+2)/(d(d-1)) in d >= 2."""
    if d == 1:
        return 4.0 / math.pi**2
    return (d + 2.0) / (d * (d - 1.0))


@dataclass(frozen=True)
class LogLogTable:
    """Piecewise-linear interpolation in (log s, log beta) with end-slope
    extrapolation; nodes are strictly increasing in log s."""

    ls: np.ndarray
    lb: np.ndarray

    def __call__(self, s):
        t = np.log(np.asarray(s, dtype=float))
        out = np.interp(t, self.ls, self.lb)
        lo = t < self.ls[0]
        hi = t > self.ls[-1]
        if np.any(lo):
            slope = (self.lb[1] - self.lb[0]) / (self.ls[1] - self.ls[0])
            out = np.where(lo, self.lb[0] + slope * (t - self.ls[0]), out)
        if np.any(hi):
            slope = (self.lb[-1] - self.lb[-2]) / (self.ls[-1] - self.ls[-2])
            out = np.where(hi, self.lb[-1] + slope * (t - self.ls[-1]), out)
        return np.exp(out)


@dataclass(frozen=True)
class RateFunction:
    """Non-increasing rate with exact (possibly lazy/composed) evaluation."""

    fn: Callable
    kind: str = "weak_poincare"
    provenance: str = ""
    form: str = "generic"
    params: tuple = ()
    table: Optional[LogLogTable] = None

    def __call__(self, s):
        arr = np.asarray(s, dtype=float)
        if np.any(arr <= 0.0) or np.any(arr >= 1.0):
            raise BadParameter("rates are evaluated for s in (0, 1)")
        out = self.fn(arr)
        return float(out) if np.isscalar(s) or np.ndim(s) == 0 else np.asarray(out, dtype=float)

    eval = __call__

    def inverse(self, y: float, s_floor: float = 1e-300) -> float:
        """Generalized inverse inf{s : beta(s) <= y} under the
        right-continuous-infimum convention (clipped to the domain)."""
        if self(S_MAX) > y:
            return S_MAX  # empty constraint set; clip at the domain end
        if self(s_floor) <= y:
            return s_floor
        t = brentq(lambda lt: self(math.exp(lt)) - y, math.log(s_floor), math.log(S_MAX),
                   rtol=1e-13)
        return float(math.exp(t))

    def sample(self, s_grid=None):
        if s_grid is None:
            s_grid = default_s_grid()
        return np.asarray(s_grid, dtype=float), self(np.asarray(s_grid, dtype=float))

    def with_provenance(self, note: str) -> "RateFunction":
        return replace(self, provenance=f"{self.provenance}|{note}" if self.provenance else note)


def default_s_grid(n: int = N_TAB):
    return np.geomspace(S_MIN_TAB, S_MAX, n)


def _check_monotone(rate: RateFunction, n: int = 64, rtol: float = 1e-9) -> RateFunction:
    s = np.geomspace(S_MIN_TAB, S_MAX, n)
    b = rate(s)
    if np.any(b[1:] > b[:-1] * (1.0 + rtol)):
        i = int(np.argmax(b[1:] / np.maximum(b[:-1], 1e-300)))
        raise BadParameter(
            f"rate is not non-increasing near s = {s[i]:.3g} ({rate.provenance})")
    return rate


# ----------------------------------------------------------------------
# constructors

def builtin_rate(family: str, alpha: float, c: float = 1.0) -> RateFunction:
    """Closed-form rate shapes of the registered heavy-tailed families:
    polynomial s^(-2/alpha) for Cauchy, ln^{2(1-alpha)/alpha}(1/s) for
    Subbotin."""
    if c <= 0:
        raise BadParameter("prefactor must be positive")
    if family == "cauchy":
        if alpha <= 0:
            raise BadParameter("cauchy rate needs alpha > 0")
        p = 2.0 / alpha
        fn = lambda s: c * s ** (-p)
    elif family == "subbotin":
        if not 0.0 < alpha < 1.0:
            raise BadParameter("subbotin rate needs alpha in (0, 1)")
        q = 2.0 * (1.0 - alpha) / alpha
        fn = lambda s: c * np.log(1.0 / s) ** q
    else:
        raise BadParameter(f"unknown rate family {family!r}")
    return _check_monotone(RateFunction(
        fn, form=family, params=(alpha, c), provenance=f"builtin[{family},alpha={alpha},c={c}]"))


def constant_rate(C: float, kind: str = "weak_poincare") -> RateFunction:
    """Degenerate flat rate (ordinary spectral-gap regime); C = 0 is allowed
    as the rate of a point mass."""
    if C < 0:
        raise BadParameter("constant rate must be >= 0")
    return RateFunction(lambda s: np.full_like(np.asarray(s, dtype=float), float(C)),
                        kind=kind, form="constant", params=(C,), provenance=f"constant[{C}]")


def tabulated_rate(s_nodes, beta_nodes, kind: str = "weak_poincare",
                   provenance: str = "tabulated") -> RateFunction:
    """Rate from tabulated values; rejects non-monotone inputs (beyond small
    numerical jitter, which is repaired by a running maximum)."""
    s = np.asarray(s_nodes, dtype=float)
    b = np.asarray(beta_nodes, dtype=float)
    order = np.argsort(s)
    s, b = s[order], b[order]
    if np.any(s <= 0.0) or np.any(b <= 0.0):
        raise BadParameter("tabulated rates need positive s and beta")
    if np.any(b[1:] > b[:-1] * (1.0 + 1e-6)):
        raise BadParameter("tabulated rate is not non-increasing")
    b = np.minimum.accumulate(b)
    s, idx = np.unique(s, return_index=True)
    b = b[idx]
    table = LogLogTable(np.log(s), np.log(b))
    return RateFunction(table, kind=kind, form="tabulated", table=table, provenance=provenance)


# ----------------------------------------------------------------------
# algebra

def rate_scale(beta: RateFunction, lam: float) -> RateFunction:
    """Rate of the scaled variable lambda * Z: lambda^2 * beta."""
    if lam == 0:
        raise BadParameter("scaling by zero is degenerate")
    c = lam * lam
    return replace(beta, fn=lambda s: c * beta.fn(np.asarray(s, dtype=float)),
                   form="composed", table=None).with_provenance(f"scale[{lam}]")


def rate_tensorize(rates) -> RateFunction:
    """Rate of an independent tuple: max_j beta_j(s/n)."""
    rates = list(rates)
    if not rates:
        raise BadParameter("need at least one rate")
    n = len(rates)
    if n == 1:
        return rates[0]
    kind = rates[0].kind

    def fn(s):
        s = np.asarray(s, dtype=float)
        return np.max([r.fn(s / n) for r in rates], axis=0)

    return RateFunction(fn, kind=kind, form="composed",
                        provenance=f"tensorize[{n}]")


def rate_convolve(b1: RateFunction, b2: RateFunction) -> RateFunction:
    """Rate of an independent sum: beta_1(s/2) + beta_2(s/2)."""

    def fn(s):
        s = np.asarray(s, dtype=float)
        return b1.fn(s / 2.0) + b2.fn(s / 2.0)

    return RateFunction(fn, kind=b1.kind, form="composed", provenance="convolve")


def wls_tensorize(rates) -> RateFunction:
    """Entropy version of tensorization: max_j beta_j(s/n)."""
    out = rate_tensorize(rates)
    return replace(out, kind="weak_log_sobolev").with_provenance("wls")


def wls_convolve(rates) -> RateFunction:
    """Entropy version for sums: sum_j beta_j(s/n) with n = len(rates)."""
    rates = list(rates)
    n = len(rates)
    if n == 0:
        raise BadParameter("need at least one rate")
    if n == 1:
        return rates[0]

    def fn(s):
        s = np.asarray(s, dtype=float)
        return sum(r.fn(s / n) for r in rates)

    return RateFunction(fn, kind="weak_log_sobolev", form="composed",
                        provenance=f"wls-convolve[{n}]")


def p_weak_rate(beta: RateFunction, p: float) -> RateFunction:
    """Rate for the weak inequality with ||f - mean||_p^2 replacing Osc^2:
    the defect argument becomes s^{p/(p-2)} / 2^{(3p-2)/(p-2)}."""
    if p <= 2:
        raise BadParameter("p-weak rates need p > 2")
    expo = p / (p - 2.0)
    denom = 2.0 ** ((3.0 * p - 2.0) / (p - 2.0))

    def fn(s):
        s = np.asarray(s, dtype=float)
        return beta.fn(s**expo / denom)

    return RateFunction(fn, kind=beta.kind, form="composed",
                        provenance=f"{beta.provenance}|p-weak[{p}]")


# ----------------------------------------------------------------------
# generic tail bound

def rate_from_local_oscillation(measure: Measure, s_grid=None) -> RateFunction:
    """Universal rate from ball masses and potential oscillation:

      beta(s) = C(d) R(s)^2 exp(osc of V over B(0, R(s))),
      R(s) the radius whose ball carries mass 1/(1+s).
    """
    if measure.potential is None:
        raise OscillationUnavailable(f"{measure.kind} has no potential")
    if s_grid is None:
        s_grid = default_s_grid()
    pref = dimension_prefactor(measure.d)
    betas = []
    for s in s_grid:
        # ball mass G(R) >= 1/(1+s)  <=>  tail(R) <= s/(1+s)
        R = measure.tail_quantile(s / (1.0 + s))
        osc = measure.osc_ball(R)
        betas.append(pref * R * R * math.exp(osc))
    betas = np.minimum.accumulate(np.asarray(betas))  # guard tiny jitter
    return tabulated_rate(s_grid, betas, provenance="local-oscillation")


# ----------------------------------------------------------------------
# concentration

@dataclass(frozen=True)
class ConcentrationProfile:
    """Tail-probability profile of a weak-inequality rate.

    theta(u) = inf{s in (0,1/4] : u >= 4 sqrt(beta(s)) ln(1/s)}; the deviation
    bound for an L-Lipschitz observable is 6 * theta(a / L), clipped at 1.
    """

    source: RateFunction

    def _g(self, s: float) -> float:
        return 4.0 * math.sqrt(self.source(s)) * math.log(1.0 / s)

    def theta(self, u: float) -> float:
        if u <= 0:
            return S_MAX
        if u <= self._g(S_MAX):
            return S_MAX  # constraint empty or binding only at the endpoint
        lo, hi = 1e-300, S_MAX
        if self._g(lo) <= u:  # constraint holds everywhere
            return lo
        t = brentq(lambda lt: self._g(math.exp(lt)) - u, math.log(lo), math.log(hi),
                   rtol=1e-13)
        return float(math.exp(t))

    def tail_bound(self, a: float, L: float = 1.0) -> float:
        return min(1.0, 6.0 * self.theta(a / L))


def concentration_profile(beta: RateFunction) -> ConcentrationProfile:
    if beta.kind != "weak_poincare":
        raise BadParameter("concentration profiles take weak-Poincare rates")
    return ConcentrationProfile(beta)


# ----------------------------------------------------------------------
# perturbation transforms

def perturb_rate_holley_stroock(beta_nu: RateFunction, osc_U: float, m_U: float) -> RateFunction:
    """Bounded-perturbation transform: e^{osc U} * beta(e^{m_U} s)."""
    if osc_U < 0:
        raise BadParameter("oscillation must be >= 0")
    if m_U > 0:
        raise BadParameter("normalization requires m_U <= 0")
    amp = math.exp(osc_U)
    shrink = math.exp(m_U)

    def fn(s):
        return amp * beta_nu.fn(np.asarray(s, dtype=float) * shrink)

    return RateFunction(fn, kind=beta_nu.kind, form="composed",
                        provenance=f"{beta_nu.provenance}|bounded-perturbation")


def perturb_rate_lower_bounded(beta_nu: RateFunction, nu: Measure, U: Potential,
                               s_grid=None) -> RateFunction:
    """Perturbation by e^{-U} with U bounded below (m_U <= 0):

      beta_mu(s) = 2 exp(osc of U over B(0, R(s))) beta_nu(e^{m_U} s / 7),
      R(s) = 1 + med_nu + 4 sqrt(beta_nu(u)) ln(1/u),  u = s / (1 + 2 beta_nu(s)).

    The candidate is evaluated lazily and exactly; if its tabulation fails to
    be non-increasing it is replaced by the smallest non-increasing majorant.
    """
    m_U, m_exact = U.lower_bound()
    if m_U > 1e-9:
        raise BadParameter("normalization requires m_U <= 0 (shift U first)")
    m_U = min(m_U, 0.0)
    med = nu.median_abs()
    shrink = math.exp(m_U) / 7.0

    def candidate(s: float) -> float:
        u = s / (1.0 + 2.0 * beta_nu(s))
        R = 1.0 + med + 4.0 * math.sqrt(beta_nu(u)) * math.log(1.0 / u)
        return 2.0 * math.exp(U.osc_ball(R)) * beta_nu(s * shrink)

    def fn(s):
        arr = np.atleast_1d(np.asarray(s, dtype=float))
        return np.array([candidate(float(v)) for v in arr]).reshape(np.shape(s))

    prov = f"{beta_nu.provenance}|lower-bounded-perturbation" + ("" if m_exact else "|m_U-uncertified")
    if s_grid is None:
        s_grid = default_s_grid()
    vals = np.array([candidate(float(v)) for v in s_grid])
    if np.all(vals[1:] <= vals[:-1] * (1.0 + 1e-9)):
        return RateFunction(fn, kind=beta_nu.kind, form="composed", provenance=prov)
    majorant = np.maximum.accumulate(vals[::-1])[::-1]  # sup over [s, s_max]
    return tabulated_rate(s_grid, majorant, kind=beta_nu.kind,
                          provenance=prov + "|monotone-majorant")


# ----------------------------------------------------------------------
# drift-derived rates

def _sublevel_runs(radii, mask):
    """Contiguous index runs where mask holds."""
    runs = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        elif not m and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(radii) - 1))
    return runs


class SublevelMass:
    """mu{phi <= t} for a scalar field phi given by its values on a radial
    grid, with run boundaries refined by bisection and masses computed from
    exact tail quadrature.  The domain is symmetric (d = 1) or radial."""

    def __init__(self, measure: Measure, phi_vals: Callable, grid_r=None):
        self.measure = measure
        if grid_r is None:
            grid_r = np.abs(measure.verification_grid(4096))
            grid_r = np.unique(grid_r)
        self.r = np.asarray(grid_r, dtype=float)
        self.phi = phi_vals
        self.vals = np.asarray(phi_vals(self.r), dtype=float)

    def _crossing(self, i: int, j: int, t: float) -> float:
        """Refine the crossing of phi = t between grid nodes i < j."""
        a, b = self.r[i], self.r[j]
        fa, fb = self.vals[i] - t, self.vals[j] - t
        if fa == 0.0:
            return a
        if fb == 0.0 or fa * fb > 0:
            return b if abs(fb) < abs(fa) else a
        return float(brentq(lambda rr: float(np.asarray(self.phi(np.asarray([rr])))[0]) - t,
                            a, b, rtol=1e-12))

    def intervals(self, t: float):
        """Sublevel set {phi <= t} as radial intervals; the last may extend
        to infinity when the far field stays below t."""
        mask = self.vals <= t
        runs = _sublevel_runs(self.r, mask)
        out = []
        for i0, i1 in runs:
            a = self.r[i0] if i0 == 0 else self._crossing(i0 - 1, i0, t)
            if i1 == len(self.r) - 1:
                out.append((a, np.inf))
            else:
                b = self._crossing(i1, i1 + 1, t)
                out.append((a, b))
        return out

    def mass(self, t: float) -> float:
        total = 0.0
        for a, b in self.intervals(t):
            ta = self.measure.tail(a) if a > 0 else 1.0
            tb = 0.0 if not np.isfinite(b) else self.measure.tail(b)
            total += max(0.0, ta - tb)
        return min(1.0, total)


def _h_table(sub: SublevelMass, weight_fn=None, h_floor: float = 1e-10,
             r_cap: float = 1e40, per_decade: int = 10):
    """Tabulate r -> h(r) where h(r) = w(level set) * mu{phi <= 1/r} and the
    optional weight multiplies by exp(-min_{set} U)."""
    vmax = float(np.max(sub.vals))
    r_lo = 0.5 / vmax if vmax > 0 else 1e-6
    rs, hs = [], []
    r = r_lo
    while r <= r_cap:
        t = 1.0 / r
        ivals = sub.intervals(t)
        m = 0.0
        for a, b in ivals:
            ta = sub.measure.tail(a) if a > 0 else 1.0
            tb = 0.0 if not np.isfinite(b) else sub.measure.tail(b)
            m += max(0.0, ta - tb)
        h = min(1.0, m)
        if weight_fn is not None and ivals:
            h *= weight_fn(ivals)
        rs.append(r)
        hs.append(h)
        if h <= h_floor:
            break
        r *= 10.0 ** (1.0 / per_decade)
    return np.asarray(rs), np.asarray(hs)


def _rate_from_h(rs, hs, prefactor: float, provenance: str) -> RateFunction:
    """Invert a non-increasing h into beta(s) = prefactor * inf{r: h(r) <= s}."""
    hs = np.minimum.accumulate(hs)
    pos = hs > 0.0
    r_zero = rs[~pos][0] if np.any(~pos) else None
    rs, hs = rs[pos], hs[pos]
    # first occurrence of each h value = smallest r (inf convention)
    hs_u, idx = np.unique(hs, return_index=True)
    rs_u = rs[idx]
    s_nodes = hs_u
    beta_nodes = prefactor * rs_u
    if r_zero is not None:
        s_nodes = np.concatenate([[1e-30], s_nodes])
        beta_nodes = np.concatenate([[prefactor * r_zero], beta_nodes])
    keep = s_nodes < 1.0
    return tabulated_rate(s_nodes[keep], beta_nodes[keep], provenance=provenance)


def rate_from_lyapunov(cert: LyapunovCertificate, measure: Measure) -> RateFunction:
    """Rate induced by a weak drift certificate:

      beta(s) = (1 + C(d) b R^2 exp(osc_B(0,R) V)) * h^{-1}(s),
      h(r) = mu{phi <= 1/r}.
    """
    cert.require_verified("weak")
    pref = 1.0 + dimension_prefactor(measure.d) * cert.b * cert.R**2 * math.exp(
        measure.osc_ball(cert.R))
    sub = SublevelMass(measure, lambda r: cert.phi.value(r))
    rs, hs = _h_table(sub)
    return _rate_from_h(rs, hs, pref, provenance=f"lyapunov[{cert.provenance}]")


def rate_from_perturbed_lyapunov(cert: LyapunovCertificate, U: Potential,
                                 nu: Measure) -> RateFunction:
    """Rate for e^{-U} d(nu) built from nu's drift certificate:

      beta(s) = C * h_U^{-1}(s),
      h_U(r) = exp(-min_{phi_U <= 1/r} U) * nu{phi_U <= 1/r},
      phi_U = phi + <grad U, grad F>/F   (must be positive outside the ball).

    The same (b, R) certify the perturbed generator, so C carries the
    perturbed potential's ball oscillation.
    """
    phi_U, _ = perturbed_drift(cert, U, nu)  # raises PhiUNotPositive on failure

    from .measures import perturbed as perturbed_measure

    mu = perturbed_measure(nu, U)
    pref = 1.0 + dimension_prefactor(nu.d) * cert.b * cert.R**2 * math.exp(
        mu.osc_ball(cert.R))
    sub = SublevelMass(nu, lambda r: phi_U.value(r))

    r_far = float(sub.r[-1])

    def weight_fn(ivals):
        mins = []
        for a, b in ivals:
            pts = [a] if not np.isfinite(b) else [a, b]
            rr = sub.r[(sub.r >= a) & (sub.r <= (b if np.isfinite(b) else np.inf))]
            cand = np.concatenate([np.asarray(pts, dtype=float), rr])
            if not np.isfinite(b):
                # probe beyond the grid so decreasing U cannot hide its infimum
                cand = np.concatenate([cand, r_far * np.array([1e1, 1e3, 1e6])])
            mins.append(float(np.min(U.value(cand))))
        return math.exp(-min(mins))

    rs, hs = _h_table(sub, weight_fn=weight_fn)
    return _rate_from_h(rs, hs, pref, provenance=f"perturbed-lyapunov[{cert.provenance}]")


# ----------------------------------------------------------------------
# weak Poincare <-> weak log-Sobolev

def wls_from_wp(beta: RateFunction, c: float = 1.0, c_prime: float = 1.0,
                s0: float = S_MAX) -> RateFunction:
    """Entropy rate from a variance rate:
    beta_LS(s) = c' * beta(c s / ln(1/s)) * ln(1/s) for s <= s0.

    The constants (c, c', s0) are not pinned by the theory used here;
    defaults are 1 and the provenance records that they are uncalibrated.
    """
    if c <= 0 or c_prime <= 0:
        raise BadParameter("constants must be positive")

    def fn(s):
        s = np.asarray(s, dtype=float)
        if np.any(s > s0):
            raise BadParameter(f"transform valid for s <= s0 = {s0}")
        L = np.log(1.0 / s)
        return c_prime * beta.fn(c * s / L) * L

    return RateFunction(fn, kind="weak_log_sobolev", form="composed",
                        provenance=f"{beta.provenance}|wls-from-wp[c={c},c'={c_prime};uncalibrated]")


def wp_from_wls(beta_ls: RateFunction) -> RateFunction:
    """Variance rate from an entropy rate:
    beta(s) = 24 beta_LS((s/2) ln(1+1/(2s))) / ln(1+1/(2s)),
    valid only when the candidate is non-increasing (flat entropy rates are
    rejected)."""
    if beta_ls.kind != "weak_log_sobolev":
        raise BadParameter("input must be a weak log-Sobolev rate")

    def fn(s):
        s = np.asarray(s, dtype=float)
        L = np.log1p(1.0 / (2.0 * s))
        return 24.0 * beta_ls.fn(0.5 * s * L) / L

    grid = np.geomspace(1e-6, S_MAX, 96)
    vals = fn(grid)
    if np.any(vals[1:] > vals[:-1] * (1.0 + 1e-9)):
        raise NotApplicable("candidate variance rate is not non-increasing")
    return RateFunction(fn, kind="weak_poincare", form="composed",
                        provenance=f"{beta_ls.provenance}|wp-from-wls")


# ----------------------------------------------------------------------
# serialization helpers (formats shared with the CLI)

def rate_to_jsonable(rate: RateFunction) -> dict:
    if rate.form in ("cauchy", "subbotin"):
        alpha, c = rate.params
        return {"representation": "closed_form", "family": rate.form,
                "alpha": alpha, "c": c, "kind": rate.kind, "provenance": rate.provenance}
    if rate.form == "constant":
        return {"representation": "closed_form", "family": "constant",
                "c": rate.params[0], "kind": rate.kind, "provenance": rate.provenance}
    s, b = rate.sample()
    return {"representation": "tabulated", "s": list(map(float, s)),
            "beta": list(map(float, b)), "kind": rate.kind, "provenance": rate.provenance}


def rate_from_jsonable(obj: dict) -> RateFunction:
    if obj["representation"] == "closed_form":
        if obj["family"] == "constant":
            out = constant_rate(obj["c"], kind=obj.get("kind", "weak_poincare"))
        else:
            out = builtin_rate(obj["family"], obj["alpha"], obj["c"])
        return replace(out, kind=obj.get("kind", out.kind),
                       provenance=obj.get("provenance", out.provenance))
    return tabulated_rate(obj["s"], obj["beta"], kind=obj.get("kind", "weak_poincare"),
                          provenance=obj.get("provenance", "tabulated"))
