"""Interaction Lagrangians and the field-energy bookkeeping built on them.

Two routes to the interaction of a charge with applied fields:

* potential route: ``-q Phi(r0) + q v . A(r0)``;
* overlap route: ``int d^3x [-eps0 E_p . E_0 + B_p . B_0 / mu0]``, the
  superposition of the particle's own field with the applied field.

Their difference is the time derivative of ``eps0 int A . E_p d^3x``
(:func:`boundary_term`). The module also evaluates the rest-frame field
energy of a shell particle, the free-particle field Lagrangian
``int (B^2/2mu0 - eps0 E^2/2)`` and the bilinear split of the total field
Lagrangian of several particles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .emcore import DomainError, EMFieldSample, gamma_factor
from .quad3d import (
    AllSpace,
    ConfigurationError,
    CylinderInterior,
    ExteriorOfBall,
    IntegralResult,
    QuadratureConfig,
    RefinementCenter,
    TorusBody,
    integrate,
)
from .sources import (
    ChargedShell,
    IdealSolenoid,
    ParticleModel,
    ParticleState,
    PotentialSample,
    ShieldedToroid,
    Toroid,
    contraction_shape,
    particle_fields,
    shell_fields,
    solenoid_potential,
    source_potential,
    toroid_fields,
    toroid_potential_checked,
)


def l_int_standard(p: ParticleModel, st: ParticleState, pot: PotentialSample) -> float:
    """``-q Phi + q v.A`` with potentials sampled at the particle centre."""
    return float(-p.q * np.asarray(pot.phi) + p.q * np.dot(st.v, np.asarray(pot.a)))


def standard_lagrangian(p: ParticleModel, st: ParticleState, sources, t: float = 0.0):
    """Potential-route Lagrangian summed over sources, with an error estimate
    (non-zero only for the toroid, whose potential is itself a quadrature)."""
    total, err = 0.0, 0.0
    for src in sources:
        if isinstance(src, (Toroid, ShieldedToroid)):
            tor = src if isinstance(src, Toroid) else src.toroid
            pot, a_err = toroid_potential_checked(tor, st.r0)
            err += abs(p.q) * float(np.linalg.norm(st.v)) * float(a_err)
        else:
            pot = source_potential(src, t, st.r0)
        total += l_int_standard(p, st, pot)
    return total, err


def particle_center(p: ParticleModel, st: ParticleState) -> RefinementCenter:
    breaks = (p.a,) if p.a > 0 else ()
    return RefinementCenter(st.r0, breaks, contraction_shape(st, p.constants))


def _with_particle(cfg: QuadratureConfig, p, st):
    return cfg.with_centers(tuple(cfg.refinement_centers) + (particle_center(p, st),))


def _zero():
    return IntegralResult.zero()


def _cylinder_for(src: IdealSolenoid, st: ParticleState) -> CylinderInterior:
    # centre the z-range on the particle so the core patch covers the bulk
    z_p = float((st.r0 - src.axis_point) @ src.axis_dir)
    origin = src.axis_point + z_p * src.axis_dir
    rho_p = float(src.rho(st.r0))
    return CylinderInterior(origin, src.axis_dir, src.radius, z_core=2.0 * max(src.radius, rho_p))


def _torus_for(t: Toroid) -> TorusBody:
    return TorusBody(t.center, t.axis_dir, t.major_radius, t.minor_radius)


def overlap_terms(p: ParticleModel, st: ParticleState, src, t: float, cfg: QuadratureConfig) -> dict:
    """Overlap integral split by physical term.

    Keys: ``"electric"`` (-eps0 E_p.E_0), ``"magnetic"`` (B_p.B_0/mu0 with
    the magnet's own field), and for the shielded toroid ``"shield"``
    (the shield's response, -|B_p|^2/mu0 over the body).
    """
    k = p.constants
    cfg = _with_particle(cfg, p, st)
    moving = bool(np.any(st.v != 0))
    if isinstance(src, ChargedShell):
        v_now = src.potential(t)
        if v_now == 0.0 or p.q == 0.0:
            return {"electric": _zero()}

        def f(x):
            return -k.eps0 * np.sum(particle_fields(p, st, x).e * shell_fields(src, t, x).e, axis=-1)

        region = ExteriorOfBall(src.center, src.radius)
        return {"electric": integrate(f, region, cfg)}
    if isinstance(src, IdealSolenoid):
        if not moving or p.q == 0.0 or src.phi0 == 0.0:
            return {"magnetic": _zero()}
        b0 = src.b_inside / k.mu0

        def f(x):
            return b0 * (particle_fields(p, st, x).b @ src.axis_dir)

        return {"magnetic": integrate(f, _cylinder_for(src, st), cfg)}
    if isinstance(src, (Toroid, ShieldedToroid)):
        tor = src if isinstance(src, Toroid) else src.toroid
        region = _torus_for(tor)
        if not moving or p.q == 0.0:
            out = {"magnetic": _zero()}
            if isinstance(src, ShieldedToroid):
                out["shield"] = _zero()
            return out

        def f(x):
            return np.sum(particle_fields(p, st, x).b * toroid_fields(tor, x).b, axis=-1) / k.mu0

        out = {"magnetic": _zero() if tor.phi0 == 0 else integrate(f, region, cfg)}
        if isinstance(src, ShieldedToroid):
            def g(x):
                bp = particle_fields(p, st, x).b
                return -np.sum(bp * bp, axis=-1) / k.mu0

            out["shield"] = integrate(g, region, cfg)
        return out
    raise TypeError(f"unknown source {src!r}")


def l_int_overlap(p: ParticleModel, st: ParticleState, src, t: float = 0.0,
                  cfg: QuadratureConfig | None = None) -> IntegralResult:
    """Field-overlap Lagrangian of the particle with one applied source."""
    cfg = cfg or QuadratureConfig(rel_tol=1e-6)
    total = _zero()
    for term in overlap_terms(p, st, src, t, cfg).values():
        total = total + term
    return total


def overlap_lagrangian(p, st, sources, t, cfg) -> IntegralResult:
    total = _zero()
    for src in sources:
        total = total + l_int_overlap(p, st, src, t, cfg)
    return total


def boundary_term(p: ParticleModel, st: ParticleState, a_field, cfg: QuadratureConfig | None = None,
                  scale: float = 1.0, polar_axis=(1.0, 0.0, 0.0)) -> IntegralResult:
    """``eps0 int A . E_p d^3x`` over all space.

    ``a_field`` maps an ``(N, 3)`` array of points to ``(N, 3)`` vector
    potentials. ``scale`` sets the inner radius of the all-space split.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-6)
    k = p.constants

    def f(x):
        return k.eps0 * np.sum(np.asarray(a_field(x)) * particle_fields(p, st, x).e, axis=-1)

    region = AllSpace(center=st.r0, core_radius=scale, polar_axis=polar_axis)
    return integrate(f, region, _with_particle(cfg, p, st))


def boundary_term_rate(p: ParticleModel, st: ParticleState, a_field, cfg: QuadratureConfig | None = None,
                       scale: float = 1.0, polar_axis=(1.0, 0.0, 0.0)) -> IntegralResult:
    """``eps0 int A . dE_p/dt d^3x`` for a point charge in uniform motion.

    Uses ``dE_p/dt = -(v . grad) E_p`` written out analytically. The
    singularity at the charge is of principal-value type; its leading part,
    which integrates to zero, is subtracted before quadrature, and the
    contact term of the differentiated Coulomb field is added. The shell
    radius is ignored: a
    moving shell adds a surface term that the point charge does not have.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-6)
    k = p.constants
    speed = float(np.linalg.norm(st.v))
    if speed == 0.0 or p.q == 0.0:
        return _zero()
    g = gamma_factor(st.v, k)
    n = st.v / speed
    pref = p.q * g * speed / (4 * math.pi * k.eps0)
    point = ParticleModel(p.q, 0.0, p.m, k)

    a_here = np.asarray(a_field(st.r0[None, :]))[0]

    def f(x):
        d = x - st.r0
        par = d @ n
        dd = np.sum(d * d, axis=-1) + (g * g - 1.0) * par * par
        grad_e = (np.outer(dd**-1.5, n)
                  - 3 * g * g * d * np.expand_dims(par * dd**-2.5, -1))
        # dd is the squared rest-frame distance; the subtracted term is radial
        # times zero-mean angular there, so it integrates to zero
        a_minus = np.asarray(a_field(x)) - np.outer(np.exp(-dd / scale**2), a_here)
        return -k.eps0 * pref * np.sum(a_minus * grad_e, axis=-1)

    region = AllSpace(center=st.r0, core_radius=scale, polar_axis=polar_axis)
    pv = integrate(f, region, _with_particle(cfg, point, st))
    # contact term: d_i E_j carries (q / 3 eps0) delta_ij delta(x - r0)
    contact = -p.q * float(np.dot(a_here, st.v)) / 3.0
    return IntegralResult(pv.value + contact, pv.error_estimate, pv.evaluations, pv.converged, pv.tail_bound)


def em_mass(p: ParticleModel, cfg: QuadratureConfig | None = None) -> IntegralResult:
    """Rest-frame field energy outside the shell divided by ``c^2``."""
    cfg = cfg or QuadratureConfig(rel_tol=1e-8)
    k = p.constants
    if p.a == 0:
        raise DomainError("a point charge has divergent field energy; give the particle a shell radius")
    if p.q == 0:
        return _zero()
    rest = ParticleState(np.zeros(3))

    def f(x):
        e = particle_fields(p, rest, x).e
        return 0.5 * k.eps0 * np.sum(e * e, axis=-1) / k.c**2

    return integrate(f, ExteriorOfBall(np.zeros(3), p.a), cfg)


def _field_lagrangian_density(k, s: EMFieldSample):
    return 0.5 * np.sum(s.b * s.b, axis=-1) / k.mu0 - 0.5 * k.eps0 * np.sum(s.e * s.e, axis=-1)


def free_field_lagrangian(p: ParticleModel, st: ParticleState, cfg: QuadratureConfig | None = None) -> IntegralResult:
    """``int (B^2/2mu0 - eps0 E^2/2) d^3x`` of the particle's own field on
    the lab simultaneity slice.

    The exterior of the contracted shell is reached by a linear change of
    variables ``x = r0 + M y`` that maps the unit-radius-``a`` ball in ``y``
    onto the lab-frame spheroid; the lab fields are evaluated at ``x``.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-8)
    k = p.constants
    if p.a == 0:
        raise DomainError("point-charge field energy diverges")
    gamma_factor(st.v, k)
    shape = contraction_shape(st, k)
    m = np.eye(3) if shape is None else shape
    det = abs(np.linalg.det(m))

    def f(y):
        x = st.r0 + y @ m.T
        return det * _field_lagrangian_density(k, particle_fields(p, st, x))

    return integrate(f, ExteriorOfBall(np.zeros(3), p.a), cfg)


@dataclass
class BilinearityReport:
    total: IntegralResult
    self_terms: list[IntegralResult]
    cross_terms: dict[tuple[int, int], IntegralResult]
    cross_oracle: float | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def cross_sum(self) -> IntegralResult:
        out = _zero()
        for r in self.cross_terms.values():
            out = out + r
        return out

    @property
    def cross_per_particle_sum(self) -> float:
        """``sum_i int F_i F_(0i) / 2mu0``: every pair counted from both ends,
        i.e. twice :attr:`cross_sum`."""
        return 2.0 * self.cross_sum.value

    @property
    def expanded(self) -> IntegralResult:
        out = self.cross_sum
        for r in self.self_terms:
            out = out + r
        return out

    @property
    def discrepancy(self) -> float:
        return self.total.value - self.expanded.value

    @property
    def combined_error(self) -> float:
        return self.total.error_estimate + self.expanded.error_estimate

    @property
    def holds(self) -> bool:
        return abs(self.discrepancy) <= self.combined_error


def _check_separated(particles):
    for i, (pi, si) in enumerate(particles):
        if pi.a <= 0:
            raise ConfigurationError("bilinearity check needs shell particles (a > 0)")
        for j in range(i + 1, len(particles)):
            pj, sj = particles[j]
            if np.linalg.norm(si.r0 - sj.r0) <= pi.a + pj.a:
                raise ConfigurationError(f"particles {i} and {j} overlap")


def _all_space_for(particles) -> AllSpace:
    pts = np.array([s.r0 for _, s in particles])
    centroid = pts.mean(axis=0)
    spread = float(np.max(np.linalg.norm(pts - centroid, axis=1)))
    amax = max(p.a for p, _ in particles)
    return AllSpace(center=centroid, core_radius=2.0 * spread + 4.0 * amax)


def bilinearity_check(particles, cfg: QuadratureConfig | None = None) -> BilinearityReport:
    """Total field Lagrangian versus self terms plus pairwise overlaps.

    Checks ``int F_T F_T / 4mu0 = sum_i int F_i F_i / 4mu0
    + sum_{i<j} int F_i F_j / 2mu0`` with every piece computed by its own
    quadrature.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-6)
    if len(particles) < 1:
        raise ConfigurationError("need at least one particle")
    _check_separated(particles)
    k = particles[0][0].constants
    region = _all_space_for(particles)
    centers = tuple(cfg.refinement_centers) + tuple(particle_center(p, s) for p, s in particles)
    cfg_all = cfg.with_centers(centers)

    def total_density(x):
        tot = EMFieldSample.zeros((len(x),))
        for p, s in particles:
            tot = tot + particle_fields(p, s, x)
        return _field_lagrangian_density(k, tot)

    total = integrate(total_density, region, cfg_all)
    selfs = [free_field_lagrangian(p, s, cfg) for p, s in particles]
    cross = {}
    for i in range(len(particles)):
        for j in range(i + 1, len(particles)):
            (pi, si), (pj, sj) = particles[i], particles[j]

            def pair_density(x, pi=pi, si=si, pj=pj, sj=sj):
                a = particle_fields(pi, si, x)
                b = particle_fields(pj, sj, x)
                return (np.sum(a.b * b.b, axis=-1) / k.mu0
                        - k.eps0 * np.sum(a.e * b.e, axis=-1))

            cfg_pair = cfg.with_centers(tuple(cfg.refinement_centers)
                                        + (particle_center(pi, si), particle_center(pj, sj)))
            cross[(i, j)] = integrate(pair_density, _all_space_for([particles[i], particles[j]]), cfg_pair)
    oracle = None
    if all(not np.any(s.v) for _, s in particles):
        oracle = -sum(
            particles[i][0].q * particles[j][0].q
            / (4 * math.pi * k.eps0 * float(np.linalg.norm(particles[i][1].r0 - particles[j][1].r0)))
            for i in range(len(particles)) for j in range(i + 1, len(particles))
        )
    return BilinearityReport(total, selfs, cross, oracle)


def solenoid_a_field(src: IdealSolenoid):
    return lambda x: solenoid_potential(src, x).a


SMOOTH_EXTENSION_ORDER = 8


def smoothed_solenoid_a(src: IdealSolenoid, order: int = SMOOTH_EXTENSION_ORDER):
    """Vector potential equal to the solenoid's outside ``rho >= R`` and a
    polynomial inside, ``C^(order-1)`` across the surface.

    Inside, ``(phi0 / 2 pi) (axis x perp) (1 - (1 - u)^order) / rho^2`` with
    ``u = rho^2 / R^2``; the bracket over ``u`` is a polynomial, so the field
    is regular on the axis.
    """
    def a_field(x):
        d = np.asarray(x, dtype=float) - src.axis_point
        perp = d - np.multiply.outer(d @ src.axis_dir, src.axis_dir)
        u = np.sum(perp * perp, axis=-1) / src.radius**2
        w = np.minimum(u, 1.0)
        # (1 - (1 - w)^n) / w as the finite geometric sum over (1 - w)^k
        poly = sum((1.0 - w) ** k for k in range(order))
        g = np.where(u < 1.0, poly, 1.0 / np.maximum(u, 1.0))
        return np.cross(src.axis_dir, perp) * np.expand_dims(src.phi0 / (2 * math.pi * src.radius**2) * g, -1)

    return a_field


def solenoid_boundary_term(p: ParticleModel, st: ParticleState, src: IdealSolenoid,
                           cfg: QuadratureConfig | None = None, scale: float = 1.0) -> IntegralResult:
    """:func:`boundary_term` for a solenoid, split at the winding surface.

    The kink of ``A`` on the infinite cylinder ``rho = R`` is not aligned
    with any cell family of the all-space map. Instead the all-space
    integral uses the smooth extension :func:`smoothed_solenoid_a` and the
    difference ``A - A_smooth``, which vanishes outside, is integrated over
    the cylinder interior where it is a polynomial.
    """
    cfg = cfg or QuadratureConfig(rel_tol=1e-6)
    k = p.constants
    rho_p = float(src.rho(st.r0))
    if rho_p - src.radius <= p.a:
        return boundary_term(p, st, solenoid_a_field(src), cfg, scale=scale, polar_axis=tuple(src.axis_dir))
    smooth = smoothed_solenoid_a(src)
    outer = boundary_term(p, st, smooth, cfg, scale=scale, polar_axis=tuple(src.axis_dir))

    def f(x):
        da = solenoid_potential(src, x).a - smooth(x)
        return k.eps0 * np.sum(da * particle_fields(p, st, x).e, axis=-1)

    inner = integrate(f, _cylinder_for(src, st), _with_particle(cfg, p, st))
    return outer + inner
