"""Two-particle states built from products of Gaussian packets.

A state is a finite sum of terms c * phi(r - rA, kA) * phi(r' - rB, kB) with

    phi(r - c, k) = (2 pi s^2)^{-1/4} exp(-(r - c)^2 / (4 s^2) + i k (r - c)),

so every packet is normalized and its phase is referenced to its centre.
Overlaps and moments are evaluated in closed form, which makes the
Schmidt decomposition of few-term states exact up to a small Gram-matrix
eigenproblem.  ``discretize`` and ``schmidt_numeric`` provide the
independent grid-based route.

Geometry: particle A sits in a superposition of r1 = d + s and r2 = -d + s,
particle B of r3 = d - s~ and r4 = -d - s~; A moves with carrier +k and B
with -k.  A scattering event transfers k_bar + delta with delta = 0 for the
pairs (1,3), (2,4), -kappa for (1,4) and +kappa for (2,3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    GeometryInvalid,
    NoIntersection,
    NotProductForm,
    NotTwoByTwo,
    SupportOutOfDomain,
)
from .grid import GridSpec

PAIRS = ((1, 3), (1, 4), (2, 3), (2, 4))
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class ScatterGeometry:
    d: float
    s: float = 0.0
    s_t: float = 0.0
    k: float = 16 * math.pi
    k_bar: float = 16 * math.pi
    kappa: float = 3 * math.pi / 4
    t_c: float = 0.0
    mass_a: float = 1.0
    mass_b: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.d > 0:
            raise GeometryInvalid(f"half-separation d must be positive, got {self.d}")
        if not self.sigma > 0:
            raise GeometryInvalid(f"sigma must be positive, got {self.sigma}")
        if not (self.mass_a > 0 and self.mass_b > 0):
            raise GeometryInvalid("masses must be positive")
        if self.k == 0 or not 2 * math.pi / abs(self.k) < self.sigma / 4:
            raise GeometryInvalid(f"carrier k={self.k} is not fast compared with sigma={self.sigma}")

    @classmethod
    def default(cls, **overrides) -> ScatterGeometry:
        """sigma = d = 1, k = 16 pi, and kappa with exp(-2 i kappa d) = i."""
        d = overrides.get("d", 1.0)
        overrides.setdefault("kappa", 3 * math.pi / (4 * d))
        return cls(**{"d": d, **overrides})

    @property
    def k0(self) -> float:
        """Mean momentum transfer."""
        return self.k_bar - self.k

    @property
    def centers(self) -> dict:
        d, s, st = self.d, self.s, self.s_t
        return {1: d + s, 2: -d + s, 3: d - st, 4: -d - st}


@dataclass(frozen=True)
class GaussTerm:
    """c * phi_A(r; rA, kA, sigma) * phi_B(r'; rB, kB, sigma_b).

    ``sigma_b`` defaults to ``sigma``.  ``transfer`` is the momentum given to
    A (and taken from B) by a scattering event, or ``None`` before scattering.
    """

    c: complex
    rA: float
    kA: float
    rB: float
    kB: float
    sigma: float
    sigma_b: float | None = None
    transfer: float | None = None
    label: str = ""

    def __post_init__(self):
        if not self.sigma > 0 or (self.sigma_b is not None and not self.sigma_b > 0):
            raise ValueError("packet widths must be positive")
        if not np.isfinite(self.c):
            raise ValueError("term coefficient must be finite")

    @property
    def width_b(self) -> float:
        return self.sigma if self.sigma_b is None else self.sigma_b

    @property
    def packet_a(self) -> tuple:
        return (self.rA, self.kA, self.sigma)

    @property
    def packet_b(self) -> tuple:
        return (self.rB, self.kB, self.width_b)


@dataclass(frozen=True)
class TwoParticleState:
    terms: tuple
    geometry: ScatterGeometry | None = None
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def norm(self) -> float:
        return float(_gram_form(self.terms, self.terms).real)

    def normalize(self) -> TwoParticleState:
        nrm = self.norm()
        if not nrm > 0:
            raise ValueError("state has zero norm")
        s = 1.0 / math.sqrt(nrm)
        return replace(self, terms=tuple(replace(t, c=t.c * s) for t in self.terms))

    def __call__(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """psi(x_i, y_j) as a matrix."""
        out = np.zeros((x.size, y.size), dtype=complex)
        for t in self.terms:
            out += t.c * np.outer(packet(x, *t.packet_a), packet(y, *t.packet_b))
        return out


@dataclass
class SchmidtDecomposition:
    """Weights (descending) and single-particle factors of each component.

    ``left_fns``/``right_fns`` hold the factors sampled on ``grid`` when one
    is available.  The analytic path also fills ``left_coeffs``/``right_coeffs``:
    component n is sum_i left_coeffs[n, i] * phi(left_basis[i]) with packets
    given as (centre, carrier, width).
    """

    weights: np.ndarray
    widths_left: np.ndarray
    widths_right: np.ndarray
    left_fns: np.ndarray | None = None
    right_fns: np.ndarray | None = None
    grid: GridSpec | None = None
    left_coeffs: np.ndarray | None = None
    right_coeffs: np.ndarray | None = None
    left_basis: list = field(default_factory=list)
    right_basis: list = field(default_factory=list)
    degenerate: bool = False

    def numerical_rank(self, tol: float = 1e-10) -> int:
        s = np.sqrt(np.clip(self.weights, 0, None))
        return int(np.sum(s > tol * s[0]))


# closed-form packet algebra


def packet(x: np.ndarray, c: float, k: float, s: float) -> np.ndarray:
    return (2 * math.pi * s * s) ** -0.25 * np.exp(-((x - c) ** 2) / (4 * s * s) + 1j * k * (x - c))


def _gauss_integrals(p1: tuple, p2: tuple) -> tuple[complex, complex, complex]:
    """Integrals of conj(phi1) x^m phi2 for m = 0, 1, 2."""
    c1, k1, s1 = p1
    c2, k2, s2 = p2
    a = 1 / (4 * s1 * s1) + 1 / (4 * s2 * s2)
    b = c1 / (2 * s1 * s1) + c2 / (2 * s2 * s2) + 1j * (k2 - k1)
    const = -c1 * c1 / (4 * s1 * s1) - c2 * c2 / (4 * s2 * s2) - 1j * k2 * c2 + 1j * k1 * c1
    pref = (2 * math.pi * s1 * s1) ** -0.25 * (2 * math.pi * s2 * s2) ** -0.25
    i0 = pref * np.sqrt(math.pi / a) * np.exp(b * b / (4 * a) + const)
    mean = b / (2 * a)
    return i0, i0 * mean, i0 * (mean * mean + 1 / (2 * a))


def overlap(p1: tuple, p2: tuple) -> complex:
    """<phi1|phi2> for packets given as (centre, carrier, width)."""
    return complex(_gauss_integrals(p1, p2)[0])


def gram(packets: list) -> np.ndarray:
    n = len(packets)
    g = np.empty((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            g[i, j] = overlap(packets[i], packets[j])
    return g


def packet_std(coeffs: np.ndarray, packets: list) -> float:
    """Density std of sum_i coeffs[i] phi(packets[i]), in closed form."""
    m0 = m1 = m2 = 0.0
    for ci, pi in zip(coeffs, packets):
        for cj, pj in zip(coeffs, packets):
            w = np.conj(ci) * cj
            i0, i1, i2 = _gauss_integrals(pi, pj)
            m0 += w * i0
            m1 += w * i1
            m2 += w * i2
    m0, m1, m2 = m0.real, m1.real, m2.real
    mean = m1 / m0
    return math.sqrt(max(m2 / m0 - mean * mean, 0.0))


def _gram_form(left: tuple, right: tuple) -> complex:
    total = 0j
    for t1 in left:
        for t2 in right:
            total += (
                np.conj(t1.c) * t2.c * overlap(t1.packet_a, t2.packet_a) * overlap(t1.packet_b, t2.packet_b)
            )
    return complex(total)


# state construction and scattering


def build_initial(geom: ScatterGeometry, phase: complex = 1.0) -> TwoParticleState:
    """(phi(r-r1,k) + phase phi(r-r2,k)) (phi(r'-r3,-k) + phase phi(r'-r4,-k)), normalized.

    Terms with a vanishing coefficient are dropped, so ``phase = 0`` gives a
    single product term.
    """
    if not isinstance(geom, ScatterGeometry):
        raise GeometryInvalid("a ScatterGeometry is required")
    r = geom.centers
    amp = {1: 1.0, 2: phase, 3: 1.0, 4: phase}
    terms = []
    for i, j in PAIRS:
        c = complex(amp[i] * amp[j])
        if c != 0:
            terms.append(GaussTerm(c, r[i], geom.k, r[j], -geom.k, geom.sigma, label=f"{i}{j}"))
    return TwoParticleState(tuple(terms), geom).normalize()


def transfer_law(geom: ScatterGeometry, i: int, j: int) -> float:
    """Carrier of A after scattering for the packet pair (i, j)."""
    return geom.k_bar + _delta(geom, i, j)


def _delta(geom: ScatterGeometry, i: int, j: int) -> float:
    table = {(1, 3): 0.0, (2, 4): 0.0, (1, 4): -geom.kappa, (2, 3): geom.kappa}
    if (i, j) not in table:
        raise ValueError(f"pair ({i}, {j}) is not one of {PAIRS}")
    return table[(i, j)]


def _check_product_form(state: TwoParticleState) -> dict:
    coeff = {}
    for t in state.terms:
        if t.transfer is not None:
            raise NotProductForm("state has already been scattered")
        if len(t.label) != 2 or (int(t.label[0]), int(t.label[1])) not in PAIRS:
            raise NotProductForm(f"term label {t.label!r} is not a packet pair")
        coeff[(int(t.label[0]), int(t.label[1]))] = t.c
    c = np.array([[coeff.get((i, j), 0j) for j in (3, 4)] for i in (1, 2)])
    if abs(c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0]) > 1e-12 * max(np.max(np.abs(c)) ** 2, 1e-300):
        raise NotProductForm("coefficients do not factorize")
    return coeff


def scatter_zeno(state: TwoParticleState, exact_wkb: bool = False) -> TwoParticleState:
    """Instantaneous small-momentum scattering without displacement.

    Pair (i, j) is multiplied by exp(i delta (r - r')) and both carriers are
    shifted by the mean transfer k0 = k_bar - k.  Evaluated at the packet
    centres this gives the coefficient factor exp(i delta (rA - rB)), which
    is exp(-2 i kappa d) for (1,4) and (2,3).  By default the residual linear
    phase across each packet is dropped, so all A packets carry k_bar and
    all B packets -k_bar.  With ``exact_wkb`` the residual is kept as the
    carrier shift k_bar + delta.
    """
    geom = state.geometry
    if geom is None:
        raise NotProductForm("state has no scattering geometry")
    _check_product_form(state)
    out = []
    for t in state.terms:
        i, j = int(t.label[0]), int(t.label[1])
        delta = _delta(geom, i, j)
        shift = geom.k0 + (delta if exact_wkb else 0.0)
        out.append(
            replace(
                t,
                c=t.c * np.exp(1j * delta * (t.rA - t.rB)),
                kA=t.kA + shift,
                kB=t.kB - shift,
                transfer=geom.k0 + delta,
            )
        )
    return TwoParticleState(tuple(out), geom, state.t).normalize()


def spread_width(sigma: float, t: float, mass: float) -> float:
    """Free-Gaussian density std after time t."""
    return sigma * math.sqrt(1 + (t / (2 * mass * sigma * sigma)) ** 2)


def displace(state: TwoParticleState, t: float) -> TwoParticleState:
    """Move each term's packets by the velocity its transfer imparted.

    A moves by +q t / m_A and B by -q t / m_B, where q is the term's
    transfer; widths follow the free-Gaussian law for the total elapsed
    time.
    """
    if t == 0:
        return state
    geom = state.geometry
    total = state.t + t
    sa = spread_width(geom.sigma, total, geom.mass_a)
    sb = spread_width(geom.sigma, total, geom.mass_b)
    out = []
    for term in state.terms:
        q = term.transfer or 0.0
        out.append(
            replace(
                term,
                rA=term.rA + q * t / geom.mass_a,
                rB=term.rB - q * t / geom.mass_b,
                sigma=sa,
                sigma_b=sb,
            )
        )
    return TwoParticleState(tuple(out), geom, total).normalize()


# Schmidt analysis


def discretize(state: TwoParticleState, grid: GridSpec) -> np.ndarray:
    """M[i, j] = psi(x_i, x'_j) normalized so that sum |M|^2 dx^2 = 1."""
    for t in state.terms:
        for c, s in ((t.rA, t.sigma), (t.rB, t.width_b)):
            if c - 4 * s < grid.x_min or c + 4 * s > grid.x_max:
                raise SupportOutOfDomain(f"packet at {c} (sigma {s}) leaves the grid")
    x = grid.x
    m = state(x, x)
    nrm = math.sqrt(float(np.sum(np.abs(m) ** 2)) * grid.dx**2)
    return m / nrm


def _grid_std(f: np.ndarray, grid: GridSpec) -> float:
    rho = np.abs(f) ** 2
    rho = rho / rho.sum()
    x = grid.x
    mean = float(rho @ x)
    return math.sqrt(float(rho @ (x - mean) ** 2))


def _is_normal(m: np.ndarray, tol: float = 1e-9) -> bool:
    scale = max(float(np.max(np.abs(m))), 1e-300) ** 2
    return float(np.max(np.abs(m @ m.conj().T - m.conj().T @ m))) <= tol * scale


def _normal_factors(m: np.ndarray):
    """Schmidt factors of a normal square matrix from its eigenvectors.

    m = W diag(lam) W^H gives components u_n = W[:, n] and
    v_n = (lam_n / |lam_n|) conj(W[:, n]) with weight |lam_n|^2.  This fixes
    the basis of degenerate weights to the one respecting the exchange
    symmetry of the two factors.
    """
    if np.allclose(m, m.conj().T, atol=1e-12 * max(np.max(np.abs(m)), 1e-300)):
        lam, w = np.linalg.eigh((m + m.conj().T) / 2)
        lam = lam.astype(complex)
    else:
        lam, w = np.linalg.eig(m)
        w, _ = np.linalg.qr(w)
        lam = np.einsum("in,ij,jn->n", w.conj(), m, w)
    order = np.argsort(-np.abs(lam), kind="stable")
    lam, w = lam[order], w[:, order]
    mag = np.abs(lam)
    ph = np.where(mag > 0, lam / np.where(mag > 0, mag, 1), 1)
    return w, mag, (w.conj() * ph).T


def _svd_factors(m: np.ndarray):
    """u, s, vh with a degenerate leading pair resolved via ``_normal_factors``."""
    u, s, vh = np.linalg.svd(m)
    degenerate = s.size > 1 and s[0] > 0 and (s[0] ** 2 - s[1] ** 2) < DEGENERACY_TOL * s[0] ** 2
    if not degenerate:
        return u, s, vh, False
    rank = int(np.sum(s > 1e-10 * s[0]))
    uk, vk = u[:, :rank], vh[:rank].conj().T
    # exchange symmetry needs the left and right supports to coincide up to conjugation
    if np.linalg.norm(uk @ (uk.conj().T @ vk) - vk) > 1e-8 * math.sqrt(rank):
        return u, s, vh, True
    small = uk.conj().T @ m @ uk
    if not _is_normal(small):
        return u, s, vh, True
    w, mag, vh_small = _normal_factors(small)
    u2 = u.copy()
    vh2 = vh.copy()
    s2 = s.copy()
    u2[:, :rank] = uk @ w
    vh2[:rank] = vh_small @ uk.conj().T
    s2[:rank] = mag
    return u2, s2, vh2, True


def schmidt_numeric(m: np.ndarray, grid: GridSpec) -> SchmidtDecomposition:
    """Schmidt decomposition of a discretized two-particle wavefunction.

    Uses the singular value decomposition of M dx.  Factors are orthonormal
    under sum |f|^2 dx.  If the two leading weights coincide, the basis
    within that degenerate pair is fixed by exchange symmetry when the
    state allows it, and ``degenerate`` is set either way.
    """
    dx = grid.dx
    u, s, vh, degenerate = _svd_factors(np.asarray(m) * dx)
    weights = s**2
    weights = weights / weights.sum()
    left = u.T / math.sqrt(dx)
    right = vh / math.sqrt(dx)
    keep = max(1, int(np.sum(weights > 1e-14)))
    return SchmidtDecomposition(
        weights=weights,
        widths_left=np.array([_grid_std(f, grid) for f in left[:keep]]),
        widths_right=np.array([_grid_std(f, grid) for f in right[:keep]]),
        left_fns=left,
        right_fns=right,
        grid=grid,
        degenerate=degenerate,
    )


def _hermitian_sqrt(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, v = np.linalg.eigh((g + g.conj().T) / 2)
    if lam.min() <= 1e-14 * lam.max():
        raise np.linalg.LinAlgError("packets are linearly dependent")
    root = (v * np.sqrt(lam)) @ v.conj().T
    inv = (v / np.sqrt(lam)) @ v.conj().T
    return root, inv


def _coefficient_matrix(state: TwoParticleState):
    left, right = [], []
    for t in state.terms:
        if t.packet_a not in left:
            left.append(t.packet_a)
        if t.packet_b not in right:
            right.append(t.packet_b)
    c = np.zeros((len(left), len(right)), dtype=complex)
    for t in state.terms:
        c[left.index(t.packet_a), right.index(t.packet_b)] += t.c
    return c, left, right


def schmidt_gram(state: TwoParticleState, grid: GridSpec | None = None) -> SchmidtDecomposition:
    """Exact Schmidt decomposition of a sum of Gaussian product terms.

    With a, b the distinct A and B packets, C the coefficient matrix and
    R_A, R_B the Hermitian square roots of their Gram matrices, the
    decomposition follows from the SVD of R_A C R_B^T in the orthonormal
    bases a R_A^-1 and b R_B^-1.
    """
    c, left, right = _coefficient_matrix(state)
    ra, ra_inv = _hermitian_sqrt(gram(left))
    rb, rb_inv = _hermitian_sqrt(gram(right))
    core = ra @ c @ rb.T
    core /= np.linalg.norm(core)
    if core.shape[0] == core.shape[1]:
        u, s, vh, degenerate = _svd_factors(core)
    else:
        u, s, vh = np.linalg.svd(core)
        degenerate = s.size > 1 and (s[0] ** 2 - s[1] ** 2) < DEGENERACY_TOL
    weights = s**2
    weights = weights / weights.sum()
    lc = (ra_inv @ u).T
    rc = (rb_inv @ vh.T).T
    out = SchmidtDecomposition(
        weights=weights,
        widths_left=np.array([packet_std(v, left) for v in lc[: weights.size]]),
        widths_right=np.array([packet_std(v, right) for v in rc[: weights.size]]),
        left_coeffs=lc[: weights.size],
        right_coeffs=rc[: weights.size],
        left_basis=left,
        right_basis=right,
        degenerate=bool(degenerate),
    )
    if grid is not None:
        x = grid.x
        pa = np.array([packet(x, *p) for p in left])
        pb = np.array([packet(x, *p) for p in right])
        out.left_fns = out.left_coeffs @ pa
        out.right_fns = out.right_coeffs @ pb
        out.grid = grid
    return out


def schmidt_analytic_2x2(state: TwoParticleState, grid: GridSpec | None = None) -> SchmidtDecomposition:
    """Schmidt pairs of a state built on at most two packets per particle."""
    c, left, right = _coefficient_matrix(state)
    if len(left) > 2 or len(right) > 2:
        raise NotTwoByTwo(f"state uses {len(left)} x {len(right)} distinct packets")
    return schmidt_gram(state, grid)


# basis identity and lensing


def ld_state(K: float, k: float, kappa: float, gamma: float = 0.5, sigma: float = 1.0, x0: float = 0.0):
    """sqrt(1-gamma) phi_K psi_k + sqrt(gamma) phi_{K-kappa} psi_{k+kappa} at x0."""
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    terms = (
        GaussTerm(math.sqrt(1 - gamma), x0, K, x0, k, sigma, label="kk"),
        GaussTerm(math.sqrt(gamma), x0, K - kappa, x0, k + kappa, sigma, label="scattered"),
    )
    return TwoParticleState(terms)


def ld_basis_check(state: TwoParticleState, grid: GridSpec | None = None) -> float:
    """L2 distance between a two-term scattered state and (LL' + DD') / (2 sqrt 2).

    With a = phi_{K-kappa}, b = phi_K, c = psi_{k+kappa}, d = psi_k the
    localizing states are L = a + b, L' = c + d and the delocalizing ones
    D = a - b, D' = c - d; (LL' + DD') / 2 = ac + bd.
    """
    plain, scattered = state.terms
    K, k = plain.kA, plain.kB
    kappa = K - scattered.kA
    if not math.isclose(scattered.kB - k, kappa, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError("the two terms do not exchange a common momentum")
    x0, s = plain.rA, plain.sigma
    if grid is None:
        grid = GridSpec(512, 12 * s / 511, x0 - 6 * s)
    x = grid.x
    a, b = packet(x, x0, K - kappa, s), packet(x, x0, K, s)
    c, d = packet(x, plain.rB, k + kappa, plain.width_b), packet(x, plain.rB, k, plain.width_b)
    ld = (np.outer(a + b, c + d) + np.outer(a - b, c - d)) / (2 * math.sqrt(2))
    diff = state(x, x) - ld
    return float(math.sqrt(np.sum(np.abs(diff) ** 2)) * grid.dx)


@dataclass
class LensingReport:
    t_i: float
    state: TwoParticleState
    schmidt: SchmidtDecomposition
    initial_width_a: float
    initial_width_b: float
    displacement_a: float
    displacement_b: float
    focusing: bool

    @property
    def narrowed(self) -> bool:
        """Both factors of the two leading components are narrower than initially."""
        return bool(
            np.all(self.schmidt.widths_left[:2] < self.initial_width_a)
            and np.all(self.schmidt.widths_right[:2] < self.initial_width_b)
        )


def lensing_analysis(geom: ScatterGeometry, grid: GridSpec | None = None):
    """State and Schmidt structure where the extreme-transfer trajectories cross.

    The trajectories of pairs (2,3) and (1,4) of the lighter particle meet
    after t_I = d m / |kappa|.  For repulsion (kappa > 0) they converge and
    this is a true crossing; for attraction they diverge and t_I is the
    mirror time, flagged by ``focusing = False``.
    """
    if geom.kappa == 0:
        raise NoIntersection("equal transfers give parallel trajectories")
    m_light = min(geom.mass_a, geom.mass_b)
    t_i = geom.d * m_light / abs(geom.kappa)
    ini = build_initial(geom, 1.0)
    a0 = [(geom.centers[1], geom.k, geom.sigma), (geom.centers[2], geom.k, geom.sigma)]
    b0 = [(geom.centers[3], -geom.k, geom.sigma), (geom.centers[4], -geom.k, geom.sigma)]
    final = displace(scatter_zeno(ini, exact_wkb=True), t_i)
    schmidt = schmidt_gram(final, grid)
    return t_i, LensingReport(
        t_i=t_i,
        state=final,
        schmidt=schmidt,
        initial_width_a=packet_std(np.ones(2), a0),
        initial_width_b=packet_std(np.ones(2), b0),
        displacement_a=geom.kappa * t_i / geom.mass_a,
        displacement_b=geom.kappa * t_i / geom.mass_b,
        focusing=geom.kappa > 0,
    )
