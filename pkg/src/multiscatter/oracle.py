"""Brute-force reference calculations.

Nothing here calls the scattering or effective-dynamics code. The full
simulator works on the tensor-product space of all emitter levels (multiple
excitations included) with first-principles RWA terms; the single-photon
solver integrates the real-space scattering ansatz of a 1D waveguide. Only
the core model types and the medium Green tensors are shared.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidSpec, NoSteadyState, TooLarge
from .media import Waveguide1D
from .model import SystemSpec, build_manifolds, excited_hamiltonian

MAX_DIMENSION = 4096
STEADY_RESIDUAL = 1e-10
ZERO_DRIVE_LADDER = (1e-2, 1e-3, 1e-4)


# --------------------------------------------------------------------------
# full tensor-product space

class FullStateSpace:
    """All product states of the emitters' levels, ground labels first."""

    def __init__(self, spec: SystemSpec):
        self.spec = spec
        self.local = [em.ground_labels + em.excited_labels for em in spec.emitters]
        self.dims = [len(x) for x in self.local]
        self.dim = int(np.prod(self.dims))
        if self.dim > MAX_DIMENSION:
            raise TooLarge(f"full state space has dimension {self.dim} > {MAX_DIMENSION}")

    def index(self, labels) -> int:
        idx = 0
        for j, lab in enumerate(labels):
            idx = idx * self.dims[j] + self.local[j].index(lab)
        return idx

    def sigma(self, j, upper, lower) -> np.ndarray:
        """|upper><lower| acting on emitter j."""
        mats = [np.eye(d) for d in self.dims]
        op = np.zeros((self.dims[j], self.dims[j]))
        op[self.local[j].index(upper), self.local[j].index(lower)] = 1.0
        mats[j] = op
        out = np.ones((1, 1))
        for m in mats:
            out = np.kron(out, m)
        return out

    def ground_indices(self) -> list:
        """Full-space indices of the collective ground states, in M_g order."""
        combos = itertools.product(*(em.ground_labels for em in self.spec.emitters))
        return [self.index(c) for c in combos]

    def excitation_number(self) -> np.ndarray:
        n = np.zeros(self.dim)
        for j, em in enumerate(self.spec.emitters):
            for lab in em.excited_labels:
                n += np.real(np.diag(self.sigma(j, lab, lab)))
        return n


def _transitions(spec):
    """Flat list of (emitter index, transition)."""
    return [(j, tr) for j, em in enumerate(spec.emitters) for tr in em.transitions]


def _drive_amplitudes(spec, field, trans):
    """d . E+ at each emitter for every transition, summed over channels."""
    amps = np.zeros(len(trans), dtype=complex)
    for ch, env in field.envelopes.items():
        env = np.asarray(env, dtype=complex)
        for i, (j, tr) in enumerate(trans):
            if ch in tr.couplings:
                amps[i] += spec.medium.project(ch, tr.dipole(ch)) @ env[j]
    return amps


def _waveguide_couplings(spec, member, channel, trans):
    p = np.array(member.polarization)
    return np.array([
        spec.medium.project(channel, tr.dipole(channel)) @ p if channel in tr.couplings else 0.0
        for _, tr in trans
    ], dtype=complex)


@dataclass
class FullModel:
    space: FullStateSpace
    hamiltonian: np.ndarray
    jumps: list
    outputs: dict  # channel -> (lowering operator whose mean is the emitted amplitude, incident)

    @property
    def effective(self) -> np.ndarray:
        h = self.hamiltonian.astype(complex)
        for lop in self.jumps:
            h = h - 0.5j * lop.conj().T @ lop
        return h

    def rhs(self, rho, heff=None):
        heff = self.effective if heff is None else heff
        out = -1j * (heff @ rho - rho @ heff.conj().T)
        for lop in self.jumps:
            out += lop @ rho @ lop.conj().T
        return out

    def liouvillian(self) -> np.ndarray:
        """Column-stacked superoperator: vec(A X B) = (B^T kron A) vec(X)."""
        n = self.space.dim
        eye = np.eye(n)
        heff = self.effective
        sup = -1j * (np.kron(eye, heff) - np.kron(heff.conj(), eye))
        for lop in self.jumps:
            sup += np.kron(lop.conj(), lop)
        return sup


def build_full_model(spec: SystemSpec, field) -> FullModel:
    """RWA model in the frame rotating at the drive frequency."""
    space = FullStateSpace(spec)
    omega = field.frequency
    positions = spec.positions
    trans = _transitions(spec)
    dim = space.dim

    h = np.zeros((dim, dim), dtype=complex)
    for j, em in enumerate(spec.emitters):
        for lab in em.ground_labels:
            h += em.energy(lab) * space.sigma(j, lab, lab)
        for lab in em.excited_labels:
            h += (em.energy(lab) - omega) * space.sigma(j, lab, lab)

    lower = [space.sigma(j, tr.ground, tr.excited) for j, tr in trans]
    amps = _drive_amplitudes(spec, field, trans)
    for a, s in zip(amps, lower):
        if a != 0:
            h -= a * s.conj().T + np.conj(a) * s

    jumps, outputs = [], {}
    for member in spec.medium.members():
        if isinstance(member, Waveguide1D):
            k = member.wavenumber(0.0)
            for ch in member.channels:
                s_dir = member.direction(ch)
                a = _waveguide_couplings(spec, member, ch, trans)
                if not np.any(a):
                    continue
                x = np.array([positions[j, 0] for j, _ in trans])
                lop = sum(np.conj(a[i]) * np.exp(-1j * s_dir * k * x[i]) * lower[i] for i in range(len(trans)))
                jumps.append(lop)
                outputs[ch] = lop
                # coherent exchange that makes the two-channel dynamics causal
                for i, (ji, _) in enumerate(trans):
                    for m, (jm, _) in enumerate(trans):
                        if ji == jm or a[i] == 0 or a[m] == 0:
                            continue
                        dx = s_dir * (x[i] - x[m])
                        coupling = -0.5j * a[i] * np.conj(a[m]) * np.exp(1j * k * dx) * np.sign(dx)
                        h += coupling * lower[i].conj().T @ lower[m]
            continue
        for ch in member.channel_ids:
            dip = [spec.medium.project(ch, tr.dipole(ch)) if ch in tr.couplings else np.zeros(3) for _, tr in trans]
            n_t = len(trans)
            mat = np.zeros((n_t, n_t), dtype=complex)
            for i, (ji, _) in enumerate(trans):
                for m, (jm, _) in enumerate(trans):
                    tens = member.channel_tensor(ch, positions[ji], positions[jm], 0.0, same_emitter=(ji == jm))
                    mat[i, m] = dip[i] @ tens @ np.conj(dip[m])
            kos = (mat - mat.conj().T) / 1j
            kos = 0.5 * (kos + kos.conj().T)
            shift = 0.5 * (mat + mat.conj().T)
            for i, (ji, _) in enumerate(trans):
                for m, (jm, _) in enumerate(trans):
                    if ji != jm and shift[i, m] != 0:
                        h -= shift[i, m] * lower[i].conj().T @ lower[m]
            vals, vecs = np.linalg.eigh(kos)
            for lam, vec in zip(vals, vecs.T):
                if lam > 1e-14:
                    jumps.append(np.sqrt(lam) * sum(np.conj(vec[i]) * lower[i] for i in range(n_t)))
    h = 0.5 * (h + h.conj().T)
    return FullModel(space, h, jumps, outputs)


@dataclass
class FullTrajectory:
    times: np.ndarray
    states: np.ndarray
    space: FullStateSpace

    def ground_block(self) -> np.ndarray:
        idx = self.space.ground_indices()
        return self.states[:, idx][:, :, idx]

    def excited_population(self) -> np.ndarray:
        n = self.space.excitation_number()
        return np.real(np.einsum("tii,i->t", self.states, n))


def full_lindblad_evolve(spec: SystemSpec, field, rho0, t_span, dt, sample_every=1) -> FullTrajectory:
    """Classical RK4 on the full density matrix.

    ``rho0`` is a full-space density matrix or an int, the M_g index of a
    pure initial ground state.
    """
    model = build_full_model(spec, field)
    space = model.space
    if isinstance(rho0, (int, np.integer)):
        idx = space.ground_indices()[int(rho0)]
        rho0 = np.zeros((space.dim, space.dim), dtype=complex)
        rho0[idx, idx] = 1.0
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (space.dim, space.dim):
        raise InvalidSpec("initial state does not match the full space dimension")
    heff = model.effective
    t0, t1 = float(t_span[0]), float(t_span[1])
    steps = int(round((t1 - t0) / dt))
    times, states = [t0], [rho.copy()]
    for i in range(1, steps + 1):
        k1 = model.rhs(rho, heff)
        k2 = model.rhs(rho + 0.5 * dt * k1, heff)
        k3 = model.rhs(rho + 0.5 * dt * k2, heff)
        k4 = model.rhs(rho + dt * k3, heff)
        rho = rho + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if i % sample_every == 0 or i == steps:
            times.append(t0 + i * dt)
            states.append(rho.copy())
    return FullTrajectory(np.array(times), np.array(states), space)


def steady_state(model: FullModel) -> np.ndarray:
    n = model.space.dim
    sup = model.liouvillian()
    system = sup.copy()
    system[0, :] = np.eye(n).reshape(-1, order="F")
    rhs = np.zeros(n * n, dtype=complex)
    rhs[0] = 1.0
    try:
        vec = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise NoSteadyState(str(exc)) from exc
    residual = np.max(np.abs(sup @ vec))
    if residual > STEADY_RESIDUAL:
        raise NoSteadyState(f"steady-state residual {residual:.3e}")
    rho = vec.reshape(n, n, order="F")
    return 0.5 * (rho + rho.conj().T)


def steady_output_amplitude(spec: SystemSpec, field, channel) -> complex:
    """<E_out> / E_in in a waveguide channel from the exact steady state."""
    model = build_full_model(spec, field)
    rho = steady_state(model)
    incident = field.incident.get(channel, 0.0)
    ref = next((a for a in field.incident.values() if a != 0), 1.0)
    lop = model.outputs.get(channel)
    emitted = 0.0 if lop is None else np.trace(lop @ rho)
    return complex((incident + 1j * emitted) / ref)


def zero_drive_output(spec: SystemSpec, make_field, channel, drives=ZERO_DRIVE_LADDER) -> complex:
    """Steady output ratio extrapolated to zero drive.

    ``make_field(beta)`` returns the input field at incident amplitude beta.
    The ratio is even in beta, so a polynomial in beta^2 through the ladder
    is evaluated at zero.
    """
    x = np.asarray(drives, dtype=float) ** 2
    y = np.array([steady_output_amplitude(spec, make_field(b), channel) for b in drives])
    vander = np.vander(x, len(x))
    coeffs = np.linalg.solve(vander, y)
    return complex(coeffs[-1])


# --------------------------------------------------------------------------
# single photon in a 1D waveguide

def single_excitation_scattering(spec: SystemSpec, omega, ground=0):
    """Exact (r, t) of one photon entering from the left.

    Piecewise-constant right/left envelopes between emitter positions, jump
    conditions at each emitter and the emitter amplitude equations driven by
    the mean of the one-sided fields. Losses into non-waveguide channels
    enter as a non-Hermitian term. Requires the waveguide to couple excited
    states only back to the initial ground configuration.
    """
    members = [m for m in spec.medium.members() if isinstance(m, Waveguide1D)]
    if len(members) != 1:
        raise InvalidSpec("single-photon solver needs exactly one waveguide1d medium")
    wg = members[0]
    r_ch, l_ch = wg.channels
    basis = build_manifolds(spec)
    g0 = basis.ground_states[ground]

    block = [e for e, st in enumerate(basis.excited_states)
             if all(lab == g0[i] for i, lab in enumerate(st) if i != basis.excited_emitter[e])]
    others = [e for e in range(basis.n_excited) if e not in block]
    hce = excited_hamiltonian(spec, basis)
    if others and np.any(hce[np.ix_(block, others)]):
        raise InvalidSpec("H_c,e couples the reachable excited states to other ground configurations")

    p = np.array(wg.polarization)
    amp = {}
    for ch in (r_ch, l_ch):
        dip = basis.dipole_array(ch)
        proj = np.array([[spec.medium.project(ch, d) for d in row] for row in dip])
        a = proj @ p
        leak = np.delete(a[block], ground, axis=1)
        if leak.size and np.any(leak):
            raise InvalidSpec("waveguide couples reachable excited states to another ground configuration")
        amp[ch] = a[block, ground]

    # non-waveguide decay and exchange inside the block
    nb = len(block)
    owner = [basis.excited_emitter[e] for e in block]
    pos = spec.positions
    h_other = hce[np.ix_(block, block)].astype(complex)
    e_g0 = sum(em.energy(lab) for em, lab in zip(spec.emitters, g0))
    if spec.hc_ground is not None:
        e_g0 = spec.hc_ground[ground]
    h_other -= (omega + e_g0) * np.eye(nb)
    for member in spec.medium.members():
        if member is wg:
            continue
        for ch in member.channel_ids:
            dip = basis.dipole_array(ch)[block]
            dip = np.array([[spec.medium.project(ch, d) for d in row] for row in dip])
            for u in range(nb):
                for v in range(nb):
                    tens = member.channel_tensor(ch, pos[owner[u]], pos[owner[v]], 0.0,
                                                 same_emitter=(owner[u] == owner[v]))
                    h_other[u, v] -= sum(dip[u, g] @ tens @ np.conj(dip[v, g]) for g in range(basis.n_ground))

    k = wg.wavenumber(omega)
    xs = np.array([pos[j, 0] for j in owner])
    sites = np.unique(xs)
    n_reg = len(sites) + 1
    # unknowns: f_R[0..P], f_L[0..P], e[0..nb-1]
    n_unk = 2 * n_reg + nb
    fr = lambda i: i
    fl = lambda i: n_reg + i
    em_ = lambda u: 2 * n_reg + u
    mat = np.zeros((n_unk, n_unk), dtype=complex)
    rhs = np.zeros(n_unk, dtype=complex)
    row = 0
    mat[row, fr(0)] = 1.0
    rhs[row] = 1.0
    row += 1
    mat[row, fl(n_reg - 1)] = 1.0
    row += 1
    for s_idx, xs_val in enumerate(sites):
        here = [u for u in range(nb) if xs[u] == xs_val]
        mat[row, fr(s_idx + 1)] = 1.0
        mat[row, fr(s_idx)] = -1.0
        for u in here:
            mat[row, em_(u)] = 1j * np.exp(-1j * k * xs_val) * np.conj(amp[r_ch][u])
        row += 1
        mat[row, fl(s_idx + 1)] = 1.0
        mat[row, fl(s_idx)] = -1.0
        for u in here:
            mat[row, em_(u)] = -1j * np.exp(1j * k * xs_val) * np.conj(amp[l_ch][u])
        row += 1
    for u in range(nb):
        s_idx = int(np.searchsorted(sites, xs[u]))
        mat[row, em_(0):em_(nb)] = h_other[u]
        mat[row, fr(s_idx)] += 0.5 * amp[r_ch][u] * np.exp(1j * k * xs[u])
        mat[row, fr(s_idx + 1)] += 0.5 * amp[r_ch][u] * np.exp(1j * k * xs[u])
        mat[row, fl(s_idx)] += 0.5 * amp[l_ch][u] * np.exp(-1j * k * xs[u])
        mat[row, fl(s_idx + 1)] += 0.5 * amp[l_ch][u] * np.exp(-1j * k * xs[u])
        row += 1
    sol = np.linalg.solve(mat, rhs)
    return complex(sol[fl(0)]), complex(sol[fr(n_reg - 1)])


# --------------------------------------------------------------------------
# mode-sum references for the Green responses

def waveguide_mode_sum(dx, k0=2 * np.pi, direction=1, band=200.0):
    """Normalised response of one chiral channel from its plane-wave spectrum.

    G(dx) = (1/2pi) int dq exp(i q dx) / (q - k0 - i0). The on-shell pole gives
    the dissipative part; the principal value (its Kramers-Kronig partner) is
    integrated numerically: a band around k0 with a Cauchy weight plus the
    oscillatory tails beyond it.
    """
    d = direction * dx
    pole = 0.5j * np.exp(1j * k0 * d)
    if d == 0:
        return pole
    lo, hi = k0 - band, k0 + band
    re = integrate.quad(lambda q: np.cos(q * d), lo, hi, weight="cauchy", wvar=k0, limit=4000)[0]
    im = integrate.quad(lambda q: np.sin(q * d), lo, hi, weight="cauchy", wvar=k0, limit=4000)[0]
    # |q - k0| > band: the two tails combine to 2i exp(i k0 d) int_band^inf sin(u d)/u du
    tail = np.sign(d) * integrate.quad(lambda u: 1.0 / u, band, np.inf, weight="sin", wvar=abs(d))[0]
    pv = re + 1j * im + 2j * np.exp(1j * k0 * d) * tail
    return pole + pv / (2 * np.pi)


def freespace_mode_sum_imag(separation, k0=2 * np.pi, n_theta=96, n_phi=96) -> np.ndarray:
    """Im part of the normalised free-space tensor as a sum over transverse
    plane waves on the sphere: (3 / 16 pi) int (I - kk) exp(i k0 k.R) dOmega."""
    sep = np.asarray(separation, dtype=float)
    ct, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - ct**2)
    kx = np.outer(st, np.cos(phi))
    ky = np.outer(st, np.sin(phi))
    kz = np.outer(ct, np.ones_like(phi))
    khat = np.stack([kx, ky, kz], axis=-1)
    phase = np.exp(1j * k0 * khat @ sep)
    weights = wt[:, None] * (2 * np.pi / n_phi) * phase
    proj = np.eye(3)[None, None] - khat[..., :, None] * khat[..., None, :]
    total = np.einsum("ab,abij->ij", weights, proj)
    return np.real(3.0 / (16.0 * np.pi) * total)
