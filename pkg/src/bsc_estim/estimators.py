"""Matrix- and vector-level estimators of the backscattered channel.

The pipeline splits in two stages.  Stage one produces a matrix estimate of
the rank-one cascaded channel from the received pilot block: either plain
least squares through the pilot pseudo-inverse, or the linear MMSE solution
when second-order channel statistics are available.  Stage two recovers the
channel vector itself from the matrix estimate by reducing the rank-one
fitting problem to a real symmetric eigenvalue problem of size 2K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import PilotConfig, ReceivedSignal
from .transforms import build_realified, top_eigenpair

LS = "LS"
LMMSE = "LMMSE"

# Top eigenvalue (of the unit-normalized system) below this is treated as an
# all-noise degenerate input rather than divided through.
_DEGENERATE_EIGENVALUE = 1e-30

# Stationarity residual (unit-normalized) above which the reduced solution is
# refined; exact inputs and the K=1 / K=N closed forms sit many orders below.
_REFINE_GRADIENT_TOL = 1e-10


@dataclass(frozen=True)
class MatrixEstimate:
    """Estimate of the N x K cascaded channel, the statistic used downstream."""

    h_hat_matrix: np.ndarray
    flavor: str                  # LS or LMMSE
    pilot_config: PilotConfig


@dataclass(frozen=True)
class VectorEstimate:
    """Recovered channel vector with the eigenvalue and objective behind it.

    ``objective`` is the rank-one fitting error of the matrix estimate at
    ``h_hat``.  ``degenerate`` marks all-noise inputs where no direction
    could be recovered; callers treat those as zero beamforming gain.
    """

    h_hat: np.ndarray
    top_eigenvalue: float
    objective: float
    degenerate: bool = False


@dataclass(frozen=True)
class PriorCovariance:
    """Second-order prior of the vectorized cascaded channel."""

    c_hv: np.ndarray             # (N*K, N*K), Hermitian PSD
    beta: float
    n_antennas: int
    pilot_count: int


def _pilot_energy(pilot_scaled: np.ndarray) -> float:
    """Per-pilot energy E0 read off the scaled pilot Gram: S0 @ S0^H = E0 I."""
    k = pilot_scaled.shape[0]
    return float(np.linalg.norm(pilot_scaled) ** 2) / k


def ls_matrix(rx: ReceivedSignal, cfg: PilotConfig) -> MatrixEstimate:
    """Least-squares matrix estimate Y @ S0^H / E0.

    For orthogonal pilots this is the pseudo-inverse solution; in the
    noiseless limit it reproduces the cascaded channel exactly.
    """
    s0 = rx.pilot_scaled
    if rx.y.shape[1] != s0.shape[0] or s0.shape[0] != cfg.pilot_count:
        raise ValueError(
            f"received block {rx.y.shape} inconsistent with pilot_count={cfg.pilot_count}"
        )
    e0 = _pilot_energy(s0)
    if e0 <= 0:
        raise ValueError("pilot energy is zero; cannot invert the pilot block")
    h_hat = rx.y @ s0.conj().T / e0
    return MatrixEstimate(h_hat_matrix=h_hat, flavor=LS, pilot_config=cfg)


def prior_covariance(beta: float, n_antennas: int, pilot_count: int) -> PriorCovariance:
    """Covariance of vec(H_K) for Rayleigh h via the Gaussian fourth moment.

    With h_v element (i, j) equal to h_i * h_j, the entry indexed by row
    pair (i, j) and column pair (k, l) is beta**2 * (d_ik d_jl + d_il d_jk),
    i.e. beta**2 times identity plus the head-block transposition operator.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    n, k = n_antennas, pilot_count
    if not 1 <= k <= n:
        raise ValueError(f"pilot_count={k} out of range for n_antennas={n}")
    dim = n * k
    c = np.eye(dim)
    # Transposition term d_il d_jk: pairs (i, j) <-> (j, i), needs i < K.
    for j in range(k):
        for i in range(k):
            c[j * n + i, i * n + j] += 1.0
    return PriorCovariance(c_hv=beta ** 2 * c, beta=beta,
                           n_antennas=n, pilot_count=k)


def lmmse_gain(pilot_scaled: np.ndarray, prior: PriorCovariance,
               noise_var: float) -> np.ndarray:
    """Linear MMSE gain W with vec(H_hat) = W @ vec(Y).

    Solves the NK x NK regularized system C S^H (S C S^H + N0 I)^{-1} through
    a Hermitian eigendecomposition.  The Gram matrix is floored at N0, its
    exact lower bound, so the prior's null directions stay harmless even when
    N0 is many orders below the signal scale.
    """
    if noise_var <= 0:
        raise ValueError(f"noise_var must be positive, got {noise_var}")
    n, k = prior.n_antennas, prior.pilot_count
    s0 = np.asarray(pilot_scaled, dtype=complex)
    if s0.shape != (k, k):
        raise ValueError(f"pilot matrix shape {s0.shape} does not match K={k}")
    s_v = np.kron(s0.T, np.eye(n))
    c_sh = prior.c_hv @ s_v.conj().T
    gram = s_v @ c_sh + noise_var * np.eye(n * k)
    w_eig, u = np.linalg.eigh(gram)
    # The Gram is >= noise_var * I exactly; eigenvalues reported below that
    # (or below rounding noise of the dominant scale) are numerical zeros of
    # the prior's null space, whose numerators cancel, so cap their inverse.
    floor = max(noise_var, 16.0 * np.finfo(float).eps * float(w_eig[-1]))
    w_eig = np.maximum(w_eig, floor)
    return (c_sh @ u) @ (u.conj().T / w_eig[:, None])


def lmmse_matrix(rx: ReceivedSignal, cfg: PilotConfig, prior: PriorCovariance,
                 noise_var: float, gain: np.ndarray | None = None) -> MatrixEstimate:
    """Linear MMSE matrix estimate from the vectorized received block.

    ``gain`` accepts a precomputed :func:`lmmse_gain` so that Monte Carlo
    loops factor the system once per configuration.
    """
    n, k = prior.n_antennas, prior.pilot_count
    if rx.y.shape != (n, k) or cfg.pilot_count != k:
        raise ValueError(
            f"received block {rx.y.shape} inconsistent with prior ({n}, {k})"
        )
    if gain is None:
        gain = lmmse_gain(rx.pilot_scaled, prior, noise_var)
    y_v = rx.y.ravel(order="F")
    h_v = gain @ y_v
    return MatrixEstimate(h_hat_matrix=h_v.reshape((n, k), order="F"),
                          flavor=LMMSE, pilot_config=cfg)


def _rank_one_objective(h_hat_matrix: np.ndarray, h: np.ndarray, k: int) -> float:
    return float(np.linalg.norm(h_hat_matrix - np.outer(h, h[:k])) ** 2)


def _objective_gradient(h_hat_matrix: np.ndarray, h: np.ndarray, k: int) -> np.ndarray:
    """Conjugate (Wirtinger) gradient of the rank-one fitting error."""
    r = np.outer(h, h[:k]) - h_hat_matrix
    g = r @ h[:k].conj()
    g[:k] += r.T @ h.conj()
    return g


def _refine(h_hat_matrix: np.ndarray, h0: np.ndarray, k: int,
            max_iter: int = 60) -> np.ndarray:
    """Descend the fitting error from h0 to the nearby stationary point.

    Used only for noisy inputs with 1 < K < N, where the eigenvalue
    reduction satisfies the head and tail conditions separately but not
    their coupling.  Damped Newton from the reduction's output stays within
    its basin, so the polished point keeps the reduction's global character;
    the cost never increases.  The fit is quadratic in h, so the exact
    Hessian is the Gauss-Newton matrix plus the realified symmetrized
    residual, and convergence is quadratic even for large-residual inputs.
    """
    n = h_hat_matrix.shape[0]
    h = h0.copy()
    r = np.outer(h, h[:k]) - h_hat_matrix
    cost = float(np.linalg.norm(r) ** 2)
    scale = max(cost, float(np.linalg.norm(h_hat_matrix) ** 2), 1e-300)
    lam = 1e-4
    eye = np.eye(2 * n)
    eye_head = np.zeros(n)
    eye_head[:k] = 1.0
    for _ in range(max_iter):
        g_c = _objective_gradient(h_hat_matrix, h, k)
        grad = np.concatenate([g_c.real, g_c.imag])
        if np.linalg.norm(grad) <= 1e-13 * scale ** 0.75:
            break
        # Gauss-Newton block in closed form: ||h_K||^2 I + ||h||^2 on the
        # head diagonal + rank-two coupling of h with its masked head.
        m_k = h * eye_head
        b = (np.linalg.norm(h[:k]) ** 2) * np.eye(n) \
            + np.diag(np.linalg.norm(h) ** 2 * eye_head) \
            + np.outer(h, m_k.conj()) + np.outer(m_k, h.conj())
        gauss = np.block([[b.real, -b.imag], [b.imag, b.real]])
        # exact Hessian adds the realified symmetrized residual
        r_emb = np.zeros((n, n), dtype=complex)
        r_emb[:, :k] = r
        a = r_emb.conj() + r_emb.conj().T
        hess = gauss + np.block([[a.real, -a.imag], [-a.imag, -a.real]])
        ridge = float(np.trace(gauss)) / (2.0 * n) + 1e-300
        stepped = False
        for _ in range(40):
            try:
                dx = np.linalg.solve(hess + lam * ridge * eye, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            h_new = h + dx[:n] + 1j * dx[n:]
            r_new = np.outer(h_new, h_new[:k]) - h_hat_matrix
            cost_new = float(np.linalg.norm(r_new) ** 2)
            if cost_new <= cost:
                improved = cost - cost_new
                h, r, cost = h_new, r_new, cost_new
                lam = max(lam / 3.0, 1e-12)
                stepped = improved > 1e-16 * scale or np.linalg.norm(dx) > 1e-12
                break
            lam *= 4.0
        else:
            break
        if not stepped:
            break
    return h


def _head_from_reduction(h_hat_matrix: np.ndarray, k: int) -> tuple[np.ndarray, float]:
    """Leading K entries and top eigenvalue via the 2K x 2K eigenproblem."""
    rs = build_realified(h_hat_matrix, k)
    lam, v = top_eigenpair(rs.z_a)
    if lam <= _DEGENERATE_EIGENVALUE:
        return np.zeros(k, dtype=complex), lam
    head = np.sqrt(lam / 2.0) * (v[:k] + 1j * v[k:])
    return head, lam


def _reduction_candidates(h_hat_matrix: np.ndarray, k: int):
    """Candidate vectors from every positive eigenpair, principal first.

    Each positive eigenvalue of the realified head block seeds one candidate
    (head scaled by sqrt(lambda / 2), tail filled from the linear map).  The
    principal pair is the usual choice, but under heavy noise a sibling pair
    occasionally sits in the better fitting basin, so callers keep the
    best-objective candidate after refinement.
    """
    n = h_hat_matrix.shape[0]
    rs = build_realified(h_hat_matrix, k)
    w, v = np.linalg.eigh(rs.z_a)
    out = []
    for i in range(2 * k - 1, -1, -1):
        lam = float(w[i])
        if lam <= _DEGENERATE_EIGENVALUE:
            break
        vec = v[:, i] / np.linalg.norm(v[:, i])
        head = np.sqrt(lam / 2.0) * (vec[:k] + 1j * vec[k:])
        h = np.zeros(n, dtype=complex)
        h[:k] = head
        if k < n:
            h[k:] = h_hat_matrix[k:, :] @ head.conj() / (lam / 2.0)
        out.append((lam, h))
    return out


def _head_single_pilot(h_hat_matrix: np.ndarray) -> tuple[np.ndarray, float]:
    """Closed-form K=1 head: the principal square root of the (1,1) entry.

    Algebraically identical to the 2x2 eigenpath; written out to avoid the
    eigensolver for the most common low-power configuration.
    """
    top = complex(h_hat_matrix[0, 0])
    mag = abs(top)
    if mag <= _DEGENERATE_EIGENVALUE:
        return np.zeros(1, dtype=complex), 2.0 * mag
    denom = mag + top.real
    if denom <= 0:
        head = 1j * np.sqrt(mag)
    else:
        head = np.sqrt(denom / 2.0) + 1j * top.imag / np.sqrt(2.0 * denom)
    return np.array([head]), 2.0 * mag


def _canonical_sign(h: np.ndarray) -> np.ndarray:
    """Fix the global sign: first significant entry gets Re >= 0, ties Im >= 0.

    Purely cosmetic; every downstream metric is invariant under h -> -h.
    """
    norm = np.linalg.norm(h)
    if norm == 0:
        return h
    for x in h:
        if abs(x) > 1e-12 * norm:
            if x.real < 0 or (x.real == 0 and x.imag < 0):
                return -h
            return h
    return h


# Refine every candidate when the positive spectrum is this small (covers
# the exhaustively-tested array sizes); larger problems refine the principal
# pair plus the two best unrefined fits.
_REFINE_ALL_LIMIT = 4


def vector_estimate(est: MatrixEstimate) -> VectorEstimate:
    """Recover the channel vector from a matrix estimate.

    The leading K entries come from the top eigenpair of the realified head
    block, scaled by sqrt(lambda / 2); the remaining entries follow from the
    tail rows against the conjugated head, with ||h_K||**2 evaluated as
    lambda / 2.  The '+' sign branch is taken and then canonicalized.

    For 1 < K < N on noisy input the reduced solution is not exactly
    stationary (the head eigenproblem and the tail fill-in decouple a
    coupled system), so it is descended to the nearby stationary point of
    the fitting error; sibling eigenpairs are tried as well because the
    principal pair occasionally sits in a worse basin under heavy noise,
    and the lowest-objective candidate wins.  The K = 1 and K = N paths
    are already exactly stationary and globally optimal.

    All-noise inputs with a vanishing top eigenvalue yield a flagged zero
    estimate instead of a division by zero.
    """
    m = np.asarray(est.h_hat_matrix, dtype=complex)
    n, k = m.shape
    scale = float(np.linalg.norm(m))
    if not np.isfinite(scale):
        raise ValueError("matrix estimate contains non-finite entries")
    if scale == 0.0:
        return VectorEstimate(h_hat=np.zeros(n, dtype=complex), top_eigenvalue=0.0,
                              objective=0.0, degenerate=True)

    mn = m / scale
    if k == 1:
        head, lam = _head_single_pilot(mn)
        candidates = [(lam, None)]
    else:
        candidates = _reduction_candidates(mn, k)
        if candidates:
            lam = candidates[0][0]
            head = candidates[0][1][:k]
        else:
            lam = 0.0
    if lam <= _DEGENERATE_EIGENVALUE:
        return VectorEstimate(h_hat=np.zeros(n, dtype=complex),
                              top_eigenvalue=lam * scale,
                              objective=_rank_one_objective(m, np.zeros(n, complex), k),
                              degenerate=True)

    if k == 1:
        h = np.zeros(n, dtype=complex)
        h[:1] = head
        if n > 1:
            h[1:] = mn[1:, :] @ head.conj() / (lam / 2.0)
    else:
        h = candidates[0][1]
        if k < n:
            grad = _objective_gradient(mn, h, k)
            if np.linalg.norm(grad) > _REFINE_GRADIENT_TOL:
                scored = [(_rank_one_objective(mn, cand, k), i)
                          for i, (_, cand) in enumerate(candidates)]
                if len(candidates) <= _REFINE_ALL_LIMIT:
                    chosen = range(len(candidates))
                else:
                    keep = {0}
                    keep.update(i for _, i in sorted(scored)[:2])
                    chosen = sorted(keep)
                best = None
                for i in chosen:
                    refined = _refine(mn, candidates[i][1], k)
                    obj = _rank_one_objective(mn, refined, k)
                    if best is None or obj < best[0]:
                        best = (obj, refined)
                h = best[1]

    h = _canonical_sign(h) * np.sqrt(scale)
    return VectorEstimate(h_hat=h, top_eigenvalue=lam * scale,
                          objective=_rank_one_objective(m, h, k))


def mrt_precoder(v: VectorEstimate) -> np.ndarray:
    """Transmit beamformer conj(h_hat) / ||h_hat||; unit norm."""
    norm = np.linalg.norm(v.h_hat)
    if v.degenerate or norm == 0:
        raise ValueError("cannot beamform from a degenerate zero estimate")
    return v.h_hat.conj() / norm


def mrc_combiner(v: VectorEstimate) -> np.ndarray:
    """Receive combiner h_hat / ||h_hat||; unit norm."""
    norm = np.linalg.norm(v.h_hat)
    if v.degenerate or norm == 0:
        raise ValueError("cannot combine from a degenerate zero estimate")
    return v.h_hat / norm
