"""Clustered mmWave channels for RIS-aided downlinks.

Long-term parameters (positions, path loss, cluster central angles, blockage
probabilities) are realized once per scenario by :func:`realize_scenario`.
Small-scale fading, subpath angles and blockage masks are redrawn on every
call to :func:`sample_channel`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig

# Half-widths of the sector around the geometric direction from which cluster
# central angles are drawn.
AZIMUTH_SECTOR = math.pi / 4
ZENITH_SECTOR = math.pi / 12

# Stream identifiers for the seed hierarchy [seed, stream, ...].
SCENARIO_STREAM = 0
TRAIN_STREAM = 1
EVAL_STREAM = 2
CSI_ERROR_STREAM = 3


@dataclass(frozen=True)
class ArrayGeometry:
    rows: int
    cols: int
    element_spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array dimensions must be positive")
        if not self.element_spacing_wavelengths > 0:
            raise ValueError("element spacing must be positive")

    @property
    def size(self):
        return self.rows * self.cols

    @classmethod
    def square(cls, n_elements, rows=None, spacing=0.5):
        """UPA with the most square factorization of ``n_elements``."""
        if rows is None:
            rows = max(r for r in range(1, math.isqrt(n_elements) + 1) if n_elements % r == 0)
        if n_elements % rows:
            raise ValueError(f"{rows} rows do not divide {n_elements} elements")
        return cls(rows, n_elements // rows, spacing)


def steering_vector(geometry, azimuth, elevation):
    """UPA response ``exp(j 2 pi s (r sin(el) cos(az) + c sin(el) sin(az)))``.

    Elements are ordered row-major with zero-based ``(r, c)``. ``azimuth`` and
    ``elevation`` may be arrays of equal shape, in which case the result has
    one trailing axis of length ``rows * cols``.
    """
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    r, c = np.divmod(np.arange(geometry.size), geometry.cols)
    sin_el = np.sin(elevation)[..., None]
    phase = r * (sin_el * np.cos(azimuth)[..., None]) + c * (sin_el * np.sin(azimuth)[..., None])
    return np.exp(2j * np.pi * geometry.element_spacing_wavelengths * phase)


def pathloss_db(fc_ghz, distance_m, alpha, shadow_sigma_db, rng):
    """3GPP UMi street-canyon style path loss with log-normal shadowing."""
    if fc_ghz <= 0:
        raise ValueError("fc_ghz must be positive")
    if distance_m < 1:
        raise ValueError(f"distance {distance_m} m is below the 1 m model domain")
    shadow = rng.normal(0.0, shadow_sigma_db) if shadow_sigma_db > 0 else 0.0
    return 32.4 + 20.0 * math.log10(fc_ghz) + 10.0 * alpha * math.log10(distance_m) + shadow


@dataclass(frozen=True)
class BlockageModel:
    a_out: float = 0.0
    b_out: float = 0.0
    p_block: float | None = None

    def __post_init__(self):
        if self.p_block is not None and not 0.0 <= self.p_block <= 1.0:
            raise ValueError("p_block must lie in [0, 1]")


def blockage_probability(model, distance_m):
    if model.p_block is not None:
        return float(model.p_block)
    p = 1.0 - math.exp(-model.a_out * distance_m + model.b_out)
    return min(1.0, max(0.0, p))


def power_fractions(kappa, n_clusters):
    """Power fractions ``(zeta_0, zeta_l)`` of the LoS path and of each NLoS cluster.

    ``kappa = inf`` means LoS only. A single-cluster link puts all NLoS power
    into that cluster.
    """
    if math.isinf(kappa):
        return 1.0, 0.0
    zeta_0 = kappa / (1.0 + kappa)
    spread = max(n_clusters - 1, 1)
    return zeta_0, 1.0 / (spread * (1.0 + kappa))


@dataclass(frozen=True)
class ClusterGeometry:
    """Long-term description of one link.

    ``aoa_*`` entries are only used by BS-RIS matrix links. Cluster arrays hold
    central angles; subpath angles are Gaussian around them with std
    ``spread``.
    """

    los_az: float
    los_el: float
    cluster_az: np.ndarray
    cluster_el: np.ndarray
    n_subpaths: int
    kappa: float
    distance: float
    pathloss_db: float
    spread: float
    los_aoa_az: float = 0.0
    los_aoa_el: float = math.pi / 2
    cluster_aoa_az: np.ndarray | None = None
    cluster_aoa_el: np.ndarray | None = None

    @property
    def n_clusters(self):
        return len(self.cluster_az)

    @property
    def gain(self):
        return 10.0 ** (-self.pathloss_db / 10.0)

    @property
    def zeta(self):
        return power_fractions(self.kappa, self.n_clusters)

    @property
    def los_only(self):
        return math.isinf(self.kappa)


@dataclass(frozen=True)
class ChannelSample:
    """One realization of every link plus the per-user equivalent channels."""

    h_b: np.ndarray  # (K, N), blockage-masked
    h_r: np.ndarray  # (U, K, M)
    H: np.ndarray  # (U, M, N)
    G: np.ndarray  # (K, U*M + 1, N)
    blockage_mask: np.ndarray  # (K, L + 1), 1 = unblocked


@dataclass(frozen=True)
class Scenario:
    """Realized long-term state of a deployment; draws channel samples."""

    config: ScenarioConfig
    bs_array: ArrayGeometry
    ris_array: ArrayGeometry
    direct: tuple  # K ClusterGeometry
    bs_ris: tuple  # U ClusterGeometry
    ris_user: tuple  # U tuples of K ClusterGeometry
    p_block: np.ndarray  # (K,)
    user_positions: np.ndarray  # (K, 2) polar (radius, angle)

    @property
    def n_users(self):
        return self.config.n_users

    @property
    def n_tx(self):
        return self.config.n_tx

    @property
    def n_reflect(self):
        return self.config.n_reflect

    @property
    def p_max(self):
        return self.config.p_max

    @property
    def gamma(self):
        return np.full(self.n_users, self.config.gamma)

    @property
    def noise_power(self):
        return np.full(self.n_users, self.config.noise_power)

    def draw(self, rng):
        """Equivalent channels ``G`` of one fresh sample, shape ``(K, UM+1, N)``."""
        return sample_channel(self, rng).G

    def draw_many(self, rng, n):
        return np.stack([self.draw(rng) for _ in range(n)])

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _cartesian(radius, angle):
    return np.array([radius * math.cos(angle), radius * math.sin(angle)])


def _direction(src, dst):
    delta = dst - src
    return math.atan2(delta[1], delta[0]), float(np.hypot(*delta))


def _cluster_link(rng, config, az, kappa, distance, alpha, shadow_db, aoa_az=None):
    n = config.n_clusters

    def centres(base):
        return (
            base + rng.uniform(-AZIMUTH_SECTOR, AZIMUTH_SECTOR, n),
            math.pi / 2 + rng.uniform(-ZENITH_SECTOR, ZENITH_SECTOR, n),
        )

    cluster_az, cluster_el = centres(az)
    extra = {}
    if aoa_az is not None:
        c_az, c_el = centres(aoa_az)
        extra = dict(los_aoa_az=aoa_az, cluster_aoa_az=c_az, cluster_aoa_el=c_el)
    pl = pathloss_db(config.fc_ghz, max(distance, 1.0), alpha, shadow_db, rng)
    return ClusterGeometry(
        los_az=az,
        los_el=math.pi / 2,
        cluster_az=cluster_az,
        cluster_el=cluster_el,
        n_subpaths=config.n_subpaths,
        kappa=kappa,
        distance=distance,
        pathloss_db=pl,
        spread=config.angular_spread,
        **extra,
    )


def realize_scenario(config, seed=0):
    """Draw the long-term parameters of ``config``.

    User placement and direct links come from one substream and each RIS from
    its own, so scenarios differing only in the RIS count or size share the
    same users and direct links.
    """
    base = np.random.SeedSequence([seed, SCENARIO_STREAM])
    user_rng = np.random.default_rng(base.spawn(1)[0])
    bs = np.zeros(2)
    bs_array = ArrayGeometry.square(config.n_tx, config.bs_rows)
    ris_array = ArrayGeometry.square(config.elems_per_ris, config.ris_rows)
    blockage = BlockageModel(config.a_out, config.b_out, config.p_block)

    K = config.n_users
    radii = user_rng.uniform(*config.user_radius, K)
    angles = user_rng.uniform(*config.user_angle, K)
    users = [_cartesian(r, a) for r, a in zip(radii, angles)]

    direct = []
    for user in users:
        az, dist = _direction(bs, user)
        direct.append(
            _cluster_link(
                user_rng, config, az, config.kappa_direct, dist, config.alpha_nlos, config.shadow_nlos_db
            )
        )
    p_block = np.array([blockage_probability(blockage, r) for r in radii])

    bs_ris, ris_user = [], []
    ris_seeds = np.random.SeedSequence([seed, SCENARIO_STREAM, 1]).spawn(len(config.ris_radius))
    for u in range(config.n_ris):
        ris_rng = np.random.default_rng(ris_seeds[u])
        pos = _cartesian(config.ris_radius[u], config.ris_angle[u])
        aod, dist = _direction(bs, pos)
        aoa, _ = _direction(pos, bs)
        bs_ris.append(
            _cluster_link(
                ris_rng, config, aod, config.kappa_ris, dist, config.alpha_los, config.shadow_los_db, aoa_az=aoa
            )
        )
        per_user = []
        for user in users:
            az, dist = _direction(pos, user)
            per_user.append(
                _cluster_link(ris_rng, config, az, config.kappa_ris, dist, config.alpha_los, config.shadow_los_db)
            )
        ris_user.append(tuple(per_user))

    return Scenario(
        config=config,
        bs_array=bs_array,
        ris_array=ris_array,
        direct=tuple(direct),
        bs_ris=tuple(bs_ris),
        ris_user=tuple(ris_user),
        p_block=p_block,
        user_positions=np.column_stack([radii, angles]),
    )


def _cn(rng, variance, size=None):
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def _subpath_angles(rng, link, az, el):
    shape = (link.n_clusters, link.n_subpaths)
    return (
        az[:, None] + link.spread * rng.standard_normal(shape),
        el[:, None] + link.spread * rng.standard_normal(shape),
    )


def sample_vector_link(link, geometry, rng, mask=None):
    """Multi-cluster vector channel; ``mask`` (length L+1) zeroes blocked paths."""
    zeta_0, zeta_l = link.zeta
    if mask is None:
        mask = np.ones(link.n_clusters + 1)
    g0 = _cn(rng, zeta_0 * link.gain)
    h = mask[0] * g0 * steering_vector(geometry, link.los_az, link.los_el)
    if zeta_l > 0:
        az, el = _subpath_angles(rng, link, link.cluster_az, link.cluster_el)
        g = _cn(rng, zeta_l * link.gain, az.shape)
        paths = steering_vector(geometry, az, el)  # (L, I, size)
        clusters = np.einsum("li,lin->ln", g, paths)
        h = h + np.sqrt(1.0 / (link.n_subpaths * link.n_clusters)) * (mask[1:] @ clusters)
    return h


def sample_matrix_link(link, rx_geometry, tx_geometry, rng):
    """BS-to-RIS channel ``H`` of shape ``(M, N)``."""
    zeta_0, zeta_l = link.zeta
    g0 = _cn(rng, zeta_0 * link.gain)
    a_rx = steering_vector(rx_geometry, link.los_aoa_az, link.los_aoa_el)
    a_tx = steering_vector(tx_geometry, link.los_az, link.los_el)
    H = g0 * np.outer(a_rx, a_tx.conj())
    if zeta_l > 0:
        az, el = _subpath_angles(rng, link, link.cluster_az, link.cluster_el)
        raz, rel = _subpath_angles(rng, link, link.cluster_aoa_az, link.cluster_aoa_el)
        g = _cn(rng, zeta_l * link.gain, az.shape)
        tx = steering_vector(tx_geometry, az, el).reshape(-1, tx_geometry.size)
        rx = steering_vector(rx_geometry, raz, rel).reshape(-1, rx_geometry.size)
        scatter = (rx * g.reshape(-1, 1)).T @ tx.conj()
        H = H + np.sqrt(1.0 / (link.n_subpaths * link.n_clusters)) * scatter
    return H


def assemble_equivalent(h_b, h_r, H):
    """Equivalent channel ``[diag(h^H) H_stack; h_b^H]`` of one user.

    ``h_r`` is a sequence of U RIS-to-user vectors (length M each) and ``H`` a
    sequence of U matrices ``(M, N)``; both may be empty.
    """
    h_b = np.asarray(h_b)
    N = h_b.shape[-1]
    h_r = [np.asarray(v).reshape(-1) for v in h_r]
    H = [np.asarray(m).reshape(-1, N) if np.ndim(m) < 2 else np.asarray(m) for m in H]
    if len(h_r) != len(H):
        raise ValueError("need one RIS-user vector per BS-RIS matrix")
    for v, m in zip(h_r, H):
        if m.shape != (v.size, N):
            raise ValueError(f"BS-RIS matrix {m.shape} does not match RIS size {v.size} and N={N}")
    if H:
        stacked_h = np.concatenate(h_r)
        stacked_H = np.concatenate(H, axis=0)
        reflected = stacked_h.conj()[:, None] * stacked_H
    else:
        reflected = np.zeros((0, N), dtype=complex)
    return np.vstack([reflected, h_b.conj()[None, :]])


def sample_channel(scenario, rng):
    """Draw all links of ``scenario``; direct and RIS links use separate substreams."""
    seeds = rng.integers(0, 2**63, size=2)
    direct_rng = np.random.default_rng(seeds[0])
    ris_rng = np.random.default_rng(seeds[1])
    K, N = scenario.n_users, scenario.n_tx
    M, U = scenario.ris_array.size, len(scenario.bs_ris)

    masks = np.empty((K, scenario.config.n_clusters + 1))
    h_b = np.empty((K, N), dtype=complex)
    for k, link in enumerate(scenario.direct):
        masks[k] = direct_rng.random(link.n_clusters + 1) >= scenario.p_block[k]
        h_b[k] = sample_vector_link(link, scenario.bs_array, direct_rng, masks[k])

    H = np.empty((U, M, N), dtype=complex)
    h_r = np.empty((U, K, M), dtype=complex)
    for u in range(U):
        H[u] = sample_matrix_link(scenario.bs_ris[u], scenario.ris_array, scenario.bs_array, ris_rng)
        for k in range(K):
            h_r[u, k] = sample_vector_link(scenario.ris_user[u][k], scenario.ris_array, ris_rng)

    G = np.stack([assemble_equivalent(h_b[k], h_r[:, k], H) for k in range(K)])
    return ChannelSample(h_b=h_b, h_r=h_r, H=H, G=G, blockage_mask=masks)


def stream_rng(seed, stream):
    """Independent generator for one of the training/evaluation streams."""
    return np.random.default_rng([seed, stream])


def init_rng(seed):
    """Generator for randomized initialization, separate from the channel streams."""
    return np.random.default_rng([seed, TRAIN_STREAM, 1])
