"""Optical inter-satellite link budget, rate/energy weights and outage model.

Received power for a laser ISL:

    P_R = P_T * eta_S * G_T * G_R * L_PL * L_PS

with transmitter gain G_T = 16/Theta_T^2, receiver gain G_R = (D_R*pi/lambda)^2,
pointing loss L_PL = exp(-G0*theta0^2) where G0 = 4*ln2/theta_3dB^2, and
free-space path loss L_PS = (lambda/(4*pi*d))^2. The achievable rate is the
Shannon rate over the optical system bandwidth B = bandwidth_fraction * f_c,
against noise sigma^2 = k_b*B*(T_s + T_0 + T_CMB).

Random beam misalignment makes L_PL a random variable on (0, 1); an outage
occurs when the instantaneous SNR drops below the receiver threshold, i.e.
when L_PL falls below

    Gamma0 = sigma^2 * SNR_th / (P_T * eta_S * G_T * G_R * L_PS).

With pointing-error magnitude theta0 = sigma_p*|Z|, Z standard normal, the
pointing loss has CDF 1 - erf(sqrt(-ln x / (2*G0*sigma_p^2))) and density

    f(x) = sqrt(c/pi) * x^(c-1) / sqrt(-ln x),   c = 1/(2*G0*sigma_p^2),

which integrates to 1 over (0, 1) (both endpoints are integrable
singularities when c < 1).
"""
import math
from dataclasses import dataclass

import numpy as np

from .constants import BOLTZMANN_J_PER_K, SPEED_OF_LIGHT_M_S


@dataclass(frozen=True)
class LinkParams:
    """Transceiver constants; defaults follow the simulated optical system."""

    eta_s: float = 0.8              # optical efficiency of the transceiver
    theta_t_rad: float = 0.1        # full transmit divergence angle
    d_r_m: float = 0.006            # receiver telescope diameter
    theta_0_rad: float = 0.01       # nominal pointing error
    theta_3db_rad: float = 0.1      # 3-dB beamwidth
    f_c_hz: float = 193e12          # laser carrier frequency
    bandwidth_fraction: float = 0.02
    t_solar_k: float = 6000.0
    t_system_k: float = 1000.0
    t_cmb_k: float = 2.725
    k_b: float = BOLTZMANN_J_PER_K
    sigma_p_rad: float = 0.05       # pointing-error scale parameter
    snr_th_db: float = -110.0       # outage SNR threshold
    payload_bits: float = 1e6       # bits transferred per node per slot
    frames_per_slot: int = 25

    def __post_init__(self):
        positive = {
            "eta_s": self.eta_s, "theta_t_rad": self.theta_t_rad,
            "d_r_m": self.d_r_m, "theta_3db_rad": self.theta_3db_rad,
            "f_c_hz": self.f_c_hz, "bandwidth_fraction": self.bandwidth_fraction,
            "k_b": self.k_b, "sigma_p_rad": self.sigma_p_rad,
            "payload_bits": self.payload_bits,
        }
        for name, val in positive.items():
            if val <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.eta_s > 1:
            raise ValueError("eta_s must lie in (0, 1]")
        if self.theta_0_rad < 0:
            raise ValueError("theta_0_rad must be >= 0")
        if min(self.t_solar_k, self.t_system_k, self.t_cmb_k) < 0:
            raise ValueError("temperatures must be >= 0")
        if self.frames_per_slot < 1:
            raise ValueError("frames_per_slot must be >= 1")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_M_S / self.f_c_hz

    @property
    def bandwidth_hz(self) -> float:
        return self.bandwidth_fraction * self.f_c_hz

    @property
    def g0(self) -> float:
        """Beamwidth coefficient 4*ln2/theta_3dB^2 of the pointing loss."""
        return 4.0 * math.log(2.0) / self.theta_3db_rad ** 2

    @property
    def g_t(self) -> float:
        return 16.0 / self.theta_t_rad ** 2

    @property
    def g_r(self) -> float:
        return (self.d_r_m * math.pi / self.wavelength_m) ** 2

    @property
    def snr_th_linear(self) -> float:
        return 10.0 ** (self.snr_th_db / 10.0)


@dataclass(frozen=True)
class LinkMetrics:
    distance_km: float
    rx_power_w: float
    snr_linear: float
    rate_bps: float
    energy_j: float
    outage_prob: float


@dataclass(frozen=True)
class GammaApprox:
    alpha: float
    beta: float


def free_space_loss(d_m, wavelength_m: float):
    """(lambda / (4*pi*d))^2; accepts scalar or array distance in metres."""
    return (wavelength_m / (4.0 * math.pi * d_m)) ** 2


def pointing_loss(theta_rad, params: LinkParams):
    return np.exp(-params.g0 * np.asarray(theta_rad, dtype=float) ** 2)


def received_power(p_t_w, d_km, params: LinkParams):
    """Received optical power in W; broadcasts over power and range."""
    p_t = np.asarray(p_t_w, dtype=float)
    if np.any(p_t <= 0):
        raise ValueError("p_t_w must be > 0")
    d_m = np.asarray(d_km, dtype=float) * 1e3
    if np.any(d_m <= 0):
        raise ValueError("distance must be > 0 (path loss is singular at 0)")
    l_pl = math.exp(-params.g0 * params.theta_0_rad ** 2)
    out = (p_t * params.eta_s * params.g_t * params.g_r * l_pl
           * free_space_loss(d_m, params.wavelength_m))
    return float(out) if np.isscalar(d_km) and np.isscalar(p_t_w) else out


def noise_power(params: LinkParams) -> float:
    """Thermal noise sigma^2 = k_b * B * (T_s + T_0 + T_CMB) in W."""
    return params.k_b * params.bandwidth_hz * (
        params.t_solar_k + params.t_system_k + params.t_cmb_k)


def achievable_rate(p_r_w, sigma2_w: float, params: LinkParams):
    """Shannon rate B*log2(1 + P_R/sigma^2) in bit/s."""
    if sigma2_w <= 0:
        raise ValueError("sigma2_w must be > 0")
    return params.bandwidth_hz * np.log2(1.0 + np.asarray(p_r_w, dtype=float) / sigma2_w)


def frame_energy(p_t_w, rate_bps, params: LinkParams):
    """Energy to ship one frame's share of the payload: s*P_T/(U*rate), J.

    A non-positive rate yields +inf, the infeasible-edge signal; graph
    builders drop non-finite weights.
    """
    rate = np.asarray(rate_bps, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(rate > 0,
                       params.payload_bits * np.asarray(p_t_w, dtype=float)
                       / (params.frames_per_slot * rate),
                       np.inf)
    return float(out) if np.isscalar(rate_bps) and np.isscalar(p_t_w) else out


def _power_exponent(params: LinkParams) -> float:
    # c = 1/(2*G0*sigma_p^2): exponent of the pointing-loss power-law CDF.
    return 1.0 / (2.0 * params.g0 * params.sigma_p_rad ** 2)


def pointing_loss_pdf(theta, params: LinkParams):
    """Density of the random pointing loss at theta in (0, 1)."""
    x = np.asarray(theta, dtype=float)
    if np.any(x <= 0.0) or np.any(x >= 1.0):
        raise ValueError("pointing loss density is defined on (0, 1)")
    c = _power_exponent(params)
    out = math.sqrt(c / math.pi) * x ** (c - 1.0) / np.sqrt(-np.log(x))
    return float(out) if np.isscalar(theta) else out


def gamma0(p_t_w, d_km, params: LinkParams):
    """Outage threshold on the pointing loss for a given link."""
    d_m = np.asarray(d_km, dtype=float) * 1e3
    denom = (np.asarray(p_t_w, dtype=float) * params.eta_s * params.g_t
             * params.g_r * free_space_loss(d_m, params.wavelength_m))
    out = noise_power(params) * params.snr_th_linear / denom
    return float(out) if np.isscalar(d_km) and np.isscalar(p_t_w) else out


_erf = np.vectorize(math.erf, otypes=[float])


def outage_from_gamma0(g0_val, params: LinkParams):
    """P{L_PL < Gamma0} = 1 - erf(sqrt(-ln Gamma0/(2*G0*sigma_p^2))), clamped
    to 1 for Gamma0 >= 1 and 0 for Gamma0 <= 0."""
    g = np.asarray(g0_val, dtype=float)
    scale = 2.0 * params.g0 * params.sigma_p_rad ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.sqrt(np.maximum(-np.log(g), 0.0) / scale)
    out = np.where(g >= 1.0, 1.0, np.where(g <= 0.0, 0.0, 1.0 - _erf(arg)))
    return float(out) if np.isscalar(g0_val) else out


def outage_probability(p_t_w, d_km, params: LinkParams):
    """Outage probability of the link (p_t_w, d_km)."""
    if np.any(np.asarray(p_t_w) <= 0):
        raise ValueError("p_t_w must be > 0")
    return outage_from_gamma0(gamma0(p_t_w, d_km, params), params)


def sample_pointing_loss(params: LinkParams, rng: np.random.Generator, size=None):
    """Draw instantaneous pointing losses; theta0 = sigma_p*|Z|, Z ~ N(0,1)."""
    z = rng.standard_normal(size)
    return np.exp(-params.g0 * (params.sigma_p_rad * z) ** 2)


def link_metrics(p_t_w: float, d_km: float, params: LinkParams) -> LinkMetrics:
    """Full per-edge budget evaluation for one transmit power and range."""
    p_r = received_power(p_t_w, d_km, params)
    sigma2 = noise_power(params)
    rate = achievable_rate(p_r, sigma2, params)
    return LinkMetrics(
        distance_km=float(d_km),
        rx_power_w=float(p_r),
        snr_linear=float(p_r / sigma2),
        rate_bps=float(rate),
        energy_j=float(frame_energy(p_t_w, rate, params)),
        outage_prob=float(outage_probability(p_t_w, d_km, params)),
    )


def gsl_gamma_approx(m: float, b0: float, omega: float) -> GammaApprox:
    """Moment-matched Gamma approximation of shadowed-Rician ground-link
    fading power: alpha = m(2b0+omega)^2 / (4mb0^2+4mb0*omega+omega^2),
    beta = (4mb0^2+4mb0*omega+omega^2) / (m(2b0+omega))."""
    if m <= 0 or b0 <= 0 or omega < 0:
        raise ValueError("require m > 0, b0 > 0, omega >= 0")
    q = 4.0 * m * b0 ** 2 + 4.0 * m * b0 * omega + omega ** 2
    s = m * (2.0 * b0 + omega)
    return GammaApprox(alpha=s * (2.0 * b0 + omega) / q, beta=q / s)
