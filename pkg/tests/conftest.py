import numpy as np
import pytest

from bsc_estim import SystemParams


@pytest.fixture
def ref_params():
    """Reference reader setup used across the studies."""
    return SystemParams(
        n_antennas=20,
        coherence_time=1e-3,
        sample_len=5e-6,
        tx_power=1.0,
        tag_amp_ce=0.78,
        tag_amp_id=0.3162,
        noise_var=1e-20,
        carrier_freq=915e6,
        distance=100.0,
        pathloss_exp=2.5,
    )


def make_params(**overrides):
    base = dict(
        n_antennas=20, coherence_time=1e-3, sample_len=5e-6, tx_power=1.0,
        tag_amp_ce=0.78, tag_amp_id=0.3162, noise_var=1e-20,
        carrier_freq=915e6, distance=100.0, pathloss_exp=2.5,
    )
    base.update(overrides)
    return SystemParams(**base)


def params_at_ce_snr_db(gamma_e_db: float, tau_c: float = 1e-4, **overrides):
    """Reference params with the noise level set to hit a training SNR."""
    p = make_params(**overrides)
    gamma_e = 10.0 ** (gamma_e_db / 10.0)
    noise = p.beta ** 2 * p.tag_amp_ce ** 2 * p.tx_power * tau_c / gamma_e
    return make_params(noise_var=noise, **{k: v for k, v in overrides.items()
                                           if k != "noise_var"})


def random_channel_vector(rng: np.random.Generator, n: int, beta: float = 1.0):
    return np.sqrt(beta / 2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
