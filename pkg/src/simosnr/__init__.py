"""Instantaneous SNR estimation over time-varying flat-fading SIMO channels."""

from .channel import (ChannelTrace, FadingConfig, SimoObservation, doppler_to_velocity, generate_fading,
                      project_onto_polynomials,
                      transmit, true_instantaneous_snr)
from .crlb import CrlbResult, crlb_da, crlb_via_fim
from .da import (DaSnrEstimate, Moments, NoncentralFParams, analytic_moments, estimate_da, f_params,
                 noncentral_f_cdf, unbias)
from .em import EmConfig, EmState, NdaSnrEstimate, PosteriorTable, e_step, init_arbitrary, init_hybrid, m_step, run_em
from .errors import *  # noqa: F401,F403
from .harness import ExperimentConfig, NmseCurve, ks_noncentral_f, nmse, run_sweep, table1_config
from .poly_basis import TimeMatrix, partition, time_matrix
from .signal_model import (Constellation, PilotLayout, SymbolFrame, build_constellation, draw_symbols, hard_detect,
                           parse_constellation, pilot_layout)

__version__ = "0.1.0"
