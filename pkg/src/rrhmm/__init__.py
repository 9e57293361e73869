"""Spectral learning and inference for reduced-rank hidden Markov models."""

from .estimator import KernelRRHMM, SpectralRRHMM
from .hmm import (RrHmmParams, example1, example2, example3, exact_filter,
                  exact_joint_prob, factorize_transition, load_model, polygon_hmm,
                  random_rrhmm, sample_sequence, sample_triples,
                  stationary_distribution, validate)
from .inference import (BeliefState, cond_prob, filter_sequence, filter_update, init_belief,
                        predict_t_ahead, predictive, seq_prob, simulate)
from .moments import (EventSpace, MomentEstimates, estimate_moments,
                      estimate_moments_stacked, population_moments,
                      population_moments_stacked)
from .spectral import ObservableModel, learn, select_rank, similarity_check

__version__ = "0.1.0"
