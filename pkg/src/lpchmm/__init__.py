"""LPC-cepstrum front end and discrete hidden Markov model phoneme recognizer."""

__version__ = "0.1.0"

from .config import RunConfig, load_config
from .errors import LpcHmmError
from .hmm import (
    ForwardLattice,
    HmmModel,
    backward,
    baum_welch,
    evaluate_direct,
    forward,
    joint_probability,
    log_likelihoods,
    posterior_decode,
    sample,
    state_sequence_probability,
    viterbi,
)
from .lpc import (
    LpcConfig,
    LpcModel,
    analyze_clip,
    autocorrelate,
    levinson_durbin,
    lpc_spectrum_db,
    lpc_to_cepstrum,
)
from .modelfile import load_bank, save_bank
from .quantizer import Codebook, quantize, train_codebook
from .recognizer import ClassifierBank, ClassificationResult, classify, evaluate, train_bank
from .signal_io import AudioClip, FramingConfig, Window, frame_signal, hamming_window, load_wav, write_wav
