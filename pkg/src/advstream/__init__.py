"""Streaming algorithms that survive oblivious streams but not adaptive ones.

Modules:
    core_game     streaming and accuracy games, transcripts, flip number
    bsm_prg       bounded-storage PRG and its real/ideal experiments
    sada, sada2   the two streaming problems, exact evaluators, sampling algorithms
    crypto_box    toy bit encryption and the oracle game
    reductions    mechanisms that answer queries through a streaming algorithm
    attacks       adaptive analysts and the membership-probe attack
    experiments   trial functions for the batch runner
    runner, cli   spec files, result files and the command line
"""

from .core_game import GameReport, StatQuery, Transcript, flip_number, run_accuracy_game, run_streaming_game
from .crypto_box import EncryptionScheme
from .sada import ObliviousSada, SadaParams, SadaTruthEvaluator
from .sada2 import ObliviousSada2, Sada2Params, Sada2TruthEvaluator

__all__ = [
    "EncryptionScheme",
    "GameReport",
    "ObliviousSada",
    "ObliviousSada2",
    "Sada2Params",
    "Sada2TruthEvaluator",
    "SadaParams",
    "SadaTruthEvaluator",
    "StatQuery",
    "Transcript",
    "flip_number",
    "run_accuracy_game",
    "run_streaming_game",
]
