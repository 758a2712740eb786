"""Transformer post-correction of recognized address text."""
from .model import NOMINAL_WARMUP_STEPS, CorrectorConfig, CorrectorModel, build_corrector, correct
from .tokenizer import END, PAD, SPECIAL_TOKENS, START, UNK, Tokenizer
from .train import (
    CorrectorTrainResult,
    corrector_loss,
    evaluate_corrector,
    load_corrector,
    save_corrector,
    train_corrector,
    word_level_accuracy,
)
