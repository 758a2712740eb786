"""Text-line recognition: CTC math, CTC and attention models, WRA."""
from .alphabet import Alphabet
from .ctc import (
    beam_decode,
    collapse,
    ctc_log_probability,
    ctc_loss,
    ctc_probability,
    greedy_decode,
    min_frames,
)
from .models import (
    AttentionRecognizer,
    CTCRecognizer,
    RecognizerConfig,
    RecognizerModel,
    build_recognizer,
)
from .train import (
    evaluate_recognizer,
    load_pretrained_backbone,
    load_recognizer,
    predict_texts,
    save_recognizer,
    train_recognizer,
    word_recognition_accuracy,
)

ctc_greedy_decode = greedy_decode
ctc_beam_decode = beam_decode
