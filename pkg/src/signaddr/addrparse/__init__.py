"""Address parsing as token classification."""
from ..tags import DEFAULT_SCHEME, EntitySpan, TagScheme, extract_spans, repair, spans_to_tags, tokenize_address
from .models import (
    ARCHITECTURES,
    AddressParser,
    ParserConfig,
    Seq2SeqTagger,
    TagCodec,
    TransformerTagger,
    WordVocab,
    build_parser,
    load_pretrained_encoder,
)
from .train import (
    ParserTrainResult,
    entity_metrics,
    evaluate_parser,
    load_parser,
    parse_address,
    parser_loss,
    parser_report,
    save_parser,
    train_parser,
    write_parser_report,
)
