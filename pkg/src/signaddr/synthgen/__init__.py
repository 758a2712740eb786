"""Seeded synthetic dataset generators."""
from .augment import (
    AUGMENT_OPS,
    augment_tagged_address,
    generate_parsing_dataset,
)
from .corpus import (
    TOY_SYMBOLS,
    TOY_VOCAB,
    AddressCorpus,
    TaggedAddress,
    join_tokens,
    synthesize_corpus,
    synthesize_tagged_addresses,
    toy_tagged_addresses,
)
from .corrupt import (
    CorrectionPair,
    edit_budget,
    generate_correction_dataset,
    inject_errors,
    levenshtein,
    split_units,
)
from .manifests import (
    read_conll,
    read_correction_manifest,
    read_ocr_manifest,
    write_conll,
    write_correction_manifest,
    write_ocr_manifest,
)
from .render import (
    LINE_HEIGHT,
    MAX_WIDTH,
    RenderStyle,
    TextLineSample,
    fit_to_canvas,
    generate_ocr_dataset,
    load_image,
    render_natural,
    render_text_line,
    save_image,
)
