"""affectmap: convert word-emotion ratings between representation formats.

Core pieces: lexicon parsing and alignment, four mapping models behind
one fit/predict contract, the evaluation protocols (cross-validated
comparison, ablation, cross-lingual transfer, reliability normalization
and comparison), and lexicon generation. See the README for the CLI.
"""

__version__ = "0.1.0"

from . import _kernels
from ._kernels import active_backend, set_backend, use_backend
from .errors import (
    AffectMapError,
    ConfigurationError,
    ContractError,
    DegenerateInputError,
    DivergenceError,
    EmptyAlignmentError,
    EmptyOutputError,
    ParseError,
    ValidationError,
)
from .lexicon import (
    BE5,
    BUILTIN_FORMATS,
    VA,
    VAD,
    AlignedLexicon,
    Diagnostic,
    EmotionFormat,
    Lexicon,
    align,
    canonical_word,
    concat,
    parse_lexicon,
    project,
    rescale,
)
from .models import (
    BoostedEnsemble,
    FfnnConfig,
    FfnnModel,
    KnnModel,
    LinearModel,
    ffnn_backward,
    ffnn_forward,
    ffnn_loss,
    fit_boosted,
    fit_knn,
    fit_linear,
    gradient_check,
    init_ffnn,
    load_model,
    predict_boosted,
    predict_knn,
    predict_linear,
    read_feature_vectors,
    save_model,
    train_ffnn,
    train_ffnn_arrays,
)
from .stats import (
    RaterMatrix,
    ReliabilityRecord,
    format_stars,
    normalize_shr,
    paired_t_test,
    pearson,
    read_reliability_records,
    sba_adjust,
    split_half_reliability,
    write_reliability_records,
)
from .experiments import (
    AblationReport,
    EvalReport,
    FoldSplit,
    ModelSpec,
    compare_to_shr,
    cross_validate,
    derive_seed,
    directions_for,
    make_folds,
    run_ablation,
    run_crosslingual,
    run_monolingual,
    write_report_json,
    write_report_table,
)
from .lexgen import (
    LexiconBuildJob,
    build_lexicon,
    format_rating,
    render_lexicon,
    write_lexicon,
)
from .manifest import Manifest, load_manifest
