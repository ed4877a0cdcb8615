"""Simulator and inference toolkit for multiplicative edit accretion.

Articles accrete edits in proportion to the edits they already have;
fixed-age populations are therefore lognormal with log-moments linear in
age. The package simulates that mechanism, cleans and aggregates edit
logs, fits and tests the per-slice lognormals, integrates the age
mixture, and compares labeled article populations on age-normalized
scores.
"""

from .compare import (
    AgeTable,
    ArticleLabeling,
    GroupStats,
    NormalizedScore,
    discount_frontpage,
    group_stats,
    normalize,
)
from .engine import (
    ArticleSeries,
    CorpusSpec,
    ProcessParams,
    simulate_article,
    simulate_corpus,
    step_article,
    theoretical_moments,
)
from .errors import (
    ConfigError,
    CorruptInputError,
    DataError,
    DegenerateCorpusError,
    DegenerateFitError,
    DomainError,
    EditGrowthError,
    FormatError,
    InsufficientDataError,
    InsufficientTailError,
    LabelingError,
    NoSlicesError,
    NormalizationError,
    NumericalError,
)
from .fitstats import (
    Slice,
    SliceFit,
    TrendFit,
    estimate_autocorr,
    fit_all,
    fit_slice,
    fit_trend,
    gof_test,
    make_slices,
)
from .ingest import (
    ArticleRollup,
    CleaningReport,
    EditRecord,
    clean,
    filter_pages,
    filter_robots,
    parse_log,
    rollup,
    synthesize_records,
    write_log,
)
from .mixture import (
    FitComparison,
    MixtureSpec,
    compare_fits,
    discrete_mixture_pdf,
    lognormal_pdf,
    mixture_log_pdf,
    mixture_pdf,
    tail_exponent,
)

__version__ = "0.1.0"
