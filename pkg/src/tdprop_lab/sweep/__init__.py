from .search import (
    RANGE_TABLES,
    RECORD_COLUMNS,
    SampledConfig,
    SweepRecord,
    SweepSpec,
    analyze_records,
    dominated_kinds,
    normalize_returns,
    read_records_csv,
    run_sweep,
    sample_configs,
    validate_spec_fields,
    write_records_csv,
    write_summary_json,
)
from .stats import (
    BootstrapCI,
    OlsResult,
    WelchResult,
    betainc_regularized,
    bootstrap_ci,
    ols_regression,
    p_annotation,
    top_percentile,
    welch_t_test,
)
