"""Prompt constructions, normalization, and execution-accuracy
evaluation for text-to-SQL experiments on Spider-style datasets."""

from .evaluate import (
    EvalOutcome,
    ExecutionResult,
    accuracy,
    execute_sql,
    execution_accuracy,
    mcnemar_test,
)
from .gateway import (
    CompletionRequest,
    CompletionResponse,
    LlmGateway,
    ReplayCache,
    fingerprint_request,
    stitch_sql,
)
from .normalize import normalize_ddl, normalize_sql, template_key
from .prompts import (
    ContentFormat,
    ContentStyle,
    DatabaseContext,
    NormalizationMode,
    PromptSpec,
    PromptText,
    SchemaFormat,
    Setting,
    assemble_prompt,
    database_prompt,
    load_database_context,
    serialize_content,
    serialize_schema,
)
from .runner import (
    ExperimentConfig,
    RunReport,
    emit_report,
    load_dataset,
    run_experiment,
    run_matrix,
)
from .sampling import (
    DemonstrationGroup,
    DemonstrationSet,
    Example,
    derive_seed,
    filter_demo_databases,
    sample_cross_domain,
    sample_single_domain,
)
from .schema import (
    ColumnDef,
    ContentSample,
    DatabaseSchema,
    ForeignKeyDef,
    TableSchema,
    introspect_schema,
    sample_content,
    sample_distinct_values,
    sample_rows,
)
from .tokenizers import count_tokens, register_tokenizer

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
