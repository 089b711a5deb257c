"""Matched text and image presentations of layout-defined tasks (matrix
transpose, Game of Life, LU decomposition), exact scoring and cell-level
error heatmaps."""

from .tasks import LUPair, Tolerances, Verdict, life_step, lu_generate, lu_verify, transpose
from .datagen import (Dataset, DatasetSpec, TaskInstance, build_dataset, export_dataset,
                      generate_instance, load_dataset)
from .textio import (ParseError, PromptBundle, build_prompt, parse_grid, parse_lu_pair,
                     parse_matrix, parse_response, serialize_grid, serialize_matrix,
                     strip_reasoning)
from .render import (FlowRenderSpec, GridRenderSpec, MatrixRenderSpec, RasterImage,
                     derive_flow_canvas_width, measure_text, render_flow, render_grid,
                     render_matrix)
from .evaluate import (EvalRecord, aggregate_accuracy, score_life, score_lu,
                       score_transpose)
from .analytics import ErrorHeatmap, cell_error_heatmap, export_report, heatmap_difference

__version__ = "0.1.0"
