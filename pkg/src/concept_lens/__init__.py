"""Concept-subspace estimation, projection edits, and separability diagnostics."""

from .dataset import (Aggregation, ConceptLabel, LabelKind, PromptGrid,
                      RenderedPrompt, ScoreDataset, ScoreSample,
                      aggregate_vectors, content_label, read_dataset,
                      render_prompts, style_label, subspace_estimation_slice,
                      write_dataset)
from .diagnostics import (ClusteredCoords, JsMatrix, SeparabilityReport,
                          SeparabilityThresholds, Verdict, classify_separability,
                          cluster_coords, js_distance_matrix, nearest_style_report,
                          normalize_by_content, rank_templates, separability_report,
                          silhouette)
from .errors import (ArgumentError, ConceptLensError, ConvergenceError,
                     CorruptionError, DegenerateRangeError, FormatError,
                     InsufficientVariationError, RankDeficiencyError, ShapeError,
                     SpecError, ValidationError)
from .linalg import EigenResult, gram_eigen, projector_from_basis, sym_eigen
from .subspace import (ConceptSubspace, EditRequest, SubspaceBundle, edit,
                       estimate, estimate_bundle, estimate_per_timestep,
                       load_bundle, project_coords, save_bundle)
from .synthetic import (SyntheticModelSpec, generate, load_spec, model_vector,
                        save_spec, spec_hash, style_variation_basis,
                        true_style_projector)

__version__ = "0.1.0"
