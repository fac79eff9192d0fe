"""pentrace: pen-trajectory kinematics, stroke features, and cohort
classification experiments for digitizer handwriting data."""

from .errors import (MissingTraitError, ParseError, PentraceError,
                     SchemaError, ValidationError)
from .ink import (CATEGORIES, TASKS, Cohort, Participant, PenSample,
                  Recording, TaskSpec, TraitKind, load_participants,
                  load_recording, load_study, validate_study,
                  write_participants, write_recording)
from .kinematics import (BoundaryReason, KinematicSeries, SmoothingConfig,
                         Stroke, differentiate, estimate_derivatives,
                         gaussian_smooth, segment_strokes, split_by_kind)
from .features import (FEATURE_SETS, PERSONAL_FEATURES, STROKE_FEATURES,
                       FeatureVector, TaskFeatures, aggregate_task,
                       assemble_vector, dynamic_stroke_features,
                       extract_study, extract_task, load_feature_csv,
                       set_feature_names, static_stroke_features,
                       stroke_features, write_feature_csv)
from .learners import (Dataset, DTParams, GBTParams, MLPParams, RFParams,
                       SVMParams, TrainedModel, dataset_from_vectors,
                       default_params, feature_importance, load_model,
                       predict, predict_vector, save_model, train)
from .evaluation import (CLASSIFIERS, EvalReport, ExperimentConfig, FoldPlan,
                         cross_validate, derive_seed, make_folds,
                         run_merged_experiment, run_single_task_experiment,
                         vectors_by_task_and_set)
from .selection import (OccurrenceHistogram, SelectionTrace,
                        evaluate_selected, occurrence_histogram, rfe_select,
                        run_selection_experiment)
from .synth import (CohortProfile, StudyRecipe, generate_study, load_recipe,
                    pathology_contrast, write_study)

__version__ = "0.1.0"
