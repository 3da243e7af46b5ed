"""Flat versus nested cross-validation for classifier selection."""
from .data import Dataset, FoldPlan, SplitPair, load_csv, stratified_holdout, stratified_kfold, subsample
from .learners import HyperGrid, HyperPoint, LearnerSpec, accuracy, create_grid, get_spec, train
from .protocol import Scenario, StudyRecord, run_repetition, run_study
from .selection import FlatResult, NestedResult, flat_cv, nested_cv, select_algorithm

__version__ = "0.1.0"
